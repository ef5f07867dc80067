//! Two small hand-built instances in the shape of a textbook illustration.
//!
//! Illustrative only: the wirings are made up so that the numbers work out,
//! they are not taken from anywhere and nothing is tested against them.
//!
//! * `plain`: three inputs, two hidden neurons, three outputs, fully
//!   connected, identity activations, mse, threshold 10, data points
//!   `(1,2,3 ; 1,2,3)` and `(3,2,1 ; 2,4,6)`.
//! * `restricted`: free weights `x, y, z` among fixed ones, l1 cost,
//!   threshold 7, data points `(0,1,1 ; 1,1,?)` and `(2,1,0 ; ?,?,0)`. At
//!   `(x, y, z) = (1, 0, -1)` the total error is `4 + 2 = 6`.
//!
//! With `--write DIR` both instances are also written as JSON files.
//!
//! ```bash
//! cargo run --example illustrative -- --write crates/core/examples/data
//! ```

use std::path::PathBuf;

use etrnn::eval::{verify_witness, Witness};
use etrnn::network::{
    encode_instance, Activation, CostKind, DataPoint, InstanceKind, Param, Role, TrainingInstance,
};
use etrnn::scalar::{rational, Mode, Scalar};

fn plain() -> TrainingInstance {
    let mut inst = TrainingInstance::new(InstanceKind::Plain, CostKind::Mse);
    inst.threshold = rational(10, 1);
    let inputs: Vec<_> = (0..3).map(|_| inst.add_input()).collect();
    let hidden: Vec<_> = (0..2)
        .map(|_| inst.add_neuron(Role::Hidden, Activation::Identity, Param::Free))
        .collect();
    let outputs: Vec<_> = (0..3)
        .map(|_| inst.add_neuron(Role::Output, Activation::Identity, Param::Free))
        .collect();
    for &s in &inputs {
        for &h in &hidden {
            inst.add_edge(s, h, Param::Free);
        }
    }
    for &h in &hidden {
        for &t in &outputs {
            inst.add_edge(h, t, Param::Free);
        }
    }
    inst.data.push(DataPoint::from_ints(&[1, 2, 3], &[Some(1), Some(2), Some(3)]));
    inst.data.push(DataPoint::from_ints(&[3, 2, 1], &[Some(2), Some(4), Some(6)]));
    inst
}

/// Returns the instance and the ids of the free edges `x, y, z`.
fn restricted() -> (TrainingInstance, [usize; 3]) {
    let mut inst = TrainingInstance::new(InstanceKind::Restricted, CostKind::L1);
    inst.threshold = rational(7, 1);
    let zero = || Param::fixed_int(0);
    let s: Vec<_> = (0..3).map(|_| inst.add_input()).collect();
    let h1 = inst.add_neuron(Role::Hidden, Activation::Identity, zero());
    let h2 = inst.add_neuron(Role::Hidden, Activation::Identity, zero());
    let t: Vec<_> = (0..3)
        .map(|_| inst.add_neuron(Role::Output, Activation::Identity, zero()))
        .collect();
    let x = inst.add_edge(s[0], h1, Param::Free);
    inst.add_edge(s[1], h1, Param::fixed_int(1));
    let y = inst.add_edge(s[2], h2, Param::Free);
    inst.add_edge(s[0], h2, Param::fixed_int(1));
    inst.add_edge(h1, t[0], Param::fixed_int(1));
    inst.add_edge(h1, t[1], Param::fixed_int(5));
    inst.add_edge(h2, t[1], Param::fixed_int(1));
    let z = inst.add_edge(h2, t[2], Param::Free);
    inst.data.push(DataPoint::from_ints(&[0, 1, 1], &[Some(1), Some(1), None]));
    inst.data.push(DataPoint::from_ints(&[2, 1, 0], &[None, None, Some(0)]));
    (inst, [x, y, z])
}

fn main() {
    let write_dir = std::env::args()
        .skip_while(|a| a != "--write")
        .nth(1)
        .map(PathBuf::from);

    let plain = plain();
    // all weights 0 and output biases at the target means: outputs are constant
    let mut w = Witness::new(Mode::Exact);
    for e in plain.free_edges() {
        w.weights.insert(e, Scalar::integer(0));
    }
    for n in plain.free_biases() {
        w.biases.insert(n, Scalar::integer(0));
    }
    for (t, mean) in plain.output_ids().into_iter().zip([(3, 2), (3, 1), (9, 2)]) {
        w.biases.insert(t, Scalar::ratio(mean.0, mean.1));
    }
    let r = verify_witness(&plain, &w, 0.0).unwrap();
    println!("plain:      constant outputs (3/2, 3, 9/2)  cost {}  accepted {}", r.total_cost, r.accepted);

    let (restricted, [x, y, z]) = restricted();
    let mut w = Witness::new(Mode::Exact);
    w.weights.insert(x, Scalar::integer(1));
    w.weights.insert(y, Scalar::integer(0));
    w.weights.insert(z, Scalar::integer(-1));
    let r = verify_witness(&restricted, &w, 0.0).unwrap();
    let per: Vec<String> = r.per_datapoint.iter().map(ToString::to_string).collect();
    println!(
        "restricted: (x, y, z) = (1, 0, -1)         cost {} = {}  accepted {}",
        r.total_cost,
        per.join(" + "),
        r.accepted
    );

    if let Some(dir) = write_dir {
        std::fs::write(dir.join("illustrative_plain.json"), encode_instance(&plain)).unwrap();
        std::fs::write(dir.join("illustrative_restricted.json"), encode_instance(&restricted)).unwrap();
        println!("wrote {}", dir.display());
    }
}
