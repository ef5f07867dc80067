//! Solution -> witness -> solution, including through a witness that was
//! rescaled and had biases pushed around (the function it computes is the
//! same, so it still has zero cost).
//!
//! ```bash
//! cargo run --example round_trip
//! ```

use etrnn::eval::verify_witness;
use etrnn::formula::{parse_etr_inv, Assignment};
use etrnn::lowering::compile_full;
use etrnn::scalar::Scalar;
use etrnn::witness::{
    extract_assignment, fold_biases, normalize_witness, read_value_slots, scale_middle,
    synthesize_witness,
};

fn main() {
    let f = parse_etr_inv("x + y = z\nz * w = 1").unwrap();
    let a = Assignment::from_values([(1, 3), (2, 3), (1, 1), (1, 1)].map(|(p, q)| Scalar::ratio(p, q)));
    let (inst, map) = compile_full(&f).unwrap();
    let w = synthesize_witness(&inst, &map, &a, 0.0).unwrap();
    let report = verify_witness(&inst, &w, 0.0).unwrap();
    println!("synthesized: {} weights, {} biases, cost {}", w.weights.len(), w.biases.len(), report.total_cost);

    // scale every middle neuron by 3 and move 1/2 into each middle bias
    let mut s = w.clone();
    for m in inst.hidden_ids() {
        scale_middle(&inst, &mut s, m, &Scalar::integer(3), &Scalar::ratio(1, 3)).unwrap();
        let beta = Scalar::ratio(1, 2);
        s.biases.insert(m, s.biases[&m].add(&beta).unwrap());
        for e in inst.out_edges(m) {
            let shift = s.weights[&e.id].mul(&beta).unwrap();
            s.biases.insert(e.dst, s.biases[&e.dst].sub(&shift).unwrap());
        }
    }
    println!("scrambled:   cost {}", verify_witness(&inst, &s, 0.0).unwrap().total_cost);
    let normal = normalize_witness(&inst, &fold_biases(&inst, &s).unwrap(), &map).unwrap();
    // normalization pins the value slots, not every weight
    println!(
        "value slots after folding and normalizing match: {}",
        read_value_slots(&inst, &normal, &map) == read_value_slots(&inst, &w, &map)
    );

    let back = extract_assignment(&inst, &s, &map).unwrap();
    for (name, v) in back.to_names(f.names()) {
        println!("  {name} = {v}");
    }
}
