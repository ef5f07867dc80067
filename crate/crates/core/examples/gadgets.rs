//! The three gadgets, their data points, and a check of each zero set on a
//! few points.
//!
//! ```bash
//! cargo run --example gadgets
//! ```

use etrnn::eval::{total_cost, Witness};
use etrnn::formula::VarId;
use etrnn::gadgets::{
    build_inversion_gadget, build_subtraction_gadget, build_variable_gadget, GadgetInstance,
};
use etrnn::network::Target;
use etrnn::scalar::{Mode, Scalar};

fn show(name: &str, g: &GadgetInstance) {
    let inst = &g.instance;
    println!(
        "{name}: {} neurons, {} edges ({} fixed), free edges {:?}",
        inst.neurons.len(),
        inst.edges.len(),
        inst.fixed_edges().len(),
        g.free_edges
    );
    for d in &inst.data {
        let ins: Vec<String> = d.inputs.iter().map(ToString::to_string).collect();
        let outs: Vec<String> = d
            .outputs
            .iter()
            .map(|t| match t {
                Target::Value(v) => v.to_string(),
                Target::Ignore => "?".into(),
            })
            .collect();
        println!("  ({} ; {})", ins.join(","), outs.join(","));
    }
}

fn cost(g: &GadgetInstance, values: &[Scalar]) -> Scalar {
    let mut w = Witness::new(Mode::Exact);
    for (e, v) in g.free_edges.iter().zip(values) {
        w.weights.insert(*e, v.clone());
    }
    total_cost(&g.instance, &w).unwrap()
}

fn main() {
    let r = Scalar::ratio;
    let sub = build_subtraction_gadget();
    show("subtraction", &sub);
    for p in [[r(3, 1), r(-3, 1)], [r(3, 1), r(3, 1)]] {
        println!("  x, y = {}, {} -> cost {}", p[0], p[1], cost(&sub, &p));
    }

    let inv = build_inversion_gadget();
    show("inversion", &inv);
    for p in [[r(2, 1), r(1, 2), r(2, 1)], [r(2, 1), r(1, 2), r(1, 1)]] {
        println!("  x, y, z = {}, {}, {} -> cost {}", p[0], p[1], p[2], cost(&inv, &p));
    }

    let (var, _) = build_variable_gadget(VarId(0));
    show("variable", &var);
    let t = r(3, 4);
    let on = [t.neg(), t.clone(), t.recip().unwrap(), t.recip().unwrap().neg(), t.clone()];
    println!("  t = 3/4 on the zero set -> cost {}", cost(&var, &on));
    let mut off = on.clone();
    off[4] = r(1, 1);
    println!("  v moved to 1            -> cost {}", cost(&var, &off));
}
