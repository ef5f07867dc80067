//! Graphviz for a restricted instance with a witness on its edges.
//!
//! ```bash
//! cargo run --example dot > gadget.dot && dot -Tsvg gadget.dot -o gadget.svg
//! ```

use etrnn::formula::{parse_etr_inv, Assignment};
use etrnn::lowering::{compile_staged, Stage};
use etrnn::network::{emit_dot, CostKind};
use etrnn::scalar::Scalar;
use etrnn::witness::synthesize_witness;

fn main() {
    let f = parse_etr_inv("x * y = 1").unwrap();
    let (inst, map) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
    let a = Assignment::from_values([Scalar::integer(2), Scalar::ratio(1, 2)]);
    let w = synthesize_witness(&inst, &map, &a, 0.0).unwrap();
    print!("{}", emit_dot(&inst, Some(&w)).unwrap());
}
