//! `x + x = y, x * y = 1` forces `x = ±1/sqrt(2)`. Float witnesses get within
//! rounding of zero cost; exact rational ones never reach it.
//!
//! ```bash
//! cargo run --example irrational
//! ```

use etrnn::eval::verify_witness;
use etrnn::formula::{parse_etr_inv, Assignment};
use etrnn::inveq::push_forward;
use etrnn::lowering::compile_full;
use etrnn::scalar::Scalar;
use etrnn::witness::{assemble_witness, synthesize_witness};

fn main() {
    let f = parse_etr_inv("x + x = y\nx * y = 1").unwrap();
    let (inst, map) = compile_full(&f).unwrap();

    let x = std::f64::consts::FRAC_1_SQRT_2;
    let a = Assignment::from_values([Scalar::Float(x), Scalar::Float(2.0 * x)]);
    let w = synthesize_witness(&inst, &map, &a, 1e-12).unwrap();
    let r = verify_witness(&inst, &w, 1e-12).unwrap();
    println!("float x = {x}: cost {:e}, accepted at 1e-12: {}", r.total_cost.to_f64(), r.accepted);

    // 1/1, 2/3, 5/7, 12/17, ... approach 1/sqrt(2)
    let (mut p, mut q) = (1i64, 1i64);
    for _ in 0..8 {
        let r = Scalar::ratio(p, q);
        let source = Assignment::from_values([r.clone(), r.add(&r).unwrap()]);
        let combined = push_forward(&map.combined, f.names(), &source).unwrap();
        let w = assemble_witness(&inst, &map, &combined).unwrap();
        let cost = verify_witness(&inst, &w, 0.0).unwrap().total_cost;
        println!("exact x = {:<9} cost {} ({:.2e})", r.to_string(), cost, cost.to_f64());
        (p, q) = (p + q, 2 * p + q);
    }
}
