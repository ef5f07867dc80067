//! Lowering a formula to combined constraints `±a^e + ±b^e - c^e = 0`, and
//! moving a solution across in both directions.
//!
//! ```bash
//! cargo run --example combined_lowering
//! ```

use etrnn::formula::{parse_etr_inv, Assignment};
use etrnn::inveq::{check_combined, lower_to_combined, pull_back, push_forward};
use etrnn::scalar::Scalar;

fn main() {
    let f = parse_etr_inv("x + y = z\nx * w = 1\nw * w2 = 1").unwrap();
    let cf = lower_to_combined(&f);
    println!("source:\n{f}");
    println!("combined ({} variables):\n{cf}", cf.num_vars());
    for (v, origin) in cf.origins().iter().enumerate() {
        println!("  {:<8} {origin:?}", cf.names()[v]);
    }

    let a = Assignment::from_values(
        [(2, 1), (1, 1), (3, 1), (1, 2), (2, 1)].map(|(p, q)| Scalar::ratio(p, q)),
    );
    let pushed = push_forward(&cf, f.names(), &a).unwrap();
    println!("\npushed forward:");
    for (name, v) in pushed.to_names(cf.names()) {
        println!("  {name} = {v}");
    }
    let report = check_combined(&cf, &pushed, 0.0).unwrap();
    println!("combined constraints satisfied: {}", report.satisfied);
    println!("pulled back equals the original: {}", pull_back(&cf, &pushed).unwrap() == a);
}
