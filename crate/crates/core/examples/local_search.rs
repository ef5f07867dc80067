//! Gradient descent with restarts on restricted instances, then lifting the
//! float witness to the plain instance.
//!
//! The restricted stage has five free weights per combined variable and no
//! biases, which keeps fixed-step descent well conditioned. The plain
//! instance of the same formula has hundreds of parameters feeding three
//! outputs, and the same step size either diverges or crawls.
//!
//! `x + x = x, x * y = 1` is unsatisfiable (it forces `x = 0`), so its best
//! cost stays away from zero.
//!
//! ```bash
//! cargo run --release --example local_search
//! ```

use std::time::Instant;

use etrnn::eval::verify_witness;
use etrnn::formula::parse_etr_inv;
use etrnn::lowering::{compile_full, compile_staged, Stage};
use etrnn::network::CostKind;
use etrnn::solver::{local_search, SolverConfig};
use etrnn::witness::{assemble_witness, read_value_slots};

fn main() {
    let cfg = SolverConfig::default();
    for text in ["x + y = z", "x * y = 1", "x + y = z\nx * z = 1", "x + x = x\nx * y = 1"] {
        let f = parse_etr_inv(text).unwrap();
        let (restricted, rmap) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
        let start = Instant::now();
        let r = local_search(&restricted, &cfg).unwrap();
        println!(
            "{:<22} {:>3} params  best cost {:.3e}  restart {:>3} of {:>3}  {:.2?}",
            text.replace('\n', ", "),
            r.witness.weights.len(),
            r.cost,
            r.restart,
            r.restarts_run,
            start.elapsed()
        );
        if r.cost < cfg.tolerance {
            // the value slots hold an approximate combined solution
            let (plain, pmap) = compile_full(&f).unwrap();
            let values = read_value_slots(&restricted, &r.witness, &rmap);
            let lifted = assemble_witness(&plain, &pmap, &values).unwrap();
            let report = verify_witness(&plain, &lifted, 1e-8).unwrap();
            println!("{:<22} lifted to plain: cost {:.3e}", "", report.total_cost.to_f64());
        }
    }
}
