//! Exact grid search on restricted instances, then reading the solution back.
//!
//! ```bash
//! cargo run --release --example grid_search
//! ```

use std::time::Instant;

use etrnn::formula::parse_etr_inv;
use etrnn::lowering::{compile_staged, Stage};
use etrnn::network::CostKind;
use etrnn::scalar::Scalar;
use etrnn::solver::grid_search;
use etrnn::witness::extract_assignment;

fn main() {
    let grid: Vec<Scalar> = [(-2, 1), (-1, 1), (-1, 2), (1, 2), (1, 1), (2, 1)]
        .iter()
        .map(|&(p, q)| Scalar::ratio(p, q))
        .collect();
    for text in ["x + y = z", "x * y = 1", "x + x = y\nx * y = 1", "a * b = 1\nb * c = 1"] {
        let f = parse_etr_inv(text).unwrap();
        let (inst, map) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
        let start = Instant::now();
        let found = grid_search(&inst, &grid, 10_000_000).unwrap();
        print!("{:<24} {:>3} params  {:>8.2?}  ", text.replace('\n', ", "), inst.free_edges().len(), start.elapsed());
        match found {
            Some(w) => {
                let a = extract_assignment(&inst, &w, &map).unwrap();
                let values: Vec<String> = a
                    .to_names(f.names())
                    .into_iter()
                    .map(|(n, v)| format!("{n}={v}"))
                    .collect();
                println!("{}", values.join(" "));
            }
            // no grid point, which says nothing about real solutions
            None => println!("none on the grid"),
        }
    }
}
