//! Compiles a formula through each stage and prints what every pass added.
//!
//! ```bash
//! cargo run --example compile_pipeline [formula.etr]
//! ```

use etrnn::formula::parse_etr_inv;
use etrnn::lowering::{compile_staged, Stage};
use etrnn::network::{validate_instance, CostKind};

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).unwrap(),
        None => "x + y = z\nx * w = 1\n".to_string(),
    };
    let f = parse_etr_inv(&text).unwrap();
    print!("{f}");
    for stage in [Stage::Restricted, Stage::FixedFree, Stage::Plain] {
        let (inst, map) = compile_staged(&f, stage, CostKind::Mse).unwrap();
        let strict = validate_instance(&inst, true);
        println!(
            "\n{stage:?}: {} neurons, {} edges, {} data points, {} free weights, {} free biases, strict: {}",
            inst.neurons.len(),
            inst.edges.len(),
            inst.data.len(),
            inst.free_edges().len(),
            inst.free_biases().len(),
            if strict.is_ok() { "ok".to_string() } else { format!("{} violations", strict.violations.len()) }
        );
        for p in &map.passes {
            println!(
                "  {:<14} neurons {:>4}..{:<4} edges {:>4}..{:<4} data {:>4}..{:<4}",
                format!("{:?}", p.pass),
                p.neurons[0],
                p.neurons[1],
                p.edges[0],
                p.edges[1],
                p.data[0],
                p.data[1]
            );
        }
    }
}
