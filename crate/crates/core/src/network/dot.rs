//! Graphviz rendering of an instance, optionally annotated with a witness.

use std::fmt::Write;

use super::{Param, Role, TrainingInstance};
use crate::eval::{EvalError, Witness};
use crate::scalar::format_rational;

/// Inputs are ranked as sources and outputs as sinks. Fixed weights show their
/// value; free weights show `w<edge>` or, with a witness, the witness value.
pub fn emit_dot(inst: &TrainingInstance, witness: Option<&Witness>) -> Result<String, EvalError> {
    if let Some(w) = witness {
        w.check_against(inst)?;
    }
    let mut out = String::from("digraph instance {\n");
    if inst.neurons.is_empty() {
        out.push_str("}\n");
        return Ok(out);
    }
    out.push_str("  rankdir=LR;\n");
    for n in &inst.neurons {
        let (prefix, shape) = match n.role {
            Role::Input => ("s", "box"),
            Role::Hidden => ("m", "circle"),
            Role::Output => ("t", "doublecircle"),
        };
        let mut label = format!("{prefix}{}", n.id);
        match (&n.bias, witness) {
            (Some(Param::Fixed(b)), _) if !num_traits::Zero::is_zero(b) => {
                let _ = write!(label, "\\nb={}", format_rational(b));
            }
            (Some(Param::Free), Some(w)) => {
                let _ = write!(label, "\\nb={}", w.biases[&n.id]);
            }
            _ => {}
        }
        let _ = writeln!(out, "  n{} [label=\"{label}\", shape={shape}];", n.id);
    }
    for (role, rank) in [(Role::Input, "source"), (Role::Output, "sink")] {
        let ids: Vec<String> = inst
            .neurons
            .iter()
            .filter(|n| n.role == role)
            .map(|n| format!("n{}", n.id))
            .collect();
        if !ids.is_empty() {
            let _ = writeln!(out, "  {{ rank={rank}; {}; }}", ids.join("; "));
        }
    }
    for e in &inst.edges {
        let (label, style) = match (&e.weight, witness) {
            (Param::Fixed(v), _) => (format_rational(v), ", style=bold"),
            (Param::Free, Some(w)) => (w.weights[&e.id].to_string(), ""),
            (Param::Free, None) => (format!("w{}", e.id), ""),
        };
        let _ = writeln!(out, "  n{} -> n{} [label=\"{label}\"{style}];", e.src, e.dst);
    }
    out.push_str("}\n");
    Ok(out)
}
