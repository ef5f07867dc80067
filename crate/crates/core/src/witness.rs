//! Witnesses for compiled instances: synthesis from formula solutions,
//! function-preserving canonicalization, and extraction of solutions from
//! zero-cost witnesses.
//!
//! A solution `x*` yields the witness that puts `x, -x, 1/x, -1/x, x` on the
//! five free edges of each variable gadget, the old value on each formerly
//! fixed edge, `(1, 1)` on each normalization pair, zero biases, and
//! `(1, -c)` on the two edges of every removed `?`, where `c` is the value
//! the network would otherwise produce there.
//!
//! Conversely, a zero-cost witness is canonicalized by folding all middle
//! biases into the outputs and rescaling each middle so that its
//! normalization edge is 1; the value slot of each gadget then holds a
//! solution of the combined formula.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::eval::{verify_witness, Dense, EvalError, Witness};
use crate::formula::{evaluate_formula, Assignment, FormulaError};
use crate::inveq::{pull_back, push_forward, InvEqError};
use crate::lowering::CompilationMap;
use crate::network::{Activation, EdgeId, NeuronId, Param, Role, SchemaError, TrainingInstance};
use crate::scalar::{Mode, Numeric, Rational, Scalar, ScalarError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WitnessError {
    #[error("the assignment does not satisfy the formula")]
    UnsatisfyingAssignment,
    #[error("variable `{0}` is zero but appears inverted")]
    ZeroInverse(String),
    #[error("neuron {0} does not use the identity activation")]
    NonIdentityActivation(NeuronId),
    #[error("bias of neuron {0} is fixed, so a bias cannot be folded into it")]
    FixedBias(NeuronId),
    #[error("edge {0} is fixed and cannot be rescaled")]
    FixedEdge(EdgeId),
    #[error("middle neuron {0} has a zero normalization weight")]
    ZeroScalingWeight(NeuronId),
    #[error("witness has cost {0}, not 0")]
    NotZeroCost(Scalar),
    #[error("extraction needs an exact witness")]
    NotExact,
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    InvEq(#[from] InvEqError),
    #[error(transparent)]
    Map(#[from] SchemaError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// Witness for `inst` (compiled together with `map`) from a solution of the
/// source formula. Float assignments are accepted when every residual is
/// within `tolerance`; exact ones must satisfy the formula exactly.
pub fn synthesize_witness(
    inst: &TrainingInstance,
    map: &CompilationMap,
    a: &Assignment,
    tolerance: f64,
) -> Result<Witness, WitnessError> {
    if !evaluate_formula(&map.source, a, tolerance)?.satisfied {
        return Err(WitnessError::UnsatisfyingAssignment);
    }
    let combined = push_forward(&map.combined, map.source.names(), a)?;
    assemble_witness(inst, map, &combined)
}

/// Witness built from values of the combined variables, without checking
/// that they satisfy anything. Used for approximants and perturbations.
pub fn assemble_witness(
    inst: &TrainingInstance,
    map: &CompilationMap,
    combined: &Assignment,
) -> Result<Witness, WitnessError> {
    map.check_against(inst)?;
    let mode = combined.mode()?.unwrap_or(Mode::Exact);
    let mut w = Witness::new(mode);
    let set = |w: &mut Witness, e: EdgeId, v: Scalar| {
        if inst.edges[e].weight.is_free() {
            w.weights.insert(e, v);
        }
    };
    for g in &map.slots.gadgets {
        let name = map.combined.name(g.var).to_string();
        let x = combined
            .get(g.var)
            .ok_or_else(|| InvEqError::MissingVariable(name.clone()))?
            .clone();
        let inv = x.recip().map_err(|_| WitnessError::ZeroInverse(name))?;
        set(&mut w, g.edges.w, x.neg());
        set(&mut w, g.edges.x, x.clone());
        set(&mut w, g.edges.y, inv.clone());
        set(&mut w, g.edges.z, inv.neg());
        set(&mut w, g.edges.v, x);
    }
    for f in &map.fixings {
        set(&mut w, f.edge, Scalar::from_i64(f.value.into(), mode));
    }
    for p in &map.normalization {
        set(&mut w, p.in_edge, Scalar::one(mode));
        set(&mut w, p.out_edge, Scalar::one(mode));
    }
    for n in inst.free_biases() {
        w.biases.insert(n, Scalar::zero(mode));
    }
    for r in &map.question_marks {
        w.weights.insert(r.in_edge, Scalar::one(mode));
        w.weights.insert(r.out_edge, Scalar::zero(mode));
    }
    if !map.question_marks.is_empty() {
        let corrections = match mode {
            Mode::Exact => question_corrections::<Rational>(inst, map, &w)?,
            Mode::Float => question_corrections::<f64>(inst, map, &w)?,
        };
        for (e, c) in corrections {
            w.weights.insert(e, c.neg());
        }
    }
    w.check_against(inst)?;
    Ok(w)
}

/// Value at each `?`'s output with its absorbing edge still 0.
fn question_corrections<T: Numeric>(
    inst: &TrainingInstance,
    map: &CompilationMap,
    w: &Witness,
) -> Result<Vec<(EdgeId, Scalar)>, WitnessError> {
    let dense = Dense::<T>::new(inst, w)?;
    let mut by_point: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    let mut out = Vec::with_capacity(map.question_marks.len());
    for r in &map.question_marks {
        let values = by_point.entry(r.data_point).or_insert_with(|| {
            let d = &inst.data[r.data_point];
            let x: Vec<T> = d.inputs.iter().map(T::from_rational).collect();
            dense.neuron_values(inst, &x)
        });
        let c = values[r.output].clone();
        out.push((r.out_edge, c.into_scalar()));
    }
    Ok(out)
}

fn weight_of(inst: &TrainingInstance, w: &Witness, e: EdgeId) -> Scalar {
    match &inst.edges[e].weight {
        Param::Fixed(r) => Scalar::Exact(r.clone()).to_mode(w.mode),
        Param::Free => w.weights[&e].clone(),
    }
}

fn check_identity(inst: &TrainingInstance) -> Result<(), WitnessError> {
    match inst
        .neurons
        .iter()
        .find(|n| n.role != Role::Input && n.activation != Some(Activation::Identity))
    {
        Some(n) => Err(WitnessError::NonIdentityActivation(n.id)),
        None => Ok(()),
    }
}

/// Moves every nonzero hidden bias `b` into the successors: `b_t += z * b`
/// for each outgoing edge of weight `z`, then `b = 0`. With identity
/// activations this computes the same function.
pub fn fold_biases(inst: &TrainingInstance, w: &Witness) -> Result<Witness, WitnessError> {
    w.check_against(inst)?;
    check_identity(inst)?;
    let topo = inst.topology().map_err(EvalError::from)?;
    let mut out = w.clone();
    for &m in &topo.order {
        if inst.neurons[m].role != Role::Hidden {
            continue;
        }
        let b = match out.biases.get(&m) {
            Some(b) if !b.is_zero() => b.clone(),
            _ => continue,
        };
        for e in inst.out_edges(m) {
            let bt = out
                .biases
                .get(&e.dst)
                .ok_or(WitnessError::FixedBias(e.dst))?;
            let shifted = bt.add(&weight_of(inst, w, e.id).mul(&b)?)?;
            out.biases.insert(e.dst, shifted);
        }
        out.biases.insert(m, Scalar::zero(w.mode));
    }
    Ok(out)
}

/// Rescales each middle that has a normalization pair by `1/z1`: incoming
/// weights and its bias are divided by `z1`, outgoing ones multiplied, so
/// the normalization edge becomes exactly 1.
pub fn normalize_witness(
    inst: &TrainingInstance,
    w: &Witness,
    map: &CompilationMap,
) -> Result<Witness, WitnessError> {
    w.check_against(inst)?;
    map.check_against(inst)?;
    let mut out = w.clone();
    for p in &map.normalization {
        let z1 = out.weights[&p.in_edge].clone();
        let alpha = z1
            .recip()
            .map_err(|_| WitnessError::ZeroScalingWeight(p.middle))?;
        scale_middle(inst, &mut out, p.middle, &alpha, &z1)?;
    }
    Ok(out)
}

/// Incoming edges and bias of `m` times `alpha`, outgoing edges times
/// `alpha_inv`.
pub fn scale_middle(
    inst: &TrainingInstance,
    w: &mut Witness,
    m: NeuronId,
    alpha: &Scalar,
    alpha_inv: &Scalar,
) -> Result<(), WitnessError> {
    let mut scale = |e: EdgeId, by: &Scalar| -> Result<(), WitnessError> {
        match w.weights.get_mut(&e) {
            Some(v) => {
                *v = v.mul(by)?;
                Ok(())
            }
            None => Err(WitnessError::FixedEdge(e)),
        }
    };
    for e in inst.in_edges(m) {
        scale(e.id, alpha)?;
    }
    for e in inst.out_edges(m) {
        scale(e.id, alpha_inv)?;
    }
    if let Some(b) = w.biases.get_mut(&m) {
        *b = b.mul(alpha)?;
    }
    Ok(())
}

/// Solution of the source formula encoded by an exact zero-cost witness.
pub fn extract_assignment(
    inst: &TrainingInstance,
    w: &Witness,
    map: &CompilationMap,
) -> Result<Assignment, WitnessError> {
    if w.mode != Mode::Exact {
        return Err(WitnessError::NotExact);
    }
    let report = verify_witness(inst, w, 0.0)?;
    if !report.total_cost.is_zero() {
        return Err(WitnessError::NotZeroCost(report.total_cost));
    }
    let folded = fold_biases(inst, w)?;
    let normal = normalize_witness(inst, &folded, map)?;
    let combined = read_value_slots(inst, &normal, map);
    let source = pull_back(&map.combined, &combined)?;
    if !evaluate_formula(&map.source, &source, 0.0)?.satisfied {
        return Err(WitnessError::Invariant(
            "extracted assignment does not satisfy the formula".into(),
        ));
    }
    Ok(source)
}

/// Values of the combined variables read from the value slots without any
/// checks or canonicalization.
pub fn read_value_slots(inst: &TrainingInstance, w: &Witness, map: &CompilationMap) -> Assignment {
    Assignment::from_values(map.slots.gadgets.iter().map(|g| weight_of(inst, w, g.edges.x)))
}
