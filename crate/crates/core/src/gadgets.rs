//! Gadgets of the restricted-training encoding and the compiler from combined
//! formulas to restricted instances.
//!
//! All gadgets use identity activations, biases fixed to zero, threshold zero
//! and fixed weights in `{+1, -1}`.
//!
//! Subtraction gadget: inputs `s1, s2`, middles `m1, m2`, output `a`.
//!
//! ```text
//! s1 -x-> m1 -1-> a        data (1,1 ; 0)  forces x + y = 0
//! s2 -y-> m2 -1-> a
//! ```
//!
//! Inversion gadget: inputs `s1, s2, s3`, middles `m1, m2`, output `t`.
//!
//! ```text
//! s1 -x-> m1 -1-> t        data (0,1,0 ; 1)  forces y z = 1
//! s2 -y-> m2 -z-> t        data (1,0,1 ; 0)  forces x - z = 0
//! s3 -(-1)-> m2
//! ```
//!
//! Variable gadget: inputs `s1..s5`, middles `m1..m4`, outputs `a, b`.
//!
//! ```text
//! s1 -w-> m1 -1-> a
//! s2 -x-> m2 -1-> a, m2 -1-> b
//! s3 -y-> m3 -1-> a, m3 -v-> b,  s5 -(-1)-> m3
//! s4 -z-> m4 -1-> a
//! ```
//!
//! with data points
//!
//! ```text
//! d1 = (1,1,0,0,0 ; 0,?)   w + x = 0
//! d2 = (0,0,1,1,0 ; 0,?)   y + z = 0
//! d3 = (0,0,1,0,0 ; ?,1)   y v = 1
//! d4 = (0,1,0,0,1 ; ?,0)   x - v = 0
//! ```
//!
//! so a zero-cost witness has `x != 0`, `w = -x`, `y = 1/x`, `z = -1/x` and
//! `v = x`. The four first-layer weights `x, -x, 1/x, -1/x` are the slots a
//! combined constraint reads from.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::VarId;
use crate::inveq::{split_repeated_terms, CombinedConstraint, CombinedFormula, Exponent, Sign};
use crate::network::{
    Activation, CostKind, DataPoint, EdgeId, InstanceKind, NeuronId, Param, Role, Target,
    TrainingInstance,
};
use crate::scalar::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GadgetError {
    #[error("the combined formula has no variables")]
    EmptyFormula,
    #[error("constraint {constraint} needs the same slot input twice")]
    SlotCollision { constraint: usize },
    #[error("variable {0:?} has no gadget")]
    UnknownVariable(VarId),
}

/// A restricted instance built by one of the gadget constructors, with its
/// free edges listed in role order.
#[derive(Clone, Debug, PartialEq)]
pub struct GadgetInstance {
    pub instance: TrainingInstance,
    pub free_edges: Vec<EdgeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotForm {
    Value,
    Negated,
    Inverse,
    NegatedInverse,
}

impl SlotForm {
    pub const ALL: [SlotForm; 4] = [
        SlotForm::Value,
        SlotForm::Negated,
        SlotForm::Inverse,
        SlotForm::NegatedInverse,
    ];

    pub fn of_term(sign: Sign, exponent: Exponent) -> Self {
        match (sign, exponent) {
            (Sign::Plus, Exponent::Pos) => SlotForm::Value,
            (Sign::Minus, Exponent::Pos) => SlotForm::Negated,
            (Sign::Plus, Exponent::Neg) => SlotForm::Inverse,
            (Sign::Minus, Exponent::Neg) => SlotForm::NegatedInverse,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRef {
    pub edge: EdgeId,
    pub input: NeuronId,
}

/// Free edges of one variable gadget, named after their zero-cost values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetEdges {
    /// `s1 -> m1`, carries `-x`
    pub w: EdgeId,
    /// `s2 -> m2`, carries `x`
    pub x: EdgeId,
    /// `s3 -> m3`, carries `1/x`
    pub y: EdgeId,
    /// `s4 -> m4`, carries `-1/x`
    pub z: EdgeId,
    /// `m3 -> b`, carries `x`
    pub v: EdgeId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableGadget {
    pub var: VarId,
    pub inputs: [NeuronId; 5],
    pub middles: [NeuronId; 4],
    pub edges: GadgetEdges,
}

impl VariableGadget {
    pub fn slot(&self, form: SlotForm) -> SlotRef {
        let (edge, input) = match form {
            SlotForm::Value => (self.edges.x, self.inputs[1]),
            SlotForm::Negated => (self.edges.w, self.inputs[0]),
            SlotForm::Inverse => (self.edges.y, self.inputs[2]),
            SlotForm::NegatedInverse => (self.edges.z, self.inputs[3]),
        };
        SlotRef { edge, input }
    }
}

/// Slot lookup for every variable of a compiled combined formula, indexed by
/// combined variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTable {
    pub gadgets: Vec<VariableGadget>,
}

impl SlotTable {
    pub fn gadget(&self, v: VarId) -> Result<&VariableGadget, GadgetError> {
        self.gadgets
            .get(v.0)
            .filter(|g| g.var == v)
            .ok_or(GadgetError::UnknownVariable(v))
    }

    pub fn slot(&self, v: VarId, form: SlotForm) -> Result<SlotRef, GadgetError> {
        self.gadget(v).map(|g| g.slot(form))
    }
}

fn restricted() -> TrainingInstance {
    TrainingInstance::new(InstanceKind::Restricted, CostKind::Mse)
}

fn zero_bias() -> Param {
    Param::fixed_int(0)
}

fn add_middle(inst: &mut TrainingInstance) -> NeuronId {
    inst.add_neuron(Role::Hidden, Activation::Identity, zero_bias())
}

fn add_output(inst: &mut TrainingInstance) -> NeuronId {
    inst.add_neuron(Role::Output, Activation::Identity, zero_bias())
}

/// Five neurons, four edges (two fixed to 1) and the data point `(1,1 ; 0)`.
pub fn build_subtraction_gadget() -> GadgetInstance {
    let mut inst = restricted();
    let s1 = inst.add_input();
    let s2 = inst.add_input();
    let m1 = add_middle(&mut inst);
    let m2 = add_middle(&mut inst);
    let a = add_output(&mut inst);
    let x = inst.add_edge(s1, m1, Param::Free);
    let y = inst.add_edge(s2, m2, Param::Free);
    inst.add_edge(m1, a, Param::fixed_int(1));
    inst.add_edge(m2, a, Param::fixed_int(1));
    inst.data.push(DataPoint::from_ints(&[1, 1], &[Some(0)]));
    GadgetInstance {
        instance: inst,
        free_edges: vec![x, y],
    }
}

/// Six neurons, five edges (two fixed) and data points `(0,1,0 ; 1)`,
/// `(1,0,1 ; 0)`.
pub fn build_inversion_gadget() -> GadgetInstance {
    let mut inst = restricted();
    let s1 = inst.add_input();
    let s2 = inst.add_input();
    let s3 = inst.add_input();
    let m1 = add_middle(&mut inst);
    let m2 = add_middle(&mut inst);
    let t = add_output(&mut inst);
    let x = inst.add_edge(s1, m1, Param::Free);
    let y = inst.add_edge(s2, m2, Param::Free);
    let z = inst.add_edge(m2, t, Param::Free);
    inst.add_edge(m1, t, Param::fixed_int(1));
    inst.add_edge(s3, m2, Param::fixed_int(-1));
    inst.data.push(DataPoint::from_ints(&[0, 1, 0], &[Some(1)]));
    inst.data.push(DataPoint::from_ints(&[1, 0, 1], &[Some(0)]));
    GadgetInstance {
        instance: inst,
        free_edges: vec![x, y, z],
    }
}

/// Adds the neurons of `vars.len()` variable gadgets in the order all inputs,
/// all middles, then the shared outputs `a, b`, followed by each gadget's
/// edges. Returns the gadgets and `(a, b)`.
fn wire_variable_gadgets(
    inst: &mut TrainingInstance,
    vars: &[VarId],
) -> (Vec<VariableGadget>, NeuronId, NeuronId) {
    let inputs: Vec<[NeuronId; 5]> = vars
        .iter()
        .map(|_| std::array::from_fn(|_| inst.add_input()))
        .collect();
    let middles: Vec<[NeuronId; 4]> = vars
        .iter()
        .map(|_| std::array::from_fn(|_| add_middle(inst)))
        .collect();
    let a = add_output(inst);
    let b = add_output(inst);
    let gadgets = vars
        .iter()
        .zip(inputs.into_iter().zip(middles))
        .map(|(&var, (s, m))| {
            let edges = GadgetEdges {
                w: inst.add_edge(s[0], m[0], Param::Free),
                x: inst.add_edge(s[1], m[1], Param::Free),
                y: inst.add_edge(s[2], m[2], Param::Free),
                z: inst.add_edge(s[3], m[3], Param::Free),
                v: inst.add_edge(m[2], b, Param::Free),
            };
            for &mid in &m {
                inst.add_edge(mid, a, Param::fixed_int(1));
            }
            inst.add_edge(m[1], b, Param::fixed_int(1));
            inst.add_edge(s[4], m[2], Param::fixed_int(-1));
            VariableGadget {
                var,
                inputs: s,
                middles: m,
                edges,
            }
        })
        .collect();
    (gadgets, a, b)
}

/// The four data points of one gadget over an instance with `n_inputs`
/// inputs numbered by id and outputs `(a, b)`.
fn variable_data_points(g: &VariableGadget, n_inputs: usize) -> [DataPoint; 4] {
    let point = |ones: &[usize], a: Option<i64>, b: Option<i64>| {
        let mut inputs = vec![Rational::from_integer(0.into()); n_inputs];
        for &k in ones {
            inputs[g.inputs[k]] = Rational::from_integer(1.into());
        }
        DataPoint {
            inputs,
            outputs: vec![
                a.map_or(Target::Ignore, Target::int),
                b.map_or(Target::Ignore, Target::int),
            ],
        }
    };
    [
        point(&[0, 1], Some(0), None),
        point(&[2, 3], Some(0), None),
        point(&[2], None, Some(1)),
        point(&[1, 4], None, Some(0)),
    ]
}

/// Eleven neurons, eleven edges (six fixed) and the four data points above.
pub fn build_variable_gadget(v: VarId) -> (GadgetInstance, VariableGadget) {
    let mut inst = restricted();
    let (gadgets, _, _) = wire_variable_gadgets(&mut inst, &[v]);
    let g = gadgets[0];
    inst.data.extend(variable_data_points(&g, 5));
    let e = g.edges;
    (
        GadgetInstance {
            instance: inst,
            free_edges: vec![e.w, e.x, e.y, e.z, e.v],
        },
        g,
    )
}

/// The data point enforcing `c`: input 1 at the three slot inputs, target 0
/// at `a` and `?` at `b`. Expects the instance produced by
/// [`compile_restricted`] (inputs first, outputs `a, b`).
pub fn add_combined_constraint_datapoint(
    inst: &TrainingInstance,
    c: &CombinedConstraint,
    slots: &SlotTable,
) -> Result<DataPoint, GadgetError> {
    let n_inputs = inst.input_ids().len();
    let mut inputs = vec![Rational::from_integer(0.into()); n_inputs];
    let mut used = BTreeSet::new();
    for t in c.terms() {
        let slot = slots.slot(t.var, SlotForm::of_term(t.sign, t.exponent))?;
        if !used.insert(slot.input) {
            return Err(GadgetError::SlotCollision { constraint: 0 });
        }
        inputs[slot.input] = Rational::from_integer(1.into());
    }
    Ok(DataPoint {
        inputs,
        outputs: vec![Target::int(0), Target::Ignore],
    })
}

/// Result of [`compile_restricted`]. `formula` is the combined formula that
/// was actually compiled: the input with repeated terms split into aliases.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedCompilation {
    pub instance: TrainingInstance,
    pub slots: SlotTable,
    pub formula: CombinedFormula,
}

/// One variable gadget per combined variable with the outputs `a, b` shared,
/// the `4n` gadget data points, then one data point per combined constraint.
pub fn compile_restricted(cf: &CombinedFormula) -> Result<RestrictedCompilation, GadgetError> {
    if cf.num_vars() == 0 {
        return Err(GadgetError::EmptyFormula);
    }
    let formula = split_repeated_terms(cf);
    let mut inst = restricted();
    let vars: Vec<VarId> = formula.variables().collect();
    let (gadgets, _, _) = wire_variable_gadgets(&mut inst, &vars);
    let n_inputs = inst.input_ids().len();
    for g in &gadgets {
        inst.data.extend(variable_data_points(g, n_inputs));
    }
    let slots = SlotTable { gadgets };
    for (k, c) in formula.constraints().iter().enumerate() {
        let d = add_combined_constraint_datapoint(&inst, c, &slots).map_err(|e| match e {
            GadgetError::SlotCollision { .. } => GadgetError::SlotCollision { constraint: k },
            other => other,
        })?;
        inst.data.push(d);
    }
    Ok(RestrictedCompilation {
        instance: inst,
        slots,
        formula,
    })
}
