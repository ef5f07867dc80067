//! Rewriting passes from restricted instances to plain training instances,
//! and the end-to-end compiler.
//!
//! 1. [`remove_fixed_weights`] adds an output `q` and, per middle `m`, an input
//!    `s_m` with free edges `s_m -> m`, `m -> q`. The data point `d(m)` forces
//!    `z1 * z2 = 1` on that pair; one more data point per fixed edge pins the
//!    edge to its old value once `z1 = 1`.
//! 2. [`add_bias_anchor`] appends the all-zero data point and frees all biases.
//! 3. [`remove_question_marks`] gives every `?` its own input and middle whose
//!    output edge can absorb the ignored value, and replaces `?` by 0.
//!
//! Every pass only appends neurons, edges and data points, so ids stay valid
//! across the pipeline and the [`CompilationMap`] can refer to them.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::EtrInvFormula;
use crate::gadgets::{compile_restricted, GadgetError, SlotTable};
use crate::inveq::{lower_to_combined, CombinedFormula};
use crate::network::{
    Activation, CostKind, DataPoint, EdgeId, InstanceKind, NeuronId, Param, Role, SchemaError,
    Target, TrainingInstance,
};
use crate::scalar::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoweringError {
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error("edge {0} does not go from an input to a middle or from a middle to an output")]
    NotTwoLayer(EdgeId),
    #[error("fixed weight on edge {0} is not +1 or -1")]
    NonUnitFixedWeight(EdgeId),
    #[error("middle neuron {0} has no incident fixed edge")]
    UnfixableMiddle(NeuronId),
    #[error("fixed edge {0} starts at an input that feeds several middles")]
    AmbiguousIncomingFix(EdgeId),
    #[error("fixed edge {0} (-1 from a middle to an output) cannot be encoded with 0/1 data")]
    UnsupportedFixedEdge(EdgeId),
    #[error("pass order violated: {0}")]
    PassOrder(String),
}

/// How far [`compile_staged`] runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Gadget output: fixed weights, fixed zero biases, `?` targets.
    Restricted,
    /// After fixed-weight removal; biases still fixed, `?` still present.
    FixedFree,
    /// Plain training instance.
    Plain,
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "restricted" => Ok(Stage::Restricted),
            "fixedfree" => Ok(Stage::FixedFree),
            "plain" => Ok(Stage::Plain),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Gadgets,
    FixedWeights,
    BiasAnchor,
    QuestionMarks,
}

/// Half-open id ranges `[start, end)` appended by one pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRange {
    pub pass: Pass,
    pub neurons: [usize; 2],
    pub edges: [usize; 2],
    pub data: [usize; 2],
}

impl PassRange {
    fn between(pass: Pass, before: &TrainingInstance, after: &TrainingInstance) -> Self {
        PassRange {
            pass,
            neurons: [before.neurons.len(), after.neurons.len()],
            edges: [before.edges.len(), after.edges.len()],
            data: [before.data.len(), after.data.len()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPair {
    pub middle: NeuronId,
    pub input: NeuronId,
    /// `s_m -> m`
    pub in_edge: EdgeId,
    /// `m -> q`
    pub out_edge: EdgeId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixKind {
    /// `m -> t` with value +1: input `s_m`, target 1 at `t`.
    Outgoing,
    /// `s' -> m` with value +1: input `s'`, target 1 at `q`.
    IncomingPositive,
    /// `s' -> m` with value -1: inputs `s'` and `s_m`, target 0 at `q`.
    IncomingNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixRecord {
    pub edge: EdgeId,
    pub value: i8,
    pub kind: FixKind,
    pub data_point: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub data_point: usize,
    /// Affected output neuron.
    pub output: NeuronId,
    pub input: NeuronId,
    pub middle: NeuronId,
    /// `input -> middle`
    pub in_edge: EdgeId,
    /// `middle -> output`
    pub out_edge: EdgeId,
}

/// What [`remove_fixed_weights`] added.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedWeightFragment {
    pub q: NeuronId,
    pub normalization: Vec<NormalizationPair>,
    pub fixings: Vec<FixRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputIds {
    pub a: NeuronId,
    pub b: NeuronId,
    pub q: Option<NeuronId>,
}

/// Provenance of a compiled instance, written as the `.map.json` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompilationMap {
    pub version: u32,
    pub stage: Stage,
    pub source: EtrInvFormula,
    /// The combined formula the gadgets were built from (repeated terms
    /// already split).
    pub combined: CombinedFormula,
    pub slots: SlotTable,
    pub outputs: OutputIds,
    pub passes: Vec<PassRange>,
    pub normalization: Vec<NormalizationPair>,
    pub fixings: Vec<FixRecord>,
    pub anchor: Option<usize>,
    pub question_marks: Vec<QuestionRecord>,
}

pub const MAP_VERSION: u32 = 1;

impl CompilationMap {
    pub fn encode(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec(self).expect("map serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn decode(bytes: &[u8]) -> Result<CompilationMap, SchemaError> {
        let map: CompilationMap = serde_json::from_slice(bytes).map_err(|e| SchemaError {
            path: "/".into(),
            message: e.to_string(),
        })?;
        if map.version != MAP_VERSION {
            return Err(SchemaError {
                path: "/version".into(),
                message: format!("unsupported version, expected {MAP_VERSION}"),
            });
        }
        Ok(map)
    }

    /// Every id the map mentions exists in `inst` with the expected role.
    pub fn check_against(&self, inst: &TrainingInstance) -> Result<(), SchemaError> {
        let bad = |path: String, message: &str| SchemaError {
            path,
            message: message.to_string(),
        };
        let role = |n: NeuronId| inst.neurons.get(n).map(|x| x.role);
        let edge_ok = |e: EdgeId, src: NeuronId, dst: NeuronId| {
            inst.edges.get(e).is_some_and(|x| x.src == src && x.dst == dst)
        };
        for (i, g) in self.slots.gadgets.iter().enumerate() {
            let ok = g.inputs.iter().all(|&s| role(s) == Some(Role::Input))
                && g.middles.iter().all(|&m| role(m) == Some(Role::Hidden))
                && edge_ok(g.edges.x, g.inputs[1], g.middles[1])
                && edge_ok(g.edges.w, g.inputs[0], g.middles[0])
                && edge_ok(g.edges.y, g.inputs[2], g.middles[2])
                && edge_ok(g.edges.z, g.inputs[3], g.middles[3])
                && edge_ok(g.edges.v, g.middles[2], self.outputs.b);
            if !ok || g.var.0 != i || i >= self.combined.num_vars() {
                return Err(bad(format!("/slots/gadgets/{i}"), "does not match the instance"));
            }
        }
        for (i, p) in self.normalization.iter().enumerate() {
            let q = self.outputs.q.unwrap_or(usize::MAX);
            if !edge_ok(p.in_edge, p.input, p.middle) || !edge_ok(p.out_edge, p.middle, q) {
                return Err(bad(format!("/normalization/{i}"), "does not match the instance"));
            }
        }
        for (i, f) in self.fixings.iter().enumerate() {
            if f.edge >= inst.edges.len() || f.data_point >= inst.data.len() {
                return Err(bad(format!("/fixings/{i}"), "does not match the instance"));
            }
        }
        for (i, r) in self.question_marks.iter().enumerate() {
            if !edge_ok(r.in_edge, r.input, r.middle)
                || !edge_ok(r.out_edge, r.middle, r.output)
                || r.data_point >= inst.data.len()
            {
                return Err(bad(format!("/question_marks/{i}"), "does not match the instance"));
            }
        }
        if self.anchor.is_some_and(|k| k >= inst.data.len()) {
            return Err(bad("/anchor".into(), "does not match the instance"));
        }
        Ok(())
    }
}

fn zero() -> Rational {
    Rational::zero()
}

fn one() -> Rational {
    Rational::one()
}

fn check_two_layer(inst: &TrainingInstance) -> Result<(), LoweringError> {
    for e in &inst.edges {
        let roles = (inst.neurons[e.src].role, inst.neurons[e.dst].role);
        if !matches!(roles, (Role::Input, Role::Hidden) | (Role::Hidden, Role::Output)) {
            return Err(LoweringError::NotTwoLayer(e.id));
        }
    }
    Ok(())
}

/// Appends one zero input column to every data point.
fn pad_inputs(inst: &mut TrainingInstance) {
    for d in &mut inst.data {
        d.inputs.push(zero());
    }
}

pub fn remove_fixed_weights(
    inst: &TrainingInstance,
) -> Result<(TrainingInstance, FixedWeightFragment), LoweringError> {
    check_two_layer(inst)?;
    if inst
        .neurons
        .iter()
        .any(|n| n.bias.as_ref().is_some_and(|b| b.fixed_value() != Some(&zero())))
    {
        return Err(LoweringError::PassOrder(
            "fixed-weight removal expects every bias fixed to 0".into(),
        ));
    }
    let fixed = inst.fixed_edges();
    let mut plan = Vec::with_capacity(fixed.len());
    for &id in &fixed {
        let e = &inst.edges[id];
        let value = e.weight.fixed_value().expect("fixed edge");
        let value: i8 = if value.is_one() {
            1
        } else if *value == -one() {
            -1
        } else {
            return Err(LoweringError::NonUnitFixedWeight(id));
        };
        let kind = if inst.neurons[e.src].role == Role::Hidden {
            if value < 0 {
                return Err(LoweringError::UnsupportedFixedEdge(id));
            }
            FixKind::Outgoing
        } else {
            if inst.out_edges(e.src).count() > 1 {
                return Err(LoweringError::AmbiguousIncomingFix(id));
            }
            if value > 0 {
                FixKind::IncomingPositive
            } else {
                FixKind::IncomingNegative
            }
        };
        plan.push((id, value, kind));
    }
    let middles = inst.hidden_ids();
    for &m in &middles {
        let touched = fixed
            .iter()
            .any(|&e| inst.edges[e].src == m || inst.edges[e].dst == m);
        if !touched {
            return Err(LoweringError::UnfixableMiddle(m));
        }
    }

    let mut out = inst.clone();
    let q = out.add_neuron(Role::Output, Activation::Identity, Param::fixed_int(0));
    for d in &mut out.data {
        d.outputs.push(Target::Ignore);
    }
    let mut normalization = Vec::with_capacity(middles.len());
    for &m in &middles {
        let s = out.add_input();
        pad_inputs(&mut out);
        let in_edge = out.add_edge(s, m, Param::Free);
        let out_edge = out.add_edge(m, q, Param::Free);
        normalization.push(NormalizationPair {
            middle: m,
            input: s,
            in_edge,
            out_edge,
        });
    }

    let topo = out.topology().expect("pass keeps the network acyclic");
    let n_in = topo.inputs.len();
    let out_pos = |t: NeuronId| topo.outputs.iter().position(|&o| o == t).expect("output");
    let point = |ones: &[NeuronId], target: NeuronId, value: i64| {
        let mut inputs = vec![zero(); n_in];
        for &s in ones {
            inputs[topo.input_pos[s].expect("input")] = one();
        }
        let mut outputs = vec![Target::Ignore; topo.outputs.len()];
        outputs[out_pos(target)] = Target::int(value);
        DataPoint { inputs, outputs }
    };
    let pair_of = |m: NeuronId| normalization.iter().find(|p| p.middle == m).expect("pair");

    let mut new_points: Vec<DataPoint> = normalization
        .iter()
        .map(|p| point(&[p.input], q, 1))
        .collect();
    let mut fixings = Vec::with_capacity(plan.len());
    for (id, value, kind) in plan {
        let e = out.edges[id].clone();
        let d = match kind {
            FixKind::Outgoing => point(&[pair_of(e.src).input], e.dst, 1),
            FixKind::IncomingPositive => point(&[e.src], q, 1),
            FixKind::IncomingNegative => point(&[e.src, pair_of(e.dst).input], q, 0),
        };
        fixings.push(FixRecord {
            edge: id,
            value,
            kind,
            data_point: out.data.len() + new_points.len(),
        });
        new_points.push(d);
        out.edges[id].weight = Param::Free;
    }
    out.data.extend(new_points);
    Ok((
        out,
        FixedWeightFragment {
            q,
            normalization,
            fixings,
        },
    ))
}

/// Appends the all-zero data point unless one is present, and turns every
/// `fixed(0)` bias into a free one. Returns the anchor's index.
pub fn add_bias_anchor(inst: &TrainingInstance) -> (TrainingInstance, usize) {
    let mut out = inst.clone();
    let anchor = match out.data.iter().position(DataPoint::is_zero_anchor) {
        Some(k) => k,
        None => {
            out.data.push(DataPoint {
                inputs: vec![zero(); out.input_ids().len()],
                outputs: vec![Target::Value(zero()); out.output_ids().len()],
            });
            out.data.len() - 1
        }
    };
    for n in &mut out.neurons {
        if let Some(b) = &mut n.bias {
            if b.fixed_value().is_some_and(Zero::is_zero) {
                *b = Param::Free;
            }
        }
    }
    (out, anchor)
}

pub fn remove_question_marks(
    inst: &TrainingInstance,
) -> Result<(TrainingInstance, Vec<QuestionRecord>), LoweringError> {
    if !inst.fixed_edges().is_empty() {
        return Err(LoweringError::PassOrder(
            "fixed weights must be removed before `?` targets".into(),
        ));
    }
    if inst.neurons.iter().any(|n| matches!(n.bias, Some(Param::Fixed(_)))) {
        return Err(LoweringError::PassOrder(
            "biases must be freed by the bias anchor before `?` targets are removed".into(),
        ));
    }
    if !inst.data.iter().any(DataPoint::is_zero_anchor) {
        return Err(LoweringError::PassOrder("the bias anchor is missing".into()));
    }
    let outputs = inst.output_ids();
    let holes: Vec<(usize, usize)> = inst
        .data
        .iter()
        .enumerate()
        .flat_map(|(k, d)| {
            d.outputs
                .iter()
                .enumerate()
                .filter(|(_, t)| matches!(t, Target::Ignore))
                .map(move |(j, _)| (k, j))
        })
        .collect();

    let mut out = inst.clone();
    let n_points = out.data.len();
    let mut new_cols: Vec<Vec<usize>> = vec![Vec::new(); n_points];
    let mut records = Vec::with_capacity(holes.len());
    for (col, &(k, j)) in holes.iter().enumerate() {
        let t = outputs[j];
        let s = out.add_input();
        let m = out.add_neuron(Role::Hidden, Activation::Identity, Param::Free);
        let in_edge = out.add_edge(s, m, Param::Free);
        let out_edge = out.add_edge(m, t, Param::Free);
        new_cols[k].push(col);
        records.push(QuestionRecord {
            data_point: k,
            output: t,
            input: s,
            middle: m,
            in_edge,
            out_edge,
        });
    }
    // new inputs get the highest ids, so their columns follow the old ones
    for (k, d) in out.data.iter_mut().enumerate() {
        let base = d.inputs.len();
        d.inputs.resize(base + holes.len(), zero());
        for &col in &new_cols[k] {
            d.inputs[base + col] = one();
        }
        for t in &mut d.outputs {
            if matches!(t, Target::Ignore) {
                *t = Target::Value(zero());
            }
        }
    }
    out.kind = InstanceKind::Plain;
    Ok((out, records))
}

/// Gadgets, then fixed-weight removal, bias anchor and `?` removal, stopping
/// after `stop`.
pub fn compile_staged(
    f: &EtrInvFormula,
    stop: Stage,
    cost: CostKind,
) -> Result<(TrainingInstance, CompilationMap), LoweringError> {
    let combined = lower_to_combined(f);
    let rc = compile_restricted(&combined)?;
    let mut inst = rc.instance;
    inst.cost = cost;
    let outputs = inst.output_ids();
    let mut map = CompilationMap {
        version: MAP_VERSION,
        stage: Stage::Restricted,
        source: f.clone(),
        combined: rc.formula,
        slots: rc.slots,
        outputs: OutputIds {
            a: outputs[0],
            b: outputs[1],
            q: None,
        },
        passes: vec![PassRange {
            pass: Pass::Gadgets,
            neurons: [0, inst.neurons.len()],
            edges: [0, inst.edges.len()],
            data: [0, inst.data.len()],
        }],
        normalization: Vec::new(),
        fixings: Vec::new(),
        anchor: None,
        question_marks: Vec::new(),
    };
    if stop == Stage::Restricted {
        return Ok((inst, map));
    }

    let (next, frag) = remove_fixed_weights(&inst)?;
    map.passes.push(PassRange::between(Pass::FixedWeights, &inst, &next));
    map.outputs.q = Some(frag.q);
    map.normalization = frag.normalization;
    map.fixings = frag.fixings;
    map.stage = Stage::FixedFree;
    inst = next;
    if stop == Stage::FixedFree {
        return Ok((inst, map));
    }

    let (next, anchor) = add_bias_anchor(&inst);
    map.passes.push(PassRange::between(Pass::BiasAnchor, &inst, &next));
    map.anchor = Some(anchor);
    inst = next;

    let (next, records) = remove_question_marks(&inst)?;
    map.passes.push(PassRange::between(Pass::QuestionMarks, &inst, &next));
    map.question_marks = records;
    map.stage = Stage::Plain;
    Ok((next, map))
}

/// The full pipeline with the `mse` cost.
pub fn compile_full(f: &EtrInvFormula) -> Result<(TrainingInstance, CompilationMap), LoweringError> {
    compile_staged(f, Stage::Plain, CostKind::Mse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_etr_inv, VarId};
    use crate::gadgets::{build_subtraction_gadget, build_variable_gadget};
    use crate::network::validate_instance;

    fn count_ignores(inst: &TrainingInstance) -> usize {
        inst.data
            .iter()
            .map(|d| d.outputs.iter().filter(|t| matches!(t, Target::Ignore)).count())
            .sum()
    }

    #[test]
    fn variable_gadget_fixed_weight_counts() {
        let (g, vg) = build_variable_gadget(VarId(0));
        let before = g.instance;
        let (after, frag) = remove_fixed_weights(&before).unwrap();
        assert_eq!(after.output_ids().len(), before.output_ids().len() + 1);
        assert_eq!(after.input_ids().len(), before.input_ids().len() + 4);
        assert_eq!(after.edges.len(), before.edges.len() + 8);
        assert_eq!(after.data.len(), before.data.len() + 4 + 6);
        assert!(after.fixed_edges().is_empty());
        assert_eq!(frag.fixings.len(), 6);

        // d(m): 1 at s_m only, 1 at q, ? elsewhere
        let d = &after.data[before.data.len()];
        let s_m = frag.normalization[0].input;
        let ones: Vec<usize> = (0..d.inputs.len()).filter(|&i| d.inputs[i].is_one()).collect();
        assert_eq!(ones, vec![after.topology().unwrap().input_pos[s_m].unwrap()]);
        assert_eq!(d.outputs, vec![Target::Ignore, Target::Ignore, Target::int(1)]);

        // the -1 edge s5 -> m3 is fixed by a two-hot point with 0 at q
        let neg = frag
            .fixings
            .iter()
            .find(|f| f.kind == FixKind::IncomingNegative)
            .unwrap();
        assert_eq!(after.edges[neg.edge].src, vg.inputs[4]);
        let d = &after.data[neg.data_point];
        let topo = after.topology().unwrap();
        let s_m3 = frag.normalization.iter().find(|p| p.middle == vg.middles[2]).unwrap().input;
        let ones: Vec<usize> = (0..d.inputs.len()).filter(|&i| d.inputs[i].is_one()).collect();
        let mut expect = vec![
            topo.input_pos[vg.inputs[4]].unwrap(),
            topo.input_pos[s_m3].unwrap(),
        ];
        expect.sort();
        assert_eq!(ones, expect);
        assert_eq!(d.outputs, vec![Target::Ignore, Target::Ignore, Target::int(0)]);
        for d in &after.data {
            assert!(d.inputs.iter().all(|v| v.is_zero() || v.is_one()));
        }
    }

    #[test]
    fn fixed_weight_preconditions() {
        let mut g = build_subtraction_gadget().instance;
        g.edges[2].weight = Param::fixed_int(2);
        assert_eq!(remove_fixed_weights(&g).unwrap_err(), LoweringError::NonUnitFixedWeight(2));

        let mut g = build_subtraction_gadget().instance;
        g.edges[3].weight = Param::Free;
        assert_eq!(remove_fixed_weights(&g).unwrap_err(), LoweringError::UnfixableMiddle(3));

        let mut g = build_subtraction_gadget().instance;
        g.edges[2].weight = Param::fixed_int(-1);
        assert_eq!(remove_fixed_weights(&g).unwrap_err(), LoweringError::UnsupportedFixedEdge(2));

        let mut g = build_subtraction_gadget().instance;
        g.add_edge(0, 3, Param::fixed_int(1));
        assert_eq!(remove_fixed_weights(&g).unwrap_err(), LoweringError::AmbiguousIncomingFix(4));

        let mut g = build_subtraction_gadget().instance;
        g.add_edge(0, 4, Param::Free);
        assert_eq!(remove_fixed_weights(&g).unwrap_err(), LoweringError::NotTwoLayer(4));
    }

    #[test]
    fn anchor_is_appended_once() {
        let mut inst = TrainingInstance::new(InstanceKind::Restricted, CostKind::Mse);
        for _ in 0..5 {
            inst.add_input();
        }
        for _ in 0..3 {
            inst.add_neuron(Role::Output, Activation::Identity, Param::fixed_int(0));
        }
        inst.data.push(DataPoint::from_ints(&[1, 0, 0, 0, 0], &[Some(1), None, Some(0)]));
        let (once, k) = add_bias_anchor(&inst);
        assert_eq!(k, 1);
        assert_eq!(once.data[1], DataPoint::from_ints(&[0; 5], &[Some(0); 3]));
        assert_eq!(once.free_biases(), vec![5, 6, 7]);
        let (twice, k2) = add_bias_anchor(&once);
        assert_eq!((twice.data.len(), k2), (2, 1));
    }

    #[test]
    fn single_question_mark() {
        let mut inst = TrainingInstance::new(InstanceKind::Restricted, CostKind::Mse);
        let s = inst.add_input();
        let m = inst.add_neuron(Role::Hidden, Activation::Identity, Param::Free);
        let t = inst.add_neuron(Role::Output, Activation::Identity, Param::Free);
        let u = inst.add_neuron(Role::Output, Activation::Identity, Param::Free);
        inst.add_edge(s, m, Param::Free);
        inst.add_edge(m, t, Param::Free);
        inst.add_edge(m, u, Param::Free);
        inst.data.push(DataPoint::from_ints(&[1], &[Some(1), None]));
        inst.data.push(DataPoint::from_ints(&[0], &[Some(0), Some(0)]));
        let (out, records) = remove_question_marks(&inst).unwrap();
        assert_eq!(out.kind, InstanceKind::Plain);
        assert_eq!(out.input_ids().len(), 2);
        assert_eq!(out.hidden_ids().len(), 2);
        assert_eq!(out.edges.len(), 5);
        assert_eq!(count_ignores(&out), 0);
        assert_eq!(out.data[0], DataPoint::from_ints(&[1, 1], &[Some(1), Some(0)]));
        assert_eq!(out.data[1], DataPoint::from_ints(&[0, 0], &[Some(0), Some(0)]));
        assert_eq!(records[0].output, u);
    }

    #[test]
    fn question_marks_must_come_last() {
        let (g, _) = build_variable_gadget(VarId(0));
        assert!(matches!(
            remove_question_marks(&g.instance),
            Err(LoweringError::PassOrder(_))
        ));
        let (fixed_free, _) = remove_fixed_weights(&g.instance).unwrap();
        assert!(matches!(
            remove_question_marks(&fixed_free),
            Err(LoweringError::PassOrder(_))
        ));
        let (anchored, _) = add_bias_anchor(&fixed_free);
        assert!(remove_question_marks(&anchored).is_ok());
    }

    #[test]
    fn full_pipeline_is_strictly_valid() {
        let f = parse_etr_inv("x + y = z\nx * w = 1").unwrap();
        let (inst, map) = compile_full(&f).unwrap();
        let report = validate_instance(&inst, true);
        assert!(report.is_ok(), "{:?}", report.violations);
        assert_eq!(inst.output_ids().len(), 3);
        assert_eq!(map.passes.len(), 4);
        map.check_against(&inst).unwrap();
        let back = CompilationMap::decode(&map.encode()).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.encode(), map.encode());
    }

    #[test]
    fn stages_nest() {
        let f = parse_etr_inv("x + y = z").unwrap();
        let (r, _) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
        let (ff, m) = compile_staged(&f, Stage::FixedFree, CostKind::Mse).unwrap();
        let (p, _) = compile_full(&f).unwrap();
        assert!(!r.fixed_edges().is_empty());
        assert!(ff.fixed_edges().is_empty() && count_ignores(&ff) > 0);
        assert_eq!(m.stage, Stage::FixedFree);
        assert_eq!(p.kind, InstanceKind::Plain);
        assert!(r.neurons.len() < ff.neurons.len() && ff.neurons.len() < p.neurons.len());
    }
}
