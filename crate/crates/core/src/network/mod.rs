//! Training instances: a DAG of neurons with free or fixed weights and biases,
//! a cost function, a threshold and data points.
//!
//! Restricted instances may fix weights and biases and may mark outputs of a
//! data point as ignored (`?`). Plain instances do neither.

mod codec;
mod dot;

use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Rational;

pub use codec::{decode_instance, encode_instance, SchemaError};
pub use dot::emit_dot;

pub type NeuronId = usize;
pub type EdgeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Hidden,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    /// `max{0, t}`
    Relu,
    /// `max{C, t}`
    ShiftedRelu(Rational),
}

/// A weight or bias: either a training variable or a predefined value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Param {
    Free,
    Fixed(Rational),
}

impl Param {
    pub fn fixed_int(v: i64) -> Self {
        Param::Fixed(Rational::from_integer(v.into()))
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Param::Free)
    }

    pub fn fixed_value(&self) -> Option<&Rational> {
        match self {
            Param::Fixed(v) => Some(v),
            Param::Free => None,
        }
    }
}

/// Input neurons carry neither activation nor bias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neuron {
    pub id: NeuronId,
    pub role: Role,
    pub activation: Option<Activation>,
    pub bias: Option<Param>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub src: NeuronId,
    pub dst: NeuronId,
    pub weight: Param,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Value(Rational),
    /// `?`: excluded from the cost.
    Ignore,
}

impl Target {
    pub fn int(v: i64) -> Self {
        Target::Value(Rational::from_integer(v.into()))
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            Target::Value(v) => Some(v),
            Target::Ignore => None,
        }
    }
}

/// Inputs are ordered like the input neurons by id, outputs like the output
/// neurons by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPoint {
    pub inputs: Vec<Rational>,
    pub outputs: Vec<Target>,
}

impl DataPoint {
    pub fn from_ints(inputs: &[i64], outputs: &[Option<i64>]) -> Self {
        DataPoint {
            inputs: inputs.iter().map(|&v| Rational::from_integer(v.into())).collect(),
            outputs: outputs
                .iter()
                .map(|o| o.map_or(Target::Ignore, Target::int))
                .collect(),
        }
    }

    pub fn has_ignore(&self) -> bool {
        self.outputs.iter().any(|t| matches!(t, Target::Ignore))
    }

    pub fn is_zero_anchor(&self) -> bool {
        self.inputs.iter().all(Zero::is_zero)
            && self.outputs.iter().all(|t| t.value().is_some_and(Zero::is_zero))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Mean of squared errors over the compared coordinates.
    Mse,
    /// Sum of absolute errors.
    L1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Restricted,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingInstance {
    pub kind: InstanceKind,
    pub cost: CostKind,
    pub threshold: Rational,
    pub neurons: Vec<Neuron>,
    pub edges: Vec<Edge>,
    pub data: Vec<DataPoint>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("edge {0} references a missing neuron")]
    DanglingEdge(EdgeId),
    #[error("the network contains a cycle")]
    Cycle,
}

impl TrainingInstance {
    pub fn new(kind: InstanceKind, cost: CostKind) -> Self {
        TrainingInstance {
            kind,
            cost,
            threshold: Rational::zero(),
            neurons: Vec::new(),
            edges: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn add_input(&mut self) -> NeuronId {
        self.push_neuron(Role::Input, None, None)
    }

    pub fn add_neuron(&mut self, role: Role, activation: Activation, bias: Param) -> NeuronId {
        self.push_neuron(role, Some(activation), Some(bias))
    }

    fn push_neuron(
        &mut self,
        role: Role,
        activation: Option<Activation>,
        bias: Option<Param>,
    ) -> NeuronId {
        let id = self.neurons.len();
        self.neurons.push(Neuron {
            id,
            role,
            activation,
            bias,
        });
        id
    }

    pub fn add_edge(&mut self, src: NeuronId, dst: NeuronId, weight: Param) -> EdgeId {
        let id = self.edges.len();
        self.edges.push(Edge {
            id,
            src,
            dst,
            weight,
        });
        id
    }

    fn ids_with(&self, role: Role) -> Vec<NeuronId> {
        self.neurons
            .iter()
            .filter(|n| n.role == role)
            .map(|n| n.id)
            .collect()
    }

    pub fn input_ids(&self) -> Vec<NeuronId> {
        self.ids_with(Role::Input)
    }

    pub fn hidden_ids(&self) -> Vec<NeuronId> {
        self.ids_with(Role::Hidden)
    }

    pub fn output_ids(&self) -> Vec<NeuronId> {
        self.ids_with(Role::Output)
    }

    pub fn free_edges(&self) -> Vec<EdgeId> {
        self.edges
            .iter()
            .filter(|e| e.weight.is_free())
            .map(|e| e.id)
            .collect()
    }

    pub fn free_biases(&self) -> Vec<NeuronId> {
        self.neurons
            .iter()
            .filter(|n| matches!(n.bias, Some(Param::Free)))
            .map(|n| n.id)
            .collect()
    }

    pub fn fixed_edges(&self) -> Vec<EdgeId> {
        self.edges
            .iter()
            .filter(|e| !e.weight.is_free())
            .map(|e| e.id)
            .collect()
    }

    pub fn out_edges(&self, n: NeuronId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.src == n)
    }

    pub fn in_edges(&self, n: NeuronId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == n)
    }

    /// Size of the data matrix, `|D| * (|S| + |T|)`.
    pub fn data_matrix_size(&self) -> usize {
        self.data.len() * (self.input_ids().len() + self.output_ids().len())
    }

    pub fn topology(&self) -> Result<Topology, NetworkError> {
        Topology::new(self)
    }

    /// Same neurons and edges (data, cost and threshold are ignored).
    pub fn same_architecture(&self, other: &TrainingInstance) -> bool {
        self.neurons == other.neurons && self.edges == other.edges
    }
}

/// Precomputed evaluation order and adjacency.
#[derive(Clone, Debug)]
pub struct Topology {
    /// Neurons in a topological order.
    pub order: Vec<NeuronId>,
    /// Incoming edge ids per neuron.
    pub incoming: Vec<Vec<EdgeId>>,
    /// Position of each neuron among the inputs, if it is one.
    pub input_pos: Vec<Option<usize>>,
    pub inputs: Vec<NeuronId>,
    pub outputs: Vec<NeuronId>,
}

impl Topology {
    fn new(inst: &TrainingInstance) -> Result<Self, NetworkError> {
        let n = inst.neurons.len();
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for e in &inst.edges {
            if e.src >= n || e.dst >= n {
                return Err(NetworkError::DanglingEdge(e.id));
            }
            incoming[e.dst].push(e.id);
            outgoing[e.src].push(e.dst);
        }
        let mut indeg: Vec<usize> = incoming.iter().map(Vec::len).collect();
        let mut queue: VecDeque<NeuronId> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &outgoing[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        if order.len() != n {
            return Err(NetworkError::Cycle);
        }
        let inputs = inst.input_ids();
        let mut input_pos = vec![None; n];
        for (k, &s) in inputs.iter().enumerate() {
            input_pos[s] = Some(k);
        }
        Ok(Topology {
            order,
            incoming,
            input_pos,
            inputs,
            outputs: inst.output_ids(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Check {
    DenseIds,
    Edges,
    Acyclic,
    Degrees,
    RoleFields,
    Dimensions,
    Kind,
    Threshold,
    // strict only: the shape every fully lowered instance has
    OneHiddenLayer,
    ThreeOutputs,
    IdentityActivations,
    HonestCost,
    BinaryData,
    ZeroThreshold,
}

impl Check {
    pub const STRICT: [Check; 6] = [
        Check::OneHiddenLayer,
        Check::ThreeOutputs,
        Check::IdentityActivations,
        Check::HonestCost,
        Check::BinaryData,
        Check::ZeroThreshold,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub check: Check,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub strict: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn passed(&self, check: Check) -> bool {
        self.violations.iter().all(|v| v.check != check)
    }
}

/// Structural validation. Never fails; every problem becomes a violation.
/// `strict` additionally checks the one-hidden-layer / three-output /
/// identity / honest-cost / {0,1}-data / zero-threshold shape.
pub fn validate_instance(inst: &TrainingInstance, strict: bool) -> ValidationReport {
    let mut out = Vec::new();
    let mut flag = |check: Check, message: String| out.push(Violation { check, message });
    let n = inst.neurons.len();

    for (i, neuron) in inst.neurons.iter().enumerate() {
        if neuron.id != i {
            flag(Check::DenseIds, format!("neuron at position {i} has id {}", neuron.id));
        }
        let is_input = neuron.role == Role::Input;
        if is_input != neuron.activation.is_none() || is_input != neuron.bias.is_none() {
            flag(
                Check::RoleFields,
                format!("neuron {i}: only non-input neurons carry activation and bias"),
            );
        }
    }
    for (i, e) in inst.edges.iter().enumerate() {
        if e.id != i {
            flag(Check::DenseIds, format!("edge at position {i} has id {}", e.id));
        }
        if e.src >= n || e.dst >= n {
            flag(Check::Edges, format!("edge {i} references a missing neuron"));
        } else if e.src == e.dst {
            flag(Check::Edges, format!("edge {i} is a self-loop"));
        }
    }
    let edges_ok = inst.edges.iter().all(|e| e.src < n && e.dst < n);
    if edges_ok && inst.topology().is_err() {
        flag(Check::Acyclic, "the network contains a cycle".into());
    }
    if edges_ok {
        for e in &inst.edges {
            if inst.neurons[e.dst].role == Role::Input {
                flag(Check::Degrees, format!("edge {} enters input neuron {}", e.id, e.dst));
            }
            if inst.neurons[e.src].role == Role::Output {
                flag(Check::Degrees, format!("edge {} leaves output neuron {}", e.id, e.src));
            }
        }
    }

    let (n_in, n_out) = (inst.input_ids().len(), inst.output_ids().len());
    for (k, d) in inst.data.iter().enumerate() {
        if d.inputs.len() != n_in || d.outputs.len() != n_out {
            flag(
                Check::Dimensions,
                format!(
                    "data point {k} has {}+{} entries, expected {n_in}+{n_out}",
                    d.inputs.len(),
                    d.outputs.len()
                ),
            );
        }
    }

    if inst.kind == InstanceKind::Plain {
        if let Some(e) = inst.edges.iter().find(|e| !e.weight.is_free()) {
            flag(Check::Kind, format!("plain instance has fixed weight on edge {}", e.id));
        }
        if let Some(v) = inst
            .neurons
            .iter()
            .find(|v| matches!(v.bias, Some(Param::Fixed(_))))
        {
            flag(Check::Kind, format!("plain instance has fixed bias on neuron {}", v.id));
        }
        if let Some(k) = inst.data.iter().position(DataPoint::has_ignore) {
            flag(Check::Kind, format!("plain instance has `?` in data point {k}"));
        }
    }
    if inst.threshold.is_negative() {
        flag(Check::Threshold, "threshold is negative".into());
    }

    if strict {
        if edges_ok {
            for e in &inst.edges {
                let (s, d) = (inst.neurons[e.src].role, inst.neurons[e.dst].role);
                if !matches!((s, d), (Role::Input, Role::Hidden) | (Role::Hidden, Role::Output)) {
                    flag(
                        Check::OneHiddenLayer,
                        format!("edge {} goes {s:?} -> {d:?}", e.id),
                    );
                }
            }
        }
        if n_out != 3 {
            flag(Check::ThreeOutputs, format!("{n_out} output neurons"));
        }
        if let Some(v) = inst
            .neurons
            .iter()
            .find(|v| v.activation.as_ref().is_some_and(|a| *a != Activation::Identity))
        {
            flag(
                Check::IdentityActivations,
                format!("neuron {} is not identity-activated", v.id),
            );
        }
        // both supported cost functions are honest; nothing to flag
        let binary = |r: &Rational| r.is_zero() || r.is_one();
        for (k, d) in inst.data.iter().enumerate() {
            let ok = d.inputs.iter().all(binary)
                && d.outputs.iter().all(|t| t.value().is_some_and(binary));
            if !ok {
                flag(Check::BinaryData, format!("data point {k} has an entry outside {{0,1}}"));
            }
        }
        if !inst.threshold.is_zero() {
            flag(Check::ZeroThreshold, format!("threshold is {}", inst.threshold));
        }
    }

    ValidationReport {
        strict,
        violations: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// input -> hidden -> output with one data point.
    fn tiny(kind: InstanceKind) -> TrainingInstance {
        let mut inst = TrainingInstance::new(kind, CostKind::Mse);
        let s = inst.add_input();
        let m = inst.add_neuron(Role::Hidden, Activation::Identity, Param::Free);
        let outs: Vec<_> = (0..3)
            .map(|_| inst.add_neuron(Role::Output, Activation::Identity, Param::Free))
            .collect();
        inst.add_edge(s, m, Param::Free);
        for o in outs {
            inst.add_edge(m, o, Param::Free);
        }
        inst.data.push(DataPoint::from_ints(&[1], &[Some(0), Some(1), Some(0)]));
        inst
    }

    #[test]
    fn strict_accepts_lowered_shape() {
        let r = validate_instance(&tiny(InstanceKind::Plain), true);
        assert!(r.is_ok(), "{:?}", r.violations);
    }

    #[test]
    fn ignore_in_plain_is_a_kind_violation() {
        let mut inst = tiny(InstanceKind::Plain);
        inst.data[0].outputs[1] = Target::Ignore;
        let r = validate_instance(&inst, false);
        assert!(!r.passed(Check::Kind));
        inst.kind = InstanceKind::Restricted;
        assert!(validate_instance(&inst, false).is_ok());
    }

    #[test]
    fn hidden_to_hidden_breaks_layering() {
        let mut inst = tiny(InstanceKind::Plain);
        let m2 = inst.add_neuron(Role::Hidden, Activation::Identity, Param::Free);
        inst.add_edge(1, m2, Param::Free);
        assert!(validate_instance(&inst, false).is_ok());
        let r = validate_instance(&inst, true);
        assert!(!r.passed(Check::OneHiddenLayer));
        assert!(r.passed(Check::ThreeOutputs));
    }

    #[test]
    fn strict_single_field_mutations() {
        let mut inst = tiny(InstanceKind::Plain);
        inst.threshold = Rational::from_integer(1.into());
        assert!(!validate_instance(&inst, true).passed(Check::ZeroThreshold));

        let mut inst = tiny(InstanceKind::Plain);
        inst.neurons[1].activation = Some(Activation::Relu);
        assert!(!validate_instance(&inst, true).passed(Check::IdentityActivations));

        let mut inst = tiny(InstanceKind::Plain);
        inst.data[0].inputs[0] = Rational::from_integer(2.into());
        assert!(!validate_instance(&inst, true).passed(Check::BinaryData));

        let mut inst = tiny(InstanceKind::Plain);
        inst.add_neuron(Role::Output, Activation::Identity, Param::Free);
        let r = validate_instance(&inst, true);
        assert!(!r.passed(Check::ThreeOutputs));
        assert!(!r.passed(Check::Dimensions));
    }

    #[test]
    fn structural_errors() {
        let mut inst = tiny(InstanceKind::Plain);
        inst.add_edge(2, 1, Param::Free);
        let r = validate_instance(&inst, false);
        assert!(!r.passed(Check::Acyclic));
        assert!(!r.passed(Check::Degrees));

        let mut inst = tiny(InstanceKind::Plain);
        inst.add_edge(0, 99, Param::Free);
        assert!(!validate_instance(&inst, false).passed(Check::Edges));

        let mut inst = tiny(InstanceKind::Plain);
        inst.threshold = Rational::from_integer((-1).into());
        assert!(!validate_instance(&inst, false).passed(Check::Threshold));
    }
}
