//! Forward evaluation, cost functions and witness verification.
//!
//! Verification computes the total cost of all data points and compares it
//! with the threshold. Exact witnesses are evaluated in rational arithmetic
//! with no rounding at all. Float witnesses are evaluated in `f64`, summed in
//! data-point order, and accepted when the cost is within `threshold +
//! tolerance`; such a report never claims exactness. Formulas whose solutions
//! are irrational have no exact rational witness, so for them only the float
//! path can accept.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{
    Activation, CostKind, DataPoint, EdgeId, NetworkError, NeuronId, Param, Role, SchemaError,
    Topology, TrainingInstance,
};
use crate::scalar::{Mode, Numeric, Rational, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("expected {expected} values, got {got}")]
    IncompatibleDimensions { expected: usize, got: usize },
    #[error("cost vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("witness does not match the instance: {0}")]
    IdMismatch(String),
    #[error("mixed exact and float scalars")]
    ModeMismatch,
    #[error("non-input neuron {0} has no activation or bias")]
    Malformed(NeuronId),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Values for every free weight and free bias of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub mode: Mode,
    pub weights: BTreeMap<EdgeId, Scalar>,
    pub biases: BTreeMap<NeuronId, Scalar>,
}

impl Witness {
    pub fn new(mode: Mode) -> Self {
        Witness {
            mode,
            weights: BTreeMap::new(),
            biases: BTreeMap::new(),
        }
    }

    /// Exactly the free weights and free biases, all in `self.mode`.
    pub fn check_against(&self, inst: &TrainingInstance) -> Result<(), EvalError> {
        let free_edges = inst.free_edges();
        let free_biases = inst.free_biases();
        if let Some(e) = free_edges.iter().find(|e| !self.weights.contains_key(e)) {
            return Err(EvalError::IdMismatch(format!("missing weight for edge {e}")));
        }
        if let Some(v) = free_biases.iter().find(|v| !self.biases.contains_key(v)) {
            return Err(EvalError::IdMismatch(format!("missing bias for neuron {v}")));
        }
        if let Some(e) = self.weights.keys().find(|e| free_edges.binary_search(e).is_err()) {
            return Err(EvalError::IdMismatch(format!("edge {e} is not a free weight")));
        }
        if let Some(v) = self.biases.keys().find(|v| free_biases.binary_search(v).is_err()) {
            return Err(EvalError::IdMismatch(format!("neuron {v} has no free bias")));
        }
        let homogeneous = self
            .weights
            .values()
            .chain(self.biases.values())
            .all(|s| s.mode() == self.mode);
        if !homogeneous {
            return Err(EvalError::ModeMismatch);
        }
        Ok(())
    }

    pub fn to_mode(&self, mode: Mode) -> Witness {
        Witness {
            mode,
            weights: self.weights.iter().map(|(k, v)| (*k, v.to_mode(mode))).collect(),
            biases: self.biases.iter().map(|(k, v)| (*k, v.to_mode(mode))).collect(),
        }
    }

    /// Canonical JSON: `{mode, weights: {"<edge>": s}, biases: {"<neuron>": s}}`.
    pub fn encode(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec(self).expect("witness serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn decode(bytes: &[u8]) -> Result<Witness, SchemaError> {
        let w: Witness = serde_json::from_slice(bytes).map_err(|e| SchemaError {
            path: "/".into(),
            message: e.to_string(),
        })?;
        for (section, values) in [("weights", &w.weights), ("biases", &w.biases)] {
            if let Some((k, _)) = values.iter().find(|(_, s)| s.mode() != w.mode) {
                return Err(SchemaError {
                    path: format!("/{section}/{k}"),
                    message: format!("scalar is not in {} mode", w.mode),
                });
            }
        }
        Ok(w)
    }
}

/// Dense parameters for one evaluation mode: fixed values and witness values
/// merged, indexed by edge id and neuron id.
#[derive(Clone, Debug)]
pub(crate) struct Dense<T> {
    pub topo: Topology,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    pub activations: Vec<Option<Activation>>,
}

impl<T: Numeric> Dense<T> {
    pub fn new(inst: &TrainingInstance, w: &Witness) -> Result<Self, EvalError> {
        if w.mode != T::MODE {
            return Err(EvalError::ModeMismatch);
        }
        w.check_against(inst)?;
        let topo = inst.topology()?;
        let scalar = |s: &Scalar| T::from_scalar(s).ok_or(EvalError::ModeMismatch);
        let mut weights = Vec::with_capacity(inst.edges.len());
        for e in &inst.edges {
            weights.push(match &e.weight {
                Param::Fixed(r) => T::from_rational(r),
                Param::Free => scalar(&w.weights[&e.id])?,
            });
        }
        let mut biases = Vec::with_capacity(inst.neurons.len());
        let mut activations = Vec::with_capacity(inst.neurons.len());
        for n in &inst.neurons {
            if n.role != Role::Input && (n.activation.is_none() || n.bias.is_none()) {
                return Err(EvalError::Malformed(n.id));
            }
            biases.push(match &n.bias {
                None => T::zero(),
                Some(Param::Fixed(r)) => T::from_rational(r),
                Some(Param::Free) => scalar(&w.biases[&n.id])?,
            });
            activations.push(n.activation.clone());
        }
        Ok(Dense {
            topo,
            weights,
            biases,
            activations,
        })
    }

    /// Values of every neuron on input `x` (already checked for length).
    pub fn neuron_values(&self, inst: &TrainingInstance, x: &[T]) -> Vec<T> {
        let mut values = vec![T::zero(); inst.neurons.len()];
        for &v in &self.topo.order {
            if let Some(k) = self.topo.input_pos[v] {
                values[v] = x[k].clone();
                continue;
            }
            let mut pre = self.biases[v].clone();
            for &e in &self.topo.incoming[v] {
                let edge = &inst.edges[e];
                pre = pre + self.weights[e].clone() * values[edge.src].clone();
            }
            values[v] = activate(self.activations[v].as_ref(), pre);
        }
        values
    }

    pub fn outputs(&self, inst: &TrainingInstance, x: &[T]) -> Result<Vec<T>, EvalError> {
        if x.len() != self.topo.inputs.len() {
            return Err(EvalError::IncompatibleDimensions {
                expected: self.topo.inputs.len(),
                got: x.len(),
            });
        }
        let values = self.neuron_values(inst, x);
        Ok(self.topo.outputs.iter().map(|&o| values[o].clone()).collect())
    }

    pub fn data_point_cost(
        &self,
        inst: &TrainingInstance,
        d: &DataPoint,
    ) -> Result<(T, Vec<Option<T>>), EvalError> {
        if d.outputs.len() != self.topo.outputs.len() {
            return Err(EvalError::IncompatibleDimensions {
                expected: self.topo.outputs.len(),
                got: d.outputs.len(),
            });
        }
        let x: Vec<T> = d.inputs.iter().map(T::from_rational).collect();
        let y = self.outputs(inst, &x)?;
        let residuals: Vec<Option<T>> = d
            .outputs
            .iter()
            .zip(&y)
            .map(|(t, out)| t.value().map(|v| out.clone() - T::from_rational(v)))
            .collect();
        Ok((cost_of_residuals(inst.cost, residuals.iter().flatten()), residuals))
    }
}

pub(crate) fn activate<T: Numeric>(a: Option<&Activation>, t: T) -> T {
    match a {
        None | Some(Activation::Identity) => t,
        Some(Activation::Relu) => {
            if t > T::zero() {
                t
            } else {
                T::zero()
            }
        }
        Some(Activation::ShiftedRelu(c)) => {
            let c = T::from_rational(c);
            if t > c {
                t
            } else {
                c
            }
        }
    }
}

fn cost_of_residuals<'a, T: Numeric + 'a>(kind: CostKind, r: impl Iterator<Item = &'a T>) -> T {
    match kind {
        CostKind::Mse => {
            let mut sum = T::zero();
            let mut count = T::zero();
            for e in r {
                sum = sum + e.clone() * e.clone();
                count = count + T::one();
            }
            if count.is_zero() {
                sum
            } else {
                sum / count
            }
        }
        CostKind::L1 => r.fold(T::zero(), |acc, e| acc + e.abs()),
    }
}

/// `mse` is the mean of squared differences, `l1` the sum of absolute ones.
/// Both are zero exactly when the vectors agree.
pub fn cost_value(kind: CostKind, y: &[Scalar], y_pred: &[Scalar]) -> Result<Scalar, EvalError> {
    if y.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y.len(), y_pred.len()));
    }
    let mode = y.first().map_or(Mode::Exact, Scalar::mode);
    match mode {
        Mode::Exact => cost_typed::<Rational>(kind, y, y_pred),
        Mode::Float => cost_typed::<f64>(kind, y, y_pred),
    }
}

fn cost_typed<T: Numeric>(kind: CostKind, y: &[Scalar], y_pred: &[Scalar]) -> Result<Scalar, EvalError> {
    let conv = |s: &Scalar| T::from_scalar(s).ok_or(EvalError::ModeMismatch);
    let residuals = y
        .iter()
        .zip(y_pred)
        .map(|(a, b)| Ok(conv(b)? - conv(a)?))
        .collect::<Result<Vec<T>, EvalError>>()?;
    Ok(cost_of_residuals(kind, residuals.iter()).into_scalar())
}

/// Network outputs (in output-neuron id order) on input `x`.
pub fn forward_eval(
    inst: &TrainingInstance,
    w: &Witness,
    x: &[Scalar],
) -> Result<Vec<Scalar>, EvalError> {
    match w.mode {
        Mode::Exact => forward_typed::<Rational>(inst, w, x),
        Mode::Float => forward_typed::<f64>(inst, w, x),
    }
}

fn forward_typed<T: Numeric>(
    inst: &TrainingInstance,
    w: &Witness,
    x: &[Scalar],
) -> Result<Vec<Scalar>, EvalError> {
    let dense = Dense::<T>::new(inst, w)?;
    let x = x
        .iter()
        .map(|s| T::from_scalar(s).ok_or(EvalError::ModeMismatch))
        .collect::<Result<Vec<T>, _>>()?;
    Ok(dense
        .outputs(inst, &x)?
        .into_iter()
        .map(Numeric::into_scalar)
        .collect())
}

/// Outcome of verifying a witness. `total_cost` is the data-point costs summed
/// in index order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub accepted: bool,
    pub mode: Mode,
    pub threshold: Scalar,
    pub total_cost: Scalar,
    pub per_datapoint: Vec<Scalar>,
    /// `output - target` per output; `None` where the target is ignored.
    pub residuals: Vec<Vec<Option<Scalar>>>,
}

/// Sum of the data-point costs, skipping ignored outputs. For `mse` the
/// divisor is the number of compared outputs of that data point.
pub fn total_cost(inst: &TrainingInstance, w: &Witness) -> Result<Scalar, EvalError> {
    verify_witness(inst, w, 0.0).map(|r| r.total_cost)
}

pub fn verify_witness(
    inst: &TrainingInstance,
    w: &Witness,
    tolerance: f64,
) -> Result<VerifyReport, EvalError> {
    match w.mode {
        Mode::Exact => verify_typed::<Rational>(inst, w, tolerance),
        Mode::Float => verify_typed::<f64>(inst, w, tolerance),
    }
}

fn verify_typed<T: Numeric>(
    inst: &TrainingInstance,
    w: &Witness,
    tolerance: f64,
) -> Result<VerifyReport, EvalError> {
    let dense = Dense::<T>::new(inst, w)?;
    let costs = inst
        .data
        .par_iter()
        .map(|d| dense.data_point_cost(inst, d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = T::zero();
    for (c, _) in &costs {
        total = total + c.clone();
    }
    let threshold = T::from_rational(&inst.threshold);
    let accepted = match T::MODE {
        Mode::Exact => total <= threshold,
        Mode::Float => total.clone().into_scalar().to_f64() <= inst_threshold_f64(inst) + tolerance,
    };
    Ok(VerifyReport {
        accepted,
        mode: T::MODE,
        threshold: threshold.into_scalar(),
        total_cost: total.into_scalar(),
        per_datapoint: costs.iter().map(|(c, _)| c.clone().into_scalar()).collect(),
        residuals: costs
            .into_iter()
            .map(|(_, r)| r.into_iter().map(|o| o.map(Numeric::into_scalar)).collect())
            .collect(),
    })
}

fn inst_threshold_f64(inst: &TrainingInstance) -> f64 {
    crate::scalar::rational_to_f64(&inst.threshold)
}
