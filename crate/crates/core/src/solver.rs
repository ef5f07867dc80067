//! Witness search for small instances.
//!
//! [`local_search`] is plain gradient descent in `f64` from uniform random
//! starting points, with independent restarts. [`grid_search`] enumerates
//! exact grid values with pruning and is only meant as an oracle for tiny
//! instances; neither says anything about instances where they fail.
//!
//! Parameters are ordered as free edges by id, then free biases by neuron id.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::eval::{activate, verify_witness, EvalError, Witness};
use crate::network::{
    Activation, CostKind, EdgeId, NeuronId, Param, Role, Topology, TrainingInstance,
};
use crate::scalar::{Mode, Numeric, Rational, Scalar};

/// Restarts run in batches of this size; later batches are skipped once a
/// batch reaches the target tolerance. Fixed so results do not depend on the
/// thread count.
const BATCH: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("every restart diverged to a non-finite cost")]
    NonFiniteCost,
    #[error("grid search visited more than {budget} nodes")]
    BudgetExceeded { budget: u128 },
    #[error("grid values must be exact")]
    InexactGrid,
    #[error("the grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step: f64,
    pub init_lo: f64,
    pub init_hi: f64,
    pub seed: u64,
    /// A restart stops once its cost falls below this.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 100,
            max_iters: 5000,
            step: 0.05,
            init_lo: -2.0,
            init_hi: 2.0,
            seed: 0,
            tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    // negated comparisons so that NaN fails
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.into()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.init_lo < self.init_hi) || !self.init_lo.is_finite() || !self.init_hi.is_finite() {
            return bad("initialization range needs lo < hi");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub witness: Witness,
    pub cost: f64,
    /// Index of the restart that produced `witness`.
    pub restart: usize,
    pub iterations: usize,
    pub restarts_run: usize,
    pub restarts_abandoned: usize,
}

/// Instance flattened for repeated evaluation with parameter vectors.
struct Net<T> {
    topo: Topology,
    src: Vec<NeuronId>,
    /// Fixed value or parameter index per edge.
    weight: Vec<Slot<T>>,
    bias: Vec<Slot<T>>,
    activation: Vec<Option<Activation>>,
    free_edges: Vec<EdgeId>,
    free_biases: Vec<NeuronId>,
    cost: CostKind,
    data: Vec<(Vec<T>, Vec<Option<T>>)>,
}

#[derive(Clone)]
enum Slot<T> {
    Fixed(T),
    Param(usize),
}

impl<T: Numeric> Net<T> {
    fn new(inst: &TrainingInstance) -> Result<Self, SolverError> {
        let topo = inst.topology().map_err(EvalError::from)?;
        let free_edges = inst.free_edges();
        let free_biases = inst.free_biases();
        let weight = inst
            .edges
            .iter()
            .map(|e| match &e.weight {
                Param::Fixed(r) => Slot::Fixed(T::from_rational(r)),
                Param::Free => Slot::Param(free_edges.binary_search(&e.id).expect("free")),
            })
            .collect();
        let mut bias = Vec::with_capacity(inst.neurons.len());
        for n in &inst.neurons {
            if n.role != Role::Input && (n.activation.is_none() || n.bias.is_none()) {
                return Err(EvalError::Malformed(n.id).into());
            }
            bias.push(match &n.bias {
                None => Slot::Fixed(T::zero()),
                Some(Param::Fixed(r)) => Slot::Fixed(T::from_rational(r)),
                Some(Param::Free) => Slot::Param(
                    free_edges.len() + free_biases.binary_search(&n.id).expect("free"),
                ),
            });
        }
        let (n_in, n_out) = (topo.inputs.len(), topo.outputs.len());
        let mut data = Vec::with_capacity(inst.data.len());
        for d in &inst.data {
            if d.inputs.len() != n_in {
                return Err(EvalError::IncompatibleDimensions { expected: n_in, got: d.inputs.len() }.into());
            }
            if d.outputs.len() != n_out {
                return Err(EvalError::IncompatibleDimensions { expected: n_out, got: d.outputs.len() }.into());
            }
            data.push((
                d.inputs.iter().map(T::from_rational).collect(),
                d.outputs.iter().map(|t| t.value().map(T::from_rational)).collect(),
            ));
        }
        Ok(Net {
            topo,
            src: inst.edges.iter().map(|e| e.src).collect(),
            weight,
            bias,
            activation: inst.neurons.iter().map(|n| n.activation.clone()).collect(),
            free_edges,
            free_biases,
            cost: inst.cost,
            data,
        })
    }

    fn num_params(&self) -> usize {
        self.free_edges.len() + self.free_biases.len()
    }

    fn get(slot: &Slot<T>, p: &[T]) -> T {
        match slot {
            Slot::Fixed(v) => v.clone(),
            Slot::Param(i) => p[*i].clone(),
        }
    }

    /// Pre-activations and values of every neuron.
    fn forward(&self, p: &[T], x: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.activation.len();
        let mut pre = vec![T::zero(); n];
        let mut post = vec![T::zero(); n];
        for &v in &self.topo.order {
            if let Some(k) = self.topo.input_pos[v] {
                post[v] = x[k].clone();
                continue;
            }
            let mut acc = Self::get(&self.bias[v], p);
            for &e in &self.topo.incoming[v] {
                acc = acc + Self::get(&self.weight[e], p) * post[self.src[e]].clone();
            }
            post[v] = activate(self.activation[v].as_ref(), acc.clone());
            pre[v] = acc;
        }
        (pre, post)
    }

    fn residuals(&self, post: &[T], targets: &[Option<T>]) -> Vec<Option<T>> {
        self.topo
            .outputs
            .iter()
            .zip(targets)
            .map(|(&o, t)| t.as_ref().map(|t| post[o].clone() - t.clone()))
            .collect()
    }

    fn point_cost(&self, residuals: &[Option<T>]) -> T {
        let mut sum = T::zero();
        let mut count = T::zero();
        for r in residuals.iter().flatten() {
            sum = sum
                + match self.cost {
                    CostKind::Mse => r.clone() * r.clone(),
                    CostKind::L1 => r.abs(),
                };
            count = count + T::one();
        }
        if self.cost == CostKind::Mse && !count.is_zero() {
            sum / count
        } else {
            sum
        }
    }

    fn witness(&self, p: &[T]) -> Witness {
        let mut w = Witness::new(T::MODE);
        for (i, &e) in self.free_edges.iter().enumerate() {
            w.weights.insert(e, p[i].clone().into_scalar());
        }
        for (i, &n) in self.free_biases.iter().enumerate() {
            w.biases.insert(n, p[self.free_edges.len() + i].clone().into_scalar());
        }
        w
    }

    fn params_of(&self, w: &Witness) -> Result<Vec<T>, SolverError> {
        let conv = |s: &Scalar| T::from_scalar(s).ok_or(EvalError::ModeMismatch);
        let mut p = Vec::with_capacity(self.num_params());
        for e in &self.free_edges {
            p.push(conv(w.weights.get(e).ok_or_else(|| {
                EvalError::IdMismatch(format!("missing weight for edge {e}"))
            })?)?);
        }
        for n in &self.free_biases {
            p.push(conv(w.biases.get(n).ok_or_else(|| {
                EvalError::IdMismatch(format!("missing bias for neuron {n}"))
            })?)?);
        }
        Ok(p)
    }
}

/// Derivative of the activation at `pre`; 0 at a kink.
fn activation_slope(a: Option<&Activation>, pre: f64) -> f64 {
    match a {
        None | Some(Activation::Identity) => 1.0,
        Some(Activation::Relu) => (pre > 0.0) as u8 as f64,
        Some(Activation::ShiftedRelu(c)) => (pre > crate::scalar::rational_to_f64(c)) as u8 as f64,
    }
}

impl Net<f64> {
    /// Total cost and its gradient by backpropagation.
    fn cost_and_gradient(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let n = self.activation.len();
        let mut grad = vec![0.0; p.len()];
        let mut total = 0.0;
        let mut up = vec![0.0; n];
        for (x, targets) in &self.data {
            let (pre, post) = self.forward(p, x);
            let res = self.residuals(&post, targets);
            total += self.point_cost(&res);
            let count = res.iter().flatten().count() as f64;
            up.iter_mut().for_each(|u| *u = 0.0);
            for (&o, r) in self.topo.outputs.iter().zip(&res) {
                if let Some(r) = r {
                    up[o] += match self.cost {
                        CostKind::Mse => 2.0 * r / count,
                        CostKind::L1 => {
                            if *r > 0.0 {
                                1.0
                            } else if *r < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        }
                    };
                }
            }
            for &v in self.topo.order.iter().rev() {
                if self.topo.input_pos[v].is_some() || up[v] == 0.0 {
                    continue;
                }
                let delta = up[v] * activation_slope(self.activation[v].as_ref(), pre[v]);
                if delta == 0.0 {
                    continue;
                }
                if let Slot::Param(i) = self.bias[v] {
                    grad[i] += delta;
                }
                for &e in &self.topo.incoming[v] {
                    let s = self.src[e];
                    if let Slot::Param(i) = self.weight[e] {
                        grad[i] += delta * post[s];
                    }
                    up[s] += delta * Self::get(&self.weight[e], p);
                }
            }
        }
        (total, grad)
    }

    fn cost(&self, p: &[f64]) -> f64 {
        self.data
            .iter()
            .map(|(x, t)| {
                let (_, post) = self.forward(p, x);
                self.point_cost(&self.residuals(&post, t))
            })
            .sum()
    }
}

/// Cost of a float witness and its gradient with respect to every free
/// weight and bias, returned in the shape of a witness.
pub fn gradient(inst: &TrainingInstance, w: &Witness) -> Result<(f64, Witness), SolverError> {
    w.check_against(inst)?;
    let net = Net::<f64>::new(inst)?;
    let p = net.params_of(&w.to_mode(Mode::Float))?;
    let (cost, g) = net.cost_and_gradient(&p);
    let g = g
        .into_iter()
        .map(|v| if v.is_finite() { v } else { f64::NAN })
        .collect::<Vec<_>>();
    if g.iter().any(|v| v.is_nan()) || !cost.is_finite() {
        return Err(SolverError::NonFiniteCost);
    }
    Ok((cost, net.witness(&g)))
}

struct Run {
    restart: usize,
    cost: f64,
    iterations: usize,
    params: Vec<f64>,
}

fn descend(net: &Net<f64>, cfg: &SolverConfig, restart: usize) -> Option<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut p: Vec<f64> = (0..net.num_params())
        .map(|_| rng.gen_range(cfg.init_lo..cfg.init_hi))
        .collect();
    let mut best = (f64::INFINITY, p.clone(), 0);
    for it in 0..cfg.max_iters {
        let (cost, g) = net.cost_and_gradient(&p);
        if !cost.is_finite() {
            return None;
        }
        if cost < best.0 {
            best = (cost, p.clone(), it);
        }
        if cost < cfg.tolerance {
            break;
        }
        for (v, d) in p.iter_mut().zip(&g) {
            *v -= cfg.step * d;
        }
    }
    let last = net.cost(&p);
    if !last.is_finite() && !best.0.is_finite() {
        return None;
    }
    if last < best.0 {
        best = (last, p, cfg.max_iters);
    }
    Some(Run {
        restart,
        cost: best.0,
        iterations: best.2,
        params: best.1,
    })
}

/// Best float witness over `cfg.restarts` gradient-descent runs. The result
/// depends only on the instance and the configuration.
pub fn local_search(inst: &TrainingInstance, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    let net = Net::<f64>::new(inst)?;
    let mut runs: Vec<Run> = Vec::new();
    let mut run_count = 0;
    let mut abandoned = 0;
    let mut start = 0;
    while start < cfg.restarts {
        let end = (start + BATCH).min(cfg.restarts);
        let batch: Vec<Option<Run>> = (start..end)
            .into_par_iter()
            .map(|r| descend(&net, cfg, r))
            .collect();
        run_count += batch.len();
        abandoned += batch.iter().filter(|r| r.is_none()).count();
        runs.extend(batch.into_iter().flatten());
        start = end;
        if runs.iter().any(|r| r.cost < cfg.tolerance) {
            break;
        }
    }
    let best = runs
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.restart.cmp(&b.restart)))
        .ok_or(SolverError::NonFiniteCost)?;
    Ok(SolveResult {
        witness: net.witness(&best.params),
        cost: best.cost,
        restart: best.restart,
        iterations: best.iterations,
        restarts_run: run_count,
        restarts_abandoned: abandoned,
    })
}

/// First zero-cost witness in lexicographic grid order (first parameter most
/// significant, grid values in the given order), or `None`.
///
/// A data point is checked as soon as every parameter it depends on is
/// assigned, and the branch is cut if it costs anything. `budget` bounds the
/// number of partial assignments visited.
pub fn grid_search(
    inst: &TrainingInstance,
    grid: &[Scalar],
    budget: u128,
) -> Result<Option<Witness>, SolverError> {
    if grid.is_empty() {
        return Err(SolverError::EmptyGrid);
    }
    let grid: Vec<Rational> = grid
        .iter()
        .map(|s| s.as_exact().cloned().ok_or(SolverError::InexactGrid))
        .collect::<Result<_, _>>()?;
    let net = Net::<Rational>::new(inst)?;
    let k = net.num_params();
    let deps = dependencies(inst, &net);
    // data points to check once parameter i is assigned
    let mut due: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (d, dep) in deps.iter().enumerate() {
        due[dep.iter().max().map_or(0, |&m| m + 1)].push(d);
    }
    let zero_cost = |p: &[Rational], d: usize| {
        let (x, t) = &net.data[d];
        let (_, post) = net.forward(p, x);
        net.point_cost(&net.residuals(&post, t)).is_zero()
    };
    let mut p = vec![Rational::zero(); k];
    if !due[0].iter().all(|&d| zero_cost(&p, d)) {
        return Ok(None);
    }
    if k == 0 {
        return Ok(Some(net.witness(&p)));
    }
    // iterative depth-first search; choice[i] is the grid index at depth i
    let mut choice = vec![0usize; k];
    let mut depth = 0;
    let mut visited: u128 = 0;
    loop {
        if choice[depth] == grid.len() {
            choice[depth] = 0;
            p[depth] = Rational::zero();
            if depth == 0 {
                return Ok(None);
            }
            depth -= 1;
            choice[depth] += 1;
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(SolverError::BudgetExceeded { budget });
        }
        p[depth] = grid[choice[depth]].clone();
        if due[depth + 1].iter().all(|&d| zero_cost(&p, d)) {
            if depth + 1 == k {
                let w = net.witness(&p);
                debug_assert!(verify_witness(inst, &w, 0.0).is_ok_and(|r| r.accepted));
                return Ok(Some(w));
            }
            depth += 1;
        } else {
            choice[depth] += 1;
        }
    }
}

/// Parameters each data point's cost can depend on: free weights on a path
/// from an active neuron (nonzero input or nonzero/free bias) to a compared
/// output, and free biases of neurons that reach a compared output.
fn dependencies<T: Numeric>(inst: &TrainingInstance, net: &Net<T>) -> Vec<Vec<usize>> {
    let n = inst.neurons.len();
    let mut succ = vec![Vec::new(); n];
    for e in &inst.edges {
        succ[e.src].push(e.dst);
    }
    let order = &net.topo.order;
    let biased: Vec<bool> = net
        .bias
        .iter()
        .map(|b| match b {
            Slot::Fixed(v) => !v.is_zero(),
            Slot::Param(_) => true,
        })
        .collect();
    net.data
        .iter()
        .map(|(x, targets)| {
            let mut active = vec![false; n];
            for &v in order {
                if let Some(k) = net.topo.input_pos[v] {
                    active[v] = !x[k].is_zero();
                } else {
                    active[v] = active[v] || biased[v];
                }
                if active[v] {
                    for &s in &succ[v] {
                        active[s] = true;
                    }
                }
            }
            let mut relevant = vec![false; n];
            for (&o, t) in net.topo.outputs.iter().zip(targets) {
                relevant[o] = t.is_some();
            }
            for &v in order.iter().rev() {
                if succ[v].iter().any(|&s| relevant[s]) {
                    relevant[v] = true;
                }
            }
            let mut dep = Vec::new();
            for e in &inst.edges {
                if let Slot::Param(i) = net.weight[e.id] {
                    if active[e.src] && relevant[e.dst] {
                        dep.push(i);
                    }
                }
            }
            for (slot, &r) in net.bias.iter().zip(&relevant) {
                if let (Slot::Param(i), true) = (slot, r) {
                    dep.push(*i);
                }
            }
            dep
        })
        .collect()
}
