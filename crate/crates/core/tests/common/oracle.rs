//! Evaluator written from scratch for identity networks: every output is the
//! sum over input-to-output paths of the input times the product of the
//! path's weights, plus bias contributions.

use std::collections::BTreeMap;

use etrnn::eval::{total_cost, Witness};
use etrnn::network::{Param, Role, Target, TrainingInstance};
use etrnn::scalar::{rational, Mode, Rational, Scalar};
use num_traits::Zero;

fn weight(inst: &TrainingInstance, w: &Witness, e: usize) -> Rational {
    match &inst.edges[e].weight {
        Param::Fixed(r) => r.clone(),
        Param::Free => w.weights[&e].as_exact().unwrap().clone(),
    }
}

fn bias(inst: &TrainingInstance, w: &Witness, n: usize) -> Rational {
    match inst.neurons[n].bias.as_ref().unwrap() {
        Param::Fixed(r) => r.clone(),
        Param::Free => w.biases[&n].as_exact().unwrap().clone(),
    }
}

/// Sum over paths ending at `n` of (start value) * (product of weights).
pub fn path_sum(inst: &TrainingInstance, w: &Witness, x: &BTreeMap<usize, Rational>, n: usize) -> Rational {
    if inst.neurons[n].role == Role::Input {
        return x[&n].clone();
    }
    let mut total = bias(inst, w, n);
    for e in &inst.edges {
        if e.dst == n {
            total += weight(inst, w, e.id) * path_sum(inst, w, x, e.src);
        }
    }
    total
}

pub fn oracle_cost(inst: &TrainingInstance, w: &Witness) -> Rational {
    let inputs: Vec<usize> = inst.neurons.iter().filter(|n| n.role == Role::Input).map(|n| n.id).collect();
    let outputs: Vec<usize> = inst.neurons.iter().filter(|n| n.role == Role::Output).map(|n| n.id).collect();
    let mut cost = Rational::zero();
    for d in &inst.data {
        let x: BTreeMap<usize, Rational> = inputs.iter().copied().zip(d.inputs.iter().cloned()).collect();
        let mut sq = Rational::zero();
        let mut k = 0i64;
        for (o, t) in outputs.iter().zip(&d.outputs) {
            if let Target::Value(t) = t {
                let r = path_sum(inst, w, &x, *o) - t;
                sq += &r * &r;
                k += 1;
            }
        }
        if k > 0 {
            cost += sq / Rational::from_integer(k.into());
        }
    }
    cost
}

pub fn witness_of(edges: &[usize], values: &[Rational]) -> Witness {
    let mut w = Witness::new(Mode::Exact);
    for (e, v) in edges.iter().zip(values) {
        w.weights.insert(*e, Scalar::Exact(v.clone()));
    }
    w
}

pub fn grid() -> Vec<Rational> {
    [(-2, 1), (-1, 1), (-1, 2), (0, 1), (1, 2), (1, 1), (2, 1)]
        .iter()
        .map(|&(p, q)| rational(p, q))
        .collect()
}

/// Calls `f` on every point of `grid^k`.
pub fn for_each_point(k: usize, mut f: impl FnMut(&[Rational])) {
    let g = grid();
    let mut idx = vec![0usize; k];
    loop {
        let point: Vec<Rational> = idx.iter().map(|&i| g[i].clone()).collect();
        f(&point);
        let mut d = 0;
        loop {
            if d == k {
                return;
            }
            idx[d] += 1;
            if idx[d] < g.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Walks `grid^k` over `edges`, checking the evaluator against the oracle
/// and the zero-cost set against `on_variety`. Returns the number of zeros.
pub fn check_variety(
    edges: &[usize],
    inst: &TrainingInstance,
    on_variety: impl Fn(&[Rational]) -> bool,
) -> usize {
    let mut hits = 0;
    for_each_point(edges.len(), |p| {
        let w = witness_of(edges, p);
        let cost = total_cost(inst, &w).unwrap();
        assert_eq!(cost, Scalar::Exact(oracle_cost(inst, &w)), "{p:?}");
        assert_eq!(cost.is_zero(), on_variety(p), "{p:?}");
        hits += usize::from(cost.is_zero());
    });
    hits
}
