mod common;

use common::{corpus, small_cases};
use etrnn::eval::{total_cost, verify_witness, Witness};
use etrnn::formula::{evaluate_formula, parse_etr_inv};
use etrnn::lowering::{compile_full, compile_staged, Stage};
use etrnn::network::{CostKind, TrainingInstance};
use etrnn::scalar::{Mode, Scalar};
use etrnn::solver::{gradient, grid_search, local_search, SolverConfig, SolverError};
use etrnn::witness::{assemble_witness, extract_assignment, read_value_slots};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Values `k/64` in `[-2, 2]`: exact as floats and cheap as rationals.
fn float_witness(inst: &TrainingInstance, rng: &mut ChaCha8Rng) -> Witness {
    let mut draw = || Scalar::Float(rng.gen_range(-128i32..=128) as f64 / 64.0);
    let mut w = Witness::new(Mode::Float);
    for e in inst.free_edges() {
        w.weights.insert(e, draw());
    }
    for n in inst.free_biases() {
        w.biases.insert(n, draw());
    }
    w
}

fn nudge(w: &Witness, bias: bool, key: usize, h: &Scalar) -> Witness {
    let mut w = w.clone();
    let map = if bias { &mut w.biases } else { &mut w.weights };
    let v = map[&key].add(h).unwrap();
    map.insert(key, v);
    w
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cases = corpus();
    let mut checked = 0;
    for _ in 0..100 {
        let c = cases.choose(&mut rng).unwrap();
        let stage = *[Stage::Restricted, Stage::FixedFree, Stage::Plain].choose(&mut rng).unwrap();
        let (inst, _) = compile_staged(&c.formula(), stage, CostKind::Mse).unwrap();
        let w = float_witness(&inst, &mut rng);
        let (cost, g) = gradient(&inst, &w).unwrap();
        // Along one parameter the cost is a quadratic (each output is affine
        // in any single weight or bias), so a central difference with any
        // step is the derivative up to rounding; a large step keeps that small.
        let reference = total_cost(&inst, &w.to_mode(Mode::Exact)).unwrap().to_f64();
        assert!((cost - reference).abs() <= 1e-9 * reference.max(1.0));
        let h = Scalar::Float(0.5);
        let mut params: Vec<(bool, usize)> = w.weights.keys().map(|&k| (false, k)).collect();
        params.extend(w.biases.keys().map(|&k| (true, k)));
        for &(bias, key) in params.choose_multiple(&mut rng, 4) {
            let up = total_cost(&inst, &nudge(&w, bias, key, &h)).unwrap().to_f64();
            let down = total_cost(&inst, &nudge(&w, bias, key, &h.neg())).unwrap().to_f64();
            let fd = up - down;
            let an = if bias { &g.biases } else { &g.weights }[&key].to_f64();
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-3);
            assert!(rel < 1e-6, "{} {stage:?} param {key}: {an} vs {fd}", c.text);
            checked += 1;
        }
    }
    assert_eq!(checked, 400);
}

#[test]
fn local_search_is_deterministic_per_seed() {
    let f = parse_etr_inv("x * y = 1").unwrap();
    let (inst, _) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
    let cfg = SolverConfig {
        restarts: 10,
        max_iters: 300,
        seed: 17,
        ..SolverConfig::default()
    };
    let a = local_search(&inst, &cfg).unwrap();
    let b = local_search(&inst, &cfg).unwrap();
    assert_eq!(a, b);
    let c = local_search(&inst, &SolverConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.witness, c.witness);
}

#[test]
fn local_search_finds_lifts_that_verify() {
    let f = parse_etr_inv("x + y = z").unwrap();
    let (restricted, rmap) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
    let r = local_search(&restricted, &SolverConfig::default()).unwrap();
    assert!(r.cost < 1e-10);
    let values = read_value_slots(&restricted, &r.witness, &rmap);
    let (plain, pmap) = compile_full(&f).unwrap();
    let lifted = assemble_witness(&plain, &pmap, &values).unwrap();
    assert!(verify_witness(&plain, &lifted, 1e-8).unwrap().accepted);
}

#[test]
fn grid_hits_on_small_formulas_extract() {
    let grid: Vec<Scalar> = [(-2, 1), (-1, 1), (-1, 2), (1, 2), (1, 1), (2, 1)]
        .iter()
        .map(|&(p, q)| Scalar::ratio(p, q))
        .collect();
    let mut hits = 0;
    for c in small_cases() {
        let f = c.formula();
        let (inst, map) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
        let Some(w) = grid_search(&inst, &grid, 10_000_000).unwrap() else {
            continue;
        };
        assert!(total_cost(&inst, &w).unwrap().is_zero());
        let a = extract_assignment(&inst, &w, &map).unwrap();
        assert!(evaluate_formula(&f, &a, 0.0).unwrap().satisfied, "{}", c.text);
        // the same values give a zero-cost plain witness
        let (plain, pmap) = compile_full(&f).unwrap();
        let lifted = assemble_witness(&plain, &pmap, &read_value_slots(&inst, &w, &map)).unwrap();
        assert_eq!(extract_assignment(&plain, &lifted, &pmap).unwrap(), a);
        hits += 1;
    }
    assert!(hits >= 8, "{hits}");
}

#[test]
fn grid_search_reports_exhausted_budget() {
    let f = parse_etr_inv("x + y = z").unwrap();
    let (inst, _) = compile_staged(&f, Stage::Restricted, CostKind::Mse).unwrap();
    let grid = [Scalar::integer(1), Scalar::integer(2)];
    assert!(matches!(
        grid_search(&inst, &grid, 5),
        Err(SolverError::BudgetExceeded { budget: 5 })
    ));
    assert!(matches!(
        grid_search(&inst, &[Scalar::Float(1.0)], 5),
        Err(SolverError::InexactGrid)
    ));
}
