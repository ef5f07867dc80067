//! Shared fixtures: satisfiable formulas with hand-checked nonzero rational
//! solutions, chain formulas, and seeded random rationals.
#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;

use etrnn::formula::{parse_etr_inv, Assignment, EtrInvFormula};
use etrnn::scalar::{parse_rational, Rational, Scalar};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub text: String,
    pub solution: Vec<(String, String)>,
}

impl Case {
    pub fn formula(&self) -> EtrInvFormula {
        parse_etr_inv(&self.text).unwrap()
    }

    pub fn assignment(&self) -> Assignment {
        let f = self.formula();
        let by_name: BTreeMap<String, Scalar> = self
            .solution
            .iter()
            .map(|(n, v)| (n.clone(), Scalar::Exact(parse_rational(v).unwrap())))
            .collect();
        Assignment::from_names(f.names(), &by_name).unwrap()
    }
}

fn case(text: &str, solution: &[(&str, &str)]) -> Case {
    Case {
        text: text.to_string(),
        solution: solution.iter().map(|(n, v)| (n.to_string(), v.to_string())).collect(),
    }
}

/// `x_i + x_{i+1} = x_{i+2}` for `i < n - 2`, plus `x0 * x1 = 1`.
pub fn chain_formula(n: usize) -> EtrInvFormula {
    let mut f = EtrInvFormula::new();
    f.invert("x0", "x1");
    for i in 0..n.saturating_sub(2) {
        f.add(&format!("x{i}"), &format!("x{}", i + 1), &format!("x{}", i + 2));
    }
    f
}

/// Solution of [`chain_formula`] starting from `x0 = 2`, `x1 = 1/2`.
pub fn chain_solution(n: usize) -> Assignment {
    let mut values = vec![Rational::new(2.into(), 1.into()), Rational::new(1.into(), 2.into())];
    while values.len() < n {
        let k = values.len();
        values.push(&values[k - 2] + &values[k - 1]);
    }
    Assignment::from_values(values.into_iter().take(n).map(Scalar::Exact))
}

pub fn chain_case(n: usize) -> Case {
    let f = chain_formula(n);
    let a = chain_solution(n);
    let solution = f
        .names()
        .iter()
        .zip(a.iter())
        .map(|(name, (_, v))| (name.clone(), v.to_string()))
        .collect();
    Case {
        text: f.to_string(),
        solution,
    }
}

pub fn corpus() -> Vec<Case> {
    vec![
        case("x + y = z", &[("x", "1"), ("y", "2"), ("z", "3")]),
        case("x * y = 1", &[("x", "2"), ("y", "1/2")]),
        case("x + y = z\nx * w = 1", &[("x", "2"), ("y", "1"), ("z", "3"), ("w", "1/2")]),
        case("x + x = y", &[("x", "1"), ("y", "2")]),
        case("x * x = 1", &[("x", "-1")]),
        case("x + y = z\ny + z = w", &[("x", "1"), ("y", "1"), ("z", "2"), ("w", "3")]),
        case("a * b = 1\nb * c = 1", &[("a", "2"), ("b", "1/2"), ("c", "2")]),
        case(
            "x + y = z\nz * w = 1\nw + w = v",
            &[("x", "1"), ("y", "1"), ("z", "2"), ("w", "1/2"), ("v", "1")],
        ),
        case("x * y = 1\ny * z = 1\nz * x = 1", &[("x", "1"), ("y", "1"), ("z", "1")]),
        case("x + y = z\nx * y = 1", &[("x", "2"), ("y", "1/2"), ("z", "5/2")]),
        case(
            "p + q = r\nr * s = 1\np * q = 1",
            &[("p", "2"), ("q", "1/2"), ("r", "5/2"), ("s", "2/5")],
        ),
        case(
            "u + u = v\nv + v = w\nw * t = 1",
            &[("u", "1"), ("v", "2"), ("w", "4"), ("t", "1/4")],
        ),
        case(
            "x + y = z\nz + y = w\nw * x = 1",
            &[("x", "1/2"), ("y", "3/4"), ("z", "5/4"), ("w", "2")],
        ),
        case(
            "a + b = c\nc + d = e\ne + f = g\ng * a = 1",
            &[("a", "1"), ("b", "1"), ("c", "2"), ("d", "1"), ("e", "3"), ("f", "-2"), ("g", "1")],
        ),
        case(
            "x * y = 1\nx + y = z\nz + z = w",
            &[("x", "-1"), ("y", "-1"), ("z", "-2"), ("w", "-4")],
        ),
        case("x + y = z\ny + x = z", &[("x", "3"), ("y", "4"), ("z", "7")]),
        case("x * y = 1\ny * x = 1", &[("x", "3"), ("y", "1/3")]),
        case("x + y = z\nz * z = 1", &[("x", "1/2"), ("y", "1/2"), ("z", "1")]),
        case(
            "a + b = c\nb + c = d\nc + d = e\nd + e = f",
            &[("a", "1"), ("b", "1"), ("c", "2"), ("d", "3"), ("e", "5"), ("f", "8")],
        ),
        case(
            "x * y = 1\ny + y = z\nz * w = 1",
            &[("x", "2"), ("y", "1/2"), ("z", "1"), ("w", "1")],
        ),
        case(
            "m + n = k\nk * j = 1\nj + j = m",
            &[("m", "1"), ("n", "1"), ("k", "2"), ("j", "1/2")],
        ),
        case("x + y = z\nx + y = z", &[("x", "-3"), ("y", "5"), ("z", "2")]),
        case(
            "x * y = 1\nx + x = z\nz * w = 1",
            &[("x", "2"), ("y", "1/2"), ("z", "4"), ("w", "1/4")],
        ),
        chain_case(4),
        chain_case(6),
    ]
}

/// Formulas with at most three variables, for exact grid search.
pub fn small_cases() -> Vec<Case> {
    corpus()
        .into_iter()
        .filter(|c| c.formula().num_vars() <= 3)
        .collect()
}

/// `{x + x = y, x * y = 1}`: solutions `x = ±1/sqrt(2)`, none rational.
pub const IRRATIONAL: &str = "x + x = y\nx * y = 1";

/// `{x + x = x, x * y = 1}`: forces `x = 0`, which has no inverse.
pub const UNSATISFIABLE: &str = "x + x = x\nx * y = 1";

/// Nonzero rational `p/q` with `|p| <= 9`, `1 <= q <= 9`.
pub fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    loop {
        let p: i64 = rng.gen_range(-9..=9);
        if p != 0 {
            let q: i64 = rng.gen_range(1..=9);
            return Rational::new(p.into(), q.into());
        }
    }
}

pub fn small_scalar(rng: &mut ChaCha8Rng) -> Scalar {
    Scalar::Exact(small_rational(rng))
}
