//! Lowering ETR-INV formulas to combined constraints `x^±1 + y^±1 - z^±1 = 0`.
//!
//! The lowering runs three steps in order:
//!
//! 1. coverage: a variable that occurs in no addition constraint gets one,
//!    `v + c = c'` with two fresh variables;
//! 2. dedup: inversion partners are merged with a parity union-find, so
//!    `x * y1 = 1, x * y2 = 1` makes `y2` an alias of `y1`;
//! 3. substitution: every inversion partner `y` of a representative `x` is
//!    replaced by `x^-1` inside the addition constraints, and the inversion
//!    constraints disappear.
//!
//! An inversion class with an odd cycle (the simplest being `x * x = 1`) forces
//! its representative to equal its own inverse. That is encoded with the tie
//! `x^+1 + t - p = 0, x^-1 + t - p = 0` over fresh `t, p`.
//!
//! Fresh variables carry a [`VarOrigin`] so a source solution can be pushed
//! forward to a combined solution in which every variable is nonzero.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Assignment, Constraint, EtrInvFormula, SatisfactionReport, VarId};
use crate::scalar::{Mode, Numeric, Rational, ScalarError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exponent {
    Pos,
    Neg,
}

impl Exponent {
    pub fn is_inverse(self) -> bool {
        self == Exponent::Neg
    }

    pub fn flip(self) -> Self {
        match self {
            Exponent::Pos => Exponent::Neg,
            Exponent::Neg => Exponent::Pos,
        }
    }

    /// Composition `(v^a)^b`.
    pub fn compose(self, other: Exponent) -> Exponent {
        if self == other {
            Exponent::Pos
        } else {
            Exponent::Neg
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedTerm {
    pub var: VarId,
    pub exponent: Exponent,
    pub sign: Sign,
}

/// `t0 + t1 - t2 = 0`; the signs are always `(+, +, -)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CombinedConstraint {
    terms: [SignedTerm; 3],
}

impl CombinedConstraint {
    pub fn new(a: (VarId, Exponent), b: (VarId, Exponent), c: (VarId, Exponent)) -> Self {
        let term = |(var, exponent): (VarId, Exponent), sign| SignedTerm {
            var,
            exponent,
            sign,
        };
        CombinedConstraint {
            terms: [term(a, Sign::Plus), term(b, Sign::Plus), term(c, Sign::Minus)],
        }
    }

    pub fn terms(&self) -> &[SignedTerm; 3] {
        &self.terms
    }

    /// Whether the two positive terms name the same variable with the same
    /// exponent (they would need the same slot twice).
    pub fn has_repeated_term(&self) -> bool {
        let [a, b, _] = self.terms;
        a.var == b.var && a.exponent == b.exponent
    }
}

/// How a combined variable's value is derived from a source solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarOrigin {
    /// The source variable itself.
    Source { var: VarId },
    /// Equal to another combined variable.
    Alias { of: VarId },
    /// `1`, or `2` if `base^e + 1` would vanish.
    Shift { base: VarId, exponent: Exponent },
    /// `base^e + shift`.
    Sum {
        base: VarId,
        exponent: Exponent,
        shift: VarId,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvEqError {
    #[error("assignment has no value for `{0}`")]
    MissingVariable(String),
    #[error("division by zero: `{0}` is zero but appears inverted")]
    DivisionByZero(String),
    #[error("assignment mixes exact and float scalars")]
    ModeMismatch,
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// A conjunction of combined constraints plus the mapping back to the source
/// formula it was lowered from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedFormula {
    names: Vec<String>,
    constraints: Vec<CombinedConstraint>,
    origins: Vec<VarOrigin>,
    /// Indexed by source variable: the combined variable and exponent whose
    /// power equals the source variable.
    backmap: Vec<(VarId, Exponent)>,
}

impl CombinedFormula {
    /// A stand-alone combined formula: every variable is its own source.
    pub fn from_constraints(names: Vec<String>, constraints: Vec<CombinedConstraint>) -> Self {
        let n = names.len();
        CombinedFormula {
            names,
            constraints,
            origins: (0..n).map(|i| VarOrigin::Source { var: VarId(i) }).collect(),
            backmap: (0..n).map(|i| (VarId(i), Exponent::Pos)).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = VarId> {
        (0..self.names.len()).map(VarId)
    }

    pub fn constraints(&self) -> &[CombinedConstraint] {
        &self.constraints
    }

    pub fn origins(&self) -> &[VarOrigin] {
        &self.origins
    }

    pub fn backmap(&self) -> &[(VarId, Exponent)] {
        &self.backmap
    }

    fn fresh(&mut self, prefix: &str, counter: &mut usize, origin: VarOrigin) -> VarId {
        loop {
            let name = format!("{prefix}{counter}");
            *counter += 1;
            if !self.names.contains(&name) {
                self.names.push(name);
                self.origins.push(origin);
                return VarId(self.names.len() - 1);
            }
        }
    }

    /// Appends `base^+1 + t - p = 0` and `other^e + t - p = 0`, forcing
    /// `base = other^e`.
    fn push_tie(&mut self, base: VarId, other: (VarId, Exponent), counter: &mut usize) {
        let shift = self.fresh(
            "__tie",
            counter,
            VarOrigin::Shift {
                base,
                exponent: Exponent::Pos,
            },
        );
        let sum = self.fresh(
            "__tie",
            counter,
            VarOrigin::Sum {
                base,
                exponent: Exponent::Pos,
                shift,
            },
        );
        self.constraints.push(CombinedConstraint::new(
            (base, Exponent::Pos),
            (shift, Exponent::Pos),
            (sum, Exponent::Pos),
        ));
        self.constraints.push(CombinedConstraint::new(
            other,
            (shift, Exponent::Pos),
            (sum, Exponent::Pos),
        ));
    }
}

impl fmt::Display for CombinedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            let parts: Vec<String> = c
                .terms
                .iter()
                .map(|t| {
                    let sign = if t.sign == Sign::Plus { '+' } else { '-' };
                    let pow = if t.exponent.is_inverse() { "^-1" } else { "" };
                    format!("{sign}{}{pow}", self.name(t.var))
                })
                .collect();
            writeln!(f, "{} = 0", parts.join(" "))?;
        }
        Ok(())
    }
}

/// Parity union-find: `parity[v]` is the exponent of `v` relative to its parent.
struct ParityUnionFind {
    parent: Vec<usize>,
    parity: Vec<Exponent>,
    odd: Vec<bool>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n).collect(),
            parity: vec![Exponent::Pos; n],
            odd: vec![false; n],
        }
    }

    fn find(&mut self, v: usize) -> (usize, Exponent) {
        let p = self.parent[v];
        if p == v {
            return (v, Exponent::Pos);
        }
        let (root, up) = self.find(p);
        self.parity[v] = self.parity[v].compose(up);
        self.parent[v] = root;
        (root, self.parity[v])
    }

    /// Records `x * y = 1`, i.e. `x = y^-1`. The root is always the lowest index.
    fn union_inverse(&mut self, x: usize, y: usize) {
        let (rx, px) = self.find(x);
        let (ry, py) = self.find(y);
        if rx == ry {
            if px == py {
                self.odd[rx] = true;
            }
            return;
        }
        let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
        // x^px-relative and y^py-relative parities must differ
        self.parent[hi] = lo;
        self.parity[hi] = px.compose(py).flip();
        self.odd[lo] |= self.odd[hi];
    }
}

/// Lowers an ETR-INV formula to an equisatisfiable combined formula.
pub fn lower_to_combined(f: &EtrInvFormula) -> CombinedFormula {
    let n = f.num_vars();

    // Work in an extended index space: source variables, then fresh ones.
    let mut names: Vec<String> = f.names().to_vec();
    let mut ext_origins: Vec<Option<VarOrigin>> = vec![None; n];
    let mut additions: Vec<[usize; 3]> = Vec::new();
    let mut in_addition = vec![false; n];
    let mut uf = ParityUnionFind::new(n);
    for c in f.constraints() {
        match *c {
            Constraint::Addition { x, y, z } => {
                for v in [x, y, z] {
                    in_addition[v.0] = true;
                }
                additions.push([x.0, y.0, z.0]);
            }
            Constraint::Inversion { x, y } => uf.union_inverse(x.0, y.0),
        }
    }

    let taken: HashSet<String> = names.iter().cloned().collect();
    let mut counter = 0usize;
    let mut fresh_name = |prefix: &str| loop {
        let name = format!("{prefix}{counter}");
        counter += 1;
        if !taken.contains(&name) {
            return name;
        }
    };

    // (a) coverage: v + c = c'
    for v in (0..n).filter(|&v| !in_addition[v]) {
        let shift = names.len();
        names.push(fresh_name("__cov"));
        ext_origins.push(Some(VarOrigin::Shift {
            base: VarId(v),
            exponent: Exponent::Pos,
        }));
        let sum = names.len();
        names.push(fresh_name("__cov"));
        ext_origins.push(Some(VarOrigin::Sum {
            base: VarId(v),
            exponent: Exponent::Pos,
            shift: VarId(shift),
        }));
        additions.push([v, shift, sum]);
    }

    // (b) + (c): every variable becomes a power of its class representative
    let subst: Vec<(usize, Exponent)> = (0..names.len())
        .map(|v| if v < n { uf.find(v) } else { (v, Exponent::Pos) })
        .collect();

    let mut raw: Vec<CombinedConstraint> = additions
        .iter()
        .map(|&[x, y, z]| {
            let t = |v: usize| (VarId(subst[v].0), subst[v].1);
            CombinedConstraint::new(t(x), t(y), t(z))
        })
        .collect();

    // survivors: variables still mentioned, in extended-index order
    let mut used = vec![false; names.len()];
    for c in &raw {
        for t in &c.terms {
            used[t.var.0] = true;
        }
    }
    let mut renumber: BTreeMap<usize, VarId> = BTreeMap::new();
    let mut out = CombinedFormula {
        names: Vec::new(),
        constraints: Vec::new(),
        origins: Vec::new(),
        backmap: Vec::new(),
    };
    for v in (0..names.len()).filter(|&v| used[v]) {
        renumber.insert(v, VarId(out.names.len()));
        out.names.push(names[v].clone());
        out.origins.push(match ext_origins[v] {
            None => VarOrigin::Source { var: VarId(v) },
            Some(o) => o,
        });
    }
    // fresh-variable origins still refer to extended indices; resolve them
    let resolve = |v: VarId| -> (VarId, Exponent) {
        let (rep, e) = subst[v.0];
        (renumber[&rep], e)
    };
    for origin in out.origins.iter_mut() {
        *origin = match *origin {
            VarOrigin::Shift { base, exponent } => {
                let (b, e) = resolve(base);
                VarOrigin::Shift {
                    base: b,
                    exponent: e.compose(exponent),
                }
            }
            VarOrigin::Sum {
                base,
                exponent,
                shift,
            } => {
                let (b, e) = resolve(base);
                VarOrigin::Sum {
                    base: b,
                    exponent: e.compose(exponent),
                    shift: renumber[&shift.0],
                }
            }
            other => other,
        };
    }
    for c in raw.iter_mut() {
        for t in c.terms.iter_mut() {
            t.var = renumber[&t.var.0];
        }
    }
    out.constraints = raw;
    out.backmap = (0..n).map(|v| resolve(VarId(v))).collect();

    // odd inversion classes: representative equals its own inverse
    let mut odd_roots: Vec<usize> = (0..n).filter(|&v| subst[v].0 == v && uf.odd[v]).collect();
    odd_roots.sort_unstable();
    let mut tie_counter = 0usize;
    for root in odd_roots {
        let rep = renumber[&root];
        out.push_tie(rep, (rep, Exponent::Neg), &mut tie_counter);
    }
    out
}

/// Rewrites constraints whose two positive terms coincide (`x^e + x^e - z`),
/// replacing the second occurrence by an alias `a` tied to `x`. Every other
/// constraint is left untouched.
pub fn split_repeated_terms(cf: &CombinedFormula) -> CombinedFormula {
    let mut out = cf.clone();
    let mut aliases: BTreeMap<VarId, VarId> = BTreeMap::new();
    let mut alias_counter = 0usize;
    let mut tie_counter = out
        .names
        .iter()
        .filter(|n| n.starts_with("__tie"))
        .count();
    for i in 0..out.constraints.len() {
        let c = out.constraints[i];
        if !c.has_repeated_term() {
            continue;
        }
        let x = c.terms[0].var;
        let alias = match aliases.get(&x) {
            Some(&a) => a,
            None => {
                let a = out.fresh("__alias", &mut alias_counter, VarOrigin::Alias { of: x });
                out.push_tie(x, (a, Exponent::Pos), &mut tie_counter);
                aliases.insert(x, a);
                a
            }
        };
        out.constraints[i].terms[1].var = alias;
    }
    out
}

fn term_value<T: Numeric>(
    values: &[T],
    var: VarId,
    exponent: Exponent,
    names: &[String],
) -> Result<T, InvEqError> {
    let v = values[var.0].clone();
    if exponent.is_inverse() {
        if v.is_zero() {
            return Err(InvEqError::DivisionByZero(names[var.0].clone()));
        }
        Ok(T::one() / v)
    } else {
        Ok(v)
    }
}

/// Residual `s1 v1^e1 + s2 v2^e2 + s3 v3^e3` per constraint.
pub fn check_combined(
    cf: &CombinedFormula,
    a: &Assignment,
    tolerance: f64,
) -> Result<SatisfactionReport, InvEqError> {
    match a.mode().map_err(|_| InvEqError::ModeMismatch)? {
        Some(Mode::Float) => check_typed::<f64>(cf, a, tolerance),
        _ => check_typed::<Rational>(cf, a, tolerance),
    }
}

fn dense<T: Numeric>(names: &[String], a: &Assignment) -> Result<Vec<T>, InvEqError> {
    a.dense(names.len()).map_err(|(i, mismatch)| {
        if mismatch {
            InvEqError::ModeMismatch
        } else {
            InvEqError::MissingVariable(names[i].clone())
        }
    })
}

fn check_typed<T: Numeric>(
    cf: &CombinedFormula,
    a: &Assignment,
    tolerance: f64,
) -> Result<SatisfactionReport, InvEqError> {
    let values: Vec<T> = dense(&cf.names, a)?;
    let mut residuals = Vec::with_capacity(cf.constraints.len());
    for c in &cf.constraints {
        let mut r = T::zero();
        for t in &c.terms {
            let v = term_value(&values, t.var, t.exponent, &cf.names)?;
            r = match t.sign {
                Sign::Plus => r + v,
                Sign::Minus => r - v,
            };
        }
        residuals.push(r.into_scalar());
    }
    Ok(SatisfactionReport::from_residuals(residuals, tolerance))
}

/// Maps a source assignment to the combined variables using their origins.
/// Fresh variables receive nonzero values whenever the source values do.
pub fn push_forward(
    cf: &CombinedFormula,
    source_names: &[String],
    a: &Assignment,
) -> Result<Assignment, InvEqError> {
    match a.mode().map_err(|_| InvEqError::ModeMismatch)? {
        Some(Mode::Float) => push_typed::<f64>(cf, source_names, a),
        _ => push_typed::<Rational>(cf, source_names, a),
    }
}

fn push_typed<T: Numeric>(
    cf: &CombinedFormula,
    source_names: &[String],
    a: &Assignment,
) -> Result<Assignment, InvEqError> {
    let source: Vec<T> = dense(source_names, a)?;
    let mut values: Vec<T> = Vec::with_capacity(cf.num_vars());
    for origin in &cf.origins {
        let value = match *origin {
            VarOrigin::Source { var } => source[var.0].clone(),
            VarOrigin::Alias { of } => values[of.0].clone(),
            VarOrigin::Shift { base, exponent } => {
                let b = term_value(&values, base, exponent, &cf.names)?;
                let one = T::one();
                if (b + one.clone()).is_zero() {
                    one.clone() + one
                } else {
                    one
                }
            }
            VarOrigin::Sum {
                base,
                exponent,
                shift,
            } => term_value(&values, base, exponent, &cf.names)? + values[shift.0].clone(),
        };
        values.push(value);
    }
    Ok(Assignment::from_values(values.into_iter().map(Numeric::into_scalar)))
}

/// Recovers source values: each source variable is `value(rep)^e`.
pub fn pull_back(cf: &CombinedFormula, a: &Assignment) -> Result<Assignment, InvEqError> {
    let mut out = Assignment::new();
    for (i, &(var, exponent)) in cf.backmap.iter().enumerate() {
        let v = a
            .get(var)
            .ok_or_else(|| InvEqError::MissingVariable(cf.name(var).to_string()))?;
        let value = v
            .powi_unit(exponent.is_inverse())
            .map_err(|_| InvEqError::DivisionByZero(cf.name(var).to_string()))?;
        out.insert(VarId(i), value);
    }
    out.mode().map_err(|_| InvEqError::ModeMismatch)?;
    Ok(out)
}

/// Parses lines `[+|-]ident[^-1] [+|-]ident[^-1] [+|-]ident[^-1] = 0`. The
/// signs must be `+ + -`.
pub fn parse_combined(text: &str) -> Result<CombinedFormula, InvEqError> {
    let mut names: Vec<String> = Vec::new();
    let mut constraints = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: &str| InvEqError::Syntax {
            line: i + 1,
            message: message.to_string(),
        };
        let (lhs, rhs) = line.split_once('=').ok_or_else(|| syntax("expected `= 0`"))?;
        if rhs.trim() != "0" {
            return Err(syntax("right-hand side must be 0"));
        }
        let words: Vec<&str> = lhs.split_whitespace().collect();
        if words.len() != 3 {
            return Err(syntax("expected exactly three signed terms"));
        }
        let mut terms = Vec::with_capacity(3);
        for (k, w) in words.iter().enumerate() {
            let expected = if k < 2 { '+' } else { '-' };
            let body = w
                .strip_prefix(expected)
                .ok_or_else(|| syntax("signs must be `+ + -`"))?;
            let (ident, exponent) = match body.strip_suffix("^-1") {
                Some(id) => (id, Exponent::Neg),
                None => (body, Exponent::Pos),
            };
            let valid = ident
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && ident.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(syntax("malformed identifier"));
            }
            let var = match names.iter().position(|n| n == ident) {
                Some(p) => VarId(p),
                None => {
                    names.push(ident.to_string());
                    VarId(names.len() - 1)
                }
            };
            terms.push((var, exponent));
        }
        constraints.push(CombinedConstraint::new(terms[0], terms[1], terms[2]));
    }
    Ok(CombinedFormula::from_constraints(names, constraints))
}
