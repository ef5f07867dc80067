//! ETR-INV formulas: conjunctions of `x + y = z` and `x * y = 1` over real
//! variables.
//!
//! Text format, one constraint per line, `#` starts a comment:
//!
//! ```text
//! x + y = z
//! x * w = 1
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Mode, Numeric, Rational, Scalar, ScalarError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `x + y = z`
    Addition { x: VarId, y: VarId, z: VarId },
    /// `x * y = 1`
    Inversion { x: VarId, y: VarId },
}

impl Constraint {
    pub fn vars(&self) -> Vec<VarId> {
        match *self {
            Constraint::Addition { x, y, z } => vec![x, y, z],
            Constraint::Inversion { x, y } => vec![x, y],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported constraint at line {line}, column {column}: {message}")]
    UnsupportedConstraint {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("assignment has no value for variable `{0}`")]
    MissingVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownName(String),
    #[error("variable `{0}` is declared twice")]
    DuplicateName(String),
    #[error("variable index {0} does not exist in this formula")]
    DanglingVar(usize),
    #[error("assignment mixes exact and float scalars")]
    ModeMismatch,
    #[error("search space of {needed} assignments exceeds budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("search grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// A conjunction of addition and inversion constraints. Variables are dense
/// `VarId(0..n)` with unique names. An empty constraint list is allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFormula")]
pub struct EtrInvFormula {
    names: Vec<String>,
    constraints: Vec<Constraint>,
}

#[derive(Deserialize)]
struct RawFormula {
    names: Vec<String>,
    constraints: Vec<Constraint>,
}

impl TryFrom<RawFormula> for EtrInvFormula {
    type Error = FormulaError;

    fn try_from(raw: RawFormula) -> Result<Self, FormulaError> {
        let mut f = EtrInvFormula::new();
        for name in &raw.names {
            if f.lookup(name).is_some() {
                return Err(FormulaError::DuplicateName(name.clone()));
            }
            f.var(name);
        }
        for c in raw.constraints {
            f.push(c)?;
        }
        Ok(f)
    }
}

impl EtrInvFormula {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the variable called `name`, creating it if needed.
    pub fn var(&mut self, name: &str) -> VarId {
        if let Some(v) = self.lookup(name) {
            return v;
        }
        self.names.push(name.to_string());
        VarId(self.names.len() - 1)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(VarId)
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = VarId> {
        (0..self.names.len()).map(VarId)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn push(&mut self, c: Constraint) -> Result<(), FormulaError> {
        if let Some(v) = c.vars().into_iter().find(|v| v.0 >= self.names.len()) {
            return Err(FormulaError::DanglingVar(v.0));
        }
        self.constraints.push(c);
        Ok(())
    }

    /// Appends `x + y = z`, creating variables by name.
    pub fn add(&mut self, x: &str, y: &str, z: &str) -> &mut Self {
        let (x, y, z) = (self.var(x), self.var(y), self.var(z));
        self.constraints.push(Constraint::Addition { x, y, z });
        self
    }

    /// Appends `x * y = 1`, creating variables by name.
    pub fn invert(&mut self, x: &str, y: &str) -> &mut Self {
        let (x, y) = (self.var(x), self.var(y));
        self.constraints.push(Constraint::Inversion { x, y });
        self
    }
}

impl fmt::Display for EtrInvFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            match *c {
                Constraint::Addition { x, y, z } => {
                    writeln!(f, "{} + {} = {}", self.name(x), self.name(y), self.name(z))?
                }
                Constraint::Inversion { x, y } => {
                    writeln!(f, "{} * {} = 1", self.name(x), self.name(y))?
                }
            }
        }
        Ok(())
    }
}

/// Total map from the variables of one formula to scalars of a single mode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    values: BTreeMap<VarId, Scalar>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: VarId, value: Scalar) {
        self.values.insert(v, value);
    }

    pub fn get(&self, v: VarId) -> Option<&Scalar> {
        self.values.get(&v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &Scalar)> {
        self.values.iter().map(|(v, s)| (*v, s))
    }

    /// The common mode of all values, `None` when empty.
    pub fn mode(&self) -> Result<Option<Mode>, FormulaError> {
        let mut modes = self.values.values().map(Scalar::mode);
        let Some(first) = modes.next() else {
            return Ok(None);
        };
        if modes.all(|m| m == first) {
            Ok(Some(first))
        } else {
            Err(FormulaError::ModeMismatch)
        }
    }

    pub fn from_values<I: IntoIterator<Item = Scalar>>(values: I) -> Self {
        Assignment {
            values: values.into_iter().enumerate().map(|(i, s)| (VarId(i), s)).collect(),
        }
    }

    pub fn from_names(
        names: &[String],
        by_name: &BTreeMap<String, Scalar>,
    ) -> Result<Self, FormulaError> {
        if let Some(unknown) = by_name.keys().find(|k| !names.contains(k)) {
            return Err(FormulaError::UnknownName(unknown.clone()));
        }
        let mut out = Assignment::new();
        for (i, name) in names.iter().enumerate() {
            let value = by_name
                .get(name)
                .ok_or_else(|| FormulaError::MissingVariable(name.clone()))?;
            out.insert(VarId(i), value.clone());
        }
        out.mode()?;
        Ok(out)
    }

    pub fn to_names(&self, names: &[String]) -> BTreeMap<String, Scalar> {
        self.values
            .iter()
            .filter_map(|(v, s)| names.get(v.0).map(|n| (n.clone(), s.clone())))
            .collect()
    }

    /// Dense values for `n` variables, or the first missing variable index.
    pub(crate) fn dense<T: Numeric>(&self, n: usize) -> Result<Vec<T>, (usize, bool)> {
        (0..n)
            .map(|i| match self.values.get(&VarId(i)) {
                None => Err((i, false)),
                Some(s) => T::from_scalar(s).ok_or((i, true)),
            })
            .collect()
    }
}

/// Per-constraint residuals and the overall verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct SatisfactionReport {
    pub residuals: Vec<Scalar>,
    pub satisfied: bool,
}

impl SatisfactionReport {
    pub(crate) fn from_residuals(residuals: Vec<Scalar>, tolerance: f64) -> Self {
        let satisfied = residuals.iter().all(|r| match r {
            Scalar::Exact(q) => num_traits::Zero::is_zero(q),
            Scalar::Float(x) => x.abs() <= tolerance,
        });
        SatisfactionReport {
            residuals,
            satisfied,
        }
    }
}

fn residual<T: Numeric>(c: &Constraint, values: &[T]) -> T {
    match *c {
        Constraint::Addition { x, y, z } => {
            values[x.0].clone() + values[y.0].clone() - values[z.0].clone()
        }
        Constraint::Inversion { x, y } => values[x.0].clone() * values[y.0].clone() - T::one(),
    }
}

/// Residual of `x + y = z` is `x + y - z`; of `x * y = 1` it is `x * y - 1`.
/// Exact assignments are satisfied iff every residual is zero; float ones iff
/// every residual is within `tolerance` in absolute value.
pub fn evaluate_formula(
    f: &EtrInvFormula,
    a: &Assignment,
    tolerance: f64,
) -> Result<SatisfactionReport, FormulaError> {
    let mode = a.mode()?.unwrap_or(Mode::Exact);
    match mode {
        Mode::Exact => evaluate_typed::<Rational>(f, a, tolerance),
        Mode::Float => evaluate_typed::<f64>(f, a, tolerance),
    }
}

fn evaluate_typed<T: Numeric>(
    f: &EtrInvFormula,
    a: &Assignment,
    tolerance: f64,
) -> Result<SatisfactionReport, FormulaError> {
    let values: Vec<T> = a.dense(f.num_vars()).map_err(|(i, mismatch)| {
        if mismatch {
            FormulaError::ModeMismatch
        } else {
            FormulaError::MissingVariable(f.names[i].clone())
        }
    })?;
    let residuals = f
        .constraints
        .iter()
        .map(|c| residual(c, &values).into_scalar())
        .collect();
    Ok(SatisfactionReport::from_residuals(residuals, tolerance))
}

/// Exhaustive search over `grid^n`, variable 0 most significant.
///
/// Returns the lexicographically first grid assignment that satisfies every
/// constraint exactly (float grids compare residuals against zero). `None`
/// only means no *grid* point works: the formula may still have real
/// solutions off the grid, so this is not a proof of unsatisfiability.
pub fn brute_force_search(
    f: &EtrInvFormula,
    grid: &[Scalar],
    budget: u128,
) -> Result<Option<Assignment>, FormulaError> {
    if grid.is_empty() {
        return Err(FormulaError::EmptyGrid);
    }
    let needed = (grid.len() as u128)
        .checked_pow(f.num_vars() as u32)
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(FormulaError::BudgetExceeded { needed, budget });
    }
    let mode = grid[0].mode();
    if grid.iter().any(|g| g.mode() != mode) {
        return Err(FormulaError::ModeMismatch);
    }
    match mode {
        Mode::Exact => Ok(search_typed::<Rational>(f, grid)),
        Mode::Float => Ok(search_typed::<f64>(f, grid)),
    }
}

fn search_typed<T: Numeric>(f: &EtrInvFormula, grid: &[Scalar]) -> Option<Assignment> {
    let grid: Vec<T> = grid.iter().filter_map(T::from_scalar).collect();
    let n = f.num_vars();
    // constraints become checkable once their highest variable is assigned
    let mut ready: Vec<Vec<&Constraint>> = vec![Vec::new(); n];
    for c in &f.constraints {
        let last = c.vars().into_iter().map(|v| v.0).max().expect("nonempty");
        ready[last].push(c);
    }
    let mut choice = vec![0usize; n];
    let mut values: Vec<T> = vec![T::zero(); n];
    if n == 0 {
        return f.constraints.is_empty().then(Assignment::new);
    }
    let mut depth = 0usize;
    loop {
        values[depth] = grid[choice[depth]].clone();
        let ok = ready[depth].iter().all(|c| residual(c, &values).is_zero());
        if ok && depth + 1 == n {
            return Some(Assignment::from_values(
                values.into_iter().map(Numeric::into_scalar),
            ));
        }
        if ok {
            depth += 1;
            choice[depth] = 0;
            continue;
        }
        // advance to the next sibling, backtracking as needed
        loop {
            choice[depth] += 1;
            if choice[depth] < grid.len() {
                break;
            }
            if depth == 0 {
                return None;
            }
            depth -= 1;
        }
    }
}

/// Parses the line-oriented formula format.
pub fn parse_etr_inv(text: &str) -> Result<EtrInvFormula, FormulaError> {
    let mut formula = EtrInvFormula::new();
    for (i, line) in text.lines().enumerate() {
        let tokens = tokenize(line, i + 1)?;
        if tokens.is_empty() {
            continue;
        }
        let c = parse_line(&tokens, i + 1, line, &mut formula)?;
        formula.constraints.push(c);
    }
    Ok(formula)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Plus,
    Star,
    Eq,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '+' => {
                out.push((Tok::Plus, column));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, column));
                i += 1;
            }
            '=' => {
                out.push((Tok::Eq, column));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), column));
            }
            c if c.is_ascii_digit() || c == '-' => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || "./".contains(chars[i]))
                {
                    i += 1;
                }
                out.push((Tok::Number(chars[start..i].iter().collect()), column));
            }
            other => {
                return Err(FormulaError::Syntax {
                    line: line_no,
                    column,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

fn parse_line(
    tokens: &[(Tok, usize)],
    line: usize,
    raw: &str,
    formula: &mut EtrInvFormula,
) -> Result<Constraint, FormulaError> {
    let end_column = raw.chars().count() + 1;
    let syntax = |column: usize, message: &str| FormulaError::Syntax {
        line,
        column,
        message: message.to_string(),
    };
    let at = |k: usize| tokens.get(k).map_or(end_column, |t| t.1);
    let ident = |k: usize| match tokens.get(k) {
        Some((Tok::Ident(name), _)) => Ok(name.clone()),
        _ => Err(syntax(at(k), "expected identifier")),
    };

    let lhs = ident(0)?;
    let is_addition = match tokens.get(1) {
        Some((Tok::Plus, _)) => true,
        Some((Tok::Star, _)) => false,
        _ => return Err(syntax(at(1), "expected `+` or `*`")),
    };
    let rhs = ident(2)?;
    if !matches!(tokens.get(3), Some((Tok::Eq, _))) {
        return Err(syntax(at(3), "expected `=`"));
    }
    let result = tokens
        .get(4)
        .ok_or_else(|| syntax(at(4), "expected right-hand side"))?;
    if tokens.len() > 5 {
        return Err(syntax(at(5), "unexpected trailing input"));
    }
    let unsupported = |message: &str| FormulaError::UnsupportedConstraint {
        line,
        column: result.1,
        message: message.to_string(),
    };

    let (x, y) = (formula.var(&lhs), formula.var(&rhs));
    match (&result.0, is_addition) {
        (Tok::Ident(z), true) => Ok(Constraint::Addition {
            x,
            y,
            z: formula.var(z),
        }),
        (Tok::Number(n), false) if n == "1" => Ok(Constraint::Inversion { x, y }),
        (Tok::Number(_), true) => Err(unsupported("addition right-hand side must be a variable")),
        (Tok::Number(_) | Tok::Ident(_), false) => {
            Err(unsupported("inversion right-hand side must be the literal 1"))
        }
        _ => Err(syntax(result.1, "expected right-hand side")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;

    fn exact(values: &[(i64, i64)]) -> Assignment {
        Assignment::from_values(values.iter().map(|&(p, q)| Scalar::ratio(p, q)))
    }

    #[test]
    fn parses_addition_and_inversion() {
        let f = parse_etr_inv("x + y = z\n# comment\n\nx * x = 1  # trailing\n").unwrap();
        assert_eq!(f.names(), ["x", "y", "z"]);
        assert_eq!(
            f.constraints(),
            [
                Constraint::Addition {
                    x: VarId(0),
                    y: VarId(1),
                    z: VarId(2)
                },
                Constraint::Inversion {
                    x: VarId(0),
                    y: VarId(0)
                },
            ]
        );
    }

    #[test]
    fn rejects_unsupported_right_hand_sides() {
        let err = parse_etr_inv("x * y = 2").unwrap_err();
        assert_eq!(
            err,
            FormulaError::UnsupportedConstraint {
                line: 1,
                column: 9,
                message: "inversion right-hand side must be the literal 1".into()
            }
        );
        assert!(matches!(
            parse_etr_inv("a + b = c\nx + y = 1"),
            Err(FormulaError::UnsupportedConstraint { line: 2, .. })
        ));
        assert!(matches!(
            parse_etr_inv("x * y = z"),
            Err(FormulaError::UnsupportedConstraint { line: 1, .. })
        ));
    }

    #[test]
    fn reports_syntax_positions() {
        assert_eq!(
            parse_etr_inv("x + = z"),
            Err(FormulaError::Syntax {
                line: 1,
                column: 5,
                message: "expected identifier".into()
            })
        );
        assert!(matches!(
            parse_etr_inv("x + y = z w"),
            Err(FormulaError::Syntax { column: 11, .. })
        ));
        assert!(matches!(
            parse_etr_inv("ok + ok = ok\nx - y = z"),
            Err(FormulaError::Syntax { line: 2, column: 3, .. })
        ));
        assert!(matches!(
            parse_etr_inv("x + y"),
            Err(FormulaError::Syntax { line: 1, column: 6, .. })
        ));
    }

    #[test]
    fn evaluates_residuals() {
        let f = parse_etr_inv("x + y = z").unwrap();
        let r = evaluate_formula(&f, &exact(&[(1, 1), (2, 1), (3, 1)]), 0.0).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.residuals, [Scalar::integer(0)]);

        let f = parse_etr_inv("x * y = 1").unwrap();
        assert!(evaluate_formula(&f, &exact(&[(2, 1), (1, 2)]), 0.0).unwrap().satisfied);
    }

    #[test]
    fn near_miss_is_unsatisfied_exactly() {
        let f = parse_etr_inv("x + x = y\nx * y = 1").unwrap();
        let r = evaluate_formula(&f, &exact(&[(7071, 10000), (7071, 5000)]), 0.0).unwrap();
        assert!(!r.satisfied);
        assert_eq!(r.residuals[0], Scalar::integer(0));
        // 2 * (7071/10000)^2 - 1, with 7071^2 = 49_999_041
        assert_eq!(7071i64 * 7071, 49_999_041);
        assert_eq!(
            r.residuals[1],
            Scalar::Exact(rational(49_999_041, 50_000_000) - rational(1, 1))
        );
    }

    #[test]
    fn evaluate_errors() {
        let f = parse_etr_inv("x + y = z").unwrap();
        assert_eq!(
            evaluate_formula(&f, &exact(&[(1, 1), (2, 1)]), 0.0),
            Err(FormulaError::MissingVariable("z".into()))
        );
        let mut mixed = exact(&[(1, 1), (2, 1)]);
        mixed.insert(VarId(2), Scalar::Float(3.0));
        assert_eq!(evaluate_formula(&f, &mixed, 0.0), Err(FormulaError::ModeMismatch));
    }

    fn grid(values: &[(i64, i64)]) -> Vec<Scalar> {
        values.iter().map(|&(p, q)| Scalar::ratio(p, q)).collect()
    }

    #[test]
    fn brute_force_finds_forced_zero() {
        let f = parse_etr_inv("x + x = x").unwrap();
        let hit = brute_force_search(&f, &grid(&[(-1, 1), (0, 1), (1, 1)]), 1000).unwrap();
        assert_eq!(hit, Some(exact(&[(0, 1)])));
    }

    #[test]
    fn brute_force_is_lexicographic() {
        let f = parse_etr_inv("x * y = 1").unwrap();
        let g = grid(&[(-2, 1), (-1, 1), (-1, 2), (1, 2), (1, 1), (2, 1)]);
        let hit = brute_force_search(&f, &g, 1000).unwrap().unwrap();
        assert_eq!(hit, exact(&[(-2, 1), (-1, 2)]));
    }

    #[test]
    fn brute_force_not_found_and_budget() {
        let f = parse_etr_inv("x + x = x\nx * y = 1").unwrap();
        let g = grid(&[(-2, 1), (-1, 1), (0, 1), (1, 2), (3, 1)]);
        assert_eq!(brute_force_search(&f, &g, 1000).unwrap(), None);
        assert_eq!(
            brute_force_search(&f, &g, 24),
            Err(FormulaError::BudgetExceeded {
                needed: 25,
                budget: 24
            })
        );
        assert_eq!(brute_force_search(&f, &[], 10), Err(FormulaError::EmptyGrid));
    }

    #[test]
    fn printing_round_trips() {
        let text = "a + b = c\nc * d = 1\nd + d = a\n";
        let f = parse_etr_inv(text).unwrap();
        assert_eq!(f.to_string(), text);
    }
}
