use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::concave::ConcaveFn;
use crate::error::ProgramError;

/// Dense index of a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    /// Auxiliary variables are modelling helpers (epigraph slots and the like)
    /// that do not count towards a formulation's reported size.
    pub auxiliary: bool,
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, v: VarId, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) {
        self.terms.push((v, coef));
    }

    pub fn sum<I: IntoIterator<Item = VarId>>(vars: I) -> Self {
        Self {
            terms: vars.into_iter().map(|v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * values[v.0])
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn normalized(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Self {
            terms: merged,
            constant: self.constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "==",
        })
    }
}

/// `expr (sense) rhs`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub expr: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

/// Nonlinear atoms. Each one describes a convex set.
#[derive(Debug, Clone)]
pub enum Atom {
    /// `v <= ln(arg)`.
    LogHypograph { v: VarId, arg: LinExpr },
    /// `t >= -y ln(x / y)`, closed at `y = 0` by requiring `x = 0, t >= 0`.
    PerspectiveLog { t: VarId, x: VarId, y: VarId },
    /// `u <= g(z)` for a concave, non-decreasing `g`.
    ConcaveHypograph {
        u: VarId,
        z: VarId,
        func: Arc<dyn ConcaveFn>,
    },
}

impl Atom {
    fn vars(&self) -> Vec<VarId> {
        match self {
            Atom::LogHypograph { v, arg } => {
                let mut out = vec![*v];
                out.extend(arg.terms.iter().map(|t| t.0));
                out
            }
            Atom::PerspectiveLog { t, x, y } => vec![*t, *x, *y],
            Atom::ConcaveHypograph { u, z, .. } => vec![*u, *z],
        }
    }

    /// Amount by which `values` violate the atom (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        match self {
            Atom::LogHypograph { v, arg } => {
                let a = arg.eval(values);
                if a <= 0.0 {
                    return f64::INFINITY;
                }
                (values[v.0] - a.ln()).max(0.0)
            }
            Atom::PerspectiveLog { t, x, y } => {
                let (tv, xv, yv) = (values[t.0], values[x.0], values[y.0]);
                if yv <= 0.0 {
                    // closure at y = 0 (y < 0 shows up as a negative-y residual)
                    return xv.abs().max((-tv).max(0.0)).max(-yv);
                }
                if xv <= 0.0 {
                    return f64::INFINITY;
                }
                (-yv * (xv / yv).ln() - tv).max(0.0)
            }
            Atom::ConcaveHypograph { u, z, func } => {
                let zv = values[z.0];
                let (lo, hi) = func.domain();
                if zv < lo || zv > hi {
                    return f64::INFINITY;
                }
                (values[u.0] - func.value(zv)).max(0.0)
            }
        }
    }
}

/// A minimisation problem over linear constraints and the atoms in [`Atom`].
///
/// Relaxing every binary flag to `[0, 1]` leaves a convex program.
#[derive(Debug, Clone, Default)]
pub struct ConvexProgram {
    pub vars: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub atoms: Vec<Atom>,
    pub objective: LinExpr,
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.push_var(name.into(), lower, upper, false, false)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(name.into(), 0.0, 1.0, true, false)
    }

    pub fn add_aux_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.push_var(name.into(), lower, upper, false, true)
    }

    fn push_var(
        &mut self,
        name: String,
        lower: f64,
        upper: f64,
        binary: bool,
        auxiliary: bool,
    ) -> VarId {
        self.vars.push(Variable {
            name,
            lower,
            upper,
            binary,
            auxiliary,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    /// Turns a binary into a continuous `[0, 1]` variable.
    pub fn relax_binary(&mut self, v: VarId) {
        self.vars[v.0].binary = false;
    }

    pub fn add_constraint(
        &mut self,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
        label: impl Into<String>,
    ) {
        self.constraints.push(LinearConstraint {
            expr,
            sense,
            rhs,
            label: label.into(),
        });
    }

    pub fn add_log_hypograph(&mut self, v: VarId, arg: LinExpr) {
        self.atoms.push(Atom::LogHypograph { v, arg });
    }

    pub fn add_perspective_log(&mut self, t: VarId, x: VarId, y: VarId) {
        self.atoms.push(Atom::PerspectiveLog { t, x, y });
    }

    pub fn add_concave_hypograph(&mut self, u: VarId, z: VarId, func: Arc<dyn ConcaveFn>) {
        self.atoms.push(Atom::ConcaveHypograph { u, z, func });
    }

    pub fn set_objective(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    /// Number of variables not flagged auxiliary.
    pub fn num_primary_vars(&self) -> usize {
        self.vars.iter().filter(|v| !v.auxiliary).count()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.binary)
            .map(|(i, _)| VarId(i))
    }

    /// Checks that every reference points at a declared variable and bounds are sane.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.vars.len();
        let check = |v: VarId, ctx: &str| {
            if v.0 >= n {
                Err(ProgramError::UndeclaredVariable {
                    index: v.0,
                    context: ctx.to_string(),
                })
            } else {
                Ok(())
            }
        };
        for (i, var) in self.vars.iter().enumerate() {
            if var.lower.is_nan() || var.upper.is_nan() || var.lower > var.upper {
                return Err(ProgramError::BadBounds {
                    name: var.name.clone(),
                    lower: var.lower,
                    upper: var.upper,
                });
            }
            if var.binary && (var.lower < 0.0 || var.upper > 1.0) {
                return Err(ProgramError::BadBounds {
                    name: self.vars[i].name.clone(),
                    lower: var.lower,
                    upper: var.upper,
                });
            }
        }
        for t in &self.objective.terms {
            check(t.0, "objective")?;
        }
        for c in &self.constraints {
            for t in &c.expr.terms {
                check(t.0, &c.label)?;
            }
        }
        for a in &self.atoms {
            for v in a.vars() {
                check(v, "atom")?;
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Largest violation of any bound, linear constraint or atom at `values`.
    ///
    /// Re-evaluates everything from the primal values alone, so it is
    /// independent of whatever the solver reported.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (var, &x) in self.vars.iter().zip(values) {
            worst = worst.max(var.lower - x).max(x - var.upper);
            if var.binary {
                worst = worst.max(x.min(1.0 - x).max(0.0));
            }
        }
        for c in &self.constraints {
            let lhs = c.expr.eval(values);
            let v = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for a in &self.atoms {
            worst = worst.max(a.violation(values));
        }
        worst
    }

    /// Human-readable dump, one item per line, stable across runs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let name = |v: VarId| self.vars[v.0].name.as_str();
        let expr = |e: &LinExpr| {
            let mut s = String::new();
            for (i, &(v, c)) in e.terms.iter().enumerate() {
                if i > 0 {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{} {}", fmt_num(c), name(v));
            }
            if e.constant != 0.0 || e.terms.is_empty() {
                if !e.terms.is_empty() {
                    s.push_str(" + ");
                }
                s.push_str(&fmt_num(e.constant));
            }
            s
        };
        let _ = writeln!(out, "minimize {}", expr(&self.objective));
        for v in &self.vars {
            let kind = if v.binary { "bin" } else { "var" };
            let aux = if v.auxiliary { " aux" } else { "" };
            let _ = writeln!(
                out,
                "{kind} {} in [{}, {}]{aux}",
                v.name,
                fmt_num(v.lower),
                fmt_num(v.upper)
            );
        }
        for c in &self.constraints {
            let _ = writeln!(
                out,
                "lin {}: {} {} {}",
                c.label,
                expr(&c.expr),
                c.sense,
                fmt_num(c.rhs)
            );
        }
        for a in &self.atoms {
            match a {
                Atom::LogHypograph { v, arg } => {
                    let _ = writeln!(out, "log {} <= ln({})", name(*v), expr(arg));
                }
                Atom::PerspectiveLog { t, x, y } => {
                    let _ = writeln!(
                        out,
                        "persp {} >= -{} ln({} / {})",
                        name(*t),
                        name(*y),
                        name(*x),
                        name(*y)
                    );
                }
                Atom::ConcaveHypograph { u, z, func } => {
                    let _ = writeln!(out, "hypo {} <= {}({})", name(*u), func.label(), name(*z));
                }
            }
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}
