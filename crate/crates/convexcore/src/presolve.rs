//! Bound propagation run before every continuous solve.
//!
//! The interior-point backend needs a cone interior for every atom, so
//! variables that linear rows pin to a single value (most often binaries set
//! to zero by a sibling fixed to one) are substituted out here.

use crate::program::{Atom, ConvexProgram, Sense};

const FIX_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PASSES: usize = 50;

#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub fixed: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PresolveOutcome {
    Reduced,
    Infeasible(String),
}

impl Presolved {
    fn fix(&mut self, i: usize, value: f64) {
        self.fixed[i] = Some(value);
        self.lower[i] = value;
        self.upper[i] = value;
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i].is_some()
    }

    fn tighten_upper(&mut self, i: usize, ub: f64, binary: bool) -> Result<bool, String> {
        let ub = if binary { round_binary_upper(ub) } else { ub };
        if ub < self.upper[i] - FIX_TOL * (1.0 + ub.abs()) {
            if ub < self.lower[i] - FEAS_TOL * (1.0 + ub.abs()) {
                return Err(format!(
                    "variable {i}: upper {ub} below lower {}",
                    self.lower[i]
                ));
            }
            self.upper[i] = ub.max(self.lower[i]);
            return Ok(true);
        }
        Ok(false)
    }

    fn tighten_lower(&mut self, i: usize, lb: f64, binary: bool) -> Result<bool, String> {
        let lb = if binary { round_binary_lower(lb) } else { lb };
        if lb > self.lower[i] + FIX_TOL * (1.0 + lb.abs()) {
            if lb > self.upper[i] + FEAS_TOL * (1.0 + lb.abs()) {
                return Err(format!(
                    "variable {i}: lower {lb} above upper {}",
                    self.upper[i]
                ));
            }
            self.lower[i] = lb.min(self.upper[i]);
            return Ok(true);
        }
        Ok(false)
    }
}

fn round_binary_upper(ub: f64) -> f64 {
    if ub < 1.0 - 1e-9 {
        0.0
    } else {
        1.0
    }
}

fn round_binary_lower(lb: f64) -> f64 {
    if lb > 1e-9 {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn presolve(
    program: &ConvexProgram,
    lower: &[f64],
    upper: &[f64],
) -> (Presolved, PresolveOutcome) {
    let n = program.vars.len();
    let mut p = Presolved {
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        fixed: vec![None; n],
    };
    match run(program, &mut p) {
        Ok(()) => (p, PresolveOutcome::Reduced),
        Err(msg) => (p, PresolveOutcome::Infeasible(msg)),
    }
}

fn run(program: &ConvexProgram, p: &mut Presolved) -> Result<(), String> {
    let n = program.vars.len();
    for i in 0..n {
        if p.lower[i] > p.upper[i] + FEAS_TOL * (1.0 + p.lower[i].abs()) {
            return Err(format!(
                "variable {} has empty bounds",
                program.vars[i].name
            ));
        }
    }
    let rows: Vec<_> = program
        .constraints
        .iter()
        .map(|c| (c.expr.normalized(), c.sense, c.rhs))
        .collect();

    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for i in 0..n {
            if p.fixed[i].is_none()
                && p.lower[i].is_finite()
                && p.upper[i] - p.lower[i] <= FIX_TOL * (1.0 + p.lower[i].abs())
            {
                let v = if program.vars[i].binary {
                    p.lower[i].round()
                } else {
                    0.5 * (p.lower[i] + p.upper[i])
                };
                p.fix(i, v);
                changed = true;
            }
        }

        for (expr, sense, rhs) in &rows {
            let rhs = rhs - expr.constant;
            let (min_act, max_act) = activity(expr, p);
            let scale = 1.0 + rhs.abs();
            let check_le = matches!(sense, Sense::Le | Sense::Eq);
            let check_ge = matches!(sense, Sense::Ge | Sense::Eq);
            if check_le && min_act > rhs + FEAS_TOL * scale {
                return Err(format!("row min activity {min_act} exceeds {rhs}"));
            }
            if check_ge && max_act < rhs - FEAS_TOL * scale {
                return Err(format!("row max activity {max_act} below {rhs}"));
            }
            // forcing rows: the only feasible point puts every variable at a bound
            if check_le && min_act.is_finite() && min_act >= rhs - FEAS_TOL * scale {
                for &(v, c) in &expr.terms {
                    let i = v.0;
                    if p.fixed[i].is_none() {
                        let val = if c > 0.0 { p.lower[i] } else { p.upper[i] };
                        p.fix(i, val);
                        changed = true;
                    }
                }
                continue;
            }
            if check_ge && max_act.is_finite() && max_act <= rhs + FEAS_TOL * scale {
                for &(v, c) in &expr.terms {
                    let i = v.0;
                    if p.fixed[i].is_none() {
                        let val = if c > 0.0 { p.upper[i] } else { p.lower[i] };
                        p.fix(i, val);
                        changed = true;
                    }
                }
                continue;
            }

            let free: Vec<_> = expr
                .terms
                .iter()
                .filter(|t| p.fixed[t.0 .0].is_none())
                .collect();
            for &&(v, c) in &free {
                let i = v.0;
                let binary = program.vars[i].binary;
                // only binaries and singleton rows get propagated bounds
                if !binary && free.len() != 1 {
                    continue;
                }
                let (lo_i, hi_i) = (p.lower[i], p.upper[i]);
                let (min_c, max_c) = term_range(c, lo_i, hi_i);
                if check_le {
                    let rest = min_act - min_c;
                    if rest.is_finite() {
                        let bound = (rhs - rest) / c;
                        changed |= if c > 0.0 {
                            p.tighten_upper(i, bound, binary)?
                        } else {
                            p.tighten_lower(i, bound, binary)?
                        };
                    }
                }
                if check_ge {
                    let rest = max_act - max_c;
                    if rest.is_finite() {
                        let bound = (rhs - rest) / c;
                        changed |= if c > 0.0 {
                            p.tighten_lower(i, bound, binary)?
                        } else {
                            p.tighten_upper(i, bound, binary)?
                        };
                    }
                }
            }
        }

        for atom in &program.atoms {
            changed |= propagate_atom(atom, p)?;
        }
        if !changed {
            return Ok(());
        }
    }
    Ok(())
}

fn propagate_atom(atom: &Atom, p: &mut Presolved) -> Result<bool, String> {
    let mut changed = false;
    match atom {
        Atom::PerspectiveLog { t, x, y } => {
            if p.fixed[y.0] == Some(0.0) || p.upper[y.0] <= 0.0 {
                if p.fixed[y.0].is_none() {
                    p.fix(y.0, 0.0);
                    changed = true;
                }
                if p.fixed[x.0].is_none() {
                    if p.lower[x.0] > FEAS_TOL {
                        return Err("perspective with y = 0 needs x = 0".into());
                    }
                    p.fix(x.0, 0.0);
                    changed = true;
                } else if p.fixed[x.0].unwrap().abs() > FEAS_TOL {
                    return Err("perspective with y = 0 needs x = 0".into());
                }
                changed |= p.tighten_lower(t.0, 0.0, false)?;
            } else if let (Some(xv), Some(yv)) = (p.fixed[x.0], p.fixed[y.0]) {
                if xv <= 0.0 {
                    return Err("perspective needs x > 0 when y > 0".into());
                }
                changed |= p.tighten_lower(t.0, -yv * (xv / yv).ln(), false)?;
            }
        }
        Atom::LogHypograph { v, arg } => {
            if arg.terms.iter().all(|t| p.fixed[t.0 .0].is_some()) {
                let a = arg
                    .terms
                    .iter()
                    .fold(arg.constant, |acc, &(w, c)| acc + c * p.fixed[w.0].unwrap());
                if a <= 0.0 {
                    return Err(format!("log argument fixed at {a}"));
                }
                changed |= p.tighten_upper(v.0, a.ln(), false)?;
            }
        }
        Atom::ConcaveHypograph { u, z, func } => {
            if let Some(zv) = p.fixed[z.0] {
                let (lo, hi) = func.domain();
                if zv < lo - FEAS_TOL || zv > hi + FEAS_TOL {
                    return Err(format!(
                        "{} evaluated outside its domain at {zv}",
                        func.label()
                    ));
                }
                changed |= p.tighten_upper(u.0, func.value(zv.clamp(lo, hi)), false)?;
            }
        }
    }
    Ok(changed)
}

fn term_range(c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = c * lo;
    let b = c * hi;
    let (a, b) = (nan_to(a, c, lo), nan_to(b, c, hi));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn nan_to(prod: f64, c: f64, x: f64) -> f64 {
    if prod.is_nan() {
        // 0 * inf cannot happen for normalized rows; keep it conservative anyway
        if (c > 0.0) == (x > 0.0) {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        prod
    }
}

fn activity(expr: &crate::program::LinExpr, p: &Presolved) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &(v, c) in &expr.terms {
        let (a, b) = term_range(c, p.lower[v.0], p.upper[v.0]);
        lo += a;
        hi += b;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::LinExpr;

    fn bounds(p: &ConvexProgram) -> (Vec<f64>, Vec<f64>) {
        (
            p.vars.iter().map(|v| v.lower).collect(),
            p.vars.iter().map(|v| v.upper).collect(),
        )
    }

    #[test]
    fn sibling_binaries_forced_to_zero() {
        let mut p = ConvexProgram::new();
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        let x = p.add_var("x", 0.0, 10.0);
        p.add_constraint(LinExpr::sum([a, b]), Sense::Eq, 1.0, "one");
        p.add_constraint(LinExpr::var(x).term(b, -10.0), Sense::Le, 0.0, "gate");
        let (mut lo, hi) = bounds(&p);
        lo[a.0] = 1.0;
        let (pre, out) = presolve(&p, &lo, &hi);
        assert_eq!(out, PresolveOutcome::Reduced);
        assert_eq!(pre.fixed[b.0], Some(0.0));
        assert_eq!(pre.fixed[x.0], Some(0.0));
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x", 0.0, 1.0);
        p.add_constraint(LinExpr::var(x), Sense::Ge, 2.0, "high");
        let (lo, hi) = bounds(&p);
        let (_, out) = presolve(&p, &lo, &hi);
        assert!(matches!(out, PresolveOutcome::Infeasible(_)));
    }

    #[test]
    fn perspective_closure_at_zero() {
        let mut p = ConvexProgram::new();
        let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY);
        let x = p.add_var("x", 0.0, 5.0);
        let y = p.add_binary("y");
        p.add_perspective_log(t, x, y);
        let (lo, mut hi) = bounds(&p);
        hi[y.0] = 0.0;
        let (pre, out) = presolve(&p, &lo, &hi);
        assert_eq!(out, PresolveOutcome::Reduced);
        assert_eq!(pre.fixed[x.0], Some(0.0));
        assert_eq!(pre.lower[t.0], 0.0);
    }
}
