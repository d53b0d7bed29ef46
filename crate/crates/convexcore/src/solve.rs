//! Continuous solves of a [`ConvexProgram`] with binaries relaxed to their bounds.
//!
//! Linear rows and bounds become nonnegative/zero cone rows, `LogHypograph`
//! and `PerspectiveLog` atoms become exponential cones, and `ConcaveHypograph`
//! atoms are realized by tangent cuts that are refined at the returned point
//! until the realization error drops below `atom_tol`.

use std::collections::BTreeSet;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use log::debug;

use crate::concave::{CutPool, TangentCut};
use crate::error::ProgramError;
use crate::presolve::{presolve, PresolveOutcome, Presolved};
use crate::program::{Atom, ConvexProgram, LinExpr, Sense, VarId};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Gap and feasibility tolerance handed to the interior-point backend.
    pub tol: f64,
    /// Largest accepted `u - g(z)` for concave hypograph atoms.
    pub atom_tol: f64,
    pub max_cut_rounds: usize,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            atom_tol: 1e-8,
            max_cut_rounds: 200,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    /// One value per program variable, fixed ones included.
    pub values: Vec<f64>,
    /// Worst of the backend's primal residual, dual residual and relative gap.
    pub attained_tol: f64,
    pub cut_rounds: usize,
    pub diagnostics: String,
}

impl SolveResult {
    fn without_point(status: SolveStatus, n: usize, diagnostics: String) -> Self {
        let objective = match status {
            SolveStatus::Infeasible => f64::INFINITY,
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        SolveResult {
            status,
            objective,
            values: vec![f64::NAN; n],
            attained_tol: f64::NAN,
            cut_rounds: 0,
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

/// Solves the continuous relaxation of `program` from scratch.
pub fn solve_relaxation(
    program: &ConvexProgram,
    opts: &SolveOptions,
) -> Result<SolveResult, ProgramError> {
    program.validate()?;
    let lower: Vec<f64> = program.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = program.vars.iter().map(|v| v.upper).collect();
    let mut pool = CutPool::new();
    Ok(solve_with_bounds(program, &lower, &upper, &mut pool, opts))
}

/// Solves the relaxation under overridden bounds, reusing and extending `pool`.
///
/// The program is assumed to be validated.
pub fn solve_with_bounds(
    program: &ConvexProgram,
    lower: &[f64],
    upper: &[f64],
    pool: &mut CutPool,
    opts: &SolveOptions,
) -> SolveResult {
    let result = refine(program, lower, upper, pool, opts);
    if result.status != SolveStatus::NumericalFailure || pool.total() == 0 {
        return result;
    }
    // cuts collected elsewhere in the tree can make this restriction badly
    // conditioned; start over from the seed cuts alone
    debug!("retrying with a fresh cut pool: {}", result.diagnostics);
    let mut local = CutPool::new();
    let retry = refine(program, lower, upper, &mut local, opts);
    if retry.status == SolveStatus::NumericalFailure {
        result
    } else {
        retry
    }
}

/// Worst atom error at which a round may stand in for a later one the backend
/// could not solve.
const SETTLED_TOL: f64 = 1e-6;

/// Cuts of the even spread handed to the backend per atom.
const SPREAD_CUTS: usize = 24;
/// Pool cuts pulled in around an atom's point when it is violated.
const NEAR_CUTS: usize = 8;

/// Cutting-plane loop. Each backend solve sees only a working subset of the
/// pool: an even spread plus the cuts near the atom's recent points. Any subset
/// of tangents is still an outer approximation, and the loop only stops once
/// every atom is within `atom_tol` of the true function (or nothing new can be
/// added), so the working set affects speed, not the answer.
fn refine(
    program: &ConvexProgram,
    lower: &[f64],
    upper: &[f64],
    pool: &mut CutPool,
    opts: &SolveOptions,
) -> SolveResult {
    let n = program.vars.len();
    let (pre, outcome) = presolve(program, lower, upper);
    if let PresolveOutcome::Infeasible(msg) = outcome {
        return SolveResult::without_point(SolveStatus::Infeasible, n, format!("presolve: {msg}"));
    }
    pool.ensure_atoms(program.atoms.len());
    seed_cuts(program, &pre, pool);
    let mut working: Vec<BTreeSet<usize>> = (0..program.atoms.len())
        .map(|idx| {
            let mut set: BTreeSet<usize> = pool.spread(idx, SPREAD_CUTS).into_iter().collect();
            if let Some(z) = pool.last_z(idx) {
                set.extend(pool.nearest(idx, z, NEAR_CUTS));
            }
            set
        })
        .collect();

    let mut rounds = 0;
    let mut settled: Option<(SolveResult, f64)> = None;
    loop {
        let mut result = solve_once(program, &pre, pool, &working, opts, 0);
        for profile in 1..RETRY_PROFILES {
            if result.status != SolveStatus::NumericalFailure {
                break;
            }
            debug!(
                "retrying with backend profile {profile}: {}",
                result.diagnostics
            );
            result = solve_once(program, &pre, pool, &working, opts, profile);
        }
        result.cut_rounds = rounds;
        if result.status == SolveStatus::NumericalFailure {
            // near-parallel tangents can stall the backend once the point has
            // all but settled; the previous round solved a relaxation with a
            // subset of these cuts, so its objective is still a valid bound
            if let Some((mut prev, worst)) = settled.take() {
                if worst <= SETTLED_TOL {
                    prev.diagnostics = format!(
                        "{} (kept round {}, worst atom error {worst:.1e}; next round: {})",
                        prev.diagnostics,
                        rounds - 1,
                        result.diagnostics
                    );
                    return prev;
                }
            }
        }
        if result.status != SolveStatus::Optimal {
            return result;
        }
        let mut worst = 0f64;
        let mut added = 0;
        for (idx, atom) in program.atoms.iter().enumerate() {
            if let Atom::ConcaveHypograph { u, z, func } = atom {
                if pre.is_fixed(z.0) {
                    continue;
                }
                let (lo, hi) = func.domain();
                let zv = result.values[z.0].clamp(lo, hi);
                pool.set_last_z(idx, zv);
                let err = result.values[u.0] - func.value(zv);
                worst = worst.max(err);
                if err > opts.atom_tol {
                    let (at, _) = pool.insert(idx, TangentCut::at(func.as_ref(), zv));
                    let set = &mut working[idx];
                    added += usize::from(set.insert(at));
                    for near in pool.nearest(idx, zv, NEAR_CUTS) {
                        added += usize::from(set.insert(near));
                    }
                }
            }
        }
        if added == 0 {
            return result;
        }
        rounds += 1;
        if rounds > opts.max_cut_rounds {
            result.status = SolveStatus::NumericalFailure;
            result.diagnostics = format!("cut refinement did not settle after {rounds} rounds");
            return result;
        }
        settled = Some((result, worst));
    }
}

fn seed_cuts(program: &ConvexProgram, pre: &Presolved, pool: &mut CutPool) {
    for (idx, atom) in program.atoms.iter().enumerate() {
        if let Atom::ConcaveHypograph { z, func, .. } = atom {
            if pool.is_seeded(idx) || pre.is_fixed(z.0) {
                continue;
            }
            let (lo, hi) = func.domain();
            for k in func.initial_knots() {
                if k >= lo && k <= hi {
                    pool.add(idx, TangentCut::at(func.as_ref(), k));
                }
            }
            if !pool.is_seeded(idx) {
                pool.add(idx, TangentCut::at(func.as_ref(), hi));
            }
        }
    }
}

/// One affine row `s = b - a.x` in the backend's convention.
struct Row {
    coefs: Vec<(usize, f64)>,
    b: f64,
}

struct Assembler<'a> {
    pre: &'a Presolved,
    column: Vec<Option<usize>>,
}

impl Assembler<'_> {
    /// Splits `expr` into free-column coefficients and a constant.
    fn split(&self, expr: &LinExpr) -> (Vec<(usize, f64)>, f64) {
        let mut constant = expr.constant;
        let mut coefs = Vec::with_capacity(expr.terms.len());
        for &(v, c) in &expr.terms {
            match self.column[v.0] {
                Some(col) => coefs.push((col, c)),
                None => constant += c * self.pre.fixed[v.0].unwrap_or(0.0),
            }
        }
        (coefs, constant)
    }

    /// Row for `expr <= rhs`.
    fn le(&self, expr: &LinExpr, rhs: f64) -> Option<Row> {
        let (coefs, constant) = self.split(expr);
        if coefs.is_empty() {
            return None;
        }
        Some(Row {
            coefs,
            b: rhs - constant,
        })
    }

    /// Row whose slack equals `expr`, for cone entries.
    fn slack(&self, expr: &LinExpr) -> Row {
        let (coefs, constant) = self.split(expr);
        Row {
            coefs: coefs.into_iter().map(|(c, a)| (c, -a)).collect(),
            b: constant,
        }
    }
}

/// Backend setting profiles tried in order after a numerical failure.
const RETRY_PROFILES: usize = 4;

fn backend_settings(opts: &SolveOptions, profile: usize) -> DefaultSettings<f64> {
    let base = DefaultSettings::<f64> {
        verbose: false,
        tol_gap_abs: opts.tol,
        tol_gap_rel: opts.tol,
        tol_feas: opts.tol,
        max_iter: opts.max_iter,
        ..DefaultSettings::default()
    };
    match profile {
        0 => base,
        1 => DefaultSettings {
            equilibrate_enable: false,
            ..base
        },
        2 => DefaultSettings {
            static_regularization_constant: 1e-6,
            max_iter: opts.max_iter * 2,
            ..base
        },
        _ => DefaultSettings {
            tol_gap_abs: opts.tol * 10.0,
            tol_gap_rel: opts.tol * 10.0,
            tol_feas: opts.tol * 10.0,
            static_regularization_constant: 1e-7,
            equilibrate_enable: false,
            max_iter: opts.max_iter * 2,
            ..base
        },
    }
}

fn solve_once(
    program: &ConvexProgram,
    pre: &Presolved,
    pool: &CutPool,
    working: &[BTreeSet<usize>],
    opts: &SolveOptions,
    profile: usize,
) -> SolveResult {
    let n = program.vars.len();
    let mut column = vec![None; n];
    let mut free = Vec::new();
    for i in 0..n {
        if !pre.is_fixed(i) {
            column[i] = Some(free.len());
            free.push(i);
        }
    }
    let asm = Assembler { pre, column };

    let mut zero_rows = Vec::new();
    let mut nonneg_rows = Vec::new();
    let mut exp_rows: Vec<[Row; 3]> = Vec::new();

    for (col, &i) in free.iter().enumerate() {
        if pre.upper[i].is_finite() {
            nonneg_rows.push(Row {
                coefs: vec![(col, 1.0)],
                b: pre.upper[i],
            });
        }
        if pre.lower[i].is_finite() {
            nonneg_rows.push(Row {
                coefs: vec![(col, -1.0)],
                b: -pre.lower[i],
            });
        }
    }
    for c in &program.constraints {
        match c.sense {
            Sense::Le => nonneg_rows.extend(asm.le(&c.expr, c.rhs)),
            Sense::Ge => {
                let neg = LinExpr {
                    terms: c.expr.terms.iter().map(|&(v, a)| (v, -a)).collect(),
                    constant: -c.expr.constant,
                };
                nonneg_rows.extend(asm.le(&neg, -c.rhs));
            }
            Sense::Eq => zero_rows.extend(asm.le(&c.expr, c.rhs)),
        }
    }
    for (idx, atom) in program.atoms.iter().enumerate() {
        match atom {
            Atom::LogHypograph { v, arg } => {
                let all_fixed = pre.is_fixed(v.0) && arg.terms.iter().all(|t| pre.is_fixed(t.0 .0));
                if all_fixed || arg.terms.iter().all(|t| pre.is_fixed(t.0 .0)) {
                    // handled as a bound on v by presolve
                    continue;
                }
                exp_rows.push([
                    asm.slack(&LinExpr::var(*v)),
                    Row {
                        coefs: vec![],
                        b: 1.0,
                    },
                    asm.slack(arg),
                ]);
            }
            Atom::PerspectiveLog { t, x, y } => {
                if pre.fixed[y.0] == Some(0.0) || (pre.is_fixed(x.0) && pre.is_fixed(y.0)) {
                    continue;
                }
                exp_rows.push([
                    asm.slack(&LinExpr::new().term(*t, -1.0)),
                    asm.slack(&LinExpr::var(*y)),
                    asm.slack(&LinExpr::var(*x)),
                ]);
            }
            Atom::ConcaveHypograph { u, z, func } => {
                if pre.is_fixed(z.0) {
                    continue;
                }
                let cuts = pool.cuts(idx);
                for cut in working[idx].iter().map(|&c| &cuts[c]) {
                    let expr = LinExpr::var(*u).term(*z, -cut.slope);
                    nonneg_rows.extend(asm.le(&expr, cut.intercept));
                }
                let (lo, hi) = func.domain();
                nonneg_rows.extend(asm.le(&LinExpr::var(*z), hi));
                nonneg_rows.extend(asm.le(&LinExpr::new().term(*z, -1.0), -lo));
            }
        }
    }

    let (obj_coefs, obj_const) = asm.split(&program.objective);
    if free.is_empty() {
        let values: Vec<f64> = pre.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        return SolveResult {
            status: SolveStatus::Optimal,
            objective: program.objective_value(&values),
            values,
            attained_tol: 0.0,
            cut_rounds: 0,
            diagnostics: "all variables fixed by presolve".into(),
        };
    }

    let ncols = free.len();
    let mut q = vec![0.0; ncols];
    for (col, c) in obj_coefs {
        q[col] += c;
    }

    let mut rows_i = Vec::new();
    let mut cols_j = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut push = |row: &Row, b: &mut Vec<f64>| {
        let r = b.len();
        for &(col, a) in &row.coefs {
            rows_i.push(r);
            cols_j.push(col);
            vals.push(a);
        }
        b.push(row.b);
    };
    for row in &zero_rows {
        push(row, &mut b);
    }
    for row in &nonneg_rows {
        push(row, &mut b);
    }
    for triple in &exp_rows {
        for row in triple {
            push(row, &mut b);
        }
    }
    let m = b.len();
    let mut cones = Vec::new();
    if !zero_rows.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(zero_rows.len()));
    }
    if !nonneg_rows.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(nonneg_rows.len()));
    }
    cones.extend(std::iter::repeat_n(
        SupportedConeT::ExponentialConeT(),
        exp_rows.len(),
    ));

    let a = CscMatrix::new_from_triplets(m, ncols, rows_i, cols_j, vals);
    let p = CscMatrix::<f64>::zeros((ncols, ncols));
    let settings = backend_settings(opts, profile);
    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        Err(e) => {
            return SolveResult::without_point(
                SolveStatus::NumericalFailure,
                n,
                format!("backend setup: {e}"),
            );
        }
    };
    solver.solve();
    let status = solver.solution.status;
    let info = &solver.info;
    debug!(
        "backend {:?} after {} iterations, {} rows x {} cols",
        status, info.iterations, m, ncols
    );
    let mapped = match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };
    if mapped != SolveStatus::Optimal {
        return SolveResult::without_point(
            mapped,
            n,
            format!(
                "backend status {status:?}, res_primal={:e}, res_dual={:e}, gap_rel={:e}",
                info.res_primal, info.res_dual, info.gap_rel
            ),
        );
    }
    let mut values: Vec<f64> = pre.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (col, &i) in free.iter().enumerate() {
        // clip tiny bound overshoot from the interior-point iterate
        values[i] = solver.solution.x[col].clamp(pre.lower[i], pre.upper[i]);
    }
    let objective = program.objective_value(&values);
    let attained = info
        .res_primal
        .max(info.res_dual)
        .max(info.gap_rel.min(info.gap_abs));
    SolveResult {
        status: SolveStatus::Optimal,
        objective,
        values,
        attained_tol: attained,
        cut_rounds: 0,
        diagnostics: format!(
            "backend {status:?} in {} iterations (objective offset {obj_const})",
            info.iterations
        ),
    }
}
