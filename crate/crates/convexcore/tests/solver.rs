use std::sync::Arc;

use convexcore::{
    branch_and_bound, solve_relaxation, BnbConfig, BnbError, BnbStatus, ConcaveFn, ConvexProgram,
    LinExpr, SolveOptions, SolveStatus,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[derive(Debug)]
struct LogOnePlus;

impl ConcaveFn for LogOnePlus {
    fn domain(&self) -> (f64, f64) {
        (0.0, 10.0)
    }
    fn value(&self, z: f64) -> f64 {
        z.ln_1p()
    }
    fn slope(&self, z: f64) -> f64 {
        1.0 / (1.0 + z)
    }
    fn initial_knots(&self) -> Vec<f64> {
        vec![0.0, 5.0, 10.0]
    }
}

#[test]
fn two_binary_toy() {
    let mut p = ConvexProgram::new();
    let y1 = p.add_binary("y1");
    let y2 = p.add_binary("y2");
    p.add_constraint(LinExpr::sum([y1, y2]), convexcore::Sense::Le, 1.0, "pick");
    p.set_objective(LinExpr::new().term(y1, -1.0).term(y2, -0.5));
    let res = branch_and_bound(&p, &BnbConfig::default()).unwrap();
    assert_eq!(res.status, BnbStatus::Optimal);
    assert!((res.incumbent_objective + 1.0).abs() < 1e-7);
    assert!((res.incumbent[y1.0] - 1.0).abs() < 1e-9);
    assert!(res.incumbent[y2.0].abs() < 1e-9);
}

#[test]
fn fixed_binaries_need_one_node() {
    let mut p = ConvexProgram::new();
    let y = p.add_binary("y");
    let x = p.add_var("x", 0.0, 4.0);
    let v = p.add_var("v", f64::NEG_INFINITY, f64::INFINITY);
    p.set_bounds(y, 1.0, 1.0);
    p.add_constraint(
        LinExpr::var(x).term(y, -4.0),
        convexcore::Sense::Le,
        0.0,
        "gate",
    );
    p.add_log_hypograph(v, LinExpr::var(x).plus_const(1.0));
    p.set_objective(LinExpr::new().term(v, -1.0).term(x, 0.1));
    let res = branch_and_bound(&p, &BnbConfig::default()).unwrap();
    assert_eq!(res.nodes, 1);
    // maximise ln(1 + x) - 0.1 x on [0, 4]: optimum at the upper end
    assert!((res.incumbent_objective - (-(5.0f64).ln() + 0.4)).abs() < 1e-7);
}

#[test]
fn log_hypograph_active_at_bound() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.5, 0.9);
    let v = p.add_var("v", f64::NEG_INFINITY, f64::INFINITY);
    p.add_log_hypograph(v, LinExpr::constant(1.0).term(x, -1.0));
    p.set_objective(LinExpr::new().term(v, -1.0));
    let res = solve_relaxation(&p, &SolveOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert!((res.value(v) - 0.5f64.ln()).abs() < 1e-7);
    assert!((res.value(x) - 0.5).abs() < 1e-7);
}

#[test]
fn perspective_with_unit_indicator() {
    let d = 15.0;
    let mut p = ConvexProgram::new();
    let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY);
    let x = p.add_var("x", 0.0, d);
    let y = p.add_var("y", 1.0, 1.0);
    p.add_perspective_log(t, x, y);
    p.set_objective(LinExpr::var(t));
    let res = solve_relaxation(&p, &SolveOptions::default()).unwrap();
    assert!((res.objective + d.ln()).abs() < 1e-7);
}

#[test]
fn perspective_with_fractional_indicator() {
    // t >= -y ln(x / y) with x <= 2, y = 0.5: t* = -0.5 ln 4
    let mut p = ConvexProgram::new();
    let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY);
    let x = p.add_var("x", 0.0, 2.0);
    let y = p.add_var("y", 0.5, 0.5);
    p.add_perspective_log(t, x, y);
    p.set_objective(LinExpr::var(t));
    let res = solve_relaxation(&p, &SolveOptions::default()).unwrap();
    assert!((res.objective + 0.5 * 4.0f64.ln()).abs() < 1e-7);
}

#[test]
fn concave_hypograph_refined_by_cuts() {
    let mut p = ConvexProgram::new();
    let z = p.add_var("z", 0.0, 10.0);
    let u = p.add_var("u", f64::NEG_INFINITY, f64::INFINITY);
    p.add_concave_hypograph(u, z, Arc::new(LogOnePlus));
    p.set_objective(LinExpr::new().term(u, -1.0).term(z, 0.25));
    let res = solve_relaxation(&p, &SolveOptions::default()).unwrap();
    let expected = -(4.0f64.ln() - 0.75);
    assert!(
        (res.objective - expected).abs() < 1e-7,
        "{} vs {expected}",
        res.objective
    );
    assert!(res.cut_rounds > 0);
}

#[test]
fn infeasible_root_reported() {
    let mut p = ConvexProgram::new();
    let y = p.add_binary("y");
    p.add_constraint(LinExpr::var(y), convexcore::Sense::Ge, 2.0, "impossible");
    assert_eq!(
        branch_and_bound(&p, &BnbConfig::default()).unwrap_err(),
        BnbError::RootInfeasible
    );
}

#[test]
fn undeclared_variable_rejected() {
    let mut p = ConvexProgram::new();
    p.add_var("x", 0.0, 1.0);
    p.set_objective(LinExpr::var(convexcore::VarId(3)));
    assert!(matches!(
        branch_and_bound(&p, &BnbConfig::default()),
        Err(BnbError::Program(_))
    ));
}

/// Min of `c.x` over `A x <= b`, `0 <= x <= ub` by enumerating basic solutions.
fn lp_by_vertices(c: &[f64], a: &[Vec<f64>], b: &[f64], ub: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push((e.clone(), ub[i]));
        e[i] = -1.0;
        rows.push((e, 0.0));
    }
    let m = rows.len();
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let mat = DMatrix::from_fn(n, n, |r, col| rows[pick[r]].0[col]);
        let rhs = DVector::from_fn(n, |r, _| rows[pick[r]].1);
        if let Some(x) = mat.lu().solve(&rhs) {
            let feasible = rows.iter().all(|(row, bound)| {
                row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= bound + 1e-9
            });
            if feasible {
                let val: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] != i + m - n {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lp_matches_vertex_enumeration(
        c in prop::collection::vec(-5.0f64..5.0, 5),
        a in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 5), 3),
        b in prop::collection::vec(0.5f64..6.0, 3),
        ub in prop::collection::vec(0.5f64..4.0, 5),
    ) {
        let mut p = ConvexProgram::new();
        let xs: Vec<_> = (0..5).map(|i| p.add_var(format!("x{i}"), 0.0, ub[i])).collect();
        for (row, &rhs) in a.iter().zip(&b) {
            let expr = LinExpr { terms: xs.iter().copied().zip(row.iter().copied()).collect(), constant: 0.0 };
            p.add_constraint(expr, convexcore::Sense::Le, rhs, "row");
        }
        p.set_objective(LinExpr { terms: xs.iter().copied().zip(c.iter().copied()).collect(), constant: 0.0 });
        // b > 0 keeps the origin feasible
        let oracle = lp_by_vertices(&c, &a, &b, &ub).unwrap();
        let res = solve_relaxation(&p, &SolveOptions::default()).unwrap();
        prop_assert_eq!(res.status, SolveStatus::Optimal);
        prop_assert!((res.objective - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
            "solver {} oracle {}", res.objective, oracle);
    }

    #[test]
    fn bnb_matches_assignment_enumeration(
        weights in prop::collection::vec(0.5f64..3.0, 4),
        caps in prop::collection::vec(1.0f64..8.0, 4),
        budget in 1usize..4,
    ) {
        // maximise sum w_i ln(1 + x_i) with x_i <= cap_i y_i and at most `budget` indicators on
        let build = |fixed: Option<&[f64]>| {
            let mut p = ConvexProgram::new();
            let mut obj = LinExpr::new();
            let mut ys = Vec::new();
            for i in 0..4 {
                let y = p.add_binary(format!("y{i}"));
                if let Some(f) = fixed {
                    p.set_bounds(y, f[i], f[i]);
                }
                let x = p.add_var(format!("x{i}"), 0.0, caps[i]);
                let v = p.add_var(format!("v{i}"), f64::NEG_INFINITY, f64::INFINITY);
                p.add_constraint(LinExpr::var(x).term(y, -caps[i]), convexcore::Sense::Le, 0.0, "gate");
                p.add_log_hypograph(v, LinExpr::var(x).plus_const(1.0));
                obj.add_term(v, -weights[i]);
                obj.add_term(x, 0.05);
                obj.add_term(y, 0.3);
                ys.push(y);
            }
            p.add_constraint(LinExpr::sum(ys), convexcore::Sense::Le, budget as f64, "budget");
            p.set_objective(obj);
            p
        };
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let f: Vec<f64> = (0..4).map(|i| f64::from((mask >> i) & 1)).collect();
            if f.iter().sum::<f64>() > budget as f64 {
                continue;
            }
            let r = solve_relaxation(&build(Some(&f)), &SolveOptions::default()).unwrap();
            if r.status == SolveStatus::Optimal {
                best = best.min(r.objective);
            }
        }
        let res = branch_and_bound(&build(None), &BnbConfig::default()).unwrap();
        prop_assert!((res.incumbent_objective - best).abs() <= 1e-6 * best.abs().max(1.0),
            "bnb {} enumeration {}", res.incumbent_objective, best);
        prop_assert!(res.bound_trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(res.best_bound <= res.incumbent_objective + 1e-12);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let mut p = ConvexProgram::new();
    let mut obj = LinExpr::new();
    let mut ys = Vec::new();
    for i in 0..5 {
        let y = p.add_binary(format!("y{i}"));
        let x = p.add_var(format!("x{i}"), 0.0, 3.0 + i as f64);
        let v = p.add_var(format!("v{i}"), f64::NEG_INFINITY, f64::INFINITY);
        p.add_constraint(
            LinExpr::var(x).term(y, -(3.0 + i as f64)),
            convexcore::Sense::Le,
            0.0,
            "gate",
        );
        p.add_log_hypograph(v, LinExpr::var(x).plus_const(0.5));
        obj.add_term(v, -1.0);
        obj.add_term(y, 0.2 * i as f64);
        ys.push(y);
    }
    p.add_constraint(LinExpr::sum(ys), convexcore::Sense::Le, 2.0, "budget");
    p.set_objective(obj);
    let a = branch_and_bound(&p, &BnbConfig::default()).unwrap();
    let b = branch_and_bound(&p, &BnbConfig::default()).unwrap();
    assert_eq!(
        a.incumbent_objective.to_bits(),
        b.incumbent_objective.to_bits()
    );
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.incumbent.len(), b.incumbent.len());
    for (x, y) in a.incumbent.iter().zip(&b.incumbent) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn node_limit_reports_gap() {
    let mut p = ConvexProgram::new();
    let mut obj = LinExpr::new();
    let mut ys = Vec::new();
    for i in 0..6 {
        let y = p.add_binary(format!("y{i}"));
        obj.add_term(y, -(1.0 + 0.1 * i as f64));
        ys.push(y);
    }
    let mut knap = LinExpr::new();
    for (i, &y) in ys.iter().enumerate() {
        knap.add_term(y, 1.0 + 0.37 * i as f64);
    }
    p.add_constraint(knap, convexcore::Sense::Le, 4.1, "knapsack");
    p.set_objective(obj);
    let cfg = BnbConfig {
        node_limit: 3,
        ..BnbConfig::default()
    };
    match branch_and_bound(&p, &cfg) {
        Ok(r) => {
            assert!(r.status == BnbStatus::NodeLimit || r.rel_gap <= 1e-6);
            assert!(r.best_bound <= r.incumbent_objective);
        }
        Err(e) => assert!(matches!(e, BnbError::NodeLimitWithoutIncumbent { .. })),
    }
}
