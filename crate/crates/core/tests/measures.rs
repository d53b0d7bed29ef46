use entroute::measures::*;
use proptest::prelude::*;

// Straight transcriptions in w, kept separate from the library's a = 1 - w forms.
fn skf(w: f64) -> f64 {
    let t = |x: f64| if x == 0.0 { 0.0 } else { x * (x / 2.0).log2() };
    (1.0 + t(1.0 + w) + t(1.0 - w)).max(0.0)
}

fn de(w: f64) -> f64 {
    let p = (1.0 + 3.0 * w) / 4.0;
    let q = (1.0 - w) / 4.0;
    let t = |x: f64| if x == 0.0 { 0.0 } else { x * x.log2() };
    (1.0 + t(p) + 3.0 * t(q)).max(0.0)
}

fn reference(kind: MeasureKind, w: f64) -> f64 {
    match kind {
        MeasureKind::Skf => skf(w),
        MeasureKind::De => de(w),
        MeasureKind::Negativity => ((3.0 * w - 1.0) / 4.0).max(0.0),
    }
}

fn big_f(kind: MeasureKind, z: f64) -> f64 {
    reference(kind, z.exp()).ln()
}

// Values from a 40-digit evaluation of the same closed forms.
const FROZEN: [(MeasureKind, f64, f64); 6] = [
    (MeasureKind::Skf, 0.9, 0.427_206_085_768_087_742_47),
    (MeasureKind::De, 0.9, 0.496_816_268_319_416_200_35),
    (MeasureKind::Skf, 0.95, 0.662_678_137_006_659_570_87),
    (MeasureKind::De, 0.95, 0.709_853_950_531_480_214_63),
    (MeasureKind::Skf, 0.8, 0.062_008_812_821_437_557_493),
    (MeasureKind::De, 0.8, 0.152_415_320_175_426_149_15),
];

#[test]
fn measure_matches_high_precision_values() {
    for (kind, w, expected) in FROZEN {
        let got = eval_measure(kind, w);
        assert!(
            (got - expected).abs() < 1e-14,
            "{kind} at {w}: {got} vs {expected}"
        );
    }
}

#[test]
fn measure_examples() {
    assert_eq!(eval_measure(MeasureKind::Negativity, 1.0), 0.5);
    assert_eq!(eval_measure(MeasureKind::Negativity, 1.0 / 3.0), 0.0);
    assert_eq!(eval_measure(MeasureKind::Skf, 1.0), 1.0);
    assert_eq!(eval_measure(MeasureKind::De, 1.0), 1.0);
    assert!((eval_f(MeasureKind::Negativity, 0.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    assert!(eval_f(MeasureKind::Negativity, (1.0f64 / 3.0).ln()).is_none());
    assert_eq!(eval_f(MeasureKind::Skf, 0.0), Some(0.0));
}

#[test]
fn measures_are_monotone_in_w() {
    for kind in MeasureKind::ALL {
        let mut prev = eval_measure(kind, 0.0);
        for m in 1..=10_000 {
            let cur = eval_measure(kind, m as f64 * 1e-4);
            assert!(
                cur >= prev - 1e-15,
                "{kind} decreases at w = {}",
                m as f64 * 1e-4
            );
            prev = cur;
        }
    }
}

#[test]
fn zeros_of_the_measures() {
    assert!((zero_werner(MeasureKind::Skf) - 0.779_944_271_123_28).abs() < 1e-12);
    assert!((zero_werner(MeasureKind::De) - 0.747_613_833_446_36).abs() < 1e-12);
    assert!((z_min(MeasureKind::Skf) + 0.248_532_809_128_82).abs() < 1e-12);
    assert!((z_min(MeasureKind::De) + 0.290_868_699_764_60).abs() < 1e-12);
    assert_eq!(z_min(MeasureKind::Negativity), (1.0f64 / 3.0).ln());
}

/// Smallest root of F'(z) - F(z)/z scanning upward from z_min, with F' from
/// central differences of the reference transcription.
fn tangency_by_bisection(kind: MeasureKind) -> f64 {
    let lo0 = z_min(kind) + 1e-6;
    let h = |z: f64| {
        let step = 1e-6 * z.abs().max(1e-3);
        let d = (big_f(kind, z + step) - big_f(kind, z - step)) / (2.0 * step);
        d - big_f(kind, z) / z
    };
    // h > 0 near z_min (F' blows up), < 0 past the tangency
    let n = 2000;
    let mut a = lo0;
    let width = (-1e-3 - lo0) / n as f64;
    while h(a + width) > 0.0 {
        a += width;
    }
    let (mut lo, mut hi) = (a, a + width);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn tangency_points() {
    let skf = envelope(MeasureKind::Skf).unwrap();
    let de = envelope(MeasureKind::De).unwrap();
    // 40-digit reference values
    assert!((skf.z_hat().unwrap() + 0.073_452_389_580_408_33).abs() < 1e-9);
    assert!((de.z_hat().unwrap() + 0.080_050_914_048_940_06).abs() < 1e-9);
    assert!((skf.z_breve().unwrap() + 0.038_964_987_501_161_75).abs() < 1e-9);
    assert!((de.z_breve().unwrap() + 0.042_245_022_192_423_28).abs() < 1e-9);
    for m in [skf, de] {
        let oracle = tangency_by_bisection(m.kind);
        assert!(
            (m.z_hat().unwrap() - oracle).abs() < 1e-9,
            "{} vs {oracle}",
            m.z_hat().unwrap()
        );
    }
}

#[test]
fn knot_continuity_and_origin() {
    for kind in [MeasureKind::Skf, MeasureKind::De] {
        let m = envelope(kind).unwrap();
        let zh = m.z_hat().unwrap();
        assert_eq!(m.eval_envelope(zh).unwrap(), eval_f(kind, zh).unwrap());
        assert_eq!(m.eval_envelope(0.0).unwrap(), 0.0);
        assert!(m.eval_envelope(0.1).is_err());
        assert!(m.eval_envelope(m.z_min).is_err());
        let mid = 0.5 * m.z_breve().unwrap();
        let (hat, f, under) = (
            m.eval_envelope(mid).unwrap(),
            eval_f(kind, mid).unwrap(),
            m.eval_under(mid).unwrap(),
        );
        assert!(hat > f && f > under);
    }
}

fn dense_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |m| (lo + (hi - lo) * m as f64 / n as f64).min(hi))
}

#[test]
fn sandwich_on_dense_grid() {
    for kind in [MeasureKind::Skf, MeasureKind::De] {
        let m = envelope(kind).unwrap();
        let zh = m.z_hat().unwrap();
        for z in dense_grid(m.z_min + 1e-9, 0.0, 200_000) {
            let f = eval_f(kind, z).unwrap();
            let hat = m.eval_envelope(z).unwrap();
            let under = m.eval_under(z).unwrap();
            assert!(under <= f + 1e-14 && f <= hat + 1e-14, "{kind} at {z}");
            if z <= zh {
                assert_eq!(hat, f);
                assert_eq!(under, f);
            }
        }
    }
}

#[test]
fn gap_norms_within_published_bounds() {
    let cases = [
        (
            MeasureKind::Skf,
            0.0165,
            0.0258,
            0.016_412_645_703_764,
            0.025_744_434_223_889,
        ),
        (
            MeasureKind::De,
            0.0135,
            0.0212,
            0.013_486_502_210_248,
            0.021_124_270_164_646,
        ),
    ];
    for (kind, hat_bound, under_bound, hat_ref, under_ref) in cases {
        let m = envelope(kind).unwrap();
        let g = m.gaps();
        assert!(g.hat_minus_f < hat_bound && g.hat_minus_f > 1e-3);
        assert!(g.f_minus_breve < under_bound && g.f_minus_breve > 1e-3);
        assert!((g.hat_minus_f - hat_ref).abs() < 1e-8);
        assert!((g.f_minus_breve - under_ref).abs() < 1e-8);
        // dense grid never exceeds the located maxima
        let mut worst_hat: f64 = 0.0;
        let mut worst_under: f64 = 0.0;
        for z in dense_grid(m.z_min + 1e-9, 0.0, 100_000) {
            let f = big_f(kind, z);
            worst_hat = worst_hat.max(m.eval_envelope(z).unwrap() - f);
            worst_under = worst_under.max(f - m.eval_under(z).unwrap());
        }
        assert!(worst_hat <= g.hat_minus_f + 1e-12);
        assert!(worst_under <= g.f_minus_breve + 1e-12);
        assert!(worst_hat > g.hat_minus_f - 1e-7);
    }
}

fn second_differences_nonpositive(values: &[f64], tol: f64) -> bool {
    values.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= tol)
}

#[test]
fn stand_ins_are_concave_and_nondecreasing() {
    for kind in MeasureKind::ALL {
        let m = envelope(kind).unwrap();
        for variant in [EnvelopeVariant::Hat, EnvelopeVariant::Breve] {
            let vals: Vec<f64> = dense_grid(m.z_min + 1e-3, 0.0, 20_000)
                .map(|z| m.value(variant, z).unwrap())
                .collect();
            assert!(
                second_differences_nonpositive(&vals, 1e-12),
                "{kind} {variant}"
            );
            assert!(vals.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn negativity_log_is_concave() {
    let lo = z_min(MeasureKind::Negativity) + 1e-3;
    let vals: Vec<f64> = dense_grid(lo, 0.0, 20_000)
        .map(|z| ((3.0 * z.exp() - 1.0) / 4.0).ln())
        .collect();
    assert!(second_differences_nonpositive(&vals, 1e-12));
    let lib: Vec<f64> = dense_grid(lo, 0.0, 20_000)
        .map(|z| eval_f(MeasureKind::Negativity, z).unwrap())
        .collect();
    assert!(second_differences_nonpositive(&lib, 1e-12));
}

#[test]
fn inflection_is_unique_and_tangency_precedes_it() {
    for kind in [MeasureKind::Skf, MeasureKind::De] {
        let m = build_envelope(kind, 1e-12, 100).unwrap();
        assert!(m.z_min < m.z_hat().unwrap());
        assert!(m.z_hat().unwrap() < m.z_breve().unwrap());
        assert!(m.z_breve().unwrap() < 0.0);
        let (_, _, f2) = f_derivatives(kind, m.z_breve().unwrap()).unwrap();
        assert!(f2.abs() < 1e-6);
    }
    assert!(build_envelope(MeasureKind::Negativity, 1e-12, 100)
        .unwrap()
        .is_trivial());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_derivative_matches_central_difference(u in 0.02f64..0.98, which in 0usize..3) {
        let kind = MeasureKind::ALL[which];
        let zm = z_min(kind);
        let z = zm + (0.0 - zm) * u;
        let (_, d1, _) = f_derivatives(kind, z).unwrap();
        let h = 1e-6 * (z - zm).min(-z);
        let fd = (big_f(kind, z + h) - big_f(kind, z - h)) / (2.0 * h);
        prop_assert!((d1 - fd).abs() <= 1e-6 * d1.abs().max(1.0), "{} vs {}", d1, fd);
    }
}

#[test]
fn pwl_chord_for_negativity() {
    let m = envelope(MeasureKind::Negativity).unwrap();
    let p = build_pwl(m, PwlTarget::Exact, -0.2, 2).unwrap();
    assert_eq!(p.breakpoints.len(), 2);
    let mut worst: f64 = 0.0;
    for z in dense_grid(-0.2, 0.0, 200_000) {
        worst = worst.max(eval_f(MeasureKind::Negativity, z).unwrap() - p.eval(z).unwrap());
    }
    assert!(
        (p.max_gap - worst).abs() < 1e-10,
        "{} vs {worst}",
        p.max_gap
    );
}

#[test]
fn pwl_envelope_with_many_points() {
    for kind in [MeasureKind::Skf, MeasureKind::De] {
        let m = envelope(kind).unwrap();
        let p = build_pwl(m, PwlTarget::Envelope, -0.15, 512).unwrap();
        assert_eq!(p.breakpoints.len(), 512);
        assert!(p.max_gap < 1e-6);
        let slopes = p.slopes();
        assert!(slopes.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(p.breakpoints.windows(2).all(|w| w[1].0 > w[0].0));
        let mut worst: f64 = 0.0;
        for z in dense_grid(-0.15, 0.0, 100_000) {
            let hat = m.eval_envelope(z).unwrap();
            let pwl = p.eval(z).unwrap();
            assert!(pwl <= hat + 1e-12);
            worst = worst.max(hat - pwl);
        }
        assert!(worst <= p.max_gap + 1e-12);
    }
}

#[test]
fn pwl_near_log_singularity_reports_its_gap() {
    let m = envelope(MeasureKind::Skf).unwrap();
    let lo = m.z_min + Z_LO_OFFSET;
    let p = build_pwl(m, PwlTarget::Envelope, lo, DEFAULT_PWL_POINTS).unwrap();
    let mut worst: f64 = 0.0;
    for z in dense_grid(lo, 0.0, 200_000) {
        worst = worst.max(m.eval_envelope(z).unwrap() - p.eval(z).unwrap());
    }
    assert!(worst <= p.max_gap + 1e-12);
}

#[test]
fn pwl_on_linear_piece_is_exact() {
    let m = envelope(MeasureKind::Skf).unwrap();
    let p = build_pwl(m, PwlTarget::Envelope, -0.05, 2).unwrap();
    assert_eq!(p.max_gap, 0.0);
}

#[test]
fn exact_pwl_rejected_for_nonconcave_measure() {
    let m = envelope(MeasureKind::Skf).unwrap();
    assert_eq!(
        build_pwl(m, PwlTarget::Exact, -0.2, 16).unwrap_err(),
        MeasureError::NotConcave(MeasureKind::Skf)
    );
    assert!(build_pwl(m, PwlTarget::Envelope, m.z_min - 0.1, 16).is_err());
}
