//! Entanglement measures of Werner states and their log-domain transforms.
//!
//! For a measure `f` of the Werner parameter `w`, the solvers work with
//! `F(z) = ln f(e^z)` where `z = ln w`. `F` is concave for negativity. For the
//! secret key fraction and the distillable-entanglement lower bound it is
//! concave up to a single inflection point and convex afterwards; those two
//! get a concave overestimator (the envelope: `F` followed by the tangent
//! through the origin) and a concave underestimator (`F` followed by the
//! tangent at the inflection point).

use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use convexcore::ConcaveFn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PWL_POINTS: usize = 512;
/// Offset of the lowest admissible `z` above the zero of `f`.
pub const Z_LO_OFFSET: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 100;
const SCAN_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    /// Secret key fraction.
    Skf,
    /// Hashing lower bound on distillable entanglement.
    De,
    Negativity,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 3] = [MeasureKind::Skf, MeasureKind::De, MeasureKind::Negativity];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Skf => "skf",
            MeasureKind::De => "de",
            MeasureKind::Negativity => "negativity",
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "skf" | "sk" => Ok(MeasureKind::Skf),
            "de" | "de-lb" | "de_lb" => Ok(MeasureKind::De),
            "neg" | "negativity" => Ok(MeasureKind::Negativity),
            other => Err(format!(
                "unknown measure {other} (expected skf, de or negativity)"
            )),
        }
    }
}

/// Which concave stand-in for `F` a solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeVariant {
    /// Concave envelope, an overestimator.
    Hat,
    /// Tangent-extension underestimator.
    Breve,
}

impl fmt::Display for EnvelopeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvelopeVariant::Hat => "hat",
            EnvelopeVariant::Breve => "breve",
        })
    }
}

impl FromStr for EnvelopeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hat" => Ok(EnvelopeVariant::Hat),
            "breve" => Ok(EnvelopeVariant::Breve),
            other => Err(format!("unknown envelope {other} (expected hat or breve)")),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasureError {
    #[error("z = {z} outside the domain ({z_min}, 0]")]
    OutsideDomain { z: f64, z_min: f64 },
    #[error("tangency search failed, last iterate {last}")]
    TangencyNotFound { last: f64 },
    #[error("expected one inflection point for {kind}, found {count}")]
    InflectionNotUnique { kind: MeasureKind, count: usize },
    #[error("F is not concave for {0}; only the envelope or underestimator admit a concave piecewise-linear model")]
    NotConcave(MeasureKind),
    #[error("piecewise-linear model needs z_lo in ({z_min}, 0) and at least {min_points} points")]
    BadPwlRequest { z_min: f64, min_points: usize },
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Unclipped measure as a function of `a = 1 - w`, which keeps precision near `w = 1`.
fn raw_measure(kind: MeasureKind, a: f64) -> f64 {
    match kind {
        MeasureKind::Skf => {
            // 1 + (1 + w) log2((1 + w) / 2) + (1 - w) log2((1 - w) / 2)
            let upper = if a == 0.0 {
                0.0
            } else {
                (2.0 - a) * (-0.5 * a).ln_1p() / std::f64::consts::LN_2
            };
            1.0 + upper + xlog2x(0.5 * a) * 2.0
        }
        MeasureKind::De => {
            let p = 1.0 - 0.75 * a;
            let q = 0.25 * a;
            let plog = if a == 0.0 {
                0.0
            } else {
                p * (-0.75 * a).ln_1p() / std::f64::consts::LN_2
            };
            1.0 + plog + 3.0 * xlog2x(q)
        }
        MeasureKind::Negativity => (2.0 - 3.0 * a) / 4.0,
    }
}

/// `(f', f'')` with respect to `w`, given `a = 1 - w`. Requires `0 < a < 1`
/// for the two logarithmic measures.
fn raw_derivatives(kind: MeasureKind, a: f64) -> (f64, f64) {
    let ln2 = std::f64::consts::LN_2;
    match kind {
        MeasureKind::Skf => (((2.0 - a).ln() - a.ln()) / ln2, 2.0 / (a * (2.0 - a) * ln2)),
        MeasureKind::De => {
            let p = 1.0 - 0.75 * a;
            let q = 0.25 * a;
            (
                0.75 * (p.ln() - q.ln()) / ln2,
                3.0 / 16.0 * (3.0 / p + 1.0 / q) / ln2,
            )
        }
        MeasureKind::Negativity => (0.75, 0.0),
    }
}

/// Measure value `f(w)`, clipped at zero, for `w` in `[0, 1]`.
pub fn eval_measure(kind: MeasureKind, w: f64) -> f64 {
    let w = w.clamp(0.0, 1.0);
    raw_measure(kind, 1.0 - w).max(0.0)
}

/// Werner parameter at which the measure reaches zero.
pub fn zero_werner(kind: MeasureKind) -> f64 {
    static ZEROS: OnceLock<[f64; 3]> = OnceLock::new();
    let zeros = ZEROS.get_or_init(|| {
        MeasureKind::ALL.map(|k| {
            if k == MeasureKind::Negativity {
                return 1.0 / 3.0;
            }
            // raw_measure decreases in a on [0, 1]: positive at 0, negative at 1
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while hi - lo > f64::EPSILON * hi {
                let mid = 0.5 * (lo + hi);
                if raw_measure(k, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            1.0 - lo
        })
    });
    zeros[kind as usize]
}

/// `ln` of [`zero_werner`]: `F(z)` is finite exactly for `z` in `(z_min, 0]`.
pub fn z_min(kind: MeasureKind) -> f64 {
    zero_werner(kind).ln()
}

/// `F(z) = ln f(e^z)`. `None` stands for `ln 0`: the measure vanishes at or
/// below `z_min`, and `z > 0` is not a Werner parameter.
pub fn eval_f(kind: MeasureKind, z: f64) -> Option<f64> {
    if !(z <= 0.0) {
        return None;
    }
    let f = raw_measure(kind, -z.exp_m1());
    (f > 0.0).then(|| f.ln())
}

/// `(F, F', F'')` at `z`, or `None` outside `(z_min, 0)`.
pub fn f_derivatives(kind: MeasureKind, z: f64) -> Option<(f64, f64, f64)> {
    if !(z < 0.0) {
        return None;
    }
    let a = -z.exp_m1();
    let w = z.exp();
    let f = raw_measure(kind, a);
    if f <= 0.0 {
        return None;
    }
    let (d1, d2) = raw_derivatives(kind, a);
    let g1 = w * d1 / f;
    let g2 = g1 + w * w * d2 / f - g1 * g1;
    Some((f.ln(), g1, g2))
}

/// Line `slope * z + intercept` that continues `F` beyond `knot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub knot: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Tangent {
    pub fn eval(&self, z: f64) -> f64 {
        self.slope * z + self.intercept
    }
}

/// Concave over- and underestimators of `F` for one measure.
///
/// `hat` continues `F` beyond the tangency point by the line through the
/// origin; `under` continues it beyond the inflection point by the tangent
/// there. Both are `None` for negativity, whose `F` is already concave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeModel {
    pub kind: MeasureKind,
    pub z_min: f64,
    pub hat: Option<Tangent>,
    pub under: Option<Tangent>,
}

/// Sup-norm distances between `F` and its two concave stand-ins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeGaps {
    pub hat_minus_f: f64,
    pub hat_argmax: f64,
    pub f_minus_breve: f64,
    pub breve_argmax: f64,
}

impl EnvelopeModel {
    pub fn is_trivial(&self) -> bool {
        self.hat.is_none()
    }

    pub fn z_hat(&self) -> Option<f64> {
        self.hat.map(|t| t.knot)
    }

    pub fn z_breve(&self) -> Option<f64> {
        self.under.map(|t| t.knot)
    }

    fn piece(&self, variant: EnvelopeVariant) -> Option<Tangent> {
        match variant {
            EnvelopeVariant::Hat => self.hat,
            EnvelopeVariant::Breve => self.under,
        }
    }

    /// Stand-in value at `z`; `None` outside `(z_min, 0]`.
    pub fn value(&self, variant: EnvelopeVariant, z: f64) -> Option<f64> {
        if !(z > self.z_min && z <= 0.0) {
            return None;
        }
        match self.piece(variant) {
            Some(t) if z > t.knot => Some(t.eval(z)),
            _ => eval_f(self.kind, z),
        }
    }

    /// Derivative of the stand-in at `z`; `None` outside `(z_min, 0]`.
    pub fn slope(&self, variant: EnvelopeVariant, z: f64) -> Option<f64> {
        if !(z > self.z_min && z <= 0.0) {
            return None;
        }
        match self.piece(variant) {
            Some(t) if z > t.knot => Some(t.slope),
            _ if z == 0.0 => f_derivatives(self.kind, -1e-300).map(|d| d.1),
            _ => f_derivatives(self.kind, z).map(|d| d.1),
        }
    }

    fn checked(&self, variant: EnvelopeVariant, z: f64) -> Result<f64, MeasureError> {
        self.value(variant, z).ok_or(MeasureError::OutsideDomain {
            z,
            z_min: self.z_min,
        })
    }

    pub fn eval_envelope(&self, z: f64) -> Result<f64, MeasureError> {
        self.checked(EnvelopeVariant::Hat, z)
    }

    pub fn eval_under(&self, z: f64) -> Result<f64, MeasureError> {
        self.checked(EnvelopeVariant::Breve, z)
    }

    /// Largest `F_hat - F` and `F - F_breve` over `(z_min, 0]`.
    pub fn gaps(&self) -> EnvelopeGaps {
        let (Some(hat), Some(under)) = (self.hat, self.under) else {
            return EnvelopeGaps {
                hat_minus_f: 0.0,
                hat_argmax: 0.0,
                f_minus_breve: 0.0,
                breve_argmax: 0.0,
            };
        };
        let kind = self.kind;
        // F is concave up to the inflection, so F_hat - F peaks where F' climbs
        // back to the envelope slope on the convex side.
        let fp = |z: f64| f_derivatives(kind, z).map_or(f64::INFINITY, |d| d.1);
        let zs = bisect(|z| fp(z) - hat.slope, under.knot, -1e-12, 200);
        let gap_at = |z: f64| hat.eval(z) - eval_f(kind, z).unwrap_or(f64::NEG_INFINITY);
        let (hat_argmax, hat_minus_f) = [zs, 0.0]
            .into_iter()
            .map(|z| (z, gap_at(z)))
            .fold((0.0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        // F - tangent is convex beyond the inflection: the maximum sits at an endpoint.
        let under_gap = eval_f(kind, 0.0).unwrap_or(f64::NEG_INFINITY) - under.eval(0.0);
        EnvelopeGaps {
            hat_minus_f,
            hat_argmax,
            f_minus_breve: under_gap.max(0.0),
            breve_argmax: 0.0,
        }
    }
}

/// Root of `g` on `[lo, hi]` where `g(lo) < 0 < g(hi)`, by bisection.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Builds the concave stand-ins of `F` for `kind`.
///
/// The tangency point solves `F'(z) = F(z) / z`. Newton's method starts just
/// above `z_min`; if it leaves the domain, stalls, or lands on a root that is
/// not the smallest one, the root is bracketed and bisected instead. The
/// inflection point is located by scanning the sign of `F''` and must be unique.
pub fn build_envelope(
    kind: MeasureKind,
    newton_tol: f64,
    max_iter: usize,
) -> Result<EnvelopeModel, MeasureError> {
    let zmin = z_min(kind);
    if kind == MeasureKind::Negativity {
        return Ok(EnvelopeModel {
            kind,
            z_min: zmin,
            hat: None,
            under: None,
        });
    }
    let lo = zmin + Z_LO_OFFSET;
    let hi = -1e-9;
    let derivs = |z: f64| f_derivatives(kind, z);
    // h(z) = z F'(z) - F(z); negative near z_min, positive between the tangency point and 0
    let h = |z: f64| derivs(z).map_or(f64::NEG_INFINITY, |(f, f1, _)| z * f1 - f);

    let mut z = zmin + 1e-3;
    let mut newton = None;
    for _ in 0..max_iter {
        let Some((f, f1, f2)) = derivs(z) else { break };
        let hz = z * f1 - f;
        if hz.abs() < newton_tol {
            newton = Some(z);
            break;
        }
        let step = hz / (z * f2);
        let next = z - step;
        if !(next > zmin && next < 0.0) {
            break;
        }
        z = next;
    }
    let is_minimal = |r: f64| (1..200).all(|m| h(lo + (r - lo) * m as f64 / 200.0) < 0.0);
    let z_hat = match newton {
        Some(r) if is_minimal(r) => r,
        _ => {
            if !(h(lo) < 0.0 && h(hi) > 0.0) {
                return Err(MeasureError::TangencyNotFound { last: z });
            }
            // the scan keeps bisection on the first sign change
            let step = (hi - lo) / SCAN_POINTS as f64;
            let mut a = lo;
            while h(a + step) < 0.0 {
                a += step;
            }
            bisect(h, a, a + step, 200)
        }
    };
    let f_hat = eval_f(kind, z_hat).ok_or(MeasureError::TangencyNotFound { last: z_hat })?;

    let f2 = |z: f64| derivs(z).map_or(f64::NEG_INFINITY, |d| d.2);
    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|m| lo + (hi - lo) * m as f64 / SCAN_POINTS as f64)
        .collect();
    let flips: Vec<usize> = (1..grid.len())
        .filter(|&m| (f2(grid[m - 1]) < 0.0) != (f2(grid[m]) < 0.0))
        .collect();
    if flips.len() != 1 {
        return Err(MeasureError::InflectionNotUnique {
            kind,
            count: flips.len(),
        });
    }
    let m = flips[0];
    let z_breve = bisect(f2, grid[m - 1], grid[m], 200);
    let (fb, fb1, _) =
        derivs(z_breve).ok_or(MeasureError::InflectionNotUnique { kind, count: 0 })?;

    Ok(EnvelopeModel {
        kind,
        z_min: zmin,
        hat: Some(Tangent {
            knot: z_hat,
            slope: f_hat / z_hat,
            intercept: 0.0,
        }),
        under: Some(Tangent {
            knot: z_breve,
            slope: fb1,
            intercept: fb - fb1 * z_breve,
        }),
    })
}

/// Envelope model built once per process with default tolerances.
pub fn envelope(kind: MeasureKind) -> Result<&'static EnvelopeModel, MeasureError> {
    static MODELS: OnceLock<[Result<EnvelopeModel, MeasureError>; 3]> = OnceLock::new();
    let models = MODELS
        .get_or_init(|| MeasureKind::ALL.map(|k| build_envelope(k, NEWTON_TOL, NEWTON_MAX_ITER)));
    models[kind as usize].as_ref().map_err(Clone::clone)
}

/// Measure kind of every demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measures {
    pub kinds: Vec<MeasureKind>,
}

impl Measures {
    pub fn uniform(kind: MeasureKind, k: usize) -> Self {
        Self {
            kinds: vec![kind; k],
        }
    }

    pub fn kind(&self, i: usize) -> MeasureKind {
        self.kinds[i]
    }

    pub fn model(&self, i: usize) -> Result<&'static EnvelopeModel, MeasureError> {
        envelope(self.kinds[i])
    }

    pub fn prefix(&self, k: usize) -> Self {
        Self {
            kinds: self.kinds[..k.min(self.kinds.len())].to_vec(),
        }
    }
}

/// Which function a piecewise-linear model follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwlTarget {
    Envelope,
    Under,
    Exact,
}

/// Concave piecewise-linear interpolant through `breakpoints`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlApprox {
    pub breakpoints: Vec<(f64, f64)>,
    /// Largest distance between the target function and the interpolant.
    pub max_gap: f64,
}

impl PwlApprox {
    pub fn segments(&self) -> usize {
        self.breakpoints.len().saturating_sub(1)
    }

    pub fn eval(&self, z: f64) -> Option<f64> {
        let first = self.breakpoints.first()?;
        let last = self.breakpoints.last()?;
        if z < first.0 || z > last.0 {
            return None;
        }
        let m = self.breakpoints.partition_point(|b| b.0 < z).max(1);
        let (z0, v0) = self.breakpoints[m - 1];
        let (z1, v1) = self.breakpoints[m.min(self.breakpoints.len() - 1)];
        if z1 == z0 {
            return Some(v0);
        }
        Some(v0 + (v1 - v0) * (z - z0) / (z1 - z0))
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }
}

struct Segment {
    gap: f64,
    at: f64,
    a: f64,
    b: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.gap
            .total_cmp(&other.gap)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Chord interpolant of the chosen target on `[z_lo, 0]` with `n_points`
/// breakpoints, refined greedily by splitting the segment with the largest
/// chord gap at the point where that gap peaks.
pub fn build_pwl(
    model: &EnvelopeModel,
    target: PwlTarget,
    z_lo: f64,
    n_points: usize,
) -> Result<PwlApprox, MeasureError> {
    let variant = match target {
        PwlTarget::Envelope => Some(EnvelopeVariant::Hat),
        PwlTarget::Under => Some(EnvelopeVariant::Breve),
        PwlTarget::Exact if model.is_trivial() => None,
        PwlTarget::Exact => return Err(MeasureError::NotConcave(model.kind)),
    };
    let g = |z: f64| match variant {
        Some(v) => model.value(v, z),
        None => eval_f(model.kind, z),
    };
    let dg = |z: f64| match variant {
        Some(v) => model.slope(v, z),
        None => model.slope(EnvelopeVariant::Hat, z),
    };
    let mut forced = vec![z_lo, 0.0];
    if let Some(v) = variant {
        if let Some(t) = model.piece(v) {
            if t.knot > z_lo && t.knot < 0.0 {
                forced.insert(1, t.knot);
            }
        }
    }
    if !(z_lo > model.z_min && z_lo < 0.0) || n_points < forced.len() {
        return Err(MeasureError::BadPwlRequest {
            z_min: model.z_min,
            min_points: forced.len(),
        });
    }
    let value = |z: f64| g(z).expect("breakpoints lie in the domain");
    let segment = |a: f64, b: f64| {
        let (ga, gb) = (value(a), value(b));
        let m = (gb - ga) / (b - a);
        // the chord gap of a concave function peaks where g' equals the chord slope
        let at = bisect(|z| m - dg(z).unwrap_or(f64::NEG_INFINITY), a, b, 200);
        let gap = (value(at) - (ga + m * (at - a))).max(0.0);
        Segment { gap, at, a, b }
    };
    let mut points = forced.clone();
    let mut heap: BinaryHeap<Segment> = forced.windows(2).map(|w| segment(w[0], w[1])).collect();
    while points.len() < n_points {
        let Some(top) = heap.pop() else { break };
        if top.gap <= 0.0 || top.at <= top.a || top.at >= top.b {
            heap.push(top);
            break;
        }
        points.push(top.at);
        heap.push(segment(top.a, top.at));
        heap.push(segment(top.at, top.b));
    }
    points.sort_by(f64::total_cmp);
    let max_gap = heap.iter().map(|s| s.gap).fold(0.0, f64::max);
    Ok(PwlApprox {
        breakpoints: points.into_iter().map(|z| (z, value(z))).collect(),
        max_gap,
    })
}

/// A per-demand log-utility term `u <= G(z)` in the shape the convex solver
/// consumes. Tangent cuts are seeded at the breakpoints of a chord model.
#[derive(Debug, Clone)]
pub struct LogUtilityFn {
    pub model: EnvelopeModel,
    pub variant: EnvelopeVariant,
    pub z_lo: f64,
    knots: Vec<f64>,
}

impl LogUtilityFn {
    pub fn new(
        model: EnvelopeModel,
        variant: EnvelopeVariant,
        pwl_points: usize,
    ) -> Result<Self, MeasureError> {
        let z_lo = model.z_min + Z_LO_OFFSET;
        let target = match variant {
            EnvelopeVariant::Hat => PwlTarget::Envelope,
            EnvelopeVariant::Breve => PwlTarget::Under,
        };
        let pwl = build_pwl(&model, target, z_lo, pwl_points.max(3))?;
        Ok(Self {
            model,
            variant,
            z_lo,
            knots: pwl.breakpoints.iter().map(|b| b.0).collect(),
        })
    }

    pub fn shared(
        model: EnvelopeModel,
        variant: EnvelopeVariant,
        pwl_points: usize,
    ) -> Result<Arc<dyn ConcaveFn>, MeasureError> {
        Ok(Arc::new(Self::new(model, variant, pwl_points)?))
    }
}

impl ConcaveFn for LogUtilityFn {
    fn domain(&self) -> (f64, f64) {
        (self.z_lo, 0.0)
    }

    fn value(&self, z: f64) -> f64 {
        self.model
            .value(self.variant, z.clamp(self.z_lo, 0.0))
            .expect("clamped into the domain")
    }

    fn slope(&self, z: f64) -> f64 {
        self.model
            .slope(self.variant, z.clamp(self.z_lo, 0.0))
            .expect("clamped into the domain")
    }

    fn initial_knots(&self) -> Vec<f64> {
        self.knots.clone()
    }

    fn label(&self) -> String {
        format!("{}_{}", self.model.kind, self.variant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_values() {
        assert_eq!(eval_measure(MeasureKind::Negativity, 1.0), 0.5);
        assert_eq!(eval_measure(MeasureKind::Negativity, 1.0 / 3.0), 0.0);
        assert_eq!(eval_measure(MeasureKind::Skf, 1.0), 1.0);
        assert_eq!(eval_measure(MeasureKind::De, 1.0), 1.0);
        assert_eq!(eval_f(MeasureKind::Skf, 0.0), Some(0.0));
        assert_eq!(eval_f(MeasureKind::Negativity, (1.0f64 / 3.0).ln()), None);
    }

    #[test]
    fn parse_names() {
        assert_eq!("SKF".parse::<MeasureKind>().unwrap(), MeasureKind::Skf);
        assert_eq!(
            "neg".parse::<MeasureKind>().unwrap(),
            MeasureKind::Negativity
        );
        assert!("fidelity".parse::<MeasureKind>().is_err());
    }

    #[test]
    fn negativity_model_is_trivial() {
        let m = envelope(MeasureKind::Negativity).unwrap();
        assert!(m.is_trivial());
        let z = -0.5;
        assert_eq!(
            m.eval_envelope(z).unwrap(),
            eval_f(MeasureKind::Negativity, z).unwrap()
        );
        assert_eq!(
            m.eval_under(z).unwrap(),
            eval_f(MeasureKind::Negativity, z).unwrap()
        );
    }
}
