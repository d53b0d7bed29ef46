use std::fmt::Debug;

/// A concave, non-decreasing scalar function used in `u <= g(z)` atoms.
///
/// The solver realizes the hypograph through tangent cuts, so only values and
/// supergradients are needed.
pub trait ConcaveFn: Send + Sync + Debug {
    /// Interval `[lo, hi]` on which `value` is finite.
    fn domain(&self) -> (f64, f64);
    fn value(&self, z: f64) -> f64;
    /// A supergradient at `z`; for differentiable points, the derivative.
    fn slope(&self, z: f64) -> f64;
    /// Points whose tangents seed the outer approximation.
    fn initial_knots(&self) -> Vec<f64>;
    fn label(&self) -> String {
        "g".into()
    }
}

/// Tangent line `u <= slope * z + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentCut {
    pub knot: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl TangentCut {
    pub fn at(func: &dyn ConcaveFn, z: f64) -> Self {
        let value = func.value(z);
        let slope = func.slope(z);
        TangentCut {
            knot: z,
            slope,
            intercept: value - slope * z,
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.slope * z + self.intercept
    }
}

/// Outer-approximation cuts per concave atom. Cuts stay valid for every
/// restriction of the program, so a pool is shared by all branch-and-bound nodes.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<Vec<TangentCut>>,
    /// Most recent relaxation value of each atom's `z`.
    last_z: Vec<Option<f64>>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn ensure_atoms(&mut self, n: usize) {
        if self.cuts.len() < n {
            self.cuts.resize_with(n, Vec::new);
            self.last_z.resize(n, None);
        }
    }

    pub fn cuts(&self, atom: usize) -> &[TangentCut] {
        self.cuts.get(atom).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Returns false if an (almost) identical knot is already present.
    pub fn add(&mut self, atom: usize, cut: TangentCut) -> bool {
        self.insert(atom, cut).1
    }

    /// Index of the cut with `cut`'s knot, and whether it was new.
    pub(crate) fn insert(&mut self, atom: usize, cut: TangentCut) -> (usize, bool) {
        self.ensure_atoms(atom + 1);
        let list = &mut self.cuts[atom];
        let tol = 1e-12 * (1.0 + cut.knot.abs());
        if let Some(i) = list.iter().position(|c| (c.knot - cut.knot).abs() <= tol) {
            return (i, false);
        }
        list.push(cut);
        (list.len() - 1, true)
    }

    pub fn total(&self) -> usize {
        self.cuts.iter().map(Vec::len).sum()
    }

    pub fn is_seeded(&self, atom: usize) -> bool {
        !self.cuts(atom).is_empty()
    }

    pub(crate) fn last_z(&self, atom: usize) -> Option<f64> {
        self.last_z.get(atom).copied().flatten()
    }

    pub(crate) fn set_last_z(&mut self, atom: usize, z: f64) {
        self.ensure_atoms(atom + 1);
        self.last_z[atom] = Some(z);
    }

    /// Indices of the `count` cuts whose knots are closest to `z`.
    pub(crate) fn nearest(&self, atom: usize, z: f64, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.cuts(atom).len()).collect();
        let list = self.cuts(atom);
        idx.sort_by(|&a, &b| {
            (list[a].knot - z)
                .abs()
                .total_cmp(&(list[b].knot - z).abs())
                .then(a.cmp(&b))
        });
        idx.truncate(count);
        idx
    }

    /// Cuts whose knots are nearest to `count` evenly spaced points of the knot range.
    pub(crate) fn spread(&self, atom: usize, count: usize) -> Vec<usize> {
        let list = self.cuts(atom);
        if list.len() <= count || count < 2 {
            return (0..list.len()).collect();
        }
        let lo = list.iter().map(|c| c.knot).fold(f64::INFINITY, f64::min);
        let hi = list
            .iter()
            .map(|c| c.knot)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<usize> = (0..count)
            .map(|i| {
                let z = lo + (hi - lo) * i as f64 / (count - 1) as f64;
                self.nearest(atom, z, 1)[0]
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
