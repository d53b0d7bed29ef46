//! Optimal rate allocation for a fixed routing.
//!
//! Maximises `sum_i ln x_i + G_i(z_i)` with `z_i = sum_{j on path i} ln(1 - sigma_j)`
//! and `sigma_j = sum_{i using j} x_i / d_j`, where `G_i` is the chosen concave
//! stand-in of the demand's log-measure. The objective tends to minus infinity
//! on the boundary of its domain, so a damped Newton method that never leaves
//! the domain solves it without explicit constraints.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::measures::{
    eval_f, f_derivatives, EnvelopeModel, EnvelopeVariant, MeasureError, Measures,
};
use crate::topology::{NetworkModel, RoutingMatrix};

/// Largest admissible congestion fraction on any link.
pub const SIGMA_MAX: f64 = 1.0 - 1e-9;
const MAX_NEWTON_ITER: usize = 500;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QnumError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("routing has {got} paths but {expected} demands were given")]
    Shape { got: usize, expected: usize },
    #[error("demand {0} has an empty path")]
    EmptyPath(usize),
    #[error("no allocation with positive utility exists")]
    InfeasiblePositiveUtility,
    #[error("Newton iteration stalled after {iterations} steps (decrement {decrement:e})")]
    NotConverged { iterations: usize, decrement: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub rates: Vec<f64>,
    /// Congestion fraction of every link of the network (zero when unused).
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
    /// `ln x_i + G_i(z_i)` per demand.
    pub terms: Vec<f64>,
    pub log_utility: f64,
    /// The same allocation scored with the exact log-measures.
    pub exact_log_utility: f64,
    pub iterations: usize,
}

/// Per-demand log-utility terms of `rates` under `routing`, or `None` when the
/// allocation leaves the domain (non-positive rate, saturated link, vanishing measure).
pub fn evaluate_allocation(
    network: &NetworkModel,
    routing: &RoutingMatrix,
    models: &[&EnvelopeModel],
    variant: Option<EnvelopeVariant>,
    rates: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let sigma = congestion(network, routing, rates);
    let mut z = Vec::with_capacity(rates.len());
    let mut terms = Vec::with_capacity(rates.len());
    for (i, links) in routing.path_links.iter().enumerate() {
        if !(rates[i] > 0.0) {
            return None;
        }
        let mut zi = 0.0;
        for &j in links {
            if sigma[j] >= 1.0 {
                return None;
            }
            zi += (-sigma[j]).ln_1p();
        }
        let g = match variant {
            Some(v) => models[i].value(v, zi)?,
            None => eval_f(models[i].kind, zi)?,
        };
        z.push(zi);
        terms.push(rates[i].ln() + g);
    }
    Some((z, terms))
}

/// Congestion fraction of every link under `rates`.
pub fn congestion(network: &NetworkModel, routing: &RoutingMatrix, rates: &[f64]) -> Vec<f64> {
    let mut sigma = vec![0.0; network.num_links()];
    for (i, links) in routing.path_links.iter().enumerate() {
        for &j in links {
            sigma[j] += rates[i] / network.d(j);
        }
    }
    sigma
}

struct Problem<'a> {
    network: &'a NetworkModel,
    routing: &'a RoutingMatrix,
    models: Vec<&'static EnvelopeModel>,
    variant: EnvelopeVariant,
    /// Per-variable scale: rates are optimised as `x_i = scale_i * y_i`.
    scale: Vec<f64>,
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    neg_hess: DMatrix<f64>,
}

impl Problem<'_> {
    fn rates(&self, y: &DVector<f64>) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(a, b)| a * b).collect()
    }

    fn value(&self, y: &DVector<f64>) -> Option<f64> {
        let x = self.rates(y);
        let sigma = congestion(self.network, self.routing, &x);
        let mut total = 0.0;
        for (i, links) in self.routing.path_links.iter().enumerate() {
            if !(x[i] > 0.0) {
                return None;
            }
            let mut z = 0.0;
            for &j in links {
                if sigma[j] > SIGMA_MAX {
                    return None;
                }
                z += (-sigma[j]).ln_1p();
            }
            total += x[i].ln() + self.models[i].value(self.variant, z)?;
        }
        Some(total)
    }

    /// `(G, G', G'')` of demand `i` at `z`.
    fn g_derivs(&self, i: usize, z: f64) -> Option<(f64, f64, f64)> {
        let m = self.models[i];
        let g = m.value(self.variant, z)?;
        let piece = match self.variant {
            EnvelopeVariant::Hat => m.hat,
            EnvelopeVariant::Breve => m.under,
        };
        match piece {
            Some(t) if z > t.knot => Some((g, t.slope, 0.0)),
            _ => {
                let (_, g1, g2) = f_derivatives(m.kind, z.min(-1e-300))?;
                Some((g, g1, g2))
            }
        }
    }

    fn local(&self, y: &DVector<f64>) -> Option<Local> {
        let k = y.len();
        let x = self.rates(y);
        let sigma = congestion(self.network, self.routing, &x);
        let mut value = 0.0;
        let mut grad = DVector::zeros(k);
        let mut neg_hess = DMatrix::zeros(k, k);
        for i in 0..k {
            if !(x[i] > 0.0) {
                return None;
            }
            value += x[i].ln();
            grad[i] += 1.0 / x[i];
            neg_hess[(i, i)] += 1.0 / (x[i] * x[i]);
        }
        for (m, links) in self.routing.path_links.iter().enumerate() {
            let mut z = 0.0;
            // dz_m/dx_i and d2z_m/dx_i dx_i'
            let mut dz = DVector::zeros(k);
            let mut d2z = DMatrix::zeros(k, k);
            for &j in links {
                if sigma[j] > SIGMA_MAX {
                    return None;
                }
                z += (-sigma[j]).ln_1p();
                let dj = self.network.d(j);
                let slack = 1.0 - sigma[j];
                let users: Vec<usize> = (0..k)
                    .filter(|&i| self.routing.entries[j][i] == 1)
                    .collect();
                for &a in &users {
                    dz[a] -= 1.0 / (dj * slack);
                    for &b in &users {
                        d2z[(a, b)] -= 1.0 / (dj * dj * slack * slack);
                    }
                }
            }
            let (g, g1, g2) = self.g_derivs(m, z)?;
            value += g;
            grad += &dz * g1;
            neg_hess -= (&dz * dz.transpose()) * g2 + d2z * g1;
        }
        // back to the scaled variables
        let s = DVector::from_vec(self.scale.clone());
        let grad = grad.component_mul(&s);
        let neg_hess = DMatrix::from_fn(k, k, |a, b| neg_hess[(a, b)] * s[a] * s[b]);
        Some(Local {
            value,
            grad,
            neg_hess,
        })
    }
}

/// Solves the fixed-routing allocation problem.
pub fn optimize_allocation(
    network: &NetworkModel,
    routing: &RoutingMatrix,
    measures: &Measures,
    variant: EnvelopeVariant,
) -> Result<AllocationResult, QnumError> {
    let k = routing.num_demands();
    if measures.kinds.len() != k {
        return Err(QnumError::Shape {
            got: k,
            expected: measures.kinds.len(),
        });
    }
    let models = (0..k)
        .map(|i| measures.model(i))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, links) in routing.path_links.iter().enumerate() {
        if links.is_empty() {
            return Err(QnumError::EmptyPath(i));
        }
    }
    let loads = routing.link_loads();
    let scale: Vec<f64> = routing
        .path_links
        .iter()
        .map(|links| {
            links
                .iter()
                .map(|&j| network.d(j) / loads[j] as f64)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let problem = Problem {
        network,
        routing,
        models: models.clone(),
        variant,
        scale,
    };

    // uniform start: every link at congestion c keeps each z_i >= z_min / 2
    let longest = routing.path_links.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let z_floor = models
        .iter()
        .map(|m| m.z_min)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = -(0.5 * z_floor / longest).exp_m1();
    let mut y = DVector::from_element(k, c);
    if problem.value(&y).is_none() {
        return Err(QnumError::InfeasiblePositiveUtility);
    }

    let mut iterations = 0;
    let mut decrement = f64::INFINITY;
    while iterations < MAX_NEWTON_ITER {
        iterations += 1;
        let local = problem
            .local(&y)
            .ok_or(QnumError::InfeasiblePositiveUtility)?;
        let step = match local.neg_hess.clone().cholesky() {
            Some(ch) => ch.solve(&local.grad),
            None => {
                let reg = &local.neg_hess
                    + DMatrix::identity(k, k) * 1e-12 * local.neg_hess.diagonal().max();
                match reg.cholesky() {
                    Some(ch) => ch.solve(&local.grad),
                    None => local.grad.clone(),
                }
            }
        };
        decrement = local.grad.dot(&step);
        if decrement < 1e-20 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-16 {
            let trial = &y + &step * t;
            if let Some(v) = problem.value(&trial) {
                if v >= local.value + 0.25 * t * decrement {
                    y = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // no further progress is representable in floating point
            if decrement < 1e-9 {
                break;
            }
            return Err(QnumError::NotConverged {
                iterations,
                decrement,
            });
        }
        if decrement < 1e-14 && t == 1.0 {
            break;
        }
    }
    if decrement > 1e-9 && iterations >= MAX_NEWTON_ITER {
        return Err(QnumError::NotConverged {
            iterations,
            decrement,
        });
    }

    let rates = problem.rates(&y);
    let sigma = congestion(network, routing, &rates);
    let (z, terms) = evaluate_allocation(network, routing, &models, Some(variant), &rates)
        .ok_or(QnumError::InfeasiblePositiveUtility)?;
    let exact_log_utility = z
        .iter()
        .zip(&rates)
        .enumerate()
        .map(|(i, (&zi, &xi))| xi.ln() + eval_f(models[i].kind, zi).unwrap_or(f64::NEG_INFINITY))
        .sum();
    Ok(AllocationResult {
        log_utility: terms.iter().sum(),
        rates,
        sigma,
        z,
        terms,
        exact_log_utility,
        iterations,
    })
}
