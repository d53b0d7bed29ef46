use serde::Serialize;

use crate::measures::{eval_f, EnvelopeVariant, MeasureKind, Measures};
use crate::qnum::{evaluate_allocation, AllocationResult};
use crate::topology::{NetworkModel, RoutingMatrix};

/// A routing with its rate allocation and utilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingSolution {
    #[serde(skip)]
    pub routing: RoutingMatrix,
    pub paths: Vec<Vec<usize>>,
    pub rates: Vec<f64>,
    pub z: Vec<f64>,
    /// `ln x_i + G_i(z_i)` with the stand-in selected by `variant`.
    pub terms: Vec<f64>,
    pub log_utility: f64,
    /// The same allocation scored with the exact log-measures.
    pub exact_log_utility: f64,
    pub kinds: Vec<MeasureKind>,
    pub variant: EnvelopeVariant,
}

impl RoutingSolution {
    pub fn from_allocation(
        routing: RoutingMatrix,
        alloc: AllocationResult,
        measures: &Measures,
        variant: EnvelopeVariant,
    ) -> Self {
        Self {
            paths: routing.paths.clone(),
            routing,
            rates: alloc.rates,
            z: alloc.z,
            terms: alloc.terms,
            log_utility: alloc.log_utility,
            exact_log_utility: alloc.exact_log_utility,
            kinds: measures.kinds.clone(),
            variant,
        }
    }

    /// Product-form network utility.
    pub fn utility(&self) -> f64 {
        self.log_utility.exp()
    }

    /// Recomputes the log-utility from the rates and routing alone; `None` if
    /// the allocation violates a capacity or leaves the measure's domain.
    pub fn recompute(&self, network: &NetworkModel) -> Option<f64> {
        let models = self
            .kinds
            .iter()
            .map(|&k| crate::measures::envelope(k).ok())
            .collect::<Option<Vec<_>>>()?;
        let (_, terms) = evaluate_allocation(
            network,
            &self.routing,
            &models,
            Some(self.variant),
            &self.rates,
        )?;
        Some(terms.iter().sum())
    }

    /// Exact-measure log-utility recomputed from the rates.
    pub fn recompute_exact(&self, network: &NetworkModel) -> Option<f64> {
        let models = self
            .kinds
            .iter()
            .map(|&k| crate::measures::envelope(k).ok())
            .collect::<Option<Vec<_>>>()?;
        let (z, _) = evaluate_allocation(network, &self.routing, &models, None, &self.rates)?;
        z.iter()
            .zip(&self.rates)
            .zip(&self.kinds)
            .map(|((&zi, &xi), &kind)| eval_f(kind, zi).map(|f| xi.ln() + f))
            .sum()
    }

    /// Largest relative capacity overshoot `sum_i a_ji x_i / d_j - 1` (negative when slack).
    pub fn capacity_excess(&self, network: &NetworkModel) -> f64 {
        crate::qnum::congestion(network, &self.routing, &self.rates)
            .into_iter()
            .map(|s| s - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
