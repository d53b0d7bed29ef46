use std::path::Path;

use anyhow::{Context, Result};
use entroute::heuristics::HeuristicError;
use entroute::measures::MeasureError;
use entroute::oracle::OracleError;
use entroute::routing_micp::MicpError;
use entroute::topology::{NetworkModel, TopologyError};
use serde::{Deserialize, Serialize};

use crate::modes::{KPoint, Mode};
use crate::Args;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub k: usize,
    pub mode: String,
    pub stat: String,
    pub value: f64,
    pub seed: Option<u64>,
    pub wall_ms: Option<u64>,
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    if rows.is_empty() {
        w.write_record(["k", "mode", "stat", "value", "seed", "wall_ms"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub topology: String,
    /// Set when the topology file marks its link lengths as stand-ins.
    pub placeholder_lengths: bool,
    pub nodes: usize,
    pub links: usize,
    pub demands: usize,
    pub measure: String,
    pub envelope: String,
    pub seed: Option<u64>,
    pub samples: usize,
    pub gap: f64,
    pub epsilon: Option<f64>,
    pub pwl_points: usize,
    pub modes: Vec<Mode>,
    pub k: Vec<usize>,
    pub points: Vec<KPoint>,
}

impl Summary {
    pub fn new(
        args: &Args,
        topology: &Path,
        network: &NetworkModel,
        demands: usize,
        ks: &[usize],
        modes: &[Mode],
    ) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(topology)?)?;
        Ok(Self {
            topology: topology.display().to_string(),
            placeholder_lengths: raw
                .get("placeholder_lengths")
                .and_then(serde_json::Value::as_bool)
                .unwrap_or(false),
            nodes: network.num_nodes(),
            links: network.num_links(),
            demands,
            measure: args.measure.clone(),
            envelope: entroute::measures::EnvelopeVariant::from(args.envelope).to_string(),
            seed: args.seed,
            samples: args.samples,
            gap: args.gap,
            epsilon: args.epsilon,
            pwl_points: args.pwl_points,
            modes: modes.to_vec(),
            k: ks.to_vec(),
            points: Vec::new(),
        })
    }

    pub fn push(&mut self, point: KPoint) {
        self.points.push(point);
    }
}

/// Machine-readable failure written to stderr and `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    /// Module that failed: topology, measures, routing_micp, heuristics, oracle or cli.
    pub kind: &'static str,
    pub message: String,
    /// Context chain, outermost first.
    pub chain: Vec<String>,
}

impl ErrorRecord {
    pub fn from_error(e: &anyhow::Error) -> Self {
        let kind = e
            .chain()
            .find_map(|c| {
                if c.is::<TopologyError>() {
                    Some("topology")
                } else if c.is::<MeasureError>() {
                    Some("measures")
                } else if c.is::<MicpError>() {
                    Some("routing_micp")
                } else if c.is::<HeuristicError>() {
                    Some("heuristics")
                } else if c.is::<OracleError>() {
                    Some("oracle")
                } else {
                    None
                }
            })
            .unwrap_or("cli");
        Self {
            error: ErrorBody {
                kind,
                message: e.root_cause().to_string(),
                chain: e.chain().map(ToString::to_string).collect(),
            },
        }
    }
}
