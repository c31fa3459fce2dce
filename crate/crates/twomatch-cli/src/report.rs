//! JSON report shapes; field order is the serialization order.

use serde::Serialize;
use twomatch_core::hamilton::HamFailure;

#[derive(Serialize)]
pub struct TwoGreedyTrial {
    pub trial: usize,
    pub kappa_total: usize,
    pub kappa_nontrivial: usize,
    pub final_y: usize,
    pub final_z: usize,
    pub final_mu: usize,
    pub final_lambda: f64,
    pub max_zeta: usize,
    pub new_path_events: usize,
    pub exposed_after_matching: usize,
    pub steps: usize,
    pub wall_ms: u64,
}

#[derive(Serialize)]
pub struct HamiltonTrial {
    pub trial: usize,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<HamFailure>,
    pub boosters_examined: usize,
    pub rrs_executions: usize,
    pub kappa_before: usize,
    pub max_zeta: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<u32>>,
    pub wall_ms: u64,
}

#[derive(Serialize)]
pub struct Aggregate {
    pub mean_kappa_nontrivial: f64,
    pub max_kappa_nontrivial: usize,
    pub max_zeta: usize,
    pub successes: usize,
    pub mean_wall_ms: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum Trials {
    TwoGreedy(Vec<TwoGreedyTrial>),
    Hamilton(Vec<HamiltonTrial>),
}

#[derive(Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: &'static str,
    pub n: usize,
    pub c: f64,
    pub seed: u64,
    pub trials: Trials,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn two_greedy(n: usize, c: f64, seed: u64, trials: Vec<TwoGreedyTrial>) -> Self {
        let k = trials.len().max(1) as f64;
        let aggregate = Aggregate {
            mean_kappa_nontrivial: trials.iter().map(|t| t.kappa_nontrivial as f64).sum::<f64>()
                / k,
            max_kappa_nontrivial: trials.iter().map(|t| t.kappa_nontrivial).max().unwrap_or(0),
            max_zeta: trials.iter().map(|t| t.max_zeta).max().unwrap_or(0),
            successes: trials.len(),
            mean_wall_ms: trials.iter().map(|t| t.wall_ms as f64).sum::<f64>() / k,
        };
        RunReport {
            schema: 1,
            command: "twogreedy",
            n,
            c,
            seed,
            trials: Trials::TwoGreedy(trials),
            aggregate,
        }
    }

    pub fn hamilton(n: usize, c: f64, seed: u64, trials: Vec<HamiltonTrial>) -> Self {
        let k = trials.len().max(1) as f64;
        let aggregate = Aggregate {
            mean_kappa_nontrivial: trials.iter().map(|t| t.kappa_before as f64).sum::<f64>() / k,
            max_kappa_nontrivial: trials.iter().map(|t| t.kappa_before).max().unwrap_or(0),
            max_zeta: trials.iter().map(|t| t.max_zeta).max().unwrap_or(0),
            successes: trials.iter().filter(|t| t.success).count(),
            mean_wall_ms: trials.iter().map(|t| t.wall_ms as f64).sum::<f64>() / k,
        };
        RunReport {
            schema: 1,
            command: "hamilton",
            n,
            c,
            seed,
            trials: Trials::Hamilton(trials),
            aggregate,
        }
    }
}
