//! Versioned JSON reports.

use serde::{Deserialize, Serialize};

use semismooth::bundle::{IterationRecord, SolveOptions, SolveStatus};
use semismooth::verify::{ClarkeReport, RatioProfile};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub schema_version: u32,
    pub problem: String,
    pub options: SolveOptions,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub oracle_calls: usize,
    pub serious_steps: usize,
    pub trace: Vec<IterationRecord>,
    pub x: Vec<f64>,
    pub theta: f64,
    pub stationarity: f64,
    /// Omitted with `--no-timing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRatio {
    pub point: Vec<f64>,
    pub profile: RatioProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClarke {
    pub point: Vec<f64>,
    pub report: ClarkeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum VerifyDetail {
    Ss {
        points: Vec<PointRatio>,
    },
    Clarke {
        points: Vec<PointClarke>,
    },
    Singleton {
        lo: Vec<f64>,
        hi: Vec<f64>,
        n_samples: usize,
        fraction: f64,
        threshold: f64,
    },
    Scdss {
        points: Vec<PointRatio>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub schema_version: u32,
    pub problem: String,
    pub seed: u64,
    pub pass: bool,
    pub detail: VerifyDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListEntry {
    pub name: String,
    pub dim: usize,
    pub description: String,
    pub has_objective: bool,
    pub has_scd: bool,
}
