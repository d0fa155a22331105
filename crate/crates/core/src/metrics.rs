//! Episode-level metrics shared by training, evaluation and reporting.

use serde::{Deserialize, Serialize};

use crate::factory::StepMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Train,
    Eval,
}

/// Aggregates of one episode. Loads are per-step means, over/underflow
/// masses and processing time are episode totals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    /// Mean AMR precision over agents and steps, percent.
    pub precision_pct: f64,
    pub processing_time_min: f64,
    pub avg_load_amr_kg: f64,
    pub avg_load_warehouse_kg: f64,
    pub overflow_amr_kg: f64,
    pub overflow_warehouse_kg: f64,
    pub underflow_amr_kg: f64,
    pub underflow_warehouse_kg: f64,
}

impl EpisodeSummary {
    pub const COLUMNS: [&'static str; 9] = [
        "total_reward",
        "precision_pct",
        "processing_time_min",
        "avg_load_amr_kg",
        "avg_load_warehouse_kg",
        "overflow_amr_kg",
        "overflow_warehouse_kg",
        "underflow_amr_kg",
        "underflow_warehouse_kg",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.total_reward,
            self.precision_pct,
            self.processing_time_min,
            self.avg_load_amr_kg,
            self.avg_load_warehouse_kg,
            self.overflow_amr_kg,
            self.overflow_warehouse_kg,
            self.underflow_amr_kg,
            self.underflow_warehouse_kg,
        ]
    }
}

/// Running accumulator over the steps of one episode.
#[derive(Debug, Clone, Default)]
pub struct EpisodeAccumulator {
    steps: usize,
    sum: EpisodeSummary,
}

impl EpisodeAccumulator {
    pub fn push(&mut self, reward: f64, m: &StepMetrics) {
        self.steps += 1;
        let s = &mut self.sum;
        s.total_reward += reward;
        s.precision_pct += 100.0 * m.precision;
        s.processing_time_min += m.processing_time;
        s.avg_load_amr_kg += m.mean_amr_load;
        s.avg_load_warehouse_kg += m.mean_warehouse_load;
        s.overflow_amr_kg += m.overflow_amr;
        s.overflow_warehouse_kg += m.overflow_warehouse;
        s.underflow_amr_kg += m.underflow_amr;
        s.underflow_warehouse_kg += m.underflow_warehouse;
    }

    pub fn finish(self) -> EpisodeSummary {
        let mut s = self.sum;
        let n = self.steps.max(1) as f64;
        s.precision_pct /= n;
        s.avg_load_amr_kg /= n;
        s.avg_load_warehouse_kg /= n;
        s
    }
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub scheme: String,
    pub seed: u64,
    pub kind: RecordKind,
    /// Training epoch, or evaluation iteration for `eval` rows.
    pub epoch: usize,
    pub total_reward: f64,
    pub precision_pct: f64,
    pub processing_time_min: f64,
    pub avg_load_amr_kg: f64,
    pub avg_load_warehouse_kg: f64,
    pub overflow_amr_kg: f64,
    pub overflow_warehouse_kg: f64,
    pub underflow_amr_kg: f64,
    pub underflow_warehouse_kg: f64,
}

impl MetricsRecord {
    pub fn new(scheme: &str, seed: u64, kind: RecordKind, epoch: usize, s: &EpisodeSummary) -> Self {
        Self {
            scheme: scheme.to_string(),
            seed,
            kind,
            epoch,
            total_reward: s.total_reward,
            precision_pct: s.precision_pct,
            processing_time_min: s.processing_time_min,
            avg_load_amr_kg: s.avg_load_amr_kg,
            avg_load_warehouse_kg: s.avg_load_warehouse_kg,
            overflow_amr_kg: s.overflow_amr_kg,
            overflow_warehouse_kg: s.overflow_warehouse_kg,
            underflow_amr_kg: s.underflow_amr_kg,
            underflow_warehouse_kg: s.underflow_warehouse_kg,
        }
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary {
            total_reward: self.total_reward,
            precision_pct: self.precision_pct,
            processing_time_min: self.processing_time_min,
            avg_load_amr_kg: self.avg_load_amr_kg,
            avg_load_warehouse_kg: self.avg_load_warehouse_kg,
            overflow_amr_kg: self.overflow_amr_kg,
            overflow_warehouse_kg: self.overflow_warehouse_kg,
            underflow_amr_kg: self.underflow_amr_kg,
            underflow_warehouse_kg: self.underflow_warehouse_kg,
        }
    }
}
