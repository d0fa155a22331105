//! Time-phased schedules of incoming-load precision.
//!
//! Scenario files are TOML with one `[[phase]]` table per phase:
//!
//! ```toml
//! [[phase]]
//! start_minute = 0
//! precision = "catalog"          # draw per agent from the precision catalog
//!
//! [[phase]]
//! start_minute = 30
//! precision = 0.619              # fixed precision for every agent
//!
//! [[phase]]
//! start_minute = 40
//! precision = { uniform = [0.619, 0.971] }
//! ```

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrecisionSource {
    Fixed(f64),
    Uniform { uniform: (f64, f64) },
    Named(NamedSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedSource {
    Catalog,
}

impl PrecisionSource {
    pub const CATALOG: Self = PrecisionSource::Named(NamedSource::Catalog);

    pub fn sample<R: Rng + ?Sized>(&self, catalog: &[f64], rng: &mut R) -> f64 {
        match *self {
            PrecisionSource::Fixed(p) => p,
            PrecisionSource::Uniform { uniform: (lo, hi) } => lo + (hi - lo) * rng.gen::<f64>(),
            PrecisionSource::Named(NamedSource::Catalog) => catalog[rng.gen_range(0..catalog.len())],
        }
    }

    fn validate(&self) -> Result<(), String> {
        let in_range = |p: f64| p > 0.0 && p <= 1.0;
        match *self {
            PrecisionSource::Fixed(p) if !in_range(p) => Err(format!("precision {p} outside (0, 1]")),
            PrecisionSource::Uniform { uniform: (lo, hi) } if !(in_range(lo) && in_range(hi) && lo <= hi) => {
                Err(format!("uniform range [{lo}, {hi}] invalid"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub start_minute: f64,
    pub precision: PrecisionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "phase", default)]
    pub phases: Vec<Phase>,
}

impl Scenario {
    /// Training setting: every agent draws its precision from the catalog.
    pub fn training() -> Self {
        Self { phases: vec![Phase { start_minute: 0.0, precision: PrecisionSource::CATALOG }] }
    }

    /// Catalog-random until minute 30, then 61.9%, 95.8% and 97.1% for ten
    /// minutes each.
    pub fn four_phase() -> Self {
        let fixed = |start_minute, p| Phase { start_minute, precision: PrecisionSource::Fixed(p) };
        Self {
            phases: vec![
                Phase { start_minute: 0.0, precision: PrecisionSource::CATALOG },
                fixed(30.0, 0.619),
                fixed(40.0, 0.958),
                fixed(50.0, 0.971),
            ],
        }
    }

    pub fn constant(precision: f64) -> Self {
        Self { phases: vec![Phase { start_minute: 0.0, precision: PrecisionSource::Fixed(precision) }] }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| EnvError::Scenario(e.message().to_string()))?;
        scenario.validate(None)?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks ordering and, when `horizon_minutes` is given, that the
    /// schedule starts at minute 0 and every phase begins inside the horizon.
    pub fn validate(&self, horizon_minutes: Option<f64>) -> Result<(), EnvError> {
        let first = self
            .phases
            .first()
            .ok_or_else(|| EnvError::Scenario("scenario has no phases".into()))?;
        if first.start_minute != 0.0 {
            return Err(EnvError::Scenario(format!(
                "first phase starts at minute {}, leaving the start of the horizon uncovered",
                first.start_minute
            )));
        }
        for pair in self.phases.windows(2) {
            if pair[1].start_minute <= pair[0].start_minute {
                return Err(EnvError::Scenario("phase start minutes must increase".into()));
            }
        }
        for phase in &self.phases {
            phase.precision.validate().map_err(EnvError::Scenario)?;
            if let Some(h) = horizon_minutes {
                if phase.start_minute >= h {
                    return Err(EnvError::Scenario(format!(
                        "phase at minute {} starts after the {h}-minute horizon",
                        phase.start_minute
                    )));
                }
            }
        }
        Ok(())
    }

    /// Index of the phase in effect at `minute`.
    pub fn phase_at(&self, minute: f64) -> usize {
        self.phases.iter().rposition(|p| p.start_minute <= minute).unwrap_or(0)
    }
}
