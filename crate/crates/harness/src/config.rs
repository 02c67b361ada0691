//! Experiment specification files.
//!
//! A spec is a TOML document. Top-level keys describe the sweep; optional
//! tables tune individual experiment kinds:
//!
//! ```toml
//! name = "gamma-iid"
//! kind = "gamma-sweep"          # delta-sweep | gamma-sweep | rician-gamma-sweep
//!                               # | runtime-scaling | oracle-compare | ota-fl
//! seed = 7
//! trials = 2000
//! devices = 20                  # K
//! antennas = 6                  # N
//! elements = 0                  # M, IRS elements (mp-tuned / mp-frozen only)
//! gamma_db = [-10.0, -7.0, -4.0]
//! delta = [0.05]
//! variants = ["mp", "bidirectional"]
//!
//! [runtime]                     # runtime-scaling only
//! devices = [20, 25, 30]
//! antennas = [6]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DeltaSweep,
    GammaSweep,
    RicianGammaSweep,
    RuntimeScaling,
    OracleCompare,
    OtaFl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Mp,
    Bidirectional,
    Random,
    Oracle,
    MpTuned,
    MpFrozen,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Mp => "mp",
            Variant::Bidirectional => "bidirectional",
            Variant::Random => "random",
            Variant::Oracle => "oracle",
            Variant::MpTuned => "mp-tuned",
            Variant::MpFrozen => "mp-frozen",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Variant::Mp,
            Variant::Bidirectional,
            Variant::Random,
            Variant::Oracle,
            Variant::MpTuned,
            Variant::MpFrozen,
        ]
        .into_iter()
        .find(|v| v.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeGrid {
    pub devices: Vec<usize>,
    pub antennas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Random receivers and random weightings per subset.
    pub candidates: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { candidates: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrsParams {
    pub cascade_variance: f64,
    pub alt_max: usize,
    pub bcd_sweeps: usize,
}

impl Default for IrsParams {
    fn default() -> Self {
        Self {
            cascade_variance: 1.0,
            alt_max: otasched::irs::DEFAULT_ALT_MAX,
            bcd_sweeps: otasched::irs::DEFAULT_BCD_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RicianParamsSpec {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for RicianParamsSpec {
    fn default() -> Self {
        Self {
            inner_radius: 10.0,
            outer_radius: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlParams {
    pub rounds: usize,
    /// Model dimension `D`.
    pub dim: usize,
    /// Training samples `L` shared out over devices.
    pub samples: usize,
    pub test_samples: usize,
    pub eps0: f64,
    pub eps1: f64,
    pub label_noise: f64,
    pub power: f64,
    pub noise_variance: f64,
    pub ridge: f64,
}

impl Default for FlParams {
    fn default() -> Self {
        Self {
            rounds: 6,
            dim: 10,
            samples: 20_000,
            test_samples: 2_000,
            eps0: 300.0,
            eps1: 500.0,
            label_noise: 1.0,
            power: 1.0,
            noise_variance: 0.1,
            ridge: 0.0,
        }
    }
}

fn default_delta() -> Vec<f64> {
    vec![0.05]
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Mp]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub devices: usize,
    pub antennas: usize,
    #[serde(default)]
    pub elements: usize,
    pub gamma_db: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: Vec<f64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    /// Output directory; the CSV is written as `<output>/<name>.csv`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub runtime: Option<RuntimeGrid>,
    #[serde(default)]
    pub oracle: OracleParams,
    #[serde(default)]
    pub irs: IrsParams,
    #[serde(default)]
    pub rician: RicianParamsSpec,
    #[serde(default)]
    pub fl: FlParams,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut bad = Vec::new();
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bad.push("name: must be a non-empty file stem".to_string());
        }
        if self.trials == 0 {
            bad.push("trials: must be at least 1".into());
        }
        if self.devices == 0 {
            bad.push("devices: must be at least 1".into());
        }
        if self.antennas == 0 {
            bad.push("antennas: must be at least 1".into());
        }
        if self.gamma_db.is_empty() {
            bad.push("gamma_db: grid is empty".into());
        }
        if self.gamma_db.iter().any(|g| !g.is_finite()) {
            bad.push("gamma_db: values must be finite".into());
        }
        if self.delta.is_empty() {
            bad.push("delta: grid is empty".into());
        }
        if self.delta.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            bad.push("delta: values must lie in (0, 1)".into());
        }
        if self.variants.is_empty() {
            bad.push("variants: list is empty".into());
        }
        let needs_irs = self.variants.iter().any(|v| matches!(v, Variant::MpTuned | Variant::MpFrozen));
        if self.elements > 0 && !needs_irs {
            bad.push("elements: only used by the mp-tuned and mp-frozen variants".into());
        }
        if self.variants.contains(&Variant::Oracle) && self.devices > 12 {
            bad.push("devices: the oracle variant supports at most 12 devices".into());
        }
        if self.kind == ExperimentKind::RicianGammaSweep && needs_irs {
            bad.push("variants: IRS variants need i.i.d. channels".into());
        }
        if !(self.rician.inner_radius > 0.0 && self.rician.inner_radius < self.rician.outer_radius) {
            bad.push("rician: need 0 < inner_radius < outer_radius".into());
        }
        if !(self.irs.cascade_variance >= 0.0) || self.irs.alt_max == 0 {
            bad.push("irs: need cascade_variance >= 0 and alt_max >= 1".into());
        }
        match self.kind {
            ExperimentKind::RuntimeScaling => match &self.runtime {
                _ if self.trials <= crate::experiment::WARM_UP_TRIALS => {
                    bad.push(format!(
                        "trials: runtime-scaling discards {} warm-up trials per cell, so needs more",
                        crate::experiment::WARM_UP_TRIALS
                    ));
                }
                None => bad.push("runtime: table required for runtime-scaling".into()),
                Some(r) => {
                    if r.devices.is_empty() || r.antennas.is_empty() {
                        bad.push("runtime: devices and antennas grids must be nonempty".into());
                    }
                    if r.devices.contains(&0) || r.antennas.contains(&0) {
                        bad.push("runtime: dimensions must be positive".into());
                    }
                }
            },
            ExperimentKind::OracleCompare => {
                if self.devices > 12 {
                    bad.push("devices: oracle-compare supports at most 12 devices".into());
                }
            }
            ExperimentKind::OtaFl => {
                let fl = &self.fl;
                if fl.rounds == 0 || fl.dim == 0 || fl.test_samples == 0 {
                    bad.push("fl: rounds, dim and test_samples must be positive".into());
                }
                if !(fl.eps0 > 0.0 && fl.eps0 < fl.eps1) {
                    bad.push("fl: need 0 < eps0 < eps1".into());
                }
                if !(fl.power > 0.0) || !(fl.noise_variance >= 0.0) || !(fl.ridge >= 0.0) || !(fl.label_noise >= 0.0) {
                    bad.push("fl: power must be positive; noise_variance, ridge and label_noise non-negative".into());
                }
                if self
                    .variants
                    .iter()
                    .any(|v| !matches!(v, Variant::Mp | Variant::Bidirectional))
                {
                    bad.push("variants: ota-fl supports mp and bidirectional".into());
                }
            }
            _ => {}
        }
        if self.kind != ExperimentKind::RuntimeScaling && self.runtime.is_some() {
            bad.push("runtime: only valid for runtime-scaling".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(bad))
        }
    }
}
