//! Run configuration files and the state-spec mini-language.
//!
//! Configuration is TOML with optional sections (JSON with the same layout is
//! also accepted):
//!
//! ```toml
//! [pointer]
//! sigma = 1.0          # pointer width
//! delta = 0.01         # coupling strength (same units as sigma)
//! grid_n = 1024
//! grid_span = 16.0     # in units of sigma
//!
//! [noise]
//! photon_budget = 1e6  # expected photons per frame
//! read_noise_std = 0.0
//! background_offset = 0.0
//! shot_noise = true
//! seed = 0
//!
//! [detector]
//! y_width = 1.0        # beam width along y; defaults to sigma
//!
//! [run]
//! frames = 100
//! mode = "exp2"        # or "exp1"
//!
//! [calibration]
//! auto = true                       # fill missing constants by a noiseless fit
//! d = "calibration_D.json"          # relative to the config file
//! a = "calibration_A.json"
//! states = ["hwp:0", "hwp:22.5", "R", "L"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{default_state_set, CalibrationConstants, CalibrationState, Outcome};
use crate::detector::NoiseModel;
use crate::error::{Error, Result};
use crate::pipeline::{Calibrations, ExperimentConfig, Mode};
use crate::pointer::PointerConfig;
use crate::qstate::{c, density_of, jones_output, DensityMatrix, Ket, Mat2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointerSection {
    pub sigma: f64,
    pub delta: f64,
    pub grid_n: usize,
    pub grid_span: f64,
}

impl Default for PointerSection {
    fn default() -> Self {
        let p = ExperimentConfig::default().pointer;
        Self { sigma: p.sigma, delta: p.delta, grid_n: p.grid_n, grid_span: p.grid_span }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub photon_budget: f64,
    pub read_noise_std: f64,
    pub background_offset: f64,
    pub shot_noise: bool,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseModel::default();
        Self {
            photon_budget: n.photon_budget,
            read_noise_std: n.read_noise_std,
            background_offset: n.background_offset,
            shot_noise: n.shot_noise,
            seed: n.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub y_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub frames: usize,
    pub mode: Mode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { frames: 100, mode: Mode::Exp2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub auto: bool,
    pub d: Option<PathBuf>,
    pub a: Option<PathBuf>,
    /// Pure-state specs; the built-in set is used when absent.
    pub states: Option<Vec<String>>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { auto: true, d: None, a: None, states: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub pointer: PointerSection,
    pub noise: NoiseSection,
    pub detector: DetectorSection,
    pub run: RunSection,
    pub calibration: CalibrationSection,
}

impl FileConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
        }
    }

    /// Reads a config file; relative calibration paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))?
        } else {
            Self::parse(&text)?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        for slot in [&mut cfg.calibration.d, &mut cfg.calibration.a] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Builds and validates the experiment configuration, loading calibration files.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut calibration = Calibrations::default();
        for (outcome, path) in [(Outcome::D, &self.calibration.d), (Outcome::A, &self.calibration.a)] {
            if let Some(path) = path {
                let cal = CalibrationConstants::load(path)?;
                if cal.outcome != outcome {
                    return Err(Error::Config(format!(
                        "{} holds constants for outcome {}, expected {}",
                        path.display(),
                        cal.outcome.name(),
                        outcome.name()
                    )));
                }
                calibration.set(cal);
            }
        }
        let cfg = ExperimentConfig {
            pointer: PointerConfig {
                sigma: self.pointer.sigma,
                delta: self.pointer.delta,
                grid_n: self.pointer.grid_n,
                grid_span: self.pointer.grid_span,
                ..PointerConfig::default()
            },
            noise: NoiseModel {
                photon_budget: self.noise.photon_budget,
                read_noise_std: self.noise.read_noise_std,
                background_offset: self.noise.background_offset,
                shot_noise: self.noise.shot_noise,
                seed: self.noise.seed,
            },
            frames: self.run.frames,
            y_width: self.detector.y_width,
            calibration,
            auto_calibrate: self.calibration.auto,
            mode: self.run.mode,
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn calibration_states(&self) -> Result<Vec<CalibrationState>> {
        match &self.calibration.states {
            None => Ok(default_state_set()),
            Some(specs) => specs
                .iter()
                .map(|s| {
                    let st = parse_state(s).map_err(|e| Error::Config(format!("calibration state: {e}")))?;
                    let ket = st.ket.ok_or_else(|| {
                        Error::Config(format!("calibration state {s} is not pure"))
                    })?;
                    Ok(CalibrationState::new(s.clone(), ket))
                })
                .collect(),
        }
    }

    /// SHA-256 of the configuration serialized as JSON with sorted keys.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        canonical_digest(&value)
    }
}

/// SHA-256 hex digest of a JSON value with object keys in sorted order.
pub fn canonical_digest(value: &serde_json::Value) -> String {
    fn sorted(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(m) => {
                let mut keys: Vec<_> = m.keys().collect();
                keys.sort();
                let mut out = serde_json::Map::new();
                for k in keys {
                    out.insert(k.clone(), sorted(&m[k]));
                }
                serde_json::Value::Object(out)
            }
            serde_json::Value::Array(a) => serde_json::Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    let text = serde_json::to_string(&sorted(value)).expect("value serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// A parsed state spec: the density matrix, and the ket when it is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub label: String,
    pub rho: DensityMatrix,
    pub ket: Option<Ket>,
}

impl StateSpec {
    fn pure(label: &str, ket: Ket) -> Self {
        Self { label: label.to_string(), rho: density_of(&ket), ket: Some(ket) }
    }
}

fn numbers(body: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let vals = body
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidState(format!("{what}: {e}")))?;
    if vals.len() != n || vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidState(format!("{what} needs {n} finite numbers")));
    }
    Ok(vals)
}

/// Parses a state spec:
///
/// * `H`, `V`, `D`, `A`, `R`, `L`, or `I` / `mixed` for the maximally mixed state;
/// * `hwp:22.5` or `hwp:22.5,qwp:45` — the wave-plate image of `|H⟩`;
/// * `ket:re,im,re,im` — amplitudes of `|H⟩` and `|V⟩`, normalized;
/// * `rho:` followed by 8 numbers — row-major `(re, im)` pairs, which must form
///   a valid density matrix.
pub fn parse_state(spec: &str) -> Result<StateSpec> {
    let s = spec.trim();
    let named = match s {
        "H" => Some(Ket::h()),
        "V" => Some(Ket::v()),
        "D" => Some(Ket::d()),
        "A" => Some(Ket::a()),
        "R" => Some(Ket::r()),
        "L" => Some(Ket::l()),
        _ => None,
    };
    if let Some(k) = named {
        return Ok(StateSpec::pure(s, k));
    }
    if s == "I" || s.eq_ignore_ascii_case("mixed") {
        return Ok(StateSpec { label: s.to_string(), rho: DensityMatrix::maximally_mixed(), ket: None });
    }
    if let Some(body) = s.strip_prefix("ket:") {
        let v = numbers(body, 4, "ket")?;
        let k = Ket::normalized(c(v[0], v[1]), c(v[2], v[3]))?;
        return Ok(StateSpec::pure(s, k));
    }
    if let Some(body) = s.strip_prefix("rho:") {
        let v = numbers(body, 8, "rho")?;
        let m = Mat2::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7]));
        let rho = DensityMatrix::new(m)?;
        let ket = (rho.purity() > 1.0 - 1e-9).then(|| rho.pure_ket(1e-6)).flatten();
        return Ok(StateSpec { label: s.to_string(), rho, ket });
    }
    if s.starts_with("hwp:") {
        let mut hwp = None;
        let mut qwp = None;
        for part in s.split(',') {
            let (key, val) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidState(format!("malformed wave-plate spec {s:?}")))?;
            let angle: f64 = val
                .trim()
                .parse()
                .ok()
                .filter(|a: &f64| a.is_finite())
                .ok_or_else(|| Error::InvalidState(format!("bad angle in {s:?}")))?;
            let slot = match key.trim() {
                "hwp" => &mut hwp,
                "qwp" => &mut qwp,
                other => return Err(Error::InvalidState(format!("unknown plate {other:?}"))),
            };
            if slot.replace(angle).is_some() {
                return Err(Error::InvalidState(format!("repeated plate in {s:?}")));
            }
        }
        let k = jones_output(hwp.unwrap_or(0.0), qwp).canonical();
        return Ok(StateSpec::pure(s, k));
    }
    Err(Error::InvalidState(format!("unrecognized state spec {s:?}")))
}

/// Parses `arg` as a state spec, or failing that reads it as a file holding one.
pub fn resolve_state(arg: &str) -> Result<StateSpec> {
    match parse_state(arg) {
        Ok(st) => Ok(st),
        Err(e) => {
            let path = Path::new(arg);
            if path.is_file() {
                let text = std::fs::read_to_string(path)?;
                parse_state(text.trim())
            } else {
                Err(e)
            }
        }
    }
}
