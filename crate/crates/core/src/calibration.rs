//! Affine map from pointer centroids (pixels) to weak values, one set of
//! constants per post-selection outcome:
//! `w = (a·x − b) + i(c·p − d)`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{jones_output, Ket};

/// Outcome of the strong (post-selecting) measurement in the D/A basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Outcome {
    #[default]
    D,
    A,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::D, Outcome::A];

    pub fn index(self) -> usize {
        match self {
            Outcome::D => 0,
            Outcome::A => 1,
        }
    }

    pub fn ket(self) -> Ket {
        match self {
            Outcome::D => Ket::d(),
            Outcome::A => Ket::a(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::D => "D",
            Outcome::A => "A",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub outcome: Outcome,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default)]
    pub residual_rms: f64,
}

impl CalibrationConstants {
    pub fn new(outcome: Outcome, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let cal = Self { outcome, a, b, c, d, residual_rms: 0.0 };
        cal.validate()?;
        Ok(cal)
    }

    /// Centroids already expressed in weak-value units.
    pub fn identity(outcome: Outcome) -> Self {
        Self { outcome, a: 1.0, b: 0.0, c: 1.0, d: 0.0, residual_rms: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.a, self.b, self.c, self.d, self.residual_rms]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("calibration constants must be finite".into()));
        }
        if self.a == 0.0 || self.c == 0.0 {
            return Err(Error::Config("calibration constants a and c must be non-zero".into()));
        }
        Ok(())
    }

    pub fn apply(&self, x: f64, p: f64) -> Complex64 {
        Complex64::new(self.a * x - self.b, self.c * p - self.d)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("calibration file: {e}")))?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub known_weak_value: Complex64,
    pub measured_x: f64,
    pub measured_p: f64,
}

/// Least-squares slope and intercept of `y = s·t + i`.
fn line_fit(t: &[f64], y: &[f64], what: &str) -> Result<(f64, f64)> {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if stt.sqrt() <= 1e-12 * scale * n.sqrt() {
        return Err(Error::DegenerateDesign(format!("{what} centroids are constant")));
    }
    let slope = sty / stt;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::DegenerateDesign(format!("known weak values give no {what} slope")));
    }
    Ok((slope, ym - slope * tm))
}

/// Fits `Re w = a·x − b` and `Im w = c·p − d` by ordinary least squares.
///
/// Records are sorted before fitting so the result does not depend on their
/// order.
pub fn fit(outcome: Outcome, records: &[CalibrationRecord]) -> Result<CalibrationConstants> {
    if records.len() < 2 {
        return Err(Error::DegenerateDesign(format!(
            "need at least 2 calibration records, got {}",
            records.len()
        )));
    }
    if records.iter().any(|r| {
        !(r.known_weak_value.re.is_finite()
            && r.known_weak_value.im.is_finite()
            && r.measured_x.is_finite()
            && r.measured_p.is_finite())
    }) {
        return Err(Error::InvalidArgument("calibration records must be finite".into()));
    }
    let mut recs = records.to_vec();
    recs.sort_by(|u, v| {
        u.measured_x
            .total_cmp(&v.measured_x)
            .then(u.measured_p.total_cmp(&v.measured_p))
            .then(u.known_weak_value.re.total_cmp(&v.known_weak_value.re))
            .then(u.known_weak_value.im.total_cmp(&v.known_weak_value.im))
    });
    let xs: Vec<f64> = recs.iter().map(|r| r.measured_x).collect();
    let ps: Vec<f64> = recs.iter().map(|r| r.measured_p).collect();
    let re: Vec<f64> = recs.iter().map(|r| r.known_weak_value.re).collect();
    let im: Vec<f64> = recs.iter().map(|r| r.known_weak_value.im).collect();
    let (a, ia) = line_fit(&xs, &re, "position")?;
    let (c, ic) = line_fit(&ps, &im, "momentum")?;
    let mut cal = CalibrationConstants { outcome, a, b: -ia, c, d: -ic, residual_rms: 0.0 };
    cal.residual_rms = residual_rms(&cal, &recs);
    Ok(cal)
}

/// RMS of `|apply(x, p) − w_known|` over the records.
pub fn residual_rms(cal: &CalibrationConstants, records: &[CalibrationRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let ss: f64 = records
        .iter()
        .map(|r| (cal.apply(r.measured_x, r.measured_p) - r.known_weak_value).norm_sqr())
        .sum();
    (ss / records.len() as f64).sqrt()
}

/// Post-selection probability below which a state is left out of an outcome's
/// calibration set: states within 10° (on the polarization angle) of the
/// orthogonal outcome.
pub fn exclusion_probability() -> f64 {
    10f64.to_radians().sin().powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub label: String,
    pub ket: Ket,
}

impl CalibrationState {
    pub fn new(label: impl Into<String>, ket: Ket) -> Self {
        Self { label: label.into(), ket }
    }

    /// State prepared by the wave plates.
    pub fn waveplates(label: impl Into<String>, hwp: f64, qwp: Option<f64>) -> Self {
        Self::new(label, jones_output(hwp, qwp))
    }
}

/// Eight linear polarizations (half-wave plate in 11.25° steps) plus |R⟩ and |L⟩.
pub fn default_state_set() -> Vec<CalibrationState> {
    let mut set: Vec<_> = (0..8)
        .map(|k| {
            let hwp = 11.25 * k as f64;
            CalibrationState::waveplates(format!("hwp:{hwp}"), hwp, None)
        })
        .collect();
    set.push(CalibrationState::waveplates("R", 45.0, Some(45.0)));
    set.push(CalibrationState::waveplates("L", 0.0, Some(45.0)));
    set
}

/// The states of `set` usable for `outcome`.
pub fn eligible_states(set: &[CalibrationState], outcome: Outcome) -> Vec<CalibrationState> {
    let phi = outcome.ket();
    set.iter()
        .filter(|s| phi.overlap(&s.ket) >= exclusion_probability())
        .cloned()
        .collect()
}
