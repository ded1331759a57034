//! End-to-end experiments: state → pointer profiles → detector frames →
//! centroids → calibrated weak values → reconstructed state.
//!
//! * Experiment 1 post-selects on `|D⟩` only and reconstructs a pure state from
//!   `⟨π_H⟩ᵂ_D`.
//! * Experiment 2 records both outcomes, with the pointer coupled once to `π_H`
//!   and once to `π_V`, and assembles the Dirac distribution
//!   `S_ij = p_{b_j}·⟨π_i⟩ᵂ_{b_j}`, which is inverted into a density matrix.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    self, default_state_set, eligible_states, exclusion_probability, CalibrationConstants,
    CalibrationRecord, CalibrationState, Outcome,
};
use crate::detector::{
    centroid_x, estimate_probabilities, reduce_background, roi_intensity, synthesize_frame,
    CentroidAccumulator, CentroidEstimate, DetectorFrame, DetectorGeometry, Exposure, NoiseModel, RoiLabel,
};
use crate::error::{Error, Result};
use crate::pointer::{postselected_profiles, PointerConfig, PostselectedProfiles, Projector};
use crate::qstate::{
    c, density_of, fidelity, jones_output, stokes, stokes_raw, trace_distance, Basis, DensityMatrix,
    Ket, Mat2, RawMatrixEstimate, StokesVector,
};
use crate::weak::{
    ket_from_single_weak_value, rho_from_dirac, weak_value_pure, DiracDistribution,
    ReconstructedKet, DIVERGENCE_THRESHOLD,
};

/// Columns whose post-selected intensity falls below this fraction of the
/// total are set to zero (the `p·w → 0` limit).
pub const LOW_SIGNAL_FRACTION: f64 = 1e-9;

/// Purity above which a truth state is treated as pure for fidelity reporting.
const PURE_TOL: f64 = 1e-9;

// Noise stream tags; sweep rows offset them by `ROW_STREAM_STRIDE`.
const STREAM_EXP1: u64 = 1;
const STREAM_EXP2_H: u64 = 2;
const STREAM_EXP2_V: u64 = 3;
const STREAM_DARK: u64 = 4;
const STREAM_TOMOGRAPHY: u64 = 5;
const STREAM_CALIBRATION: u64 = 64;
const ROW_STREAM_STRIDE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exp1,
    #[default]
    Exp2,
}

/// Calibration constants per outcome; missing entries are filled by a
/// noiseless simulated calibration when `ExperimentConfig::auto_calibrate` is set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Calibrations {
    pub d: Option<CalibrationConstants>,
    pub a: Option<CalibrationConstants>,
}

impl Calibrations {
    pub fn get(&self, outcome: Outcome) -> Result<&CalibrationConstants> {
        let slot = match outcome {
            Outcome::D => &self.d,
            Outcome::A => &self.a,
        };
        slot.as_ref()
            .ok_or_else(|| Error::Config(format!("no calibration for outcome {}", outcome.name())))
    }

    pub fn set(&mut self, cal: CalibrationConstants) {
        match cal.outcome {
            Outcome::D => self.d = Some(cal),
            Outcome::A => self.a = Some(cal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pointer: PointerConfig,
    pub noise: NoiseModel,
    /// Frames averaged per acquisition.
    pub frames: usize,
    /// Beam width along y on the camera; defaults to the pointer width.
    pub y_width: Option<f64>,
    pub calibration: Calibrations,
    pub auto_calibrate: bool,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pointer: PointerConfig::new(1.0, 0.01),
            noise: NoiseModel::default(),
            frames: 100,
            y_width: None,
            calibration: Calibrations::default(),
            auto_calibrate: true,
            mode: Mode::Exp2,
        }
    }
}

impl ExperimentConfig {
    /// Noiseless configuration at coupling `delta` (in units of σ = 1).
    pub fn noiseless(delta: f64) -> Self {
        Self {
            pointer: PointerConfig::new(1.0, delta),
            noise: NoiseModel::noiseless(1e6),
            frames: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_apparatus()?;
        for cal in [self.calibration.d, self.calibration.a].iter().flatten() {
            cal.validate()?;
        }
        if !self.auto_calibrate {
            self.calibration.get(Outcome::D)?;
            if self.mode == Mode::Exp2 {
                self.calibration.get(Outcome::A)?;
            }
        }
        Ok(())
    }

    /// Checks everything except the calibration constants.
    pub fn validate_apparatus(&self) -> Result<()> {
        self.pointer.validate()?;
        self.noise.validate()?;
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if let Some(y) = self.y_width {
            if !(y > 0.0) || !y.is_finite() {
                return Err(Error::Config("y_width must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn y_width(&self) -> f64 {
        self.y_width.unwrap_or(self.pointer.sigma)
    }
}

/// Constants implied by the weak-coupling approximation for a geometry:
/// a pointer shift of δ·Re w in position and δ·Im w/(2σ²) in momentum, read
/// out in pixels about the ROI origin.
pub fn ideal_calibration(
    outcome: Outcome,
    pointer: &PointerConfig,
    geometry: &DetectorGeometry,
) -> Result<CalibrationConstants> {
    let nf = geometry.roi(RoiLabel::near(outcome.index()))?;
    let ff = geometry.roi(RoiLabel::far(outcome.index()))?;
    let a = nf.pitch / pointer.delta;
    let c = ff.pitch * 2.0 * pointer.sigma.powi(2) / pointer.delta;
    CalibrationConstants::new(outcome, a, a * nf.origin_pixel(), c, c * ff.origin_pixel())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeMeasurement {
    pub outcome: Outcome,
    /// Near-field centroid in pixels.
    pub x: Option<CentroidEstimate>,
    /// Far-field centroid in pixels.
    pub p: Option<CentroidEstimate>,
    /// Mean raw near-field ROI intensity per frame.
    pub intensity: f64,
}

impl OutcomeMeasurement {
    fn centroids(&self) -> Option<(CentroidEstimate, CentroidEstimate)> {
        self.x.zip(self.p)
    }
}

/// Weak value read through a calibration, with first-order standard errors
/// `(|a|·SE_x, |c|·SE_p)` packed as a complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredWeakValue {
    pub value: Complex64,
    pub std_error: Complex64,
    pub frames_used: usize,
}

fn calibrated(cal: &CalibrationConstants, x: &CentroidEstimate, p: &CentroidEstimate) -> MeasuredWeakValue {
    MeasuredWeakValue {
        value: cal.apply(x.mean, p.mean),
        std_error: Complex64::new(cal.a.abs() * x.std_error, cal.c.abs() * p.std_error),
        frames_used: x.frames_used.min(p.frames_used),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp1Result {
    pub weak_value: MeasuredWeakValue,
    pub ket: ReconstructedKet,
    pub fidelity_to_truth: f64,
    pub measurement: OutcomeMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Only defined for pure truth states.
    pub fidelity: Option<f64>,
    pub trace_distance: f64,
    pub hermiticity_deviation: f64,
}

impl Metrics {
    fn of(estimate: &RawMatrixEstimate, truth: &DensityMatrix) -> Self {
        let fidelity = (truth.purity() > 1.0 - PURE_TOL)
            .then(|| truth.pure_ket(1e-6))
            .flatten()
            .map(|k| fidelity(&estimate.m, &k));
        Self {
            fidelity,
            trace_distance: trace_distance(&estimate.m, truth.matrix()),
            hermiticity_deviation: estimate.hermiticity_deviation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp2Result {
    pub dirac: DiracDistribution,
    /// Standard errors of the real and imaginary parts of each `S_ij`.
    pub dirac_std_error: Mat2,
    /// `weak_values[i][j] = ⟨π_i⟩ᵂ_{b_j}`; `None` for zeroed columns.
    pub weak_values: [[Option<MeasuredWeakValue>; 2]; 2],
    pub rho: RawMatrixEstimate,
    pub p_d: f64,
    pub p_a: f64,
    pub stokes: StokesVector,
    pub metrics: Metrics,
    /// Outcomes whose column was set to zero.
    pub low_signal: [bool; 2],
}

impl Exp2Result {
    pub fn probability(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::D => self.p_d,
            Outcome::A => self.p_a,
        }
    }

    /// One-standard-error bound on `Σ_ij S_ij`.
    pub fn total_std_error(&self) -> f64 {
        self.dirac_std_error.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    pub rho: RawMatrixEstimate,
    pub stokes: StokesVector,
    pub metrics: Metrics,
    pub photons: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    Ok,
    NearDivergent,
    Divergent,
}

impl RowFlag {
    pub fn name(self) -> &'static str {
        match self {
            RowFlag::Ok => "ok",
            RowFlag::NearDivergent => "near_divergent",
            RowFlag::Divergent => "divergent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub hwp: f64,
    pub qwp: Option<f64>,
    /// Jones output of the wave plates, without any phase convention.
    pub prepared: Ket,
    pub p_d: f64,
    pub true_weak_value: Option<Complex64>,
    pub measured: Option<MeasuredWeakValue>,
    /// Reconstructed ket rephased onto `prepared`.
    pub reconstructed: Option<Ket>,
    pub true_stokes: StokesVector,
    pub measured_stokes: Option<StokesVector>,
    pub fidelity: Option<f64>,
    pub flag: RowFlag,
}

/// The three great circles traced by rotating the half-wave plate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepPath {
    /// No quarter-wave plate: linear polarizations.
    Blue,
    /// Quarter-wave plate at 0°.
    Red,
    /// Quarter-wave plate at 45°.
    Green,
}

impl SweepPath {
    pub fn qwp(self) -> Option<f64> {
        match self {
            SweepPath::Blue => None,
            SweepPath::Red => Some(0.0),
            SweepPath::Green => Some(45.0),
        }
    }

    /// `n` half-wave plate angles evenly spaced over [0°, 90°).
    pub fn angles(n: usize) -> Vec<f64> {
        (0..n).map(|k| 90.0 * k as f64 / n as f64).collect()
    }
}

/// A configured apparatus with resolved calibration constants.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub geometry: DetectorGeometry,
    pub calibration: Calibrations,
    stream_base: u64,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut exp = Self::uncalibrated(cfg)?;
        if exp.cfg.auto_calibrate && (exp.calibration.d.is_none() || exp.calibration.a.is_none()) {
            let mut noiseless = exp.clone();
            noiseless.cfg.noise = NoiseModel::noiseless(exp.cfg.noise.photon_budget.max(1.0));
            let [d, a] = noiseless.calibrate(&default_state_set())?;
            exp.calibration.d.get_or_insert(d);
            exp.calibration.a.get_or_insert(a);
        }
        Ok(exp)
    }

    /// The apparatus with only the configured calibration constants, e.g. for
    /// running a calibration.
    pub fn uncalibrated(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate_apparatus()?;
        let geometry = DetectorGeometry::for_pointer(&cfg.pointer);
        geometry.validate()?;
        Ok(Self { calibration: cfg.calibration, cfg, geometry, stream_base: 0 })
    }

    fn stream(&self, tag: u64) -> u64 {
        self.stream_base + tag
    }

    fn frames_to_synthesize(&self) -> usize {
        // Noiseless frames are all identical.
        if self.cfg.noise.is_noiseless() { 1 } else { self.cfg.frames }
    }

    /// Images the post-selected pointer for each outcome and reduces the frames.
    fn acquire(
        &self,
        rho: &DensityMatrix,
        outcomes: &[Outcome],
        displaced: Projector,
        stream: u64,
    ) -> Result<Vec<OutcomeMeasurement>> {
        let profiles = self.profiles(rho, outcomes, displaced)?;
        let exposures = exposures(outcomes, &profiles);
        let rois = outcomes
            .iter()
            .map(|o| {
                Ok((
                    *self.geometry.roi(RoiLabel::near(o.index()))?,
                    *self.geometry.roi(RoiLabel::far(o.index()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = self.frames_to_synthesize();
        let mut xs = vec![CentroidAccumulator::default(); outcomes.len()];
        let mut ps = vec![CentroidAccumulator::default(); outcomes.len()];
        let mut intensity = vec![0.0; outcomes.len()];
        for idx in 0..n {
            let frame = synthesize_frame(
                &self.geometry,
                &exposures,
                self.cfg.y_width(),
                &self.cfg.noise,
                stream,
                idx as u64,
            )?;
            for (k, (nf, _)) in rois.iter().enumerate() {
                intensity[k] += roi_intensity(&frame, nf);
            }
            let frame = reduce_background(frame);
            for (k, (nf, ff)) in rois.iter().enumerate() {
                // A frame contributes to an outcome only if both of its ROIs are lit.
                if let (Ok(x), Ok(p)) = (centroid_x(&frame, nf), centroid_x(&frame, ff)) {
                    xs[k].push(x);
                    ps[k].push(p);
                }
            }
        }
        let min_frames = if n == 1 { 1 } else { 2 };
        let logical = |mut e: CentroidEstimate| {
            if n == 1 {
                e.frames_used = self.cfg.frames;
            }
            e
        };
        Ok(outcomes
            .iter()
            .enumerate()
            .map(|(k, &outcome)| {
                let usable = xs[k].count() >= min_frames;
                OutcomeMeasurement {
                    outcome,
                    x: usable.then(|| xs[k].finish().ok().map(logical)).flatten(),
                    p: usable.then(|| ps[k].finish().ok().map(logical)).flatten(),
                    intensity: intensity[k] / n as f64,
                }
            })
            .collect())
    }

    fn profiles(
        &self,
        rho: &DensityMatrix,
        outcomes: &[Outcome],
        displaced: Projector,
    ) -> Result<Vec<PostselectedProfiles>> {
        let pcfg = self.cfg.pointer.with_displaced(displaced);
        outcomes.iter().map(|o| postselected_profiles(rho, &o.ket(), &pcfg)).collect()
    }

    /// Frame `index` of experiment 2's acquisition with the pointer coupled to
    /// `displaced`, as recorded by the camera.
    pub fn render_frame(&self, rho: &DensityMatrix, displaced: Projector, index: u64) -> Result<DetectorFrame> {
        let profiles = self.profiles(rho, &Outcome::BOTH, displaced)?;
        let tag = match displaced {
            Projector::H => STREAM_EXP2_H,
            Projector::V => STREAM_EXP2_V,
        };
        synthesize_frame(
            &self.geometry,
            &exposures(&Outcome::BOTH, &profiles),
            self.cfg.y_width(),
            &self.cfg.noise,
            self.stream(tag),
            index,
        )
    }

    /// Mean near-field ROI intensities of laser-blocked frames.
    fn dark_levels(&self) -> Result<[f64; 2]> {
        let dark = NoiseModel { photon_budget: 0.0, ..self.cfg.noise };
        let n = self.frames_to_synthesize();
        let mut levels = [0.0; 2];
        for idx in 0..n {
            let frame = synthesize_frame(&self.geometry, &[], self.cfg.y_width(), &dark, self.stream(STREAM_DARK), idx as u64)?;
            for o in Outcome::BOTH {
                levels[o.index()] += roi_intensity(&frame, self.geometry.roi(RoiLabel::near(o.index()))?);
            }
        }
        Ok(levels.map(|v| v / n as f64))
    }

    /// Experiment 1: reconstructs a pure state from `⟨π_H⟩ᵂ_D`.
    pub fn run_exp1(&self, truth: &Ket) -> Result<Exp1Result> {
        let p_true = Ket::d().overlap(truth);
        if p_true < DIVERGENCE_THRESHOLD {
            return Err(Error::PostselectionVanishes { probability: p_true });
        }
        let cal = self.calibration.get(Outcome::D)?;
        let m = self.acquire(&density_of(truth), &[Outcome::D], Projector::H, self.stream(STREAM_EXP1))?[0];
        let (x, p) = m.centroids().ok_or(Error::PostselectionVanishes { probability: p_true })?;
        let weak_value = calibrated(cal, &x, &p);
        let ket = ket_from_single_weak_value(weak_value.value)?;
        Ok(Exp1Result {
            weak_value,
            fidelity_to_truth: ket.ket.overlap(truth),
            ket,
            measurement: m,
        })
    }

    /// Experiment 2: measures the full Dirac distribution and inverts it.
    pub fn run_exp2(&self, truth: &DensityMatrix) -> Result<Exp2Result> {
        let cals = [*self.calibration.get(Outcome::D)?, *self.calibration.get(Outcome::A)?];
        let runs = [
            self.acquire(truth, &Outcome::BOTH, Projector::H, self.stream(STREAM_EXP2_H))?,
            self.acquire(truth, &Outcome::BOTH, Projector::V, self.stream(STREAM_EXP2_V))?,
        ];
        let dark = self.dark_levels()?;
        let raw: [f64; 2] = std::array::from_fn(|j| runs[0][j].intensity + runs[1][j].intensity);
        let net: [f64; 2] = std::array::from_fn(|j| (raw[j] - 2.0 * dark[j]).max(0.0));
        let (p_d, p_a) = estimate_probabilities(net[0], net[1])?;
        let p = [p_d, p_a];
        let total = net[0] + net[1];

        let mut s = Mat2::zeros();
        let mut se = Mat2::zeros();
        let mut weak_values = [[None; 2]; 2];
        let mut low_signal = [false; 2];
        for j in 0..2 {
            let measured: Option<[MeasuredWeakValue; 2]> = (net[j] >= LOW_SIGNAL_FRACTION * total)
                .then(|| {
                    let h = runs[0][j].centroids()?;
                    let v = runs[1][j].centroids()?;
                    Some([calibrated(&cals[j], &h.0, &h.1), calibrated(&cals[j], &v.0, &v.1)])
                })
                .flatten();
            match measured {
                Some(w) => {
                    for i in 0..2 {
                        s[(i, j)] = w[i].value * p[j];
                        se[(i, j)] = w[i].std_error * p[j];
                        weak_values[i][j] = Some(w[i]);
                    }
                }
                None => low_signal[j] = true,
            }
        }
        let dirac = DiracDistribution::new(s);
        let rho = rho_from_dirac(&dirac)?;
        Ok(Exp2Result {
            stokes: stokes_raw(&rho),
            metrics: Metrics::of(&rho, truth),
            dirac,
            dirac_std_error: se,
            weak_values,
            rho,
            p_d,
            p_a,
            low_signal,
        })
    }

    /// Strong projective measurements in the H/V, D/A and R/L bases followed by
    /// linear inversion, using the photon count of one experiment-2 run.
    pub fn tomography_baseline(&self, truth: &DensityMatrix) -> Result<TomographyResult> {
        let photons = self.cfg.noise.photon_budget * self.cfg.frames as f64 * 2.0;
        let per_basis = photons / 3.0;
        let mut rng = self.cfg.noise.frame_rng(self.stream(STREAM_TOMOGRAPHY), 0);
        let mut s = [0.0; 3];
        for (k, basis) in [Basis::da(), Basis::rl(), Basis::hv()].iter().enumerate() {
            let mut counts = basis.kets().map(|b| per_basis * truth.expectation(&b));
            if self.cfg.noise.shot_noise {
                for n in counts.iter_mut() {
                    if *n > 0.0 {
                        *n = Poisson::new(*n).expect("positive mean").sample(&mut rng);
                    }
                }
            }
            let sum = counts[0] + counts[1];
            s[k] = if sum > 0.0 { (counts[0] - counts[1]) / sum } else { 0.0 };
        }
        let m = Mat2::new(
            c(0.5 * (1.0 + s[2]), 0.0),
            c(0.5 * s[0], -0.5 * s[1]),
            c(0.5 * s[0], 0.5 * s[1]),
            c(0.5 * (1.0 - s[2]), 0.0),
        );
        let rho = RawMatrixEstimate::new(m);
        Ok(TomographyResult {
            stokes: stokes_raw(&rho),
            metrics: Metrics::of(&rho, truth),
            rho,
            photons,
        })
    }

    /// Experiment 1 across half-wave plate settings with an optional
    /// quarter-wave plate. Rows run in parallel, each on its own noise streams.
    pub fn sweep_hwp(&self, angles: &[f64], qwp: Option<f64>) -> Result<Vec<SweepRow>> {
        if angles.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one angle".into()));
        }
        angles
            .par_iter()
            .enumerate()
            .map(|(row, &hwp)| {
                let mut exp = self.clone();
                exp.stream_base = (row as u64 + 1) * ROW_STREAM_STRIDE;
                exp.sweep_row(hwp, qwp)
            })
            .collect()
    }

    fn sweep_row(&self, hwp: f64, qwp: Option<f64>) -> Result<SweepRow> {
        let prepared = jones_output(hwp, qwp);
        let wv = weak_value_pure(&prepared, 0, 0);
        let flag = if wv.is_divergent() {
            RowFlag::Divergent
        } else if wv.probability < exclusion_probability() {
            RowFlag::NearDivergent
        } else {
            RowFlag::Ok
        };
        let mut row = SweepRow {
            hwp,
            qwp,
            prepared,
            p_d: wv.probability,
            true_weak_value: wv.value,
            measured: None,
            reconstructed: None,
            true_stokes: stokes(&density_of(&prepared)),
            measured_stokes: None,
            fidelity: None,
            flag,
        };
        match self.run_exp1(&prepared) {
            Ok(r) => {
                let k = r.ket.ket.aligned_to(&prepared);
                row.measured = Some(r.weak_value);
                row.reconstructed = Some(k);
                row.measured_stokes = Some(stokes(&density_of(&k)));
                row.fidelity = Some(r.fidelity_to_truth);
            }
            Err(Error::PostselectionVanishes { .. }) => row.flag = RowFlag::Divergent,
            Err(e) => return Err(e),
        }
        Ok(row)
    }

    /// Calibration records for each outcome from the eligible states of `set`,
    /// measured with the pointer coupled to `π_H`.
    pub fn calibration_records(&self, set: &[CalibrationState]) -> Result<[Vec<CalibrationRecord>; 2]> {
        let mut records = [Vec::new(), Vec::new()];
        for (n, state) in set.iter().enumerate() {
            let ket = state.ket;
            let outcomes: Vec<Outcome> = Outcome::BOTH
                .into_iter()
                .filter(|o| !eligible_states(std::slice::from_ref(state), *o).is_empty())
                .collect();
            if outcomes.is_empty() {
                continue;
            }
            let ms = self.acquire(&density_of(&ket), &outcomes, Projector::H, self.stream(STREAM_CALIBRATION + n as u64))?;
            for m in ms {
                let (x, p) = m.centroids().ok_or_else(|| {
                    Error::DegenerateDesign(format!("no usable frames for state {}", state.label))
                })?;
                let w = weak_value_pure(&ket, 0, m.outcome.index()).finite()?;
                records[m.outcome.index()].push(CalibrationRecord {
                    known_weak_value: w,
                    measured_x: x.mean,
                    measured_p: p.mean,
                });
            }
        }
        Ok(records)
    }

    /// Fits both outcome calibrations on `set` under the configured noise.
    pub fn calibrate(&self, set: &[CalibrationState]) -> Result<[CalibrationConstants; 2]> {
        let [rd, ra] = self.calibration_records(set)?;
        Ok([calibration::fit(Outcome::D, &rd)?, calibration::fit(Outcome::A, &ra)?])
    }
}

fn exposures<'a>(outcomes: &[Outcome], profiles: &'a [PostselectedProfiles]) -> Vec<Exposure<'a>> {
    outcomes
        .iter()
        .zip(profiles)
        .flat_map(|(o, prof)| {
            [
                Exposure { roi: RoiLabel::near(o.index()), profile: &prof.position },
                Exposure { roi: RoiLabel::far(o.index()), profile: &prof.momentum },
            ]
        })
        .collect()
}

/// Experiment 1 under `cfg`, which must be in [`Mode::Exp1`].
pub fn run_exp1(truth: &Ket, cfg: &ExperimentConfig) -> Result<Exp1Result> {
    if cfg.mode != Mode::Exp1 {
        return Err(Error::InvalidArgument("configuration is not in exp1 mode".into()));
    }
    Experiment::new(cfg.clone())?.run_exp1(truth)
}

/// Experiment 2 under `cfg`, which must be in [`Mode::Exp2`].
pub fn run_exp2(truth: &DensityMatrix, cfg: &ExperimentConfig) -> Result<Exp2Result> {
    if cfg.mode != Mode::Exp2 {
        return Err(Error::InvalidArgument("configuration is not in exp2 mode".into()));
    }
    Experiment::new(cfg.clone())?.run_exp2(truth)
}

/// Returns a generator whose stream depends only on `seed`.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
