//! Synthetic CCD frames and their reduction to centroids and probabilities.
//!
//! Each region of interest images one post-selected pointer profile. The
//! coordinate origin of a profile lands on the centre of local pixel
//! `width / 2`; pixel `i` covers `[(i - width/2 - ½)·pitch, (i - width/2 + ½)·pitch)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointer::{Domain, PointerConfig, PointerProfile};

/// Fraction of the beam sent to each of the near- and far-field arms.
pub const ARM_SPLIT: f64 = 0.5;

/// Largest fraction of a profile allowed to fall outside its ROI.
const OVERFLOW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoiLabel {
    #[serde(rename = "NF-D")]
    NearD,
    #[serde(rename = "NF-A")]
    NearA,
    #[serde(rename = "FF-D")]
    FarD,
    #[serde(rename = "FF-A")]
    FarA,
}

impl RoiLabel {
    pub fn near(outcome: usize) -> Self {
        if outcome == 0 { RoiLabel::NearD } else { RoiLabel::NearA }
    }

    pub fn far(outcome: usize) -> Self {
        if outcome == 0 { RoiLabel::FarD } else { RoiLabel::FarA }
    }

    pub fn domain(self) -> Domain {
        match self {
            RoiLabel::NearD | RoiLabel::NearA => Domain::Position,
            RoiLabel::FarD | RoiLabel::FarA => Domain::Momentum,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoiLabel::NearD => "NF-D",
            RoiLabel::NearA => "NF-A",
            RoiLabel::FarD => "FF-D",
            RoiLabel::FarA => "FF-A",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub label: RoiLabel,
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    /// Profile coordinate units per pixel along x.
    pub pitch: f64,
}

impl Roi {
    /// Local pixel coordinate of the profile origin.
    pub fn origin_pixel(&self) -> f64 {
        (self.width / 2) as f64
    }

    fn column_of(&self, coord: f64) -> Option<usize> {
        let k = (coord / self.pitch + self.origin_pixel() + 0.5).floor();
        (k >= 0.0 && k < self.width as f64).then_some(k as usize)
    }

    fn overlaps(&self, other: &Roi) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorGeometry {
    pub width: usize,
    pub height: usize,
    /// Near-field length per pixel.
    pub x_pitch: f64,
    /// Length per pixel along y.
    pub y_pitch: f64,
    pub rois: Vec<Roi>,
}

impl DetectorGeometry {
    /// Four 128×64 ROIs side by side on a 512×256 sensor, pixel pitch σ/8 in the
    /// near field and `σ_p/8` in the far field.
    pub fn for_pointer(cfg: &PointerConfig) -> Self {
        let x_pitch = cfg.sigma / 8.0;
        let p_pitch = cfg.sigma_p() / 8.0;
        let labels = [RoiLabel::NearD, RoiLabel::NearA, RoiLabel::FarD, RoiLabel::FarA];
        let rois = labels
            .iter()
            .enumerate()
            .map(|(n, &label)| Roi {
                label,
                x0: 128 * n,
                y0: 96,
                width: 128,
                height: 64,
                pitch: if label.domain() == Domain::Position { x_pitch } else { p_pitch },
            })
            .collect();
        Self { width: 512, height: 256, x_pitch, y_pitch: x_pitch, rois }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, r) in self.rois.iter().enumerate() {
            if r.x0 + r.width > self.width || r.y0 + r.height > self.height {
                return Err(Error::InvalidArgument(format!("ROI {} is out of bounds", r.label.name())));
            }
            if self.rois[..n].iter().any(|o| o.overlaps(r)) {
                return Err(Error::InvalidArgument(format!("ROI {} overlaps another", r.label.name())));
            }
        }
        Ok(())
    }

    pub fn roi(&self, label: RoiLabel) -> Result<&Roi> {
        self.rois
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("no ROI {}", label.name())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Expected photons per frame entering the detection optics.
    pub photon_budget: f64,
    pub read_noise_std: f64,
    pub background_offset: f64,
    /// When false, pixels hold expected counts.
    pub shot_noise: bool,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            photon_budget: 1e6,
            read_noise_std: 0.0,
            background_offset: 0.0,
            shot_noise: true,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless(photon_budget: f64) -> Self {
        Self {
            photon_budget,
            read_noise_std: 0.0,
            background_offset: 0.0,
            shot_noise: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.photon_budget >= 0.0) || !self.photon_budget.is_finite() {
            return Err(Error::InvalidArgument("photon_budget must be non-negative".into()));
        }
        if !(self.read_noise_std >= 0.0) || !self.read_noise_std.is_finite() {
            return Err(Error::InvalidArgument("read_noise_std must be non-negative".into()));
        }
        if !self.background_offset.is_finite() {
            return Err(Error::InvalidArgument("background_offset must be finite".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        !self.shot_noise && self.read_noise_std == 0.0
    }

    /// Independent RNG for frame `index` of the acquisition `stream`.
    pub fn frame_rng(&self, stream: u64, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(mix(self.seed ^ 0x5745_414b_504f_4c00, stream), index))
    }
}

// splitmix64 finalizer
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a.wrapping_add(b.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major, `pixels[y * width + x]`.
    pub pixels: Vec<f64>,
    pub x_pitch: f64,
    pub y_pitch: f64,
    pub rois: Vec<Roi>,
}

impl DetectorFrame {
    pub fn blank(geometry: &DetectorGeometry, value: f64) -> Self {
        Self {
            width: geometry.width,
            height: geometry.height,
            pixels: vec![value; geometry.width * geometry.height],
            x_pitch: geometry.x_pitch,
            y_pitch: geometry.y_pitch,
            rois: geometry.rois.clone(),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn roi(&self, label: RoiLabel) -> Result<&Roi> {
        self.rois
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| Error::InvalidArgument(format!("no ROI {}", label.name())))
    }

    /// `I(x) = Σ_y I(x, y) Δy` over the ROI.
    pub fn column_profile(&self, roi: &Roi) -> Vec<f64> {
        let mut cols = vec![0.0; roi.width];
        for y in roi.y0..roi.y0 + roi.height {
            let row = &self.pixels[y * self.width + roi.x0..y * self.width + roi.x0 + roi.width];
            for (c, v) in cols.iter_mut().zip(row) {
                *c += v * self.y_pitch;
            }
        }
        cols
    }

    pub fn min_pixel(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// 16-bit binary PGM, big-endian samples, values rounded and clamped to `[0, 65535]`.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.pixels.len() * 2);
        for &v in &self.pixels {
            let q = v.round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&q.to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// One CSV line per pixel row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.pixels.chunks(self.width) {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One pointer profile imaged into one ROI.
#[derive(Debug, Clone, Copy)]
pub struct Exposure<'a> {
    pub roi: RoiLabel,
    pub profile: &'a PointerProfile,
}

/// Normalized Gaussian row weights of standard deviation `y_width` centred on the ROI.
fn row_weights(roi: &Roi, y_width: f64, y_pitch: f64) -> Vec<f64> {
    const SUB: usize = 8;
    let std = y_width / y_pitch;
    let centre = (roi.height / 2) as f64;
    let w: Vec<f64> = (0..roi.height)
        .map(|j| {
            (0..SUB)
                .map(|s| {
                    let y = j as f64 - 0.5 + (s as f64 + 0.5) / SUB as f64 - centre;
                    (-0.5 * (y / std).powi(2)).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Integrates a profile into ROI columns; the result sums to `profile.total`.
fn column_weights(roi: &Roi, profile: &PointerProfile) -> Result<Vec<f64>> {
    let mut cols = vec![0.0; roi.width];
    let mut lost = 0.0;
    for (q, i) in profile.samples() {
        match roi.column_of(q) {
            Some(k) => cols[k] += i * profile.step,
            None => lost += i * profile.step,
        }
    }
    if profile.total > 0.0 && lost / profile.total > OVERFLOW_TOL {
        return Err(Error::RoiOverflow {
            roi: roi.label.name().to_string(),
            lost: lost / profile.total,
        });
    }
    Ok(cols)
}

/// Renders one exposure.
///
/// The expected count in ROI pixel `(i, j)` is
/// `photon_budget · ARM_SPLIT · bin_i · row_j`, where `bin_i` integrates the
/// profile over column `i` (so the ROI total carries the post-selection
/// probability) and `row_j` is the normalized y profile. Shot noise, read
/// noise and the offset are then applied and the result clamped at zero.
pub fn synthesize_frame(
    geometry: &DetectorGeometry,
    exposures: &[Exposure<'_>],
    y_width: f64,
    noise: &NoiseModel,
    stream: u64,
    index: u64,
) -> Result<DetectorFrame> {
    noise.validate()?;
    if !(y_width > 0.0) {
        return Err(Error::InvalidArgument("y_width must be positive".into()));
    }
    let mut expected = DetectorFrame::blank(geometry, 0.0);
    for exp in exposures {
        let roi = *geometry.roi(exp.roi)?;
        if roi.label.domain() != exp.profile.domain {
            return Err(Error::InvalidArgument(format!(
                "ROI {} expects a {:?} profile",
                roi.label.name(),
                roi.label.domain()
            )));
        }
        let cols = column_weights(&roi, exp.profile)?;
        let rows = row_weights(&roi, y_width, geometry.y_pitch);
        let scale = noise.photon_budget * ARM_SPLIT;
        for (j, rw) in rows.iter().enumerate() {
            let base = (roi.y0 + j) * geometry.width + roi.x0;
            for (i, cw) in cols.iter().enumerate() {
                expected.pixels[base + i] += scale * cw * rw;
            }
        }
    }

    let mut rng = noise.frame_rng(stream, index);
    let read = (noise.read_noise_std > 0.0)
        .then(|| Normal::new(0.0, noise.read_noise_std).expect("validated std"));
    for v in expected.pixels.iter_mut() {
        let mut s = *v;
        if noise.shot_noise && s > 0.0 {
            s = Poisson::new(s).expect("positive mean").sample(&mut rng);
        }
        if let Some(n) = &read {
            s += n.sample(&mut rng);
        }
        *v = (s + noise.background_offset).max(0.0);
    }
    Ok(expected)
}

/// Subtracts the minimum pixel from every pixel.
pub fn reduce_background(mut frame: DetectorFrame) -> DetectorFrame {
    let min = frame.min_pixel();
    if min.is_finite() {
        frame.pixels.iter_mut().for_each(|v| *v -= min);
    }
    frame
}

/// `⟨x⟩ = Σ x I(x) Δx / Σ I(x) Δx` in local pixel units over the ROI.
pub fn centroid_x(frame: &DetectorFrame, roi: &Roi) -> Result<f64> {
    let cols = frame.column_profile(roi);
    let dx = frame.x_pitch;
    let (num, den) = cols
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(n, d), (x, i)| (n + x as f64 * i * dx, d + i * dx));
    if !(den > 0.0) {
        return Err(Error::EmptyRoi(roi.label.name().to_string()));
    }
    Ok(num / den)
}

/// Sum of the ROI pixels.
pub fn roi_intensity(frame: &DetectorFrame, roi: &Roi) -> f64 {
    (roi.y0..roi.y0 + roi.height)
        .map(|y| {
            let start = y * frame.width + roi.x0;
            frame.pixels[start..start + roi.width].iter().sum::<f64>()
        })
        .sum()
}

/// `p_D = I_D/(I_D + I_A)`, `p_A = 1 - p_D`.
///
/// Inputs are dark-subtracted intensities; small negative values left by the
/// subtraction are clamped to zero.
pub fn estimate_probabilities(i_d: f64, i_a: f64) -> Result<(f64, f64)> {
    let (i_d, i_a) = (i_d.max(0.0), i_a.max(0.0));
    let total = i_d + i_a;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NoSignal);
    }
    let p_d = i_d / total;
    Ok((p_d, 1.0 - p_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidEstimate {
    pub mean: f64,
    /// Standard error of the mean; zero for a single frame.
    pub std_error: f64,
    pub frames_used: usize,
}

impl CentroidEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let mut acc = CentroidAccumulator::default();
        samples.iter().for_each(|&x| acc.push(x));
        acc.finish()
    }
}

/// Welford running mean and variance, so frames need not be kept in memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct CentroidAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl CentroidAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self) -> Result<CentroidEstimate> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("no centroid samples".into()));
        }
        let std_error = if self.n > 1 {
            (self.m2.max(0.0) / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        Ok(CentroidEstimate { mean: self.mean, std_error, frames_used: self.n })
    }
}

/// Mean and standard error of the per-frame centroids after min-pixel subtraction.
pub fn average_centroids(frames: &[DetectorFrame], label: RoiLabel) -> Result<CentroidEstimate> {
    let samples = frames
        .iter()
        .map(|f| {
            let reduced = reduce_background(f.clone());
            let roi = *reduced.roi(label)?;
            centroid_x(&reduced, &roi)
        })
        .collect::<Result<Vec<_>>>()?;
    CentroidEstimate::from_samples(&samples)
}
