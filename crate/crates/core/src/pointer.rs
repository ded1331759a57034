//! Gaussian pointer coupled to the polarization probe.
//!
//! The coupling displaces one polarization component (by default `H`) by `δ`
//! along `x` and leaves the other in place. After post-selection on `|φ⟩` the
//! transverse amplitude is `⟨φ|M(x)|ψ⟩` with `M(x) = π_d g(x-δ) + π_u g(x)`,
//! where `g` is the unit-norm Gaussian whose intensity has standard deviation
//! `σ`. In momentum space (`ħ = 1`) the shift becomes the phase `e^{-ipδ}` on
//! a Gaussian of standard deviation `1/(2σ)`.
//!
//! Profiles are evaluated exactly on a grid; [`exact_centroids`] is the
//! closed-form oracle for their first moments.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{DensityMatrix, Ket, Mat2};

/// The polarization component that the coupling displaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Projector {
    #[default]
    H,
    V,
}

impl Projector {
    pub fn index(self) -> usize {
        match self {
            Projector::H => 0,
            Projector::V => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointerConfig {
    pub sigma: f64,
    pub delta: f64,
    pub grid_n: usize,
    pub grid_span: f64,
    pub displaced: Projector,
}

impl Default for PointerConfig {
    fn default() -> Self {
        Self::new(1.0, 0.01)
    }
}

impl PointerConfig {
    /// Default grid: 1024 samples over 16σ.
    pub fn new(sigma: f64, delta: f64) -> Self {
        Self {
            sigma,
            delta,
            grid_n: 1024,
            grid_span: 16.0 * sigma,
            displaced: Projector::H,
        }
    }

    pub fn with_displaced(mut self, displaced: Projector) -> Self {
        self.displaced = displaced;
        self
    }

    /// Standard deviation of the far-field intensity.
    pub fn sigma_p(&self) -> f64 {
        0.5 / self.sigma
    }

    pub fn x_step(&self) -> f64 {
        self.grid_span / self.grid_n as f64
    }

    /// The momentum grid covers the same number of standard deviations as `x`.
    pub fn p_span(&self) -> f64 {
        self.grid_span / self.sigma * self.sigma_p()
    }

    pub fn p_step(&self) -> f64 {
        self.p_span() / self.grid_n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.sigma, self.delta, self.grid_span];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPointer("non-finite parameter".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::InvalidPointer(format!("sigma = {} must be positive", self.sigma)));
        }
        if self.grid_n < 64 {
            return Err(Error::InvalidPointer(format!("grid_n = {} < 64", self.grid_n)));
        }
        if self.grid_span < 10.0 * self.sigma {
            return Err(Error::InvalidPointer(format!(
                "grid_span = {} is narrower than 10 sigma",
                self.grid_span
            )));
        }
        if self.delta.abs() >= self.grid_span / 4.0 {
            return Err(Error::InvalidPointer(format!(
                "|delta| = {} reaches a quarter of the grid span",
                self.delta.abs()
            )));
        }
        Ok(())
    }

    fn check_resolution(&self) -> Result<()> {
        if self.x_step() > 0.5 * self.sigma {
            return Err(Error::GridTooCoarse(format!(
                "x step {} does not resolve sigma {}",
                self.x_step(),
                self.sigma
            )));
        }
        if self.p_step() * self.delta.abs() >= PI {
            return Err(Error::GridTooCoarse(format!(
                "p step {} aliases the e^(-ip·delta) fringe (delta = {})",
                self.p_step(),
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Position,
    Momentum,
}

/// Intensity sampled at cell midpoints of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerProfile {
    pub domain: Domain,
    pub coords: Vec<f64>,
    pub intensity: Vec<f64>,
    pub step: f64,
    /// `Σ intensity·step`
    pub total: f64,
}

impl PointerProfile {
    fn new(domain: Domain, coords: Vec<f64>, intensity: Vec<f64>, step: f64) -> Self {
        let total = intensity.iter().sum::<f64>() * step;
        Self { domain, coords, intensity, step, total }
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coords.iter().copied().zip(self.intensity.iter().copied())
    }

    /// Discrete first moment `Σ q I(q) / Σ I(q)`.
    pub fn centroid(&self) -> Option<f64> {
        let (num, den) = self
            .samples()
            .fold((0.0, 0.0), |(n, d), (q, i)| (n + q * i, d + i));
        (den > 0.0).then(|| num / den)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostselectedProfiles {
    pub position: PointerProfile,
    pub momentum: PointerProfile,
    /// Post-selection probability `∫ I(x) dx` evaluated on the grid.
    pub probability: f64,
}

fn grid(n: usize, span: f64) -> (Vec<f64>, f64) {
    let step = span / n as f64;
    let coords = (0..n).map(|k| -0.5 * span + (k as f64 + 0.5) * step).collect();
    (coords, step)
}

fn gaussian_amplitude(q: f64, std: f64) -> f64 {
    (2.0 * PI * std * std).powf(-0.25) * (-q * q / (4.0 * std * std)).exp()
}

/// `v ρ v†` for a row vector `v = ⟨φ|M`.
fn quadratic_form(rho: &Mat2, v: [Complex64; 2]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..2 {
        for l in 0..2 {
            acc += v[k] * rho[(k, l)] * v[l].conj();
        }
    }
    acc.re.max(0.0)
}

/// Exact post-selected near-field and far-field intensities on the grid.
pub fn postselected_profiles(
    rho: &DensityMatrix,
    outcome: &Ket,
    cfg: &PointerConfig,
) -> Result<PostselectedProfiles> {
    cfg.validate()?;
    cfg.check_resolution()?;
    let m = *rho.matrix();
    let phi = [outcome.ch.conj(), outcome.cv.conj()];
    let d = cfg.displaced.index();
    let u = 1 - d;
    let (sigma, delta) = (cfg.sigma, cfg.delta);

    let (xs, dx) = grid(cfg.grid_n, cfg.grid_span);
    let ix: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let mut v = [Complex64::new(0.0, 0.0); 2];
            v[d] = phi[d] * gaussian_amplitude(x - delta, sigma);
            v[u] = phi[u] * gaussian_amplitude(x, sigma);
            quadratic_form(&m, v)
        })
        .collect();

    let sigma_p = cfg.sigma_p();
    let (ps, dp) = grid(cfg.grid_n, cfg.p_span());
    let ip: Vec<f64> = ps
        .par_iter()
        .map(|&p| {
            let g = gaussian_amplitude(p, sigma_p);
            let mut v = [Complex64::new(0.0, 0.0); 2];
            v[d] = phi[d] * Complex64::from_polar(g, -p * delta);
            v[u] = phi[u] * g;
            quadratic_form(&m, v)
        })
        .collect();

    let position = PointerProfile::new(Domain::Position, xs, ix, dx);
    let momentum = PointerProfile::new(Domain::Momentum, ps, ip, dp);
    let probability = position.total;
    Ok(PostselectedProfiles { position, momentum, probability })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroids {
    pub mean_x: f64,
    pub mean_p: f64,
    /// Exact post-selection probability including the finite-coupling overlap.
    pub probability: f64,
}

/// Closed-form first moments of the post-selected pointer.
///
/// For a pure component with displaced amplitude `α = ⟨φ|d⟩ψ_d`, static
/// amplitude `β = ⟨φ|u⟩ψ_u` and `k = exp(-δ²/(8σ²))`:
///
/// ```text
/// N   = |α|² + |β|² + 2 Re(αβ*) k
/// ⟨x⟩ = δ (|α|² + Re(αβ*) k) / N
/// ⟨p⟩ = 2 Im(αβ*) δ k / (4σ²) / N
/// ```
///
/// Mixed states combine the numerators and `N` over the spectral decomposition.
pub fn exact_centroids(rho: &DensityMatrix, outcome: &Ket, cfg: &PointerConfig) -> Result<Centroids> {
    let (sigma, delta) = (cfg.sigma, cfg.delta);
    if !(sigma > 0.0) {
        return Err(Error::InvalidPointer(format!("sigma = {sigma} must be positive")));
    }
    let k = (-delta * delta / (8.0 * sigma * sigma)).exp();
    let d = cfg.displaced.index();
    let u = 1 - d;
    let phi = [outcome.ch, outcome.cv];
    let (mut nx, mut np, mut norm) = (0.0, 0.0, 0.0);
    for (weight, psi) in rho.eigen() {
        if weight <= 0.0 {
            continue;
        }
        let amps = [psi.ch, psi.cv];
        let alpha = phi[d].conj() * amps[d];
        let beta = phi[u].conj() * amps[u];
        let cross = alpha * beta.conj();
        let a2 = alpha.norm_sqr();
        nx += weight * delta * (a2 + cross.re * k);
        np += weight * 2.0 * cross.im * delta * k / (4.0 * sigma * sigma);
        norm += weight * (a2 + beta.norm_sqr() + 2.0 * cross.re * k);
    }
    if norm < crate::weak::DIVERGENCE_THRESHOLD {
        return Err(Error::PostselectionVanishes { probability: norm });
    }
    Ok(Centroids { mean_x: nx / norm, mean_p: np / norm, probability: norm })
}

/// Weak-limit read-out: `⟨x⟩ = δ Re w`, `⟨p⟩ = δ Im w / (2σ²)`.
pub fn weak_approx_centroids(w: Complex64, sigma: f64, delta: f64) -> (f64, f64) {
    (delta * w.re, delta * w.im / (2.0 * sigma * sigma))
}
