//! Two-level polarization state algebra.
//!
//! Kets and density matrices are expressed in the horizontal/vertical basis.
//! Waveplates follow Jones calculus with these conventions:
//!
//! * half-wave plate with fast axis at `θ`: `[[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]`
//! * quarter-wave plate with fast axis at `θ`: `R(θ) · diag(1, i) · R(-θ)`, where
//!   `R(θ) = [[cos θ, -sin θ], [sin θ, cos θ]]`
//!
//! With these conventions a quarter-wave plate at 45° maps `|H⟩` to
//! `|L⟩ = ((1+i)|H⟩ + (1-i)|V⟩)/2` exactly, with no extra global phase.
//! Circular states use `|R⟩ = (|H⟩ + i|V⟩)/√2` and `|L⟩ = (|H⟩ - i|V⟩)/√2`
//! (canonical phase), so that `⟨σy⟩ = p_R - p_L = -1` for `|L⟩`.
//!
//! Angles are degrees at every public interface.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = Complex64;
pub type Mat2 = Matrix2<Complex64>;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A normalized polarization ket `cH|H⟩ + cV|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ket {
    pub ch: Complex64,
    pub cv: Complex64,
}

impl Ket {
    /// Builds a ket from amplitudes that must already be normalized.
    pub fn new(ch: Complex64, cv: Complex64) -> Result<Self> {
        let n = ch.norm_sqr() + cv.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "ket is not normalized (|cH|²+|cV|² = {n})"
            )));
        }
        Ok(Self { ch, cv })
    }

    /// Normalizes arbitrary (non-zero) amplitudes.
    pub fn normalized(ch: Complex64, cv: Complex64) -> Result<Self> {
        let n = (ch.norm_sqr() + cv.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 1e-150) {
            return Err(Error::InvalidState("cannot normalize a zero ket".into()));
        }
        Ok(Self {
            ch: ch / n,
            cv: cv / n,
        })
    }

    pub fn h() -> Self {
        Self { ch: c(1.0, 0.0), cv: c(0.0, 0.0) }
    }

    pub fn v() -> Self {
        Self { ch: c(0.0, 0.0), cv: c(1.0, 0.0) }
    }

    pub fn d() -> Self {
        Self { ch: c(FRAC_1_SQRT_2, 0.0), cv: c(FRAC_1_SQRT_2, 0.0) }
    }

    pub fn a() -> Self {
        Self { ch: c(FRAC_1_SQRT_2, 0.0), cv: c(-FRAC_1_SQRT_2, 0.0) }
    }

    pub fn r() -> Self {
        Self { ch: c(FRAC_1_SQRT_2, 0.0), cv: c(0.0, FRAC_1_SQRT_2) }
    }

    pub fn l() -> Self {
        Self { ch: c(FRAC_1_SQRT_2, 0.0), cv: c(0.0, -FRAC_1_SQRT_2) }
    }

    /// Linear polarization at `angle` degrees from horizontal.
    pub fn linear(angle: f64) -> Self {
        let t = angle.to_radians();
        Self { ch: c(t.cos(), 0.0), cv: c(t.sin(), 0.0) }
    }

    pub fn to_vector(self) -> Vector2<Complex64> {
        Vector2::new(self.ch, self.cv)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.ch.conj() * other.ch + self.cv.conj() * other.cv
    }

    pub fn orthogonal(&self) -> Ket {
        Ket { ch: -self.cv.conj(), cv: self.ch.conj() }
    }

    pub fn scale_phase(&self, phase: Complex64) -> Ket {
        Ket { ch: self.ch * phase, cv: self.cv * phase }
    }

    /// Reporting phase: `cH` real and non-negative, or `cV` real positive when `cH = 0`.
    pub fn canonical(&self) -> Ket {
        let pivot = if self.ch.norm() > NORM_TOL { self.ch } else { self.cv };
        if pivot.norm() == 0.0 {
            return *self;
        }
        let k = self.scale_phase(pivot.conj() / pivot.norm());
        // clean the pivot's imaginary rounding residue
        if self.ch.norm() > NORM_TOL {
            Ket { ch: c(k.ch.re, 0.0), cv: k.cv }
        } else {
            Ket { ch: k.ch, cv: c(k.cv.re, 0.0) }
        }
    }

    /// Global phase multiplying `self` to maximize the real overlap with `reference`.
    pub fn aligned_to(&self, reference: &Ket) -> Ket {
        let ov = self.inner(reference);
        if ov.norm() < NORM_TOL {
            return *self;
        }
        self.scale_phase(ov / ov.norm())
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap(&self, other: &Ket) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Equality up to a global phase.
    pub fn same_ray(&self, other: &Ket, tol: f64) -> bool {
        (1.0 - self.overlap(other)).abs() <= tol
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})|H⟩ + ({})|V⟩", self.ch, self.cv)
    }
}

/// A physical 2×2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Mat2,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(m: Mat2) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("density matrix has non-finite entries".into()));
        }
        let herm = (m - m.adjoint()).norm();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("density matrix trace is {tr}")));
        }
        let (lo, _) = hermitian_eigenvalues(&m);
        if lo < -EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has negative eigenvalue {lo:e}"
            )));
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed() -> Self {
        Self { m: Mat2::identity() * c(0.5, 0.0) }
    }

    /// Convex mixture `Σ wₖ |ψₖ⟩⟨ψₖ|`; the weights are renormalized.
    pub fn mixture(parts: &[(f64, Ket)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || !(total > 0.0) {
            return Err(Error::InvalidState("mixture weights must be non-negative".into()));
        }
        let mut m = Mat2::zeros();
        for (w, k) in parts {
            m += density_of(k).m * c(*w / total, 0.0);
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    /// `⟨k|ρ|k⟩`
    pub fn expectation(&self, k: &Ket) -> f64 {
        sandwich(&self.m, k, k).re
    }

    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }

    /// Spectral decomposition `[(λ₀, |e₀⟩), (λ₁, |e₁⟩)]` with `λ₀ ≥ λ₁`.
    ///
    /// Closed form through the Bloch vector: the eigenvectors are the pure states
    /// pointing along and against it.
    pub fn eigen(&self) -> [(f64, Ket); 2] {
        let s = stokes(self);
        let r = s.length();
        if r < 1e-15 {
            return [(0.5, Ket::h()), (0.5, Ket::v())];
        }
        let top = Ket::from_bloch(s.sx / r, s.sy / r, s.sz / r);
        [((1.0 + r) / 2.0, top), ((1.0 - r) / 2.0, top.orthogonal())]
    }

    /// The ket of a rank-1 state, or `None` when the state is mixed beyond `tol`.
    pub fn pure_ket(&self, tol: f64) -> Option<Ket> {
        let [(l0, k0), _] = self.eigen();
        ((1.0 - l0).abs() <= tol).then(|| k0.canonical())
    }
}

impl Ket {
    /// Pure state at the given unit Stokes direction.
    pub fn from_bloch(sx: f64, sy: f64, sz: f64) -> Ket {
        // ρ = (I + s·σ)/2 with σy = [[0,-i],[i,0]]; ⟨σy⟩ = -2 Im ρ_HV matches p_R - p_L.
        let theta = sz.clamp(-1.0, 1.0).acos();
        let phi = sy.atan2(sx);
        Ket {
            ch: c((theta / 2.0).cos(), 0.0),
            cv: Complex64::from_polar((theta / 2.0).sin(), phi),
        }
        .canonical()
    }
}

/// A measured matrix estimate that may be unphysical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMatrixEstimate {
    pub m: Mat2,
    /// Frobenius norm of the anti-Hermitian part `(m - m†)/2`.
    pub hermiticity_deviation: f64,
}

impl RawMatrixEstimate {
    pub fn new(m: Mat2) -> Self {
        let hermiticity_deviation = ((m - m.adjoint()) * c(0.5, 0.0)).norm();
        Self { m, hermiticity_deviation }
    }

    pub fn hermitian_part(&self) -> Mat2 {
        (self.m + self.m.adjoint()) * c(0.5, 0.0)
    }
}

impl From<DensityMatrix> for RawMatrixEstimate {
    fn from(rho: DensityMatrix) -> Self {
        RawMatrixEstimate::new(rho.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisLabel {
    HV,
    DA,
    RL,
}

/// An orthonormal qubit basis `{b0, b1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub b0: Ket,
    pub b1: Ket,
    pub label: BasisLabel,
}

impl Basis {
    pub fn hv() -> Self {
        Basis { b0: Ket::h(), b1: Ket::v(), label: BasisLabel::HV }
    }

    pub fn da() -> Self {
        Basis { b0: Ket::d(), b1: Ket::a(), label: BasisLabel::DA }
    }

    pub fn rl() -> Self {
        Basis { b0: Ket::r(), b1: Ket::l(), label: BasisLabel::RL }
    }

    pub fn of(label: BasisLabel) -> Self {
        match label {
            BasisLabel::HV => Self::hv(),
            BasisLabel::DA => Self::da(),
            BasisLabel::RL => Self::rl(),
        }
    }

    /// Basis element by index (0 or 1).
    pub fn ket(&self, i: usize) -> &Ket {
        match i {
            0 => &self.b0,
            1 => &self.b1,
            _ => panic!("qubit basis index {i} out of range"),
        }
    }

    pub fn kets(&self) -> [Ket; 2] {
        [self.b0, self.b1]
    }

    pub fn is_orthonormal(&self) -> bool {
        self.b0.inner(&self.b1).norm() < NORM_TOL
            && (self.b0.inner(&self.b0).re - 1.0).abs() < NORM_TOL
            && (self.b1.inner(&self.b1).re - 1.0).abs() < NORM_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl StokesVector {
    pub fn length(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }
}

/// `⟨left|m|right⟩`
pub fn sandwich(m: &Mat2, left: &Ket, right: &Ket) -> Complex64 {
    let r = m * right.to_vector();
    left.ch.conj() * r[0] + left.cv.conj() * r[1]
}

/// `|a⟩⟨b|`
pub fn outer(a: &Ket, b: &Ket) -> Mat2 {
    let va = a.to_vector();
    let vb = b.to_vector();
    va * vb.adjoint()
}

fn hermitian_eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = (a + d) / 2.0;
    let rad = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
    (mean - rad, mean + rad)
}

pub fn density_of(k: &Ket) -> DensityMatrix {
    DensityMatrix { m: outer(k, k) }
}

pub fn half_wave_plate(angle_deg: f64) -> Mat2 {
    let t = 2.0 * angle_deg.to_radians();
    let (s, co) = t.sin_cos();
    Mat2::new(c(co, 0.0), c(s, 0.0), c(s, 0.0), c(-co, 0.0))
}

pub fn quarter_wave_plate(angle_deg: f64) -> Mat2 {
    let t = angle_deg.to_radians();
    let (s, co) = t.sin_cos();
    let rot = Mat2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0));
    let retarder = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    rot * retarder * rot.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QwpOrder {
    #[default]
    None,
    AfterHwp,
}

/// Raw Jones image of `|H⟩` under a half-wave plate and an optional trailing
/// quarter-wave plate, without any phase convention applied.
pub fn jones_output(hwp_deg: f64, qwp_deg: Option<f64>) -> Ket {
    let hwp = half_wave_plate(hwp_deg.rem_euclid(180.0));
    let mut v = hwp * Ket::h().to_vector();
    if let Some(q) = qwp_deg {
        v = quarter_wave_plate(q.rem_euclid(180.0)) * v;
    }
    // waveplates are unitary; renormalize only to shed rounding
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    Ket { ch: v[0] / n, cv: v[1] / n }
}

/// Prepares the probe state from the polarizer output `|H⟩`.
///
/// The quarter-wave plate angle is ignored when `order` is [`QwpOrder::None`].
/// The result carries the canonical reporting phase.
pub fn prepare(hwp_deg: f64, qwp_deg: Option<f64>, order: QwpOrder) -> Ket {
    let q = match order {
        QwpOrder::None => None,
        QwpOrder::AfterHwp => Some(qwp_deg.unwrap_or(0.0)),
    };
    jones_output(hwp_deg, q).canonical()
}

fn stokes_of_matrix(m: &Mat2) -> StokesVector {
    let p = |k: Ket| sandwich(m, &k, &k).re;
    StokesVector {
        sx: p(Ket::d()) - p(Ket::a()),
        sy: p(Ket::r()) - p(Ket::l()),
        sz: p(Ket::h()) - p(Ket::v()),
    }
}

/// Stokes parameters as projector expectation differences.
pub fn stokes(rho: &DensityMatrix) -> StokesVector {
    stokes_of_matrix(&rho.m)
}

/// Stokes parameters of the Hermitian part of a raw estimate.
pub fn stokes_raw(est: &RawMatrixEstimate) -> StokesVector {
    stokes_of_matrix(&est.hermitian_part())
}

/// Upper end of the reporting range for [`fidelity`].
pub const FIDELITY_CEILING: f64 = 1.0 + 1e-9;

/// `Re⟨target|m|target⟩`, clamped to `[0, 1 + 1e-9]`.
pub fn fidelity(m: &Mat2, target: &Ket) -> f64 {
    sandwich(m, target, target).re.clamp(0.0, FIDELITY_CEILING)
}

/// Half the sum of singular values of `a - b`.
pub fn trace_distance(a: &Mat2, b: &Mat2) -> f64 {
    // For 2×2: s₁² + s₂² = ‖D‖²_F and s₁s₂ = |det D|.
    let d = a - b;
    let fro2 = d.norm_squared();
    let det = d.determinant().norm();
    0.5 * (fro2 + 2.0 * det).max(0.0).sqrt()
}

/// Haar-random pure state.
pub fn random_ket<R: Rng + ?Sized>(rng: &mut R) -> Ket {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Ok(k) = Ket::normalized(c(g[0], g[1]), c(g[2], g[3])) {
            return k;
        }
    }
}

/// Random mixture of two or three Haar-random pure states with uniform weights.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let n = rng.random_range(2..=3);
    let parts: Vec<(f64, Ket)> = (0..n)
        .map(|_| (rng.random::<f64>() + 1e-3, random_ket(rng)))
        .collect();
    DensityMatrix::mixture(&parts).expect("positive weights")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn prepare_identity_and_diagonal() {
        let h = prepare(0.0, None, QwpOrder::None);
        assert!(h.same_ray(&Ket::h(), 1e-14));
        let d = prepare(22.5, None, QwpOrder::None);
        assert!(close(d.ch, c(FRAC_1_SQRT_2, 0.0), 1e-14));
        assert!(close(d.cv, c(FRAC_1_SQRT_2, 0.0), 1e-14));
    }

    #[test]
    fn quarter_wave_plate_at_45_gives_l_exactly() {
        // Locks the retarder phase convention: QWP(45°)|H⟩ = ((1+i)|H⟩ + (1-i)|V⟩)/2.
        let k = jones_output(0.0, Some(45.0));
        assert!(close(k.ch, c(0.5, 0.5), 1e-14));
        assert!(close(k.cv, c(0.5, -0.5), 1e-14));
        let s = stokes(&density_of(&k));
        assert_abs_diff_eq!(s.sy, -1.0, epsilon = 1e-12);
        let r = prepare(45.0, Some(45.0), QwpOrder::AfterHwp);
        assert!(r.same_ray(&Ket::r(), 1e-12));
    }

    #[test]
    fn quarter_wave_plate_at_45_leaves_diagonal_alone() {
        // D is the fast-axis eigenstate of a QWP at 45°, so this pair stays linear.
        let k = prepare(22.5, Some(45.0), QwpOrder::AfterHwp);
        let s = stokes(&density_of(&k));
        assert_abs_diff_eq!(s.sx, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.sy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn qwp_order_none_ignores_angle() {
        assert_eq!(
            prepare(10.0, Some(45.0), QwpOrder::None),
            prepare(10.0, None, QwpOrder::None)
        );
    }

    #[test]
    fn angles_wrap_mod_180() {
        let a = prepare(30.0, Some(10.0), QwpOrder::AfterHwp);
        let b = prepare(210.0, Some(-170.0), QwpOrder::AfterHwp);
        assert!(a.same_ray(&b, 1e-12));
    }

    #[test]
    fn density_examples() {
        let h = density_of(&Ket::h());
        assert_eq!(h.matrix()[(0, 0)], c(1.0, 0.0));
        assert_eq!(h.matrix()[(1, 1)], c(0.0, 0.0));
        let d = density_of(&Ket::d());
        for z in d.matrix().iter() {
            assert!(close(*z, c(0.5, 0.0), 1e-15));
        }
        let l = density_of(&jones_output(0.0, Some(45.0)));
        let m = l.matrix();
        assert!(close(m[(0, 0)], c(0.5, 0.0), 1e-15));
        assert!(close(m[(0, 1)], c(0.0, 0.5), 1e-15));
        assert!(close(m[(1, 0)], c(0.0, -0.5), 1e-15));
        assert!(close(m[(1, 1)], c(0.5, 0.0), 1e-15));
    }

    #[test]
    fn stokes_examples() {
        let s = stokes(&density_of(&Ket::h()));
        assert_eq!((s.sx, s.sy, s.sz), (0.0, 0.0, 1.0));
        let s = stokes(&density_of(&Ket::l()));
        assert_abs_diff_eq!(s.sx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sy, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sz, 0.0, epsilon = 1e-15);
        let s = stokes(&DensityMatrix::maximally_mixed());
        assert_abs_diff_eq!(s.length(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let h = density_of(&Ket::h());
        assert_abs_diff_eq!(fidelity(h.matrix(), &Ket::h()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(h.matrix(), &Ket::v()), 0.0, epsilon = 1e-15);
        let mixed = DensityMatrix::maximally_mixed();
        for k in [Ket::h(), Ket::d(), Ket::l(), Ket::linear(17.0)] {
            assert_abs_diff_eq!(fidelity(mixed.matrix(), &k), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn trace_distance_examples() {
        let h = *density_of(&Ket::h()).matrix();
        let v = *density_of(&Ket::v()).matrix();
        let mixed = *DensityMatrix::maximally_mixed().matrix();
        assert_abs_diff_eq!(trace_distance(&h, &h), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&h, &v), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&h, &mixed), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn trace_distance_matches_svd_on_non_hermitian() {
        let a = Mat2::new(c(0.3, 0.1), c(0.2, -0.7), c(-0.4, 0.2), c(0.7, 0.05));
        let b = Mat2::new(c(0.5, 0.0), c(0.1, 0.3), c(0.0, -0.2), c(0.5, 0.0));
        let svd = (a - b).svd(false, false);
        let expect = 0.5 * svd.singular_values.iter().sum::<f64>();
        assert_abs_diff_eq!(trace_distance(&a, &b), expect, epsilon = 1e-12);
    }

    #[test]
    fn density_validation_rejects_unphysical() {
        let bad_trace = Mat2::identity();
        assert!(DensityMatrix::new(bad_trace).is_err());
        let non_herm = Mat2::new(c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0));
        assert!(DensityMatrix::new(non_herm).is_err());
        let negative = Mat2::new(c(1.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.2, 0.0));
        assert!(DensityMatrix::new(negative).is_err());
        assert!(Ket::new(c(1.0, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let rho = DensityMatrix::mixture(&[(0.7, Ket::linear(20.0)), (0.3, Ket::r())]).unwrap();
        let [(l0, k0), (l1, k1)] = rho.eigen();
        let rebuilt = outer(&k0, &k0) * c(l0, 0.0) + outer(&k1, &k1) * c(l1, 0.0);
        assert!((rebuilt - rho.matrix()).norm() < 1e-12);
    }

    #[test]
    fn canonical_phase_rules() {
        let k = Ket::l().scale_phase(Complex64::from_polar(1.0, 1.234)).canonical();
        assert_eq!(k.ch.im, 0.0);
        assert!(k.ch.re > 0.0);
        let v = Ket::v().scale_phase(c(0.0, -1.0)).canonical();
        assert_eq!(v.cv, c(1.0, 0.0));
    }

    #[test]
    fn bases_are_orthonormal() {
        for b in [Basis::hv(), Basis::da(), Basis::rl()] {
            assert!(b.is_orthonormal());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn prepare_is_unit_norm(h in -360.0f64..360.0, q in -360.0f64..360.0) {
                let k = prepare(h, Some(q), QwpOrder::AfterHwp);
                prop_assert!((k.ch.norm_sqr() + k.cv.norm_sqr() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn pure_states_sit_on_the_sphere(a in -1.0f64..1.0, b in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
                prop_assume!(a * a + b * b + x * x + y * y > 1e-6);
                let k = Ket::normalized(c(a, b), c(x, y)).unwrap();
                let rho = density_of(&k);
                prop_assert!((stokes(&rho).length() - 1.0).abs() < 1e-10);
                prop_assert!((fidelity(rho.matrix(), &k) - 1.0).abs() < 1e-12);
                prop_assert!(trace_distance(rho.matrix(), rho.matrix()) == 0.0);
            }

            #[test]
            fn linear_sweep_stays_on_great_circle(h in 0.0f64..180.0) {
                let s = stokes(&density_of(&prepare(h, None, QwpOrder::None)));
                prop_assert!((s.sx * s.sx + s.sz * s.sz - 1.0).abs() < 1e-12);
                prop_assert!(s.sy.abs() < 1e-12);
            }

            #[test]
            fn trace_distance_is_symmetric(seed in any::<u64>()) {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let a = random_density(&mut rng);
                let b = random_density(&mut rng);
                let ab = trace_distance(a.matrix(), b.matrix());
                let ba = trace_distance(b.matrix(), a.matrix());
                prop_assert!((ab - ba).abs() < 1e-14);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            }
        }
    }
}
