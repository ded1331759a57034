//! Weak values, the Dirac distribution and their inversions.
//!
//! Throughout, `a` is the weakly measured basis (rows of the Dirac matrix) and
//! `b` the post-selection basis (columns). The defaults are `a = H/V` and
//! `b = D/A`. The Dirac matrix is the "left" representative
//! `S_ij = ⟨b_j|a_i⟩⟨a_i|ρ|b_j⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{c, density_of, outer, sandwich, Basis, DensityMatrix, Ket, Mat2, RawMatrixEstimate};

/// Post-selection probabilities below this make the weak value undefined.
pub const DIVERGENCE_THRESHOLD: f64 = 1e-12;

const MUB_TOL: f64 = 1e-10;

/// A weak value `⟨π_{a_i}⟩ᵂ_{b_j}`; `value` is `None` when it diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    pub projector: usize,
    pub postselection: usize,
    /// `⟨b_j|ρ|b_j⟩`
    pub probability: f64,
    pub value: Option<Complex64>,
}

impl WeakValue {
    pub fn is_divergent(&self) -> bool {
        self.value.is_none()
    }

    pub fn finite(&self) -> Result<Complex64> {
        self.value.ok_or(Error::PostselectionVanishes {
            probability: self.probability,
        })
    }
}

/// Weak-measurement basis `a` and post-selection basis `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPair {
    pub a: Basis,
    pub b: Basis,
}

impl Default for BasisPair {
    fn default() -> Self {
        Self { a: Basis::hv(), b: Basis::da() }
    }
}

impl BasisPair {
    pub fn new(a: Basis, b: Basis) -> Self {
        Self { a, b }
    }

    /// `⟨b_j|a_i⟩`
    pub fn overlap(&self, i: usize, j: usize) -> Complex64 {
        self.b.ket(j).inner(self.a.ket(i))
    }

    pub fn weak_value(&self, rho: &DensityMatrix, i: usize, j: usize) -> WeakValue {
        let bj = self.b.ket(j);
        let ai = self.a.ket(i);
        let probability = rho.expectation(bj);
        let value = (probability >= DIVERGENCE_THRESHOLD).then(|| {
            let num = self.overlap(i, j) * sandwich(rho.matrix(), ai, bj);
            num / probability
        });
        WeakValue { projector: i, postselection: j, probability, value }
    }

    pub fn weak_value_pure(&self, psi: &Ket, i: usize, j: usize) -> WeakValue {
        let bj = self.b.ket(j);
        let ai = self.a.ket(i);
        let amp = bj.inner(psi);
        let probability = amp.norm_sqr();
        let value = (probability >= DIVERGENCE_THRESHOLD)
            .then(|| self.overlap(i, j) * ai.inner(psi) / amp);
        WeakValue { projector: i, postselection: j, probability, value }
    }

    pub fn dirac_from_rho(&self, rho: &DensityMatrix) -> DiracDistribution {
        let m = rho.matrix();
        let s = Mat2::from_fn(|i, j| {
            self.overlap(i, j) * sandwich(m, self.a.ket(i), self.b.ket(j))
        });
        DiracDistribution { s, basis_a: self.a, basis_b: self.b }
    }

    pub fn mub_check(&self) -> bool {
        mub_check(&self.a, &self.b)
    }
}

/// `⟨π_{a_i}⟩ᵂ_{b_j}` for `a = H/V`, `b = D/A`.
pub fn weak_value(rho: &DensityMatrix, i: usize, j: usize) -> WeakValue {
    BasisPair::default().weak_value(rho, i, j)
}

/// Pure-state form `⟨b_j|a_i⟩⟨a_i|ψ⟩ / ⟨b_j|ψ⟩` for `a = H/V`, `b = D/A`.
pub fn weak_value_pure(psi: &Ket, i: usize, j: usize) -> WeakValue {
    BasisPair::default().weak_value_pure(psi, i, j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructedKet {
    /// Amplitudes `ν·w_i`, in the phase fixed by the post-selection.
    pub ket: Ket,
    /// Real positive normalization constant.
    pub nu: f64,
}

/// Normalizes a pair of weak values into the state they are proportional to.
pub fn ket_from_weak_values(wh: Complex64, wv: Complex64) -> Result<ReconstructedKet> {
    let n2 = wh.norm_sqr() + wv.norm_sqr();
    if !(n2 >= 1e-20) || !n2.is_finite() {
        return Err(Error::DegenerateInput(format!("wH = {wh}, wV = {wv}")));
    }
    let nu = 1.0 / n2.sqrt();
    Ok(ReconstructedKet {
        ket: Ket { ch: wh * nu, cv: wv * nu },
        nu,
    })
}

/// Reconstruction from `⟨π_H⟩ᵂ_D` alone, using `π_H + π_V = 1`.
pub fn ket_from_single_weak_value(wh: Complex64) -> Result<ReconstructedKet> {
    ket_from_weak_values(wh, c(1.0, 0.0) - wh)
}

/// Dirac distribution `S_ij` over the default bases.
pub fn dirac_from_rho(rho: &DensityMatrix) -> DiracDistribution {
    BasisPair::default().dirac_from_rho(rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracDistribution {
    /// Rows: weak basis `a`; columns: post-selection basis `b`.
    pub s: Mat2,
    pub basis_a: Basis,
    pub basis_b: Basis,
}

impl DiracDistribution {
    pub fn new(s: Mat2) -> Self {
        Self { s, basis_a: Basis::hv(), basis_b: Basis::da() }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.s[(i, j)]
    }

    /// `Σ_i S_ij`, which equals `p_{b_j}` for a physical state.
    pub fn column_sum(&self, j: usize) -> Complex64 {
        self.s[(0, j)] + self.s[(1, j)]
    }

    /// `Σ_j S_ij`, which equals `p_{a_i}` for a physical state.
    pub fn row_sum(&self, i: usize) -> Complex64 {
        self.s[(i, 0)] + self.s[(i, 1)]
    }

    pub fn total(&self) -> Complex64 {
        self.s.iter().sum()
    }

    fn pair(&self) -> BasisPair {
        BasisPair::new(self.basis_a, self.basis_b)
    }
}

/// Inverts `S_ij = ⟨b_j|a_i⟩⟨a_i|ρ|b_j⟩` into `ρ = Σ_ij S_ij/⟨b_j|a_i⟩ |a_i⟩⟨b_j|`.
pub fn rho_from_dirac(s: &DiracDistribution) -> Result<RawMatrixEstimate> {
    let pair = s.pair();
    let mut m = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let ov = pair.overlap(i, j);
            if ov.norm() < MUB_TOL {
                return Err(Error::NonMubBasis { i, j });
            }
            m += outer(s.basis_a.ket(i), s.basis_b.ket(j)) * (s.s[(i, j)] / ov);
        }
    }
    Ok(RawMatrixEstimate::new(m))
}

/// True iff every cross overlap satisfies `|⟨a_i|b_j⟩|² = 1/2`.
pub fn mub_check(a: &Basis, b: &Basis) -> bool {
    a.kets()
        .iter()
        .all(|ai| b.kets().iter().all(|bj| (ai.overlap(bj) - 0.5).abs() <= MUB_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureColumnCheck {
    /// Real normalization constant fitted over the rows.
    pub nu: f64,
    /// `ν / p_{b_j}`, the factor mapping column `j` onto the amplitudes.
    pub factor: f64,
    /// `max_i |c_i - factor·S_ij|`
    pub residual: f64,
}

/// Checks that column `j` of `s` is proportional to the amplitudes of `psi`.
///
/// `psi` is first rephased so that `⟨b_j|ψ⟩` is real and positive, which is the
/// phase in which `ν` is real. `ν` is then the real least-squares solution of
/// `⟨b_j|ψ⟩ = ν⟨b_j|a_i⟩` over `i`, and `p_{b_j} = |⟨b_j|ψ⟩|²`. A mixed `s`
/// leaves a strictly positive residual for every `psi`; an orthogonal
/// post-selection (`p_{b_j} = 0`) reports an infinite residual.
pub fn pure_column_check(s: &DiracDistribution, psi: &Ket, j: usize) -> PureColumnCheck {
    let pair = s.pair();
    let bj = s.basis_b.ket(j);
    let amp = bj.inner(psi);
    let p = amp.norm_sqr();
    if p < DIVERGENCE_THRESHOLD {
        return PureColumnCheck { nu: 0.0, factor: f64::INFINITY, residual: f64::INFINITY };
    }
    let psi = psi.scale_phase(amp.conj() / amp.norm());
    let target = amp.norm();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..2 {
        let ov = pair.overlap(i, j);
        num += (ov.conj() * target).re;
        den += ov.norm_sqr();
    }
    let nu = num / den;
    let factor = nu / p;
    let residual = (0..2)
        .map(|i| {
            let ci = s.basis_a.ket(i).inner(&psi);
            (ci - s.s[(i, j)] * factor).norm()
        })
        .fold(0.0, f64::max);
    PureColumnCheck { nu, factor, residual }
}

/// Dirac distribution of a pure state, convenience for the ket form.
pub fn dirac_from_ket(psi: &Ket) -> DiracDistribution {
    dirac_from_rho(&density_of(psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{jones_output, random_density, random_ket};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: usize = 0;
    const V: usize = 1;
    const D: usize = 0;
    const A: usize = 1;

    fn l_ket() -> Ket {
        jones_output(0.0, Some(45.0))
    }

    fn assert_c(z: Complex64, re: f64, im: f64, tol: f64) {
        assert!((z - c(re, im)).norm() <= tol, "{z} != {re}+{im}i");
    }

    #[test]
    fn weak_value_examples() {
        let w = weak_value(&density_of(&Ket::h()), H, D);
        assert_c(w.value.unwrap(), 1.0, 0.0, 1e-15);
        let w = weak_value(&density_of(&l_ket()), H, D);
        assert_c(w.value.unwrap(), 0.5, 0.5, 1e-15);
        let w = weak_value(&density_of(&Ket::a()), H, D);
        assert!(w.is_divergent());
        assert!(matches!(w.finite(), Err(Error::PostselectionVanishes { .. })));
    }

    #[test]
    fn weak_value_pure_examples() {
        assert_c(weak_value_pure(&Ket::d(), H, D).value.unwrap(), 0.5, 0.0, 1e-15);
        let t = 30f64.to_radians();
        let expect = t.cos() / (t.cos() + t.sin());
        assert_c(weak_value_pure(&Ket::linear(30.0), H, D).value.unwrap(), expect, 0.0, 1e-15);
        assert_abs_diff_eq!(expect, 0.6340, epsilon = 1e-4);
        assert_c(weak_value_pure(&Ket::r(), H, D).value.unwrap(), 0.5, -0.5, 1e-15);
        assert!(weak_value_pure(&Ket::a(), H, D).is_divergent());
    }

    #[test]
    fn ket_reconstruction_examples() {
        let k = ket_from_weak_values(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(k.ket, Ket::h());
        assert_abs_diff_eq!(k.nu, 1.0);
        let k = ket_from_weak_values(c(0.5, 0.5), c(0.5, -0.5)).unwrap();
        assert_abs_diff_eq!(k.nu, 1.0, epsilon = 1e-15);
        assert_c(k.ket.ch, 0.5, 0.5, 1e-15);
        assert_c(k.ket.cv, 0.5, -0.5, 1e-15);
        let k = ket_from_weak_values(c(0.6340, 0.0), c(0.3660, 0.0)).unwrap();
        assert_abs_diff_eq!(k.ket.ch.re, 30f64.to_radians().cos(), epsilon = 1e-4);
        assert_abs_diff_eq!(k.ket.cv.re, 30f64.to_radians().sin(), epsilon = 1e-4);
        assert!(matches!(
            ket_from_weak_values(c(0.0, 0.0), c(1e-11, 0.0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn single_weak_value_examples() {
        assert!(ket_from_single_weak_value(c(1.0, 0.0)).unwrap().ket.same_ray(&Ket::h(), 1e-15));
        assert!(ket_from_single_weak_value(c(0.5, 0.0)).unwrap().ket.same_ray(&Ket::d(), 1e-15));
        let l = ket_from_single_weak_value(c(0.5, 0.5)).unwrap().ket;
        assert_c(l.ch, 0.5, 0.5, 1e-15);
        assert_c(l.cv, 0.5, -0.5, 1e-15);
    }

    #[test]
    fn dirac_examples() {
        let s = dirac_from_rho(&density_of(&Ket::h())).s;
        assert_c(s[(H, D)], 0.5, 0.0, 1e-15);
        assert_c(s[(H, A)], 0.5, 0.0, 1e-15);
        assert_c(s[(V, D)], 0.0, 0.0, 1e-15);
        assert_c(s[(V, A)], 0.0, 0.0, 1e-15);

        let s = dirac_from_rho(&density_of(&l_ket()));
        assert_c(s.entry(H, D), 0.25, 0.25, 1e-15);
        assert_c(s.entry(H, A), 0.25, -0.25, 1e-15);
        assert_c(s.entry(V, D), 0.25, -0.25, 1e-15);
        assert_c(s.entry(V, A), 0.25, 0.25, 1e-15);
        for k in 0..2 {
            assert_c(s.row_sum(k), 0.5, 0.0, 1e-15);
            assert_c(s.column_sum(k), 0.5, 0.0, 1e-15);
        }

        let s = dirac_from_rho(&DensityMatrix::maximally_mixed()).s;
        for z in s.iter() {
            assert_c(*z, 0.25, 0.0, 1e-15);
        }
    }

    #[test]
    fn dirac_factorizations_agree() {
        // S_ij = p_{b_j}·⟨π_{a_i}⟩ᵂ_{b_j} wherever the weak value is defined.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rho = random_density(&mut rng);
            let s = dirac_from_rho(&rho);
            for i in 0..2 {
                for j in 0..2 {
                    let w = weak_value(&rho, i, j);
                    let prod = w.value.unwrap() * w.probability;
                    assert!((prod - s.entry(i, j)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let h = density_of(&Ket::h());
        let est = rho_from_dirac(&dirac_from_rho(&h)).unwrap();
        assert!((est.m - h.matrix()).norm() < 1e-15);
        assert_eq!(est.hermiticity_deviation, 0.0);

        let uniform = DiracDistribution::new(Mat2::from_element(c(0.25, 0.0)));
        let est = rho_from_dirac(&uniform).unwrap();
        assert!((est.m - DensityMatrix::maximally_mixed().matrix()).norm() < 1e-15);
    }

    #[test]
    fn perturbed_dirac_is_not_hermitian() {
        // Oracle: the perturbation maps to ε/⟨D|H⟩·|H⟩⟨D| = ε[[1,1],[0,0]], whose
        // anti-Hermitian part ε/2·[[0,1],[-1,0]] has Frobenius norm ε/√2.
        let mut s = dirac_from_rho(&density_of(&Ket::h()));
        s.s[(H, D)] += c(0.01, 0.0);
        let est = rho_from_dirac(&s).unwrap();
        let delta = Mat2::new(c(0.01, 0.0), c(0.01, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let anti = (delta - delta.adjoint()) * c(0.5, 0.0);
        let expect = anti
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert_abs_diff_eq!(expect, 0.01 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(est.hermiticity_deviation, expect, epsilon = 1e-14);
    }

    #[test]
    fn non_mub_inversion_fails() {
        let mut s = dirac_from_rho(&density_of(&Ket::h()));
        s.basis_b = Basis::hv();
        assert!(matches!(rho_from_dirac(&s), Err(Error::NonMubBasis { .. })));
    }

    #[test]
    fn mub_examples() {
        assert!(mub_check(&Basis::hv(), &Basis::da()));
        assert!(mub_check(&Basis::hv(), &Basis::rl()));
        assert!(mub_check(&Basis::da(), &Basis::rl()));
        assert!(!mub_check(&Basis::hv(), &Basis::hv()));
    }

    #[test]
    fn pure_column_examples() {
        let chk = pure_column_check(&dirac_from_ket(&Ket::h()), &Ket::h(), D);
        assert_abs_diff_eq!(chk.residual, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chk.factor, 2.0, epsilon = 1e-14);

        // Twice the D column of the |L⟩ distribution is the amplitude pair.
        let chk = pure_column_check(&dirac_from_ket(&l_ket()), &l_ket(), D);
        assert_abs_diff_eq!(chk.residual, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chk.factor, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(chk.nu, 1.0, epsilon = 1e-14);

        let mixed = dirac_from_rho(&DensityMatrix::maximally_mixed());
        for k in [Ket::h(), Ket::v(), Ket::d(), Ket::a(), Ket::l(), Ket::linear(12.0)] {
            assert!(pure_column_check(&mixed, &k, D).residual > 0.1);
        }
    }

    #[test]
    fn twice_a_column_on_the_hrvl_circle() {
        // States mutually unbiased to π_D have ν = 1 and p_D = 1/2.
        for deg in (0..180).step_by(15) {
            let k = jones_output(deg as f64 / 2.0, Some(0.0));
            let chk = pure_column_check(&dirac_from_ket(&k), &k, D);
            assert_abs_diff_eq!(chk.factor, 2.0, epsilon = 1e-12);
            assert!(chk.residual < 1e-14);
        }
    }

    #[test]
    fn dirac_stays_bounded_towards_antidiagonal() {
        let mut last_w = 0.0;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let k = Ket::linear(-45.0 + eps);
            let s = dirac_from_ket(&k);
            assert!(s.s.iter().all(|z| z.norm() <= 1.0));
            let w = weak_value_pure(&k, H, D).value.unwrap().norm();
            assert!(w > last_w);
            last_w = w;
        }
        assert!(last_w > 1e4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mixed_and_pure_forms_agree(seed in any::<u64>(), i in 0usize..2, j in 0usize..2) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let psi = random_ket(&mut rng);
                let a = weak_value(&density_of(&psi), i, j);
                let b = weak_value_pure(&psi, i, j);
                prop_assume!(b.probability > 1e-6);
                let w = b.value.unwrap();
                prop_assert!((a.value.unwrap() - w).norm() < 1e-12 * w.norm().max(1.0));
            }

            #[test]
            fn projector_completeness(seed in any::<u64>(), j in 0usize..2) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density(&mut rng);
                let h = weak_value(&rho, 0, j);
                let v = weak_value(&rho, 1, j);
                if let (Some(h), Some(v)) = (h.value, v.value) {
                    prop_assert!((h + v - c(1.0, 0.0)).norm() < 1e-12 * h.norm().max(1.0));
                }
            }
        }
    }
}
