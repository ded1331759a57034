//! C interface to `weakpol`.
//!
//! Conventions:
//! * Every fallible function returns a [`WpStatus`]; on failure a message is
//!   available from [`wp_last_error`] on the same thread.
//! * 2×2 matrices are passed as four [`WpComplex`] values in row-major order
//!   with rows and columns in the H, V order (for Dirac distributions: rows
//!   H, V and columns D, A).
//! * Index arguments: projector 0 = H, 1 = V; outcome 0 = D, 1 = A.
//! * [`WpExperiment`] is an opaque handle created by [`wp_experiment_new`] and
//!   released with [`wp_experiment_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use weakpol::config::FileConfig;
use weakpol::pipeline::Experiment;
use weakpol::pointer::{exact_centroids, PointerConfig};
use weakpol::qstate::{jones_output, stokes, DensityMatrix, Ket, Mat2};
use weakpol::weak::{dirac_from_rho, rho_from_dirac, weak_value, DiracDistribution};
use weakpol::{Error, Outcome};

/// Version of this interface; bumped on any incompatible change.
pub const WP_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    PostselectionVanishes = 4,
    DegenerateDesign = 5,
    Divergent = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpComplex {
    pub re: f64,
    pub im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpKet {
    pub h: WpComplex,
    pub v: WpComplex,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpStokes {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpCentroids {
    pub mean_x: f64,
    pub mean_p: f64,
    pub probability: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpCalibration {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub residual_rms: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpExp1Result {
    pub weak_value: WpComplex,
    /// Standard errors of the real and imaginary parts.
    pub std_error: WpComplex,
    pub ket: WpKet,
    pub nu: f64,
    pub fidelity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WpExp2Result {
    pub dirac: [WpComplex; 4],
    pub rho: [WpComplex; 4],
    pub p_d: f64,
    pub p_a: f64,
    pub stokes: WpStokes,
    /// NaN when the true state is mixed.
    pub fidelity: f64,
    pub trace_distance: f64,
    pub hermiticity_deviation: f64,
    /// Non-zero where an outcome's column was set to zero for lack of signal.
    pub low_signal: [u8; 2],
}

/// Opaque experiment handle.
pub struct WpExperiment {
    inner: Experiment,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn fail(status: WpStatus, msg: &str) -> WpStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> WpStatus {
    match e {
        Error::Config(_) => WpStatus::Config,
        Error::PostselectionVanishes { .. } => WpStatus::PostselectionVanishes,
        Error::DegenerateDesign(_) => WpStatus::DegenerateDesign,
        Error::InvalidState(_)
        | Error::InvalidArgument(_)
        | Error::InvalidPointer(_)
        | Error::GridTooCoarse(_)
        | Error::DegenerateInput(_)
        | Error::NonMubBasis { .. } => WpStatus::InvalidArgument,
        _ => WpStatus::Internal,
    }
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), WpStatus>) -> WpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            WpStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(WpStatus::Internal, "internal panic"),
    }
}

fn lib(e: Error) -> WpStatus {
    fail(status_of(&e), &e.to_string())
}

fn null() -> WpStatus {
    fail(WpStatus::NullPointer, "null pointer argument")
}

fn cx(z: Complex64) -> WpComplex {
    WpComplex { re: z.re, im: z.im }
}

fn cz(z: WpComplex) -> Complex64 {
    Complex64::new(z.re, z.im)
}

fn ket_out(k: &Ket) -> WpKet {
    WpKet { h: cx(k.ch), v: cx(k.cv) }
}

unsafe fn read_matrix(p: *const WpComplex) -> Result<Mat2, WpStatus> {
    if p.is_null() {
        return Err(null());
    }
    let v = std::slice::from_raw_parts(p, 4);
    Ok(Mat2::new(cz(v[0]), cz(v[1]), cz(v[2]), cz(v[3])))
}

unsafe fn write_matrix(p: *mut WpComplex, m: &Mat2) {
    let out = std::slice::from_raw_parts_mut(p, 4);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = cx(m[(k / 2, k % 2)]);
    }
}

unsafe fn read_density(p: *const WpComplex) -> Result<DensityMatrix, WpStatus> {
    DensityMatrix::new(read_matrix(p)?).map_err(lib)
}

fn index(i: u32, what: &str) -> Result<usize, WpStatus> {
    if i < 2 {
        Ok(i as usize)
    } else {
        Err(fail(WpStatus::InvalidArgument, &format!("{what} index must be 0 or 1")))
    }
}

fn outcome(i: u32) -> Result<Outcome, WpStatus> {
    Ok(Outcome::BOTH[index(i, "outcome")?])
}

/// Interface version implemented by this library.
#[no_mangle]
pub extern "C" fn wp_abi_version() -> u32 {
    WP_ABI_VERSION
}

/// Message for the last failure on this thread; empty after a success. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn wp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Jones image of |H⟩ through a half-wave plate at `hwp_deg` followed, when
/// `has_qwp` is non-zero, by a quarter-wave plate at `qwp_deg`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `WpKet`.
#[no_mangle]
pub unsafe extern "C" fn wp_prepare(hwp_deg: f64, has_qwp: i32, qwp_deg: f64, out: *mut WpKet) -> WpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        if !hwp_deg.is_finite() || (has_qwp != 0 && !qwp_deg.is_finite()) {
            return Err(fail(WpStatus::InvalidArgument, "angles must be finite"));
        }
        let k = jones_output(hwp_deg, (has_qwp != 0).then_some(qwp_deg)).canonical();
        *out = ket_out(&k);
        Ok(())
    })
}

/// Stokes vector of a density matrix.
///
/// # Safety
/// `rho` must point to 4 readable values and `out` to one writable `WpStokes`.
#[no_mangle]
pub unsafe extern "C" fn wp_stokes(rho: *const WpComplex, out: *mut WpStokes) -> WpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let s = stokes(&read_density(rho)?);
        *out = WpStokes { sx: s.sx, sy: s.sy, sz: s.sz };
        Ok(())
    })
}

/// Weak value of projector `projector` post-selected on `outcome`. Returns
/// `Divergent` when the post-selection probability vanishes.
///
/// # Safety
/// `rho` must point to 4 readable values and `out` to one writable `WpComplex`.
#[no_mangle]
pub unsafe extern "C" fn wp_weak_value(
    rho: *const WpComplex,
    projector: u32,
    outcome: u32,
    out: *mut WpComplex,
) -> WpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let rho = read_density(rho)?;
        let w = weak_value(&rho, index(projector, "projector")?, index(outcome, "outcome")?);
        match w.value {
            Some(v) => {
                *out = cx(v);
                Ok(())
            }
            None => Err(fail(
                WpStatus::Divergent,
                &format!("post-selection probability {:e} vanishes", w.probability),
            )),
        }
    })
}

/// Dirac distribution of a density matrix.
///
/// # Safety
/// `rho` must point to 4 readable values and `out` to 4 writable values.
#[no_mangle]
pub unsafe extern "C" fn wp_dirac_from_rho(rho: *const WpComplex, out: *mut WpComplex) -> WpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let s = dirac_from_rho(&read_density(rho)?);
        write_matrix(out, &s.s);
        Ok(())
    })
}

/// Matrix reconstructed from a (possibly unphysical) Dirac distribution, and
/// the Frobenius norm of its anti-Hermitian part.
///
/// # Safety
/// `dirac` must point to 4 readable values, `out` to 4 writable values, and
/// `hermiticity_deviation` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn wp_rho_from_dirac(
    dirac: *const WpComplex,
    out: *mut WpComplex,
    hermiticity_deviation: *mut f64,
) -> WpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let est = rho_from_dirac(&DiracDistribution::new(read_matrix(dirac)?)).map_err(lib)?;
        write_matrix(out, &est.m);
        if !hermiticity_deviation.is_null() {
            *hermiticity_deviation = est.hermiticity_deviation;
        }
        Ok(())
    })
}

/// Closed-form post-selected pointer centroids for a Gaussian pointer of width
/// `sigma` whose H component is displaced by `delta`.
///
/// # Safety
/// `rho` must point to 4 readable values and `out` to one writable `WpCentroids`.
#[no_mangle]
pub unsafe extern "C" fn wp_exact_centroids(
    rho: *const WpComplex,
    outcome_index: u32,
    sigma: f64,
    delta: f64,
    out: *mut WpCentroids,
) -> WpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let rho = read_density(rho)?;
        let cfg = PointerConfig::new(sigma, delta);
        cfg.validate().map_err(lib)?;
        let c = exact_centroids(&rho, &outcome(outcome_index)?.ket(), &cfg).map_err(lib)?;
        *out = WpCentroids { mean_x: c.mean_x, mean_p: c.mean_p, probability: c.probability };
        Ok(())
    })
}

/// Creates an experiment from configuration text (TOML or JSON; null or empty
/// for defaults). Returns null on failure, with the reason in `*status` when
/// `status` is non-null.
///
/// # Safety
/// `config_text` must be null or a NUL-terminated string; `status` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn wp_experiment_new(config_text: *const c_char, status: *mut WpStatus) -> *mut WpExperiment {
    let mut handle = ptr::null_mut();
    let st = guard(|| {
        let text = if config_text.is_null() {
            String::new()
        } else {
            CStr::from_ptr(config_text)
                .to_str()
                .map_err(|_| fail(WpStatus::InvalidArgument, "configuration is not UTF-8"))?
                .to_string()
        };
        let cfg = FileConfig::parse(&text).map_err(lib)?.experiment().map_err(lib)?;
        let inner = Experiment::new(cfg).map_err(lib)?;
        handle = Box::into_raw(Box::new(WpExperiment { inner }));
        Ok(())
    });
    if !status.is_null() {
        *status = st;
    }
    handle
}

/// Releases an experiment handle; null is ignored.
///
/// # Safety
/// `exp` must be null or a handle from [`wp_experiment_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_experiment_free(exp: *mut WpExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Calibration constants the experiment uses for `outcome`.
///
/// # Safety
/// `exp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_experiment_calibration(
    exp: *const WpExperiment,
    outcome_index: u32,
    out: *mut WpCalibration,
) -> WpStatus {
    guard(|| {
        let (Some(exp), false) = (exp.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let c = exp.inner.calibration.get(outcome(outcome_index)?).map_err(lib)?;
        *out = WpCalibration { a: c.a, b: c.b, c: c.c, d: c.d, residual_rms: c.residual_rms };
        Ok(())
    })
}

/// Experiment 1 on a pure state.
///
/// # Safety
/// `exp` must be a live handle, `state` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_experiment_run_exp1(
    exp: *const WpExperiment,
    state: *const WpKet,
    out: *mut WpExp1Result,
) -> WpStatus {
    guard(|| {
        let (Some(exp), Some(state), false) = (exp.as_ref(), state.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let ket = Ket::new(cz(state.h), cz(state.v)).map_err(lib)?;
        let r = exp.inner.run_exp1(&ket).map_err(lib)?;
        *out = WpExp1Result {
            weak_value: cx(r.weak_value.value),
            std_error: cx(r.weak_value.std_error),
            ket: ket_out(&r.ket.ket),
            nu: r.ket.nu,
            fidelity: r.fidelity_to_truth,
        };
        Ok(())
    })
}

/// Experiment 2 on a density matrix.
///
/// # Safety
/// `exp` must be a live handle, `rho` must point to 4 readable values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wp_experiment_run_exp2(
    exp: *const WpExperiment,
    rho: *const WpComplex,
    out: *mut WpExp2Result,
) -> WpStatus {
    guard(|| {
        let (Some(exp), false) = (exp.as_ref(), out.is_null()) else {
            return Err(null());
        };
        let r = exp.inner.run_exp2(&read_density(rho)?).map_err(lib)?;
        let mut res = WpExp2Result {
            p_d: r.p_d,
            p_a: r.p_a,
            stokes: WpStokes { sx: r.stokes.sx, sy: r.stokes.sy, sz: r.stokes.sz },
            fidelity: r.metrics.fidelity.unwrap_or(f64::NAN),
            trace_distance: r.metrics.trace_distance,
            hermiticity_deviation: r.metrics.hermiticity_deviation,
            low_signal: r.low_signal.map(u8::from),
            ..WpExp2Result::default()
        };
        write_matrix(res.dirac.as_mut_ptr(), &r.dirac.s);
        write_matrix(res.rho.as_mut_ptr(), &r.rho.m);
        *out = res;
        Ok(())
    })
}
