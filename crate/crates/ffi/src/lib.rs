//! C ABI over `qhj_core`.
//!
//! Objects are opaque handles created by `*_new`/constructor functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`QhjStatus`]; on failure the message is available from
//! [`qhj_last_error`] until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qhj_core::cli::run_path;
use qhj_core::generating::{convert_type, GeneratingType, QuadraticGeneratingFunction};
use qhj_core::heisenberg::heisenberg_for_potential;
use qhj_core::propagation::{apply_propagator, build_propagator, compare_to_oracle, KernelSource, PropagatorMatrix};
use qhj_core::series::closed_form_generating;
use qhj_core::{make_gaussian, Grid1D, PotentialSpec, QhjError, WaveFunction};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QhjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    GridMismatch = 3,
    DomainTruncation = 4,
    NonFinite = 5,
    NoConvergence = 6,
    Caustic = 7,
    DegenerateQuadratic = 8,
    UnsupportedPotential = 9,
    Aliasing = 10,
    OracleNotConverged = 11,
    PoissonBracket = 12,
    Config = 13,
    Io = 14,
    Panic = 15,
    ChecksFailed = 16,
}

impl From<&QhjError> for QhjStatus {
    fn from(e: &QhjError) -> Self {
        match e {
            QhjError::InvalidParameter { .. } => QhjStatus::InvalidParameter,
            QhjError::GridMismatch(_) => QhjStatus::GridMismatch,
            QhjError::DomainTruncation { .. } => QhjStatus::DomainTruncation,
            QhjError::NonFinite { .. } => QhjStatus::NonFinite,
            QhjError::NoConvergence { .. } => QhjStatus::NoConvergence,
            QhjError::Caustic { .. } => QhjStatus::Caustic,
            QhjError::DegenerateQuadratic(_) => QhjStatus::DegenerateQuadratic,
            QhjError::UnsupportedPotential(_) => QhjStatus::UnsupportedPotential,
            QhjError::Aliasing { .. } => QhjStatus::Aliasing,
            QhjError::OracleNotConverged { .. } => QhjStatus::OracleNotConverged,
            QhjError::PoissonBracket { .. } => QhjStatus::PoissonBracket,
            QhjError::Config(_) => QhjStatus::Config,
            QhjError::Io(_) => QhjStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (QhjStatus, String)>) -> QhjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QhjStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside qhj".into());
            QhjStatus::Panic
        }
    }
}

fn core<T>(r: qhj_core::Result<T>) -> Result<T, (QhjStatus, String)> {
    r.map_err(|e| (QhjStatus::from(&e), e.to_string()))
}

fn null(name: &str) -> (QhjStatus, String) {
    (QhjStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (QhjStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (QhjStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failing call on this thread, or null.
#[no_mangle]
pub extern "C" fn qhj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qhj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

pub struct QhjPotential(PotentialSpec);
pub struct QhjWaveFunction(WaveFunction);
pub struct QhjPropagator(PropagatorMatrix);
pub struct QhjGenerating(QuadraticGeneratingFunction);

/// `V = omega^2 q^2 / 2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qhj_potential_harmonic(omega: f64, out: *mut *mut QhjPotential) -> QhjStatus {
    guard(|| store(out, QhjPotential(core(PotentialSpec::harmonic(omega))?)))
}

/// `V = -a q`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qhj_potential_constant_force(a: f64, out: *mut *mut QhjPotential) -> QhjStatus {
    guard(|| {
        if !a.is_finite() {
            return Err((QhjStatus::InvalidParameter, "a must be finite".into()));
        }
        store(out, QhjPotential(PotentialSpec::ConstantForce { a }))
    })
}

/// `V = sum_k coeffs[k] q^k`.
///
/// # Safety
/// `coeffs` must point to `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qhj_potential_polynomial(coeffs: *const f64, n: usize, out: *mut *mut QhjPotential) -> QhjStatus {
    guard(|| {
        if coeffs.is_null() && n > 0 {
            return Err(null("coeffs"));
        }
        let c = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(coeffs, n).to_vec() };
        store(out, QhjPotential(core(PotentialSpec::polynomial(c))?))
    })
}

/// # Safety
/// `p` must come from a `qhj_potential_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn qhj_potential_free(p: *mut QhjPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Gaussian packet on the grid `[x_min, x_max]` with `n` points.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qhj_wavefunction_gaussian(
    x_min: f64,
    x_max: f64,
    n: usize,
    q0: f64,
    p0: f64,
    width: f64,
    hbar: f64,
    out: *mut *mut QhjWaveFunction,
) -> QhjStatus {
    guard(|| {
        let grid = core(Grid1D::new(x_min, x_max, n))?;
        store(out, QhjWaveFunction(core(make_gaussian(grid, q0, p0, width, hbar))?))
    })
}

/// # Safety
/// `psi` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qhj_wavefunction_len(psi: *const QhjWaveFunction) -> usize {
    psi.as_ref().map_or(0, |p| p.0.amplitudes().len())
}

/// Copy the amplitudes into `re` and `im`, each of length `n`.
///
/// # Safety
/// `psi` must be live; `re` and `im` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qhj_wavefunction_amplitudes(psi: *const QhjWaveFunction, re: *mut f64, im: *mut f64, n: usize) -> QhjStatus {
    guard(|| {
        let psi = deref(psi, "psi")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let a = psi.0.amplitudes();
        if n != a.len() {
            return Err((QhjStatus::GridMismatch, format!("buffer of {n} for {} amplitudes", a.len())));
        }
        for (k, z) in a.iter().enumerate() {
            *re.add(k) = z.re;
            *im.add(k) = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `psi` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn qhj_wavefunction_free(psi: *mut QhjWaveFunction) {
    if !psi.is_null() {
        drop(Box::from_raw(psi));
    }
}

fn generating_type(tag: i32) -> Result<GeneratingType, (QhjStatus, String)> {
    match tag {
        1 => Ok(GeneratingType::F1),
        2 => Ok(GeneratingType::F2),
        3 => Ok(GeneratingType::F3),
        4 => Ok(GeneratingType::F4),
        _ => Err((QhjStatus::InvalidParameter, format!("generating type {tag} is not 1..4"))),
    }
}

/// Closed-form generating function of type `tag` (1..4) for a potential of
/// degree at most two.
///
/// # Safety
/// `potential` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qhj_generating_closed_form(
    potential: *const QhjPotential,
    tag: i32,
    t: f64,
    hbar: f64,
    out: *mut *mut QhjGenerating,
) -> QhjStatus {
    guard(|| {
        let v = deref(potential, "potential")?;
        let f = core(closed_form_generating(&v.0, generating_type(tag)?, t, hbar))?;
        store(out, QhjGenerating(f))
    })
}

/// Convert to type `tag` (1..4).
///
/// # Safety
/// `f` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qhj_generating_convert(f: *const QhjGenerating, tag: i32, out: *mut *mut QhjGenerating) -> QhjStatus {
    guard(|| {
        let f = deref(f, "f")?;
        store(out, QhjGenerating(core(convert_type(&f.0, generating_type(tag)?))?))
    })
}

/// Write `alpha, beta, gamma, lin_x, lin_y, constant` as twelve doubles
/// (real and imaginary parts interleaved).
///
/// # Safety
/// `f` must be live and `coeffs` must hold 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn qhj_generating_coefficients(f: *const QhjGenerating, coeffs: *mut f64) -> QhjStatus {
    guard(|| {
        let f = &deref(f, "f")?.0;
        if coeffs.is_null() {
            return Err(null("coeffs"));
        }
        for (k, z) in [f.alpha, f.beta, f.gamma, f.lin_x, f.lin_y, f.constant].iter().enumerate() {
            *coeffs.add(2 * k) = z.re;
            *coeffs.add(2 * k + 1) = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn qhj_generating_free(f: *mut QhjGenerating) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Closed-form propagator at time `t` on a square grid.
///
/// # Safety
/// `potential` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qhj_propagator_closed_form(
    potential: *const QhjPotential,
    t: f64,
    hbar: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
    out: *mut *mut QhjPropagator,
) -> QhjStatus {
    guard(|| {
        let v = deref(potential, "potential")?;
        let grid = core(Grid1D::new(x_min, x_max, n))?;
        let f = core(closed_form_generating(&v.0, GeneratingType::F1, t, hbar))?;
        let k = core(build_propagator(KernelSource::Closed { f: &f, t }, &grid, &grid))?;
        store(out, QhjPropagator(k))
    })
}

/// `out = K psi`.
///
/// # Safety
/// `k`, `psi` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qhj_propagator_apply(k: *const QhjPropagator, psi: *const QhjWaveFunction, out: *mut *mut QhjWaveFunction) -> QhjStatus {
    guard(|| {
        let k = deref(k, "k")?;
        let psi = deref(psi, "psi")?;
        store(out, QhjWaveFunction(core(apply_propagator(&k.0, &psi.0))?))
    })
}

/// # Safety
/// `k` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn qhj_propagator_free(k: *mut QhjPropagator) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QhjOracleReport {
    pub l2_error: f64,
    pub phase_aligned_l2: f64,
    pub fidelity: f64,
    pub norm_kernel: f64,
    pub norm_oracle: f64,
    pub oracle_steps: usize,
}

/// Compare `K psi` with the split-step evolution of `psi`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qhj_compare_oracle(
    potential: *const QhjPotential,
    k: *const QhjPropagator,
    psi: *const QhjWaveFunction,
    out: *mut QhjOracleReport,
) -> QhjStatus {
    guard(|| {
        let v = deref(potential, "potential")?;
        let k = deref(k, "k")?;
        let psi = deref(psi, "psi")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = core(compare_to_oracle(&v.0, &k.0, &psi.0))?;
        *out = QhjOracleReport {
            l2_error: r.l2_error,
            phase_aligned_l2: r.phase_aligned_l2,
            fidelity: r.fidelity,
            norm_kernel: r.norm_kernel,
            norm_oracle: r.norm_oracle,
            oracle_steps: r.oracle_steps,
        };
        Ok(())
    })
}

/// Heisenberg solution `[A, B, C, D, shift_q, shift_p]` at time `t`.
///
/// # Safety
/// `potential` must be live and `coeffs` must hold 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn qhj_heisenberg(potential: *const QhjPotential, t: f64, hbar: f64, coeffs: *mut f64) -> QhjStatus {
    guard(|| {
        let v = deref(potential, "potential")?;
        if coeffs.is_null() {
            return Err(null("coeffs"));
        }
        let s = core(heisenberg_for_potential(&v.0, t, hbar))?;
        for (k, c) in s.coefficients().iter().enumerate() {
            *coeffs.add(k) = *c;
        }
        Ok(())
    })
}

/// Run a scenario configuration file. `out_dir` may be null to use the
/// configured directory. Returns `ChecksFailed` when the run completed but
/// a built-in check failed.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out_dir` likewise or null.
#[no_mangle]
pub unsafe extern "C" fn qhj_run_config(config_path: *const c_char, out_dir: *const c_char, seed: u64) -> QhjStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(null("config_path"));
        }
        let utf8 = |p: *const c_char| {
            CStr::from_ptr(p)
                .to_str()
                .map_err(|_| (QhjStatus::InvalidParameter, "path is not UTF-8".to_string()))
        };
        let path = utf8(config_path)?;
        let out = if out_dir.is_null() { None } else { Some(utf8(out_dir)?) };
        let m = core(run_path(Path::new(path), out.map(Path::new), seed))?;
        match (m.status, m.error) {
            (qhj_core::cli::RunStatus::Passed, _) => Ok(()),
            (_, Some(e)) => Err((QhjStatus::Config, e)),
            (_, None) => Err((QhjStatus::ChecksFailed, "a built-in check failed".into())),
        }
    })
}
