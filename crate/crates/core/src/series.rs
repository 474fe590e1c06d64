//! hbar-power-series solution of the quantum Hamilton-Jacobi equation
//!
//! ```text
//! (dS/dq)^2 / 2 + V - (i hbar / 2) d^2S/dq^2 + dS/dt = 0,
//! S = S0 + hbar S1 + c.
//! ```
//!
//! `S0` is the classical principal function, `S1` solves the linear transport
//! equation along classical characteristics, and `c` is fixed by the initial
//! condition of the chosen mode. Quadratic potentials have exact closed forms
//! in which the series terminates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{shoot, Mode, ShootingOptions, Shot, T_MIN};
use crate::error::{QhjError, Result};
use crate::generating::{convert_type, GeneratingType, QuadraticGeneratingFunction};
use crate::grid::Grid1D;
use crate::potential::PotentialSpec;
use crate::state::check_hbar;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative distance to a caustic below which closed forms refuse to evaluate.
const CAUSTIC_EPS: f64 = 1e-10;

/// Start of the log-time transport integration for identity mode.
pub const T_REF: f64 = 1e-6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(i hbar / 2) ln(modulus e^{i arg})` with an explicitly chosen argument.
fn log_term(hbar: f64, modulus: f64, arg: f64) -> Complex64 {
    0.5 * I * hbar * c(modulus.ln(), arg)
}

fn caustic(t: f64, what: &str) -> QhjError {
    QhjError::Caustic {
        time: t,
        reason: what.to_string(),
    }
}

/// Exact identity-mode generating function of type `tag` for a quadratic
/// potential at time `t`. F3 and F4 are obtained by exact type conversion.
pub fn closed_form_generating(
    potential: &PotentialSpec,
    tag: GeneratingType,
    t: f64,
    hbar: f64,
) -> Result<QuadraticGeneratingFunction> {
    check_hbar(hbar)?;
    if !t.is_finite() {
        return Err(QhjError::invalid("t", "must be finite"));
    }
    let [c0, c1, c2] = potential.quadratic_coefficients().ok_or_else(|| {
        QhjError::UnsupportedPotential(format!("{} has no closed-form generating function", potential.name()))
    })?;
    match tag {
        GeneratingType::F1 | GeneratingType::F2 => {}
        GeneratingType::F3 => {
            let f1 = closed_form_generating(potential, GeneratingType::F1, t, hbar)?;
            return convert_type(&f1, GeneratingType::F3);
        }
        GeneratingType::F4 => {
            let f2 = closed_form_generating(potential, GeneratingType::F2, t, hbar)?;
            return convert_type(&f2, GeneratingType::F4);
        }
    }
    let f1 = tag == GeneratingType::F1;
    if c2 == 0.0 {
        let mut f = if f1 {
            constant_force_f1(-c1, t, hbar)?
        } else {
            constant_force_f2(-c1, t, hbar)
        };
        f.constant -= c0 * t;
        return Ok(f);
    }
    let base = if c2 > 0.0 {
        let omega = (2.0 * c2).sqrt();
        if f1 {
            harmonic_f1(omega, t, hbar)?
        } else {
            harmonic_f2(omega, t, hbar)?
        }
    } else {
        let kappa = (-2.0 * c2).sqrt();
        if f1 {
            inverted_f1(kappa, t, hbar)?
        } else {
            inverted_f2(kappa, t, hbar)
        }
    };
    let q_star = -c1 / (2.0 * c2);
    let v_min = c0 - c1 * c1 / (4.0 * c2);
    Ok(shift_origin(base, q_star, v_min * t))
}

/// Conjugate a generating function built for `V(q)` into one for
/// `V(q - q*) + v_shift / t`.
fn shift_origin(f: QuadraticGeneratingFunction, q_star: f64, energy_phase: f64) -> QuadraticGeneratingFunction {
    let mut g = f;
    let (a, b, gm) = (f.alpha, f.beta, f.gamma);
    match f.type_tag {
        GeneratingType::F1 => {
            g.lin_x = f.lin_x - q_star * (a + b);
            g.lin_y = f.lin_y - q_star * (b + gm);
            g.constant = f.constant + q_star * q_star * (0.5 * a + b + 0.5 * gm) - q_star * (f.lin_x + f.lin_y);
        }
        _ => {
            g.lin_x = f.lin_x - q_star * a;
            g.lin_y = f.lin_y - q_star * b + q_star;
            g.constant = f.constant + 0.5 * a * q_star * q_star - f.lin_x * q_star;
        }
    }
    g.constant -= energy_phase;
    g
}

fn constant_force_f1(a: f64, t: f64, hbar: f64) -> Result<QuadraticGeneratingFunction> {
    if !(t > 0.0) {
        return Err(caustic(t, "position-position kernel is singular at t <= 0"));
    }
    Ok(QuadraticGeneratingFunction::real(
        GeneratingType::F1,
        1.0 / t,
        -1.0 / t,
        1.0 / t,
        0.5 * a * t,
        0.5 * a * t,
        c(-a * a * t.powi(3) / 24.0, 0.0) + log_term(hbar, 2.0 * PI * hbar * t, 0.5 * PI),
        hbar,
    ))
}

fn constant_force_f2(a: f64, t: f64, hbar: f64) -> QuadraticGeneratingFunction {
    QuadraticGeneratingFunction::real(
        GeneratingType::F2,
        0.0,
        1.0,
        -t,
        a * t,
        -0.5 * a * t * t,
        c(-a * a * t.powi(3) / 6.0, 0.0) + log_term(hbar, 2.0 * PI * hbar, 0.0),
        hbar,
    )
}

fn harmonic_f1(omega: f64, t: f64, hbar: f64) -> Result<QuadraticGeneratingFunction> {
    let wt = omega * t;
    let (s, co) = wt.sin_cos();
    if !(t > 0.0) || s.abs() < CAUSTIC_EPS {
        return Err(caustic(t, "sin(omega t) = 0"));
    }
    // arg of i sin(wt) advances by pi at every caustic
    let arg = 0.5 * PI + PI * (wt / PI).floor();
    Ok(QuadraticGeneratingFunction::real(
        GeneratingType::F1,
        omega * co / s,
        -omega / s,
        omega * co / s,
        0.0,
        0.0,
        log_term(hbar, 2.0 * PI * hbar * s.abs() / omega, arg),
        hbar,
    ))
}

fn harmonic_f2(omega: f64, t: f64, hbar: f64) -> Result<QuadraticGeneratingFunction> {
    let wt = omega * t;
    let (s, co) = wt.sin_cos();
    if co.abs() < CAUSTIC_EPS {
        return Err(caustic(t, "cos(omega t) = 0"));
    }
    let arg = PI * (wt / PI + 0.5).floor();
    Ok(QuadraticGeneratingFunction::real(
        GeneratingType::F2,
        -omega * s / co,
        1.0 / co,
        -s / (co * omega),
        0.0,
        0.0,
        log_term(hbar, 2.0 * PI * hbar * co.abs(), arg),
        hbar,
    ))
}

fn inverted_f1(kappa: f64, t: f64, hbar: f64) -> Result<QuadraticGeneratingFunction> {
    if !(t > 0.0) {
        return Err(caustic(t, "position-position kernel is singular at t <= 0"));
    }
    let kt = kappa * t;
    let (sh, ch) = (kt.sinh(), kt.cosh());
    Ok(QuadraticGeneratingFunction::real(
        GeneratingType::F1,
        kappa * ch / sh,
        -kappa / sh,
        kappa * ch / sh,
        0.0,
        0.0,
        log_term(hbar, 2.0 * PI * hbar * sh / kappa, 0.5 * PI),
        hbar,
    ))
}

fn inverted_f2(kappa: f64, t: f64, hbar: f64) -> QuadraticGeneratingFunction {
    let kt = kappa * t;
    let th = kt.tanh();
    QuadraticGeneratingFunction::real(
        GeneratingType::F2,
        kappa * th,
        1.0 / kt.cosh(),
        -th / kappa,
        0.0,
        0.0,
        log_term(hbar, 2.0 * PI * hbar * kt.cosh(), 0.0),
        hbar,
    )
}

/// Exchange-mode kernel `<q| T(t) A |Q>` as an F1-type form. It equals the
/// identity-mode F2 with the momentum argument renamed.
pub fn exchange_generating(potential: &PotentialSpec, t: f64, hbar: f64) -> Result<QuadraticGeneratingFunction> {
    let mut f = closed_form_generating(potential, GeneratingType::F2, t, hbar)?;
    f.type_tag = GeneratingType::F1;
    Ok(f)
}

/// Mode-dependent closed form of the position-space kernel `exp(iS/hbar)`.
pub fn closed_form_kernel_function(
    potential: &PotentialSpec,
    mode: Mode,
    t: f64,
    hbar: f64,
) -> Result<QuadraticGeneratingFunction> {
    match mode {
        Mode::Identity => closed_form_generating(potential, GeneratingType::F1, t, hbar),
        Mode::Exchange => exchange_generating(potential, t, hbar),
    }
}

/// Additive constant of the series, fixed by the initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstant {
    pub value: Complex64,
}

impl SeriesConstant {
    /// `hbar (i/2) ln(i 2 pi hbar)` for identity mode, where the transport
    /// term carries `(i/2) ln t` at short times; `(i hbar/2) ln(2 pi hbar)`
    /// for exchange mode.
    pub fn for_mode(mode: Mode, hbar: f64) -> Self {
        let value = match mode {
            Mode::Identity => log_term(hbar, 2.0 * PI * hbar, 0.5 * PI),
            Mode::Exchange => log_term(hbar, 2.0 * PI * hbar, 0.0),
        };
        SeriesConstant { value }
    }
}

fn transport_steps(span: f64) -> usize {
    ((40.0 * span).ceil() as usize).max(200)
}

/// Integrate `dS1/ds = (i/2) dp/dq` along the path with departure data
/// `(Q2, departure)`, where `(dq, dp)` is the variation with respect to the
/// shooting variable. Identity mode starts at `T_REF` from the short-time
/// form `S1 = (i/2) ln s`; exchange mode starts from `S1(0) = 0`.
pub fn transport_along(potential: &PotentialSpec, mode: Mode, big_q: f64, departure: f64, t: f64) -> Result<Complex64> {
    match mode {
        Mode::Identity => transport_identity(potential, big_q, departure, t),
        Mode::Exchange => transport_exchange(potential, big_q, departure, t),
    }
}

type State = [f64; 5];

fn axpy(y: &State, h: f64, k: &State) -> State {
    let mut out = *y;
    for i in 0..5 {
        out[i] += h * k[i];
    }
    out
}

fn rk4<F: Fn(f64, &State) -> State>(f: &F, x: f64, y: &State, h: f64) -> State {
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(x + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(x + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..5 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn transport_identity(potential: &PotentialSpec, q0: f64, p0: f64, t: f64) -> Result<Complex64> {
    if !(t >= T_MIN) {
        return Err(caustic(t, format!("t below the caustic guard {T_MIN}").as_str()));
    }
    let s0 = T_REF;
    let (g, k) = (potential.gradient(q0, 0.0), potential.curvature(q0, 0.0));
    let mut y: State = [
        q0 + p0 * s0 - 0.5 * g * s0 * s0,
        p0 - g * s0,
        s0 - k * s0.powi(3) / 6.0,
        1.0 - 0.5 * k * s0 * s0,
        0.5 * s0.ln(),
    ];
    // log time tau = ln s
    let rhs = |tau: f64, y: &State| -> State {
        let s = tau.exp();
        [
            s * y[1],
            -s * potential.gradient(y[0], s),
            s * y[3],
            -s * potential.curvature(y[0], s) * y[2],
            0.5 * s * y[3] / y[2],
        ]
    };
    let (tau0, tau1) = (s0.ln(), t.ln());
    let n = transport_steps(tau1 - tau0) + transport_steps(t);
    let h = (tau1 - tau0) / n as f64;
    for i in 0..n {
        let tau = tau0 + i as f64 * h;
        y = rk4(&rhs, tau, &y, h);
        if !(y[2] > 0.0) || !y.iter().all(|v| v.is_finite()) {
            return Err(caustic(tau.exp(), "transport crossed a focal point"));
        }
    }
    Ok(c(0.0, y[4]))
}

fn transport_exchange(potential: &PotentialSpec, p0: f64, q0: f64, t: f64) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(c(0.0, 0.0));
    }
    if !(t > 0.0) {
        return Err(QhjError::invalid("t", "must be nonnegative"));
    }
    let mut y: State = [q0, p0, 1.0, 0.0, 0.0];
    let rhs = |s: f64, y: &State| -> State {
        [
            y[1],
            -potential.gradient(y[0], s),
            y[3],
            -potential.curvature(y[0], s) * y[2],
            0.5 * y[3] / y[2],
        ]
    };
    let n = transport_steps(10.0 * t);
    let h = t / n as f64;
    for i in 0..n {
        y = rk4(&rhs, i as f64 * h, &y, h);
        if !(y[2] > 0.0) || !y.iter().all(|v| v.is_finite()) {
            return Err(caustic(i as f64 * h, "transport crossed a focal point"));
        }
    }
    Ok(c(0.0, y[4]))
}

/// How `S1` is obtained along a characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TransportMethod {
    /// Integrate `dS1/ds = (i/2) dp/dq` with RK4 (see [`transport_along`]).
    #[default]
    Quadrature,
    /// Use the closed integral `S1 = (i/2) ln J` of the same equation, with
    /// `J = dq(t)/d(shooting variable)` from the symplectic tangent map.
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SeriesOptions {
    pub shooting: ShootingOptions,
    pub transport: TransportMethod,
}

impl SeriesOptions {
    /// Settings for bulk tabulation: coarser trajectory steps and the
    /// variational transport.
    pub fn tabulation() -> Self {
        SeriesOptions {
            shooting: ShootingOptions {
                steps_per_unit_time: 400.0,
                ..Default::default()
            },
            transport: TransportMethod::Variational,
        }
    }
}

/// Series terms at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSample {
    pub s0: f64,
    pub s1: Complex64,
    pub constant: Complex64,
    pub hbar: f64,
    pub shot: Shot,
}

impl SeriesSample {
    /// `S0 + hbar S1 + c`, with `S1` dropped at order 0.
    pub fn total(&self, order: u8) -> Complex64 {
        let s1 = if order >= 1 { self.s1 } else { c(0.0, 0.0) };
        self.s0 + self.hbar * s1 + self.constant
    }
}

/// Evaluate `S0`, `S1` and the constant at `(q1, Q2, t)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_series(
    potential: &PotentialSpec,
    mode: Mode,
    q1: f64,
    big_q: f64,
    t: f64,
    hbar: f64,
    guess: Option<f64>,
    opts: &SeriesOptions,
) -> Result<SeriesSample> {
    check_hbar(hbar)?;
    let shot = shoot(potential, mode, big_q, q1, t, guess, &opts.shooting)?;
    let s1 = match opts.transport {
        TransportMethod::Quadrature => transport_along(potential, mode, big_q, shot.departure, t)?,
        TransportMethod::Variational => {
            if !(shot.jacobian > 0.0) {
                return Err(caustic(t, "path lies beyond a focal point"));
            }
            c(0.0, 0.5 * shot.jacobian.ln())
        }
    };
    if !s1.im.is_finite() {
        return Err(QhjError::NonFinite { time: t });
    }
    Ok(SeriesSample {
        s0: shot.s0,
        s1,
        constant: SeriesConstant::for_mode(mode, hbar).value,
        hbar,
        shot,
    })
}

/// `S1` on a row of `q1` values for fixed `Q2`, continuing the shooting
/// guess along the row.
pub fn solve_order1_transport(
    potential: &PotentialSpec,
    mode: Mode,
    q1_grid: &Grid1D,
    big_q: f64,
    t: f64,
    opts: &SeriesOptions,
) -> Result<Vec<Complex64>> {
    let column = solve_column(potential, mode, q1_grid, big_q, t, 1.0, opts)?;
    Ok(column.into_iter().map(|s| s.s1).collect())
}

fn solve_column(
    potential: &PotentialSpec,
    mode: Mode,
    q1_grid: &Grid1D,
    big_q: f64,
    t: f64,
    hbar: f64,
    opts: &SeriesOptions,
) -> Result<Vec<SeriesSample>> {
    let n = q1_grid.len();
    let mid = n / 2;
    let mut out: Vec<Option<SeriesSample>> = vec![None; n];
    let first = evaluate_series(potential, mode, q1_grid.point(mid), big_q, t, hbar, None, opts)?;
    out[mid] = Some(first);
    let order: Vec<usize> = (0..mid).rev().chain(mid + 1..n).collect();
    let mut prev: (Option<f64>, f64) = (None, first.shot.departure);
    for (k, &i) in order.iter().enumerate() {
        if k == mid {
            prev = (None, first.shot.departure);
        }
        // linear extrapolation from the two previous rows
        let guess = match prev.0 {
            Some(older) => 2.0 * prev.1 - older,
            None => prev.1,
        };
        let s = evaluate_series(potential, mode, q1_grid.point(i), big_q, t, hbar, Some(guess), opts)?;
        prev = (Some(prev.1), s.shot.departure);
        out[i] = Some(s);
    }
    Ok(out.into_iter().map(|s| s.expect("every row filled")).collect())
}

/// Tabulated series solution over a `(q1, Q2)` lattice at fixed `t`.
/// Fields are row-major with `q1` as the row index.
#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct PerturbativeHJSolution {
    #[serde(skip)]
    pub potential: PotentialSpec,
    pub mode: Mode,
    pub t: f64,
    pub hbar: f64,
    pub q1_grid: Grid1D,
    pub Q2_grid: Grid1D,
    pub S0_field: Vec<f64>,
    pub S1_field: Vec<Complex64>,
    pub additive_constant: Complex64,
    pub truncation_order: u8,
}

impl PerturbativeHJSolution {
    #[allow(non_snake_case)]
    pub fn tabulate(
        potential: &PotentialSpec,
        mode: Mode,
        q1_grid: &Grid1D,
        Q2_grid: &Grid1D,
        t: f64,
        hbar: f64,
        truncation_order: u8,
        opts: &SeriesOptions,
    ) -> Result<Self> {
        check_hbar(hbar)?;
        if truncation_order > 1 {
            return Err(QhjError::invalid("truncation_order", "only orders 0 and 1 are available"));
        }
        let columns: Vec<Vec<SeriesSample>> = (0..Q2_grid.len())
            .into_par_iter()
            .map(|j| solve_column(potential, mode, q1_grid, Q2_grid.point(j), t, hbar, opts))
            .collect::<Result<_>>()?;
        let (n, m) = (q1_grid.len(), Q2_grid.len());
        let mut s0 = vec![0.0; n * m];
        let mut s1 = vec![c(0.0, 0.0); n * m];
        for (j, col) in columns.iter().enumerate() {
            for (i, s) in col.iter().enumerate() {
                s0[i * m + j] = s.s0;
                s1[i * m + j] = if truncation_order >= 1 { s.s1 } else { c(0.0, 0.0) };
            }
        }
        Ok(PerturbativeHJSolution {
            potential: potential.clone(),
            mode,
            t,
            hbar,
            q1_grid: *q1_grid,
            Q2_grid: *Q2_grid,
            S0_field: s0,
            S1_field: s1,
            additive_constant: SeriesConstant::for_mode(mode, hbar).value,
            truncation_order,
        })
    }

    /// `S0 + hbar S1 + c` at lattice point `(i, j)`.
    pub fn total(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.Q2_grid.len() + j;
        self.S0_field[k] + self.hbar * self.S1_field[k] + self.additive_constant
    }
}

/// Eq.-(19)-type residual of a complex action `s(q, t)` at one point, from
/// fourth-order central differences.
pub fn qhj_residual<F>(s: F, potential: &PotentialSpec, q: f64, t: f64, hbar: f64, hq: f64, ht: f64) -> Result<Complex64>
where
    F: Fn(f64, f64) -> Result<Complex64>,
{
    let sq = |k: f64| s(q + k * hq, t);
    let (m2, m1, z, p1, p2) = (sq(-2.0)?, sq(-1.0)?, sq(0.0)?, sq(1.0)?, sq(2.0)?);
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * hq);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * hq * hq);
    let st = |k: f64| s(q, t + k * ht);
    let dt = (st(-2.0)? - 8.0 * st(-1.0)? + 8.0 * st(1.0)? - st(2.0)?) / (12.0 * ht);
    Ok(0.5 * d1 * d1 + potential.value(q, t) - 0.5 * I * hbar * d2 + dt)
}

/// Residual of the truncated series at `(q1, Q2, t)`.
#[allow(clippy::too_many_arguments)]
pub fn series_residual(
    potential: &PotentialSpec,
    mode: Mode,
    q1: f64,
    big_q: f64,
    t: f64,
    hbar: f64,
    order: u8,
    opts: &SeriesOptions,
) -> Result<Complex64> {
    let centre = evaluate_series(potential, mode, q1, big_q, t, hbar, None, opts)?;
    let guess = Some(centre.shot.departure);
    let s = |q: f64, tt: f64| -> Result<Complex64> {
        Ok(evaluate_series(potential, mode, q, big_q, tt, hbar, guess, opts)?.total(order))
    };
    qhj_residual(s, potential, q1, t, hbar, 1e-3, 1e-3 * t.max(0.1))
}

/// Residual of an exact quadratic form whose coefficients depend on `t`.
pub fn closed_form_residual(potential: &PotentialSpec, mode: Mode, q1: f64, big_q: f64, t: f64, hbar: f64) -> Result<Complex64> {
    let s = |q: f64, tt: f64| -> Result<Complex64> {
        Ok(closed_form_kernel_function(potential, mode, tt, hbar)?.eval(q, big_q))
    };
    qhj_residual(s, potential, q1, t, hbar, 1e-3, 1e-4 * t.max(0.1))
}

/// Outcome of an initial-condition check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialConditionReport {
    pub mode: Mode,
    pub passed: bool,
    /// Probe times (identity mode) or `[0]`.
    pub times: Vec<f64>,
    /// Worst error at each probe time.
    pub errors: Vec<f64>,
    pub detail: String,
}

/// Kernel at `(q1, Q2, t)` from the closed form when the potential is
/// quadratic, else from the order-1 series.
fn kernel_value(potential: &PotentialSpec, mode: Mode, q1: f64, big_q: f64, t: f64, hbar: f64) -> Result<Complex64> {
    let s = if potential.quadratic_coefficients().is_some() {
        closed_form_kernel_function(potential, mode, t, hbar)?.eval(q1, big_q)
    } else {
        evaluate_series(potential, mode, q1, big_q, t, hbar, None, &SeriesOptions::default())?.total(1)
    };
    Ok((I * s / hbar).exp())
}

/// Identity mode: `int dq1 exp(iS/hbar) g(q1) -> g(Q2)` as `t -> 0+` for
/// Gaussian test functions, with the error required to shrink roughly
/// linearly in `t` over the (three or more, decreasing) probe times.
/// Exchange mode: the `t = 0` kernel equals `(2 pi hbar)^{-1/2} exp(i q Q/hbar)`.
pub fn verify_initial_condition(potential: &PotentialSpec, mode: Mode, hbar: f64, times: &[f64]) -> Result<InitialConditionReport> {
    check_hbar(hbar)?;
    match mode {
        Mode::Identity => verify_identity_limit(potential, hbar, times),
        Mode::Exchange => verify_exchange_start(potential, hbar),
    }
}

fn verify_identity_limit(potential: &PotentialSpec, hbar: f64, times: &[f64]) -> Result<InitialConditionReport> {
    if times.len() < 3 || times.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(QhjError::invalid("times", "need at least three strictly decreasing times"));
    }
    let probes = [(-0.5, 0.7), (0.0, 1.0), (0.8, 0.6)];
    let mut errors = Vec::with_capacity(times.len());
    for &t in times {
        // sample e^{iS/hbar} finely enough for its phase gradient
        let half = 8.0;
        let n = ((4.0 * half * half / (PI * t * hbar)).ceil() as usize).max(2001) | 1;
        let grid = Grid1D::symmetric(half, n)?;
        let w = grid.weights();
        let mut worst: f64 = 0.0;
        for &(centre, width) in &probes {
            let g = |q: f64| (-(q - centre) * (q - centre) / (2.0 * width * width)).exp();
            for big_q in [centre - 0.3, centre, centre + 0.4] {
                let mut acc = c(0.0, 0.0);
                for (k, q) in grid.points().enumerate() {
                    let gq = g(q);
                    if gq < 1e-18 {
                        continue;
                    }
                    acc += w[k] * gq * kernel_value(potential, Mode::Identity, q, big_q, t, hbar)?;
                }
                worst = worst.max((acc - g(big_q)).norm());
            }
        }
        errors.push(worst);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|e| e[0] / e[1]).collect();
    let t_ratios: Vec<f64> = times.windows(2).map(|t| t[0] / t[1]).collect();
    let passed = ratios
        .iter()
        .zip(&t_ratios)
        .all(|(r, tr)| *r > 1.0 && (r.ln() / tr.ln() - 1.0).abs() < 0.25);
    Ok(InitialConditionReport {
        mode: Mode::Identity,
        passed,
        times: times.to_vec(),
        errors,
        detail: format!("error ratios {ratios:?} for time ratios {t_ratios:?}"),
    })
}

fn verify_exchange_start(potential: &PotentialSpec, hbar: f64) -> Result<InitialConditionReport> {
    let norm = (2.0 * PI * hbar).sqrt();
    let mut worst: f64 = 0.0;
    for q in [-1.3, -0.2, 0.0, 0.6, 2.1] {
        for big_q in [-0.9, 0.0, 0.35, 1.7] {
            let want = (I * q * big_q / hbar).exp() / norm;
            let got = kernel_value(potential, Mode::Exchange, q, big_q, 0.0, hbar)?;
            worst = worst.max((got - want).norm());
        }
    }
    Ok(InitialConditionReport {
        mode: Mode::Exchange,
        passed: worst <= 1e-12,
        times: vec![0.0],
        errors: vec![worst],
        detail: "t = 0 kernel against the exchange matrix element".into(),
    })
}

/// Spread of `exp(2i S1) / (-d^2S0/dq1 dQ2)` over sample points, relative to
/// its mean. Zero when the transport term is the van Vleck amplitude.
pub fn van_vleck_spread(potential: &PotentialSpec, points: &[(f64, f64)], t: f64) -> Result<f64> {
    let opts = ShootingOptions::default();
    let mut ratios = Vec::with_capacity(points.len());
    for &(q1, big_q) in points {
        let sample = crate::classical::solve_two_point_with(potential, Mode::Identity, big_q, q1, t, &opts)?;
        let s1 = transport_along(potential, Mode::Identity, big_q, sample.departure, t)?;
        ratios.push((2.0 * I * s1).exp() / (-sample.d2S0_dq1dQ2));
    }
    let mean = ratios.iter().sum::<Complex64>() / ratios.len() as f64;
    Ok(ratios.iter().map(|r| (r - mean).norm()).fold(0.0, f64::max) / mean.norm())
}
