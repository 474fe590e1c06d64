//! Classical principal function by two-point shooting.
//!
//! `S0(q1, Q2, t)` is the action of the classical path that connects the
//! boundary data at `t = 0` with `q(t) = q1`. In identity mode the path starts
//! at `q(0) = Q2` and the departure momentum is the shooting variable; in
//! exchange mode it starts with `p(0) = Q2` and the departure position is
//! shot, and the exchange generating function `q(0) Q2` is added to the action.

use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};
use crate::potential::{flow, FlowState, PotentialSpec};

/// Unitary applied before the dynamics: `U(t) = T(t) A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    /// `A = 1`: `exp(i S1/hbar)` is the position-space propagator.
    #[default]
    Identity,
    /// `A` exchanges position and momentum: `p = Q`, `P = -q` at `t = 0`.
    Exchange,
}

/// Caustic guard: identity-mode kernels are singular at `t = 0`.
pub const T_MIN: f64 = 1e-3;
/// Smallest admissible `|dq(t)/d(shooting variable)|`.
pub const JACOBIAN_MIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingOptions {
    /// Convergence threshold on `|q(t) - q1|`.
    pub tol: f64,
    pub steps_per_unit_time: f64,
    pub min_steps: usize,
    pub max_newton: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            tol: 1e-12,
            steps_per_unit_time: 2000.0,
            min_steps: 200,
            max_newton: 40,
        }
    }
}

impl ShootingOptions {
    pub fn with_tol(tol: f64) -> Self {
        ShootingOptions {
            tol,
            ..Default::default()
        }
    }

    pub(crate) fn steps_for(&self, t: f64) -> usize {
        ((t * self.steps_per_unit_time).ceil() as usize).max(self.min_steps)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol >= 1e-12) {
            return Err(QhjError::invalid("tol", "must be at least 1e-12"));
        }
        if self.max_newton == 0 || self.min_steps == 0 {
            return Err(QhjError::invalid("shooting options", "iteration counts must be positive"));
        }
        Ok(())
    }
}

/// Converged shooting solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    /// Departure momentum (identity) or departure position (exchange).
    pub departure: f64,
    pub end: FlowState,
    /// Principal function including the exchange term.
    pub s0: f64,
    /// `dq(t) / d departure`.
    pub jacobian: f64,
    pub mode: Mode,
}

impl Shot {
    pub fn arrival_momentum(&self) -> f64 {
        self.end.p
    }

    /// `d^2 S0 / dq1^2`.
    pub fn curvature(&self) -> f64 {
        let col = jac_col(self.mode);
        self.end.tangent[1][col] / self.end.tangent[0][col]
    }
}

fn jac_col(mode: Mode) -> usize {
    match mode {
        Mode::Identity => 1,
        Mode::Exchange => 0,
    }
}

fn start_point(mode: Mode, big_q: f64, x: f64) -> (f64, f64) {
    match mode {
        Mode::Identity => (big_q, x),
        Mode::Exchange => (x, big_q),
    }
}

fn evaluate(
    potential: &PotentialSpec,
    mode: Mode,
    big_q: f64,
    x: f64,
    t: f64,
    n_steps: usize,
) -> Result<Shot> {
    let (q0, p0) = start_point(mode, big_q, x);
    let end = flow(potential, q0, p0, 0.0, t, n_steps)?;
    let s0 = match mode {
        Mode::Identity => end.action,
        Mode::Exchange => end.action + x * big_q,
    };
    Ok(Shot {
        departure: x,
        end,
        s0,
        jacobian: end.tangent[0][jac_col(mode)],
        mode,
    })
}

fn initial_guess(mode: Mode, big_q: f64, q1: f64, t: f64) -> f64 {
    match mode {
        Mode::Identity => (q1 - big_q) / t,
        Mode::Exchange => q1 - big_q * t,
    }
}

/// Damped Newton on the shooting map starting from `guess`.
pub fn shoot(
    potential: &PotentialSpec,
    mode: Mode,
    big_q: f64,
    q1: f64,
    t: f64,
    guess: Option<f64>,
    opts: &ShootingOptions,
) -> Result<Shot> {
    opts.validate()?;
    if mode == Mode::Identity && !(t >= T_MIN) {
        return Err(QhjError::Caustic {
            time: t,
            reason: format!("t below the caustic guard {T_MIN}"),
        });
    }
    if mode == Mode::Exchange && t == 0.0 {
        let end = FlowState::start(q1, big_q);
        return Ok(Shot {
            departure: q1,
            end,
            s0: q1 * big_q,
            jacobian: 1.0,
            mode,
        });
    }
    if !(t > 0.0) {
        return Err(QhjError::invalid("t", "must be positive"));
    }
    let n_steps = opts.steps_for(t);
    let x0 = guess.unwrap_or_else(|| initial_guess(mode, big_q, q1, t));
    match newton(potential, mode, big_q, q1, t, x0, n_steps, opts) {
        Ok(s) => Ok(s),
        Err(QhjError::NoConvergence { .. }) => continuation(potential, mode, big_q, q1, t, n_steps, opts),
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn newton(
    potential: &PotentialSpec,
    mode: Mode,
    big_q: f64,
    q1: f64,
    t: f64,
    x0: f64,
    n_steps: usize,
    opts: &ShootingOptions,
) -> Result<Shot> {
    let mut shot = evaluate(potential, mode, big_q, x0, t, n_steps)?;
    let mut residual = shot.end.q - q1;
    // rounding along the trajectory grows with the coordinate scale
    let tol = opts.tol * q1.abs().max(big_q.abs()).max(1.0);
    for _ in 0..opts.max_newton {
        if shot.jacobian.abs() < JACOBIAN_MIN {
            return Err(QhjError::Caustic {
                time: t,
                reason: format!("shooting jacobian {:e} below {JACOBIAN_MIN:e}", shot.jacobian),
            });
        }
        let converged = residual.abs() <= tol;
        let step = -residual / shot.jacobian;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = evaluate(potential, mode, big_q, shot.departure + lambda * step, t, n_steps);
            if let Ok(trial) = trial {
                let r = trial.end.q - q1;
                if r.abs() < residual.abs() || r.abs() <= tol.min(1e-14 * q1.abs().max(1.0)) {
                    accepted = Some((trial, r));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, r)) => {
                shot = trial;
                residual = r;
            }
            None if converged => break,
            None => {
                return Err(QhjError::NoConvergence {
                    iterations: opts.max_newton,
                    residual: residual.abs(),
                })
            }
        }
        // one polishing step past the tolerance
        if converged {
            break;
        }
    }
    if residual.abs() > tol {
        return Err(QhjError::NoConvergence {
            iterations: opts.max_newton,
            residual: residual.abs(),
        });
    }
    if shot.jacobian.abs() < JACOBIAN_MIN {
        return Err(QhjError::Caustic {
            time: t,
            reason: format!("shooting jacobian {:e} below {JACOBIAN_MIN:e}", shot.jacobian),
        });
    }
    Ok(shot)
}

/// Homotopy in `t`: solve on a ladder of shorter times, reusing each solution
/// as the next guess.
fn continuation(
    potential: &PotentialSpec,
    mode: Mode,
    big_q: f64,
    q1: f64,
    t: f64,
    n_steps: usize,
    opts: &ShootingOptions,
) -> Result<Shot> {
    let rungs = 16;
    let mut guess = None;
    let mut last = None;
    for k in 1..=rungs {
        let tk = t * k as f64 / rungs as f64;
        if mode == Mode::Identity && tk < T_MIN {
            continue;
        }
        let x0 = guess.unwrap_or_else(|| initial_guess(mode, big_q, q1, tk));
        let steps = ((n_steps * k) / rungs).max(opts.min_steps);
        let s = newton(potential, mode, big_q, q1, tk, x0, steps, opts)?;
        guess = Some(s.departure);
        last = Some(s);
    }
    last.ok_or(QhjError::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
    })
}

/// Principal function with derivatives at one `(q1, Q2, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PrincipalFunctionSample {
    pub q1: f64,
    pub Q2: f64,
    pub t: f64,
    pub mode: Mode,
    pub S0: f64,
    pub dS0_dq1: f64,
    pub dS0_dQ2: f64,
    pub d2S0_dq1dQ2: f64,
    /// Momentum at `q1` on the connecting path.
    pub arrival_p: f64,
    /// Departure momentum (identity) or departure position (exchange).
    pub departure: f64,
    pub jacobian: f64,
}

impl PrincipalFunctionSample {
    /// Departure momentum `P2` of the path; `-dS0/dQ2` in identity mode.
    pub fn departure_momentum(&self) -> f64 {
        match self.mode {
            Mode::Identity => self.departure,
            Mode::Exchange => self.Q2,
        }
    }
}

fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Solve the two-point problem in identity mode.
#[allow(non_snake_case)]
pub fn solve_two_point(
    potential: &PotentialSpec,
    Q2: f64,
    q1: f64,
    t: f64,
    tol: f64,
) -> Result<PrincipalFunctionSample> {
    solve_two_point_with(potential, Mode::Identity, Q2, q1, t, &ShootingOptions::with_tol(tol))
}

/// Two-point solution with derivatives from central differences of
/// neighbouring shooting solutions.
#[allow(non_snake_case)]
pub fn solve_two_point_with(
    potential: &PotentialSpec,
    mode: Mode,
    Q2: f64,
    q1: f64,
    t: f64,
    opts: &ShootingOptions,
) -> Result<PrincipalFunctionSample> {
    let centre = shoot(potential, mode, Q2, q1, t, None, opts)?;
    let g = Some(centre.departure);
    let hq = fd_step(q1);
    let hQ = fd_step(Q2);
    let qp = shoot(potential, mode, Q2, q1 + hq, t, g, opts)?;
    let qm = shoot(potential, mode, Q2, q1 - hq, t, g, opts)?;
    let Qp = shoot(potential, mode, Q2 + hQ, q1, t, g, opts)?;
    let Qm = shoot(potential, mode, Q2 - hQ, q1, t, g, opts)?;
    Ok(PrincipalFunctionSample {
        q1,
        Q2,
        t,
        mode,
        S0: centre.s0,
        dS0_dq1: (qp.s0 - qm.s0) / (2.0 * hq),
        dS0_dQ2: (Qp.s0 - Qm.s0) / (2.0 * hQ),
        d2S0_dq1dQ2: (Qp.arrival_momentum() - Qm.arrival_momentum()) / (2.0 * hQ),
        arrival_p: centre.arrival_momentum(),
        departure: centre.departure,
        jacobian: centre.jacobian,
    })
}

/// `|dS0/dq1^2 / 2 + V(q1, t) + dS0/dt|` with the time derivative from a
/// central stencil of neighbouring solutions.
pub fn residual_check(
    sample: &PrincipalFunctionSample,
    potential: &PotentialSpec,
    opts: &ShootingOptions,
) -> Result<f64> {
    let h = 1e-4 * sample.t.max(T_MIN);
    let g = Some(sample.departure);
    let plus = shoot(potential, sample.mode, sample.Q2, sample.q1, sample.t + h, g, opts)?;
    let minus = shoot(potential, sample.mode, sample.Q2, sample.q1, sample.t - h, g, opts)?;
    let ds_dt = (plus.s0 - minus.s0) / (2.0 * h);
    Ok((0.5 * sample.dS0_dq1 * sample.dS0_dq1 + potential.value(sample.q1, sample.t) + ds_dt).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn harmonic() -> PotentialSpec {
        PotentialSpec::harmonic(1.0).unwrap()
    }

    #[test]
    fn free_particle_values() {
        let s = solve_two_point(&PotentialSpec::Free, 0.0, 3.0, 2.0, 1e-12).unwrap();
        assert!((s.S0 - 2.25).abs() < 1e-10);
        assert!((s.dS0_dq1 - 1.5).abs() < 1e-7);
        assert!((s.arrival_p - 1.5).abs() < 1e-12);
        assert!((s.d2S0_dq1dQ2 + 0.5).abs() < 1e-6);
    }

    #[test]
    fn constant_force_value() {
        let s = solve_two_point(&PotentialSpec::ConstantForce { a: 2.0 }, 0.0, 1.0, 1.0, 1e-12).unwrap();
        assert!((s.S0 - 4.0 / 3.0).abs() < 1e-10, "{}", s.S0);
    }

    #[test]
    fn harmonic_quarter_period() {
        let s = solve_two_point(&harmonic(), 1.0, 1.0, FRAC_PI_2, 1e-12).unwrap();
        assert!((s.S0 + 1.0).abs() < 1e-10, "{}", s.S0);
        assert!((s.d2S0_dq1dQ2 + 1.0).abs() < 1e-6);
    }

    #[test]
    fn momenta_match_derivatives() {
        let v = PotentialSpec::polynomial(vec![0.0, 0.0, 0.5, 0.05]).unwrap();
        let s = solve_two_point(&v, 0.4, -0.2, 0.8, 1e-12).unwrap();
        assert!((s.dS0_dq1 - s.arrival_p).abs() < 1e-7);
        assert!((-s.dS0_dQ2 - s.departure_momentum()).abs() < 1e-7);
        // mixed partial equals -1/J
        assert!((s.d2S0_dq1dQ2 + 1.0 / s.jacobian).abs() < 1e-7);
    }

    #[test]
    fn residuals_small() {
        let opts = ShootingOptions::default();
        let s = solve_two_point(&PotentialSpec::Free, -0.5, 1.2, 0.7, 1e-12).unwrap();
        assert!(residual_check(&s, &PotentialSpec::Free, &opts).unwrap() < 1e-6);
        let s = solve_two_point(&harmonic(), 0.3, -0.9, FRAC_PI_4, 1e-12).unwrap();
        assert!(residual_check(&s, &harmonic(), &opts).unwrap() < 1e-5);
    }

    #[test]
    fn caustics_are_errors() {
        let e = solve_two_point(&harmonic(), 1.0, 0.5, PI, 1e-12).unwrap_err();
        assert!(matches!(e, QhjError::Caustic { .. }), "{e:?}");
        let e = solve_two_point(&PotentialSpec::Free, 0.0, 0.5, 1e-4, 1e-12).unwrap_err();
        assert!(matches!(e, QhjError::Caustic { .. }));
        assert!(solve_two_point(&PotentialSpec::Free, 0.0, 0.5, 1.0, 1e-13).is_err());
    }

    #[test]
    fn exchange_mode_at_zero_time() {
        let s = solve_two_point_with(&harmonic(), Mode::Exchange, 0.7, -0.4, 0.0, &ShootingOptions::default());
        let s = s.unwrap();
        assert!((s.S0 - (-0.4 * 0.7)).abs() < 1e-14);
        assert!((s.dS0_dq1 - 0.7).abs() < 1e-9);
        assert!((s.dS0_dQ2 + 0.4).abs() < 1e-9);
    }

    #[test]
    fn exchange_mode_matches_second_type_form() {
        // -(q^2 + Q^2) tan t / 2 + q Q sec t
        let t = 0.6;
        let (q, big_q) = (0.8, -0.3);
        let s = shoot(&harmonic(), Mode::Exchange, big_q, q, t, None, &ShootingOptions::default()).unwrap();
        let want = -0.5 * (q * q + big_q * big_q) * t.tan() + q * big_q / t.cos();
        assert!((s.s0 - want).abs() < 1e-10, "{} vs {want}", s.s0);
        assert!((s.jacobian - t.cos()).abs() < 1e-10);
    }
}
