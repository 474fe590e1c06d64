//! Hamiltonians `H = p^2/2 + V(q, t)` (unit mass) and classical trajectories.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{QhjError, Result};

type Evaluator = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A user supplied potential with its first and second q-derivatives.
#[derive(Clone)]
pub struct CustomPotential {
    name: String,
    value: Arc<Evaluator>,
    d1: Arc<Evaluator>,
    d2: Arc<Evaluator>,
    time_dependent: bool,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("name", &self.name)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum PotentialSpec {
    Free,
    /// `V = -a q`.
    ConstantForce { a: f64 },
    /// `V = omega^2 q^2 / 2`.
    Harmonic { omega: f64 },
    /// `V = sum_k coeffs[k] q^k`.
    Polynomial { coeffs: Vec<f64> },
    Custom(CustomPotential),
}

const PROBE_Q: [f64; 6] = [-2.0, -1.0, -0.3, 0.4, 1.1, 2.0];
const PROBE_T: [f64; 2] = [0.0, 0.7];

impl PotentialSpec {
    pub fn harmonic(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(QhjError::invalid("omega", "must be positive"));
        }
        Ok(PotentialSpec::Harmonic { omega })
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(QhjError::invalid("coeffs", "non-finite coefficient"));
        }
        Ok(PotentialSpec::Polynomial { coeffs })
    }

    /// Custom potential; derivative closures are checked against central
    /// differences of `value` on a fixed set of probe points.
    pub fn custom<V, D1, D2>(
        name: impl Into<String>,
        time_dependent: bool,
        value: V,
        d1: D1,
        d2: D2,
    ) -> Result<Self>
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let h = 1e-4;
        for &t in &PROBE_T {
            for &q in &PROBE_Q {
                let fd1 = (value(q + h, t) - value(q - h, t)) / (2.0 * h);
                let fd2 = (d1(q + h, t) - d1(q - h, t)) / (2.0 * h);
                let (a1, a2) = (d1(q, t), d2(q, t));
                if (fd1 - a1).abs() > 1e-6 * a1.abs().max(1.0) {
                    return Err(QhjError::invalid(
                        "custom potential",
                        format!("first derivative inconsistent at q={q}, t={t}: {a1} vs {fd1}"),
                    ));
                }
                if (fd2 - a2).abs() > 1e-6 * a2.abs().max(1.0) {
                    return Err(QhjError::invalid(
                        "custom potential",
                        format!("second derivative inconsistent at q={q}, t={t}: {a2} vs {fd2}"),
                    ));
                }
            }
        }
        Ok(PotentialSpec::Custom(CustomPotential {
            name: name.into(),
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
            time_dependent,
        }))
    }

    pub fn value(&self, q: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::ConstantForce { a } => -a * q,
            PotentialSpec::Harmonic { omega } => 0.5 * omega * omega * q * q,
            PotentialSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * q + c),
            PotentialSpec::Custom(c) => (c.value)(q, t),
        }
    }

    /// `dV/dq`.
    pub fn gradient(&self, q: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::ConstantForce { a } => -a,
            PotentialSpec::Harmonic { omega } => omega * omega * q,
            PotentialSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * q + k as f64 * c),
            PotentialSpec::Custom(c) => (c.d1)(q, t),
        }
    }

    /// `d^2V/dq^2`.
    pub fn curvature(&self, q: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Free | PotentialSpec::ConstantForce { .. } => 0.0,
            PotentialSpec::Harmonic { omega } => omega * omega,
            PotentialSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * q + (k * (k - 1)) as f64 * c),
            PotentialSpec::Custom(c) => (c.d2)(q, t),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, PotentialSpec::Custom(c) if c.time_dependent)
    }

    /// `(c0, c1, c2)` with `V = c0 + c1 q + c2 q^2`, for quadratic potentials.
    pub fn quadratic_coefficients(&self) -> Option<[f64; 3]> {
        match self {
            PotentialSpec::Free => Some([0.0; 3]),
            PotentialSpec::ConstantForce { a } => Some([0.0, -a, 0.0]),
            PotentialSpec::Harmonic { omega } => Some([0.0, 0.0, 0.5 * omega * omega]),
            PotentialSpec::Polynomial { coeffs } => {
                if polynomial_degree(coeffs) <= 2 {
                    let c = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
                    Some([c(0), c(1), c(2)])
                } else {
                    None
                }
            }
            PotentialSpec::Custom(_) => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            PotentialSpec::Free => "free".into(),
            PotentialSpec::ConstantForce { a } => format!("constant-force(a={a})"),
            PotentialSpec::Harmonic { omega } => format!("harmonic(omega={omega})"),
            PotentialSpec::Polynomial { coeffs } => format!("polynomial({coeffs:?})"),
            PotentialSpec::Custom(c) => format!("custom({})", c.name),
        }
    }
}

fn polynomial_degree(coeffs: &[f64]) -> usize {
    coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)
}

/// True exactly for potentials whose propagator has a closed quadratic form.
pub fn is_quadratic(potential: &PotentialSpec) -> bool {
    potential.quadratic_coefficients().is_some()
}

/// Sampled classical trajectory with the accumulated Lagrangian action.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub action: f64,
}

impl ClassicalTrajectory {
    pub fn final_q(&self) -> f64 {
        *self.q.last().unwrap()
    }

    pub fn final_p(&self) -> f64 {
        *self.p.last().unwrap()
    }

    pub fn energy(&self, potential: &PotentialSpec, i: usize) -> f64 {
        0.5 * self.p[i] * self.p[i] + potential.value(self.q[i], self.times[i])
    }
}

// Fourth-order Forest-Ruth / Yoshida composition of the leapfrog.
const CBRT2: f64 = 1.259_921_049_894_873_2;
const W1: f64 = 1.0 / (2.0 - CBRT2);
const W0: f64 = -CBRT2 / (2.0 - CBRT2);
const DRIFT: [f64; 4] = [0.5 * W1, 0.5 * (W0 + W1), 0.5 * (W0 + W1), 0.5 * W1];
const KICK: [f64; 3] = [W1, W0, W1];

/// Phase point together with its action and tangent map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub q: f64,
    pub p: f64,
    pub action: f64,
    /// `d(q, p) / d(q0, p0)`, row-major.
    pub tangent: [[f64; 2]; 2],
}

impl FlowState {
    pub fn start(q: f64, p: f64) -> Self {
        FlowState {
            q,
            p,
            action: 0.0,
            tangent: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// One symplectic step of length `dt` from time `t`.
    #[inline]
    pub fn step(&mut self, potential: &PotentialSpec, t: f64, dt: f64) {
        let mut s = t;
        for k in 0..4 {
            let h = DRIFT[k] * dt;
            self.action += 0.5 * self.p * self.p * h;
            self.q += self.p * h;
            for col in 0..2 {
                self.tangent[0][col] += h * self.tangent[1][col];
            }
            s += h;
            if k < 3 {
                let h = KICK[k] * dt;
                let curv = potential.curvature(self.q, s);
                self.action -= potential.value(self.q, s) * h;
                self.p -= potential.gradient(self.q, s) * h;
                for col in 0..2 {
                    self.tangent[1][col] -= h * curv * self.tangent[0][col];
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite() && self.action.is_finite()
    }
}

/// Integrate from `(q0, p0)` at `t0` over `duration` in `n_steps` steps,
/// returning the end state with tangent map.
pub fn flow(
    potential: &PotentialSpec,
    q0: f64,
    p0: f64,
    t0: f64,
    duration: f64,
    n_steps: usize,
) -> Result<FlowState> {
    let mut st = FlowState::start(q0, p0);
    let dt = duration / n_steps as f64;
    for i in 0..n_steps {
        let t = t0 + i as f64 * dt;
        st.step(potential, t, dt);
        if !st.is_finite() {
            return Err(QhjError::NonFinite { time: t + dt });
        }
    }
    Ok(st)
}

/// Trajectory under `q' = p, p' = -dV/dq` from `t = 0` to `t_final`.
pub fn integrate_trajectory(
    potential: &PotentialSpec,
    q0: f64,
    p0: f64,
    t_final: f64,
    n_steps: usize,
) -> Result<ClassicalTrajectory> {
    integrate_trajectory_from(potential, q0, p0, 0.0, t_final, n_steps)
}

/// Same as [`integrate_trajectory`] starting at time `t0`.
pub fn integrate_trajectory_from(
    potential: &PotentialSpec,
    q0: f64,
    p0: f64,
    t0: f64,
    t_final: f64,
    n_steps: usize,
) -> Result<ClassicalTrajectory> {
    if n_steps == 0 {
        return Err(QhjError::invalid("n_steps", "must be at least 1"));
    }
    if !(t_final > t0) {
        return Err(QhjError::invalid("t_final", "must exceed the start time"));
    }
    let dt = (t_final - t0) / n_steps as f64;
    let mut st = FlowState::start(q0, p0);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut qs = Vec::with_capacity(n_steps + 1);
    let mut ps = Vec::with_capacity(n_steps + 1);
    times.push(t0);
    qs.push(q0);
    ps.push(p0);
    for i in 0..n_steps {
        let t = t0 + i as f64 * dt;
        st.step(potential, t, dt);
        if !st.is_finite() {
            return Err(QhjError::NonFinite { time: t + dt });
        }
        times.push(if i + 1 == n_steps { t_final } else { t + dt });
        qs.push(st.q);
        ps.push(st.p);
    }
    Ok(ClassicalTrajectory {
        times,
        q: qs,
        p: ps,
        action: st.action,
    })
}
