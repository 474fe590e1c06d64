//! Heisenberg-picture solutions read off quadratic generating functions.
//!
//! For an identity-mode F1 the transformation relations give the initial
//! variables as affine functions of the evolved ones; solving them the other
//! way yields `q_H(t)`, `p_H(t)` in terms of `q_S`, `p_S`. Non-quadratic
//! generating functions lead to operator-ordering questions and are not
//! handled.

use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};
use crate::generating::{extract_canonical_map, GeneratingType, LinearCanonicalMap, QuadraticGeneratingFunction};
use crate::potential::PotentialSpec;
use crate::propagation::split_step_converged;
use crate::series::closed_form_generating;
use crate::state::WaveFunction;

/// `(q_H, p_H) = matrix (q_S, p_S) + shift` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergSolution {
    pub t: f64,
    pub map: LinearCanonicalMap,
}

impl HeisenbergSolution {
    pub fn apply(&self, q: f64, p: f64) -> (f64, f64) {
        self.map.apply(q, p)
    }

    /// `[A, B, C, D, shift_q, shift_p]`.
    pub fn coefficients(&self) -> [f64; 6] {
        let m = self.map.matrix;
        [m[0][0], m[0][1], m[1][0], m[1][1], self.map.shift[0], self.map.shift[1]]
    }
}

/// Solve the relations of an identity-mode F1 at time `t` for the evolved
/// operators.
pub fn heisenberg_from_generating(f: &QuadraticGeneratingFunction, t: f64) -> Result<HeisenbergSolution> {
    if f.type_tag != GeneratingType::F1 {
        return Err(QhjError::invalid("generating function", "Heisenberg solutions are read from an F1"));
    }
    let back = extract_canonical_map(f)?;
    Ok(HeisenbergSolution { t, map: back.inverse() })
}

/// Heisenberg solution of a quadratic potential from its closed-form F1.
pub fn heisenberg_for_potential(potential: &PotentialSpec, t: f64, hbar: f64) -> Result<HeisenbergSolution> {
    heisenberg_from_generating(&closed_form_generating(potential, GeneratingType::F1, t, hbar)?, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeisenbergReport {
    pub passed: bool,
    pub tol: f64,
    /// Largest residual of `dq_H/dt - p_H` over the affine coefficients.
    pub position_residual: f64,
    /// Largest residual of `dp_H/dt + V'(q_H)`.
    pub momentum_residual: f64,
    pub samples: usize,
}

/// Check the equations of motion on a family of solutions sampled on a
/// uniform time grid, with fourth-order central differences at interior
/// samples. `V'(q_H) = c1 + 2 c2 q_H` is applied to the coefficients.
pub fn verify_heisenberg_equations(family: &[HeisenbergSolution], potential: &PotentialSpec, tol: f64) -> Result<HeisenbergReport> {
    let [_, c1, c2] = potential
        .quadratic_coefficients()
        .ok_or_else(|| QhjError::UnsupportedPotential("Heisenberg equations are checked for quadratic potentials".into()))?;
    if family.len() < 5 {
        return Err(QhjError::invalid("family", "need at least five time samples"));
    }
    let dt = family[1].t - family[0].t;
    if !(dt > 0.0) || family.windows(2).any(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(QhjError::invalid("family", "times must be uniformly increasing"));
    }
    let coef: Vec<[f64; 6]> = family.iter().map(|s| s.coefficients()).collect();
    let (mut rq, mut rp) = (0.0f64, 0.0f64);
    for i in 2..family.len() - 2 {
        let d = |k: usize| (coef[i - 2][k] - 8.0 * coef[i - 1][k] + 8.0 * coef[i + 1][k] - coef[i + 2][k]) / (12.0 * dt);
        let c = &coef[i];
        // q_H row: (A, B, shift_q); p_H row: (C, D, shift_p)
        for (qk, pk, constant) in [(0, 2, 0.0), (1, 3, 0.0), (4, 5, c1)] {
            rq = rq.max((d(qk) - c[pk]).abs());
            rp = rp.max((d(pk) + constant + 2.0 * c2 * c[qk]).abs());
        }
    }
    Ok(HeisenbergReport {
        passed: rq < tol && rp < tol,
        tol,
        position_residual: rq,
        momentum_residual: rp,
        samples: family.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EhrenfestReport {
    pub passed: bool,
    pub tol: f64,
    pub t: f64,
    pub predicted: [f64; 2],
    pub oracle: [f64; 2],
    pub error: f64,
    pub oracle_steps: usize,
}

/// Compare the affine map applied to the initial means with the means of the
/// split-step evolved state.
pub fn ehrenfest_crosscheck(sol: &HeisenbergSolution, potential: &PotentialSpec, psi0: &WaveFunction, tol: f64) -> Result<EhrenfestReport> {
    if potential.quadratic_coefficients().is_none() {
        return Err(QhjError::UnsupportedPotential("Ehrenfest means are exact only for quadratic potentials".into()));
    }
    let m0 = psi0.moments();
    let predicted = sol.apply(m0.mean_q, m0.mean_p);
    let (psi, steps) = split_step_converged(potential, psi0, sol.t, 256)?;
    let m = psi.moments();
    let error = (m.mean_q - predicted.0).abs().max((m.mean_p - predicted.1).abs());
    Ok(EhrenfestReport {
        passed: error < tol,
        tol,
        t: sol.t,
        predicted: [predicted.0, predicted.1],
        oracle: [m.mean_q, m.mean_p],
        error,
        oracle_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::state::make_gaussian;

    #[test]
    fn constant_force_solution() {
        let a = 0.8;
        let v = PotentialSpec::polynomial(vec![0.0, -a]).unwrap();
        for t in [0.3, 1.0, 2.0] {
            let s = heisenberg_for_potential(&v, t, 1.0).unwrap();
            let want = [1.0, t, 0.0, 1.0, 0.5 * a * t * t, a * t];
            for (x, y) in s.coefficients().iter().zip(want) {
                assert!((x - y).abs() < 1e-10, "{:?}", s.coefficients());
            }
        }
    }

    #[test]
    fn harmonic_solution() {
        let v = PotentialSpec::harmonic(1.0).unwrap();
        for t in [0.4, 1.3, 2.9] {
            let s = heisenberg_for_potential(&v, t, 1.0).unwrap();
            let want = [t.cos(), t.sin(), -t.sin(), t.cos(), 0.0, 0.0];
            for (x, y) in s.coefficients().iter().zip(want) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!((s.map.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn small_time_is_near_identity() {
        let v = PotentialSpec::polynomial(vec![0.2, 0.5, 0.7]).unwrap();
        let s = heisenberg_for_potential(&v, 1e-4, 1.0).unwrap();
        let d = s.map.max_difference(&LinearCanonicalMap::identity());
        assert!(d < 2e-4, "{d}");
    }

    #[test]
    fn equations_of_motion() {
        let cases = [
            (PotentialSpec::polynomial(vec![0.0, -0.8]).unwrap(), 2.0),
            (PotentialSpec::harmonic(1.0).unwrap(), 3.0),
            (PotentialSpec::polynomial(vec![0.0, 0.0]).unwrap(), 2.0),
        ];
        for (v, span) in cases {
            let family: Vec<_> = (1..=200)
                .map(|k| heisenberg_for_potential(&v, span * k as f64 / 200.0, 1.0).unwrap())
                .collect();
            let r = verify_heisenberg_equations(&family, &v, 1e-6).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn free_momentum_is_constant() {
        let v = PotentialSpec::polynomial(vec![0.0]).unwrap();
        let p: Vec<f64> = [0.5, 1.0, 1.5].iter().map(|&t| heisenberg_for_potential(&v, t, 1.0).unwrap().coefficients()[3]).collect();
        assert!(p.iter().all(|&d| d == p[0]));
    }

    #[test]
    fn flow_property() {
        let v = PotentialSpec::polynomial(vec![0.1, 0.3, 0.5]).unwrap();
        let a = heisenberg_for_potential(&v, 0.4, 1.0).unwrap().map;
        let b = heisenberg_for_potential(&v, 0.9, 1.0).unwrap().map;
        let ab = heisenberg_for_potential(&v, 1.3, 1.0).unwrap().map;
        assert!(b.compose(&a).max_difference(&ab) < 1e-9);
    }

    #[test]
    fn ehrenfest_means() {
        let grid = Grid1D::symmetric(10.0, 512).unwrap();
        let osc = PotentialSpec::harmonic(1.0).unwrap();
        let psi = make_gaussian(grid, 1.0, 0.5, 0.5f64.sqrt(), 1.0).unwrap();
        let s = heisenberg_for_potential(&osc, 0.8, 1.0).unwrap();
        assert!(ehrenfest_crosscheck(&s, &osc, &psi, 1e-6).unwrap().passed);

        let force = PotentialSpec::polynomial(vec![0.0, -0.5]).unwrap();
        let s = heisenberg_for_potential(&force, 1.0, 1.0).unwrap();
        let r = ehrenfest_crosscheck(&s, &force, &psi, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");

        let still = make_gaussian(grid, 0.0, 0.0, 0.5f64.sqrt(), 1.0).unwrap();
        let s = heisenberg_for_potential(&osc, 1.7, 1.0).unwrap();
        let r = ehrenfest_crosscheck(&s, &osc, &still, 1e-6).unwrap();
        assert!(r.oracle[0].abs() < 1e-12 && r.oracle[1].abs() < 1e-12);
    }
}
