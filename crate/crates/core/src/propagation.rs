//! Sampled propagator kernels `exp(iS/hbar)` and the split-step reference
//! solver they are checked against.

use std::f64::consts::FRAC_PI_2 as NYQUIST_STEP;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};
use crate::fourier::{wavenumbers, FftPair};
use crate::generating::{GeneratingType, QuadraticGeneratingFunction};
use crate::grid::Grid1D;
use crate::potential::PotentialSpec;
use crate::series::PerturbativeHJSolution;
use crate::state::{check_hbar, fidelity, l2_distance, make_gaussian, phase_aligned_distance, WaveFunction};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Origin of the action `S(q, Q)` whose exponential is sampled.
#[derive(Debug, Clone, Copy)]
pub enum KernelSource<'a> {
    /// An F1-type form valid at time `t`.
    Closed { f: &'a QuadraticGeneratingFunction, t: f64 },
    /// A tabulated series solution; the grids must be its own.
    Series(&'a PerturbativeHJSolution),
}

impl KernelSource<'_> {
    pub fn hbar(&self) -> f64 {
        match self {
            KernelSource::Closed { f, .. } => f.hbar,
            KernelSource::Series(s) => s.hbar,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            KernelSource::Closed { t, .. } => *t,
            KernelSource::Series(s) => s.t,
        }
    }
}

/// Kernel samples `K[i][j] = exp(i S(q_i, Q_j) / hbar)`, row-major in `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PropagatorMatrix {
    pub q_grid: Grid1D,
    pub Q_grid: Grid1D,
    pub entries: Vec<Complex64>,
    pub hbar: f64,
    pub t: f64,
    pub weights: Vec<f64>,
}

impl PropagatorMatrix {
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.Q_grid.len() + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let m = self.Q_grid.len();
        &self.entries[i * m..(i + 1) * m]
    }

    /// `self . diag(w) . inner`: the kernel of running `inner` first.
    pub fn compose(&self, inner: &PropagatorMatrix) -> Result<PropagatorMatrix> {
        if !self.Q_grid.same_as(&inner.q_grid) {
            return Err(QhjError::GridMismatch("inner output grid differs from outer input grid".into()));
        }
        if self.hbar != inner.hbar {
            return Err(QhjError::GridMismatch("kernels carry different hbar".into()));
        }
        let (n, k, m) = (self.q_grid.len(), self.Q_grid.len(), inner.Q_grid.len());
        let entries: Vec<Complex64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut row = vec![ZERO; m];
                for l in 0..k {
                    let a = self.entry(i, l) * self.weights[l];
                    for (r, b) in row.iter_mut().zip(inner.row(l)) {
                        *r += a * b;
                    }
                }
                row
            })
            .collect();
        debug_assert_eq!(entries.len(), n * m);
        Ok(PropagatorMatrix {
            q_grid: self.q_grid,
            Q_grid: inner.Q_grid,
            entries,
            hbar: self.hbar,
            t: self.t + inner.t,
            weights: inner.weights.clone(),
        })
    }
}

/// Largest `|Re S(q, Q_{j+1}) - Re S(q, Q_j)| / hbar` over the lattice.
fn max_phase_step(actions: &[Complex64], n_cols: usize, hbar: f64) -> f64 {
    actions
        .chunks(n_cols)
        .flat_map(|row| row.windows(2).map(|w| (w[1].re - w[0].re).abs()))
        .fold(0.0, f64::max)
        / hbar
}

/// Sample the kernel. Fails with [`QhjError::Aliasing`] when the phase
/// advances by `pi/2` or more between neighbouring `Q` samples.
#[allow(non_snake_case)]
pub fn build_propagator(source: KernelSource<'_>, q_grid: &Grid1D, Q_grid: &Grid1D) -> Result<PropagatorMatrix> {
    let hbar = source.hbar();
    check_hbar(hbar)?;
    let (n, m) = (q_grid.len(), Q_grid.len());
    let actions: Vec<Complex64> = match source {
        KernelSource::Closed { f, .. } => {
            if f.type_tag != GeneratingType::F1 {
                return Err(QhjError::invalid("generating function", "a position kernel needs an F1 form"));
            }
            let qs = q_grid.to_vec();
            let big_qs = Q_grid.to_vec();
            qs.iter().flat_map(|&q| big_qs.iter().map(move |&bq| f.eval(q, bq))).collect()
        }
        KernelSource::Series(sol) => {
            if !sol.q1_grid.same_as(q_grid) || !sol.Q2_grid.same_as(Q_grid) {
                return Err(QhjError::GridMismatch("tabulated solution lives on different grids".into()));
            }
            (0..n).flat_map(|i| (0..m).map(move |j| sol.total(i, j))).collect()
        }
    };
    if actions.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
        return Err(QhjError::NonFinite { time: source.time() });
    }
    let step = max_phase_step(&actions, m, hbar);
    if step >= NYQUIST_STEP {
        return Err(QhjError::Aliasing { phase_step: step });
    }
    Ok(PropagatorMatrix {
        q_grid: *q_grid,
        Q_grid: *Q_grid,
        entries: actions.iter().map(|s| (I * s / hbar).exp()).collect(),
        hbar,
        t: source.time(),
        weights: Q_grid.weights(),
    })
}

/// `psi(q) = int dQ K(q, Q) psi_Q(Q)` by trapezoidal quadrature.
pub fn apply_propagator(k: &PropagatorMatrix, psi_big_q: &WaveFunction) -> Result<WaveFunction> {
    if !psi_big_q.grid().same_as(&k.Q_grid) {
        return Err(QhjError::GridMismatch("state does not live on the kernel's input grid".into()));
    }
    if psi_big_q.hbar() != k.hbar {
        return Err(QhjError::GridMismatch("state and kernel carry different hbar".into()));
    }
    let weighted: Vec<Complex64> = psi_big_q.amplitudes().iter().zip(&k.weights).map(|(a, w)| a * w).collect();
    let out: Vec<Complex64> = (0..k.q_grid.len())
        .into_par_iter()
        .map(|i| k.row(i).iter().zip(&weighted).map(|(x, y)| x * y).sum())
        .collect();
    WaveFunction::new(k.q_grid, out, k.hbar)
}

/// `psi_Q(Q) = int dq conj(K(q, Q)) psi(q)`: the adjoint of [`apply_propagator`].
pub fn apply_adjoint(k: &PropagatorMatrix, psi: &WaveFunction) -> Result<WaveFunction> {
    if !psi.grid().same_as(&k.q_grid) {
        return Err(QhjError::GridMismatch("state does not live on the kernel's output grid".into()));
    }
    let wq = k.q_grid.weights();
    let m = k.Q_grid.len();
    let mut out = vec![ZERO; m];
    for (i, (a, w)) in psi.amplitudes().iter().zip(&wq).enumerate() {
        let aw = a * w;
        for (o, kij) in out.iter_mut().zip(k.row(i)) {
            *o += kij.conj() * aw;
        }
    }
    WaveFunction::new(k.Q_grid, out, k.hbar)
}

/// Reference solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_steps: usize,
    pub grid: Grid1D,
    pub hbar: f64,
}

/// Threshold of the step-halving self-convergence gate.
pub const ORACLE_GATE: f64 = 1e-6;

fn strang(potential: &PotentialSpec, psi0: &WaveFunction, t: f64, n_steps: usize) -> Result<Vec<Complex64>> {
    let grid = psi0.grid();
    let hbar = psi0.hbar();
    let n = grid.len();
    let dt = t / n_steps as f64;
    let fft = FftPair::new(n);
    let mut scratch = fft.scratch();
    let kinetic: Vec<Complex64> = wavenumbers(n, grid.spacing())
        .iter()
        .map(|k| (-I * (hbar * k * k * dt / 2.0)).exp())
        .collect();
    let xs = grid.to_vec();
    let half_kick = |s: f64| -> Vec<Complex64> {
        xs.iter().map(|&x| (-I * (potential.value(x, s) * dt / (2.0 * hbar))).exp()).collect()
    };
    let static_kick = (!potential.is_time_dependent()).then(|| half_kick(0.0));
    let mut psi = psi0.amplitudes().to_vec();
    for step in 0..n_steps {
        let t0 = step as f64 * dt;
        let (a, b) = match &static_kick {
            Some(k) => (k.clone(), k.clone()),
            None => (half_kick(t0), half_kick(t0 + dt)),
        };
        psi.iter_mut().zip(&a).for_each(|(p, k)| *p *= k);
        fft.forward(&mut psi, &mut scratch);
        psi.iter_mut().zip(&kinetic).for_each(|(p, k)| *p *= k);
        fft.inverse(&mut psi, &mut scratch);
        psi.iter_mut().zip(&b).for_each(|(p, k)| *p *= k);
    }
    if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QhjError::NonFinite { time: t });
    }
    Ok(psi)
}

/// Second-order split-step evolution on a periodic grid. The run is repeated
/// with twice the steps and rejected when the two results differ by more than
/// [`ORACLE_GATE`] in L2; the finer result is returned.
pub fn split_step_oracle(potential: &PotentialSpec, psi0: &WaveFunction, t: f64, cfg: &OracleConfig) -> Result<WaveFunction> {
    if !psi0.grid().same_as(&cfg.grid) || psi0.hbar() != cfg.hbar {
        return Err(QhjError::GridMismatch("initial state does not match the oracle configuration".into()));
    }
    if cfg.n_steps == 0 {
        return Err(QhjError::invalid("n_steps", "must be positive"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(QhjError::invalid("t", "must be nonnegative"));
    }
    let coarse = WaveFunction::new(cfg.grid, strang(potential, psi0, t, cfg.n_steps)?, cfg.hbar)?;
    let fine = WaveFunction::new(cfg.grid, strang(potential, psi0, t, 2 * cfg.n_steps)?, cfg.hbar)?;
    let change = l2_distance(&coarse, &fine)?;
    if change > ORACLE_GATE {
        return Err(QhjError::OracleNotConverged { change });
    }
    Ok(fine)
}

/// [`split_step_oracle`], doubling the step count from `n_start` until the
/// gate passes (at most `2^12` times the start).
pub fn split_step_converged(potential: &PotentialSpec, psi0: &WaveFunction, t: f64, n_start: usize) -> Result<(WaveFunction, usize)> {
    let mut n = n_start.max(1);
    let mut last = None;
    for _ in 0..=12 {
        let cfg = OracleConfig {
            n_steps: n,
            grid: *psi0.grid(),
            hbar: psi0.hbar(),
        };
        match split_step_oracle(potential, psi0, t, &cfg) {
            Ok(psi) => return Ok((psi, 2 * n)),
            Err(e @ QhjError::OracleNotConverged { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        n *= 2;
    }
    Err(last.expect("at least one attempt"))
}

/// Agreement between the kernel path and the reference solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    /// Plain L2 distance.
    pub l2_error: f64,
    /// L2 distance with the optimal global phase removed.
    pub phase_aligned_l2: f64,
    pub fidelity: f64,
    pub norm_kernel: f64,
    pub norm_oracle: f64,
    pub oracle_steps: usize,
}

/// Evolve `psi0` (living on the kernel's input grid, which must equal its
/// output grid) both ways and compare.
pub fn compare_to_oracle(potential: &PotentialSpec, k: &PropagatorMatrix, psi0: &WaveFunction) -> Result<OracleReport> {
    compare_to_oracle_with(potential, k, psi0, 64)
}

/// [`compare_to_oracle`] with the oracle's step doubling started from
/// `n_start` steps.
pub fn compare_to_oracle_with(potential: &PotentialSpec, k: &PropagatorMatrix, psi0: &WaveFunction, n_start: usize) -> Result<OracleReport> {
    if !k.q_grid.same_as(&k.Q_grid) {
        return Err(QhjError::GridMismatch("oracle comparison needs one common grid".into()));
    }
    let by_kernel = apply_propagator(k, psi0)?;
    let (by_oracle, steps) = split_step_converged(potential, psi0, k.t, n_start)?;
    Ok(OracleReport {
        l2_error: l2_distance(&by_kernel, &by_oracle)?,
        phase_aligned_l2: phase_aligned_distance(&by_kernel, &by_oracle)?,
        fidelity: fidelity(&by_kernel, &by_oracle)?,
        norm_kernel: by_kernel.norm(),
        norm_oracle: by_oracle.norm(),
        oracle_steps: steps,
    })
}

/// Result of the discrete unitarity test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitarityReport {
    pub passed: bool,
    pub tol: f64,
    /// `max |G_kl|` over `k != l`.
    pub worst_off_diagonal: f64,
    /// `max |G_kk - 1|`.
    pub worst_diagonal_deficit: f64,
    pub n_probes: usize,
    /// Row-major Gram matrix of the pulled-back probes.
    pub gram: Vec<Complex64>,
}

/// Orthonormal localized probes on `grid`: coherent packets of width
/// `sigma = sqrt(hbar/2)` centred at multiples of `3 sigma` within `reach` of
/// the origin, with momenta `0` and `+-3 hbar/(2 sigma)`.
fn probe_basis(grid: &Grid1D, hbar: f64, reach: f64) -> Result<Vec<WaveFunction>> {
    let width = (hbar / 2.0).sqrt();
    let dq = 3.0 * width;
    let dp = 3.0 * hbar / (2.0 * width);
    let k_max = (reach / dq + 1e-9).floor() as i64;
    let mut probes: Vec<WaveFunction> = Vec::new();
    for kq in -k_max..=k_max {
        for kp in -1..=1 {
            let mut v = make_gaussian(*grid, kq as f64 * dq, kp as f64 * dp, width, hbar)?;
            for u in &probes {
                let c = u.inner(&v)?;
                let amps: Vec<Complex64> = v.amplitudes().iter().zip(u.amplitudes()).map(|(a, b)| a - c * b).collect();
                v = v.with_amplitudes(amps)?;
            }
            let n = v.norm();
            probes.push(v.scaled(Complex64::new(1.0 / n, 0.0)));
        }
    }
    Ok(probes)
}

/// Weighted unitarity of `K` tested on localized probes: each orthonormal
/// probe `phi_k` on the output grid is pulled back with `K^dagger`, and the
/// Gram matrix `<K^dagger phi_k, K^dagger phi_l>` on the input grid is
/// compared with the identity. Probes are centred within `reach` of the
/// origin.
pub fn verify_unitarity(k: &PropagatorMatrix, reach: f64, tol: f64) -> Result<UnitarityReport> {
    let probes = probe_basis(&k.q_grid, k.hbar, reach)?;
    let pulled: Vec<WaveFunction> = probes.iter().map(|p| apply_adjoint(k, p)).collect::<Result<_>>()?;
    let n = pulled.len();
    let mut gram = vec![ZERO; n * n];
    let (mut off, mut diag) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            let g = pulled[a].inner(&pulled[b])?;
            gram[a * n + b] = g;
            if a == b {
                diag = diag.max((g - 1.0).norm());
            } else {
                off = off.max(g.norm());
            }
        }
    }
    Ok(UnitarityReport {
        passed: off < tol && diag < tol,
        tol,
        worst_off_diagonal: off,
        worst_diagonal_deficit: diag,
        n_probes: n,
        gram,
    })
}

/// Largest change of `K1 . K2` against `K12` over localized probes:
/// `max_k || K12 phi_k - K2 (K1 phi_k) ||`.
pub fn semigroup_defect(k1: &PropagatorMatrix, k2: &PropagatorMatrix, k12: &PropagatorMatrix, reach: f64) -> Result<f64> {
    let probes = probe_basis(&k1.Q_grid, k1.hbar, reach)?;
    let mut worst: f64 = 0.0;
    for p in &probes {
        let two = apply_propagator(k2, &apply_propagator(k1, p)?)?;
        let one = apply_propagator(k12, p)?;
        worst = worst.max(l2_distance(&one, &two)?);
    }
    Ok(worst)
}
