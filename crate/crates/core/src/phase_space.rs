//! Wigner and Husimi distributions and their transformation kernels.
//!
//! Husimi fields are Gaussian-smoothed Wigner fields: the Husimi choice of
//! the Cohen function corresponds to convolving the Wigner function with
//! `(pi hbar)^{-1} exp(-alpha dq^2 / hbar - dp^2 / (alpha hbar))`, i.e.
//! independent Gaussians of variances `hbar / (2 alpha)` and
//! `alpha hbar / 2` (unit mass).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};
use crate::generating::{GaugeFunction, LinearCanonicalMap, QuadraticGeneratingFunction};
use crate::grid::Grid1D;
use crate::state::{check_hbar, WaveFunction};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitude at the grid edge above which a Wigner transform is refused.
pub const EDGE_LIMIT: f64 = 1e-6;
/// Relative mass change tolerated by resampling and smoothing.
pub const LEAKAGE_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionChoice {
    Wigner,
    Husimi { alpha: f64 },
}

impl DistributionChoice {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionChoice::Husimi { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => {
                Err(QhjError::invalid("alpha", "Husimi parameter must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Real field on a `(q, p)` lattice, row-major with `q` as the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceField {
    pub q_grid: Grid1D,
    pub p_grid: Grid1D,
    pub values: Vec<f64>,
    pub hbar: f64,
    pub kind: DistributionChoice,
    /// Largest imaginary part discarded when the field was formed.
    pub imag_residue: f64,
}

impl PhaseSpaceField {
    pub fn new(q_grid: Grid1D, p_grid: Grid1D, values: Vec<f64>, hbar: f64, kind: DistributionChoice) -> Result<Self> {
        if values.len() != q_grid.len() * p_grid.len() {
            return Err(QhjError::GridMismatch(format!(
                "{} values for a {}x{} lattice",
                values.len(),
                q_grid.len(),
                p_grid.len()
            )));
        }
        check_hbar(hbar)?;
        Ok(PhaseSpaceField {
            q_grid,
            p_grid,
            values,
            hbar,
            kind,
            imag_residue: 0.0,
        })
    }

    /// Sample `f(q, p)` on the lattice.
    pub fn from_fn(q_grid: Grid1D, p_grid: Grid1D, hbar: f64, kind: DistributionChoice, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let ps = p_grid.to_vec();
        let values = q_grid.points().flat_map(|q| ps.iter().map(move |&p| (q, p))).map(|(q, p)| f(q, p)).collect();
        PhaseSpaceField::new(q_grid, p_grid, values, hbar, kind)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p_grid.len() + j]
    }

    /// Trapezoidal integral over both axes.
    pub fn integral(&self) -> f64 {
        let (wq, wp) = (self.q_grid.weights(), self.p_grid.weights());
        self.values
            .chunks(wp.len())
            .zip(&wq)
            .map(|(row, a)| a * row.iter().zip(&wp).map(|(v, b)| v * b).sum::<f64>())
            .sum()
    }

    /// `int F dp` for every `q` row.
    pub fn position_marginal(&self) -> Vec<f64> {
        let wp = self.p_grid.weights();
        self.values.chunks(wp.len()).map(|row| row.iter().zip(&wp).map(|(v, b)| v * b).sum()).collect()
    }

    /// `int F dq` for every `p` column.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let wq = self.q_grid.weights();
        let m = self.p_grid.len();
        let mut out = vec![0.0; m];
        for (row, a) in self.values.chunks(m).zip(&wq) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += a * v;
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation, zero outside the lattice.
    pub fn interpolate(&self, q: f64, p: f64) -> f64 {
        let (Some((i, fq)), Some((j, fp))) = (self.q_grid.locate(q), self.p_grid.locate(p)) else {
            return 0.0;
        };
        let v = |a: usize, b: usize| self.at(a, b);
        (1.0 - fq) * ((1.0 - fp) * v(i, j) + fp * v(i, j + 1)) + fq * ((1.0 - fp) * v(i + 1, j) + fp * v(i + 1, j + 1))
    }

    /// Largest absolute difference on a common lattice.
    pub fn max_difference(&self, other: &PhaseSpaceField) -> Result<f64> {
        if !self.q_grid.same_as(&other.q_grid) || !self.p_grid.same_as(&other.p_grid) {
            return Err(QhjError::GridMismatch("fields live on different lattices".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    fn with_values(&self, values: Vec<f64>, kind: DistributionChoice) -> PhaseSpaceField {
        PhaseSpaceField {
            q_grid: self.q_grid,
            p_grid: self.p_grid,
            values,
            hbar: self.hbar,
            kind,
            imag_residue: self.imag_residue,
        }
    }
}

/// Wigner function on every `stride`-th sample of the state's grid.
///
/// `W(q, p) = (pi hbar)^{-1} int dy psi*(q + y) psi(q - y) exp(2 i p y / hbar)`
/// with `y` on the state's lattice, summed directly for each momentum.
pub fn wigner_transform_strided(psi: &WaveFunction, stride: usize, p_grid: &Grid1D) -> Result<PhaseSpaceField> {
    if psi.edge_amplitude() > EDGE_LIMIT {
        return Err(QhjError::DomainTruncation {
            tail_mass: psi.edge_amplitude(),
            limit: EDGE_LIMIT,
        });
    }
    let grid = psi.grid();
    let q_grid = grid.decimate(0, stride)?;
    let hbar = psi.hbar();
    let dy = grid.spacing();
    let amps = psi.amplitudes();
    let n = amps.len();
    let ps = p_grid.to_vec();
    let rows: Vec<(Vec<f64>, f64)> = (0..q_grid.len())
        .into_par_iter()
        .map(|r| {
            let i = r * stride;
            let reach = i.min(n - 1 - i);
            let corr: Vec<Complex64> = (0..=reach).map(|k| amps[i + k].conj() * amps[i - k]).collect();
            let mut residue: f64 = 0.0;
            let row = ps
                .iter()
                .map(|&p| {
                    let step = (2.0 * I * p * dy / hbar).exp();
                    let mut phase = step;
                    let mut acc = corr[0];
                    for (k, c) in corr.iter().enumerate().skip(1) {
                        // y = +k dy and y = -k dy together
                        let conj_pair = amps[i - k].conj() * amps[i + k];
                        acc += c * phase + conj_pair * phase.conj();
                        phase *= step;
                        if k % 64 == 0 {
                            phase /= phase.norm();
                        }
                    }
                    let w = acc * dy / (PI * hbar);
                    residue = residue.max(w.im.abs());
                    w.re
                })
                .collect();
            (row, residue)
        })
        .collect();
    let imag_residue = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    let mut field = PhaseSpaceField::new(q_grid, *p_grid, values, hbar, DistributionChoice::Wigner)?;
    field.imag_residue = imag_residue;
    Ok(field)
}

/// Wigner function with one row per sample of the state's grid.
pub fn wigner_transform(psi: &WaveFunction, p_grid: &Grid1D) -> Result<PhaseSpaceField> {
    wigner_transform_strided(psi, 1, p_grid)
}

fn gaussian_weights(sigma: f64, h: f64) -> Vec<f64> {
    if sigma < 1e-3 * h {
        return vec![1.0];
    }
    let half = ((8.0 * sigma / h).ceil() as usize).max(1);
    let raw: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let x = (k as f64 - half as f64) * h;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn convolve_axis(values: &[f64], n_rows: usize, n_cols: usize, weights: &[f64], along_rows: bool) -> Vec<f64> {
    let half = weights.len() / 2;
    let mut out = vec![0.0; values.len()];
    let len = if along_rows { n_rows } else { n_cols };
    for a in 0..(if along_rows { n_cols } else { n_rows }) {
        for b in 0..len {
            let mut acc = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let src = b as isize + k as isize - half as isize;
                if src < 0 || src >= len as isize {
                    continue;
                }
                let idx = if along_rows { src as usize * n_cols + a } else { a * n_cols + src as usize };
                acc += w * values[idx];
            }
            let idx = if along_rows { b * n_cols + a } else { a * n_cols + b };
            out[idx] = acc;
        }
    }
    out
}

/// Separable Gaussian smoothing with standard deviations `sigma_q`, `sigma_p`
/// (zero extension beyond the lattice). Widths below a thousandth of the
/// spacing leave the axis untouched.
pub fn gaussian_smooth(field: &PhaseSpaceField, sigma_q: f64, sigma_p: f64) -> Result<PhaseSpaceField> {
    if !(sigma_q >= 0.0 && sigma_p >= 0.0) {
        return Err(QhjError::invalid("sigma", "smoothing widths must be nonnegative"));
    }
    let (n, m) = (field.q_grid.len(), field.p_grid.len());
    let wq = gaussian_weights(sigma_q, field.q_grid.spacing());
    let wp = gaussian_weights(sigma_p, field.p_grid.spacing());
    let tmp = convolve_axis(&field.values, n, m, &wp, false);
    let out = convolve_axis(&tmp, n, m, &wq, true);
    Ok(field.with_values(out, field.kind))
}

/// Husimi field from a Wigner field. Fails when the smoothing pushes more
/// than [`LEAKAGE_LIMIT`] of the mass off the lattice.
pub fn husimi_from_wigner(w: &PhaseSpaceField, alpha: f64) -> Result<PhaseSpaceField> {
    DistributionChoice::Husimi { alpha }.validate()?;
    if w.kind != DistributionChoice::Wigner {
        return Err(QhjError::invalid("field", "Husimi smoothing expects a Wigner field"));
    }
    let sigma_q = (w.hbar / (2.0 * alpha)).sqrt();
    let sigma_p = (alpha * w.hbar / 2.0).sqrt();
    let before = w.integral();
    let mut h = gaussian_smooth(w, sigma_q, sigma_p)?;
    h.kind = DistributionChoice::Husimi { alpha };
    let leaked = (h.integral() - before).abs();
    if leaked > LEAKAGE_LIMIT * before.abs().max(1e-300) {
        return Err(QhjError::DomainTruncation {
            tail_mass: leaked,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapDirection {
    /// Push the field forward: `out(x) = F(M^{-1} x)`.
    Forward,
    /// Pull the field back: `out(x) = F(M x)`.
    Inverse,
}

/// Mass bookkeeping of a resampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageReport {
    pub mass_before: f64,
    pub mass_after: f64,
}

impl LeakageReport {
    pub fn relative_change(&self) -> f64 {
        (self.mass_after - self.mass_before).abs() / self.mass_before.abs().max(1e-300)
    }
}

fn resample(field: &PhaseSpaceField, source_point: impl Fn(f64, f64) -> (f64, f64) + Sync) -> Result<(PhaseSpaceField, LeakageReport)> {
    let ps = field.p_grid.to_vec();
    let qs = field.q_grid.to_vec();
    let values: Vec<f64> = qs
        .par_iter()
        .flat_map_iter(|&q| {
            let src = &source_point;
            ps.iter().map(move |&p| {
                let (a, b) = src(q, p);
                field.interpolate(a, b)
            })
        })
        .collect();
    let out = field.with_values(values, field.kind);
    let report = LeakageReport {
        mass_before: field.integral(),
        mass_after: out.integral(),
    };
    if report.relative_change() > LEAKAGE_LIMIT {
        return Err(QhjError::DomainTruncation {
            tail_mass: report.relative_change(),
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok((out, report))
}

/// Transport a field through an affine symplectic map by bilinear
/// resampling. Fails with a leakage error when the integral changes by more
/// than [`LEAKAGE_LIMIT`] relative.
pub fn apply_linear_kernel(
    map: &LinearCanonicalMap,
    field: &PhaseSpaceField,
    direction: MapDirection,
) -> Result<(PhaseSpaceField, LeakageReport)> {
    let m = match direction {
        MapDirection::Forward => map.inverse(),
        MapDirection::Inverse => *map,
    };
    if m == LinearCanonicalMap::identity() {
        let report = LeakageReport {
            mass_before: field.integral(),
            mass_after: field.integral(),
        };
        return Ok((field.clone(), report));
    }
    resample(field, |q, p| m.apply(q, p))
}

/// Wigner kernel of the gauge transformation `exp(i g(q)/hbar)` on the row
/// `Q1 = q_row`, as a function of `p2` on `p_grid`:
///
/// `(pi hbar)^{-1} int dy exp(i [g(q - y) - g(q + y)] / hbar) exp(2 i (p2 - P1) y / hbar)`.
///
/// For `g` of degree at most two the `y` lattice has spacing
/// `pi hbar / (n_p dp)` and `n_p` samples, so that the kernel is an exact
/// discrete delta on `p_grid`. Otherwise the integrand does not decay. It is
/// then sampled finely enough to resolve its phase and rolled off with a
/// cosine taper past the last stationary point that lands inside `p_grid`;
/// `tapered` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeKernelRow {
    pub values: Vec<Complex64>,
    pub tapered: bool,
    /// Classical image `P1 + g'(q_row)`.
    pub classical_p: f64,
}

fn gauge_phase(g: &GaugeFunction, q: f64, y: f64) -> f64 {
    g.value(q - y) - g.value(q + y)
}

/// `(y, weight * dy)` nodes for a non-quadratic gauge function.
fn tapered_nodes(g: &GaugeFunction, q_row: f64, reach_p: f64, hbar: f64) -> Vec<(f64, f64)> {
    let slope = |y: f64| {
        let h = 1e-6 * (1.0 + y.abs());
        (gauge_phase(g, q_row, y + h) - gauge_phase(g, q_row, y - h)) / (2.0 * h) + 2.0 * g.derivative(q_row)
    };
    // last y at which the stationary momentum is still on the grid
    let mut y_c = 0.0;
    let step = 1e-3 * (1.0 + q_row.abs());
    while y_c < 1e4 && slope(y_c).abs().max(slope(-y_c).abs()) <= 2.0 * reach_p {
        y_c += step;
    }
    let y_c = y_c.max(10.0 * step);
    let y_w = 3.0 * y_c;
    let fastest = (0..=64)
        .map(|k| y_w * k as f64 / 64.0)
        .map(|y| slope(y).abs().max(slope(-y).abs()))
        .fold(0.0, f64::max);
    let dy = (PI / 4.0) * hbar / (fastest + 2.0 * reach_p);
    let half = (y_w / dy).ceil() as i64;
    (-half..=half)
        .map(|k| {
            let y = k as f64 * dy;
            let x = y.abs();
            let w = if x <= y_c {
                1.0
            } else {
                0.5 * (1.0 + (PI * ((x - y_c) / (y_w - y_c)).min(1.0)).cos())
            };
            (y, w * dy)
        })
        .collect()
}

pub fn gauge_wigner_kernel(g: &GaugeFunction, big_p1: f64, q_row: f64, p_grid: &Grid1D, hbar: f64) -> Result<GaugeKernelRow> {
    check_hbar(hbar)?;
    let classical_p = big_p1 + g.derivative(q_row);
    let tapered = !g.is_at_most_quadratic();
    let nodes: Vec<(f64, f64)> = if tapered {
        let reach_p = (p_grid.x_min() - big_p1).abs().max((p_grid.x_max() - big_p1).abs());
        tapered_nodes(g, q_row, reach_p, hbar)
    } else {
        let n = p_grid.len();
        let dy = PI * hbar / (n as f64 * p_grid.spacing());
        let half = (n / 2) as i64;
        let hi = if n % 2 == 0 { half - 1 } else { half };
        (-half..=hi).map(|k| (k as f64 * dy, dy)).collect()
    };
    let samples: Vec<(f64, Complex64)> = nodes
        .into_iter()
        .map(|(y, w)| (y, w * (I * gauge_phase(g, q_row, y) / hbar).exp()))
        .collect();
    let values = p_grid
        .points()
        .map(|p2| {
            let acc: Complex64 = samples.iter().map(|(y, a)| a * (2.0 * I * (p2 - big_p1) * y / hbar).exp()).sum();
            acc / (PI * hbar)
        })
        .collect();
    Ok(GaugeKernelRow {
        values,
        tapered,
        classical_p,
    })
}

/// Moments `sum_j (p_j - centre)^k kappa_j dp` for `k = 0..=3`.
pub fn kernel_moments(row: &[Complex64], p_grid: &Grid1D, centre: f64) -> [Complex64; 4] {
    let w = p_grid.weights();
    let mut m = [Complex64::new(0.0, 0.0); 4];
    for ((p, k), wt) in p_grid.points().zip(row).zip(&w) {
        let d = p - centre;
        let mut pow = 1.0;
        for mk in m.iter_mut() {
            *mk += k * pow * wt;
            pow *= d;
        }
    }
    m
}

/// Exact moments `int (p2 - P1 - g'(q))^k kappa dp2`, `k = 0..=order`, of the
/// gauge kernel for a polynomial `g`. They are
/// `(i hbar / 2)^k d^k/dy^k exp(i psi(y) / hbar)` at `y = 0`, with
/// `psi(y) = g(q - y) - g(q + y) + 2 g'(q) y`.
pub fn gauge_kernel_moments(g: &GaugeFunction, q_row: f64, hbar: f64, order: usize) -> Result<Vec<Complex64>> {
    check_hbar(hbar)?;
    let GaugeFunction::Polynomial(c) = g else {
        return Err(QhjError::invalid("g", "exact moments need a polynomial gauge function"));
    };
    // Taylor coefficients of g about q_row
    let deg = c.len();
    let mut a = vec![0.0; deg.max(1)];
    for (k, ck) in c.iter().enumerate() {
        let mut binom = 1.0;
        for (j, aj) in a.iter_mut().enumerate().take(k + 1) {
            *aj += ck * binom * q_row.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    // psi has only odd terms of order >= 3
    let psi: Vec<Complex64> = (0..=order)
        .map(|k| {
            if k >= 3 && k % 2 == 1 && k < a.len() {
                I * (-2.0 * a[k]) / hbar
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    // b = exp(psi) as a power series: m b_m = sum_k k psi_k b_{m-k}
    let mut b = vec![Complex64::new(0.0, 0.0); order + 1];
    b[0] = Complex64::new(1.0, 0.0);
    for m in 1..=order {
        let s: Complex64 = (1..=m).map(|k| psi[k] * k as f64 * b[m - k]).sum();
        b[m] = s / m as f64;
    }
    let mut fact = 1.0;
    let mut pre = Complex64::new(1.0, 0.0);
    Ok(b
        .iter()
        .enumerate()
        .map(|(k, bk)| {
            if k > 0 {
                fact *= k as f64;
                pre *= I * hbar / 2.0;
            }
            pre * fact * bk
        })
        .collect())
}

/// `G(Q1, P1) = sum_j kappa(P1, Q1; p_j) F(Q1, p_j) dp`: the quantum gauge
/// kernel acting on a distribution given as a function.
pub fn apply_gauge_kernel(g: &GaugeFunction, f: impl Fn(f64, f64) -> f64, big_q1: f64, big_p1: f64, p_grid: &Grid1D, hbar: f64) -> Result<Complex64> {
    let row = gauge_wigner_kernel(g, big_p1, big_q1, p_grid, hbar)?;
    let w = p_grid.weights();
    Ok(row.values.iter().zip(p_grid.points()).zip(&w).map(|((k, p), wt)| k * f(big_q1, p) * wt).sum())
}

type PhaseMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Classical point transformation `(q, p) -> (Q(q, p), P(q, p))`.
#[derive(Clone)]
pub struct ClassicalPointMap {
    q_map: PhaseMap,
    p_map: PhaseMap,
}

impl fmt::Debug for ClassicalPointMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ClassicalPointMap")
    }
}

impl ClassicalPointMap {
    pub fn apply(&self, q: f64, p: f64) -> (f64, f64) {
        ((self.q_map)(q, p), (self.p_map)(q, p))
    }

    fn jacobian(&self, q: f64, p: f64) -> [[f64; 2]; 2] {
        let h = 1e-5;
        let d = |f: &PhaseMap, dq: f64, dp: f64| (f(q + dq, p + dp) - f(q - dq, p - dp)) / (2.0 * h);
        [
            [d(&self.q_map, h, 0.0), d(&self.q_map, 0.0, h)],
            [d(&self.p_map, h, 0.0), d(&self.p_map, 0.0, h)],
        ]
    }

    /// Poisson bracket `[Q, P]` at a point, by central differences.
    pub fn poisson_bracket(&self, q: f64, p: f64) -> f64 {
        let j = self.jacobian(q, p);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Preimage of `(big_q, big_p)` by Newton iteration.
    pub fn invert(&self, big_q: f64, big_p: f64) -> Result<(f64, f64)> {
        let (mut q, mut p) = (big_q, big_p);
        for _ in 0..50 {
            let (a, b) = self.apply(q, p);
            let (rq, rp) = (a - big_q, b - big_p);
            if rq.abs().max(rp.abs()) < 1e-13 * (1.0 + big_q.abs() + big_p.abs()) {
                return Ok((q, p));
            }
            let j = self.jacobian(q, p);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            q -= (j[1][1] * rq - j[0][1] * rp) / det;
            p -= (-j[1][0] * rq + j[0][0] * rp) / det;
        }
        let (a, b) = self.apply(q, p);
        let residual = (a - big_q).abs().max((b - big_p).abs());
        if residual < 1e-9 {
            Ok((q, p))
        } else {
            Err(QhjError::NoConvergence { iterations: 50, residual })
        }
    }
}

/// Kernel of a phase-space transformation. Delta kernels are kept as maps.
#[derive(Debug, Clone)]
pub enum KernelField {
    /// `kappa(Q1, P1, q2, p2)` sampled on output x input lattices, flattened
    /// in the order `(Q1, P1, q2, p2)`.
    Dense {
        out_q: Grid1D,
        out_p: Grid1D,
        in_q: Grid1D,
        in_p: Grid1D,
        values: Vec<Complex64>,
    },
    Linear(LinearCanonicalMap),
    Point(ClassicalPointMap),
}

/// Probe points for the Poisson-bracket check.
const BRACKET_PROBES: [(f64, f64); 6] = [(-1.5, 0.3), (-0.4, -1.0), (0.0, 0.0), (0.6, 1.2), (1.3, -0.7), (2.0, 0.5)];

/// Point-transformation kernel `delta[Q1 - Q(q2, p2)] delta[P1 - P(q2, p2)]`
/// after checking `[Q, P] = 1` to `1e-6` on probe points.
pub fn kim_wigner_classical_kernel(
    q_map: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    p_map: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
) -> Result<KernelField> {
    let map = ClassicalPointMap {
        q_map: Arc::new(q_map),
        p_map: Arc::new(p_map),
    };
    for (q, p) in BRACKET_PROBES {
        let b = map.poisson_bracket(q, p);
        if (b - 1.0).abs() > 1e-6 {
            return Err(QhjError::PoissonBracket { bracket: b, q, p });
        }
    }
    Ok(KernelField::Point(map))
}

impl KernelField {
    /// `G(Q1, P1) = int kappa F` on the lattice of `field`. Dense kernels
    /// must have been sampled on that lattice.
    pub fn apply(&self, field: &PhaseSpaceField) -> Result<(PhaseSpaceField, LeakageReport)> {
        match self {
            KernelField::Linear(m) => apply_linear_kernel(m, field, MapDirection::Forward),
            KernelField::Point(m) => {
                let failed = std::sync::atomic::AtomicBool::new(false);
                let out = resample(field, |q, p| match m.invert(q, p) {
                    Ok(x) => x,
                    Err(_) => {
                        failed.store(true, std::sync::atomic::Ordering::Relaxed);
                        (f64::NAN, f64::NAN)
                    }
                })?;
                if failed.into_inner() {
                    return Err(QhjError::NoConvergence {
                        iterations: 50,
                        residual: f64::NAN,
                    });
                }
                Ok(out)
            }
            KernelField::Dense {
                out_q,
                out_p,
                in_q,
                in_p,
                values,
            } => {
                if !in_q.same_as(&field.q_grid) || !in_p.same_as(&field.p_grid) {
                    return Err(QhjError::GridMismatch("kernel input lattice differs from the field".into()));
                }
                let (wq, wp) = (in_q.weights(), in_p.weights());
                let n_in = in_q.len() * in_p.len();
                let weighted: Vec<f64> = field
                    .values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * wq[k / in_p.len()] * wp[k % in_p.len()])
                    .collect();
                let mut imag: f64 = 0.0;
                let vals: Vec<f64> = values
                    .chunks(n_in)
                    .map(|row| {
                        let z: Complex64 = row.iter().zip(&weighted).map(|(k, f)| k * f).sum();
                        imag = imag.max(z.im.abs());
                        z.re
                    })
                    .collect();
                let mut out = PhaseSpaceField::new(*out_q, *out_p, vals, field.hbar, field.kind)?;
                out.imag_residue = imag;
                let report = LeakageReport {
                    mass_before: field.integral(),
                    mass_after: out.integral(),
                };
                Ok((out, report))
            }
        }
    }
}

/// One probe of the f = 1 kernel of a quadratic F1:
/// `(2 / pi hbar) int dY dy exp(i [F(q2 - y, Q1 - Y) - F*(q2 + y, Q1 + Y)] / hbar) exp(2 i (y p2 - Y P1) / hbar)`
/// regularized by `exp(-eps (y^2 + Y^2))`, against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelProbe {
    pub point: [f64; 4],
    pub numeric: Complex64,
    pub analytic: Complex64,
}

impl KernelProbe {
    pub fn relative_error(&self) -> f64 {
        (self.numeric - self.analytic).norm() / self.analytic.norm().max(1e-300)
    }
}

/// Evaluate the regularized kernel at `(Q1, P1, q2, p2)` probes by a
/// `n x n` midpoint rule on `|y|, |Y| <= 6 / sqrt(eps)`.
pub fn wigner_kernel_probes(f: &QuadraticGeneratingFunction, probes: &[[f64; 4]], eps: f64, n: usize) -> Result<Vec<KernelProbe>> {
    if !(eps > 0.0) || n < 8 {
        return Err(QhjError::invalid("eps", "regularization and resolution must be positive"));
    }
    let hbar = f.hbar;
    let reach = 6.0 / eps.sqrt();
    let h = 2.0 * reach / n as f64;
    let nodes: Vec<f64> = (0..n).map(|k| -reach + (k as f64 + 0.5) * h).collect();
    probes
        .iter()
        .map(|&[big_q1, big_p1, q2, p2]| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &y in &nodes {
                for &big_y in &nodes {
                    let a = f.eval(q2 - y, big_q1 - big_y);
                    let b = f.eval(q2 + y, big_q1 + big_y).conj();
                    let e = I * (a - b) / hbar + 2.0 * I * (y * p2 - big_y * big_p1) / hbar - eps * (y * y + big_y * big_y);
                    acc += e.exp();
                }
            }
            let numeric = acc * h * h * 2.0 / (PI * hbar);
            // Gaussian-smeared deltas of the two stationarity conditions
            let k1 = p2 - f.d_dx(q2, big_q1).re;
            let k2 = big_p1 + f.d_dy(q2, big_q1).re;
            let smear = |k: f64| (PI / eps).sqrt() * (-k * k / (hbar * hbar * eps)).exp();
            let analytic = 2.0 / (PI * hbar) * (-2.0 * f.constant.im / hbar).exp() * smear(k1) * smear(k2);
            Ok(KernelProbe {
                point: [big_q1, big_p1, q2, p2],
                numeric,
                analytic: Complex64::new(analytic, 0.0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generating::{extract_canonical_map, GeneratingType};
    use crate::series::closed_form_generating;
    use crate::state::make_gaussian;
    use crate::potential::PotentialSpec;

    fn psi_grid() -> Grid1D {
        Grid1D::symmetric(8.0, 641).unwrap()
    }

    fn p_grid() -> Grid1D {
        Grid1D::symmetric(6.0, 256).unwrap()
    }

    #[test]
    fn ground_state_wigner() {
        let psi = make_gaussian(psi_grid(), 0.0, 0.0, 0.5f64.sqrt(), 1.0).unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        assert!(w.imag_residue < 1e-10);
        let want = PhaseSpaceField::from_fn(w.q_grid, w.p_grid, 1.0, DistributionChoice::Wigner, |q, p| {
            (-(q * q + p * p)).exp() / PI
        })
        .unwrap();
        assert!(w.max_difference(&want).unwrap() < 1e-10);
        assert!(w.min() > -1e-14);
        assert!((w.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn odd_state_is_negative_at_origin() {
        let g = psi_grid();
        let s = 0.5f64.sqrt();
        let a = make_gaussian(g, 1.0, 0.0, s, 1.0).unwrap();
        let b = make_gaussian(g, -1.0, 0.0, s, 1.0).unwrap();
        let amps = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x - y).collect();
        let psi = WaveFunction::new(g, amps, 1.0).unwrap().normalize().unwrap();
        let w = wigner_transform(&psi, &p_grid()).unwrap();
        let i0 = w.q_grid.index_of(0.0, 1e-9).unwrap();
        let j0 = w.p_grid.locate(0.0).unwrap().0;
        assert!(w.at(i0, j0) < 0.0 && w.at(i0, j0 + 1) < 0.0);
        // marginals
        let marg = w.position_marginal();
        for (k, m) in marg.iter().enumerate() {
            assert!((m - psi.amplitudes()[k].norm_sqr()).abs() < 1e-6);
        }
    }

    #[test]
    fn momentum_marginal() {
        let psi = make_gaussian(psi_grid(), 0.4, -0.8, 0.6, 1.0).unwrap();
        let w = wigner_transform(&psi, &p_grid()).unwrap();
        let marg = w.momentum_marginal();
        for (j, p) in w.p_grid.points().enumerate().step_by(17) {
            let want = psi.momentum_amplitude(p).norm_sqr();
            assert!((marg[j] - want).abs() < 1e-6, "{p}: {} {want}", marg[j]);
        }
    }

    #[test]
    fn husimi_of_gaussian() {
        let psi = make_gaussian(psi_grid(), 0.0, 0.0, 0.5f64.sqrt(), 1.0).unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        let h = husimi_from_wigner(&w, 1.0).unwrap();
        assert!((h.integral() - 1.0).abs() < 1e-6);
        // variances add: 1/2 + 1/2 on each axis
        let want = PhaseSpaceField::from_fn(h.q_grid, h.p_grid, 1.0, h.kind, |q, p| (-(q * q + p * p) / 2.0).exp() / (2.0 * PI))
            .unwrap();
        assert!(h.max_difference(&want).unwrap() < 1e-4);
    }

    #[test]
    fn husimi_is_nonnegative() {
        let g = psi_grid();
        let s = 0.5f64.sqrt();
        let a = make_gaussian(g, 1.0, 0.0, s, 1.0).unwrap();
        let b = make_gaussian(g, -1.0, 0.0, s, 1.0).unwrap();
        let amps = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x - y).collect();
        let psi = WaveFunction::new(g, amps, 1.0).unwrap().normalize().unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        assert!(w.min() < -0.1);
        assert!(husimi_from_wigner(&w, 1.0).unwrap().min() >= -1e-9);
        let none = gaussian_smooth(&w, 0.0, 0.0).unwrap();
        assert_eq!(none.values, w.values);
        let tiny = gaussian_smooth(&w, 1e-3, 1e-3).unwrap();
        assert!(tiny.max_difference(&w).unwrap() < 1e-6);
    }

    #[test]
    fn identity_map_is_exact() {
        let psi = make_gaussian(psi_grid(), 0.3, 0.2, 0.8, 1.0).unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        let (out, rep) = apply_linear_kernel(&LinearCanonicalMap::identity(), &w, MapDirection::Forward).unwrap();
        assert_eq!(out.values, w.values);
        assert_eq!(rep.relative_change(), 0.0);
    }

    #[test]
    fn rotation_transport() {
        let psi = make_gaussian(psi_grid(), 1.0, 0.0, 0.5f64.sqrt(), 1.0).unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        let f = closed_form_generating(&PotentialSpec::harmonic(1.0).unwrap(), GeneratingType::F1, 0.5, 1.0).unwrap();
        let back = extract_canonical_map(&f).unwrap();
        let (moved, _) = apply_linear_kernel(&back.inverse(), &w, MapDirection::Forward).unwrap();
        let want = PhaseSpaceField::from_fn(w.q_grid, w.p_grid, 1.0, w.kind, |q, p| {
            let (q0, p0) = (q * 0.5f64.cos() - p * 0.5f64.sin(), q * 0.5f64.sin() + p * 0.5f64.cos());
            (-((q0 - 1.0).powi(2) + p0 * p0)).exp() / PI
        })
        .unwrap();
        assert!(moved.max_difference(&want).unwrap() < 1e-3);
    }

    #[test]
    fn leakage_is_reported() {
        let psi = make_gaussian(psi_grid(), 2.5, 0.0, 0.5f64.sqrt(), 1.0).unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        let shift = LinearCanonicalMap::new([[1.0, 0.0], [0.0, 1.0]], [4.0, 0.0]).unwrap();
        assert!(matches!(
            apply_linear_kernel(&shift, &w, MapDirection::Forward),
            Err(QhjError::DomainTruncation { .. })
        ));
    }

    #[test]
    fn quadratic_gauge_kernel_is_delta() {
        let p = p_grid();
        let dp = p.spacing();
        for (g, q_row) in [
            (GaugeFunction::Polynomial(vec![0.7]), 0.3),
            (GaugeFunction::Polynomial(vec![0.0, 5.0 * dp]), 0.0),
            (GaugeFunction::Polynomial(vec![0.0, 0.0, 1.5 * dp]), 2.0),
        ] {
            let big_p1 = p.point(100);
            let row = gauge_wigner_kernel(&g, big_p1, q_row, &p, 1.0).unwrap();
            let j = p.index_of(row.classical_p, 1e-6).unwrap();
            for (k, v) in row.values.iter().enumerate() {
                let want = if k == j { 1.0 / dp } else { 0.0 };
                assert!((v - want).norm() < 1e-9 / dp, "{k} {v}");
            }
            assert!(!row.tapered);
        }
    }

    #[test]
    fn cubic_gauge_kernel_is_airy() {
        let p = Grid1D::symmetric(6.0, 241).unwrap();
        let g = GaugeFunction::Polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let row = gauge_wigner_kernel(&g, 0.2, 0.5, &p, 1.0).unwrap();
        assert!(row.tapered);
        // (2 lambda/hbar) Ai(-2 lambda u / hbar), lambda = (hbar/6)^{1/3}
        let lambda = (1.0f64 / 6.0).cbrt();
        for j in (60..200).step_by(7) {
            let u = p.point(j) - row.classical_p;
            let want = 2.0 * lambda * airy(-2.0 * lambda * u);
            assert!((row.values[j] - want).norm() < 1e-3, "{u}: {} {want}", row.values[j]);
        }
    }

    #[test]
    fn gauge_moments() {
        let cubic = GaugeFunction::Polynomial(vec![0.3, -1.0, 0.4, 1.0]);
        for hbar in [1.0, 0.25] {
            let m = gauge_kernel_moments(&cubic, 0.7, hbar, 4).unwrap();
            assert_eq!(m[0], Complex64::new(1.0, 0.0));
            assert_eq!(m[1].norm(), 0.0);
            assert_eq!(m[2].norm(), 0.0);
            assert!((m[3] - Complex64::new(-1.5 * hbar * hbar, 0.0)).norm() < 1e-14);
        }
        let quad = GaugeFunction::Polynomial(vec![1.0, 2.0, 3.0]);
        let m = gauge_kernel_moments(&quad, -0.4, 0.5, 5).unwrap();
        assert!(m[1..].iter().all(|z| z.norm() == 0.0));
    }

    /// Airy function from its Maclaurin series.
    fn airy(x: f64) -> f64 {
        let c1 = 0.355_028_053_887_817_2;
        let c2 = 0.258_819_403_792_806_8;
        let (mut f, mut g) = (1.0, x);
        let (mut tf, mut tg) = (1.0, x);
        for k in 1..200 {
            let k = k as f64;
            tf *= x * x * x / ((3.0 * k - 1.0) * (3.0 * k));
            tg *= x * x * x / ((3.0 * k) * (3.0 * k + 1.0));
            f += tf;
            g += tg;
        }
        c1 * f - c2 * g
    }

    #[test]
    fn quadratic_gauge_matches_classical_action() {
        let p = p_grid();
        let g = GaugeFunction::Polynomial(vec![0.0, 0.0, 0.35]);
        let f = |q: f64, p: f64| (-(q - 0.2).powi(2) - 1.3 * (p + 0.4).powi(2)).exp() / PI;
        for (q1, p1) in [(0.3, -0.5), (-0.8, 0.9), (1.1, 0.05)] {
            let quantum = apply_gauge_kernel(&g, f, q1, p1, &p, 1.0).unwrap();
            let classical = f(q1, p1 + g.derivative(q1));
            assert!((quantum.re - classical).abs() < 1e-8 && quantum.im.abs() < 1e-8);
        }
    }

    #[test]
    fn classical_kernel_checks_bracket() {
        assert!(kim_wigner_classical_kernel(|q, _| q, |q, p| p + 2.0 * q).is_ok());
        let e = kim_wigner_classical_kernel(|q, _| 2.0 * q, |_, p| p).unwrap_err();
        assert!(matches!(e, QhjError::PoissonBracket { .. }));
        let k = kim_wigner_classical_kernel(|q, _| q, |q, p| p - 3.0 * q * q).unwrap();
        let KernelField::Point(m) = &k else { panic!() };
        let (q, p) = m.invert(0.7, -0.2).unwrap();
        assert!((q - 0.7).abs() < 1e-12 && (p - (-0.2 + 3.0 * 0.49)).abs() < 1e-12);
    }

    #[test]
    fn classical_and_linear_kernels_agree() {
        let psi = make_gaussian(psi_grid(), 0.5, -0.3, 0.7, 1.0).unwrap();
        let w = wigner_transform_strided(&psi, 2, &p_grid()).unwrap();
        let (a, b, c) = (0.8, 0.3, -0.4);
        let d = (1.0 + b * c) / a;
        let lin = LinearCanonicalMap::new([[a, b], [c, d]], [0.0, 0.0]).unwrap();
        let k = kim_wigner_classical_kernel(move |q, p| a * q + b * p, move |q, p| c * q + d * p).unwrap();
        let (x, _) = k.apply(&w).unwrap();
        let (y, _) = KernelField::Linear(lin).apply(&w).unwrap();
        assert!(x.max_difference(&y).unwrap() < 1e-12);
    }

    #[test]
    fn kernel_probes_match_closed_form() {
        let f = closed_form_generating(&PotentialSpec::harmonic(1.0).unwrap(), GeneratingType::F1, 0.7, 1.0).unwrap();
        let m = extract_canonical_map(&f).unwrap().inverse();
        let (q2, p2) = (0.4, -0.3);
        let (big_q, big_p) = m.inverse().apply(q2, p2);
        let probes = [[big_q, big_p, q2, p2], [big_q + 0.05, big_p - 0.03, q2, p2]];
        let res = wigner_kernel_probes(&f, &probes, 0.05, 240).unwrap();
        for r in &res {
            assert!(r.relative_error() < 5e-2, "{r:?}");
        }
    }
}
