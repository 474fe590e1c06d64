//! Quadratic quantum generating functions and the canonical maps they induce.
//!
//! A generating function of type F1(q,Q), F2(q,P), F3(p,Q) or F4(p,P) is
//! stored as the complex quadratic form
//!
//! ```text
//! F(x, y) = alpha x^2/2 + beta x y + gamma y^2/2 + lin_x x + lin_y y + constant
//! ```
//!
//! whose exponential `exp(i F / hbar)` is the mixed matrix element of the
//! transformation. A well-ordered quadratic generating operator is identified
//! with this c-number form; no operator algebra is carried.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratingType {
    /// F1(q, Q)
    F1,
    /// F2(q, P)
    F2,
    /// F3(p, Q)
    F3,
    /// F4(p, P)
    F4,
}

impl GeneratingType {
    /// First argument is a momentum.
    fn x_is_momentum(self) -> bool {
        matches!(self, GeneratingType::F3 | GeneratingType::F4)
    }

    /// Second argument is a momentum.
    fn y_is_momentum(self) -> bool {
        matches!(self, GeneratingType::F2 | GeneratingType::F4)
    }

    fn from_flags(x_mom: bool, y_mom: bool) -> Self {
        match (x_mom, y_mom) {
            (false, false) => GeneratingType::F1,
            (false, true) => GeneratingType::F2,
            (true, false) => GeneratingType::F3,
            (true, true) => GeneratingType::F4,
        }
    }
}

/// Exact complex quadratic form of a quantum generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGeneratingFunction {
    pub type_tag: GeneratingType,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub lin_x: Complex64,
    pub lin_y: Complex64,
    pub constant: Complex64,
    pub hbar: f64,
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

impl QuadraticGeneratingFunction {
    /// Real quadratic part with a complex constant.
    #[allow(clippy::too_many_arguments)]
    pub fn real(
        type_tag: GeneratingType,
        alpha: f64,
        beta: f64,
        gamma: f64,
        lin_x: f64,
        lin_y: f64,
        constant: Complex64,
        hbar: f64,
    ) -> Self {
        QuadraticGeneratingFunction {
            type_tag,
            alpha: re(alpha),
            beta: re(beta),
            gamma: re(gamma),
            lin_x: re(lin_x),
            lin_y: re(lin_y),
            constant,
            hbar,
        }
    }

    /// `(i hbar / 2) ln(z)` on the principal branch.
    pub fn log_constant(hbar: f64, z: Complex64) -> Complex64 {
        0.5 * I * hbar * z.ln()
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        self.alpha * (0.5 * x * x)
            + self.beta * (x * y)
            + self.gamma * (0.5 * y * y)
            + self.lin_x * x
            + self.lin_y * y
            + self.constant
    }

    /// `exp(i F(x, y) / hbar)`.
    pub fn kernel(&self, x: f64, y: f64) -> Complex64 {
        (I * self.eval(x, y) / self.hbar).exp()
    }

    pub fn d_dx(&self, x: f64, y: f64) -> Complex64 {
        self.alpha * x + self.beta * y + self.lin_x
    }

    pub fn d_dy(&self, x: f64, y: f64) -> Complex64 {
        self.beta * x + self.gamma * y + self.lin_y
    }

    /// True when every coefficient except the constant is real.
    pub fn has_real_quadratic_part(&self) -> bool {
        [self.alpha, self.beta, self.gamma, self.lin_x, self.lin_y]
            .iter()
            .all(|z| z.im.abs() <= 1e-14 * z.re.abs().max(1.0))
    }

    fn scale(&self) -> f64 {
        self.alpha.norm().max(self.beta.norm()).max(self.gamma.norm())
    }
}

/// Change of generating-function type by the exact complex Gaussian
/// (Fresnel) integral over the shared variable.
///
/// `F1 <-> F2` and `F3 <-> F4` integrate the second argument, `F1 <-> F3` and
/// `F2 <-> F4` the first. `F1 <-> F4` and `F2 <-> F3` go through whichever
/// intermediate type is non-degenerate.
pub fn convert_type(
    f: &QuadraticGeneratingFunction,
    target: GeneratingType,
) -> Result<QuadraticGeneratingFunction> {
    let src = f.type_tag;
    if src == target {
        return Ok(*f);
    }
    let flip_x = src.x_is_momentum() != target.x_is_momentum();
    let flip_y = src.y_is_momentum() != target.y_is_momentum();
    match (flip_x, flip_y) {
        (true, false) => fourier_x(f),
        (false, true) => fourier_y(f),
        _ => {
            let via_y = fourier_y(f).and_then(|g| fourier_x(&g));
            match via_y {
                Ok(g) => Ok(g),
                Err(_) => fourier_x(f).and_then(|g| fourier_y(&g)),
            }
        }
    }
}

/// Result of `(2 pi hbar)^{-1/2} \int dz exp(i (c z^2/2 + b z)/hbar)` as the
/// exponent pieces `-b^2/(2c)` (caller expands) and `(i hbar/2) ln(-i c)`.
fn fresnel_check(c: Complex64, scale: f64) -> Result<Complex64> {
    if c.norm() <= 1e-12 * scale.max(1e-300) {
        return Err(QhjError::DegenerateQuadratic(
            "vanishing quadratic coefficient in the integrated variable: the kernel is a delta".into(),
        ));
    }
    if c.im < -1e-14 * c.norm() {
        return Err(QhjError::DegenerateQuadratic(format!(
            "Gaussian integral diverges: Im(c) = {} < 0",
            c.im
        )));
    }
    Ok(-I * c)
}

fn fourier_y(f: &QuadraticGeneratingFunction) -> Result<QuadraticGeneratingFunction> {
    // Q -> P is e^{+iPQ/hbar}, P -> Q is e^{-iPQ/hbar}
    let sigma = if f.type_tag.y_is_momentum() { -1.0 } else { 1.0 };
    let c = f.gamma;
    let w = fresnel_check(c, f.scale())?;
    let hbar = f.hbar;
    Ok(QuadraticGeneratingFunction {
        type_tag: GeneratingType::from_flags(f.type_tag.x_is_momentum(), !f.type_tag.y_is_momentum()),
        alpha: f.alpha - f.beta * f.beta / c,
        beta: -sigma * f.beta / c,
        gamma: -1.0 / c,
        lin_x: f.lin_x - f.beta * f.lin_y / c,
        lin_y: -sigma * f.lin_y / c,
        constant: f.constant - f.lin_y * f.lin_y / (2.0 * c) + QuadraticGeneratingFunction::log_constant(hbar, w),
        hbar,
    })
}

fn fourier_x(f: &QuadraticGeneratingFunction) -> Result<QuadraticGeneratingFunction> {
    // q -> p is e^{-ipq/hbar}, p -> q is e^{+ipq/hbar}
    let sigma = if f.type_tag.x_is_momentum() { 1.0 } else { -1.0 };
    let c = f.alpha;
    let w = fresnel_check(c, f.scale())?;
    let hbar = f.hbar;
    Ok(QuadraticGeneratingFunction {
        type_tag: GeneratingType::from_flags(!f.type_tag.x_is_momentum(), f.type_tag.y_is_momentum()),
        alpha: -1.0 / c,
        beta: -sigma * f.beta / c,
        gamma: f.gamma - f.beta * f.beta / c,
        lin_x: -sigma * f.lin_x / c,
        lin_y: f.lin_y - f.beta * f.lin_x / c,
        constant: f.constant - f.lin_x * f.lin_x / (2.0 * c) + QuadraticGeneratingFunction::log_constant(hbar, w),
        hbar,
    })
}

/// Affine map `z -> M z + shift` on phase space `z = (q, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCanonicalMap {
    pub matrix: [[f64; 2]; 2],
    pub shift: [f64; 2],
}

impl LinearCanonicalMap {
    /// Checked constructor: the matrix must have unit determinant within 1e-10.
    pub fn new(matrix: [[f64; 2]; 2], shift: [f64; 2]) -> Result<Self> {
        let m = LinearCanonicalMap { matrix, shift };
        let det = m.determinant();
        if (det - 1.0).abs() > 1e-10 {
            return Err(QhjError::invalid("matrix", format!("not symplectic: det = {det}")));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        LinearCanonicalMap {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            shift: [0.0, 0.0],
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[inline]
    pub fn apply(&self, q: f64, p: f64) -> (f64, f64) {
        let m = &self.matrix;
        (
            m[0][0] * q + m[0][1] * p + self.shift[0],
            m[1][0] * q + m[1][1] * p + self.shift[1],
        )
    }

    pub fn inverse(&self) -> Self {
        let m = &self.matrix;
        let det = self.determinant();
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let shift = [
            -(inv[0][0] * self.shift[0] + inv[0][1] * self.shift[1]),
            -(inv[1][0] * self.shift[0] + inv[1][1] * self.shift[1]),
        ];
        LinearCanonicalMap { matrix: inv, shift }
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &LinearCanonicalMap) -> Self {
        let a = &self.matrix;
        let b = &inner.matrix;
        let mut matrix = [[0.0; 2]; 2];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let (s0, s1) = self.apply(inner.shift[0], inner.shift[1]);
        LinearCanonicalMap {
            matrix,
            shift: [s0, s1],
        }
    }

    /// Largest coefficient difference.
    pub fn max_difference(&self, other: &LinearCanonicalMap) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.matrix[i][j] - other.matrix[i][j]).abs());
            }
            d = d.max((self.shift[i] - other.shift[i]).abs());
        }
        d
    }
}

/// Solve the transformation relations of a quadratic generating function for
/// the new variables, giving the map `(q, p) -> (Q, P)`.
///
/// F1: `p = dF/dq`, `P = -dF/dQ`; F2: `p = dF/dq`, `Q = dF/dP`;
/// F3: `q = -dF/dp`, `P = -dF/dQ`; F4: `q = -dF/dp`, `Q = dF/dP`.
pub fn extract_canonical_map(f: &QuadraticGeneratingFunction) -> Result<LinearCanonicalMap> {
    if !f.has_real_quadratic_part() {
        return Err(QhjError::invalid(
            "generating function",
            "complex quadratic coefficients do not define a real canonical map",
        ));
    }
    let (a, b, g, lx, ly) = (f.alpha.re, f.beta.re, f.gamma.re, f.lin_x.re, f.lin_y.re);
    if b.abs() <= 1e-14 * a.abs().max(g.abs()).max(1.0) {
        return Err(QhjError::DegenerateQuadratic("beta = 0: arguments are uncoupled".into()));
    }
    // The old-variable relation reads  s_old * u = a x + b y + lx,  where x is
    // the old argument, u its conjugate and y the new argument; solve it for y
    // then the new conjugate from the second relation.
    //   F1/F2: x = q, u = p, s_old = +1     F3/F4: x = p, u = q, s_old = -1
    //   F1/F3: new conjugate P = -dF/dy     F2/F4: new conjugate Q = +dF/dy
    let x_mom = f.type_tag.x_is_momentum();
    let y_mom = f.type_tag.y_is_momentum();
    let s_old = if x_mom { -1.0 } else { 1.0 };
    let s_new = if y_mom { 1.0 } else { -1.0 };
    // y = c_q q + c_p p + c0
    let (mut yq, mut yp) = if x_mom {
        // s_old*q = a p + b y + lx
        (s_old / b, -a / b)
    } else {
        // p = a q + b y + lx
        (-a / b, 1.0 / b)
    };
    let y0 = -lx / b;
    // conj = s_new (b x + g y + ly)
    let (xq, xp) = if x_mom { (0.0, 1.0) } else { (1.0, 0.0) };
    let mut cq = s_new * (b * xq + g * yq);
    let mut cp = s_new * (b * xp + g * yp);
    let c0 = s_new * (g * y0 + ly);
    // Order the output as (Q, P).
    let (matrix, shift) = if y_mom {
        // y = P, conj = Q
        std::mem::swap(&mut yq, &mut cq);
        std::mem::swap(&mut yp, &mut cp);
        ([[yq, yp], [cq, cp]], [c0, y0])
    } else {
        ([[yq, yp], [cq, cp]], [y0, c0])
    };
    LinearCanonicalMap::new(matrix, shift)
}

/// Real function `g(q)` defining the gauge transformation `U = exp(i g(q)/hbar)`.
#[derive(Clone)]
pub enum GaugeFunction {
    /// `g(q) = sum_k coeffs[k] q^k`
    Polynomial(Vec<f64>),
    Custom {
        name: String,
        value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for GaugeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeFunction::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            GaugeFunction::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

impl GaugeFunction {
    pub fn value(&self, q: f64) -> f64 {
        match self {
            GaugeFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, c| acc * q + c),
            GaugeFunction::Custom { value, .. } => value(q),
        }
    }

    pub fn derivative(&self, q: f64) -> f64 {
        match self {
            GaugeFunction::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * q + k as f64 * c),
            GaugeFunction::Custom { derivative, .. } => derivative(q),
        }
    }

    /// Polynomial degree, `None` for custom functions.
    pub fn degree(&self) -> Option<usize> {
        match self {
            GaugeFunction::Polynomial(c) => Some(c.iter().rposition(|c| *c != 0.0).unwrap_or(0)),
            GaugeFunction::Custom { .. } => None,
        }
    }

    pub fn is_at_most_quadratic(&self) -> bool {
        matches!(self.degree(), Some(d) if d <= 2)
    }
}

/// Non-quadratic F2 of the gauge family, `g(q) + q P + (i hbar/2) ln 2 pi hbar`.
#[derive(Debug, Clone)]
pub struct GaugeF2 {
    pub g: GaugeFunction,
    pub hbar: f64,
}

impl GaugeF2 {
    pub fn eval(&self, q: f64, big_p: f64) -> Complex64 {
        re(self.g.value(q) + q * big_p) + QuadraticGeneratingFunction::log_constant(self.hbar, re(2.0 * PI * self.hbar))
    }

    /// Induced point transformation `Q = q`, `P = p - g'(q)`.
    pub fn map(&self, q: f64, p: f64) -> (f64, f64) {
        (q, p - self.g.derivative(q))
    }
}

/// A generating function of the gauge family.
#[derive(Debug, Clone)]
pub enum GeneratingFunction {
    Quadratic(QuadraticGeneratingFunction),
    Gauge(GaugeF2),
}

impl GeneratingFunction {
    pub fn is_quadratic(&self) -> bool {
        matches!(self, GeneratingFunction::Quadratic(_))
    }

    /// Map `(q, p) -> (Q, P)` induced by the generating function.
    pub fn map_point(&self, q: f64, p: f64) -> Result<(f64, f64)> {
        match self {
            GeneratingFunction::Quadratic(f) => Ok(extract_canonical_map(f)?.apply(q, p)),
            GeneratingFunction::Gauge(g) => Ok(g.map(q, p)),
        }
    }
}

/// F2 of the unitary `exp(i g(q)/hbar)`; quadratic `g` collapses to a
/// [`QuadraticGeneratingFunction`].
pub fn gauge_generating_function(g: &GaugeFunction, hbar: f64) -> GeneratingFunction {
    let log_c = QuadraticGeneratingFunction::log_constant(hbar, re(2.0 * PI * hbar));
    match g {
        GaugeFunction::Polynomial(c) if g.is_at_most_quadratic() => {
            let at = |k: usize| c.get(k).copied().unwrap_or(0.0);
            GeneratingFunction::Quadratic(QuadraticGeneratingFunction::real(
                GeneratingType::F2,
                2.0 * at(2),
                1.0,
                0.0,
                at(1),
                0.0,
                re(at(0)) + log_c,
                hbar,
            ))
        }
        _ => GeneratingFunction::Gauge(GaugeF2 { g: g.clone(), hbar }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_f1(t: f64, hbar: f64) -> QuadraticGeneratingFunction {
        let (s, c) = t.sin_cos();
        QuadraticGeneratingFunction::real(
            GeneratingType::F1,
            c / s,
            -1.0 / s,
            c / s,
            0.0,
            0.0,
            QuadraticGeneratingFunction::log_constant(hbar, Complex64::new(0.0, 2.0 * PI * hbar * s)),
            hbar,
        )
    }

    #[test]
    fn harmonic_f1_to_f2_closed_form() {
        for t in [0.3, 0.7, 1.1, 2.0] {
            let f2 = convert_type(&harmonic_f1(t, 1.0), GeneratingType::F2).unwrap();
            assert_eq!(f2.type_tag, GeneratingType::F2);
            assert!((f2.alpha - re(-t.tan())).norm() < 1e-12);
            assert!((f2.beta - re(1.0 / t.cos())).norm() < 1e-12);
            assert!((f2.gamma - re(-t.tan())).norm() < 1e-12);
            let want = QuadraticGeneratingFunction::log_constant(1.0, re(2.0 * PI * t.cos()));
            assert!((f2.constant - want).norm() < 1e-12, "t={t}: {} vs {want}", f2.constant);
        }
    }

    #[test]
    fn identity_f2_has_no_f1() {
        let id = QuadraticGeneratingFunction::real(
            GeneratingType::F2,
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            QuadraticGeneratingFunction::log_constant(1.0, re(2.0 * PI)),
            1.0,
        );
        assert!(matches!(convert_type(&id, GeneratingType::F1), Err(QhjError::DegenerateQuadratic(_))));
        // delta(p - P) in the momentum representation as well
        assert!(convert_type(&id, GeneratingType::F4).is_err());
    }

    #[test]
    fn divergent_gaussian_rejected() {
        let mut f = harmonic_f1(0.5, 1.0);
        f.gamma = Complex64::new(1.0, -0.5);
        assert!(convert_type(&f, GeneratingType::F2).is_err());
    }

    #[test]
    fn harmonic_map_is_rotation() {
        let t = 0.9;
        let m = extract_canonical_map(&harmonic_f1(t, 1.0)).unwrap();
        let (s, c) = t.sin_cos();
        let want = [[c, -s], [s, c]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.matrix[i][j] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_types_give_same_map() {
        let f1 = harmonic_f1(0.6, 0.7);
        let m1 = extract_canonical_map(&f1).unwrap();
        for ty in [GeneratingType::F2, GeneratingType::F3, GeneratingType::F4] {
            let f = convert_type(&f1, ty).unwrap();
            let m = extract_canonical_map(&f).unwrap();
            assert!(m.max_difference(&m1) < 1e-12, "{ty:?}: {m:?} vs {m1:?}");
        }
    }

    #[test]
    fn gauge_quadratic_map() {
        let g = GaugeFunction::Polynomial(vec![0.0, 0.0, 0.75]);
        let gf = gauge_generating_function(&g, 1.0);
        assert!(gf.is_quadratic());
        let (qq, pp) = gf.map_point(1.2, 0.4).unwrap();
        assert!((qq - 1.2).abs() < 1e-14);
        assert!((pp - (0.4 - 1.5 * 1.2)).abs() < 1e-14);
        let zero = gauge_generating_function(&GaugeFunction::Polynomial(vec![]), 1.0);
        match zero {
            GeneratingFunction::Quadratic(f) => {
                let m = extract_canonical_map(&f).unwrap();
                assert!(m.max_difference(&LinearCanonicalMap::identity()) < 1e-15);
            }
            _ => panic!("g = 0 must be quadratic"),
        }
    }

    #[test]
    fn gauge_cubic_is_opaque() {
        let g = GaugeFunction::Polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let gf = gauge_generating_function(&g, 1.0);
        assert!(!gf.is_quadratic());
        let (qq, pp) = gf.map_point(0.5, 1.0).unwrap();
        assert_eq!(qq, 0.5);
        assert!((pp - (1.0 - 0.75)).abs() < 1e-15);
    }

    #[test]
    fn map_inverse_and_compose() {
        let m = LinearCanonicalMap::new([[2.0, 1.0], [1.0, 1.0]], [0.3, -0.2]).unwrap();
        let id = m.compose(&m.inverse());
        assert!(id.max_difference(&LinearCanonicalMap::identity()) < 1e-14);
        assert!(LinearCanonicalMap::new([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0]).is_err());
    }
}
