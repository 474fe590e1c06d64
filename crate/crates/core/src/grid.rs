//! Uniform closed-interval sampling lattices.

use serde::{Deserialize, Serialize};

use crate::error::{QhjError, Result};

/// Uniform grid on the closed interval `[x_min, x_max]` with both endpoints
/// sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl TryFrom<GridSpec> for Grid1D {
    type Error = QhjError;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid1D::new(s.x_min, s.x_max, s.n_points)
    }
}

impl From<Grid1D> for GridSpec {
    fn from(g: Grid1D) -> Self {
        GridSpec {
            x_min: g.x_min,
            x_max: g.x_max,
            n_points: g.n_points,
        }
    }
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(QhjError::invalid("n_points", "need at least 2 points"));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(QhjError::invalid(
                "x_max",
                format!("interval [{x_min}, {x_max}] is empty or not finite"),
            ));
        }
        Ok(Grid1D {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Grid1D::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    /// Coordinate of sample `i`, computed from the index (no accumulation).
    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    /// Nearest sample index and the fractional offset in units of the spacing,
    /// or `None` when `x` lies outside the closed interval.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        let s = (x - self.x_min) / self.spacing();
        let i = (s.floor() as usize).min(self.n_points - 2);
        Some((i, s - i as f64))
    }

    /// Index of the sample equal to `x` within `tol` spacings.
    pub fn index_of(&self, x: f64, tol: f64) -> Option<usize> {
        let s = (x - self.x_min) / self.spacing();
        let i = s.round();
        if i < 0.0 || i as usize >= self.n_points || (s - i).abs() > tol {
            None
        } else {
            Some(i as usize)
        }
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }

    /// Trapezoidal integral of sampled values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let interior: f64 = values[1..values.len() - 1].iter().sum();
        self.spacing() * (interior + 0.5 * (values[0] + values[values.len() - 1]))
    }

    /// Same lattice, up to rounding.
    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.spacing()
            && (self.x_max - other.x_max).abs() <= 1e-12 * self.spacing()
    }

    /// Sub-lattice keeping every `stride`-th sample starting at `offset`.
    pub fn decimate(&self, offset: usize, stride: usize) -> Result<Grid1D> {
        if stride == 0 || offset >= self.n_points {
            return Err(QhjError::invalid("stride", "empty decimation"));
        }
        let n = (self.n_points - 1 - offset) / stride + 1;
        Grid1D::new(self.point(offset), self.point(offset + (n - 1) * stride), n)
    }
}
