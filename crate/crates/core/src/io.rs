//! CSV and JSON artifact writers.
//!
//! CSV files are comma separated with `#` comment lines carrying metadata;
//! complex columns are split into `_re` and `_im`. Floats use Rust's
//! shortest round-trip formatting, so output is deterministic.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{QhjError, Result};
use crate::grid::Grid1D;
use crate::phase_space::PhaseSpaceField;
use crate::propagation::{PropagatorMatrix, UnitarityReport};
use crate::series::PerturbativeHJSolution;
use crate::state::WaveFunction;

/// In-memory CSV document.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    comments: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn grid_comment(&mut self, name: &str, g: &Grid1D) -> &mut Self {
        self.comment(format!("{name}: x_min={} x_max={} n_points={}", g.x_min(), g.x_max(), g.len()))
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(QhjError::Io(format!("row of {} values for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| QhjError::Io(format!("{}: {e}", path.display())))
    }
}

/// Pretty JSON with struct field order preserved.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| QhjError::Io(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| QhjError::Io(format!("{}: {e}", path.display())))
}

/// `q, psi_re, psi_im` table.
pub fn wavefunction_table(psi: &WaveFunction) -> CsvTable {
    let mut t = CsvTable::new(&["q", "psi_re", "psi_im"]);
    t.grid_comment("q_grid", psi.grid()).comment(format!("hbar: {}", psi.hbar()));
    for (q, a) in psi.grid().points().zip(psi.amplitudes()) {
        t.rows.push(vec![q, a.re, a.im]);
    }
    t
}

/// Long-format propagator: `q, Q, K_re, K_im`.
pub fn propagator_table(k: &PropagatorMatrix) -> CsvTable {
    let mut t = CsvTable::new(&["q", "Q", "K_re", "K_im"]);
    t.grid_comment("q_grid", &k.q_grid)
        .grid_comment("Q_grid", &k.Q_grid)
        .comment(format!("hbar: {}", k.hbar))
        .comment(format!("t: {}", k.t));
    for (i, q) in k.q_grid.points().enumerate() {
        for (j, big_q) in k.Q_grid.points().enumerate() {
            let z = k.entry(i, j);
            t.rows.push(vec![q, big_q, z.re, z.im]);
        }
    }
    t
}

/// Gram matrix of a unitarity check: `i, j, G_re, G_im`.
pub fn gram_table(r: &UnitarityReport) -> CsvTable {
    let mut t = CsvTable::new(&["i", "j", "G_re", "G_im"]);
    t.comment(format!("probes: {}", r.n_probes)).comment(format!("tol: {}", r.tol));
    let n = r.n_probes;
    for (k, z) in r.gram.iter().enumerate() {
        t.rows.push(vec![(k / n) as f64, (k % n) as f64, z.re, z.im]);
    }
    t
}

/// Tabulated principal function with the momenta `p1 = dS0/dq1` and
/// `P2 = -dS0/dQ2` from centred differences of the table (one-sided at the
/// edges).
pub fn s0_table(sol: &PerturbativeHJSolution) -> CsvTable {
    let mut t = CsvTable::new(&["q1", "Q2", "t", "S0", "p1", "P2"]);
    t.grid_comment("q1_grid", &sol.q1_grid)
        .grid_comment("Q2_grid", &sol.Q2_grid)
        .comment(format!("hbar: {}", sol.hbar))
        .comment(format!("mode: {:?}", sol.mode));
    let (n, m) = (sol.q1_grid.len(), sol.Q2_grid.len());
    let s = |i: usize, j: usize| sol.S0_field[i * m + j];
    let diff = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
    for i in 0..n {
        for j in 0..m {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let p1 = diff(s(a, j), s(b, j), (b - a) as f64 * sol.q1_grid.spacing());
            let (c, d) = (j.saturating_sub(1), (j + 1).min(m - 1));
            let big_p2 = -diff(s(i, c), s(i, d), (d - c) as f64 * sol.Q2_grid.spacing());
            t.rows.push(vec![sol.q1_grid.point(i), sol.Q2_grid.point(j), sol.t, s(i, j), p1, big_p2]);
        }
    }
    t
}

/// Order-1 series on the table: `q1, Q2, S_re, S_im`.
pub fn series_table(sol: &PerturbativeHJSolution) -> CsvTable {
    let mut t = CsvTable::new(&["q1", "Q2", "S_re", "S_im"]);
    t.grid_comment("q1_grid", &sol.q1_grid)
        .grid_comment("Q2_grid", &sol.Q2_grid)
        .comment(format!("hbar: {}", sol.hbar))
        .comment(format!("t: {}", sol.t));
    for i in 0..sol.q1_grid.len() {
        for j in 0..sol.Q2_grid.len() {
            let z: Complex64 = sol.total(i, j);
            t.rows.push(vec![sol.q1_grid.point(i), sol.Q2_grid.point(j), z.re, z.im]);
        }
    }
    t
}

#[derive(Serialize)]
struct FieldSidecar<'a> {
    kind: &'a crate::phase_space::DistributionChoice,
    hbar: f64,
    t: f64,
    q_grid: Grid1D,
    p_grid: Grid1D,
    integral: f64,
    csv: &'a str,
}

/// Phase-space field as `q, p, value` CSV plus a JSON sidecar.
pub fn write_field(dir: &Path, stem: &str, field: &PhaseSpaceField, t: f64) -> Result<Vec<String>> {
    let csv_name = format!("{stem}.csv");
    let json_name = format!("{stem}.json");
    let mut tab = CsvTable::new(&["q", "p", "value"]);
    tab.grid_comment("q_grid", &field.q_grid)
        .grid_comment("p_grid", &field.p_grid)
        .comment(format!("hbar: {}", field.hbar))
        .comment(format!("t: {t}"));
    let ps = field.p_grid.to_vec();
    for (i, q) in field.q_grid.points().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            tab.rows.push(vec![q, *p, field.at(i, j)]);
        }
    }
    tab.write(&dir.join(&csv_name))?;
    write_json(
        &dir.join(&json_name),
        &FieldSidecar {
            kind: &field.kind,
            hbar: field.hbar,
            t,
            q_grid: field.q_grid,
            p_grid: field.p_grid,
            integral: field.integral(),
            csv: &csv_name,
        },
    )?;
    Ok(vec![csv_name, json_name])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_stable() {
        let mut t = CsvTable::new(&["x", "y_re", "y_im"]);
        t.comment("grid: test");
        t.push(vec![0.1, 1.0, -2.5e-17]).unwrap();
        assert_eq!(t.render(), "# grid: test\nx,y_re,y_im\n1e-1,1e0,-2.5e-17\n");
        assert!(t.push(vec![1.0]).is_err());
    }

    #[test]
    fn floats_round_trip() {
        let mut t = CsvTable::new(&["v"]);
        let v = std::f64::consts::PI / 7.0;
        t.push(vec![v]).unwrap();
        let line = t.render().lines().last().unwrap().to_string();
        assert_eq!(line.parse::<f64>().unwrap(), v);
    }
}
