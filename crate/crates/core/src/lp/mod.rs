//! Equality-constrained linear programs: `min cᵀx  s.t.  Ax = b`, with every
//! column nonnegative unless marked free.
//!
//! [`solve`] runs a deterministic two-phase revised simplex; [`write_mps`]
//! emits free-format MPS for cross-checking with external solvers.

mod mps;
mod simplex;

pub use mps::write_mps;
pub use simplex::{solve, solve_from, solve_with, Pricing, SolverOptions};

use serde::Serialize;

/// Sparse column-major LP in equality form.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    rhs: Vec<f64>,
    columns: Vec<Column>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub cost: f64,
    pub free: bool,
    /// `(row, value)` pairs sorted by row, nonzero values only.
    pub entries: Vec<(usize, f64)>,
}

impl LinearProgram {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self { rhs, columns: Vec::new() }
    }

    /// Appends a column and returns its index. Entries are merged and sorted;
    /// zero values are dropped.
    pub fn add_column(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        free: bool,
        entries: impl IntoIterator<Item = (usize, f64)>,
    ) -> usize {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (r, v) in entries {
            assert!(r < self.rhs.len(), "row {r} out of range");
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += v,
                _ => merged.push((r, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        self.columns.push(Column { name: name.into(), cost, free, entries: merged });
        self.columns.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.rhs.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.entries.len()).sum()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    /// `‖Ax - b‖∞`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.nrows()];
        for (col, &v) in self.columns.iter().zip(x) {
            for &(r, a) in &col.entries {
                ax[r] += a * v;
            }
        }
        ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; `+∞` when infeasible, `-∞` when unbounded.
    pub objective: f64,
    /// Primal values per column (empty unless optimal or at the iteration limit).
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖Ax - b‖∞` at the returned point.
    pub residual: f64,
    /// Objective after every phase-two pivot (only when tracing is enabled).
    pub trace: Vec<f64>,
}
