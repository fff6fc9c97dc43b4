//! Two-phase revised simplex with a product-form basis inverse.
//!
//! Free columns are split into a nonnegative pair. Phase one starts from a
//! basis of positive singleton columns where available and artificials
//! elsewhere. The inverse is kept as a list of eta matrices and rebuilt from
//! scratch every `refactor_interval` pivots.
//!
//! Phase two runs on a right-hand side shifted so that every basic variable
//! sits slightly above zero, which breaks the massive degeneracy of
//! certificate LPs. The shift is removed at the end and any basic variable
//! left negative is repaired with dual simplex pivots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LinearProgram, LpSolution, LpStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pricing {
    /// Smallest-index entering and leaving variable on every pivot.
    Bland,
    /// Most negative reduced cost within a rotating section of the columns,
    /// dropping to Bland's rule while a run of degenerate pivots is in
    /// progress.
    DantzigBland,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub refactor_interval: usize,
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pricing: Pricing,
    /// Relative size of the phase-two right-hand-side shift; 0 disables it.
    pub perturbation: f64,
    /// Record the objective after every phase-two pivot.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            refactor_interval: 100,
            pivot_tol: 1e-9,
            feasibility_tol: 1e-8,
            optimality_tol: 1e-9,
            pricing: Pricing::DantzigBland,
            perturbation: 1e-7,
            trace: false,
        }
    }
}

/// Consecutive degenerate pivots after which Dantzig pricing hands over to
/// Bland's rule.
const DEGENERATE_STREAK: usize = 20;

/// Entries below this magnitude are dropped from eta vectors.
const DROP_TOL: f64 = 1e-14;

/// Partial pricing scans `1/PRICING_SEGMENTS` of the columns per pass, but no
/// fewer than `MIN_SEGMENT`, and keeps scanning until a candidate turns up.
const PRICING_SEGMENTS: usize = 16;
const MIN_SEGMENT: usize = 256;

const PERTURBATION_SEED: u64 = 0x6c70_7368_6966_7400;

pub fn solve(lp: &LinearProgram) -> LpSolution {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> LpSolution {
    solve_from(lp, opts, None)
}

/// Like [`solve_with`], starting from `basis` (one original column per row)
/// when it is nonsingular and primal feasible. Phase one is skipped in that
/// case; otherwise the hint is ignored.
pub fn solve_from(lp: &LinearProgram, opts: &SolverOptions, basis: Option<&[usize]>) -> LpSolution {
    let mut work = Work::new(lp, opts);
    let mut iterations = 0;

    // A row without entries can only hold a zero right-hand side.
    let mut touched = vec![false; lp.nrows()];
    for col in lp.columns() {
        for &(r, _) in &col.entries {
            touched[r] = true;
        }
    }
    if touched.iter().zip(lp.rhs()).any(|(&t, b)| !t && b.abs() > opts.feasibility_tol) {
        return LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            x: Vec::new(),
            iterations,
            residual: f64::INFINITY,
            trace: Vec::new(),
        };
    }

    if !basis.is_some_and(|b| work.try_basis(b)) {
        let phase_one = work.run(Phase::One, &mut iterations, &mut Vec::new());
        if phase_one == Outcome::IterationLimit {
            return work.finish(lp, LpStatus::IterationLimit, iterations, Vec::new());
        }
        let infeasibility = work.phase_one_objective();
        let scale = 1.0 + lp.rhs().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > opts.feasibility_tol * scale {
            return LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                x: Vec::new(),
                iterations,
                residual: f64::INFINITY,
                trace: Vec::new(),
            };
        }
        work.drive_out_artificials();
    }

    let mut trace = Vec::new();
    let perturbed = opts.perturbation > 0.0;
    if perturbed {
        work.perturb();
    }
    let mut outcome = work.run(Phase::Two, &mut iterations, &mut trace);
    if perturbed && outcome == Outcome::Optimal {
        work.unperturb();
        if !work.dual_cleanup(&mut iterations) {
            let exact = SolverOptions { perturbation: 0.0, ..opts.clone() };
            return solve_from(lp, &exact, basis);
        }
        outcome = work.run(Phase::Two, &mut iterations, &mut trace);
    }
    match outcome {
        Outcome::Optimal => work.finish(lp, LpStatus::Optimal, iterations, trace),
        Outcome::Unbounded => LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            x: Vec::new(),
            iterations,
            residual: f64::NAN,
            trace,
        },
        Outcome::IterationLimit => work.finish(lp, LpStatus::IterationLimit, iterations, trace),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Elementary matrix equal to the identity except for column `row`.
struct Eta {
    row: usize,
    entries: Vec<(usize, f64)>,
}

#[derive(Default)]
struct Factor {
    etas: Vec<Eta>,
}

impl Factor {
    /// `v ← B⁻¹ v`.
    fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let pivot = v[eta.row];
            if pivot == 0.0 {
                continue;
            }
            v[eta.row] = 0.0;
            for &(i, e) in &eta.entries {
                v[i] += e * pivot;
            }
        }
    }

    /// `yᵀ ← yᵀ B⁻¹`.
    fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, e)| e * y[i]).sum();
            y[eta.row] = s;
        }
    }

    /// Appends the eta that pivots the transformed column `alpha` on `row`.
    fn push(&mut self, row: usize, alpha: &[f64]) {
        let inv = 1.0 / alpha[row];
        let mut entries = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i == row {
                entries.push((i, inv));
            } else if a.abs() > DROP_TOL {
                entries.push((i, -a * inv));
            }
        }
        self.etas.push(Eta { row, entries });
    }
}

struct Work<'a> {
    opts: &'a SolverOptions,
    m: usize,
    /// Internal columns: split structurals followed by one artificial per row.
    cols: Vec<Vec<(usize, f64)>>,
    /// Original column and sign of each split structural.
    origin: Vec<(usize, f64)>,
    n_struct: usize,
    b: Vec<f64>,
    /// Phase-two cost of each split structural.
    struct_costs: Vec<f64>,
    /// Unshifted right-hand side while phase two runs perturbed.
    b_exact: Option<Vec<f64>>,
    basis: Vec<usize>,
    /// Row position of each basic column, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    xb: Vec<f64>,
    factor: Factor,
    pivots_since_refactor: usize,
    /// Columns barred from entering the basis.
    barred: Vec<bool>,
    /// Where the next partial pricing pass starts.
    price_start: usize,
}

impl<'a> Work<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let m = lp.nrows();
        let row_sign: Vec<f64> = lp.rhs().iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = lp.rhs().iter().zip(&row_sign).map(|(v, s)| v * s).collect();

        let mut cols = Vec::new();
        let mut origin = Vec::new();
        for (j, col) in lp.columns().iter().enumerate() {
            let entries: Vec<(usize, f64)> = col.entries.iter().map(|&(r, v)| (r, v * row_sign[r])).collect();
            if col.free {
                cols.push(entries.iter().map(|&(r, v)| (r, -v)).collect());
                origin.push((j, -1.0));
            }
            cols.push(entries);
            origin.push((j, 1.0));
        }
        // Free columns appear as (negative part, positive part); keep the
        // positive part first so that smallest-index rules prefer it.
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by_key(|&i| (origin[i].0, origin[i].1 < 0.0));
        let cols: Vec<Vec<(usize, f64)>> = order.iter().map(|&i| cols[i].clone()).collect();
        let origin: Vec<(usize, f64)> = order.iter().map(|&i| origin[i]).collect();
        let n_struct = cols.len();
        let struct_costs = origin.iter().map(|&(j, sign)| sign * lp.columns()[j].cost).collect();

        let mut all = cols;
        for i in 0..m {
            all.push(vec![(i, 1.0)]);
        }
        let total = all.len();

        // Crash basis: a positive singleton column per row where one exists.
        let mut basis: Vec<usize> = (0..m).map(|i| n_struct + i).collect();
        let mut taken = vec![false; m];
        for (j, col) in all[..n_struct].iter().enumerate() {
            if let [(r, v)] = col.as_slice() {
                if *v > 0.0 && !taken[*r] {
                    taken[*r] = true;
                    basis[*r] = j;
                }
            }
        }
        let mut position = vec![usize::MAX; total];
        for (r, &j) in basis.iter().enumerate() {
            position[j] = r;
        }

        let mut work = Self {
            opts,
            m,
            cols: all,
            origin,
            n_struct,
            b,
            b_exact: None,
            struct_costs,
            basis,
            position,
            xb: vec![0.0; m],
            factor: Factor::default(),
            pivots_since_refactor: 0,
            barred: vec![false; total],
            price_start: 0,
        };
        work.refactor();
        work
    }

    /// Installs a basis given by original column indices; keeps it only if it
    /// factors without artificials and is primal feasible.
    fn try_basis(&mut self, hint: &[usize]) -> bool {
        if hint.len() != self.m {
            return false;
        }
        let mut internal = vec![usize::MAX; self.origin.last().map_or(0, |o| o.0 + 1)];
        for (j, &(orig, sign)) in self.origin.iter().enumerate() {
            if sign > 0.0 {
                internal[orig] = j;
            }
        }
        let mut seen = vec![false; self.cols.len()];
        let mut basis = Vec::with_capacity(self.m);
        for &orig in hint {
            match internal.get(orig) {
                Some(&j) if j != usize::MAX && !seen[j] => {
                    seen[j] = true;
                    basis.push(j);
                }
                _ => return false,
            }
        }
        let saved = (self.basis.clone(), self.position.clone());
        for &j in &self.basis {
            self.position[j] = usize::MAX;
        }
        for (r, &j) in basis.iter().enumerate() {
            self.position[j] = r;
        }
        self.basis = basis;
        self.refactor();
        // A free column that came out negative swaps to its mirrored half.
        let mut flipped = false;
        for r in 0..self.m {
            let j = self.basis[r];
            if j < self.n_struct && self.xb[r] < 0.0 {
                if let Some(mirror) = self.mirror(j) {
                    self.position[j] = usize::MAX;
                    self.position[mirror] = r;
                    self.basis[r] = mirror;
                    flipped = true;
                }
            }
        }
        if flipped {
            self.refactor();
        }
        let tol = self.opts.feasibility_tol;
        let ok = self.basis.iter().all(|&j| !self.is_artificial(j)) && self.xb.iter().all(|&x| x >= -tol);
        if ok {
            for x in &mut self.xb {
                *x = x.max(0.0);
            }
            for j in self.n_struct..self.cols.len() {
                self.barred[j] = true;
            }
        } else {
            for &j in &self.basis {
                self.position[j] = usize::MAX;
            }
            (self.basis, self.position) = saved;
            for (r, &j) in self.basis.clone().iter().enumerate() {
                self.position[j] = r;
            }
            self.refactor();
        }
        ok
    }

    /// The other half of a split free column.
    fn mirror(&self, j: usize) -> Option<usize> {
        let orig = self.origin[j].0;
        [j.wrapping_sub(1), j + 1]
            .into_iter()
            .find(|&i| i < self.n_struct && i != j && self.origin[i].0 == orig)
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_struct
    }

    fn cost(&self, phase: Phase, j: usize) -> f64 {
        match phase {
            Phase::One => {
                if self.is_artificial(j) {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if self.is_artificial(j) {
                    0.0
                } else {
                    self.struct_costs[j]
                }
            }
        }
    }

    fn column_dense(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for &(r, a) in &self.cols[j] {
            v[r] = a;
        }
        v
    }

    /// Rebuilds the eta file for the current basis and recomputes `x_B`.
    fn refactor(&mut self) {
        let (order, preferred) = self.pivot_order();
        let mut factor = Factor::default();
        let mut claimed = vec![false; self.m];
        let mut reserved = vec![false; self.m];
        for r in preferred.iter().flatten() {
            reserved[*r] = true;
        }
        let mut new_basis = vec![usize::MAX; self.m];
        let mut rejected = Vec::new();
        for (&j, &pref) in order.iter().zip(&preferred) {
            let mut alpha = self.column_dense(j);
            factor.ftran(&mut alpha);
            if let Some(r) = pref {
                reserved[r] = false;
            }
            let row = match pref {
                Some(r) if alpha[r].abs() > self.opts.pivot_tol => Some(r),
                _ => {
                    let mut best: Option<(usize, f64)> = None;
                    for (i, &a) in alpha.iter().enumerate() {
                        if !claimed[i] && !reserved[i] && a.abs() > best.map_or(self.opts.pivot_tol, |b| b.1) {
                            best = Some((i, a.abs()));
                        }
                    }
                    best.map(|b| b.0)
                }
            };
            match row {
                Some(r) => {
                    factor.push(r, &alpha);
                    claimed[r] = true;
                    new_basis[r] = j;
                }
                None => rejected.push(j),
            }
        }
        // A numerically singular basis: patch the gaps with artificials.
        for j in rejected {
            self.position[j] = usize::MAX;
        }
        for r in 0..self.m {
            if !claimed[r] {
                let art = self.n_struct + r;
                let mut alpha = self.column_dense(art);
                factor.ftran(&mut alpha);
                factor.push(r, &alpha);
                new_basis[r] = art;
            }
        }
        for (r, &j) in new_basis.iter().enumerate() {
            self.position[j] = r;
        }
        self.basis = new_basis;
        self.factor = factor;
        self.pivots_since_refactor = 0;
        self.recompute_xb();
    }

    /// Orders basic columns so that the eta file stays close to the basis in
    /// sparsity: row singletons first, then the remaining bump by nonzero
    /// count, then column singletons in reverse order of discovery. Singleton
    /// columns come with the row they should pivot on.
    fn pivot_order(&self) -> (Vec<usize>, Vec<Option<usize>>) {
        let m = self.m;
        let tol = self.opts.pivot_tol;
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut col_count = vec![0usize; m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                if a.abs() > tol {
                    row_cols[i].push(k);
                    col_count[k] += 1;
                }
            }
        }
        let mut row_count: Vec<usize> = row_cols.iter().map(Vec::len).collect();
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut row_stack: Vec<usize> = (0..m).rev().filter(|&r| row_count[r] == 1).collect();
        let mut col_stack: Vec<usize> = (0..m).rev().filter(|&k| col_count[k] == 1).collect();
        let mut front = Vec::new();
        let mut back = Vec::new();
        loop {
            if let Some(r) = row_stack.pop() {
                if !row_active[r] || row_count[r] != 1 {
                    continue;
                }
                let k = *row_cols[r].iter().find(|&&k| col_active[k]).expect("active entry");
                front.push((k, r));
                col_active[k] = false;
                row_active[r] = false;
                for &(i, a) in &self.cols[self.basis[k]] {
                    if a.abs() > tol && row_active[i] {
                        row_count[i] -= 1;
                        if row_count[i] == 1 {
                            row_stack.push(i);
                        }
                    }
                }
            } else if let Some(k) = col_stack.pop() {
                if !col_active[k] || col_count[k] != 1 {
                    continue;
                }
                let r = self.cols[self.basis[k]]
                    .iter()
                    .find(|&&(i, a)| a.abs() > tol && row_active[i])
                    .expect("active entry")
                    .0;
                back.push((k, r));
                col_active[k] = false;
                row_active[r] = false;
                for &k2 in &row_cols[r] {
                    if col_active[k2] {
                        col_count[k2] -= 1;
                        if col_count[k2] == 1 {
                            col_stack.push(k2);
                        }
                    }
                }
            } else {
                break;
            }
        }
        let mut bump: Vec<usize> = (0..m).filter(|&k| col_active[k]).collect();
        bump.sort_by_key(|&k| (col_count[k], self.basis[k]));

        let mut order = Vec::with_capacity(m);
        let mut preferred = Vec::with_capacity(m);
        for &(k, r) in &front {
            order.push(self.basis[k]);
            preferred.push(Some(r));
        }
        for &k in &bump {
            order.push(self.basis[k]);
            preferred.push(None);
        }
        for &(k, r) in back.iter().rev() {
            order.push(self.basis[k]);
            preferred.push(Some(r));
        }
        (order, preferred)
    }

    fn recompute_xb(&mut self) {
        let mut x = self.b.clone();
        self.factor.ftran(&mut x);
        // One step of iterative refinement against the true basis columns.
        let mut r = self.b.clone();
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                r[i] -= a * x[pos];
            }
        }
        self.factor.ftran(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
        self.xb = x;
    }

    fn phase_one_objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, &v)| v.max(0.0))
            .sum()
    }

    /// Pivots basic artificials out where some structural column allows it;
    /// the rest sit on redundant rows and stay at zero. All artificials are
    /// then barred from entering.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let mut rho = vec![0.0; self.m];
            rho[r] = 1.0;
            self.factor.btran(&mut rho);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_struct {
                if self.position[j] != usize::MAX {
                    continue;
                }
                let v: f64 = self.cols[j].iter().map(|&(i, a)| rho[i] * a).sum();
                if v.abs() > best.map_or(1e-7, |b| b.1) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let mut alpha = self.column_dense(j);
                self.factor.ftran(&mut alpha);
                self.pivot(j, r, &alpha);
            }
        }
        for j in self.n_struct..self.cols.len() {
            self.barred[j] = true;
        }
        self.refactor();
    }

    /// Shifts `b` so that each structural basic variable moves up by a
    /// small random amount.
    fn perturb(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(PERTURBATION_SEED);
        let mut b = self.b.clone();
        for (r, &j) in self.basis.iter().enumerate() {
            let u: f64 = rng.gen_range(0.5..1.0);
            if self.is_artificial(j) {
                continue;
            }
            let delta = self.opts.perturbation * (1.0 + self.xb[r].abs()) * u;
            for &(i, a) in &self.cols[j] {
                b[i] += a * delta;
            }
        }
        self.b_exact = Some(std::mem::replace(&mut self.b, b));
        self.refactor();
    }

    fn unperturb(&mut self) {
        if let Some(b) = self.b_exact.take() {
            self.b = b;
            self.refactor();
        }
    }

    /// Dual simplex pivots from a dual feasible basis until `x_B ≥ -tol`.
    /// Returns false if a negative row has no eligible entering column.
    fn dual_cleanup(&mut self, iterations: &mut usize) -> bool {
        let opts = self.opts;
        let costs: Vec<f64> = (0..self.cols.len()).map(|j| self.cost(Phase::Two, j)).collect();
        let mut stale = false;
        loop {
            if *iterations >= opts.max_iterations {
                return false;
            }
            if self.pivots_since_refactor >= opts.refactor_interval {
                self.refactor();
            }
            let mut leave: Option<usize> = None;
            for (i, &x) in self.xb.iter().enumerate() {
                if x < -opts.feasibility_tol && leave.is_none_or(|l| x < self.xb[l]) {
                    leave = Some(i);
                }
            }
            let Some(r) = leave else {
                for x in &mut self.xb {
                    *x = x.max(0.0);
                }
                return true;
            };
            let mut y: Vec<f64> = self.basis.iter().map(|&j| costs[j]).collect();
            self.factor.btran(&mut y);
            let mut rho = vec![0.0; self.m];
            rho[r] = 1.0;
            self.factor.btran(&mut rho);
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols.len() {
                if self.position[j] != usize::MAX || self.barred[j] {
                    continue;
                }
                let arj: f64 = self.cols[j].iter().map(|&(i, a)| rho[i] * a).sum();
                if arj >= -opts.pivot_tol {
                    continue;
                }
                let d = (costs[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()).max(0.0);
                let ratio = d / -arj;
                let better = match entering {
                    None => true,
                    Some((_, best, size)) => ratio < best || (ratio == best && -arj > size),
                };
                if better {
                    entering = Some((j, ratio, -arj));
                }
            }
            let Some((q, _, _)) = entering else {
                return false;
            };
            let mut alpha = self.column_dense(q);
            self.factor.ftran(&mut alpha);
            if alpha[r] >= -opts.pivot_tol {
                if stale {
                    return false;
                }
                stale = true;
                self.refactor();
                continue;
            }
            stale = false;
            let theta = self.xb[r] / alpha[r];
            self.pivot_by(q, r, &alpha, theta);
            *iterations += 1;
        }
    }

    fn pivot(&mut self, entering: usize, row: usize, alpha: &[f64]) {
        let theta = self.xb[row].max(0.0) / alpha[row];
        self.pivot_by(entering, row, alpha, theta);
    }

    fn pivot_by(&mut self, entering: usize, row: usize, alpha: &[f64], theta: f64) {
        for (x, &a) in self.xb.iter_mut().zip(alpha) {
            *x -= theta * a;
        }
        self.xb[row] = theta;
        let leaving = self.basis[row];
        self.position[leaving] = usize::MAX;
        self.position[entering] = row;
        self.basis[row] = entering;
        self.factor.push(row, alpha);
        self.pivots_since_refactor += 1;
    }

    fn run(&mut self, phase: Phase, iterations: &mut usize, trace: &mut Vec<f64>) -> Outcome {
        let opts = self.opts;
        let costs: Vec<f64> = (0..self.cols.len()).map(|j| self.cost(phase, j)).collect();
        let mut objective: f64 = self.basis.iter().zip(&self.xb).map(|(&j, &x)| costs[j] * x).sum();
        let mut degenerate_run = 0usize;
        loop {
            if *iterations >= opts.max_iterations {
                return Outcome::IterationLimit;
            }
            if self.pivots_since_refactor >= opts.refactor_interval {
                self.refactor();
                objective = self.basis.iter().zip(&self.xb).map(|(&j, &x)| costs[j] * x).sum();
            }

            let mut y: Vec<f64> = self.basis.iter().map(|&j| costs[j]).collect();
            self.factor.btran(&mut y);

            let bland = opts.pricing == Pricing::Bland || degenerate_run >= DEGENERATE_STREAK;
            let n = self.cols.len();
            let segment = (n / PRICING_SEGMENTS).max(MIN_SEGMENT);
            let mut entering: Option<(usize, f64)> = None;
            let mut j = if bland { 0 } else { self.price_start % n.max(1) };
            let mut scanned = 0;
            while scanned < n {
                if self.position[j] == usize::MAX && !self.barred[j] {
                    let d = costs[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
                    if d < -opts.optimality_tol {
                        if bland {
                            entering = Some((j, d));
                            break;
                        }
                        if entering.is_none_or(|e| d < e.1) {
                            entering = Some((j, d));
                        }
                    }
                }
                scanned += 1;
                j = if j + 1 == n { 0 } else { j + 1 };
                if entering.is_some() && scanned % segment == 0 {
                    break;
                }
            }
            if !bland {
                self.price_start = j;
            }
            let Some((q, dq)) = entering else {
                return Outcome::Optimal;
            };

            let mut alpha = self.column_dense(q);
            self.factor.ftran(&mut alpha);

            let mut best_ratio = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a > opts.pivot_tol {
                    best_ratio = best_ratio.min(self.xb[i].max(0.0) / a);
                }
            }
            if best_ratio == f64::INFINITY {
                return Outcome::Unbounded;
            }
            let slack = 1e-12 * (1.0 + best_ratio);
            let mut leave: Option<usize> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a > opts.pivot_tol && self.xb[i].max(0.0) / a <= best_ratio + slack {
                    let better = match leave {
                        None => true,
                        Some(l) if bland => self.basis[i] < self.basis[l],
                        Some(l) => a > alpha[l],
                    };
                    if better {
                        leave = Some(i);
                    }
                }
            }
            let r = leave.expect("a row attains the minimum ratio");
            let theta = self.xb[r].max(0.0) / alpha[r];
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(q, r, &alpha);
            objective += dq * theta;
            *iterations += 1;
            if phase == Phase::Two && opts.trace {
                trace.push(objective);
            }
        }
    }

    fn finish(&mut self, lp: &LinearProgram, status: LpStatus, iterations: usize, trace: Vec<f64>) -> LpSolution {
        self.refactor();
        let mut x = vec![0.0; lp.ncols()];
        for (pos, &j) in self.basis.iter().enumerate() {
            if j < self.n_struct {
                let (orig, sign) = self.origin[j];
                x[orig] += sign * self.xb[pos];
            }
        }
        LpSolution {
            status,
            objective: lp.objective(&x),
            residual: lp.residual(&x),
            x,
            iterations,
            trace,
        }
    }
}
