//! Sparse Krivine certificates and the LP hierarchy built from them.
//!
//! For a clique pattern `{I_i}` and degree `k`, the certificate terms are all
//! products `h_{αβ}(x) = Π x_j^{α_j} (1 - x_j)^{β_j}` with `|α| + |β| ≤ k` and
//! both supports inside one clique. The `k`-th bound is
//!
//! ```text
//! θ_k = min { λ : λ - p = Σ c_{αβ} h_{αβ},  c ≥ 0 }
//! ```
//!
//! with the polynomial identity imposed coefficient by coefficient.

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, SolverOptions};
use crate::network::{Network, NeuronBounds};
use crate::polynomial::{local_norm_gradient_polynomial, norm_gradient_polynomial, Monomial, Polynomial};
use crate::sparsity::{binomial, clique_stats, SparsityPattern};

/// Default cap on materialized certificate terms.
pub const DEFAULT_MAX_TERMS: usize = 5_000_000;

/// Coefficients of `p` below this magnitude count as zero for degree-2 pruning.
const PRUNE_ZERO_TOL: f64 = 1e-12;

/// Exponent pair `(α, β)` of one product `h_{αβ}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CertificateTerm {
    pub alpha: Monomial,
    pub beta: Monomial,
}

impl CertificateTerm {
    pub fn new(alpha: Monomial, beta: Monomial) -> Self {
        Self { alpha, beta }
    }

    /// The constant term `h = 1`.
    pub fn one() -> Self {
        Self { alpha: Monomial::one(), beta: Monomial::one() }
    }

    pub fn degree(&self) -> u32 {
        self.alpha.degree() + self.beta.degree()
    }

    /// Variables touched by `α` or `β`, sorted and deduplicated.
    pub fn support(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.alpha.variables().chain(self.beta.variables()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Expands `Π x_j^{α_j} (1 - x_j)^{β_j}` in the monomial basis.
    pub fn expand(&self, nvars: usize) -> Polynomial {
        let mut acc = Polynomial::zero(nvars);
        acc.add_term(self.alpha.clone(), 1.0);
        for &(v, e) in self.beta.pairs() {
            // (1 - x)^e = Σ_i C(e, i) (-1)^i x^i
            let mut factor = Polynomial::zero(nvars);
            for i in 0..=e {
                let c = binomial(e as u128, i as u128).expect("small binomial") as f64;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                factor.add_term(Monomial::from_pairs([(v as usize, i)]), sign * c);
            }
            acc = acc.mul(&factor).expect("same nvars");
        }
        acc
    }

    /// Readable form such as `x1*x2*(1-x3)^2`; `1` for the empty term.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        for &(v, e) in self.alpha.pairs() {
            parts.push(if e == 1 { format!("x{v}") } else { format!("x{v}^{e}") });
        }
        for &(v, e) in self.beta.pairs() {
            parts.push(if e == 1 { format!("(1-x{v})") } else { format!("(1-x{v})^{e}") });
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

/// All terms of degree at most `k` supported in `clique`, by degree and then
/// lexicographically on the factor sequence (`x_v` before `1 - x_v`, variables
/// ascending).
fn clique_terms(clique: &[usize], k: u32) -> Vec<CertificateTerm> {
    let letters = 2 * clique.len();
    let mut out = Vec::new();
    let mut seq: Vec<usize> = Vec::with_capacity(k as usize);
    for size in 0..=k as usize {
        seq.clear();
        seq.resize(size, 0);
        if size > 0 && letters == 0 {
            break;
        }
        loop {
            out.push(letters_to_term(clique, &seq));
            // Next nondecreasing sequence over `letters` symbols.
            let Some(pos) = (0..size).rev().find(|&i| seq[i] + 1 < letters) else {
                break;
            };
            let next = seq[pos] + 1;
            for s in &mut seq[pos..] {
                *s = next;
            }
        }
    }
    out
}

fn letters_to_term(clique: &[usize], seq: &[usize]) -> CertificateTerm {
    let alpha = Monomial::from_pairs(seq.iter().filter(|&&l| l % 2 == 0).map(|&l| (clique[l / 2], 1)));
    let beta = Monomial::from_pairs(seq.iter().filter(|&&l| l % 2 == 1).map(|&l| (clique[l / 2], 1)));
    CertificateTerm { alpha, beta }
}

/// The deduplicated union over cliques of the degree-`k` term sets, in clique
/// order. Fails rather than truncating when more than `max_terms` distinct
/// terms would be materialized.
pub fn enumerate_terms(pat: &SparsityPattern, k: u32, max_terms: usize) -> Result<Vec<CertificateTerm>> {
    let stats = clique_stats(pat, k);
    let per_clique: Vec<u128> = pat
        .cliques()
        .iter()
        .map(|c| binomial(2 * c.len() as u128 + k as u128, k as u128).unwrap_or(u128::MAX))
        .collect();
    if let Some((i, &b)) = per_clique.iter().enumerate().find(|(_, &b)| b > max_terms as u128) {
        return Err(Error::TermCap {
            needed: b,
            cap: max_terms,
            detail: format!("clique {i} of size {} alone at k = {k}", pat.cliques()[i].len()),
        });
    }
    let mut seen: HashSet<CertificateTerm> = HashSet::new();
    let mut out = Vec::new();
    for clique in pat.cliques() {
        for t in clique_terms(clique, k) {
            if seen.insert(t.clone()) {
                out.push(t);
                if out.len() > max_terms {
                    return Err(Error::TermCap {
                        needed: stats.term_bound,
                        cap: max_terms,
                        detail: format!(
                            "{} cliques, largest {}, upper bound {} terms",
                            stats.cliques, stats.max_clique, stats.term_bound
                        ),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// `|N_k^{2n}| = C(2n + k, k)`: the dense certificate size, without
/// materializing anything.
pub fn dense_term_count(n: u64, k: u32) -> Option<u128> {
    binomial(2 * n as u128 + k as u128, k as u128)
}

/// Distinct term count for a pattern whose `m` cliques each add one private
/// variable to a shared block of `shared` variables, as the induced pattern of
/// a fully connected network does: terms inside the shared block plus, per
/// clique, the terms touching its private variable.
pub fn shared_block_term_count(shared: u64, m: u64, k: u32) -> Option<u128> {
    let inner = binomial(2 * shared as u128 + k as u128, k as u128)?;
    let with_one = binomial(2 * (shared as u128 + 1) + k as u128, k as u128)?;
    (with_one - inner).checked_mul(m as u128)?.checked_add(inner)
}

/// Degree-2 pruning: for every pair of distinct variables `i < j` whose
/// `x_i x_j` coefficient in `p` is zero, drops the four terms supported exactly
/// on `{i, j}`. Only applies when `k = 2` and `deg p ≤ 2`; otherwise the terms
/// come back unchanged and the flag is `false`.
pub fn prune_degree2_terms(p: &Polynomial, terms: Vec<CertificateTerm>, k: u32) -> (Vec<CertificateTerm>, bool) {
    if k != 2 || p.degree() > 2 {
        return (terms, false);
    }
    let kept = terms
        .into_iter()
        .filter(|t| {
            let support = t.support();
            if t.degree() != 2 || support.len() != 2 {
                return true;
            }
            p.coefficient(&Monomial::from_vars(support)).abs() >= PRUNE_ZERO_TOL
        })
        .collect();
    (kept, true)
}

/// LP whose optimum is `θ_k`. Column 0 is the free `λ`; column `t + 1` is the
/// weight of `terms[t]`. Row `r` matches the coefficient of `rows[r]`.
#[derive(Clone, Debug)]
pub struct AssembledLP {
    pub lp: LinearProgram,
    pub rows: Vec<Monomial>,
    pub terms: Vec<CertificateTerm>,
    /// Feasible triangular starting basis, when the term set contains one.
    pub start_basis: Option<Vec<usize>>,
}

/// Builds `λ·[γ = 0] - Σ c_{αβ} [x^γ] h_{αβ} = [x^γ] p` for every monomial `γ`
/// present in `p` or in some `h_{αβ}`, rows in graded-lex order.
pub fn assemble_lp(p: &Polynomial, terms: Vec<CertificateTerm>) -> Result<AssembledLP> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("no certificate terms".into()));
    }
    let n = p.nvars();
    let expanded: Vec<Polynomial> = terms.par_iter().map(|t| t.expand(n)).collect();

    let mut row_of: BTreeMap<Monomial, usize> = BTreeMap::new();
    row_of.insert(Monomial::one(), 0);
    for (m, _) in p.terms() {
        row_of.insert(m.clone(), 0);
    }
    for h in &expanded {
        for (m, _) in h.terms() {
            row_of.entry(m.clone()).or_insert(0);
        }
    }
    for (i, v) in row_of.values_mut().enumerate() {
        *v = i;
    }
    let rows: Vec<Monomial> = row_of.keys().cloned().collect();
    let rhs: Vec<f64> = rows.iter().map(|m| p.coefficient(m)).collect();

    let mut lp = LinearProgram::new(rhs);
    lp.add_column("LAMBDA", 1.0, true, [(row_of[&Monomial::one()], 1.0)]);
    for (t, h) in expanded.iter().enumerate() {
        lp.add_column(format!("C{:07}", t + 1), 0.0, false, h.terms().map(|(m, c)| (row_of[m], -c)));
    }
    let start_basis = start_basis(&rows, &row_of, &terms, lp.rhs());
    Ok(AssembledLP { lp, rows, terms, start_basis })
}

/// Column index per row of a feasible basis built top-down by degree. Row
/// `x^γ` takes either the singleton `x^γ` (when the residual demand is
/// negative) or `x^{γ-e_v}(1 - x_v)` with `v` the last variable of `γ`, which
/// pushes its value down to row `x^{γ-e_v}`. The constant row takes `λ`.
fn start_basis(
    rows: &[Monomial],
    row_of: &BTreeMap<Monomial, usize>,
    terms: &[CertificateTerm],
    rhs: &[f64],
) -> Option<Vec<usize>> {
    let column_of: std::collections::HashMap<&CertificateTerm, usize> =
        terms.iter().enumerate().map(|(t, term)| (term, t + 1)).collect();
    let mut need = rhs.to_vec();
    let mut basis = vec![0; rows.len()];
    for (r, gamma) in rows.iter().enumerate().rev() {
        if gamma.is_one() {
            basis[r] = 0;
            continue;
        }
        if need[r] < 0.0 {
            let single = CertificateTerm::new(gamma.clone(), Monomial::one());
            basis[r] = *column_of.get(&single)?;
        } else {
            let v = gamma.max_var().expect("non-constant monomial");
            let lower: Vec<(usize, u32)> = gamma
                .pairs()
                .iter()
                .map(|&(u, e)| (u as usize, if u as usize == v { e - 1 } else { e }))
                .collect();
            let lower = Monomial::from_pairs(lower);
            let chain = CertificateTerm::new(lower.clone(), Monomial::var(v));
            basis[r] = *column_of.get(&chain)?;
            need[*row_of.get(&lower)?] += need[r];
        }
    }
    Some(basis)
}

/// `max_γ |[x^γ](λ - Σ c h) - [x^γ] p|`, recomputed by polynomial arithmetic
/// independently of the LP matrix.
pub fn certificate_residual(p: &Polynomial, terms: &[CertificateTerm], x: &[f64]) -> f64 {
    let n = p.nvars();
    let mut lhs = Polynomial::constant(n, x[0]);
    for (t, &c) in terms.iter().zip(&x[1..]) {
        if c != 0.0 {
            lhs.add_scaled(&t.expand(n), -c).expect("same nvars");
        }
    }
    let diff = lhs.sub(p).expect("same nvars");
    diff.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One clique holding every variable.
    Dense,
    /// The pattern induced by the computational graph.
    Sparse,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dense => "dense",
            Mode::Sparse => "sparse",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundOptions {
    pub max_terms: usize,
    pub prune_degree2: bool,
    pub solver: SolverOptions,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { max_terms: DEFAULT_MAX_TERMS, prune_degree2: true, solver: SolverOptions::default() }
    }
}

fn serialize_theta<S: Serializer>(theta: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if theta.is_finite() {
        s.serialize_f64(*theta)
    } else {
        s.serialize_str(if *theta > 0.0 { "inf" } else { "-inf" })
    }
}

/// Result of one LiPopt run. Serializes to the stable report schema.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    #[serde(serialize_with = "serialize_theta")]
    pub theta: f64,
    pub k: u32,
    pub mode: Mode,
    pub terms: usize,
    pub rows: usize,
    pub rip: bool,
    pub status: LpStatus,
    pub seconds: f64,
    #[serde(skip)]
    pub polynomial: Polynomial,
    #[serde(skip)]
    pub lp: Option<AssembledLP>,
    #[serde(skip)]
    pub solution: Option<LpSolution>,
}

impl BoundReport {
    /// Certificate residual of the solved LP, if it was solved to optimality.
    pub fn residual(&self) -> Option<f64> {
        match (&self.lp, &self.solution) {
            (Some(a), Some(s)) if s.status == LpStatus::Optimal => {
                Some(certificate_residual(&self.polynomial, &a.terms, &s.x))
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Pattern used for a given mode.
pub fn pattern_for(net: &Network, mode: Mode) -> SparsityPattern {
    match mode {
        Mode::Dense => SparsityPattern::dense(net.variable_widths().iter().sum()),
        Mode::Sparse => SparsityPattern::for_network(net),
    }
}

/// Builds the LP for `θ_k` without solving it.
pub fn build_lp(
    p: &Polynomial,
    pat: &SparsityPattern,
    k: u32,
    opts: &BoundOptions,
) -> Result<AssembledLP> {
    if k == 0 {
        return Err(Error::InvalidArgument("hierarchy degree must be at least 1".into()));
    }
    let terms = enumerate_terms(pat, k, opts.max_terms)?;
    let terms = if opts.prune_degree2 { prune_degree2_terms(p, terms, k).0 } else { terms };
    assemble_lp(p, terms)
}

/// End to end: norm-gradient polynomial (locally substituted when `bounds` is
/// given), clique pattern, terms, LP, solve.
pub fn lipopt_bound(
    net: &Network,
    k: u32,
    mode: Mode,
    bounds: Option<&NeuronBounds>,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let start = Instant::now();
    let p = match bounds {
        Some(b) => local_norm_gradient_polynomial(net, b)?,
        None => norm_gradient_polynomial(net),
    };
    let pat = pattern_for(net, mode);
    let assembled = build_lp(&p, &pat, k, opts)?;
    let solution = lp::solve_from(&assembled.lp, &opts.solver, assembled.start_basis.as_deref());
    let theta = match solution.status {
        LpStatus::Optimal => solution.objective,
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::IterationLimit => {
            return Err(Error::IterationLimit { iterations: solution.iterations });
        }
        LpStatus::Unbounded => {
            return Err(Error::Solver(format!(
                "LP ended with status {} after {} iterations",
                solution.status.as_str(),
                solution.iterations
            )));
        }
    };
    Ok(BoundReport {
        theta,
        k,
        mode,
        terms: assembled.terms.len(),
        rows: assembled.lp.nrows(),
        rip: pat.running_intersection(),
        status: solution.status,
        seconds: start.elapsed().as_secs_f64(),
        polynomial: p,
        lp: Some(assembled),
        solution: Some(solution),
    })
}
