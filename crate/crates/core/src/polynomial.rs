//! Sparse multivariate polynomials with `f64` coefficients and the
//! norm-gradient polynomial of a network.
//!
//! Monomials are ordered graded-lexicographically: by total degree first, then
//! by the exponent of variable 0, variable 1, and so on (a larger exponent on an
//! earlier variable sorts later). Iteration, dumps and LP row order all follow
//! this order, which keeps every downstream artifact deterministic.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fmt::format_g17;
use crate::network::{Network, NeuronBounds};

/// A monomial `x^γ` stored as sorted `(variable, exponent)` pairs with
/// positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(u32, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: usize) -> Self {
        Monomial(vec![(v as u32, 1)])
    }

    /// Builds a monomial from arbitrary `(variable, exponent)` pairs, merging
    /// repeats and dropping zero exponents.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for (v, e) in pairs {
            if e > 0 {
                *map.entry(v as u32).or_default() += e;
            }
        }
        Monomial(map.into_iter().collect())
    }

    /// Multilinear monomial over the given variables.
    pub fn from_vars(vars: impl IntoIterator<Item = usize>) -> Self {
        Self::from_pairs(vars.into_iter().map(|v| (v, 1)))
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|p| p.1).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, v: usize) -> u32 {
        self.0
            .binary_search_by_key(&(v as u32), |p| p.0)
            .map_or(0, |i| self.0[i].1)
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|p| p.0 as usize)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.0.last().map(|p| p.0 as usize)
    }

    pub fn is_multilinear(&self) -> bool {
        self.0.iter().all(|p| p.1 <= 1)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(v, e)| x[v as usize].powi(e as i32)).product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let (a, b) = (&self.0, &other.0);
            for (x, y) in a.iter().zip(b) {
                if x.0 != y.0 {
                    // The monomial carrying the earlier variable has the larger
                    // exponent there.
                    return if x.0 < y.0 { Ordering::Greater } else { Ordering::Less };
                }
                if x.1 != y.1 {
                    return x.1.cmp(&y.1);
                }
            }
            a.len().cmp(&b.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial in `nvars` variables. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(nvars: usize, v: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(v), 1.0);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            if m.max_var().is_some_and(|v| v >= nvars) {
                return Err(Error::DimensionMismatch(format!(
                    "monomial uses variable {} in a {nvars}-variable polynomial",
                    m.max_var().unwrap_or(0)
                )));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&Monomial::one())
    }

    /// Adds `c · m` in place, dropping the entry if it cancels to zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    fn check_nvars(&self, other: &Polynomial) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch(format!(
                "polynomials over {} and {} variables",
                self.nvars, other.nvars
            )));
        }
        Ok(())
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &Polynomial, c: f64) -> Result<()> {
        self.check_nvars(other)?;
        if c != 0.0 {
            for (m, &v) in &other.terms {
                self.add_term(m.clone(), c * v);
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        let mut out = self.clone();
        out.add_scaled(other, 1.0)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        let mut out = self.clone();
        out.add_scaled(other, -1.0)?;
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Self::zero(self.nvars);
        for (m, &v) in &self.terms {
            out.add_term(m.clone(), c * v);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_nvars(other)?;
        let mut out = Self::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// Multiplies every monomial by `m`.
    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, &c)| (k.mul(m), c)).collect(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_multilinear(&self) -> bool {
        self.terms.keys().all(Monomial::is_multilinear)
    }

    /// Sorted list of variables that appear with nonzero coefficient.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self.terms.keys().flat_map(|m| m.variables()).collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, polynomial has {} variables",
                x.len(),
                self.nvars
            )));
        }
        Ok(self.terms.iter().map(|(m, &c)| c * m.eval(x)).sum())
    }

    /// Substitutes `x_v ↦ offset_v + scale_v · x_v` for every variable and
    /// re-expands. A zero scale eliminates the variable.
    pub fn affine_substitute(&self, map: &[(f64, f64)]) -> Result<Polynomial> {
        if map.len() != self.nvars {
            return Err(Error::DimensionMismatch("substitution length differs from nvars".into()));
        }
        let mut out = Self::zero(self.nvars);
        for (m, &c) in &self.terms {
            let mut acc = Polynomial::constant(self.nvars, c);
            for &(v, e) in m.pairs() {
                let (a, b) = map[v as usize];
                if a == 0.0 && b == 1.0 {
                    acc = acc.mul_monomial(&Monomial::from_pairs([(v as usize, e)]));
                    continue;
                }
                let mut factor = Polynomial::zero(self.nvars);
                factor.add_term(Monomial::one(), a);
                factor.add_term(Monomial::var(v as usize), b);
                for _ in 0..e {
                    acc = acc.mul(&factor)?;
                }
            }
            out.add_scaled(&acc, 1.0)?;
        }
        Ok(out)
    }

    /// Drops coefficients with magnitude at most `tol`.
    pub fn prune_small(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    /// Text dump, one `coeff: v^e v^e …` line per term in graded-lex order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (m, &c) in &self.terms {
            out.push_str(&format_g17(c));
            out.push(':');
            for &(v, e) in m.pairs() {
                let _ = write!(out, " {v}^{e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Global variable layout `x = [s_0, s_1, …, s_{d-1}]`: the input-side
/// variables followed by each hidden layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableIndexing {
    widths: Vec<usize>,
    offsets: Vec<usize>,
}

impl VariableIndexing {
    pub fn new(widths: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(widths.len() + 1);
        let mut acc = 0;
        for &w in &widths {
            offsets.push(acc);
            acc += w;
        }
        offsets.push(acc);
        Self { widths, offsets }
    }

    pub fn for_network(net: &Network) -> Self {
        Self::new(net.variable_widths())
    }

    /// Total number of variables `n`.
    pub fn len(&self) -> usize {
        *self.offsets.last().expect("offsets nonempty")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layers(&self) -> usize {
        self.widths.len()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    pub fn offset(&self, layer: usize) -> usize {
        self.offsets[layer]
    }

    pub fn index(&self, layer: usize, neuron: usize) -> usize {
        debug_assert!(neuron < self.widths[layer]);
        self.offsets[layer] + neuron
    }

    /// Inverse of [`VariableIndexing::index`].
    pub fn locate(&self, var: usize) -> (usize, usize) {
        let layer = self.offsets.partition_point(|&o| o <= var) - 1;
        (layer, var - self.offsets[layer])
    }
}

/// The norm-gradient polynomial `(2s_0 - 1)ᵀ W_1ᵀ Π Diag(s_i) W_{i+1}ᵀ` over
/// `[0, 1]^n`, built layer by layer as sparse matrix–polynomial products.
pub fn norm_gradient_polynomial(net: &Network) -> Polynomial {
    let idx = VariableIndexing::for_network(net);
    let n = idx.len();
    let mut current: Vec<Polynomial> = (0..net.input_dim())
        .map(|j| {
            let mut p = Polynomial::zero(n);
            p.add_term(Monomial::var(idx.index(0, j)), 2.0);
            p.add_term(Monomial::one(), -1.0);
            p
        })
        .collect();
    let d = net.depth();
    for (i, w) in net.layers().iter().enumerate() {
        let mut next = vec![Polynomial::zero(n); w.rows()];
        for &(r, c, v) in w.entries() {
            next[r].add_scaled(&current[c], v).expect("same nvars");
        }
        if i + 1 < d {
            for (r, p) in next.iter_mut().enumerate() {
                *p = p.mul_monomial(&Monomial::var(idx.index(i + 1, r)));
            }
        }
        current = next;
    }
    current.pop().expect("scalar output")
}

/// Norm-gradient polynomial after the change of variables
/// `s = l + (u - l) s̃` on every hidden variable. Input variables keep `[0, 1]`.
pub fn local_norm_gradient_polynomial(net: &Network, bounds: &NeuronBounds) -> Result<Polynomial> {
    let idx = VariableIndexing::for_network(net);
    let hidden = net.hidden_widths();
    if bounds.lower().len() != hidden.len()
        || bounds.lower().iter().zip(&hidden).any(|(l, &w)| l.len() != w)
    {
        return Err(Error::DimensionMismatch("bounds do not cover the hidden layers".into()));
    }
    let mut map = vec![(0.0, 1.0); idx.len()];
    for (layer, (lo, hi)) in bounds.lower().iter().zip(bounds.upper()).enumerate() {
        for (j, (&l, &u)) in lo.iter().zip(hi).enumerate() {
            if u < l {
                return Err(Error::InvalidArgument(format!("upper bound below lower bound at ({}, {j})", layer + 1)));
            }
            map[idx.index(layer + 1, j)] = (l, u - l);
        }
    }
    norm_gradient_polynomial(net).affine_substitute(&map)
}
