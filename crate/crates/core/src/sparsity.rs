//! Computational graph of a network and the clique pattern it induces on the
//! norm-gradient polynomial.
//!
//! One clique per last-hidden-layer neuron: the neuron itself plus every
//! variable with a directed path to it. Cliques are ordered by neuron index.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::network::Network;
use crate::polynomial::{Polynomial, VariableIndexing};

/// Layered DAG over the variable layers `0..d-1` whose edges are the nonzero
/// weights of `W_1, …, W_{d-1}`. Vertices are global variable indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompGraph {
    indexing: VariableIndexing,
    /// Incoming edges per vertex (sources), sorted.
    parents: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl CompGraph {
    pub fn new(net: &Network) -> Self {
        let indexing = VariableIndexing::for_network(net);
        let mut parents = vec![Vec::new(); indexing.len()];
        let mut edges = Vec::new();
        for (i, w) in net.layers()[..net.depth() - 1].iter().enumerate() {
            for &(r, c, _) in w.entries() {
                let src = indexing.index(i, c);
                let dst = indexing.index(i + 1, r);
                parents[dst].push(src);
                edges.push((src, dst));
            }
        }
        for p in &mut parents {
            p.sort_unstable();
        }
        edges.sort_unstable();
        Self { indexing, parents, edges }
    }

    pub fn indexing(&self) -> &VariableIndexing {
        &self.indexing
    }

    /// Directed edges `(source, target)` in global variable indices, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    /// `v` together with all its ancestors, sorted.
    pub fn ancestors_inclusive(&self, v: usize) -> Vec<usize> {
        let mut seen = vec![false; self.parents.len()];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for &p in &self.parents[u] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect()
    }
}

/// Ordered list of variable cliques.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SparsityPattern {
    cliques: Vec<Vec<usize>>,
}

impl SparsityPattern {
    /// Builds a pattern from cliques, sorting and deduplicating each one.
    /// Empty cliques are dropped.
    pub fn new(cliques: Vec<Vec<usize>>) -> Self {
        let cliques = cliques
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .filter(|c| !c.is_empty())
            .collect();
        Self { cliques }
    }

    /// One clique holding all `n` variables.
    pub fn dense(n: usize) -> Self {
        Self::new(vec![(0..n).collect()])
    }

    /// Pattern induced by the computational graph: one clique per
    /// last-hidden-layer neuron, in neuron order.
    pub fn induced(graph: &CompGraph) -> Self {
        let idx = graph.indexing();
        let last = idx.layers() - 1;
        let cliques = (0..idx.width(last))
            .into_par_iter()
            .map(|j| graph.ancestors_inclusive(idx.index(last, j)))
            .collect();
        Self::new(cliques)
    }

    pub fn for_network(net: &Network) -> Self {
        Self::induced(&CompGraph::new(net))
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn max_clique(&self) -> usize {
        self.cliques.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Running-intersection property in the stored order: every clique's
    /// overlap with the union of its predecessors lies inside one predecessor.
    pub fn running_intersection(&self) -> bool {
        let mut union: BTreeSet<usize> = BTreeSet::new();
        for (i, clique) in self.cliques.iter().enumerate() {
            if i > 0 {
                let overlap: Vec<usize> = clique.iter().copied().filter(|v| union.contains(v)).collect();
                let inside_one = self.cliques[..i]
                    .iter()
                    .any(|prev| overlap.iter().all(|v| prev.binary_search(v).is_ok()));
                if !inside_one {
                    return false;
                }
            }
            union.extend(clique.iter().copied());
        }
        true
    }

    /// Index of the first clique containing every variable in `vars`.
    pub fn covering_clique(&self, vars: impl IntoIterator<Item = usize> + Clone) -> Option<usize> {
        self.cliques
            .iter()
            .position(|c| vars.clone().into_iter().all(|v| c.binary_search(&v).is_ok()))
    }

    /// JSON dump `{"cliques": [...], "rip": bool}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            cliques: &'a [Vec<usize>],
            rip: bool,
        }
        serde_json::to_string(&Dump { cliques: &self.cliques, rip: self.running_intersection() })
            .expect("serializable")
    }
}

/// Outcome of checking a pattern against a polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// Every variable of `p` lies in some clique.
    pub covers: bool,
    /// Every monomial of `p` fits inside a single clique.
    pub decomposes: bool,
    /// Running-intersection property in clique order.
    pub running_intersection: bool,
    /// For each monomial (graded-lex order), the first clique covering it.
    pub assignment: Vec<Option<usize>>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.covers && self.decomposes && self.running_intersection
    }
}

/// Checks the pattern conditions. A failed running-intersection check is
/// reported, never raised: the certificate stays a valid upper bound.
pub fn validate_pattern(pat: &SparsityPattern, p: &Polynomial) -> ValidationReport {
    let covered: BTreeSet<usize> = pat.cliques().iter().flatten().copied().collect();
    let covers = p.variables().iter().all(|v| covered.contains(v));
    let assignment: Vec<Option<usize>> =
        p.terms().map(|(m, _)| pat.covering_clique(m.variables().collect::<Vec<_>>())).collect();
    let decomposes = assignment.iter().all(Option::is_some);
    ValidationReport { covers, decomposes, running_intersection: pat.running_intersection(), assignment }
}

/// Sizes of a pattern and the upper bound `Σ_i C(2|I_i| + k, k)` on the number
/// of distinct certificate terms of degree at most `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CliqueStats {
    pub cliques: usize,
    pub max_clique: usize,
    pub k: u32,
    pub term_bound: u128,
    /// The bound overflowed `u128` and was clamped to `u128::MAX`.
    pub saturated: bool,
}

pub fn clique_stats(pat: &SparsityPattern, k: u32) -> CliqueStats {
    let mut total: u128 = 0;
    let mut saturated = false;
    for c in pat.cliques() {
        match binomial(2 * c.len() as u128 + k as u128, k as u128).and_then(|b| total.checked_add(b)) {
            Some(t) => total = t,
            None => {
                saturated = true;
                total = u128::MAX;
                break;
            }
        }
    }
    CliqueStats { cliques: pat.len(), max_clique: pat.max_clique(), k, term_bound: total, saturated }
}

/// `C(n, k)` with overflow detection.
pub fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}
