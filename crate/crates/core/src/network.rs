//! Feed-forward networks `f_i(x) = W_i σ(f_{i-1}(x))` with a scalar output.
//!
//! Weights are stored as sparse triplets so that pruned or convolution-lowered
//! layers keep their structure; everything downstream (the computational graph,
//! the norm-gradient polynomial) reads connectivity straight from the nonzeros.

use std::collections::VecDeque;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fmt::format_g17;

/// Default number of LBS samples.
pub const LBS_DEFAULT_SAMPLES: usize = 50_000;
/// Default half-width of the LBS sampling box around the origin.
pub const LBS_DEFAULT_RADIUS: f64 = 1.0;

/// Smooth activation with derivative in `[0, 1]`, monotonically nondecreasing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    /// Exponential linear unit with `α = 1`.
    Elu,
    Softplus,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Softplus => "softplus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "elu" => Ok(Activation::Elu),
            "softplus" => Ok(Activation::Softplus),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x >= 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => x.exp().min(1.0),
            Activation::Softplus => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}

/// Sparse `rows × cols` matrix. Entries are kept sorted by `(row, col)`,
/// unique, and nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl WeightMatrix {
    /// Builds a matrix from triplets. Zero values are dropped; duplicates and
    /// out-of-range indices are rejected. `layer` only labels error messages.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        layer: usize,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidNetwork(format!(
                "layer {layer} has an empty shape {rows}x{cols}"
            )));
        }
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidNetwork(format!(
                    "layer {layer}: entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {layer}: non-finite weight at ({r}, {c})"
                )));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::DuplicateEntry { layer, row: w[0].0, col: w[0].1 });
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(Self { rows, cols, entries })
    }

    /// Builds a matrix from dense rows, dropping zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged dense matrix".into()));
        }
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(nrows, ncols, entries, 0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzero entries sorted by `(row, col)`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(row, col)))
            .map_or(0.0, |i| self.entries[i].2)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut x = vec![0.0; self.cols];
        for &(r, c, v) in &self.entries {
            x[c] += v * y[r];
        }
        x
    }

    /// ℓ∞ → ℓ∞ operator norm: the largest row ℓ1 norm.
    pub fn norm_linf(&self) -> f64 {
        let mut sums = vec![0.0; self.rows];
        for &(r, _, v) in &self.entries {
            sums[r] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// Bounds `0 ≤ l ≤ s ≤ u ≤ 1` on the activation-derivative variables, one
/// vector per hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronBounds {
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

impl NeuronBounds {
    pub fn new(lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch("bound layer counts differ".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.len() != u.len() {
                return Err(Error::DimensionMismatch(format!("bound widths differ in layer {i}")));
            }
            for (j, (&lo, &hi)) in l.iter().zip(u).enumerate() {
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                    return Err(Error::InvalidArgument(format!(
                        "bounds for hidden layer {} neuron {j} are [{lo}, {hi}]",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { lower, upper })
    }

    /// The trivial bounds `[0, 1]` for every hidden neuron of `net`.
    pub fn unit(net: &Network) -> Self {
        let widths = net.hidden_widths();
        Self {
            lower: widths.iter().map(|&w| vec![0.0; w]).collect(),
            upper: widths.iter().map(|&w| vec![1.0; w]).collect(),
        }
    }

    pub fn lower(&self) -> &[Vec<f64>] {
        &self.lower
    }

    pub fn upper(&self) -> &[Vec<f64>] {
        &self.upper
    }
}

/// A feed-forward network with scalar output and no biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<WeightMatrix>,
    activation: Activation,
}

#[derive(Deserialize)]
struct RawNetwork {
    activation: String,
    layers: Vec<RawLayer>,
}

#[derive(Deserialize)]
struct RawLayer {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Network {
    pub fn new(layers: Vec<WeightMatrix>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "depth must be at least 2, got {}",
                layers.len()
            )));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[1].cols != w[0].rows {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} has {} rows but layer {} has {} columns",
                    i,
                    w[0].rows,
                    i + 1,
                    w[1].cols
                )));
            }
        }
        let last = layers.last().expect("nonempty");
        if last.rows != 1 {
            return Err(Error::InvalidNetwork(format!(
                "final layer must have exactly one row, got {}",
                last.rows
            )));
        }
        Ok(Self { layers, activation })
    }

    /// Parses network JSON. Multi-output networks are rejected.
    pub fn from_json(source: &[u8]) -> Result<Self> {
        Self::from_json_with_output(source, None)
    }

    /// Parses network JSON, optionally restricting a multi-output network to
    /// the final-layer row `output`.
    pub fn from_json_with_output(source: &[u8], output: Option<usize>) -> Result<Self> {
        let raw: RawNetwork =
            serde_json::from_slice(source).map_err(|e| Error::Parse(e.to_string()))?;
        let activation = Activation::parse(&raw.activation)?;
        let nlayers = raw.layers.len();
        let mut layers = Vec::with_capacity(nlayers);
        for (i, layer) in raw.layers.into_iter().enumerate() {
            let mut w = WeightMatrix::from_triplets(layer.rows, layer.cols, layer.entries, i)?;
            if i + 1 == nlayers {
                if let Some(o) = output {
                    if o >= w.rows {
                        return Err(Error::InvalidArgument(format!(
                            "output index {o} out of range for {} outputs",
                            w.rows
                        )));
                    }
                    let entries =
                        w.entries.iter().filter(|e| e.0 == o).map(|&(_, c, v)| (0, c, v)).collect();
                    w = WeightMatrix { rows: 1, cols: w.cols, entries };
                }
            }
            layers.push(w);
        }
        Self::new(layers, activation)
    }

    /// Canonical JSON: entries sorted, values with 17 significant digits.
    pub fn to_canonical_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\"activation\":\"");
        out.push_str(self.activation.name());
        out.push_str("\",\"layers\":[");
        for (i, w) in self.layers.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{{\"rows\":{},\"cols\":{},\"entries\":[", w.rows, w.cols));
            for (j, &(r, c, v)) in w.entries.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("[{r},{c},{}]", format_g17(v)));
            }
            out.push_str("]}");
        }
        out.push_str("]}\n");
        out
    }

    pub fn layers(&self) -> &[WeightMatrix] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Number of weight matrices `d`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    /// Widths of the hidden layers `1..d-1`.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|w| w.rows).collect()
    }

    /// Widths of every variable layer: the input followed by each hidden layer.
    pub fn variable_widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.hidden_widths()).collect()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(WeightMatrix::nnz).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Returns `f_d(x)` and the preactivations `f_1(x), …, f_{d-1}(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.depth() - 1);
        let mut h = self.layers[0].matvec(x);
        for w in &self.layers[1..] {
            let act: Vec<f64> = h.iter().map(|&v| self.activation.eval(v)).collect();
            pre.push(h);
            h = w.matvec(&act);
        }
        Ok((h[0], pre))
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.forward(x).map(|(y, _)| y)
    }

    /// `∇f_d(x) = W_1ᵀ Π Diag(σ'(f_i(x))) W_{i+1}ᵀ`, by reverse accumulation.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, pre) = self.forward(x)?;
        let d = self.depth();
        let mut g = self.layers[d - 1].matvec_transpose(&[1.0]);
        for i in (0..d - 1).rev() {
            for (gj, &z) in g.iter_mut().zip(&pre[i]) {
                *gj *= self.activation.derivative(z);
            }
            g = self.layers[i].matvec_transpose(&g);
        }
        Ok(g)
    }

    /// Product of layer-wise ℓ∞ operator norms.
    pub fn ubp(&self) -> f64 {
        self.layers.iter().map(WeightMatrix::norm_linf).product()
    }

    /// Sampled lower bound: the largest `‖∇f(x)‖₁` over `samples` points drawn
    /// uniformly from `[-radius, radius]^{n_1}`.
    pub fn lbs(&self, samples: usize, radius: f64, seed: u64) -> f64 {
        let center = vec![0.0; self.input_dim()];
        self.lbs_around(&center, samples, radius, seed).expect("center has input dimension")
    }

    /// Sampled lower bound on the Lipschitz constant restricted to the ℓ∞ ball
    /// of `radius` around `center`. Sample `i` uses stream `i` of a ChaCha8
    /// generator keyed by `seed`, so results do not depend on thread count.
    pub fn lbs_around(&self, center: &[f64], samples: usize, radius: f64, seed: u64) -> Result<f64> {
        self.check_input(center)?;
        if samples == 0 {
            return Err(Error::InvalidArgument("LBS needs at least one sample".into()));
        }
        let best = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let x: Vec<f64> = center
                    .iter()
                    .map(|&c| if radius > 0.0 { c + rng.gen_range(-radius..=radius) } else { c })
                    .collect();
                let g = self.gradient(&x).expect("dimension checked");
                g.iter().map(|v| v.abs()).sum::<f64>()
            })
            .reduce(|| 0.0, f64::max);
        Ok(best)
    }

    /// Interval propagation of the preactivations of every hidden layer over the
    /// ℓ∞ ball of radius `eps` around `x0`.
    pub fn preactivation_bounds(&self, x0: &[f64], eps: f64) -> Result<Vec<Vec<Interval>>> {
        self.check_input(x0)?;
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {eps}")));
        }
        let mut current: Vec<Interval> =
            x0.iter().map(|&c| Interval::new(c - eps, c + eps)).collect();
        let mut out = Vec::with_capacity(self.depth() - 1);
        for w in &self.layers[..self.depth() - 1] {
            let mut next = vec![Interval::point(0.0); w.rows];
            for &(r, c, v) in &w.entries {
                let iv = current[c];
                if v >= 0.0 {
                    next[r].lo += v * iv.lo;
                    next[r].hi += v * iv.hi;
                } else {
                    next[r].lo += v * iv.hi;
                    next[r].hi += v * iv.lo;
                }
            }
            if eps == 0.0 {
                // Exact point propagation; avoids sign-split rounding differences.
                let mid: Vec<f64> = current.iter().map(|iv| iv.lo).collect();
                next = w.matvec(&mid).into_iter().map(Interval::point).collect();
            }
            current = next
                .iter()
                .map(|iv| {
                    Interval::new(self.activation.eval(iv.lo), self.activation.eval(iv.hi))
                })
                .collect();
            out.push(next);
        }
        Ok(out)
    }

    /// Evaluates the monotone derivative at the interval endpoints.
    pub fn derivative_bounds(&self, pre: &[Vec<Interval>]) -> Result<NeuronBounds> {
        let widths = self.hidden_widths();
        if pre.len() != widths.len() || pre.iter().zip(&widths).any(|(p, &w)| p.len() != w) {
            return Err(Error::DimensionMismatch(
                "preactivation intervals do not match hidden widths".into(),
            ));
        }
        let act = self.activation;
        let lower = pre.iter().map(|l| l.iter().map(|iv| act.derivative(iv.lo)).collect()).collect();
        let upper = pre.iter().map(|l| l.iter().map(|iv| act.derivative(iv.hi)).collect()).collect();
        NeuronBounds::new(lower, upper)
    }

    /// Local derivative bounds on the ℓ∞ ball of radius `eps` around `x0`.
    pub fn local_bounds(&self, x0: &[f64], eps: f64) -> Result<NeuronBounds> {
        let pre = self.preactivation_bounds(x0, eps)?;
        self.derivative_bounds(&pre)
    }

    /// Random network with layer widths `widths = [n_1, …, n_d, 1]`. Each neuron
    /// draws exactly `sparsity` distinct incoming connections uniformly; nonzero
    /// weights of a layer with fan-in `n` are uniform in `[-1/√n, 1/√n]`.
    pub fn random(widths: &[usize], sparsity: usize, activation: Activation, seed: u64) -> Result<Self> {
        if sparsity == 0 {
            return Err(Error::InvalidArgument("widths and sparsity must be positive".into()));
        }
        if let Some(&w) = widths[..widths.len().saturating_sub(1)].iter().find(|&&w| sparsity > w) {
            return Err(Error::InvalidArgument(format!(
                "sparsity {sparsity} exceeds layer width {w}"
            )));
        }
        Self::random_with(widths, Some(sparsity), activation, seed)
    }

    /// Fully connected random network under the same weight law.
    pub fn random_dense(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        Self::random_with(widths, None, activation, seed)
    }

    fn random_with(widths: &[usize], sparsity: Option<usize>, activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidArgument(
                "need at least an input, one hidden layer and the output".into(),
            ));
        }
        if *widths.last().expect("nonempty") != 1 {
            return Err(Error::InvalidArgument("final width must be 1".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("widths and sparsity must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, pair) in widths.windows(2).enumerate() {
            let (cols, rows) = (pair[0], pair[1]);
            let bound = 1.0 / (cols as f64).sqrt();
            let mut entries = Vec::with_capacity(rows * sparsity.unwrap_or(cols));
            for r in 0..rows {
                let picked = match sparsity {
                    Some(k) => {
                        let mut v = index::sample(&mut rng, cols, k).into_vec();
                        v.sort_unstable();
                        v
                    }
                    None => (0..cols).collect(),
                };
                for c in picked {
                    let v = loop {
                        let v: f64 = rng.gen_range(-bound..=bound);
                        if v != 0.0 {
                            break v;
                        }
                    };
                    entries.push((r, c, v));
                }
            }
            layers.push(WeightMatrix::from_triplets(rows, cols, entries, i)?);
        }
        Self::new(layers, activation)
    }

    /// Global magnitude pruning: removes the `⌊fraction · #weights⌋` weights of
    /// smallest magnitude, ties broken by `(layer, row, col)`.
    pub fn prune(&self, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("fraction must lie in [0, 1), got {fraction}")));
        }
        let mut all: Vec<(f64, usize, usize, usize)> = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(l, w)| w.entries.iter().map(move |&(r, c, v)| (v.abs(), l, r, c)))
            .collect();
        let remove = (fraction * all.len() as f64).floor() as usize;
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
        let mut dropped: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.depth()];
        for &(_, l, r, c) in &all[..remove] {
            dropped[l].push((r, c));
        }
        let layers = self
            .layers
            .iter()
            .zip(dropped.iter_mut())
            .map(|(w, drop)| {
                drop.sort_unstable();
                let entries = w
                    .entries
                    .iter()
                    .copied()
                    .filter(|e| drop.binary_search(&(e.0, e.1)).is_err())
                    .collect();
                WeightMatrix { rows: w.rows, cols: w.cols, entries }
            })
            .collect();
        let pruned = Self { layers, activation: self.activation };
        if !pruned.output_reachable() {
            return Err(Error::Disconnected);
        }
        Ok(pruned)
    }

    /// Whether some input reaches the output through nonzero weights.
    pub fn output_reachable(&self) -> bool {
        let mut live = vec![true; self.input_dim()];
        for w in &self.layers {
            let mut next = vec![false; w.rows];
            let mut queue: VecDeque<usize> = VecDeque::new();
            for &(r, c, _) in &w.entries {
                if live[c] && !next[r] {
                    next[r] = true;
                    queue.push_back(r);
                }
            }
            if queue.is_empty() {
                return false;
            }
            live = next;
        }
        live[0]
    }
}
