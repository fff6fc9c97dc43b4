//! QCQP reformulation of the norm-gradient problem for depth 2 and 3, its Shor
//! relaxation, and SDPA sparse export.
//!
//! Variables are normalized to `[-1, 1]` through `s ↦ 2s - 1`, which turns the
//! objective into `2^{1-d} s_0ᵀ W_1ᵀ Π Diag(s_i + 1) W_{i+1}ᵀ`. For depth 3 the
//! product `s_1 s_2ᵀ` is lifted into its own block so that everything is at
//! most quadratic in `y = [1, s_0, s_1, s_2, vec(s_1 s_2ᵀ)]`.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};

use crate::error::{Error, Result};
use crate::fmt::format_g17;
use crate::network::Network;

/// `Σ quad[(i,j)] y_i y_j + Σ lin[i] y_i + constant` with `i ≤ j`. Index 0 of
/// `y` is the constant 1 and never appears in `quad` or `lin`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Quadratic {
    pub quad: BTreeMap<(usize, usize), f64>,
    pub lin: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl Quadratic {
    fn add_quad(&mut self, i: usize, j: usize, c: f64) {
        if c != 0.0 {
            *self.quad.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
        }
    }

    fn add_lin(&mut self, i: usize, c: f64) {
        if c != 0.0 {
            *self.lin.entry(i).or_insert(0.0) += c;
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.quad.iter().map(|(&(i, j), c)| c * y[i] * y[j]).sum::<f64>()
            + self.lin.iter().map(|(&i, c)| c * y[i]).sum::<f64>()
            + self.constant
    }

    /// Symmetric `Ā` with `⟨Ā, yyᵀ⟩` equal to this quadratic when `y_0 = 1`.
    pub fn homogenize(&self) -> SymMatrix {
        let mut m = SymMatrix::default();
        m.add(0, 0, self.constant);
        for (&i, &c) in &self.lin {
            m.add(0, i, c / 2.0);
        }
        for (&(i, j), &c) in &self.quad {
            m.add(i, j, if i == j { c } else { c / 2.0 });
        }
        m
    }
}

/// Symmetric matrix stored as its upper triangle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymMatrix {
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl SymMatrix {
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            *self.entries.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// `⟨A, X⟩` for a dense symmetric `X`.
    pub fn inner(&self, x: &[Vec<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|(&(i, j), &v)| if i == j { v * x[i][i] } else { 2.0 * v * x[i][j] })
            .sum()
    }
}

/// Maximize `objective(y)` subject to `constraints[c](y) ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Qcqp {
    pub dim: usize,
    /// Offset of each normalized layer block in `y`.
    pub layer_offsets: Vec<usize>,
    pub widths: Vec<usize>,
    /// Offset of the lifted `s_1 s_2ᵀ` block (row-major), if any.
    pub lifted_offset: Option<usize>,
    pub objective: Quadratic,
    pub constraints: Vec<Quadratic>,
    pub box_constraints: usize,
    pub lifting_pairs: usize,
}

impl Qcqp {
    /// Builds `y` from normalized layer values with exact lifting.
    pub fn lift(&self, s: &[Vec<f64>]) -> Result<Vec<f64>> {
        if s.len() != self.widths.len() || s.iter().zip(&self.widths).any(|(v, &w)| v.len() != w) {
            return Err(Error::DimensionMismatch("layer values do not match the QCQP layout".into()));
        }
        let mut y = vec![0.0; self.dim];
        y[0] = 1.0;
        for (l, vals) in s.iter().enumerate() {
            y[self.layer_offsets[l]..self.layer_offsets[l] + vals.len()].copy_from_slice(vals);
        }
        if let Some(off) = self.lifted_offset {
            let n3 = self.widths[2];
            for (a, &u) in s[1].iter().enumerate() {
                for (b, &v) in s[2].iter().enumerate() {
                    y[off + a * n3 + b] = u * v;
                }
            }
        }
        Ok(y)
    }
}

pub fn qcqp_reformulate(net: &Network) -> Result<Qcqp> {
    let d = net.depth();
    if !(2..=3).contains(&d) {
        return Err(Error::Unsupported(format!("QCQP reformulation implemented for depth 2 and 3, got {d}")));
    }
    let widths = net.variable_widths();
    let mut layer_offsets = Vec::with_capacity(widths.len());
    let mut next = 1;
    for &w in &widths {
        layer_offsets.push(next);
        next += w;
    }
    let lifted_offset = (d == 3).then_some(next);
    let dim = next + if d == 3 { widths[1] * widths[2] } else { 0 };
    let idx = |layer: usize, i: usize| layer_offsets[layer] + i;
    let layers = net.layers();

    let mut objective = Quadratic::default();
    if d == 2 {
        // ½ Σ s0[a] W1[j,a] (s1[j] + 1) W2[0,j]
        for &(j, a, w1) in layers[0].entries() {
            let c = 0.5 * w1 * layers[1].get(0, j);
            objective.add_quad(idx(0, a), idx(1, j), c);
            objective.add_lin(idx(0, a), c);
        }
    } else {
        // ¼ Σ s0[a] W1[j,a] (s1[j] + 1) W2[l,j] (s2[l] + 1) W3[0,l]
        let n3 = widths[2];
        let lifted = lifted_offset.expect("depth 3");
        for &(j, a, w1) in layers[0].entries() {
            for &(l, j2, w2) in layers[1].entries() {
                if j2 != j {
                    continue;
                }
                let c = 0.25 * w1 * w2 * layers[2].get(0, l);
                if c == 0.0 {
                    continue;
                }
                objective.add_quad(idx(0, a), lifted + j * n3 + l, c);
                objective.add_quad(idx(0, a), idx(1, j), c);
                objective.add_quad(idx(0, a), idx(2, l), c);
                objective.add_lin(idx(0, a), c);
            }
        }
    }

    let mut constraints = Vec::new();
    for (layer, &w) in widths.iter().enumerate() {
        for i in 0..w {
            let mut q = Quadratic::default();
            q.add_quad(idx(layer, i), idx(layer, i), 1.0);
            q.constant = -1.0;
            constraints.push(q);
        }
    }
    let box_constraints = constraints.len();
    let mut lifting_pairs = 0;
    if let Some(off) = lifted_offset {
        let n3 = widths[2];
        for a in 0..widths[1] {
            for b in 0..n3 {
                let mut q = Quadratic::default();
                q.add_lin(off + a * n3 + b, 1.0);
                q.add_quad(idx(1, a), idx(2, b), -1.0);
                let mut neg = Quadratic::default();
                neg.add_lin(off + a * n3 + b, -1.0);
                neg.add_quad(idx(1, a), idx(2, b), 1.0);
                constraints.push(q);
                constraints.push(neg);
                lifting_pairs += 1;
            }
        }
    }
    Ok(Qcqp {
        dim,
        layer_offsets,
        widths,
        lifted_offset,
        objective,
        constraints,
        box_constraints,
        lifting_pairs,
    })
}

/// Maximize `⟨C, X⟩` subject to `⟨A_c, X⟩ ≤ 0`, `X_00 = 1`, `X ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShorSdp {
    pub dim: usize,
    pub objective: SymMatrix,
    pub inequalities: Vec<SymMatrix>,
}

impl ShorSdp {
    /// Inequalities plus the normalization row.
    pub fn constraint_count(&self) -> usize {
        self.inequalities.len() + 1
    }

    /// Worst violation of the linear constraints at `X` (PSD-ness not checked).
    pub fn max_violation(&self, x: &[Vec<f64>]) -> f64 {
        self.inequalities
            .iter()
            .map(|a| a.inner(x).max(0.0))
            .fold((x[0][0] - 1.0).abs(), f64::max)
    }
}

pub fn shor_relax(q: &Qcqp) -> ShorSdp {
    ShorSdp {
        dim: q.dim,
        objective: q.objective.homogenize(),
        inequalities: q.constraints.iter().map(Quadratic::homogenize).collect(),
    }
}

/// Writes SDPA sparse format. The relaxation is posed as the SDPA dual
/// `max ⟨F0, Y⟩ s.t. ⟨F_i, Y⟩ = c_i, Y ⪰ 0` with `Y = diag(X, t)`: block 1 is
/// `X`, block 2 holds one nonnegative slack per inequality.
pub fn write_sdpa(sdp: &ShorSdp, sink: impl Write) -> Result<()> {
    let mut w = BufWriter::new(sink);
    let m_ineq = sdp.inequalities.len();
    writeln!(w, "* Shor relaxation, SDPA sparse format")?;
    writeln!(w, "* maximize <F0,Y> s.t. <Fi,Y> = ci, Y = diag(X, t) psd")?;
    writeln!(w, "* constraint 1: X[1,1] = 1; constraint 1+j: <Aj,X> + t_j = 0")?;
    writeln!(w, "* optimal value is an upper bound on the normalized problem")?;
    writeln!(w, "{}", m_ineq + 1)?;
    if m_ineq > 0 {
        writeln!(w, "2")?;
        writeln!(w, "{} -{}", sdp.dim, m_ineq)?;
    } else {
        writeln!(w, "1")?;
        writeln!(w, "{}", sdp.dim)?;
    }
    let mut c = vec!["1".to_string()];
    c.extend(std::iter::repeat("0".to_string()).take(m_ineq));
    writeln!(w, "{}", c.join(" "))?;
    for (&(i, j), &v) in &sdp.objective.entries {
        writeln!(w, "0 1 {} {} {}", i + 1, j + 1, format_g17(v))?;
    }
    writeln!(w, "1 1 1 1 1")?;
    for (k, a) in sdp.inequalities.iter().enumerate() {
        for (&(i, j), &v) in &a.entries {
            writeln!(w, "{} 1 {} {} {}", k + 2, i + 1, j + 1, format_g17(v))?;
        }
        writeln!(w, "{} 2 {} {} 1", k + 2, k + 1, k + 1)?;
    }
    w.flush()?;
    Ok(())
}
