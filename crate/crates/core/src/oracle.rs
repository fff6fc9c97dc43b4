//! Ground truth for tests: exact box maxima of multilinear polynomials and
//! finite-difference gradients.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::polynomial::Polynomial;

pub const DEFAULT_VERTEX_CAP: usize = 22;

/// Variables flipped by the Gray code inside one work chunk.
const CHUNK_BITS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub argmax: Vec<u8>,
    pub vertices: u64,
}

/// Exact maximum of a multilinear `p` over `[0, 1]^n` by enumerating vertices.
pub fn vertex_max(p: &Polynomial) -> Result<OracleResult> {
    vertex_max_with_cap(p, DEFAULT_VERTEX_CAP)
}

/// As [`vertex_max`], refusing polynomials with more than `cap` variables in
/// use. Variables that do not occur in `p` are pinned to 0. Among maximizers
/// the lexicographically smallest vertex wins.
pub fn vertex_max_with_cap(p: &Polynomial, cap: usize) -> Result<OracleResult> {
    if !p.is_multilinear() {
        return Err(Error::NotMultilinear);
    }
    let active = p.variables();
    let m = active.len();
    if m > cap || m >= 63 {
        return Err(Error::OracleCap { nvars: m, cap });
    }
    let slot = |v: usize| active.binary_search(&v).expect("active variable");

    // Monomials over active slots; bit `m - 1 - i` of a vertex code is slot `i`,
    // so numeric order of codes is lexicographic order of vertices.
    let monos: Vec<(Vec<usize>, f64)> =
        p.terms().map(|(mono, c)| (mono.variables().map(slot).collect(), c)).collect();
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (t, (vars, _)) in monos.iter().enumerate() {
        for &i in vars {
            touching[i].push(t);
        }
    }
    let tol = 1e-12 * monos.iter().map(|(_, c)| c.abs()).sum::<f64>().max(1.0);

    let low = m.min(CHUNK_BITS);
    let chunks: u64 = 1 << (m - low);
    let bit_of_slot = |i: usize| m - 1 - i;

    let scan_chunk = |chunk: u64| -> (f64, u64) {
        // High code bits come from the chunk index; low bits start at zero.
        let mut code = chunk << low;
        let mut zeros: Vec<usize> = monos
            .iter()
            .map(|(vars, _)| vars.iter().filter(|&&i| code >> bit_of_slot(i) & 1 == 0).count())
            .collect();
        let mut value: f64 =
            monos.iter().zip(&zeros).filter(|(_, &z)| z == 0).map(|((_, c), _)| c).sum();
        let mut best = (value, code);
        for step in 1u64..(1 << low) {
            let bit = step.trailing_zeros() as usize;
            let i = m - 1 - bit;
            code ^= 1 << bit;
            let on = code >> bit & 1 == 1;
            for &t in &touching[i] {
                let before = zeros[t];
                zeros[t] = if on { before - 1 } else { before + 1 };
                if zeros[t] == 0 {
                    value += monos[t].1;
                } else if before == 0 {
                    value -= monos[t].1;
                }
            }
            best = better(best, (value, code), tol);
        }
        best
    };

    let (_, code) = (0..chunks)
        .into_par_iter()
        .map(scan_chunk)
        .reduce(|| (f64::NEG_INFINITY, u64::MAX), |a, b| better(a, b, tol));

    let mut argmax = vec![0u8; p.nvars()];
    for (i, &v) in active.iter().enumerate() {
        argmax[v] = (code >> bit_of_slot(i) & 1) as u8;
    }
    let x: Vec<f64> = argmax.iter().map(|&b| b as f64).collect();
    Ok(OracleResult { value: p.evaluate(&x)?, argmax, vertices: 1 << m })
}

fn better(a: (f64, u64), b: (f64, u64), tol: f64) -> (f64, u64) {
    if (a.0 - b.0).abs() <= tol {
        if a.1 <= b.1 {
            a
        } else {
            b
        }
    } else if a.0 > b.0 {
        a
    } else {
        b
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_gradient(net: &Network, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input has length {}, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = net.output(&probe)?;
        probe[i] = x[i] - h;
        let down = net.output(&probe)?;
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
