//! Random-network grid: one CSV row per (widths, sparsity, seed).

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use rayon::prelude::*;

use lipopt::certificate::{self, Mode};
use lipopt::fmt::format_g;
use lipopt::network::{Network, LBS_DEFAULT_RADIUS, LBS_DEFAULT_SAMPLES};
use lipopt::oracle;
use lipopt::polynomial::norm_gradient_polynomial;

use crate::{emit, ActivationArg, ModeArg, SolverArgs};

const DIGITS: usize = 9;
const SANDWICH_TOL: f64 = 1e-9;

#[derive(Args)]
pub struct SweepArgs {
    /// Layer widths, input first; repeat the flag for several architectures.
    #[arg(long, value_delimiter = ';', required = true)]
    widths: Vec<String>,
    /// Nonzeros per row, or "full" for fully connected layers.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    sparsity: Vec<String>,
    /// Hierarchy degrees.
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<u32>,
    /// Number of seeds per cell, starting at --first-seed.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, value_enum, default_value = "elu")]
    activation: ActivationArg,
    #[arg(long, value_enum, default_value = "sparse")]
    mode: ModeArg,
    #[arg(long, default_value_t = LBS_DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = LBS_DEFAULT_RADIUS)]
    radius: f64,
    /// Also run the exact vertex oracle, capped at this many variables.
    #[arg(long)]
    oracle: Option<usize>,
    /// Leave out the wall-time columns so output is byte-stable.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Cell {
    widths: Vec<usize>,
    sparsity: Option<usize>,
    seed: u64,
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    if a.samples == 0 {
        bail!("lbs needs at least one sample");
    }
    let archs = a.widths.iter().map(|w| parse_widths(w)).collect::<Result<Vec<_>>>()?;
    let sparsities = a
        .sparsity
        .iter()
        .map(|s| match s.trim() {
            "full" => Ok(None),
            r => r.parse().map(Some).map_err(|_| anyhow::anyhow!("bad sparsity {r:?}")),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for w in &archs {
        for &r in &sparsities {
            for seed in a.first_seed..a.first_seed + a.seeds {
                cells.push(Cell { widths: w.clone(), sparsity: r, seed });
            }
        }
    }

    let rows: Vec<String> = cells.par_iter().map(|c| run_cell(a, c)).collect();
    let mut csv = header(a).join(",");
    csv.push('\n');
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)
}

fn parse_widths(s: &str) -> Result<Vec<usize>> {
    let w: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| anyhow::anyhow!("bad width {t:?} in {s:?}")))
        .collect::<Result<_>>()?;
    if w.len() < 2 {
        bail!("widths {s:?} need an input and an output layer");
    }
    Ok(w)
}

fn header(a: &SweepArgs) -> Vec<String> {
    let timed = |name: &str, out: &mut Vec<String>| {
        out.push(name.to_string());
        if !a.no_timing {
            out.push(format!("{name}_seconds"));
        }
    };
    let mut h = vec!["widths".to_string(), "sparsity".to_string(), "seed".to_string()];
    timed("lbs", &mut h);
    if a.oracle.is_some() {
        timed("oracle", &mut h);
    }
    for k in &a.k {
        timed(&format!("theta_{k}"), &mut h);
        h.push(format!("relerr_{k}"));
    }
    timed("ubp", &mut h);
    h.push("sandwich".into());
    h.push("error".into());
    h
}

fn num(x: f64) -> String {
    format_g(x, DIGITS)
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn run_cell(a: &SweepArgs, c: &Cell) -> String {
    let widths = c.widths.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
    let mut row = vec![
        widths,
        c.sparsity.map_or("full".to_string(), |r| r.to_string()),
        c.seed.to_string(),
    ];
    let mut errors = Vec::new();
    let timed = |value: String, secs: f64, row: &mut Vec<String>| {
        row.push(value);
        if !a.no_timing {
            row.push(num(secs));
        }
    };

    let act = a.activation.into();
    let net = match c.sparsity {
        Some(r) => Network::random(&c.widths, r, act, c.seed),
        None => Network::random_dense(&c.widths, act, c.seed),
    };
    let net = match net {
        Ok(n) => n,
        Err(e) => {
            // Pad so every row has the header's column count.
            row.resize(header(a).len() - 1, String::new());
            row.push(quote(&format!("network: {e}")));
            return row.join(",");
        }
    };

    let t = Instant::now();
    let lbs = net.lbs(a.samples, a.radius, c.seed);
    timed(num(lbs), t.elapsed().as_secs_f64(), &mut row);

    if let Some(cap) = a.oracle {
        let t = Instant::now();
        let value = match oracle::vertex_max_with_cap(&norm_gradient_polynomial(&net), cap) {
            Ok(r) => num(r.value),
            Err(e) => {
                errors.push(format!("oracle: {e}"));
                String::new()
            }
        };
        timed(value, t.elapsed().as_secs_f64(), &mut row);
    }

    let mut thetas = Vec::new();
    let opts = a.solver.options();
    for &k in &a.k {
        let t = Instant::now();
        let result = opts
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|o| certificate::lipopt_bound(&net, k, Mode::from(a.mode), None, o).map_err(|e| e.to_string()));
        match result {
            Ok(rep) => {
                timed(num(rep.theta), t.elapsed().as_secs_f64(), &mut row);
                row.push(num((rep.theta - lbs) / lbs));
                thetas.push(Some(rep.theta));
            }
            Err(e) => {
                errors.push(format!("theta_{k}: {e}"));
                timed(String::new(), t.elapsed().as_secs_f64(), &mut row);
                row.push(String::new());
                thetas.push(None);
            }
        }
    }

    let t = Instant::now();
    let ubp = net.ubp();
    timed(num(ubp), t.elapsed().as_secs_f64(), &mut row);

    let sandwich = if thetas.iter().all(Option::is_some) {
        let ok = thetas.iter().flatten().all(|&th| {
            let tol = SANDWICH_TOL * th.abs().max(1.0);
            lbs <= th + tol && th <= ubp + tol
        });
        ok.to_string()
    } else {
        String::new()
    };
    row.push(sandwich);
    row.push(quote(&errors.join("; ")));
    row.join(",")
}
