//! Scaling study for the spatial merge phase.
//!
//! Runs phase 1 to a single cluster on square grids of growing side, and
//! reports the sparsity statistic `tau = sqrt(2|E|)/n` together with the
//! number of edge evaluations the merge engine performed. On planar-like
//! graphs tau shrinks as `n^(-1/2)` and evaluations grow linearly, which is
//! what makes the phase practical at scale; the fitted exponents make a
//! regression in either visible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use geodiv_core::cluster::{measure_tau, phase1, AdjacencyGraph};
use geodiv_core::model::{build_joint, TrafficMatrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub grid_side: usize,
    pub n_areas: usize,
    pub n_edges: usize,
    pub tau: f64,
    pub edge_evaluations: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln tau` against `ln n`.
    pub tau_exponent: f64,
    /// Edge evaluation growth between consecutive sizes, divided by the
    /// area growth; near 1 when evaluations scale linearly.
    pub eval_growth: Vec<f64>,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Two vertical strips with well-separated usage profiles, plus a small
/// per-area jitter so pair diversities are in general position. Exactly
/// tied diversities would make the tie rule grow one cluster area by area,
/// whose boundary rewiring is what generic data never pays for.
fn bench_instance(side: usize, seed: u64) -> Result<(TrafficMatrix, AdjacencyGraph)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = [[0.8, 0.2], [0.2, 0.8]];
    let n = side * side;
    let mut volumes = Vec::with_capacity(n * 2);
    for _row in 0..side {
        for c in 0..side {
            let block = &blocks[c * 2 / side];
            let jitter: [f64; 2] = [rng.gen::<f64>(), rng.gen::<f64>()];
            let raw: Vec<f64> = (0..2).map(|j| block[j] + 0.05 * jitter[j]).collect();
            let total: f64 = raw.iter().sum();
            volumes.extend(raw.iter().map(|x| x / total));
        }
    }
    let area_ids = (0..side)
        .flat_map(|r| (0..side).map(move |c| format!("r{r}c{c}")))
        .collect();
    let t = TrafficMatrix::new(area_ids, vec!["s0".into(), "s1".into()], volumes)?;
    let g = AdjacencyGraph::grid(side, side)?;
    Ok((t, g))
}

pub fn bench(sizes: &[usize], seed: u64) -> Result<BenchReport> {
    if sizes.len() < 2 {
        return Err(CliError::Config(
            "bench needs at least 2 grid sizes to fit an exponent".to_string(),
        ));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "bench sizes must be strictly increasing".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &side in sizes {
        if side < 2 {
            return Err(CliError::Config(format!("grid side {side} too small")));
        }
        let (traffic, graph) = bench_instance(side, seed)?;
        let m = build_joint(&traffic)?;
        let start = std::time::Instant::now();
        let (_, trace) = phase1(&m, &graph, 1)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(BenchRow {
            grid_side: side,
            n_areas: m.n_areas(),
            n_edges: graph.n_edges(),
            tau: measure_tau(&graph),
            edge_evaluations: trace.edge_evaluations,
            wall_ms,
        });
        eprintln!(
            "bench {side}x{side}: {} edge evaluations, {:.1} ms",
            trace.edge_evaluations, wall_ms
        );
    }

    let xs: Vec<f64> = rows.iter().map(|r| (r.n_areas as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.tau.ln()).collect();
    let tau_exponent = fit_slope(&xs, &ys);

    let eval_growth = rows
        .windows(2)
        .map(|w| {
            let eval_ratio = w[1].edge_evaluations as f64 / w[0].edge_evaluations as f64;
            let area_ratio = w[1].n_areas as f64 / w[0].n_areas as f64;
            eval_ratio / area_ratio
        })
        .collect();

    Ok(BenchReport {
        rows,
        tau_exponent,
        eval_growth,
    })
}

/// Writes bench.csv. Wall times are environment-dependent, so this file is
/// not covered by the byte-determinism guarantee.
pub fn write_bench(out_dir: &std::path::Path, report: &BenchReport) -> Result<()> {
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.grid_side,
                r.n_areas,
                r.n_edges,
                crate::io::fmt_f64(r.tau),
                r.edge_evaluations,
                crate::io::fmt_f64(r.wall_ms)
            )
        })
        .collect();
    crate::io::write_csv(
        &out_dir.join("bench.csv"),
        "grid_side,n_areas,n_edges,tau,edge_evaluations,wall_ms",
        &rows,
    )
}
