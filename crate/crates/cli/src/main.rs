//! geodiv: how diverse is service usage across a territory, where does that
//! diversity live, and who is behind it.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 internal
//! consistency failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use geodiv_cli::bench::{bench, write_bench};
use geodiv_cli::error::{CliError, Result};
use geodiv_cli::pipeline::{parse_log_base, parse_rule, run_pipeline, RunConfig, Stage};
use geodiv_cli::synth::{synth, write_synth, SynthSpec, Topology, VolumeLaw};
use geodiv_core::interpret::DemoWeighting;

#[derive(Parser)]
#[command(
    name = "geodiv",
    version,
    about = "Information-theoretic analysis of area-by-service traffic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Traffic CSV: area_id,service_id,volume
    #[arg(long)]
    traffic: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Logarithm base for reported quantities: e, 2, or 10
    #[arg(long, default_value = "e")]
    log_base: String,
    /// Seed echoed into the manifest
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SelectArgs {
    /// Service selection rule: gap, theta=X, or topn=N
    #[arg(long, default_value = "gap")]
    rule: String,
}

#[derive(Args)]
struct ClusterArgs {
    /// Adjacency CSV: area_id_a,area_id_b
    #[arg(long)]
    adjacency: PathBuf,
    /// Phase-1 target cluster count (default: min(1000, areas))
    #[arg(long)]
    nk1: Option<usize>,
    /// Phase-2 target cluster count (default: min(50, phase-1 output))
    #[arg(long)]
    nk2: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Mutual information of the full model and the top-k curve
    Mi {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest k for the top-k information curve (default: all services)
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Capacity weights and the informative service subset
    Informative {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        select: SelectArgs,
    },
    /// Two-phase spatial clustering on the informative subset
    Cluster {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
    },
    /// Demographic reading of the clusters
    Interpret {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
        /// Demographics CSV (area_id,level); repeat for several notions
        #[arg(long, required = true)]
        demographics: Vec<PathBuf>,
        /// Weight areas by presence instead of traffic share
        #[arg(long)]
        count_weighted: bool,
    },
    /// Every stage that the provided inputs allow
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
        /// Demographics CSV (area_id,level); repeat for several notions
        #[arg(long)]
        demographics: Vec<PathBuf>,
        #[arg(long)]
        kmax: Option<usize>,
        /// Weight areas by presence instead of traffic share
        #[arg(long)]
        count_weighted: bool,
    },
    /// Generate a planted instance: traffic, adjacency, demographics, truth
    Synth {
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
        /// Grid topology WIDTHxHEIGHT, e.g. 20x20
        #[arg(long, conflicts_with = "planar", required_unless_present = "planar")]
        grid: Option<String>,
        /// Planar topology with this many random points
        #[arg(long)]
        planar: Option<usize>,
        /// Number of planted blocks (vertical strips)
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        /// Number of services
        #[arg(long, default_value_t = 4)]
        services: usize,
        /// Weight multiplier for each block's own services
        #[arg(long, default_value_t = 4.0)]
        sharpness: f64,
        /// Mixing weight toward uniform usage, in [0, 1]
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Volume law: constant:V or lognormal:MU,SIGMA
        #[arg(long, default_value = "constant:1")]
        volume: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Phase-1 scaling study over square grids
    Bench {
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated grid sides, e.g. 10,20,40,80
        #[arg(long, default_value = "10,20,40,80")]
        sizes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn base_config(common: &CommonArgs, rule: &str, stage: Stage) -> Result<RunConfig> {
    Ok(RunConfig {
        traffic: common.traffic.clone(),
        adjacency: None,
        demographics: Vec::new(),
        stage,
        rule: parse_rule(rule)?,
        n_k1: None,
        n_k2: None,
        k_max: None,
        log_base: parse_log_base(&common.log_base)?,
        weighting: DemoWeighting::Traffic,
        seed: common.seed,
        out_dir: common.out.clone(),
    })
}

fn report(manifest: &geodiv_cli::pipeline::Manifest) {
    let base = &manifest.config.log_base;
    println!(
        "model: {} areas x {} services, I(S;C) = {} (base {base})",
        manifest.input.n_areas - manifest.input.excluded_areas.len(),
        manifest.input.n_services,
        manifest.information.full_mi
    );
    if let Some(inf) = &manifest.informative {
        println!(
            "informative: {} of {} services selected, capacity {} (base {base}), restricted I = {}",
            inf.selected_services.len(),
            manifest.input.n_services - inf.dropped_services.len(),
            inf.capacity,
            inf.restricted_mi
        );
    }
    if let Some(cl) = &manifest.clustering {
        println!(
            "clustering: {} -> {} -> {} clusters, retained fraction {:.6}",
            cl.n_areas, cl.phase1.clusters_out, cl.phase2.clusters_out, cl.phase2.retained_fraction
        );
    }
    if let Some(int) = &manifest.interpretation {
        println!(
            "interpretation: {} demographic notion(s), {} weighting",
            int.notions.len(),
            int.weighting
        );
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split('x').collect();
    let bad = || CliError::Config(format!("invalid grid {s:?}; expected WIDTHxHEIGHT"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let w = parts[0].parse().map_err(|_| bad())?;
    let h = parts[1].parse().map_err(|_| bad())?;
    Ok((w, h))
}

fn parse_volume(s: &str) -> Result<VolumeLaw> {
    if let Some(v) = s.strip_prefix("constant:") {
        let v: f64 = v
            .parse()
            .map_err(|_| CliError::Config(format!("invalid constant volume in {s:?}")))?;
        return Ok(VolumeLaw::Constant(v));
    }
    if let Some(rest) = s.strip_prefix("lognormal:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(mu), Ok(sigma)) = (parts[0].parse(), parts[1].parse()) {
                return Ok(VolumeLaw::LogNormal { mu, sigma });
            }
        }
        return Err(CliError::Config(format!(
            "invalid log-normal parameters in {s:?}; expected lognormal:MU,SIGMA"
        )));
    }
    Err(CliError::Config(format!(
        "unknown volume law {s:?}; expected constant:V or lognormal:MU,SIGMA"
    )))
}

/// Block b leans on services congruent to b mod S by the sharpness factor.
fn planted_dists(blocks: usize, services: usize, sharpness: f64) -> Result<Vec<Vec<f64>>> {
    if blocks == 0 || services == 0 {
        return Err(CliError::Config(
            "blocks and services must be positive".to_string(),
        ));
    }
    if !sharpness.is_finite() || sharpness <= 0.0 {
        return Err(CliError::Config(format!(
            "sharpness {sharpness} must be a positive real"
        )));
    }
    let total = services as f64 - 1.0 + sharpness;
    Ok((0..blocks)
        .map(|b| {
            (0..services)
                .map(|j| {
                    if j == b % services {
                        sharpness / total
                    } else {
                        1.0 / total
                    }
                })
                .collect()
        })
        .collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mi { common, kmax } => {
            let mut cfg = base_config(&common, "gap", Stage::Mi)?;
            cfg.k_max = kmax;
            report(&run_pipeline(&cfg)?);
        }
        Command::Informative { common, select } => {
            let cfg = base_config(&common, &select.rule, Stage::Informative)?;
            report(&run_pipeline(&cfg)?);
        }
        Command::Cluster {
            common,
            select,
            cluster,
        } => {
            let mut cfg = base_config(&common, &select.rule, Stage::Cluster)?;
            cfg.adjacency = Some(cluster.adjacency);
            cfg.n_k1 = cluster.nk1;
            cfg.n_k2 = cluster.nk2;
            report(&run_pipeline(&cfg)?);
        }
        Command::Interpret {
            common,
            select,
            cluster,
            demographics,
            count_weighted,
        } => {
            let mut cfg = base_config(&common, &select.rule, Stage::Interpret)?;
            cfg.adjacency = Some(cluster.adjacency);
            cfg.n_k1 = cluster.nk1;
            cfg.n_k2 = cluster.nk2;
            cfg.demographics = demographics;
            if count_weighted {
                cfg.weighting = DemoWeighting::Count;
            }
            report(&run_pipeline(&cfg)?);
        }
        Command::Pipeline {
            common,
            select,
            cluster,
            demographics,
            kmax,
            count_weighted,
        } => {
            let stage = if demographics.is_empty() {
                Stage::Cluster
            } else {
                Stage::Interpret
            };
            let mut cfg = base_config(&common, &select.rule, stage)?;
            cfg.adjacency = Some(cluster.adjacency);
            cfg.n_k1 = cluster.nk1;
            cfg.n_k2 = cluster.nk2;
            cfg.demographics = demographics;
            cfg.k_max = kmax;
            if count_weighted {
                cfg.weighting = DemoWeighting::Count;
            }
            report(&run_pipeline(&cfg)?);
        }
        Command::Synth {
            out,
            grid,
            planar,
            blocks,
            services,
            sharpness,
            noise,
            volume,
            seed,
        } => {
            let topology = match (grid, planar) {
                (Some(g), None) => {
                    let (width, height) = parse_grid(&g)?;
                    Topology::Grid { width, height }
                }
                (None, Some(nodes)) => Topology::Planar { nodes },
                _ => unreachable!("clap enforces exactly one topology"),
            };
            let spec = SynthSpec {
                topology,
                block_dists: planted_dists(blocks, services, sharpness)?,
                volume_law: parse_volume(&volume)?,
                noise,
            };
            std::fs::create_dir_all(&out).map_err(|e| geodiv_cli::error::io_err(&out, e))?;
            let instance = synth(&spec, seed)?;
            write_synth(&out, &instance)?;
            println!(
                "synth: {} areas, {} services, {} edges, {} blocks",
                instance.traffic.n_areas(),
                instance.traffic.n_services(),
                instance.graph.n_edges(),
                blocks
            );
        }
        Command::Bench { out, sizes, seed } => {
            let sizes: Vec<usize> = sizes
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("invalid size {s:?}")))
                })
                .collect::<Result<_>>()?;
            std::fs::create_dir_all(&out).map_err(|e| geodiv_cli::error::io_err(&out, e))?;
            let report = bench(&sizes, seed)?;
            write_bench(&out, &report)?;
            println!("bench: tau exponent {:.4}", report.tau_exponent);
            for (w, g) in report.rows.windows(2).zip(&report.eval_growth) {
                println!(
                    "bench: {} -> {} areas, evaluation growth / area growth = {:.3}",
                    w[0].n_areas, w[1].n_areas, g
                );
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
