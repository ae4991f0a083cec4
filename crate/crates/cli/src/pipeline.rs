//! The staged analysis pipeline and its on-disk outputs.
//!
//! A run loads traffic, measures information, weighs services, clusters
//! areas, and reads the clusters against demographics, stopping at the
//! configured stage. Outputs are CSV files plus a JSON manifest; identical
//! configurations produce byte-identical files, so wall-clock timings go to
//! stderr only while deterministic counters (iterations, edge evaluations)
//! go to the manifest. Information values in output files use the
//! configured logarithm base; internal math stays in nats.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use geodiv_core::cluster::{
    measure_tau, phase1, phase2, retained_mi, retained_positions, AdjacencyGraph, Clustering,
    MergeTrace,
};
use geodiv_core::info::{entropy, mi_topk_curve, mutual_information, LogBase};
use geodiv_core::informative::{
    blahut_arimoto, channel_from_traffic, select_informative, Channel, SelectionRule,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use geodiv_core::interpret::{
    demo_conditional, incidence, incidence_avg, service_coordinates, significance_demographics,
    significance_services, DemoWeighting, DemographicsAssignment, IncidenceMatrix,
};
use geodiv_core::model::{build_joint, JointModel, ServiceSubset, TrafficMatrix};

use crate::error::{CliError, Result};
use crate::io;

/// Capacity below this many nats means service usage is essentially the
/// same everywhere and the informative subset carries no signal.
pub const NIL_CAPACITY: f64 = 1e-12;

/// Retained information along the merge traces must agree with direct
/// recomputation to this many nats.
pub const TELESCOPE_TOL: f64 = 1e-6;

/// How far the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// Full model information and the top-k curve.
    Mi,
    /// Plus capacity weights and the informative subset.
    Informative,
    /// Plus two-phase clustering on the restricted model.
    Cluster,
    /// Plus demographic significance, incidence, and service coordinates.
    Interpret,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Mi => "mi",
            Stage::Informative => "informative",
            Stage::Cluster => "cluster",
            Stage::Interpret => "interpret",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub traffic: PathBuf,
    pub adjacency: Option<PathBuf>,
    pub demographics: Vec<PathBuf>,
    pub stage: Stage,
    pub rule: SelectionRule,
    pub n_k1: Option<usize>,
    pub n_k2: Option<usize>,
    pub k_max: Option<usize>,
    pub log_base: LogBase,
    pub weighting: DemoWeighting,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Renders a selection rule in the flag syntax (`gap`, `theta=X`, `topn=N`).
pub fn rule_string(rule: SelectionRule) -> String {
    match rule {
        SelectionRule::Gap => "gap".to_string(),
        SelectionRule::Fixed(theta) => format!("theta={theta}"),
        SelectionRule::TopN(n) => format!("topn={n}"),
    }
}

/// Parses the flag syntax accepted by `rule_string`.
pub fn parse_rule(s: &str) -> Result<SelectionRule> {
    if s == "gap" {
        return Ok(SelectionRule::Gap);
    }
    if let Some(v) = s.strip_prefix("theta=") {
        let theta: f64 = v
            .parse()
            .map_err(|_| CliError::Config(format!("invalid threshold in rule {s:?}")))?;
        return Ok(SelectionRule::Fixed(theta));
    }
    if let Some(v) = s.strip_prefix("topn=") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("invalid count in rule {s:?}")))?;
        return Ok(SelectionRule::TopN(n));
    }
    Err(CliError::Config(format!(
        "unknown rule {s:?}; expected gap, theta=X, or topn=N"
    )))
}

pub fn parse_log_base(s: &str) -> Result<LogBase> {
    match s {
        "e" => Ok(LogBase::E),
        "2" => Ok(LogBase::Two),
        "10" => Ok(LogBase::Ten),
        _ => Err(CliError::Config(format!(
            "unknown log base {s:?}; expected e, 2, or 10"
        ))),
    }
}

#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub traffic: String,
    pub adjacency: Option<String>,
    pub demographics: Vec<String>,
    pub stage: String,
    pub rule: String,
    pub n_k1: Option<usize>,
    pub n_k2: Option<usize>,
    pub k_max: Option<usize>,
    pub log_base: String,
    pub weighting: String,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct InputSummary {
    pub n_areas: usize,
    pub n_services: usize,
    pub total_volume: f64,
    /// Areas dropped from the full model for having no traffic at all.
    pub excluded_areas: Vec<String>,
    pub n_edges: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct InformationSummary {
    pub full_mi: f64,
    pub area_entropy: f64,
    pub service_entropy: f64,
    pub top_k_max: usize,
}

#[derive(Debug, Serialize)]
pub struct InformativeSummary {
    pub capacity: f64,
    pub ba_iterations: usize,
    pub ba_converged: bool,
    pub ba_final_delta: f64,
    /// Services dropped from the channel for having no traffic.
    pub dropped_services: Vec<String>,
    pub selected_services: Vec<String>,
    pub cut_index: usize,
    pub threshold: f64,
    pub restricted_mi: f64,
    /// Areas dropped when restriction left them with no traffic.
    pub restricted_excluded_areas: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct PhaseSummary {
    pub merges: usize,
    pub clusters_out: usize,
    pub edge_evaluations: u64,
    pub retained_mi: f64,
    pub retained_fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct ClusteringSummary {
    pub n_areas: usize,
    pub n_k1: usize,
    pub n_k2: usize,
    pub tau: f64,
    pub phase1: PhaseSummary,
    pub phase2: PhaseSummary,
    /// Gap between traced and recomputed retained information, in nats.
    pub telescoping_error: f64,
}

#[derive(Debug, Serialize)]
pub struct NotionSummary {
    pub name: String,
    pub path: String,
    pub n_levels: usize,
}

#[derive(Debug, Serialize)]
pub struct InterpretationSummary {
    pub weighting: String,
    pub notions: Vec<NotionSummary>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub config: ConfigEcho,
    pub input: InputSummary,
    pub information: InformationSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub informative: Option<InformativeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<InterpretationSummary>,
    pub warnings: Vec<String>,
}

fn elapsed_note(label: &str, start: Instant) {
    eprintln!("{label}: {} ms", start.elapsed().as_millis());
}

fn weighting_string(w: DemoWeighting) -> &'static str {
    match w {
        DemoWeighting::Traffic => "traffic",
        DemoWeighting::Count => "count",
    }
}

/// Maps an informative set from channel space to source matrix columns.
fn source_subset(ch: &Channel, set_indices: &[usize]) -> Result<ServiceSubset> {
    Ok(ServiceSubset::new(
        set_indices.iter().map(|&j| ch.source_columns()[j]).collect(),
    )?)
}

struct ClusterArtifacts {
    clustering: Clustering,
    trace1: MergeTrace,
    trace2: MergeTrace,
    summary: ClusteringSummary,
}

fn run_clustering(
    t: &TrafficMatrix,
    m_r: &JointModel,
    g_full: &AdjacencyGraph,
    n_k1: Option<usize>,
    n_k2: Option<usize>,
    base: LogBase,
) -> Result<ClusterArtifacts> {
    let keep = retained_positions(t.area_ids(), m_r.area_ids());
    let g = g_full.induced(&keep)?;
    let tau = measure_tau(&g);

    let n = m_r.n_areas();
    let n_k1 = n_k1.unwrap_or_else(|| n.min(1000));
    let start = Instant::now();
    let (c1, trace1) = phase1(m_r, &g, n_k1)?;
    elapsed_note("phase1", start);

    let n_k2 = n_k2.unwrap_or_else(|| c1.n_clusters().min(50));
    let start = Instant::now();
    let (c2, trace2) = phase2(&c1, m_r, n_k2)?;
    elapsed_note("phase2", start);

    let (final_retained, final_fraction) = retained_mi(&c2, m_r)?;
    let traced = trace2
        .steps
        .last()
        .map(|s| s.retained_mi)
        .or_else(|| trace1.steps.last().map(|s| s.retained_mi))
        .unwrap_or(trace1.total_mi);
    let telescoping_error = (final_retained.value() - traced.value()).abs();
    if telescoping_error > TELESCOPE_TOL {
        return Err(CliError::Consistency(format!(
            "merge trace reports {} nats retained, recomputation gives {} nats",
            traced.value(),
            final_retained.value()
        )));
    }

    let (p1_retained, p1_fraction) = retained_mi(&c1, m_r)?;
    let summary = ClusteringSummary {
        n_areas: n,
        n_k1,
        n_k2,
        tau,
        phase1: PhaseSummary {
            merges: trace1.steps.len(),
            clusters_out: c1.n_clusters(),
            edge_evaluations: trace1.edge_evaluations,
            retained_mi: p1_retained.in_base(base),
            retained_fraction: p1_fraction,
        },
        phase2: PhaseSummary {
            merges: trace2.steps.len(),
            clusters_out: c2.n_clusters(),
            edge_evaluations: trace2.edge_evaluations,
            retained_mi: final_retained.in_base(base),
            retained_fraction: final_fraction,
        },
        telescoping_error,
    };
    Ok(ClusterArtifacts {
        clustering: c2,
        trace1,
        trace2,
        summary,
    })
}

fn write_trace(
    path: &std::path::Path,
    trace: &MergeTrace,
    area_ids: &[String],
    base: LogBase,
) -> Result<()> {
    let rows: Vec<String> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            format!(
                "{},{},{},{},{},{}",
                i + 1,
                area_ids[s.rep_a],
                area_ids[s.rep_b],
                io::fmt_f64(s.diversity.in_base(base)),
                s.clusters_remaining,
                io::fmt_f64(s.retained_mi.in_base(base))
            )
        })
        .collect();
    io::write_csv(
        path,
        "step,area_a,area_b,diversity,clusters_remaining,retained_mi",
        &rows,
    )
}

fn write_interpretation(
    cfg: &RunConfig,
    t: &TrafficMatrix,
    m_r: &JointModel,
    clustering: &Clustering,
) -> Result<InterpretationSummary> {
    let k_clusters = clustering.n_clusters();
    let svc_sigs: Vec<_> = (0..k_clusters)
        .map(|k| significance_services(clustering, k))
        .collect::<std::result::Result<_, _>>()?;

    let rows: Vec<String> = svc_sigs
        .iter()
        .flat_map(|sig| {
            let values = &sig.values;
            let cluster = sig.cluster;
            m_r.service_ids()
                .iter()
                .zip(values)
                .map(move |(id, v)| format!("{cluster},{id},{}", io::fmt_f64(*v)))
        })
        .collect();
    io::write_csv(
        &cfg.out_dir.join("significance_services.csv"),
        "cluster,service_id,value",
        &rows,
    )?;

    let mut notions = Vec::new();
    let mut averaged: Vec<IncidenceMatrix> = Vec::new();
    let mut names = std::collections::HashSet::new();
    for path in &cfg.demographics {
        let name = io::notion_name(path);
        if !names.insert(name.clone()) {
            return Err(CliError::Config(format!(
                "duplicate demographics notion name {name:?}; rename one file"
            )));
        }
        let da: DemographicsAssignment =
            io::load_demographics(path, t.area_ids(), m_r.area_ids())?;
        let demo_rows = demo_conditional(clustering, &da, m_r, cfg.weighting)?;

        let mut sig_rows = Vec::new();
        let mut per_cluster = Vec::new();
        for k in 0..k_clusters {
            let sig = significance_demographics(&demo_rows, k)?;
            for (level, v) in da.labels().iter().zip(&sig.values) {
                sig_rows.push(format!("{k},{level},{}", io::fmt_f64(*v)));
            }
            per_cluster.push(incidence(&sig, &svc_sigs[k]));
        }
        io::write_csv(
            &cfg.out_dir.join(format!("significance_demographics_{name}.csv")),
            "cluster,level,value",
            &sig_rows,
        )?;

        let avg = incidence_avg(&per_cluster)?;
        let mut inc_rows = Vec::new();
        for level in 0..avg.n_levels() {
            for (j, id) in m_r.service_ids().iter().enumerate() {
                inc_rows.push(format!(
                    "{},{},{}",
                    da.labels()[level],
                    id,
                    io::fmt_f64(avg.get(level, j))
                ));
            }
        }
        let inc_path = cfg.out_dir.join(format!("incidence_{name}.csv"));
        io::write_csv(&inc_path, "level,service_id,value", &inc_rows)?;

        notions.push(NotionSummary {
            name,
            path: path.display().to_string(),
            n_levels: da.n_levels(),
        });
        averaged.push(avg);
    }

    let coords = service_coordinates(&averaged)?;
    let header = std::iter::once("service_id".to_string())
        .chain(notions.iter().map(|n| n.name.clone()))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = (0..coords.n_services)
        .map(|j| {
            let mut cells = vec![m_r.service_ids()[j].clone()];
            cells.extend(coords.coords.iter().map(|per| io::fmt_f64(per[j])));
            cells.join(",")
        })
        .collect();
    io::write_csv(&cfg.out_dir.join("service_coordinates.csv"), &header, &rows)?;

    Ok(InterpretationSummary {
        weighting: weighting_string(cfg.weighting).to_string(),
        notions,
    })
}

/// Runs the configured stages and writes every output file, returning the
/// manifest that was written.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    if cfg.stage >= Stage::Cluster && cfg.adjacency.is_none() {
        return Err(CliError::Config(
            "clustering requires --adjacency".to_string(),
        ));
    }
    if cfg.stage >= Stage::Interpret && cfg.demographics.is_empty() {
        return Err(CliError::Config(
            "interpretation requires at least one --demographics file".to_string(),
        ));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| crate::error::io_err(&cfg.out_dir, e))?;

    let mut warnings = Vec::new();

    let start = Instant::now();
    let t = io::load_traffic(&cfg.traffic)?;
    let graph = cfg
        .adjacency
        .as_ref()
        .map(|p| io::load_adjacency(p, t.area_ids()))
        .transpose()?;
    elapsed_note("load", start);

    let start = Instant::now();
    let m_full = build_joint(&t)?;
    if !m_full.excluded_areas().is_empty() {
        warnings.push(format!(
            "{} areas had no traffic and were excluded from the model",
            m_full.excluded_areas().len()
        ));
    }
    let full_mi = mutual_information(&m_full)?;
    let area_entropy = entropy(m_full.area_weights())?;
    let service_entropy = entropy(m_full.service_marginal())?;

    let k_max = cfg
        .k_max
        .unwrap_or(t.n_services())
        .min(t.n_services())
        .max(1);
    let curve = mi_topk_curve(&t, k_max)?;
    let rows: Vec<String> = curve
        .ks
        .iter()
        .zip(&curve.values)
        .map(|(k, v)| format!("{k},{}", io::fmt_f64(v.in_base(cfg.log_base))))
        .collect();
    io::write_csv(&cfg.out_dir.join("mi_topk.csv"), "k,mi", &rows)?;
    elapsed_note("information", start);

    let information = InformationSummary {
        full_mi: full_mi.in_base(cfg.log_base),
        area_entropy: area_entropy.in_base(cfg.log_base),
        service_entropy: service_entropy.in_base(cfg.log_base),
        top_k_max: k_max,
    };

    let mut manifest = Manifest {
        config: ConfigEcho {
            traffic: cfg.traffic.display().to_string(),
            adjacency: cfg.adjacency.as_ref().map(|p| p.display().to_string()),
            demographics: cfg.demographics.iter().map(|p| p.display().to_string()).collect(),
            stage: cfg.stage.name().to_string(),
            rule: rule_string(cfg.rule),
            n_k1: cfg.n_k1,
            n_k2: cfg.n_k2,
            k_max: cfg.k_max,
            log_base: cfg.log_base.to_string(),
            weighting: weighting_string(cfg.weighting).to_string(),
            seed: cfg.seed,
        },
        input: InputSummary {
            n_areas: t.n_areas(),
            n_services: t.n_services(),
            total_volume: m_full.total_volume(),
            excluded_areas: m_full.excluded_areas().to_vec(),
            n_edges: graph.as_ref().map(|g| g.n_edges()),
        },
        information,
        informative: None,
        clustering: None,
        interpretation: None,
        warnings: Vec::new(),
    };

    if cfg.stage >= Stage::Informative {
        let start = Instant::now();
        let ch = channel_from_traffic(&t)?;
        let cap = blahut_arimoto(&ch, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        if cap.capacity.value() < NIL_CAPACITY {
            warnings.push(
                "channel capacity is near zero: service usage is spatially homogeneous \
                 and diversity is nil"
                    .to_string(),
            );
        }
        let set = select_informative(&cap, cfg.rule)?;
        elapsed_note("capacity", start);

        let rows: Vec<String> = set
            .ranked
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{}",
                    r.rank,
                    ch.service_ids()[r.channel_index],
                    io::fmt_f64(r.weight),
                    r.rank <= set.cut_index
                )
            })
            .collect();
        io::write_csv(
            &cfg.out_dir.join("ba_weights.csv"),
            "rank,service_id,weight,selected",
            &rows,
        )?;

        let subset = source_subset(&ch, set.subset.indices())?;
        let t_r = t.select_services(&subset)?;
        let m_r = build_joint(&t_r)?;
        if !m_r.excluded_areas().is_empty() {
            warnings.push(format!(
                "restriction to the informative subset left {} areas with no traffic",
                m_r.excluded_areas().len()
            ));
        }
        let restricted_mi = mutual_information(&m_r)?;
        let selected_services: Vec<String> = subset
            .indices()
            .iter()
            .map(|&j| t.service_ids()[j].clone())
            .collect();
        manifest.informative = Some(InformativeSummary {
            capacity: cap.capacity.in_base(cfg.log_base),
            ba_iterations: cap.iterations,
            ba_converged: cap.converged,
            ba_final_delta: cap.final_delta,
            dropped_services: ch.dropped_services().to_vec(),
            selected_services,
            cut_index: set.cut_index,
            threshold: set.threshold,
            restricted_mi: restricted_mi.in_base(cfg.log_base),
            restricted_excluded_areas: m_r.excluded_areas().to_vec(),
        });

        if cfg.stage >= Stage::Cluster {
            let g_full = graph.as_ref().expect("adjacency presence checked above");
            let arts = run_clustering(&t, &m_r, g_full, cfg.n_k1, cfg.n_k2, cfg.log_base)?;
            write_trace(
                &cfg.out_dir.join("phase1_trace.csv"),
                &arts.trace1,
                m_r.area_ids(),
                cfg.log_base,
            )?;
            write_trace(
                &cfg.out_dir.join("phase2_trace.csv"),
                &arts.trace2,
                m_r.area_ids(),
                cfg.log_base,
            )?;
            let rows: Vec<String> = m_r
                .area_ids()
                .iter()
                .zip(arts.clustering.assignment())
                .map(|(id, k)| format!("{id},{k}"))
                .collect();
            io::write_csv(&cfg.out_dir.join("assignment.csv"), "area_id,cluster", &rows)?;
            manifest.clustering = Some(arts.summary);

            if cfg.stage >= Stage::Interpret {
                let start = Instant::now();
                manifest.interpretation =
                    Some(write_interpretation(cfg, &t, &m_r, &arts.clustering)?);
                elapsed_note("interpretation", start);
            }
        }
    }

    manifest.warnings = warnings;
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Consistency(format!("manifest serialization failed: {e}")))?;
    let path = cfg.out_dir.join("manifest.json");
    std::fs::write(&path, json + "\n").map_err(|e| crate::error::io_err(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth, write_synth, SynthSpec, Topology, VolumeLaw};

    fn write_instance(dir: &std::path::Path) {
        let spec = SynthSpec {
            topology: Topology::Grid {
                width: 6,
                height: 4,
            },
            block_dists: vec![
                vec![0.6, 0.2, 0.1, 0.1],
                vec![0.1, 0.1, 0.2, 0.6],
            ],
            volume_law: VolumeLaw::Constant(10.0),
            noise: 0.05,
        };
        let out = synth(&spec, 11).unwrap();
        write_synth(dir, &out).unwrap();
    }

    fn config(dir: &std::path::Path, out: &std::path::Path) -> RunConfig {
        RunConfig {
            traffic: dir.join("traffic.csv"),
            adjacency: Some(dir.join("adjacency.csv")),
            demographics: vec![dir.join("demographics.csv")],
            stage: Stage::Interpret,
            rule: SelectionRule::TopN(4),
            n_k1: Some(4),
            n_k2: Some(2),
            k_max: None,
            log_base: LogBase::E,
            weighting: DemoWeighting::Traffic,
            seed: 0,
            out_dir: out.to_path_buf(),
        }
    }

    #[test]
    fn full_run_writes_all_outputs() {
        let dir = tempfile::tempdir().unwrap();
        write_instance(dir.path());
        let out = dir.path().join("out");
        let manifest = run_pipeline(&config(dir.path(), &out)).unwrap();

        for file in [
            "mi_topk.csv",
            "ba_weights.csv",
            "phase1_trace.csv",
            "phase2_trace.csv",
            "assignment.csv",
            "significance_services.csv",
            "significance_demographics_demographics.csv",
            "incidence_demographics.csv",
            "service_coordinates.csv",
            "manifest.json",
        ] {
            assert!(out.join(file).exists(), "{file} missing");
        }
        let clustering = manifest.clustering.unwrap();
        assert_eq!(clustering.phase2.clusters_out, 2);
        assert!(clustering.telescoping_error <= TELESCOPE_TOL);
        let info = manifest.informative.unwrap();
        assert!(info.ba_converged);
        assert_eq!(manifest.interpretation.unwrap().notions.len(), 1);
    }

    #[test]
    fn identical_configs_write_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        write_instance(dir.path());
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let mut cfg = config(dir.path(), &out_a);
        run_pipeline(&cfg).unwrap();
        cfg.out_dir = out_b.clone();
        run_pipeline(&cfg).unwrap();

        for file in ["mi_topk.csv", "ba_weights.csv", "assignment.csv", "phase1_trace.csv"] {
            let a = std::fs::read(out_a.join(file)).unwrap();
            let b = std::fs::read(out_b.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between runs");
        }
        let a = String::from_utf8(std::fs::read(out_a.join("manifest.json")).unwrap()).unwrap();
        let b = String::from_utf8(std::fs::read(out_b.join("manifest.json")).unwrap()).unwrap();
        let fix = |s: &str| s.replace("/a\"", "/x\"").replace("/a/", "/x/");
        let fix_b = |s: &str| s.replace("/b\"", "/x\"").replace("/b/", "/x/");
        assert_eq!(fix(&a), fix_b(&b));
    }

    #[test]
    fn mi_stage_stops_before_capacity() {
        let dir = tempfile::tempdir().unwrap();
        write_instance(dir.path());
        let out = dir.path().join("out");
        let mut cfg = config(dir.path(), &out);
        cfg.stage = Stage::Mi;
        cfg.adjacency = None;
        cfg.demographics.clear();
        let manifest = run_pipeline(&cfg).unwrap();
        assert!(manifest.informative.is_none());
        assert!(manifest.clustering.is_none());
        assert!(out.join("mi_topk.csv").exists());
        assert!(!out.join("ba_weights.csv").exists());
    }

    #[test]
    fn cluster_stage_requires_adjacency() {
        let dir = tempfile::tempdir().unwrap();
        write_instance(dir.path());
        let mut cfg = config(dir.path(), &dir.path().join("out"));
        cfg.adjacency = None;
        cfg.stage = Stage::Cluster;
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rule_strings_round_trip() {
        for rule in [
            SelectionRule::Gap,
            SelectionRule::Fixed(0.125),
            SelectionRule::TopN(7),
        ] {
            assert_eq!(parse_rule(&rule_string(rule)).unwrap(), rule);
        }
        assert!(parse_rule("best").is_err());
        assert!(parse_rule("theta=abc").is_err());
        assert!(parse_log_base("e").is_ok());
        assert!(parse_log_base("3").is_err());
    }
}
