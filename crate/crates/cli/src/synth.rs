//! Planted synthetic instances for validation and benchmarking.
//!
//! Areas are laid out on a grid or as random points in the unit square;
//! blocks are vertical strips across the layout, each with its own service
//! usage distribution. Every area mixes its block distribution with the
//! uniform one, `(1 - noise) * block + noise / n_services`, so ground truth
//! stays exact while conditionals need not be. All randomness flows from a
//! single ChaCha8 stream seeded by one u64; the draw order is points first
//! (planar only), then volumes (log-normal only), so equal seeds give
//! byte-equal instances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use geodiv_core::cluster::AdjacencyGraph;
use geodiv_core::model::TrafficMatrix;
use geodiv_core::NORM_TOL;

use crate::error::{CliError, Result};

/// Spatial layout of the synthetic areas.
#[derive(Debug, Clone)]
pub enum Topology {
    /// `width * height` cells with 4-neighbour adjacency, row-major order.
    Grid { width: usize, height: usize },
    /// Uniform random points in the unit square joined by their Gabriel
    /// graph (an edge survives when the disc on it holds no third point),
    /// which is planar and connected.
    Planar { nodes: usize },
}

/// Per-area total volume.
#[derive(Debug, Clone)]
pub enum VolumeLaw {
    Constant(f64),
    /// `exp(mu + sigma * z)` with standard normal `z`.
    LogNormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub topology: Topology,
    /// One service distribution per block; blocks become vertical strips
    /// in layout order. All rows must share a length and sum to one.
    pub block_dists: Vec<Vec<f64>>,
    pub volume_law: VolumeLaw,
    /// Mixing weight toward the uniform distribution, in [0, 1].
    pub noise: f64,
}

pub struct SynthOutput {
    pub traffic: TrafficMatrix,
    pub graph: AdjacencyGraph,
    /// 1-based demographic level per area; equals block index + 1.
    pub demographics: Vec<usize>,
    /// 0-based planted block per area.
    pub truth: Vec<usize>,
    /// Point coordinates for planar layouts.
    pub points: Option<Vec<(f64, f64)>>,
}

fn validate(spec: &SynthSpec) -> Result<(usize, usize)> {
    let n_areas = match spec.topology {
        Topology::Grid { width, height } => {
            if width == 0 || height == 0 {
                return Err(CliError::Config("grid dimensions must be positive".into()));
            }
            width * height
        }
        Topology::Planar { nodes } => {
            if nodes < 2 {
                return Err(CliError::Config("planar layouts need at least 2 nodes".into()));
            }
            nodes
        }
    };
    if spec.block_dists.is_empty() {
        return Err(CliError::Config("at least one block distribution is required".into()));
    }
    let n_services = spec.block_dists[0].len();
    if n_services == 0 {
        return Err(CliError::Config("block distributions must not be empty".into()));
    }
    for (b, dist) in spec.block_dists.iter().enumerate() {
        if dist.len() != n_services {
            return Err(CliError::Config(format!(
                "block {b} has {} services, block 0 has {n_services}",
                dist.len()
            )));
        }
        let mut sum = 0.0;
        for &x in dist {
            if !x.is_finite() || x < 0.0 {
                return Err(CliError::Config(format!("block {b} has invalid probability {x}")));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(CliError::Config(format!(
                "block {b} distribution sums to {sum}, expected 1"
            )));
        }
    }
    if spec.block_dists.len() > n_areas {
        return Err(CliError::Config(format!(
            "{} blocks cannot tile {n_areas} areas",
            spec.block_dists.len()
        )));
    }
    if !spec.noise.is_finite() || !(0.0..=1.0).contains(&spec.noise) {
        return Err(CliError::Config(format!("noise {} outside [0, 1]", spec.noise)));
    }
    match spec.volume_law {
        VolumeLaw::Constant(v) => {
            if !v.is_finite() || v <= 0.0 {
                return Err(CliError::Config(format!("constant volume {v} must be positive")));
            }
        }
        VolumeLaw::LogNormal { mu, sigma } => {
            if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
                return Err(CliError::Config(format!(
                    "log-normal parameters mu={mu} sigma={sigma} invalid"
                )));
            }
        }
    }
    Ok((n_areas, n_services))
}

/// Gabriel graph over points in general position: keep edge (i, j) when no
/// third point lies strictly inside the disc with ij as diameter. Witnesses
/// are searched through a spatial hash in rings around the midpoint, so
/// non-edges are rejected almost immediately.
fn gabriel_edges(points: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let n = points.len();
    let cell = (1.0 / (n as f64).sqrt()).max(1e-9);
    let key = |x: f64, y: f64| ((x / cell).floor() as i64, (y / cell).floor() as i64);
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        buckets.entry(key(x, y)).or_default().push(i);
    }
    let d2 = |a: (f64, f64), b: (f64, f64)| {
        let dx = a.0 - b.0;
        let dy = a.1 - b.1;
        dx * dx + dy * dy
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let c = (
                0.5 * (points[i].0 + points[j].0),
                0.5 * (points[i].1 + points[j].1),
            );
            let r2 = 0.25 * d2(points[i], points[j]);
            let r = r2.sqrt();
            let (cx, cy) = key(c.0, c.1);
            let reach = (r / cell).ceil() as i64 + 1;
            let mut witness = false;
            'rings: for ring in 0..=reach {
                for gx in (cx - ring)..=(cx + ring) {
                    for gy in (cy - ring)..=(cy + ring) {
                        if (gx - cx).abs() != ring && (gy - cy).abs() != ring {
                            continue;
                        }
                        if let Some(ids) = buckets.get(&(gx, gy)) {
                            for &w in ids {
                                if w != i && w != j && d2(points[w], c) < r2 {
                                    witness = true;
                                    break 'rings;
                                }
                            }
                        }
                    }
                }
                if ring as f64 * cell > r + cell {
                    break;
                }
            }
            if !witness {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Block of an area given its position rank along the x axis: strip
/// boundaries fall at equal rank fractions.
fn strip_block(rank: usize, n: usize, n_blocks: usize) -> usize {
    rank * n_blocks / n
}

pub fn synth(spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    let (n_areas, n_services) = validate(spec)?;
    let n_blocks = spec.block_dists.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (area_ids, graph, truth, points) = match spec.topology {
        Topology::Grid { width, height } => {
            let ids: Vec<String> = (0..height)
                .flat_map(|r| (0..width).map(move |c| format!("r{r}c{c}")))
                .collect();
            let graph = AdjacencyGraph::grid(width, height)?;
            let truth: Vec<usize> = (0..height)
                .flat_map(|_| (0..width).map(|c| strip_block(c, width, n_blocks)))
                .collect();
            (ids, graph, truth, None)
        }
        Topology::Planar { nodes } => {
            let pts: Vec<(f64, f64)> = (0..nodes)
                .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            let ids: Vec<String> = (0..nodes).map(|i| format!("p{i}")).collect();
            let graph = AdjacencyGraph::new(nodes, gabriel_edges(&pts))?;
            let mut order: Vec<usize> = (0..nodes).collect();
            order.sort_by(|&a, &b| {
                pts[a].0.partial_cmp(&pts[b].0).unwrap().then(a.cmp(&b))
            });
            let mut truth = vec![0usize; nodes];
            for (rank, &i) in order.iter().enumerate() {
                truth[i] = strip_block(rank, nodes, n_blocks);
            }
            (ids, graph, truth, Some(pts))
        }
    };

    let totals: Vec<f64> = match spec.volume_law {
        VolumeLaw::Constant(v) => vec![v; n_areas],
        VolumeLaw::LogNormal { mu, sigma } => {
            let law = LogNormal::new(mu, sigma)
                .map_err(|e| CliError::Config(format!("log-normal parameters invalid: {e}")))?;
            (0..n_areas).map(|_| law.sample(&mut rng)).collect()
        }
    };

    let uniform = spec.noise / n_services as f64;
    let service_ids: Vec<String> = (0..n_services).map(|j| format!("s{j}")).collect();
    let mut triplets = Vec::with_capacity(n_areas * n_services);
    for i in 0..n_areas {
        let dist = &spec.block_dists[truth[i]];
        for j in 0..n_services {
            let share = (1.0 - spec.noise) * dist[j] + uniform;
            triplets.push((area_ids[i].clone(), service_ids[j].clone(), totals[i] * share));
        }
    }
    let traffic = TrafficMatrix::from_triplets(triplets)?;
    let demographics: Vec<usize> = truth.iter().map(|&b| b + 1).collect();
    Ok(SynthOutput {
        traffic,
        graph,
        demographics,
        truth,
        points,
    })
}

/// Writes an instance as the four standard files: traffic.csv,
/// adjacency.csv, demographics.csv, ground_truth.csv.
pub fn write_synth(out_dir: &std::path::Path, out: &SynthOutput) -> Result<()> {
    use crate::io::{write_csv, ADJACENCY_HEADER, DEMOGRAPHICS_HEADER, TRAFFIC_HEADER};
    let t = &out.traffic;
    let mut rows = Vec::with_capacity(t.n_areas() * t.n_services());
    for i in 0..t.n_areas() {
        for j in 0..t.n_services() {
            rows.push(format!(
                "{},{},{}",
                t.area_ids()[i],
                t.service_ids()[j],
                crate::io::fmt_f64(t.volume(i, j))
            ));
        }
    }
    write_csv(&out_dir.join("traffic.csv"), TRAFFIC_HEADER, &rows)?;

    let rows: Vec<String> = out
        .graph
        .edges()
        .iter()
        .map(|&(a, b)| format!("{},{}", t.area_ids()[a], t.area_ids()[b]))
        .collect();
    write_csv(&out_dir.join("adjacency.csv"), ADJACENCY_HEADER, &rows)?;

    let rows: Vec<String> = out
        .demographics
        .iter()
        .enumerate()
        .map(|(i, level)| format!("{},{level}", t.area_ids()[i]))
        .collect();
    write_csv(&out_dir.join("demographics.csv"), DEMOGRAPHICS_HEADER, &rows)?;

    let rows: Vec<String> = out
        .truth
        .iter()
        .enumerate()
        .map(|(i, block)| format!("{},{block}", t.area_ids()[i]))
        .collect();
    write_csv(&out_dir.join("ground_truth.csv"), "area_id,block", &rows)
}
