//! What distinguishes each cluster: demographics and service signatures.
//!
//! For a clustering, each cluster induces a distribution over demographic
//! levels (traffic-weighted by default) and a distribution over services
//! (its mixture distribution). A cluster's significance vector subtracts
//! the average of the other clusters' rows, so positive entries mark levels
//! or services the cluster over-expresses relative to its peers, and every
//! vector sums to zero.
//!
//! The outer product of a cluster's demographic and service significance
//! vectors gives an incidence matrix; entry (d, j) is positive when level d
//! and service j are over-expressed together. Averaging incidence matrices
//! across clusters surfaces level-service associations that persist across
//! the partition, and projecting on the level axis reduces each service to
//! one coordinate per demographic notion.

use thiserror::Error;

use crate::cluster::Clustering;
use crate::math::comp_sum;
use crate::model::JointModel;

#[derive(Debug, Error, PartialEq)]
pub enum InterpretError {
    #[error("area {0:?} has no demographic level")]
    UnassignedArea(String),
    #[error("significance needs at least 2 clusters")]
    SingleCluster,
    #[error("cluster index {index} out of range for {clusters} clusters")]
    ClusterOutOfRange { index: usize, clusters: usize },
    #[error("need at least 2 demographic levels, got {0}")]
    TooFewLevels(usize),
    #[error("level index {level} out of range for {levels} levels")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("axis length mismatch: expected {expected}, got {got}")]
    AxisMismatch { expected: usize, got: usize },
    #[error("assignment covers {got} areas, model has {expected}")]
    CoverageMismatch { expected: usize, got: usize },
    #[error("no incidence matrices given")]
    EmptyInput,
    #[error("bin count {bins} invalid for {values} values")]
    BadBinCount { bins: usize, values: usize },
    #[error("non-finite demographic value at position {0}")]
    NonFiniteValue(usize),
}

pub type Result<T> = std::result::Result<T, InterpretError>;

/// Assignment of areas to ordered demographic levels.
///
/// Level indices are zero-based internally; `labels` carries the level
/// names in order. Areas may be unassigned; operations that need a level
/// for every clustered area report the gap instead of guessing.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicsAssignment {
    labels: Vec<String>,
    by_area: Vec<Option<usize>>,
}

impl DemographicsAssignment {
    pub fn new(labels: Vec<String>, by_area: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(InterpretError::TooFewLevels(labels.len()));
        }
        for level in by_area.iter().flatten() {
            if *level >= labels.len() {
                return Err(InterpretError::LevelOutOfRange {
                    level: *level,
                    levels: labels.len(),
                });
            }
        }
        Ok(Self { labels, by_area })
    }

    /// Equal-frequency binning of a continuous per-area value into
    /// `n_bins` ordered levels labeled "1".."n_bins". Ties rank by
    /// position, so the split is deterministic.
    pub fn from_continuous(values: &[f64], n_bins: usize) -> Result<Self> {
        if n_bins < 2 || n_bins > values.len() {
            return Err(InterpretError::BadBinCount {
                bins: n_bins,
                values: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(InterpretError::NonFiniteValue(pos));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .expect("values are finite")
                .then(a.cmp(&b))
        });
        let mut by_area = vec![None; values.len()];
        for (rank, &area) in order.iter().enumerate() {
            by_area[area] = Some(rank * n_bins / values.len());
        }
        let labels = (1..=n_bins).map(|d| d.to_string()).collect();
        Self::new(labels, by_area)
    }

    pub fn n_levels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn level_of(&self, area: usize) -> Option<usize> {
        self.by_area.get(area).copied().flatten()
    }

    pub fn n_areas(&self) -> usize {
        self.by_area.len()
    }
}

/// How per-cluster demographic distributions weight their member areas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DemoWeighting {
    /// Each area counts by its share of the cluster's traffic.
    #[default]
    Traffic,
    /// Each area counts once.
    Count,
}

/// Per-cluster distribution over demographic levels.
///
/// Row k is `p(level | cluster k)`; rows sum to one.
pub fn demo_conditional(
    c: &Clustering,
    da: &DemographicsAssignment,
    m: &JointModel,
    weighting: DemoWeighting,
) -> Result<Vec<Vec<f64>>> {
    if da.n_areas() != m.n_areas() {
        return Err(InterpretError::CoverageMismatch {
            expected: m.n_areas(),
            got: da.n_areas(),
        });
    }
    assert_eq!(
        c.assignment().len(),
        m.n_areas(),
        "clustering does not cover the model's areas"
    );
    let mut rows = Vec::with_capacity(c.n_clusters());
    for cluster in c.clusters() {
        let mut row = vec![0.0; da.n_levels()];
        let mut mass = 0.0;
        for &i in cluster.members() {
            let level = da
                .level_of(i)
                .ok_or_else(|| InterpretError::UnassignedArea(m.area_ids()[i].clone()))?;
            let w = match weighting {
                DemoWeighting::Traffic => m.area_weights()[i],
                DemoWeighting::Count => 1.0,
            };
            row[level] += w;
            mass += w;
        }
        for x in &mut row {
            *x /= mass;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Which axis a significance vector ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificanceAxis {
    Demographics,
    Services,
}

/// One cluster's deviation from the average of its peers.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceVector {
    pub cluster: usize,
    pub axis: SignificanceAxis,
    pub values: Vec<f64>,
}

fn significance_rows(rows: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if rows.len() < 2 {
        return Err(InterpretError::SingleCluster);
    }
    if k >= rows.len() {
        return Err(InterpretError::ClusterOutOfRange {
            index: k,
            clusters: rows.len(),
        });
    }
    let width = rows[0].len();
    for row in rows {
        if row.len() != width {
            return Err(InterpretError::AxisMismatch {
                expected: width,
                got: row.len(),
            });
        }
    }
    let scale = 1.0 / (rows.len() - 1) as f64;
    let values = (0..width)
        .map(|j| {
            let others = comp_sum(
                rows.iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .map(|(_, row)| row[j]),
            );
            rows[k][j] - scale * others
        })
        .collect();
    Ok(values)
}

/// Demographic significance of cluster `k` given per-cluster level
/// distributions.
///
/// # Examples
///
/// ```
/// use geodiv_core::interpret::significance_demographics;
///
/// let rows = vec![
///     vec![0.5, 0.5],
///     vec![0.1, 0.9],
///     vec![0.3, 0.7],
/// ];
/// let s = significance_demographics(&rows, 0).unwrap();
/// assert!((s.values[0] - 0.3).abs() < 1e-12);
/// assert!(s.values.iter().sum::<f64>().abs() < 1e-9);
/// ```
pub fn significance_demographics(
    rows: &[Vec<f64>],
    k: usize,
) -> Result<SignificanceVector> {
    Ok(SignificanceVector {
        cluster: k,
        axis: SignificanceAxis::Demographics,
        values: significance_rows(rows, k)?,
    })
}

/// Service significance of cluster `k`: its mixture distribution against
/// the average of the other clusters' mixtures.
pub fn significance_services(c: &Clustering, k: usize) -> Result<SignificanceVector> {
    let rows: Vec<Vec<f64>> = c.clusters().iter().map(|n| n.dist().to_vec()).collect();
    Ok(SignificanceVector {
        cluster: k,
        axis: SignificanceAxis::Services,
        values: significance_rows(&rows, k)?,
    })
}

/// Level-by-service incidence matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n_levels: usize,
    n_services: usize,
    values: Vec<f64>,
}

impl IncidenceMatrix {
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_services(&self) -> usize {
        self.n_services
    }

    pub fn get(&self, level: usize, service: usize) -> f64 {
        self.values[level * self.n_services + service]
    }

    pub fn row(&self, level: usize) -> &[f64] {
        &self.values[level * self.n_services..(level + 1) * self.n_services]
    }
}

/// Outer product of a demographic and a service significance vector.
///
/// # Examples
///
/// ```
/// use geodiv_core::interpret::{incidence, SignificanceAxis, SignificanceVector};
///
/// let demo = SignificanceVector {
///     cluster: 0,
///     axis: SignificanceAxis::Demographics,
///     values: vec![0.2, -0.2],
/// };
/// let svc = SignificanceVector {
///     cluster: 0,
///     axis: SignificanceAxis::Services,
///     values: vec![0.1, -0.1, 0.0],
/// };
/// let m = incidence(&demo, &svc);
/// assert!((m.get(0, 0) - 0.02).abs() < 1e-15);
/// assert!((m.get(1, 0) + 0.02).abs() < 1e-15);
/// assert_eq!(m.get(0, 2), 0.0);
/// ```
pub fn incidence(demo: &SignificanceVector, svc: &SignificanceVector) -> IncidenceMatrix {
    let mut values = Vec::with_capacity(demo.values.len() * svc.values.len());
    for &d in &demo.values {
        for &s in &svc.values {
            values.push(d * s);
        }
    }
    IncidenceMatrix {
        n_levels: demo.values.len(),
        n_services: svc.values.len(),
        values,
    }
}

/// Entrywise mean of incidence matrices.
pub fn incidence_avg(mats: &[IncidenceMatrix]) -> Result<IncidenceMatrix> {
    let first = mats.first().ok_or(InterpretError::EmptyInput)?;
    for m in mats {
        if m.n_levels != first.n_levels || m.n_services != first.n_services {
            return Err(InterpretError::AxisMismatch {
                expected: first.values.len(),
                got: m.values.len(),
            });
        }
    }
    let scale = 1.0 / mats.len() as f64;
    let values = (0..first.values.len())
        .map(|idx| scale * comp_sum(mats.iter().map(|m| m.values[idx])))
        .collect();
    Ok(IncidenceMatrix {
        n_levels: first.n_levels,
        n_services: first.n_services,
        values,
    })
}

/// One coordinate per service per demographic notion.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceCoordinates {
    pub n_services: usize,
    /// `coords[notion][service]`.
    pub coords: Vec<Vec<f64>>,
}

/// Projects incidence matrices onto the level axis: service j's coordinate
/// under a notion with levels 1..N_D is `(1/N_D) * sum_d d * M(d, j)`.
///
/// # Examples
///
/// ```
/// use geodiv_core::interpret::{incidence, service_coordinates, SignificanceAxis, SignificanceVector};
///
/// let demo = SignificanceVector {
///     cluster: 0,
///     axis: SignificanceAxis::Demographics,
///     values: vec![0.2, -0.2],
/// };
/// let svc = SignificanceVector {
///     cluster: 0,
///     axis: SignificanceAxis::Services,
///     values: vec![0.1, -0.1, 0.0],
/// };
/// let m = incidence(&demo, &svc);
/// let coords = service_coordinates(&[m]).unwrap();
/// assert!((coords.coords[0][0] + 0.01).abs() < 1e-15);
/// ```
pub fn service_coordinates(mats: &[IncidenceMatrix]) -> Result<ServiceCoordinates> {
    let first = mats.first().ok_or(InterpretError::EmptyInput)?;
    for m in mats {
        if m.n_services != first.n_services {
            return Err(InterpretError::AxisMismatch {
                expected: first.n_services,
                got: m.n_services,
            });
        }
    }
    let coords = mats
        .iter()
        .map(|m| {
            (0..m.n_services)
                .map(|j| {
                    comp_sum((0..m.n_levels).map(|d| (d + 1) as f64 * m.get(d, j)))
                        / m.n_levels as f64
                })
                .collect()
        })
        .collect();
    Ok(ServiceCoordinates {
        n_services: first.n_services,
        coords,
    })
}
