//! Traffic matrices and the joint probability model derived from them.
//!
//! The raw input is a matrix of traffic volumes `t[i][j]` for area `i` and
//! service `j`. From it we build a joint model over (area, service):
//!
//! - area weights `p_C(i) = t_i / T` where `t_i` is the area's total volume,
//! - per-area service distributions `rho_i(j) = t[i][j] / t_i`,
//! - the service marginal `p_S(j) = sum_i p_C(i) * rho_i(j)`.
//!
//! Areas with zero total traffic carry no usable signal and are dropped at
//! model construction; their ids are recorded on the model so reports can
//! surface the exclusion instead of silently shrinking the universe.
//!
//! Restriction to a service subset re-slices the underlying volumes and
//! rebuilds, which keeps `restrict` bit-identical to "slice the matrix, then
//! build" and makes the renormalized conditionals exact by construction.

use thiserror::Error;

use crate::math::comp_sum;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("traffic matrix has no strictly positive volume")]
    AllZeroTraffic,
    #[error("expected {expected} volumes for {areas} areas x {services} services, got {got}")]
    DimensionMismatch {
        areas: usize,
        services: usize,
        expected: usize,
        got: usize,
    },
    #[error("duplicate area id {0:?}")]
    DuplicateAreaId(String),
    #[error("duplicate service id {0:?}")]
    DuplicateServiceId(String),
    #[error("negative volume {value} for area {area:?}, service {service:?}")]
    NegativeVolume {
        area: String,
        service: String,
        value: f64,
    },
    #[error("non-finite volume for area {area:?}, service {service:?}")]
    NonFiniteVolume { area: String, service: String },
    #[error("restriction leaves no positive traffic")]
    EmptyRestriction,
    #[error("invalid service subset: {0}")]
    InvalidSubset(String),
    #[error("unknown service id {0:?}")]
    UnknownService(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Non-negative traffic volumes for a set of areas and services.
///
/// Row-major dense storage; service counts are small (at most a few hundred)
/// while area counts can reach ~1e5, so rows stay short.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    area_ids: Vec<String>,
    service_ids: Vec<String>,
    volumes: Vec<f64>,
}

impl TrafficMatrix {
    /// Builds a matrix from row-major volumes.
    ///
    /// # Examples
    ///
    /// ```
    /// use geodiv_core::model::TrafficMatrix;
    ///
    /// let t = TrafficMatrix::new(
    ///     vec!["a".into(), "b".into()],
    ///     vec!["s1".into(), "s2".into()],
    ///     vec![3.0, 1.0, 1.0, 3.0],
    /// )
    /// .unwrap();
    /// assert_eq!(t.n_areas(), 2);
    /// assert_eq!(t.n_services(), 2);
    /// ```
    pub fn new(
        area_ids: Vec<String>,
        service_ids: Vec<String>,
        volumes: Vec<f64>,
    ) -> Result<Self> {
        let expected = area_ids.len() * service_ids.len();
        if volumes.len() != expected {
            return Err(ModelError::DimensionMismatch {
                areas: area_ids.len(),
                services: service_ids.len(),
                expected,
                got: volumes.len(),
            });
        }
        check_unique(&area_ids, |id| ModelError::DuplicateAreaId(id))?;
        check_unique(&service_ids, |id| ModelError::DuplicateServiceId(id))?;
        let n_s = service_ids.len();
        let mut any_positive = false;
        for (idx, &v) in volumes.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteVolume {
                    area: area_ids[idx / n_s].clone(),
                    service: service_ids[idx % n_s].clone(),
                });
            }
            if v < 0.0 {
                return Err(ModelError::NegativeVolume {
                    area: area_ids[idx / n_s].clone(),
                    service: service_ids[idx % n_s].clone(),
                    value: v,
                });
            }
            any_positive |= v > 0.0;
        }
        if !any_positive {
            return Err(ModelError::AllZeroTraffic);
        }
        Ok(Self {
            area_ids,
            service_ids,
            volumes,
        })
    }

    /// Builds a matrix from sparse `(area_id, service_id, volume)` triplets.
    ///
    /// Ids take positions in first-appearance order; repeated pairs have
    /// their volumes summed; absent pairs are zero.
    pub fn from_triplets<I>(triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut area_ids: Vec<String> = Vec::new();
        let mut service_ids: Vec<String> = Vec::new();
        let mut area_pos = std::collections::HashMap::new();
        let mut service_pos = std::collections::HashMap::new();
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (area, service, volume) in triplets {
            if !volume.is_finite() {
                return Err(ModelError::NonFiniteVolume { area, service });
            }
            if volume < 0.0 {
                return Err(ModelError::NegativeVolume {
                    area,
                    service,
                    value: volume,
                });
            }
            let ai = *area_pos.entry(area.clone()).or_insert_with(|| {
                area_ids.push(area);
                area_ids.len() - 1
            });
            let si = *service_pos.entry(service.clone()).or_insert_with(|| {
                service_ids.push(service);
                service_ids.len() - 1
            });
            entries.push((ai, si, volume));
        }
        let n_s = service_ids.len();
        let mut volumes = vec![0.0; area_ids.len() * n_s];
        for (ai, si, v) in entries {
            volumes[ai * n_s + si] += v;
        }
        Self::new(area_ids, service_ids, volumes)
    }

    pub fn n_areas(&self) -> usize {
        self.area_ids.len()
    }

    pub fn n_services(&self) -> usize {
        self.service_ids.len()
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    pub fn service_ids(&self) -> &[String] {
        &self.service_ids
    }

    pub fn volume(&self, area: usize, service: usize) -> f64 {
        self.volumes[area * self.service_ids.len() + service]
    }

    pub fn row(&self, area: usize) -> &[f64] {
        let n_s = self.service_ids.len();
        &self.volumes[area * n_s..(area + 1) * n_s]
    }

    /// Total volume of one service across all areas.
    pub fn service_total(&self, service: usize) -> f64 {
        comp_sum((0..self.n_areas()).map(|i| self.volume(i, service)))
    }

    /// Keeps only the columns named by `subset`, in subset order.
    ///
    /// All rows survive even if they become all-zero; building a joint model
    /// from the result is what drops them.
    pub fn select_services(&self, subset: &ServiceSubset) -> Result<Self> {
        subset.validate(self.n_services())?;
        let service_ids: Vec<String> = subset
            .indices()
            .iter()
            .map(|&j| self.service_ids[j].clone())
            .collect();
        let mut volumes = Vec::with_capacity(self.n_areas() * subset.len());
        for i in 0..self.n_areas() {
            for &j in subset.indices() {
                volumes.push(self.volume(i, j));
            }
        }
        Self::new(self.area_ids.clone(), service_ids, volumes)
            .map_err(|e| match e {
                ModelError::AllZeroTraffic => ModelError::EmptyRestriction,
                other => other,
            })
    }

    /// Positions of the given service ids, in the given order.
    pub fn service_positions(&self, ids: &[String]) -> Result<ServiceSubset> {
        let mut indices = Vec::with_capacity(ids.len());
        for id in ids {
            match self.service_ids.iter().position(|s| s == id) {
                Some(j) => indices.push(j),
                None => return Err(ModelError::UnknownService(id.clone())),
            }
        }
        ServiceSubset::new(indices)
    }
}

fn check_unique<F>(ids: &[String], err: F) -> Result<()>
where
    F: Fn(String) -> ModelError,
{
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(err(id.clone()));
        }
    }
    Ok(())
}

/// Ordered subset of service positions. Non-empty, distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceSubset {
    indices: Vec<usize>,
}

impl ServiceSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(ModelError::InvalidSubset("subset is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &j in &indices {
            if !seen.insert(j) {
                return Err(ModelError::InvalidSubset(format!(
                    "duplicate index {j}"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// The full set `0..n` in natural order.
    pub fn full(n: usize) -> Result<Self> {
        Self::new((0..n).collect())
    }

    fn validate(&self, n_services: usize) -> Result<()> {
        for &j in &self.indices {
            if j >= n_services {
                return Err(ModelError::InvalidSubset(format!(
                    "index {j} out of range for {n_services} services"
                )));
            }
        }
        Ok(())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Joint probability model over (area, service).
///
/// Holds the retained rows of the source matrix so restriction can re-slice
/// and rebuild instead of renormalizing already-rounded conditionals.
#[derive(Debug, Clone)]
pub struct JointModel {
    traffic: TrafficMatrix,
    area_totals: Vec<f64>,
    area_weights: Vec<f64>,
    conditionals: Vec<f64>,
    service_marginal: Vec<f64>,
    total_volume: f64,
    excluded_areas: Vec<String>,
}

/// Builds the joint model, dropping zero-traffic areas.
///
/// # Examples
///
/// ```
/// use geodiv_core::model::{build_joint, TrafficMatrix};
///
/// let t = TrafficMatrix::new(
///     vec!["a".into(), "b".into()],
///     vec!["s1".into(), "s2".into()],
///     vec![3.0, 1.0, 1.0, 3.0],
/// )
/// .unwrap();
/// let m = build_joint(&t).unwrap();
/// assert_eq!(m.area_weights(), &[0.5, 0.5]);
/// assert_eq!(m.conditional_row(0), &[0.75, 0.25]);
/// assert_eq!(m.service_marginal(), &[0.5, 0.5]);
/// ```
pub fn build_joint(t: &TrafficMatrix) -> Result<JointModel> {
    let n_s = t.n_services();
    let mut retained: Vec<usize> = Vec::with_capacity(t.n_areas());
    let mut excluded_areas = Vec::new();
    let mut area_totals = Vec::new();
    for i in 0..t.n_areas() {
        let total = comp_sum(t.row(i).iter().copied());
        if total > 0.0 {
            retained.push(i);
            area_totals.push(total);
        } else {
            excluded_areas.push(t.area_ids()[i].clone());
        }
    }
    if retained.is_empty() {
        return Err(ModelError::AllZeroTraffic);
    }

    let total_volume = comp_sum(area_totals.iter().copied());
    let area_weights: Vec<f64> = area_totals.iter().map(|&ti| ti / total_volume).collect();

    let mut volumes = Vec::with_capacity(retained.len() * n_s);
    let mut conditionals = Vec::with_capacity(retained.len() * n_s);
    for (pos, &i) in retained.iter().enumerate() {
        let ti = area_totals[pos];
        for &v in t.row(i) {
            volumes.push(v);
            conditionals.push(v / ti);
        }
    }

    let service_marginal: Vec<f64> = (0..n_s)
        .map(|j| {
            comp_sum(
                (0..retained.len()).map(|pos| area_weights[pos] * conditionals[pos * n_s + j]),
            )
        })
        .collect();

    let area_ids: Vec<String> = retained
        .iter()
        .map(|&i| t.area_ids()[i].clone())
        .collect();
    let traffic = TrafficMatrix::new(area_ids, t.service_ids().to_vec(), volumes)?;

    Ok(JointModel {
        traffic,
        area_totals,
        area_weights,
        conditionals,
        service_marginal,
        total_volume,
        excluded_areas,
    })
}

impl JointModel {
    pub fn n_areas(&self) -> usize {
        self.traffic.n_areas()
    }

    pub fn n_services(&self) -> usize {
        self.traffic.n_services()
    }

    pub fn area_ids(&self) -> &[String] {
        self.traffic.area_ids()
    }

    pub fn service_ids(&self) -> &[String] {
        self.traffic.service_ids()
    }

    /// `p_C`: probability a uniformly drawn unit of traffic comes from each area.
    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    /// `rho_i`: service distribution of one area.
    pub fn conditional_row(&self, area: usize) -> &[f64] {
        let n_s = self.n_services();
        &self.conditionals[area * n_s..(area + 1) * n_s]
    }

    /// `p_S`: traffic-weighted mixture of the per-area distributions.
    pub fn service_marginal(&self) -> &[f64] {
        &self.service_marginal
    }

    pub fn area_total(&self, area: usize) -> f64 {
        self.area_totals[area]
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    /// Area ids dropped at construction for having zero traffic.
    pub fn excluded_areas(&self) -> &[String] {
        &self.excluded_areas
    }

    /// The retained rows of the source matrix.
    pub fn traffic(&self) -> &TrafficMatrix {
        &self.traffic
    }

    /// Restricts the model to a service subset and renormalizes.
    ///
    /// Equivalent to slicing the source matrix to those columns and building
    /// a fresh model; areas whose restricted traffic is zero are dropped and
    /// reported on the returned model.
    ///
    /// # Examples
    ///
    /// ```
    /// use geodiv_core::model::{build_joint, ServiceSubset, TrafficMatrix};
    ///
    /// let t = TrafficMatrix::new(
    ///     vec!["a".into(), "b".into()],
    ///     vec!["s1".into(), "s2".into(), "s3".into()],
    ///     vec![3.0, 1.0, 4.0, 1.0, 3.0, 4.0],
    /// )
    /// .unwrap();
    /// let m = build_joint(&t).unwrap();
    /// let r = m.restrict(&ServiceSubset::new(vec![0, 1]).unwrap()).unwrap();
    /// assert_eq!(r.area_weights(), &[0.5, 0.5]);
    /// assert_eq!(r.conditional_row(0), &[0.75, 0.25]);
    /// ```
    pub fn restrict(&self, subset: &ServiceSubset) -> Result<JointModel> {
        let sliced = self.traffic.select_services(subset)?;
        build_joint(&sliced)
    }
}
