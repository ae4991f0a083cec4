//! Which services carry the geographic signal.
//!
//! Each service induces a distribution over areas: the share of that
//! service's traffic coming from each area. Viewing services as inputs to a
//! channel whose output is the area, the channel capacity is the largest
//! area-information any reweighting of services could extract, and the
//! capacity-achieving weights score how much each service contributes.
//! Services with weight above a cut form the informative subset; the rest
//! are near-redundant with it.
//!
//! Capacity is computed with the Blahut-Arimoto fixed-point iteration. The
//! update multiplies each weight by `exp(D_j)` where `D_j` is the KL
//! divergence of service j's area profile from the current output mixture;
//! iteration stops when `max_j D_j - sum_j p_j D_j` falls under tolerance,
//! which brackets the true capacity from both sides.

use thiserror::Error;

use crate::info::{InfoError, Nats};
use crate::math::comp_sum;
use crate::model::{build_joint, JointModel, ModelError, ServiceSubset, TrafficMatrix};
use crate::NORM_TOL;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Weights this small are numerically zero for ranking purposes.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum InformativeError {
    #[error("channel row {row} sums to {sum}, expected 1")]
    NonStochasticChannel { row: usize, sum: f64 },
    #[error("channel has no services after dropping zero-traffic columns")]
    EmptyChannel,
    #[error("gap rule needs at least 2 distinct positive weights")]
    DegenerateWeights,
    #[error("no service weight exceeds threshold {threshold}")]
    EmptySelection { threshold: f64 },
    #[error("invalid selection rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

pub type Result<T> = std::result::Result<T, InformativeError>;

/// Service-to-area channel: row j is the distribution of service j's
/// traffic over areas.
#[derive(Debug, Clone)]
pub struct Channel {
    service_ids: Vec<String>,
    area_ids: Vec<String>,
    /// Column position of each retained service in the source matrix.
    source_columns: Vec<usize>,
    rows: Vec<Vec<f64>>,
    dropped_services: Vec<String>,
}

impl Channel {
    pub fn n_services(&self) -> usize {
        self.rows.len()
    }

    pub fn n_areas(&self) -> usize {
        self.area_ids.len()
    }

    pub fn service_ids(&self) -> &[String] {
        &self.service_ids
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    pub fn source_columns(&self) -> &[usize] {
        &self.source_columns
    }

    pub fn row(&self, service: usize) -> &[f64] {
        &self.rows[service]
    }

    /// Service ids dropped for having zero traffic.
    pub fn dropped_services(&self) -> &[String] {
        &self.dropped_services
    }
}

/// Normalizes each service column of the traffic matrix into a channel row.
/// Zero-traffic services have no distribution and are dropped with a record.
pub fn channel_from_traffic(t: &TrafficMatrix) -> Result<Channel> {
    let mut service_ids = Vec::new();
    let mut source_columns = Vec::new();
    let mut rows = Vec::new();
    let mut dropped_services = Vec::new();
    for j in 0..t.n_services() {
        let total = t.service_total(j);
        if total > 0.0 {
            service_ids.push(t.service_ids()[j].clone());
            source_columns.push(j);
            rows.push((0..t.n_areas()).map(|i| t.volume(i, j) / total).collect());
        } else {
            dropped_services.push(t.service_ids()[j].clone());
        }
    }
    if rows.is_empty() {
        return Err(InformativeError::EmptyChannel);
    }
    Ok(Channel {
        service_ids,
        area_ids: t.area_ids().to_vec(),
        source_columns,
        rows,
        dropped_services,
    })
}

/// Capacity-achieving input weights and the capacity they attain.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    /// Input weight per channel service, aligned with the channel's rows.
    pub weights: Vec<f64>,
    /// `I(C;S)` under the final weights, in nats.
    pub capacity: Nats,
    pub iterations: usize,
    pub converged: bool,
    /// Bracket width `max_j D_j - sum_j p_j D_j` at the last iteration.
    pub final_delta: f64,
    /// Lower bound per iteration; nondecreasing.
    pub history: Vec<f64>,
}

/// Blahut-Arimoto iteration from uniform initial weights.
///
/// # Examples
///
/// ```
/// use geodiv_core::informative::{blahut_arimoto, channel_from_traffic};
/// use geodiv_core::model::TrafficMatrix;
///
/// // Identity channel: each service used in exactly one area.
/// let t = TrafficMatrix::new(
///     vec!["a".into(), "b".into()],
///     vec!["s1".into(), "s2".into()],
///     vec![1.0, 0.0, 0.0, 1.0],
/// )
/// .unwrap();
/// let ch = channel_from_traffic(&t).unwrap();
/// let cap = blahut_arimoto(&ch, 1e-10, 1000).unwrap();
/// assert!((cap.capacity.value() - std::f64::consts::LN_2).abs() < 1e-9);
/// assert!(cap.converged);
/// ```
pub fn blahut_arimoto(ch: &Channel, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(InformativeError::InvalidRule(format!(
            "tol must be positive and max_iter nonzero, got tol={tol}, max_iter={max_iter}"
        )));
    }
    let n_s = ch.n_services();
    let n_c = ch.n_areas();
    for (row, r) in ch.rows.iter().enumerate() {
        let sum = comp_sum(r.iter().copied());
        if (sum - 1.0).abs() > NORM_TOL || r.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(InformativeError::NonStochasticChannel { row, sum });
        }
    }

    let mut p = vec![1.0 / n_s as f64; n_s];
    let mut d = vec![0.0; n_s];
    let mut q = vec![0.0; n_c];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut lower = 0.0;
    let mut delta = f64::INFINITY;

    while iterations < max_iter {
        iterations += 1;
        for (i, qi) in q.iter_mut().enumerate() {
            *qi = comp_sum(ch.rows.iter().zip(&p).map(|(r, &pj)| pj * r[i]));
        }
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = comp_sum(
                ch.rows[j]
                    .iter()
                    .zip(&q)
                    .filter(|(&w, _)| w > 0.0)
                    .map(|(&w, &qi)| w * (w / qi).ln()),
            );
        }
        lower = comp_sum(p.iter().zip(&d).map(|(&pj, &dj)| pj * dj));
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        history.push(lower);
        delta = upper - lower;
        if delta < tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        // Multiplicative update in log space; exp(D_j) alone can overflow
        // when weights span hundreds of orders of magnitude.
        let log_u: Vec<f64> = p
            .iter()
            .zip(&d)
            .map(|(&pj, &dj)| if pj > 0.0 { pj.ln() + dj } else { f64::NEG_INFINITY })
            .collect();
        let max_log = log_u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = comp_sum(log_u.iter().map(|&u| (u - max_log).exp()));
        let log_z = max_log + z.ln();
        for (pj, &u) in p.iter_mut().zip(&log_u) {
            *pj = (u - log_z).exp();
        }
    }

    Ok(CapacityResult {
        weights: p,
        capacity: Nats::from_computed(lower)?,
        iterations,
        converged,
        final_delta: delta,
        history,
    })
}

/// How the informative cut through the ranked weights is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    /// Cut at the largest successive log-gap in the ranked weights.
    Gap,
    /// Keep services with weight strictly above the threshold.
    Fixed(f64),
    /// Keep the n heaviest services.
    TopN(usize),
}

/// One service's position in the capacity-weight ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedWeight {
    /// 1-based rank, heaviest first.
    pub rank: usize,
    /// Index into the channel's service list.
    pub channel_index: usize,
    pub weight: f64,
}

/// Informative subset plus the ranking it was cut from.
///
/// Indices are positions in the channel's service list; map through
/// [`Channel::source_columns`] to address the source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InformativeSet {
    pub subset: ServiceSubset,
    pub ranked: Vec<RankedWeight>,
    pub cut_index: usize,
    pub threshold: f64,
}

/// Applies a selection rule to capacity weights.
///
/// # Examples
///
/// ```
/// use geodiv_core::informative::{select_informative, CapacityResult, SelectionRule};
/// use geodiv_core::info::Nats;
///
/// let cap = CapacityResult {
///     weights: vec![0.4, 0.35, 0.25, 1e-12, 1e-12],
///     capacity: Nats::ZERO,
///     iterations: 1,
///     converged: true,
///     final_delta: 0.0,
///     history: vec![0.0],
/// };
/// let set = select_informative(&cap, SelectionRule::Gap).unwrap();
/// assert_eq!(set.cut_index, 3);
/// assert_eq!(set.subset.indices(), &[0, 1, 2]);
/// ```
pub fn select_informative(cap: &CapacityResult, rule: SelectionRule) -> Result<InformativeSet> {
    let mut order: Vec<usize> = (0..cap.weights.len()).collect();
    order.sort_by(|&a, &b| {
        cap.weights[b]
            .partial_cmp(&cap.weights[a])
            .expect("weights are finite")
            .then(a.cmp(&b))
    });
    let ranked: Vec<RankedWeight> = order
        .iter()
        .enumerate()
        .map(|(r, &j)| RankedWeight {
            rank: r + 1,
            channel_index: j,
            weight: cap.weights[j],
        })
        .collect();

    let (cut_index, threshold) = match rule {
        SelectionRule::Gap => {
            let positive: Vec<f64> = ranked
                .iter()
                .map(|r| r.weight)
                .filter(|&w| w >= WEIGHT_FLOOR)
                .collect();
            let distinct = {
                let mut d = positive.clone();
                d.dedup();
                d.len()
            };
            if positive.len() < 2 || distinct < 2 {
                return Err(InformativeError::DegenerateWeights);
            }
            let mut best_gap = f64::NEG_INFINITY;
            let mut best_cut = 1;
            for r in 0..positive.len() - 1 {
                let gap = positive[r].ln() - positive[r + 1].ln();
                if gap > best_gap {
                    best_gap = gap;
                    best_cut = r + 1;
                }
            }
            let theta =
                ((positive[best_cut - 1].ln() + positive[best_cut].ln()) / 2.0).exp();
            (best_cut, theta)
        }
        SelectionRule::Fixed(theta) => {
            if !theta.is_finite() || theta < 0.0 {
                return Err(InformativeError::InvalidRule(format!(
                    "fixed threshold must be a nonnegative real, got {theta}"
                )));
            }
            let cut = ranked.iter().take_while(|r| r.weight > theta).count();
            if cut == 0 {
                return Err(InformativeError::EmptySelection { threshold: theta });
            }
            (cut, theta)
        }
        SelectionRule::TopN(n) => {
            if n == 0 || n > ranked.len() {
                return Err(InformativeError::InvalidRule(format!(
                    "topn must be in 1..={}, got {n}",
                    ranked.len()
                )));
            }
            (n, ranked[n - 1].weight)
        }
    };

    let subset = ServiceSubset::new(
        ranked[..cut_index].iter().map(|r| r.channel_index).collect(),
    )?;
    Ok(InformativeSet {
        subset,
        ranked,
        cut_index,
        threshold,
    })
}

/// Capacity, selection, and the restricted model in one pass with default
/// iteration settings.
pub fn informative_pipeline(
    t: &TrafficMatrix,
    rule: SelectionRule,
) -> Result<(InformativeSet, JointModel, Nats)> {
    let ch = channel_from_traffic(t)?;
    let cap = blahut_arimoto(&ch, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let set = select_informative(&cap, rule)?;
    let source_subset = ServiceSubset::new(
        set.subset
            .indices()
            .iter()
            .map(|&j| ch.source_columns()[j])
            .collect(),
    )?;
    let restricted = build_joint(&t.select_services(&source_subset)?)?;
    let mi = crate::info::mutual_information(&restricted)?;
    Ok((set, restricted, mi))
}
