//! Entropy and mutual information over the joint model.
//!
//! Everything is computed in nats; conversion to other bases is a display
//! concern handled by [`LogBase`]. Mutual information is obtained as
//! `H(S) - H(S|C)`. Rounding can push a mathematically nonnegative quantity
//! a hair below zero; values in `[-1e-12, 0)` clamp to zero, anything more
//! negative means the inputs are inconsistent and is reported as an error
//! rather than papered over.

use thiserror::Error;

use crate::math::{comp_sum, entropy_unchecked};
use crate::model::{JointModel, ModelError, TrafficMatrix};
use crate::{CLAMP_TOL, NORM_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("distribution sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("negative probability {value} at position {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("information measure {value} is negative beyond rounding tolerance")]
    NegativeMeasure { value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, InfoError>;

/// Nonnegative information quantity in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Nats(f64);

impl Nats {
    pub const ZERO: Nats = Nats(0.0);

    /// Accepts a computed value, clamping tiny negative rounding residue.
    ///
    /// Values below `-1e-12` indicate an internal inconsistency upstream and
    /// are rejected.
    pub fn from_computed(value: f64) -> Result<Nats> {
        if value >= 0.0 {
            // + 0.0 folds negative zero into plain zero.
            Ok(Nats(value + 0.0))
        } else if value >= -CLAMP_TOL {
            Ok(Nats(0.0))
        } else {
            Err(InfoError::NegativeMeasure { value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn in_base(self, base: LogBase) -> f64 {
        self.0 * base.factor()
    }
}

/// Logarithm base for rendered quantities. Internal math stays in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    E,
    Two,
    Ten,
}

impl LogBase {
    /// Multiplier taking nats to this base.
    pub fn factor(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => 1.0 / std::f64::consts::LN_2,
            LogBase::Ten => 1.0 / std::f64::consts::LN_10,
        }
    }
}

impl std::fmt::Display for LogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogBase::E => write!(f, "e"),
            LogBase::Two => write!(f, "2"),
            LogBase::Ten => write!(f, "10"),
        }
    }
}

/// Shannon entropy of a distribution.
///
/// # Examples
///
/// ```
/// use geodiv_core::info::entropy;
///
/// let h = entropy(&[0.75, 0.25]).unwrap();
/// assert!((h.value() - 0.562335).abs() < 1e-6);
/// assert_eq!(entropy(&[1.0]).unwrap().value(), 0.0);
/// ```
pub fn entropy(p: &[f64]) -> Result<Nats> {
    for (index, &value) in p.iter().enumerate() {
        if value < 0.0 || !value.is_finite() {
            return Err(InfoError::NegativeProbability { index, value });
        }
    }
    let sum = comp_sum(p.iter().copied());
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(InfoError::NotNormalized { sum });
    }
    Nats::from_computed(entropy_unchecked(p))
}

/// `H(S|C)`: traffic-weighted average entropy of the per-area distributions.
pub fn conditional_entropy(m: &JointModel) -> Nats {
    let h = comp_sum(
        (0..m.n_areas())
            .map(|i| m.area_weights()[i] * entropy_unchecked(m.conditional_row(i))),
    );
    // Each term is a weighted entropy, so the sum cannot go negative by more
    // than rounding residue.
    Nats::from_computed(h).expect("conditional entropy must be nonnegative")
}

/// `I(S;C) = H(S) - H(S|C)`.
///
/// # Examples
///
/// ```
/// use geodiv_core::info::mutual_information;
/// use geodiv_core::model::{build_joint, TrafficMatrix};
///
/// let t = TrafficMatrix::new(
///     vec!["a".into(), "b".into()],
///     vec!["s1".into(), "s2".into()],
///     vec![3.0, 1.0, 1.0, 3.0],
/// )
/// .unwrap();
/// let m = build_joint(&t).unwrap();
/// let i = mutual_information(&m).unwrap();
/// assert!((i.value() - 0.130812).abs() < 1e-6);
/// ```
pub fn mutual_information(m: &JointModel) -> Result<Nats> {
    let h_s = entropy_unchecked(m.service_marginal());
    let h_s_given_c = conditional_entropy(m).value();
    Nats::from_computed(h_s - h_s_given_c)
}

/// Mutual information retained by the top-k services, for each k.
#[derive(Debug, Clone, PartialEq)]
pub struct MiCurve {
    pub ks: Vec<usize>,
    pub values: Vec<Nats>,
}

/// Ranks services by total traffic, descending, ties broken by position.
pub fn rank_services_by_traffic(t: &TrafficMatrix) -> Vec<usize> {
    let totals: Vec<f64> = (0..t.n_services()).map(|j| t.service_total(j)).collect();
    let mut order: Vec<usize> = (0..t.n_services()).collect();
    order.sort_by(|&a, &b| {
        totals[b]
            .partial_cmp(&totals[a])
            .expect("service totals are finite")
            .then(a.cmp(&b))
    });
    order
}

/// Computes `I(S;C)` after restricting to the k highest-traffic services,
/// for k = 1..=k_max.
///
/// The k = 1 point is always zero: a one-service model has a degenerate
/// service variable.
pub fn mi_topk_curve(t: &TrafficMatrix, k_max: usize) -> Result<MiCurve> {
    let k_max = k_max.min(t.n_services());
    if k_max == 0 {
        return Err(InfoError::Model(ModelError::InvalidSubset(
            "top-k curve needs k_max >= 1".into(),
        )));
    }
    let order = rank_services_by_traffic(t);
    let mut ks = Vec::with_capacity(k_max);
    let mut values = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let subset = crate::model::ServiceSubset::new(order[..k].to_vec())?;
        let sliced = t.select_services(&subset)?;
        let m = crate::model::build_joint(&sliced)?;
        ks.push(k);
        values.push(mutual_information(&m)?);
    }
    Ok(MiCurve { ks, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_joint, ServiceSubset};

    fn model(volumes: Vec<f64>, n_areas: usize, n_services: usize) -> JointModel {
        let t = TrafficMatrix::new(
            (0..n_areas).map(|i| format!("a{i}")).collect(),
            (0..n_services).map(|j| format!("s{j}")).collect(),
            volumes,
        )
        .unwrap();
        build_joint(&t).unwrap()
    }

    #[test]
    fn entropy_known_values() {
        assert_eq!(entropy(&[1.0]).unwrap().value(), 0.0);
        let h = entropy(&[0.75, 0.25]).unwrap().value();
        assert!((h - 0.5623351446188083).abs() < 1e-12);
        let u = entropy(&[0.25; 4]).unwrap().value();
        assert!((u - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_unnormalized_and_negative() {
        assert!(matches!(
            entropy(&[0.4, 0.4]),
            Err(InfoError::NotNormalized { .. })
        ));
        assert!(matches!(
            entropy(&[1.5, -0.5]),
            Err(InfoError::NegativeProbability { .. })
        ));
    }

    #[test]
    fn mi_of_symmetric_two_by_two() {
        let m = model(vec![3.0, 1.0, 1.0, 3.0], 2, 2);
        let i = mutual_information(&m).unwrap().value();
        let expected = std::f64::consts::LN_2 - 0.5623351446188083;
        assert!((i - expected).abs() < 1e-12, "got {i}, want {expected}");
    }

    #[test]
    fn mi_zero_for_identical_rows() {
        let m = model(vec![2.0, 6.0, 1.0, 3.0, 4.0, 12.0], 3, 2);
        let i = mutual_information(&m).unwrap().value();
        assert!(i.abs() < 1e-12);
    }

    #[test]
    fn mi_equals_marginal_entropy_for_disjoint_rows() {
        // Two areas using disjoint services: knowing the service pins down
        // the area, so I = H(S) and H(S|C) = 0.
        let m = model(vec![1.0, 0.0, 0.0, 1.0], 2, 2);
        let i = mutual_information(&m).unwrap().value();
        assert!((i - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(conditional_entropy(&m).value(), 0.0);
    }

    #[test]
    fn clamp_accepts_tiny_negative_and_rejects_large() {
        assert_eq!(Nats::from_computed(-1e-13).unwrap().value(), 0.0);
        assert!(Nats::from_computed(-0.0).unwrap().value().is_sign_positive());
        assert!(matches!(
            Nats::from_computed(-1e-9),
            Err(InfoError::NegativeMeasure { .. })
        ));
    }

    #[test]
    fn base_conversion() {
        let one_bit = Nats(std::f64::consts::LN_2);
        assert!((one_bit.in_base(LogBase::Two) - 1.0).abs() < 1e-15);
        assert_eq!(one_bit.in_base(LogBase::E), std::f64::consts::LN_2);
        let ten = Nats(std::f64::consts::LN_10);
        assert!((ten.in_base(LogBase::Ten) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn topk_curve_starts_at_zero_and_is_nondecreasing_here() {
        // Service totals: s0 = 8, s1 = 5, s2 = 3.
        let t = TrafficMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec![6.0, 1.0, 2.0, 2.0, 4.0, 1.0],
        )
        .unwrap();
        let curve = mi_topk_curve(&t, 3).unwrap();
        assert_eq!(curve.ks, vec![1, 2, 3]);
        assert_eq!(curve.values[0].value(), 0.0);
        let full = mutual_information(&build_joint(&t).unwrap()).unwrap();
        assert!((curve.values[2].value() - full.value()).abs() < 1e-15);
    }

    #[test]
    fn topk_ranking_breaks_ties_by_position() {
        let t = TrafficMatrix::new(
            vec!["a".into()],
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec![2.0, 3.0, 2.0],
        )
        .unwrap();
        assert_eq!(rank_services_by_traffic(&t), vec![1, 0, 2]);
    }

    #[test]
    fn restriction_can_raise_mi_density() {
        // Restriction renormalizes, so MI over a sub-universe is not a slice
        // of the full MI; check it stays within entropy bounds.
        let m = model(vec![5.0, 1.0, 4.0, 1.0, 5.0, 4.0], 2, 3);
        let r = m.restrict(&ServiceSubset::new(vec![0, 1]).unwrap()).unwrap();
        let i = mutual_information(&r).unwrap().value();
        let h_s = entropy(r.service_marginal()).unwrap().value();
        assert!(i <= h_s + 1e-12);
        assert!(i >= 0.0);
    }
}
