//! Censored observations, design matrices, time partitions and the
//! hazard / survival / density identities every likelihood is built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, log1m_exp, Real};

/// How the event time of a subject was observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Censoring {
    /// Event observed at `t`.
    Exact(f64),
    /// Event known to happen after `lower`.
    Right(f64),
    /// Event known to happen before `upper`.
    Left(f64),
    /// Event known to happen in `(lower, upper]`.
    Interval(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub subject_id: u64,
    pub censoring: Censoring,
    /// Cause index for competing risks (0 = censored).
    pub event_label: Option<u8>,
}

impl CensoredObservation {
    pub fn new(subject_id: u64, censoring: Censoring) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidObservation(format!("subject {subject_id}: {msg}")));
        let check = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidObservation(format!(
                    "subject {subject_id}: {name} must be finite and nonnegative, got {v}"
                )));
            }
            Ok(())
        };
        match censoring {
            Censoring::Exact(t) => {
                check("event time", t)?;
                if t == 0.0 {
                    return bad("exact event time of zero".into());
                }
            }
            Censoring::Right(lo) => check("censoring time", lo)?,
            Censoring::Left(hi) => {
                check("censoring time", hi)?;
                if hi == 0.0 {
                    return bad("left censoring at time zero".into());
                }
            }
            Censoring::Interval(lo, hi) => {
                check("lower bound", lo)?;
                check("upper bound", hi)?;
                if lo >= hi {
                    return bad(format!("interval ({lo}, {hi}] is empty"));
                }
            }
        }
        Ok(Self { subject_id, censoring, event_label: None })
    }

    /// Event or right-censoring observation from a `delta` indicator.
    pub fn from_indicator(subject_id: u64, time: f64, event: bool) -> Result<Self> {
        if event {
            Self::new(subject_id, Censoring::Exact(time))
        } else {
            Self::new(subject_id, Censoring::Right(time))
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.event_label = Some(label);
        self
    }

    pub fn is_event(&self) -> bool {
        matches!(self.censoring, Censoring::Exact(_))
    }

    /// Observed time for event-indicator models (exact or right-censored).
    pub fn observed_time(&self) -> Option<f64> {
        match self.censoring {
            Censoring::Exact(t) | Censoring::Right(t) => Some(t),
            _ => None,
        }
    }

    /// Largest finite time mentioned by the record.
    pub fn max_time(&self) -> f64 {
        match self.censoring {
            Censoring::Exact(t) | Censoring::Right(t) | Censoring::Left(t) => t,
            Censoring::Interval(_, hi) => hi,
        }
    }
}

/// Row-major covariate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if n_rows * n_cols != values.len() {
            return Err(Error::Dimension(format!(
                "design {n_rows}x{n_cols} needs {} values, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if column_names.len() != n_cols {
            return Err(Error::Dimension(format!("{} column names for {n_cols} columns", column_names.len())));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite design entry {v}")));
        }
        Ok(Self { n_rows, n_cols, values, column_names })
    }

    pub fn from_rows(rows: &[Vec<f64>], column_names: Vec<String>) -> Result<Self> {
        let n_cols = column_names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::Dimension(format!("row of length {} for {n_cols} columns", r.len())));
        }
        Self::new(rows.len(), n_cols, rows.concat(), column_names)
    }

    /// Design with `n_rows` rows and no columns.
    pub fn empty(n_rows: usize) -> Self {
        Self { n_rows, n_cols: 0, values: Vec::new(), column_names: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let values = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { n_rows: idx.len(), n_cols: self.n_cols, values, column_names: self.column_names.clone() }
    }
}

/// Knots `0 = a_0 < a_1 < ... < a_K` of a piecewise-constant hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePartition {
    knots: Vec<f64>,
}

impl TimePartition {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidPartition("need at least one interval".into()));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidPartition(format!("first knot must be 0, got {}", knots[0])));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("knots must be finite and strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// `k` equal intervals on `[0, end]`, the way R's `seq(0, end, length.out = k + 1)` builds them.
    pub fn equally_spaced(end: f64, k: usize) -> Result<Self> {
        if k == 0 || !(end > 0.0) {
            return Err(Error::InvalidPartition(format!("cannot split (0, {end}] into {k} intervals")));
        }
        let by = end / k as f64;
        let mut knots: Vec<f64> = (0..=k).map(|j| j as f64 * by).collect();
        knots[k] = end;
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().expect("partition has knots")
    }
}

/// Per-subject record of the illness-death model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IllnessDeathRecord {
    /// Time of 1->2 transition or of leaving/censoring in state 1.
    pub t1: f64,
    /// Total follow-up time.
    pub t2: f64,
    /// Sojourn time in state 2 (clock reset at the 1->2 transition).
    pub t3: f64,
    /// Indicators for transitions 1->2, 1->3 and 2->3.
    pub events: [bool; 3],
}

/// Sojourn used in place of a zero time spent in state 2.
pub const MIN_SOJOURN: f64 = 1e-4;

impl IllnessDeathRecord {
    /// Builds a record from the `delta`/`status` layout (transplant indicator,
    /// death indicator), replacing a zero sojourn by [`MIN_SOJOURN`].
    pub fn from_indicators(times1: f64, times2: f64, time: f64, delta: bool, status: bool) -> Result<Self> {
        let events = [delta, status && !delta, delta && status];
        let t3 = if times2 <= 0.0 { MIN_SOJOURN } else { times2 };
        let rec = Self { t1: times1, t2: time, t3, events };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        let [e12, e13, e23] = self.events;
        if e12 && e13 {
            return Err(Error::InvalidEvent("both 1->2 and 1->3 transitions recorded".into()));
        }
        if e23 && !e12 {
            return Err(Error::InvalidEvent("2->3 transition without 1->2".into()));
        }
        if !(self.t1 > 0.0 && self.t2 > 0.0 && self.t3 > 0.0)
            || !(self.t1.is_finite() && self.t2.is_finite() && self.t3.is_finite())
        {
            return Err(Error::InvalidEvent(format!(
                "times must be positive (t1={}, t2={}, t3={})",
                self.t1, self.t2, self.t3
            )));
        }
        if self.t2 + 1e-9 < self.t1 {
            return Err(Error::InvalidEvent(format!("total time {} before t1 {}", self.t2, self.t1)));
        }
        Ok(())
    }
}

/// Repeated measurements of a biomarker, sorted by subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Longitudinal {
    /// Subject index (row of the survival design) of every measurement.
    pub subject: Vec<usize>,
    pub time: Vec<f64>,
    pub response: Vec<f64>,
    /// Fixed-effects design of the measurements.
    pub design: DesignMatrix,
}

impl Longitudinal {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Measurement index ranges per subject.
    pub fn ranges(&self, n_subjects: usize) -> Vec<std::ops::Range<usize>> {
        let mut ranges = vec![0..0; n_subjects];
        let mut start = 0;
        while start < self.subject.len() {
            let s = self.subject[start];
            let mut end = start;
            while end < self.subject.len() && self.subject[end] == s {
                end += 1;
            }
            ranges[s] = start..end;
            start = end;
        }
        ranges
    }
}

/// Family-specific data carried next to the observations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum DatasetExtras {
    #[default]
    None,
    /// Design of the incidence (cure probability) model; `design` holds latency covariates.
    Cure {
        incidence: DesignMatrix,
    },
    IllnessDeath(Vec<IllnessDeathRecord>),
    /// Group index of each observation.
    Frailty {
        groups: Vec<usize>,
        n_groups: usize,
    },
    Joint(Longitudinal),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub observations: Vec<CensoredObservation>,
    pub design: DesignMatrix,
    pub extras: DatasetExtras,
}

impl SurvivalDataset {
    pub fn new(observations: Vec<CensoredObservation>, design: DesignMatrix, extras: DatasetExtras) -> Result<Self> {
        if observations.len() != design.n_rows() {
            return Err(Error::Dimension(format!(
                "{} observations but {} design rows",
                observations.len(),
                design.n_rows()
            )));
        }
        match &extras {
            DatasetExtras::Cure { incidence } if incidence.n_rows() != observations.len() => {
                return Err(Error::Dimension("incidence design rows differ from observations".into()));
            }
            DatasetExtras::IllnessDeath(recs) if recs.len() != observations.len() => {
                return Err(Error::Dimension("illness-death records differ from observations".into()));
            }
            DatasetExtras::Frailty { groups, n_groups } => {
                if groups.len() != observations.len() {
                    return Err(Error::Dimension("group labels differ from observations".into()));
                }
                if groups.iter().any(|&g| g >= *n_groups) {
                    return Err(Error::Dimension("group index out of range".into()));
                }
            }
            DatasetExtras::Joint(long) => {
                if long.design.n_rows() != long.len()
                    || long.response.len() != long.len()
                    || long.subject.len() != long.len()
                {
                    return Err(Error::Dimension("longitudinal columns have different lengths".into()));
                }
                if long.subject.iter().any(|&s| s >= observations.len()) {
                    return Err(Error::Dimension("longitudinal subject out of range".into()));
                }
                if long.subject.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::Data("longitudinal records must be sorted by subject".into()));
                }
            }
            _ => {}
        }
        Ok(Self { observations, design, extras })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn max_time(&self) -> f64 {
        self.observations.iter().map(|o| o.max_time()).fold(0.0, f64::max)
    }
}

/// `S = exp(-H)`.
pub fn survival_from_cumhaz<T: Real>(h: T) -> Result<T> {
    if h < T::zero() || h.is_nan() {
        return Err(Error::NegativeCumulativeHazard(h.to_f64().unwrap_or(f64::NAN)));
    }
    Ok((-h).exp())
}

/// `log f = log h - H`.
#[inline]
pub fn log_density_from_hazard<T: Real>(log_h: T, cum_h: T) -> T {
    log_h - cum_h
}

/// Log-likelihood contribution of one observation given its log-density and
/// log-survival functions.
///
/// Exact -> `log f(t)`; right -> `log S(c)`; left -> `log(1 - S(c))`;
/// interval -> `log(S(lower) - S(upper))`.
pub fn censoring_loglik_contribution<T, F, S>(obs: &CensoredObservation, log_f: F, log_s: S) -> Result<T>
where
    T: Real,
    F: FnOnce(f64) -> T,
    S: Fn(f64) -> T,
{
    Ok(match obs.censoring {
        Censoring::Exact(t) => log_f(t),
        Censoring::Right(lo) => log_s(lo),
        Censoring::Left(hi) => log1m_exp(log_s(hi)),
        Censoring::Interval(lo, hi) => {
            let ls_lo = log_s(lo);
            let diff = log_s(hi) - ls_lo;
            // S(lower) - S(upper) = S(lower) * (1 - exp(diff))
            if !(diff < -T::epsilon()) {
                return Err(Error::DegenerateInterval { lower: lo, upper: hi });
            }
            ls_lo + log1m_exp(diff)
        }
    })
}

/// Interval `k` (1-based) with `t` in `(a_{k-1}, a_k]`.
pub fn interval_index(t: f64, partition: &TimePartition) -> Result<usize> {
    let knots = partition.knots();
    if !(t > 0.0) || t > partition.end() {
        return Err(Error::OutsidePartition { t, end: partition.end() });
    }
    // first knot >= t
    let k = knots.partition_point(|&a| a < t);
    Ok(k)
}

/// Cumulative hazard of a step hazard with levels `lambdas` on `partition`.
pub fn piecewise_cumhaz<T: Real>(t: f64, partition: &TimePartition, lambdas: &[T]) -> Result<T> {
    let k_total = partition.n_intervals();
    if lambdas.len() != k_total {
        return Err(Error::Dimension(format!("{} hazard levels for {k_total} intervals", lambdas.len())));
    }
    if t == 0.0 {
        return Ok(T::zero());
    }
    let k = interval_index(t, partition)?;
    let knots = partition.knots();
    let mut h = T::zero();
    for j in 1..k {
        h = h + lambdas[j - 1] * c(knots[j] - knots[j - 1]);
    }
    Ok(h + lambdas[k - 1] * c(t - knots[k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson;

    fn larynx_partition() -> TimePartition {
        TimePartition::equally_spaced(10.7 + 0.001, 3).unwrap()
    }

    #[test]
    fn survival_identity_examples() {
        assert_eq!(survival_from_cumhaz(0.0_f64).unwrap(), 1.0);
        assert!((survival_from_cumhaz(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!(survival_from_cumhaz(-0.1_f64).is_err());
    }

    #[test]
    fn weibull_survival_matches_integrated_hazard() {
        let (lambda, alpha, t) = (0.019, 1.233, 100.0);
        let closed = survival_from_cumhaz(lambda * f64::powf(t, alpha)).unwrap();
        // oracle: integrate h(u) = lambda * alpha * u^(alpha-1) numerically
        let h_int = simpson(|u: f64| lambda * alpha * u.powf(alpha - 1.0), 0.0, t, 20_000).unwrap();
        let oracle = (-h_int).exp();
        assert!((closed - oracle).abs() < 1e-6, "{closed} vs {oracle}");
        assert!((closed - 0.0038646).abs() < 1e-6);
    }

    #[test]
    fn log_density_examples() {
        assert_eq!(log_density_from_hazard(0.0, 1.0), -1.0);
        // Weibull alpha=2, lambda=1 at t=0.5: f = 2 t exp(-t^2)
        let t: f64 = 0.5;
        let direct = (2.0 * t * (-t * t).exp()).ln();
        let got = log_density_from_hazard((2.0 * t).ln(), t * t);
        assert!((got - direct).abs() < 1e-15);
    }

    #[test]
    fn censoring_contributions() {
        let exp_log_s = |t: f64| -t;
        let exp_log_f = |t: f64| -t;
        let right0 = CensoredObservation::new(1, Censoring::Right(0.0)).unwrap();
        assert_eq!(censoring_loglik_contribution(&right0, exp_log_f, exp_log_s).unwrap(), 0.0);

        let left = CensoredObservation::new(1, Censoring::Left(4f64.ln())).unwrap();
        let v = censoring_loglik_contribution(&left, exp_log_f, exp_log_s).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-14);

        let iv = CensoredObservation::new(1, Censoring::Interval(1.0, 2.0)).unwrap();
        let v = censoring_loglik_contribution(&iv, exp_log_f, exp_log_s).unwrap();
        let want = ((-1f64).exp() - (-2f64).exp()).ln();
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn interval_equals_difference_of_left_contributions() {
        let (a, b) = (0.3, 1.7);
        let left = |c: f64| 1.0 - (-c).exp();
        let iv = CensoredObservation::new(1, Censoring::Interval(a, b)).unwrap();
        let v = censoring_loglik_contribution(&iv, |t| -t, |t| -t).unwrap();
        assert!((v - (left(b) - left(a)).ln()).abs() < 1e-13);
    }

    #[test]
    fn degenerate_interval_is_an_error() {
        let iv = CensoredObservation::new(1, Censoring::Interval(1.0, 2.0)).unwrap();
        let flat = |_t: f64| -0.5_f64;
        let err = censoring_loglik_contribution(&iv, |_| 0.0, flat).unwrap_err();
        assert!(matches!(err, Error::DegenerateInterval { .. }));
    }

    #[test]
    fn observation_validation() {
        assert!(CensoredObservation::new(1, Censoring::Exact(0.0)).is_err());
        assert!(CensoredObservation::new(1, Censoring::Exact(-1.0)).is_err());
        assert!(CensoredObservation::new(1, Censoring::Interval(2.0, 2.0)).is_err());
        assert!(CensoredObservation::new(1, Censoring::Right(f64::NAN)).is_err());
        assert!(CensoredObservation::new(1, Censoring::Exact(0.6)).is_ok());
    }

    #[test]
    fn larynx_partition_knots() {
        let p = larynx_partition();
        let want = [0.0, 3.567, 7.134, 10.701];
        for (k, w) in p.knots().iter().zip(want) {
            assert!((k - w).abs() < 1e-12);
        }
        assert_eq!(interval_index(0.6, &p).unwrap(), 1);
        assert_eq!(interval_index(p.knots()[1], &p).unwrap(), 1);
        assert_eq!(interval_index(p.end(), &p).unwrap(), 3);
        assert_eq!(interval_index(10.7, &p).unwrap(), 3);
        assert!(interval_index(10.71, &p).is_err());
        assert!(interval_index(0.0, &p).is_err());
    }

    #[test]
    fn piecewise_cumhaz_examples() {
        let p = TimePartition::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((piecewise_cumhaz(0.5, &p, &[2.0_f64, 9.0, 9.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((piecewise_cumhaz(2.5, &p, &[1.0_f64, 2.0, 3.0]).unwrap() - 4.5).abs() < 1e-15);
        for &t in &[0.1, 1.0, 1.5, 2.999, 3.0] {
            assert!((piecewise_cumhaz(t, &p, &[0.7, 0.7, 0.7]).unwrap() - 0.7 * t).abs() < 1e-14);
        }
    }

    #[test]
    fn piecewise_cumhaz_is_continuous_at_knots() {
        let p = TimePartition::new(vec![0.0, 1.0, 2.5, 4.0]).unwrap();
        let l = [0.3_f64, 2.0, 0.9];
        for &a in &p.knots()[1..3] {
            let lo = piecewise_cumhaz(a - 1e-9, &p, &l).unwrap();
            let hi = piecewise_cumhaz(a + 1e-9, &p, &l).unwrap();
            assert!((lo - hi).abs() < 1e-8);
        }
    }

    #[test]
    fn illness_death_record_checks() {
        let r = IllnessDeathRecord::from_indicators(50.0, 0.0, 50.0, false, true).unwrap();
        assert_eq!(r.events, [false, true, false]);
        assert_eq!(r.t3, MIN_SOJOURN);
        let r = IllnessDeathRecord::from_indicators(1.0, 15.0, 16.0, true, true).unwrap();
        assert_eq!(r.events, [true, false, true]);
        let bad = IllnessDeathRecord { t1: 1.0, t2: 2.0, t3: 1.0, events: [false, false, true] };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn survival_is_decreasing_in_h(a in 0.0f64..50.0, d in 1e-6f64..10.0) {
                let s1 = survival_from_cumhaz(a).unwrap();
                let s2 = survival_from_cumhaz(a + d).unwrap();
                prop_assert!(s2 < s1);
                prop_assert!(s1 > 0.0 && s1 <= 1.0);
            }

            #[test]
            fn piecewise_cumhaz_nondecreasing(
                l in proptest::collection::vec(0.01f64..5.0, 3),
                t1 in 0.0f64..3.0, t2 in 0.0f64..3.0,
            ) {
                let p = TimePartition::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                prop_assert!(piecewise_cumhaz(lo, &p, &l).unwrap() <= piecewise_cumhaz(hi, &p, &l).unwrap() + 1e-15);
            }
        }
    }
}
