//! Correlation diagnostics over fingerprint vectors and accuracy reports
//! over location errors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Pearson correlation of two equal-length vectors. A constant vector has
/// no linear relation to anything, so its correlation is reported as 0.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "correlation needs equal non-empty vectors, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sa += x;
        sb += y;
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / math::sqrt(va * vb))
}

/// Mean pairwise correlation across two snapshot groups, every row of `a`
/// against every row of `b`.
pub fn mean_cross_correlation(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Shape("correlation groups must be non-empty".into()));
    }
    let mut sum = 0.0;
    for x in a {
        for y in b {
            sum += pearson(x, y)?;
        }
    }
    Ok(sum / (a.len() * b.len()) as f64)
}

/// Self-similarity of one location: the mean over all ordered snapshot
/// pairs, diagonal included, so a single snapshot scores exactly 1.
pub fn self_correlation(group: &[Vec<f64>]) -> Result<f64> {
    mean_cross_correlation(group, group)
}

/// Deterministic thinning: keep at most `limit` rows, evenly spread over
/// the group in stored order.
pub fn thin_group(group: &[Vec<f64>], limit: usize) -> Vec<Vec<f64>> {
    if group.len() <= limit || limit == 0 {
        return group.to_vec();
    }
    (0..limit)
        .map(|i| group[i * group.len() / limit].clone())
        .collect()
}

/// For every reference point, count distant points (further than
/// `min_distance`) whose snapshots still correlate above `threshold` on
/// average. Groups are thinned to `max_snapshots` rows first to keep the
/// pair sweep tractable.
pub fn ambiguity_counts(
    groups: &[Vec<Vec<f64>>],
    locations: &[(f64, f64)],
    min_distance: f64,
    threshold: f64,
    max_snapshots: usize,
) -> Result<Vec<usize>> {
    if groups.len() != locations.len() {
        return Err(Error::Shape(format!(
            "{} snapshot groups for {} locations",
            groups.len(),
            locations.len()
        )));
    }
    let thinned: Vec<Vec<Vec<f64>>> = groups.iter().map(|g| thin_group(g, max_snapshots)).collect();
    let n = thinned.len();
    let mut counts = alloc::vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if math::distance(locations[i], locations[j]) <= min_distance {
                continue;
            }
            if mean_cross_correlation(&thinned[i], &thinned[j])? > threshold {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
    Ok(counts)
}

/// Ambiguity sweep parameters: how far apart two points must sit before a
/// high correlation counts against them, and how similar is "high".
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityConfig {
    /// Distance below which points are neighbors, not lookalikes. Meters.
    pub min_distance: f64,
    pub correlation_threshold: f64,
    /// Snapshots kept per point before the pair sweep; 0 keeps all.
    pub images_per_rp: usize,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig {
            min_distance: 0.5,
            correlation_threshold: 0.8,
            images_per_rp: 0,
        }
    }
}

impl AmbiguityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance > 0.0 && self.min_distance.is_finite()) {
            return Err(Error::Config(format!(
                "neighbor distance must be positive and finite, got {}",
                self.min_distance
            )));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold < 1.0) {
            return Err(Error::Config(format!(
                "correlation threshold must lie in (0, 1), got {}",
                self.correlation_threshold
            )));
        }
        Ok(())
    }
}

/// [`ambiguity_counts`] driven by an [`AmbiguityConfig`].
pub fn count_ambiguous(
    groups: &[Vec<Vec<f64>>],
    locations: &[(f64, f64)],
    config: &AmbiguityConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    ambiguity_counts(
        groups,
        locations,
        config.min_distance,
        config.correlation_threshold,
        config.images_per_rp,
    )
}

/// Fraction of reference points with no ambiguous distant partner.
pub fn zero_ambiguity_fraction(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 1.0;
    }
    counts.iter().filter(|c| **c == 0).count() as f64 / counts.len() as f64
}

/// Summary statistics over a set of location errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Errors in ascending order; the raw material for the CDF.
    pub sorted_errors: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation: the test set is the whole population
    /// under study, not a sample from a larger one.
    pub std: f64,
    /// 80th percentile by nearest rank.
    pub p80: f64,
    pub max: f64,
    /// Free-form run tag (mode, day, stage); empty when unset.
    pub label: String,
}

impl ErrorReport {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Shape("cannot summarize an empty error set".into()));
        }
        for (i, e) in errors.iter().enumerate() {
            if !e.is_finite() || *e < 0.0 {
                return Err(Error::NonFinite(format!("error[{i}] = {e}")));
            }
        }
        let mut sorted = errors.to_vec();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite by the check above"));
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        Ok(ErrorReport {
            p80: percentile_nearest_rank(&sorted, 0.8),
            max: sorted[sorted.len() - 1],
            sorted_errors: sorted,
            mean,
            std: math::sqrt(var),
            label: String::new(),
        })
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = String::from(label);
        self
    }

    /// Nearest-rank percentile: the smallest error with at least `q` of
    /// the mass at or below it.
    pub fn percentile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Config(format!(
                "percentile must lie in (0, 1], got {q}"
            )));
        }
        Ok(percentile_nearest_rank(&self.sorted_errors, q))
    }

    /// Empirical CDF points: (error value, fraction of errors at or below).
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let n = self.sorted_errors.len() as f64;
        self.sorted_errors
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, (i + 1) as f64 / n))
            .collect()
    }
}

/// Nearest-rank percentile over pre-sorted data: the smallest value with
/// at least `q` of the mass at or below it.
fn percentile_nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

/// Side-by-side accuracy deltas of a candidate against a baseline;
/// negative numbers mean the candidate is better.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportComparison {
    pub mean_delta: f64,
    pub p80_delta: f64,
    pub max_delta: f64,
}

pub fn compare_reports(candidate: &ErrorReport, baseline: &ErrorReport) -> ReportComparison {
    ReportComparison {
        mean_delta: candidate.mean - baseline.mean,
        p80_delta: candidate.p80 - baseline.p80,
        max_delta: candidate.max - baseline.max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pearson_matches_a_hand_computation() {
        // cov 3, variances 2 and 14/3: r = 9 / sqrt(84)
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 9.0 / math::sqrt(84.0)).abs() < 1e-15);
    }

    #[test]
    fn pearson_is_exact_on_linear_relations() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = a.iter().map(|x| 3.0 * x + 1.0).collect();
        let down: Vec<f64> = a.iter().map(|x| -2.0 * x + 9.0).collect();
        assert!((pearson(&a, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&a, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_of_constants_is_zero() {
        assert_eq!(pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(pearson(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn self_correlation_counts_the_diagonal() {
        // two orthogonal-looking snapshots with zero mutual correlation:
        // (1 + 0 + 0 + 1) / 4
        let g = vec![vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0]];
        let r = pearson(&g[0], &g[1]).unwrap();
        let expect = (2.0 + 2.0 * r) / 4.0;
        assert!((self_correlation(&g).unwrap() - expect).abs() < 1e-15);
        let uncorrelated = vec![vec![1.0, 2.0, 3.0], vec![1.0, 5.0, 1.0]];
        assert!((pearson(&uncorrelated[0], &uncorrelated[1]).unwrap()).abs() < 1e-15);
        assert!((self_correlation(&uncorrelated).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cross_correlation_is_a_brute_force_mean() {
        let a = vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]];
        let b = vec![vec![2.0, 2.0, 4.0], vec![1.0, 5.0, 3.0], vec![2.0, 3.0, 1.0]];
        let mut sum = 0.0;
        for x in &a {
            for y in &b {
                sum += pearson(x, y).unwrap();
            }
        }
        let got = mean_cross_correlation(&a, &b).unwrap();
        assert!((got - sum / 6.0).abs() < 1e-15);
    }

    #[test]
    fn thinning_is_deterministic_and_spread() {
        let g: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let t = thin_group(&g, 4);
        assert_eq!(t.len(), 4);
        assert_eq!(
            t.iter().map(|r| r[0] as usize).collect::<Vec<_>>(),
            vec![0, 2, 5, 7]
        );
        assert_eq!(thin_group(&g, 20).len(), 10);
    }

    #[test]
    fn ambiguity_flags_only_distant_lookalikes() {
        // three points: 0 and 1 adjacent (never ambiguous), 2 far away.
        // snapshots of 0 and 2 are identical up to an affine map, so they
        // correlate perfectly; 1 is distinct from both.
        let shape = vec![1.0, 5.0, 2.0, 4.0];
        let g0 = vec![shape.clone()];
        let g2 = vec![shape.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<_>>()];
        let g1 = vec![vec![4.0, 1.0, 5.0, 1.0]];
        let groups = vec![g0, g1, g2];
        let locations = vec![(0.0, 0.0), (0.5, 0.0), (10.0, 0.0)];
        let counts = ambiguity_counts(&groups, &locations, 0.5, 0.8, 8).unwrap();
        assert_eq!(counts, vec![1, 0, 1]);
        assert!((zero_ambiguity_fraction(&counts) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn error_report_matches_frozen_statistics() {
        let r = ErrorReport::from_errors(&[3.0, 1.0, 5.0, 2.0, 4.0]).unwrap();
        assert_eq!(r.mean, 3.0);
        assert!((r.std - math::sqrt(2.0)).abs() < 1e-15);
        assert_eq!(r.p80, 4.0);
        assert_eq!(r.max, 5.0);
        assert_eq!(r.sorted_errors, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let cdf = r.cdf();
        assert_eq!(cdf[0], (1.0, 0.2));
        assert_eq!(cdf[4], (5.0, 1.0));
    }

    #[test]
    fn error_report_rejects_bad_input() {
        assert!(ErrorReport::from_errors(&[]).is_err());
        assert!(ErrorReport::from_errors(&[1.0, f64::NAN]).is_err());
        assert!(ErrorReport::from_errors(&[-1.0]).is_err());
    }

    #[test]
    fn percentile_uses_nearest_rank() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_nearest_rank(&sorted, 0.5), 2.0);
        assert_eq!(percentile_nearest_rank(&sorted, 0.8), 4.0);
        assert_eq!(percentile_nearest_rank(&sorted, 0.01), 1.0);
        assert_eq!(percentile_nearest_rank(&sorted, 1.0), 4.0);
    }

    #[test]
    fn raising_the_threshold_never_raises_a_count() {
        let shape = |k: f64| vec![1.0 + k, 5.0, 2.0 + 2.0 * k, 4.0, 3.0 - k];
        let groups: Vec<Vec<Vec<f64>>> = (0..6).map(|i| vec![shape(i as f64 * 0.3)]).collect();
        let locations: Vec<(f64, f64)> = (0..6).map(|i| (2.0 * i as f64, 0.0)).collect();
        let config = AmbiguityConfig::default();
        let loose = count_ambiguous(
            &groups,
            &locations,
            &AmbiguityConfig {
                correlation_threshold: 0.5,
                ..config.clone()
            },
        )
        .unwrap();
        let strict = count_ambiguous(
            &groups,
            &locations,
            &AmbiguityConfig {
                correlation_threshold: 0.9,
                ..config
            },
        )
        .unwrap();
        assert!(strict.iter().zip(&loose).all(|(s, l)| s <= l));
        assert!(loose.iter().sum::<usize>() > 0, "loose threshold should flag something");
    }

    #[test]
    fn percentile_accessor_inverts_the_cdf() {
        let r = ErrorReport::from_errors(&[0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5])
            .unwrap()
            .with_label("probe");
        assert_eq!(r.label, "probe");
        for q in [0.1, 0.25, 0.5, 0.8, 0.95, 1.0] {
            let p = r.percentile(q).unwrap();
            let at_or_below = r.sorted_errors.iter().filter(|e| **e <= p).count() as f64;
            assert!(at_or_below / 8.0 >= q - 1e-12, "q={q} p={p}");
        }
        assert!(r.percentile(0.0).is_err());
        assert!(r.percentile(1.5).is_err());
    }

    #[test]
    fn comparison_reports_signed_deltas() {
        let base = ErrorReport::from_errors(&[2.0, 4.0]).unwrap();
        let cand = ErrorReport::from_errors(&[1.0, 3.0]).unwrap();
        let c = compare_reports(&cand, &base);
        assert_eq!(c.mean_delta, -1.0);
        assert_eq!(c.max_delta, -1.0);
    }
}
