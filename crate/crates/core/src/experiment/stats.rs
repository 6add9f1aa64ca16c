//! Learning-curve aggregation and the paired t-test.

use serde::{Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::experiment::RepetitionCurve;
use crate::sampling::Strategy;

fn finite_or_string<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    #[serde(serialize_with = "finite_or_string")]
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
    pub mean_difference: f64,
}

/// Two-sided paired t-test on `a - b`.
///
/// All-zero differences give `t = 0, p = 1`; zero variance with a nonzero
/// mean gives an infinite statistic and `p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidSeries { a: a.len(), b: b.len() });
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    let (statistic, p_value) = if diffs.iter().all(|&d| d == 0.0) {
        (0.0, 1.0)
    } else if var == 0.0 {
        (f64::INFINITY.copysign(mean), 0.0)
    } else {
        let t = mean / (var.sqrt() / n.sqrt());
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TTest {
        statistic,
        p_value,
        degrees_of_freedom: df,
        mean_difference: mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    /// Mean first query reaching the threshold; repetitions that never do
    /// count as `queries + 1`.
    pub mean_queries: f64,
    pub reached: usize,
    pub not_reached: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub repetitions: usize,
    /// Mean F1 over repetitions at each query.
    pub mean_f1_curve: Vec<f64>,
    pub mean_accuracy_curve: Vec<f64>,
    /// Mean of `mean_f1_curve`.
    pub mean_f1: f64,
    pub per_repetition_mean_f1: Vec<f64>,
    pub queries_to_threshold: ThresholdSummary,
    pub truncated_repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub strategy: Strategy,
    pub baseline: Strategy,
    /// Paired over queries on the mean curves.
    pub per_query: Option<TTest>,
    /// Paired over repetitions on per-repetition mean F1.
    pub per_repetition: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub queries: usize,
    pub strategies: Vec<StrategySummary>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentResult {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategySummary> {
        self.strategies.iter().find(|x| x.strategy == s)
    }

    pub fn comparison(&self, strategy: Strategy, baseline: Strategy) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.strategy == strategy && c.baseline == baseline)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// First 1-based query whose F1 reaches `threshold`.
pub fn first_reaching(curve: &RepetitionCurve, threshold: f64) -> Option<usize> {
    curve.points.iter().find(|p| p.f1 >= threshold).map(|p| p.query)
}

fn summarize_strategy(strategy: Strategy, curves: &[&RepetitionCurve], queries: usize, threshold: f64) -> StrategySummary {
    let longest = curves.iter().map(|c| c.points.len()).max().unwrap_or(0);
    let mut mean_f1_curve = Vec::with_capacity(longest);
    let mut mean_accuracy_curve = Vec::with_capacity(longest);
    for t in 0..longest {
        let at: Vec<_> = curves.iter().filter_map(|c| c.points.get(t)).collect();
        mean_f1_curve.push(mean(&at.iter().map(|p| p.f1).collect::<Vec<_>>()));
        mean_accuracy_curve.push(mean(&at.iter().map(|p| p.accuracy).collect::<Vec<_>>()));
    }
    let firsts: Vec<Option<usize>> = curves.iter().map(|c| first_reaching(c, threshold)).collect();
    let reached = firsts.iter().filter(|f| f.is_some()).count();
    let mean_queries = mean(
        &firsts
            .iter()
            .map(|f| f.unwrap_or(queries + 1) as f64)
            .collect::<Vec<_>>(),
    );
    StrategySummary {
        strategy,
        repetitions: curves.len(),
        mean_f1: mean(&mean_f1_curve),
        mean_f1_curve,
        mean_accuracy_curve,
        per_repetition_mean_f1: curves
            .iter()
            .map(|c| mean(&c.points.iter().map(|p| p.f1).collect::<Vec<_>>()))
            .collect(),
        queries_to_threshold: ThresholdSummary {
            threshold,
            mean_queries,
            reached,
            not_reached: curves.len() - reached,
        },
        truncated_repetitions: curves.iter().filter(|c| c.exhausted).count(),
    }
}

/// Aggregate curves per strategy (in [`Strategy`] order) and compare every
/// later strategy against every earlier one.
pub fn summarize(curves: &[RepetitionCurve], queries: usize, threshold: f64) -> ExperimentResult {
    let mut present: Vec<Strategy> = curves.iter().map(|c| c.strategy).collect();
    present.sort();
    present.dedup();
    let strategies: Vec<StrategySummary> = present
        .iter()
        .map(|&s| {
            let mut mine: Vec<&RepetitionCurve> = curves.iter().filter(|c| c.strategy == s).collect();
            mine.sort_by_key(|c| c.repetition);
            summarize_strategy(s, &mine, queries, threshold)
        })
        .collect();
    let mut comparisons = Vec::new();
    for (j, later) in strategies.iter().enumerate() {
        for earlier in &strategies[..j] {
            let n = later.mean_f1_curve.len().min(earlier.mean_f1_curve.len());
            comparisons.push(Comparison {
                strategy: later.strategy,
                baseline: earlier.strategy,
                per_query: paired_t_test(&later.mean_f1_curve[..n], &earlier.mean_f1_curve[..n]).ok(),
                per_repetition: paired_t_test(&later.per_repetition_mean_f1, &earlier.per_repetition_mean_f1).ok(),
            });
        }
    }
    ExperimentResult {
        queries,
        strategies,
        comparisons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::QueryMetrics;

    fn curve(strategy: Strategy, repetition: usize, f1: &[f64]) -> RepetitionCurve {
        RepetitionCurve {
            strategy,
            repetition,
            seed: repetition as u64,
            points: f1
                .iter()
                .enumerate()
                .map(|(i, &f)| QueryMetrics {
                    query: i + 1,
                    f1: f,
                    accuracy: f,
                    selected_index: i,
                })
                .collect(),
            exhausted: false,
        }
    }

    #[test]
    fn identical_curves_give_p_one() {
        let t = paired_t_test(&[0.1, 0.5, 0.3], &[0.1, 0.5, 0.3]).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
    }

    #[test]
    fn constant_difference_is_infinite() {
        let t = paired_t_test(&[2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.statistic, f64::INFINITY);
        assert_eq!(t.p_value, 0.0);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"statistic\":\"inf\""), "{json}");
    }

    #[test]
    fn hand_formula_fixture() {
        // d = [1, 2, 3, 4, 6]: mean 3.2, s^2 = 3.7, t = 3.2 / sqrt(3.7 / 5)
        let a = [2.0, 4.0, 6.0, 8.0, 11.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t = paired_t_test(&a, &b).unwrap();
        let expect = 3.2 / (3.7f64 / 5.0).sqrt();
        assert!((t.statistic - expect).abs() < 1e-12);
        assert_eq!(t.degrees_of_freedom, 4);
        // Two-sided p for t = 3.71992 with 4 df, from scipy.stats.ttest_rel.
        assert!((t.p_value - 0.020_475_874_420_910_676).abs() < 1e-9, "{}", t.p_value);
    }

    #[test]
    fn rejects_short_or_ragged() {
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn two_handmade_curves() {
        let curves = [curve(Strategy::Qbc, 0, &[0.5, 0.6]), curve(Strategy::Qbc, 1, &[0.7, 0.8])];
        let r = summarize(&curves, 2, 0.65);
        let s = r.strategy(Strategy::Qbc).unwrap();
        assert!((s.mean_f1_curve[0] - 0.6).abs() < 1e-12 && (s.mean_f1_curve[1] - 0.7).abs() < 1e-12);
        assert!((s.mean_f1 - 0.65).abs() < 1e-12);
        // rep 0 never reaches 0.65 (counts as 3), rep 1 reaches at query 1.
        assert_eq!(s.queries_to_threshold.mean_queries, 2.0);
        assert_eq!((s.queries_to_threshold.reached, s.queries_to_threshold.not_reached), (1, 1));
    }

    #[test]
    fn single_repetition_mean_is_itself() {
        let curves = [curve(Strategy::Alpp, 0, &[0.2, 0.4, 0.3])];
        let s = summarize(&curves, 3, 0.0);
        let s = s.strategy(Strategy::Alpp).unwrap();
        assert_eq!(s.mean_f1_curve, vec![0.2, 0.4, 0.3]);
        assert_eq!(s.queries_to_threshold.mean_queries, 1.0);
    }

    #[test]
    fn comparisons_pair_later_with_earlier() {
        let curves = [
            curve(Strategy::Random, 0, &[0.1, 0.2, 0.3]),
            curve(Strategy::Qbc, 0, &[0.2, 0.3, 0.5]),
            curve(Strategy::Alpp, 0, &[0.3, 0.5, 0.6]),
        ];
        let r = summarize(&curves, 3, 0.5);
        assert_eq!(r.comparisons.len(), 3);
        let c = r.comparison(Strategy::Alpp, Strategy::Qbc).unwrap();
        assert!(c.per_query.unwrap().mean_difference > 0.0);
        // One repetition is too few for the per-repetition test.
        assert!(c.per_repetition.is_none());
    }
}
