//! Scoring: the consensus VQA accuracy metric and per-question-type
//! breakdowns.
//!
//! Each question carries up to ten free-response human answers; a prediction
//! scores `min(matching_annotators / 3, 1)`, so agreeing with three or more
//! annotators counts as fully correct and integer counts make exactly four
//! scores attainable: 0, 1/3, 2/3, 1.

use alloc::collections::BTreeMap;
use alloc::format;

use crate::error::{Error, Result};

/// Answer-type buckets used for the score breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QuestionType {
    YesNo,
    Number,
    Other,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] =
        [QuestionType::YesNo, QuestionType::Number, QuestionType::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            QuestionType::YesNo => "yesno",
            QuestionType::Number => "number",
            QuestionType::Other => "other",
        }
    }
}

impl core::str::FromStr for QuestionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yesno" => Ok(QuestionType::YesNo),
            "number" => Ok(QuestionType::Number),
            "other" => Ok(QuestionType::Other),
            _ => Err(Error::Domain {
                context: "QuestionType::from_str",
                detail: format!("unknown question type {s:?} (expected yesno, number or other)"),
            }),
        }
    }
}

/// One scored question: the model's answer index, how many of the (at most
/// ten) annotators gave each answer, and the question's type bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedAnswer {
    pub predicted: usize,
    pub human_counts: BTreeMap<usize, u32>,
    pub qtype: QuestionType,
}

impl AnnotatedAnswer {
    /// Validates the ten-annotator budget.
    pub fn new(
        predicted: usize,
        human_counts: BTreeMap<usize, u32>,
        qtype: QuestionType,
    ) -> Result<Self> {
        let total: u32 = human_counts.values().sum();
        if total > 10 {
            return Err(Error::Domain {
                context: "AnnotatedAnswer",
                detail: format!("{total} annotator answers recorded, at most 10 allowed"),
            });
        }
        Ok(AnnotatedAnswer {
            predicted,
            human_counts,
            qtype,
        })
    }

    /// This question's accuracy under the consensus metric.
    pub fn accuracy(&self) -> f64 {
        vqa_accuracy(self.predicted, &self.human_counts)
    }
}

/// Consensus accuracy: `min(count(predicted) / 3, 1)`.
pub fn vqa_accuracy(predicted: usize, human_counts: &BTreeMap<usize, u32>) -> f64 {
    let c = *human_counts.get(&predicted).unwrap_or(&0) as f64;
    (c / 3.0).min(1.0)
}

/// Mean accuracy and question count for one type bucket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeScore {
    pub mean: f64,
    pub count: usize,
}

/// Aggregated scores: the overall mean plus one entry per question type that
/// actually occurs (absent types are omitted, never reported as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub overall: f64,
    pub count: usize,
    pub per_type: BTreeMap<QuestionType, TypeScore>,
}

/// Averages [`vqa_accuracy`] over `results`, overall and within each type.
/// An empty input yields an empty report with overall 0.
pub fn breakdown(results: &[AnnotatedAnswer]) -> ScoreReport {
    let mut sum = 0.0;
    let mut sums: BTreeMap<QuestionType, (f64, usize)> = BTreeMap::new();
    for r in results {
        let a = r.accuracy();
        sum += a;
        let e = sums.entry(r.qtype).or_insert((0.0, 0));
        e.0 += a;
        e.1 += 1;
    }
    let per_type = sums
        .into_iter()
        .map(|(t, (s, n))| {
            (
                t,
                TypeScore {
                    mean: s / n as f64,
                    count: n,
                },
            )
        })
        .collect();
    ScoreReport {
        overall: if results.is_empty() {
            0.0
        } else {
            sum / results.len() as f64
        },
        count: results.len(),
        per_type,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::str::FromStr;

    fn counts(pairs: &[(usize, u32)]) -> BTreeMap<usize, u32> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn accuracy_hand_cases() {
        // three annotators agreeing -> full credit
        assert_eq!(vqa_accuracy(5, &counts(&[(5, 3), (2, 7)])), 1.0);
        // nobody said it -> zero
        assert_eq!(vqa_accuracy(1, &counts(&[(5, 3)])), 0.0);
        // two of ten -> 2/3
        assert!((vqa_accuracy(5, &counts(&[(5, 2), (0, 8)])) - 2.0 / 3.0).abs() < 1e-15);
        // empty annotation map -> zero
        assert_eq!(vqa_accuracy(0, &BTreeMap::new()), 0.0);
    }

    #[test]
    fn only_four_scores_are_attainable() {
        let attainable = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for c in 0..=10u32 {
            let a = vqa_accuracy(0, &counts(&[(0, c)]));
            assert!(
                attainable.contains(&a),
                "count {c} gave unexpected score {a}"
            );
        }
    }

    #[test]
    fn annotator_budget_is_enforced() {
        assert!(AnnotatedAnswer::new(0, counts(&[(0, 10)]), QuestionType::Other).is_ok());
        assert!(AnnotatedAnswer::new(0, counts(&[(0, 6), (1, 5)]), QuestionType::Other).is_err());
    }

    #[test]
    fn breakdown_matches_hand_averages_and_omits_absent_types() {
        let results = [
            // yesno: scores 1.0 and 1/3 -> mean 2/3
            AnnotatedAnswer::new(0, counts(&[(0, 5)]), QuestionType::YesNo).unwrap(),
            AnnotatedAnswer::new(1, counts(&[(1, 1), (0, 9)]), QuestionType::YesNo).unwrap(),
            // number: score 0 -> mean 0
            AnnotatedAnswer::new(2, counts(&[(3, 10)]), QuestionType::Number).unwrap(),
        ];
        let report = breakdown(&results);
        assert_eq!(report.count, 3);
        let want_overall = (1.0 + 1.0 / 3.0 + 0.0) / 3.0;
        assert!((report.overall - want_overall).abs() < 1e-15);
        let yn = report.per_type[&QuestionType::YesNo];
        assert_eq!(yn.count, 2);
        assert!((yn.mean - 2.0 / 3.0).abs() < 1e-15);
        let num = report.per_type[&QuestionType::Number];
        assert_eq!(num.count, 1);
        assert_eq!(num.mean, 0.0);
        // no "other" questions -> key absent entirely
        assert!(!report.per_type.contains_key(&QuestionType::Other));
    }

    #[test]
    fn overall_mean_ignores_ordering() {
        let mut results: Vec<AnnotatedAnswer> = (0..7)
            .map(|k| {
                AnnotatedAnswer::new(
                    k % 3,
                    counts(&[(k % 3, (k % 4) as u32), (9, 3)]),
                    QuestionType::ALL[k % 3],
                )
                .unwrap()
            })
            .collect();
        let a = breakdown(&results);
        results.reverse();
        let b = breakdown(&results);
        assert_eq!(a.overall, b.overall);
        assert_eq!(a.per_type, b.per_type);
    }

    #[test]
    fn all_perfect_means_all_ones() {
        let results: Vec<AnnotatedAnswer> = QuestionType::ALL
            .iter()
            .map(|&t| AnnotatedAnswer::new(4, counts(&[(4, 10)]), t).unwrap())
            .collect();
        let report = breakdown(&results);
        assert_eq!(report.overall, 1.0);
        for t in QuestionType::ALL {
            assert_eq!(report.per_type[&t].mean, 1.0);
        }
    }

    #[test]
    fn empty_input_gives_empty_report() {
        let report = breakdown(&[]);
        assert_eq!(report.count, 0);
        assert_eq!(report.overall, 0.0);
        assert!(report.per_type.is_empty());
    }

    #[test]
    fn question_types_round_trip() {
        for t in QuestionType::ALL {
            assert_eq!(QuestionType::from_str(t.as_str()).unwrap(), t);
        }
        assert!(QuestionType::from_str("color").is_err());
    }
}
