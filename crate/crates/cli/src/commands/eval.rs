//! `eval`: consensus-accuracy scoring of predictions against annotations.
//!
//! Inputs: a rank-1 predictions tensor (answer indices) and a line-delimited
//! annotations file (question type plus annotator counts per answer index).
//! Each prediction earns `min(matching annotators / 3, 1)` credit; the JSON
//! report carries the overall mean plus per-question-type means, omitting
//! types that never occur.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use maskvqa_core::eval::{breakdown, QuestionType, ScoreReport};
use serde::Serialize;

use crate::dataset::Annotation;
use crate::pipeline::load_predictions;

/// Command-line arguments.
#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions tensor file, dims (N), answer indices.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Annotations file, one JSON object per line.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output JSON score report.
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Serialize)]
struct TypeRow {
    mean: f64,
    count: usize,
}

#[derive(Serialize)]
struct Report {
    overall: f64,
    count: usize,
    per_type: BTreeMap<&'static str, TypeRow>,
}

fn to_report(score: &ScoreReport) -> Report {
    Report {
        overall: score.overall,
        count: score.count,
        per_type: score
            .per_type
            .iter()
            .map(|(t, s)| {
                (
                    t.as_str(),
                    TypeRow {
                        mean: s.mean,
                        count: s.count,
                    },
                )
            })
            .collect(),
    }
}

/// Loads annotations from a line-delimited JSON file.
pub fn load_annotations(path: &PathBuf) -> anyhow::Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let a: Annotation = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("{} line {}: {e}", path.display(), i + 1))?;
        out.push(a);
    }
    Ok(out)
}

/// Runs the subcommand.
pub fn run(args: &EvalArgs) -> anyhow::Result<()> {
    let predictions = load_predictions(&args.predictions)?;
    let annotations = load_annotations(&args.annotations)?;
    if predictions.len() != annotations.len() {
        anyhow::bail!(
            "{} predictions but {} annotations",
            predictions.len(),
            annotations.len()
        );
    }
    let mut records = Vec::with_capacity(predictions.len());
    for (i, (&p, a)) in predictions.iter().zip(&annotations).enumerate() {
        records.push(a.to_eval(p).with_context(|| format!("annotation {i}"))?);
    }
    let score = breakdown(&records);
    let report = to_report(&score);
    super::write_json_file(&report, &args.out_report)?;

    println!("eval: overall {:.4} over {} questions", report.overall, report.count);
    for t in QuestionType::ALL {
        if let Some(row) = report.per_type.get(t.as_str()) {
            println!("  {}: {:.4} over {}", t.as_str(), row.mean, row.count);
        }
    }
    Ok(())
}
