//! Classification metrics: confusion matrix, accuracy, and macro-F1, all
//! pure functions of (truths, predictions).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Metrics for one task. Confusion rows are indexed by true label and
/// columns by predicted label, so row sums equal per-class sample counts and
/// accuracy equals trace over total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

/// Metrics for both tasks of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub action: Metrics,
    pub asd: Metrics,
}

pub fn compute_metrics(truths: &[usize], predictions: &[usize], classes: usize) -> Result<Metrics> {
    if truths.len() != predictions.len() {
        return Err(PipelineError::input(
            "compute_metrics",
            format!("{} truths against {} predictions", truths.len(), predictions.len()),
        ));
    }
    if truths.is_empty() {
        return Err(PipelineError::input("compute_metrics", "no predictions to score".to_string()));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&t, &p) in truths.iter().zip(predictions) {
        if t >= classes || p >= classes {
            return Err(PipelineError::input(
                "compute_metrics",
                format!("label pair ({t}, {p}) outside 0..{classes}"),
            ));
        }
        confusion[t][p] += 1;
    }
    let trace: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let accuracy = trace as f64 / truths.len() as f64;
    Ok(Metrics { accuracy, macro_f1: macro_f1(&confusion), confusion })
}

/// Unweighted mean over classes of 2PR / (P + R); a class with no true
/// samples and no predictions contributes 0.
pub fn macro_f1(confusion: &[Vec<usize>]) -> f64 {
    let classes = confusion.len();
    let mut sum = 0.0;
    for c in 0..classes {
        let tp = confusion[c][c] as f64;
        let row: usize = confusion[c].iter().sum();
        let col: usize = (0..classes).map(|r| confusion[r][c]).sum();
        let precision = if col > 0 { tp / col as f64 } else { 0.0 };
        let recall = if row > 0 { tp / row as f64 } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    sum / classes as f64
}

/// Write both tasks' metrics as metrics.json plus one confusion CSV per task.
pub fn write_eval_report(dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).expect("metrics serialize");
    fs::write(dir.join("metrics.json"), json)?;
    write_confusion_csv(&dir.join("confusion_action.csv"), &report.action.confusion)?;
    write_confusion_csv(&dir.join("confusion_asd.csv"), &report.asd.confusion)?;
    Ok(())
}

pub fn read_eval_report(dir: &Path) -> Result<EvalReport> {
    let path = dir.join("metrics.json");
    serde_json::from_str(&fs::read_to_string(&path)?)
        .map_err(|e| PipelineError::format(path.display(), e.to_string()))
}

fn write_confusion_csv(path: &Path, confusion: &[Vec<usize>]) -> Result<()> {
    let mut out = String::new();
    for row in confusion {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_fixture_reproduces_hand_computed_values() {
        // Confusion [[50, 10], [5, 35]]: accuracy 85/100; per-class F1 from
        // precision/recall pairs (50/55, 50/60) and (35/45, 35/40).
        let truths: Vec<usize> = std::iter::repeat(0).take(60).chain(std::iter::repeat(1).take(40)).collect();
        let mut preds = vec![0; 50];
        preds.extend(vec![1; 10]);
        preds.extend(vec![0; 5]);
        preds.extend(vec![1; 35]);
        let m = compute_metrics(&truths, &preds, 2).unwrap();
        assert_eq!(m.confusion, vec![vec![50, 10], vec![5, 35]]);
        assert!((m.accuracy - 0.85).abs() < 1e-12);
        assert!((m.macro_f1 - 0.8465).abs() < 1e-4, "macro_f1 {}", m.macro_f1);
    }

    #[test]
    fn perfect_predictions_give_unit_scores_and_diagonal_confusion() {
        let truths = [0, 1, 2, 2, 1, 0, 2];
        let m = compute_metrics(&truths, &truths, 3).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        for (r, row) in m.confusion.iter().enumerate() {
            for (c, &count) in row.iter().enumerate() {
                assert_eq!(count > 0, r == c && truths.contains(&r));
            }
        }
    }

    #[test]
    fn single_class_test_set_scores_its_recall() {
        let truths = [3, 3, 3, 3];
        let preds = [3, 3, 0, 3];
        let m = compute_metrics(&truths, &preds, 11).unwrap();
        assert!((m.accuracy - 0.75).abs() < 1e-12);
        let row_sum: usize = m.confusion[3].iter().sum();
        assert_eq!(row_sum, 4);
        // Only rows for observed classes are populated.
        for (r, row) in m.confusion.iter().enumerate() {
            if r != 3 {
                assert_eq!(row.iter().sum::<usize>(), 0);
            }
        }
    }

    #[test]
    fn length_mismatch_and_out_of_range_labels_are_rejected() {
        assert!(compute_metrics(&[0, 1], &[0], 2).is_err());
        assert!(compute_metrics(&[], &[], 2).is_err());
        assert!(compute_metrics(&[2], &[0], 2).is_err());
    }

    #[test]
    fn report_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let report = EvalReport {
            action: compute_metrics(&[0, 1, 2], &[0, 1, 1], 11).unwrap(),
            asd: compute_metrics(&[0, 1, 1], &[0, 1, 1], 2).unwrap(),
        };
        write_eval_report(dir.path(), &report).unwrap();
        let back = read_eval_report(dir.path()).unwrap();
        assert_eq!(back, report);
        let csv = std::fs::read_to_string(dir.path().join("confusion_asd.csv")).unwrap();
        assert_eq!(csv, "1,0\n0,2\n");
    }
}
