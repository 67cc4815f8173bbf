//! Weighted three-way accuracy, confusion counts and left/right error reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::{Label, PairDataset};
use crate::ensemble::Prediction;
use crate::error::{Error, Result};

/// Labels the metric is defined over, in matrix order.
pub const SCORED_LABELS: [Label; 3] = [Label::Left, Label::Right, Label::Draw];

fn scored_index(label: Label) -> Option<usize> {
    match label {
        Label::Left => Some(0),
        Label::Right => Some(1),
        Label::Draw => Some(2),
        Label::Bad => None,
    }
}

/// Agreement weights indexed by (gold, predicted). A draw on either side of a
/// left/right pair earns half credit; confusing left with right earns none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMatrix(pub [[f64; 3]; 3]);

impl Default for WeightMatrix {
    fn default() -> Self {
        WeightMatrix([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5], [0.5, 0.5, 1.0]])
    }
}

impl WeightMatrix {
    /// `None` when either label is `Bad`.
    pub fn weight(&self, gold: Label, pred: Label) -> Option<f64> {
        Some(self.0[scored_index(gold)?][scored_index(pred)?])
    }
}

fn check_aligned(gold: &[Label], pred: &[Label]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if pred.contains(&Label::Bad) {
        return Err(Error::InvalidArgument("predictions must not contain \"bad\"".into()));
    }
    Ok(())
}

pub fn weighted_accuracy(gold: &[Label], pred: &[Label]) -> Result<f64> {
    weighted_accuracy_with(&WeightMatrix::default(), gold, pred)
}

pub fn weighted_accuracy_with(weights: &WeightMatrix, gold: &[Label], pred: &[Label]) -> Result<f64> {
    check_aligned(gold, pred)?;
    let (sum, n) = gold
        .iter()
        .zip(pred)
        .filter_map(|(&g, &p)| weights.weight(g, p))
        .fold((0.0, 0usize), |(s, n), w| (s + w, n + 1));
    if n == 0 {
        return Err(Error::MetricUndefined);
    }
    Ok(sum / n as f64)
}

/// Counts indexed by (gold, predicted) over left/right/draw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion(pub [[usize; 3]; 3]);

impl Confusion {
    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn render(&self) -> String {
        let mut s = String::from("gold \\ pred      left     right      draw\n");
        for (i, g) in SCORED_LABELS.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:<12}{:>10}{:>10}{:>10}",
                g.as_str(),
                self.0[i][0],
                self.0[i][1],
                self.0[i][2]
            );
        }
        s
    }
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<Confusion> {
    check_aligned(gold, pred)?;
    let mut m = Confusion::default();
    for (&g, &p) in gold.iter().zip(pred) {
        if let (Some(gi), Some(pi)) = (scored_index(g), scored_index(p)) {
            m.0[gi][pi] += 1;
        }
    }
    Ok(m)
}

/// A pair whose gold winner was predicted to lose.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCase {
    pub index: usize,
    pub left_url: String,
    pub right_url: String,
    pub gold: Label,
    pub pred: Label,
    pub margin: f64,
}

/// Left/right confusions, most confident first, at most `limit` of them.
/// Inputs are aligned by position.
pub fn error_report(dataset: &PairDataset, predictions: &[Prediction], limit: usize) -> Vec<ErrorCase> {
    let mut errors: Vec<ErrorCase> = dataset
        .records
        .iter()
        .zip(predictions)
        .enumerate()
        .filter(|(_, (rec, p))| {
            matches!(
                (rec.label, p.label),
                (Label::Left, Label::Right) | (Label::Right, Label::Left)
            )
        })
        .map(|(index, (rec, p))| ErrorCase {
            index,
            left_url: rec.left_id.clone(),
            right_url: rec.right_id.clone(),
            gold: rec.label,
            pred: p.label,
            margin: (p.scores.r_right - p.scores.r_left).abs(),
        })
        .collect();
    // stable sort keeps file order among equal margins
    errors.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    errors.truncate(limit);
    errors
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub n_scored: usize,
    pub n_bad: usize,
    pub confusion: Confusion,
    pub errors: Vec<ErrorCase>,
}

impl EvaluationReport {
    pub fn build(dataset: &PairDataset, predictions: &[Prediction], error_limit: usize) -> Result<Self> {
        let gold = dataset.labels();
        let pred: Vec<Label> = predictions.iter().map(|p| p.label).collect();
        let accuracy = weighted_accuracy(&gold, &pred)?;
        let confusion = confusion(&gold, &pred)?;
        Ok(EvaluationReport {
            accuracy,
            n_scored: confusion.total(),
            n_bad: gold.iter().filter(|&&g| g == Label::Bad).count(),
            confusion,
            errors: error_report(dataset, predictions, error_limit),
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "weighted accuracy: {:.4}", self.accuracy);
        let _ = writeln!(s, "scored pairs: {} (bad omitted: {})", self.n_scored, self.n_bad);
        s.push('\n');
        s.push_str(&self.confusion.render());
        if !self.errors.is_empty() {
            let _ = writeln!(s, "\nmost confident left/right errors:");
            for e in &self.errors {
                let _ = writeln!(
                    s,
                    "  #{:<6} gold={:<5} pred={:<5} margin={:.4}  {}  |  {}",
                    e.index, e.gold, e.pred, e.margin, e.left_url, e.right_url
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PairRecord;
    use crate::ensemble::PairScores;
    use Label::*;

    #[test]
    fn metric_examples() {
        assert_eq!(weighted_accuracy(&[Left], &[Left]).unwrap(), 1.0);
        assert_eq!(weighted_accuracy(&[Left], &[Draw]).unwrap(), 0.5);
        assert_eq!(weighted_accuracy(&[Bad, Left], &[Right, Left]).unwrap(), 1.0);
        assert_eq!(weighted_accuracy(&[Left, Right], &[Right, Left]).unwrap(), 0.0);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(
            weighted_accuracy(&[Left], &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            weighted_accuracy(&[Bad, Bad], &[Left, Draw]),
            Err(Error::MetricUndefined)
        ));
        assert!(matches!(weighted_accuracy(&[], &[]), Err(Error::MetricUndefined)));
        assert!(weighted_accuracy(&[Left], &[Bad]).is_err());
    }

    #[test]
    fn weights_are_symmetric() {
        let w = WeightMatrix::default();
        for g in SCORED_LABELS {
            for p in SCORED_LABELS {
                assert_eq!(w.weight(g, p), w.weight(p, g));
            }
            assert_eq!(w.weight(g, g), Some(1.0));
        }
    }

    #[test]
    fn confusion_counts() {
        let m = confusion(&[Left, Right, Draw, Bad], &[Left, Right, Draw, Left]).unwrap();
        assert_eq!(m.0, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        assert_eq!(confusion(&[Bad], &[Left]).unwrap(), Confusion::default());
        let m = confusion(&[Left], &[Right]).unwrap();
        assert_eq!(m.0[0][1], 1);
        assert_eq!(m.total(), 1);
    }

    fn fixture(margins: &[(Label, Label, f64)]) -> (PairDataset, Vec<Prediction>) {
        let mut recs = Vec::new();
        let mut preds = Vec::new();
        for (i, &(g, p, m)) in margins.iter().enumerate() {
            let rec = PairRecord::new(format!("l{i}"), format!("r{i}"), g).unwrap();
            preds.push(Prediction {
                record: rec.clone(),
                scores: PairScores {
                    r_left: 0.0,
                    r_right: m,
                },
                label: p,
            });
            recs.push(rec);
        }
        (PairDataset::new(recs), preds)
    }

    #[test]
    fn error_report_ranks_by_margin() {
        let (ds, preds) = fixture(&[
            (Left, Right, 0.3),
            (Right, Left, -0.9),
            (Left, Draw, 0.05),
            (Left, Right, 0.5),
            (Right, Left, -0.2),
            (Left, Right, 1.5),
            (Draw, Left, -2.0),
            (Left, Right, 0.4),
        ]);
        // brute-force oracle: all opposite-sign errors by descending |d|
        let mut oracle: Vec<(usize, f64)> = ds
            .records
            .iter()
            .zip(&preds)
            .enumerate()
            .filter(|(_, (r, p))| r.label != Draw && p.label != Draw && r.label != p.label)
            .map(|(i, (_, p))| (i, p.scores.r_right.abs()))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let got: Vec<usize> = error_report(&ds, &preds, 3).iter().map(|e| e.index).collect();
        assert_eq!(got, oracle[..3].iter().map(|o| o.0).collect::<Vec<_>>());
        assert_eq!(got, vec![5, 1, 3]);
        assert!(error_report(&ds, &preds, 0).is_empty());

        let (ds, preds) = fixture(&[(Left, Left, -1.0), (Draw, Right, 1.0)]);
        assert!(error_report(&ds, &preds, 10).is_empty());
    }

    #[test]
    fn report_renders_four_decimals() {
        let (ds, preds) = fixture(&[(Left, Left, -1.0), (Right, Draw, 0.0)]);
        let report = EvaluationReport::build(&ds, &preds, 5).unwrap();
        assert!(report.render().starts_with("weighted accuracy: 0.7500\n"));
    }
}
