//! Trace and trend-score file formats.
//!
//! Trace file: `example_id,true_label,p_1,...,p_T` — one row per unlabeled
//! example, `true_label` is `NA` when hidden labels are absent. Score file:
//! `example_id,trend_score[,pseudo_label]` — the pseudo-label column appears
//! once a partition exists. All numbers are shortest round-trip decimals, so
//! reading a file back reproduces the values bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::jenks::{PseudoLabel, PseudoLabels};

/// Traces plus optional aligned truth, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecords {
    pub ids: Vec<u64>,
    /// n × T matrix of positive-class probabilities.
    pub rows: Vec<Vec<f64>>,
    pub truth: Option<Vec<u8>>,
}

impl TraceRecords {
    pub fn snapshots(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }
}

/// Scores plus optional pseudo-labels, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecords {
    pub scores: BTreeMap<u64, f64>,
    pub labels: Option<PseudoLabels>,
}

pub fn write_trace_csv(
    path: &Path,
    ids: &[u64],
    rows: &[Vec<f64>],
    truth: Option<&[u8]>,
) -> Result<()> {
    if rows.len() != ids.len() {
        return Err(Error::ShapeMismatch {
            expected: ids.len(),
            got: rows.len(),
        });
    }
    if let Some(t) = truth {
        if t.len() != ids.len() {
            return Err(Error::ShapeMismatch {
                expected: ids.len(),
                got: t.len(),
            });
        }
    }
    let snapshots = rows.first().map(Vec::len).unwrap_or(0);
    let mut out = String::from("example_id,true_label");
    for k in 1..=snapshots {
        out.push_str(&format!(",p_{k}"));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(&id.to_string());
        out.push(',');
        match truth {
            Some(t) => out.push_str(&t[i].to_string()),
            None => out.push_str("NA"),
        }
        for p in &rows[i] {
            out.push(',');
            out.push_str(&format!("{p}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<TraceRecords> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty trace file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "example_id" || cols[1] != "true_label" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("malformed trace header {header:?}"),
        });
    }
    for (k, name) in cols[2..].iter().enumerate() {
        if *name != format!("p_{}", k + 1) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected column p_{}, found {name:?}", k + 1),
            });
        }
    }
    let snapshots = cols.len() - 2;

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut truth: Vec<u8> = Vec::new();
    let mut saw_na = false;
    let mut saw_label = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != snapshots + 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} columns, got {}", snapshots + 2, cells.len()),
            });
        }
        let id: u64 = cells[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad id {:?}", cells[0]),
        })?;
        if cells[1] == "NA" {
            saw_na = true;
        } else {
            saw_label = true;
            let y: u8 = cells[1].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad true_label {:?}", cells[1]),
            })?;
            if y > 1 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("true_label must be 0, 1 or NA, got {y}"),
                });
            }
            truth.push(y);
        }
        if saw_na && saw_label {
            return Err(Error::Parse {
                line: line_no,
                msg: "true_label column mixes NA with 0/1".into(),
            });
        }
        let mut row = Vec::with_capacity(snapshots);
        for cell in &cells[2..] {
            let p: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad score {cell:?}"),
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("score {p} outside [0, 1]"),
                });
            }
            row.push(p);
        }
        ids.push(id);
        rows.push(row);
    }
    Ok(TraceRecords {
        ids,
        rows,
        truth: saw_label.then_some(truth),
    })
}

pub fn write_score_csv(
    path: &Path,
    scores: &BTreeMap<u64, f64>,
    labels: Option<&PseudoLabels>,
) -> Result<()> {
    let mut out = String::from(if labels.is_some() {
        "example_id,trend_score,pseudo_label\n"
    } else {
        "example_id,trend_score\n"
    });
    for (id, score) in scores {
        out.push_str(&format!("{id},{score}"));
        if let Some(labels) = labels {
            let label = labels
                .get(id)
                .ok_or_else(|| Error::Config(format!("pseudo-label missing for example {id}")))?;
            out.push(',');
            out.push_str(&label.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_score_csv(path: &Path) -> Result<ScoreRecords> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty score file".into(),
    })?;
    let has_labels = match header {
        "example_id,trend_score" => false,
        "example_id,trend_score,pseudo_label" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("malformed score header {other:?}"),
            })
        }
    };
    let width = if has_labels { 3 } else { 2 };
    let mut scores = BTreeMap::new();
    let mut labels = PseudoLabels::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {width} columns, got {}", cells.len()),
            });
        }
        let id: u64 = cells[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad id {:?}", cells[0]),
        })?;
        let score: f64 = cells[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad score {:?}", cells[1]),
        })?;
        scores.insert(id, score);
        if has_labels {
            let label = match cells[2] {
                "positive" => PseudoLabel::Positive,
                "negative" => PseudoLabel::Negative,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("bad pseudo_label {other:?}"),
                    })
                }
            };
            labels.insert(id, label);
        }
    }
    Ok(ScoreRecords {
        scores,
        labels: has_labels.then_some(labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let ids = vec![4, 9];
        let rows = vec![vec![0.25, 0.5, 0.75], vec![0.1, 0.2, 0.3]];
        let truth = vec![0u8, 1];
        write_trace_csv(&path, &ids, &rows, Some(&truth)).unwrap();
        let records = read_trace_csv(&path).unwrap();
        assert_eq!(records.ids, ids);
        assert_eq!(records.rows, rows);
        assert_eq!(records.truth.as_deref(), Some(&truth[..]));
        assert_eq!(records.snapshots(), 3);
    }

    #[test]
    fn trace_without_truth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&path, &[1], &[vec![0.5, 0.6]], None).unwrap();
        let records = read_trace_csv(&path).unwrap();
        assert!(records.truth.is_none());
    }

    #[test]
    fn trace_parse_errors_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "example_id,true_label,p_1\n0,0,0.5\n1,0,boom\n").unwrap();
        match read_trace_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn score_round_trip_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let scores: BTreeMap<u64, f64> = [(0, -0.5), (7, 1.25)].into_iter().collect();
        let mut labels = PseudoLabels::new();
        labels.insert(0, PseudoLabel::Negative);
        labels.insert(7, PseudoLabel::Positive);
        write_score_csv(&path, &scores, Some(&labels)).unwrap();
        let records = read_score_csv(&path).unwrap();
        assert_eq!(records.scores, scores);
        assert_eq!(records.labels, Some(labels));
    }

    #[test]
    fn score_file_without_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let scores: BTreeMap<u64, f64> = [(3, 0.125)].into_iter().collect();
        write_score_csv(&path, &scores, None).unwrap();
        let records = read_score_csv(&path).unwrap();
        assert_eq!(records.scores, scores);
        assert!(records.labels.is_none());
    }
}
