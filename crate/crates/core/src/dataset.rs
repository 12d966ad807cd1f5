//! Scored predictions with binary outcome labels and binary group membership.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_ROWS: usize = 4;

/// Validated (score, label, group) triples.
///
/// Both groups are present and each group contains both outcome classes, so a
/// per-group ROC curve always exists. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    scores: Vec<f64>,
    labels: Vec<bool>,
    groups: Vec<u8>,
}

/// Scores and labels of one group.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupData {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl ScoredDataset {
    /// Validates raw columns. `groups` must hold 0 or 1.
    pub fn new(scores: Vec<f64>, labels: Vec<bool>, groups: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() || scores.len() != groups.len() {
            return Err(Error::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
                groups: groups.len(),
            });
        }
        if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore(row));
        }
        if let Some(row) = groups.iter().position(|&g| g > 1) {
            return Err(Error::InvalidGroup {
                row,
                value: groups[row],
            });
        }
        if scores.len() < MIN_ROWS {
            return Err(Error::TooFewRows(scores.len()));
        }
        check_cells(&labels, &groups)?;
        Ok(Self {
            scores,
            labels,
            groups,
        })
    }

    /// Builds a dataset from `(score, label, group)` rows.
    pub fn from_rows(rows: impl IntoIterator<Item = (f64, bool, u8)>) -> Result<Self> {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for (s, l, g) in rows {
            scores.push(s);
            labels.push(l);
            groups.push(g);
        }
        Self::new(scores, labels, groups)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, bool, u8)> + '_ {
        self.scores
            .iter()
            .zip(&self.labels)
            .zip(&self.groups)
            .map(|((&s, &l), &g)| (s, l, g))
    }

    /// Number of instances in each group.
    pub fn group_sizes(&self) -> [usize; 2] {
        let ones = self.groups.iter().filter(|&&g| g == 1).count();
        [self.len() - ones, ones]
    }

    /// Same scores and labels with a different group column.
    ///
    /// The new column is validated, so a reassignment that leaves a group
    /// without one of the outcome classes is rejected.
    pub fn with_groups(&self, groups: Vec<u8>) -> Result<Self> {
        Self::new(self.scores.clone(), self.labels.clone(), groups)
    }

    /// Splits into the (scores, labels) of group 0 and group 1, preserving row order.
    pub fn split_by_group(&self) -> [GroupData; 2] {
        let mut out = [GroupData::default(), GroupData::default()];
        for (s, l, g) in self.rows() {
            let part = &mut out[g as usize];
            part.scores.push(s);
            part.labels.push(l);
        }
        out
    }

    /// Writes `score,label,group` CSV. Scores use shortest round-trip formatting,
    /// so parsing the output reproduces them bit for bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "score,label,group")?;
        for (s, l, g) in self.rows() {
            writeln!(w, "{},{},{}", s, u8::from(l), g)?;
        }
        Ok(())
    }

    /// Parses `score,label,group` CSV. Label and group columns may hold any
    /// two distinct strings; see [`CategoryMap`].
    pub fn read_csv<R: Read>(r: R) -> Result<(Self, CsvMetadata)> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = reader.headers().map_err(csv_error)?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{name}` (expected header score,label,group)"),
            })
        };
        let (si, li, gi) = (col("score")?, col("label")?, col("group")?);

        let mut scores = Vec::new();
        let mut raw_labels = Vec::new();
        let mut raw_groups = Vec::new();
        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| {
                record.get(i).ok_or_else(|| Error::Parse {
                    line,
                    message: "missing field".into(),
                })
            };
            let score: f64 = field(si)?.parse().map_err(|_| Error::Parse {
                line,
                message: format!("score `{}` is not a number", field(si).unwrap_or("")),
            })?;
            if !score.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("score `{}` is not finite", field(si)?),
                });
            }
            scores.push(score);
            raw_labels.push(field(li)?.to_string());
            raw_groups.push(field(gi)?.to_string());
            lines.push(line);
        }

        let (labels, label_map) = CategoryMap::encode("label", &raw_labels, &lines)?;
        let (groups, group_map) = CategoryMap::encode("group", &raw_groups, &lines)?;
        let labels = labels.into_iter().map(|v| v == 1).collect();
        let ds = Self::new(scores, labels, groups)?;
        Ok((
            ds,
            CsvMetadata {
                label: label_map,
                group: group_map,
            },
        ))
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn check_cells(labels: &[bool], groups: &[u8]) -> Result<()> {
    // counts[group][label]
    let mut counts = [[0usize; 2]; 2];
    for (&l, &g) in labels.iter().zip(groups) {
        counts[g as usize][l as usize] += 1;
    }
    for g in 0..2u8 {
        let c = counts[g as usize];
        if c[0] + c[1] == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    for g in 0..2u8 {
        let c = counts[g as usize];
        if c[0] == 0 || c[1] == 0 {
            return Err(Error::SingleClassGroup(g));
        }
    }
    Ok(())
}

/// How the strings of a binary CSV column were encoded as 0/1.
///
/// Columns whose values are all `0`/`1` (or `false`/`true`) keep that meaning.
/// Any other pair of strings is encoded by first appearance: the first value
/// seen becomes 0, the second 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMap {
    /// `levels[i]` is the input string encoded as `i`.
    pub levels: [String; 2],
}

impl CategoryMap {
    fn encode(column: &str, raw: &[String], lines: &[u64]) -> Result<(Vec<u8>, Self)> {
        let mut seen: Vec<&str> = Vec::with_capacity(2);
        for (v, &line) in raw.iter().zip(lines) {
            if !seen.contains(&v.as_str()) {
                if seen.len() == 2 {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "{column} column has a third distinct value `{v}` (seen `{}`, `{}`)",
                            seen[0], seen[1]
                        ),
                    });
                }
                seen.push(v);
            }
        }
        let levels: [String; 2] = if seen.iter().all(|v| *v == "0" || *v == "1") {
            ["0".into(), "1".into()]
        } else if seen.iter().all(|v| v.eq_ignore_ascii_case("false") || v.eq_ignore_ascii_case("true")) {
            let pick = |want: &str| {
                seen.iter()
                    .find(|v| v.eq_ignore_ascii_case(want))
                    .map_or_else(|| want.to_string(), |v| v.to_string())
            };
            [pick("false"), pick("true")]
        } else {
            let first = seen.first().map_or(String::new(), |v| v.to_string());
            let second = seen.get(1).map_or(String::new(), |v| v.to_string());
            [first, second]
        };
        let index: HashMap<&str, u8> = levels
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i as u8))
            .collect();
        let codes = raw.iter().map(|v| index[v.as_str()]).collect();
        Ok((codes, Self { levels }))
    }
}

/// Category encodings recorded while reading a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvMetadata {
    pub label: CategoryMap,
    pub group: CategoryMap,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal() -> ScoredDataset {
        ScoredDataset::from_rows([(0.1, false, 0), (0.9, true, 0), (0.2, false, 1), (0.8, true, 1)]).unwrap()
    }

    #[test]
    fn four_rows_covering_all_cells_is_valid() {
        assert_eq!(minimal().len(), 4);
    }

    #[test]
    fn single_class_group_is_rejected() {
        let err = ScoredDataset::from_rows([(0.1, false, 0), (0.9, true, 0), (0.2, true, 1), (0.8, true, 1)]).unwrap_err();
        assert_eq!(err, Error::SingleClassGroup(1));
    }

    #[test]
    fn nan_score_is_rejected() {
        let err = ScoredDataset::from_rows([(0.1, false, 0), (f64::NAN, true, 0), (0.2, false, 1), (0.8, true, 1)]).unwrap_err();
        assert_eq!(err, Error::NonFiniteScore(1));
    }

    #[test]
    fn length_mismatch_and_empty_group() {
        assert!(matches!(
            ScoredDataset::new(vec![0.0; 4], vec![true; 3], vec![0; 4]),
            Err(Error::LengthMismatch { .. })
        ));
        let err = ScoredDataset::from_rows([(0.1, false, 0), (0.9, true, 0), (0.2, false, 0), (0.8, true, 0)]).unwrap_err();
        assert_eq!(err, Error::EmptyGroup(1));
        assert_eq!(
            ScoredDataset::from_rows([(0.1, false, 0), (0.9, true, 0), (0.2, false, 1)]).unwrap_err(),
            Error::TooFewRows(3)
        );
    }

    #[test]
    fn split_sizes() {
        let ds = ScoredDataset::from_rows([
            (0.1, false, 0),
            (0.9, true, 0),
            (0.2, false, 1),
            (0.8, true, 1),
            (0.3, false, 1),
            (0.7, true, 1),
        ])
        .unwrap();
        let [a, b] = ds.split_by_group();
        assert_eq!((a.scores.len(), b.scores.len()), (2, 4));
        assert_eq!(ds.group_sizes(), [2, 4]);
    }

    #[test]
    fn csv_maps_arbitrary_categories_by_first_appearance() {
        let text = "score,label,group\n0.5,yes,f\n0.1,no,f\n0.7,yes,m\n0.3,no,m\n";
        let (ds, meta) = ScoredDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(meta.label.levels, ["yes".to_string(), "no".to_string()]);
        assert_eq!(meta.group.levels, ["f".to_string(), "m".to_string()]);
        assert_eq!(ds.labels(), &[false, true, false, true]);
        assert_eq!(ds.groups(), &[0, 0, 1, 1]);
    }

    #[test]
    fn csv_keeps_numeric_encoding() {
        let text = "group,score,label\n1,0.5,1\n1,0.1,0\n0,0.7,1\n0,0.3,0\n";
        let (ds, meta) = ScoredDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(meta.group.levels, ["0".to_string(), "1".to_string()]);
        assert_eq!(ds.groups(), &[1, 1, 0, 0]);
        assert_eq!(ds.labels(), &[true, false, true, false]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let text = "score,label,group\n0.5,1,0\n0.1,0,0\nabc,1,1\n0.3,0,1\n";
        match ScoredDataset::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "score,label,group\n0.5,1,0\n0.1,0,0,9\n";
        assert!(matches!(ScoredDataset::read_csv(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let text = "score,label\n0.5,1\n";
        assert!(matches!(ScoredDataset::read_csv(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    fn arb_dataset() -> impl Strategy<Value = ScoredDataset> {
        proptest::collection::vec((-1e6f64..1e6, any::<bool>(), 0u8..2), 0..60).prop_map(|extra| {
            let mut rows = vec![(0.25, false, 0), (-3.5, true, 0), (1e-300, false, 1), (7.0, true, 1)];
            rows.extend(extra);
            ScoredDataset::from_rows(rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(ds in arb_dataset()) {
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let (back, _) = ScoredDataset::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.labels(), ds.labels());
            prop_assert_eq!(back.groups(), ds.groups());
            for (a, b) in back.scores().iter().zip(ds.scores()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn split_is_a_partition(ds in arb_dataset()) {
            let [a, b] = ds.split_by_group();
            prop_assert_eq!(a.scores.len() + b.scores.len(), ds.len());
            let mut merged: Vec<(u64, bool)> = a.scores.iter().zip(&a.labels)
                .chain(b.scores.iter().zip(&b.labels))
                .map(|(s, &l)| (s.to_bits(), l)).collect();
            let mut orig: Vec<(u64, bool)> = ds.rows().map(|(s, l, _)| (s.to_bits(), l)).collect();
            merged.sort_unstable();
            orig.sort_unstable();
            prop_assert_eq!(merged, orig);
        }
    }
}
