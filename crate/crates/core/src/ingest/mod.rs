//! Survey ingestion: typed CSV loading, satisfaction consolidation,
//! indicator encoding and text topic features, assembled into a non-negative
//! model matrix. Demographic columns go to a side table.

mod schema;
mod tfidf;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use schema::{
    default_satisfaction_mapping, ColumnKind, ColumnSpec, Sentiment, SurveySchema, TopicRescale,
};
pub use tfidf::{tfidf, tokenize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::nmf::{nmf, NmfConfig};
use schema::normalize_choice;

/// CSV contents with empty cells as `None`, columns in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<String>>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].clone()).collect())
    }
}

pub fn read_table<R: Read>(input: R, schema: &SurveySchema, source_name: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let parse_err = |line: usize, detail: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        detail,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("column {h:?} appears twice in {source_name}")));
        }
        if schema.column(h).is_none() {
            return Err(Error::Schema(format!("unknown column {h:?} in {source_name}")));
        }
    }
    for c in &schema.columns {
        if !seen.contains(c.name.as_str()) {
            return Err(Error::Schema(format!(
                "column {:?} missing from the header of {source_name}",
                c.name
            )));
        }
    }

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        rows.push(
            rec.iter()
                .map(|v| {
                    let v = v.trim();
                    (!v.is_empty()).then(|| v.to_string())
                })
                .collect(),
        );
    }
    Ok(RawTable { headers, rows })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &SurveySchema) -> Result<RawTable> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(f, schema, &path.display().to_string())
}

/// Maps each cell through `mapping` (case-insensitive); missing cells are neutral.
pub fn consolidate_satisfaction(
    column: &[Option<String>],
    mapping: &BTreeMap<String, Sentiment>,
) -> Result<Vec<Sentiment>> {
    let norm: BTreeMap<String, Sentiment> = mapping
        .iter()
        .map(|(k, v)| (normalize_choice(k), *v))
        .collect();
    let mut unmapped = BTreeSet::new();
    let out: Vec<Sentiment> = column
        .iter()
        .map(|cell| match cell {
            None => Sentiment::Neutral,
            Some(v) => norm.get(&normalize_choice(v)).copied().unwrap_or_else(|| {
                unmapped.insert(v.clone());
                Sentiment::Neutral
            }),
        })
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::Schema(format!(
            "unmapped satisfaction choices: {:?}",
            unmapped.into_iter().collect::<Vec<_>>()
        )));
    }
    Ok(out)
}

/// `(is_pos, is_neg)` indicator columns as an n×2 matrix.
pub fn indicator_encode(column: &[Sentiment]) -> Matrix<f64> {
    Matrix::from_fn(column.len(), 2, |i, j| match (column[i], j) {
        (Sentiment::Pos, 0) | (Sentiment::Neg, 1) => 1.0,
        _ => 0.0,
    })
}

/// One indicator per choice; missing cells encode as all zeros.
pub fn categorical_encode(column: &[Option<String>], choices: &[String]) -> Result<Matrix<f64>> {
    let index: BTreeMap<String, usize> = choices
        .iter()
        .enumerate()
        .map(|(i, c)| (normalize_choice(c), i))
        .collect();
    let mut m = Matrix::zeros(column.len(), choices.len());
    let mut unknown = BTreeSet::new();
    for (i, cell) in column.iter().enumerate() {
        if let Some(v) = cell {
            match index.get(&normalize_choice(v)) {
                Some(&j) => m.set(i, j, 1.0),
                None => {
                    unknown.insert(v.clone());
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::Schema(format!(
            "values outside the declared choices: {:?}",
            unknown.into_iter().collect::<Vec<_>>()
        )));
    }
    Ok(m)
}

/// Ordinal column on [0, 1]: level index over (levels − 1), or numeric min–max
/// scaling. Missing cells encode as 0.
pub fn ordinal_encode(column: &[Option<String>], levels: Option<&[String]>) -> Result<Matrix<f64>> {
    let values: Vec<Option<f64>> = match levels {
        Some(levels) => {
            let index: BTreeMap<String, usize> = levels
                .iter()
                .enumerate()
                .map(|(i, l)| (normalize_choice(l), i))
                .collect();
            let denom = (levels.len().max(2) - 1) as f64;
            column
                .iter()
                .map(|c| match c {
                    None => Ok(None),
                    Some(v) => index
                        .get(&normalize_choice(v))
                        .map(|&i| Some(i as f64 / denom))
                        .ok_or_else(|| Error::Schema(format!("unknown ordinal level {v:?}"))),
                })
                .collect::<Result<_>>()?
        }
        None => {
            let raw: Vec<Option<f64>> = column
                .iter()
                .map(|c| match c {
                    None => Ok(None),
                    Some(v) => v
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(Some)
                        .ok_or_else(|| Error::Schema(format!("non-numeric ordinal value {v:?}"))),
                })
                .collect::<Result<_>>()?;
            let present = raw.iter().flatten();
            let lo = present.clone().copied().fold(f64::INFINITY, f64::min);
            let hi = present.copied().fold(f64::NEG_INFINITY, f64::max);
            raw.into_iter()
                .map(|v| v.map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }))
                .collect()
        }
    };
    Ok(Matrix::from_fn(values.len(), 1, |i, _| values[i].unwrap_or(0.0)))
}

/// NMF topic coefficients of a document-term matrix, rescaled to a maximum
/// of 1 per topic column (or per respondent row). All-zero columns or rows
/// stay zero and produce a warning.
pub fn text_topic_features(
    doc_term: &Matrix<f64>,
    k: usize,
    config: &NmfConfig,
    rescale: TopicRescale,
) -> Result<(Matrix<f64>, Vec<String>)> {
    let fact = nmf(doc_term, &config.clone().with_rank(k))?;
    let mut w = fact.w;
    let mut warnings = Vec::new();
    match rescale {
        TopicRescale::Column => {
            for j in 0..w.n_cols() {
                let max = w.col(j).into_iter().fold(0.0f64, f64::max);
                if max > 0.0 {
                    for i in 0..w.n_rows() {
                        w.set(i, j, w.get(i, j) / max);
                    }
                } else {
                    warnings.push(format!("topic {} has all-zero coefficients", j + 1));
                }
            }
        }
        TopicRescale::Row => {
            for i in 0..w.n_rows() {
                let row = w.row_mut(i);
                let max = row.iter().copied().fold(0.0f64, f64::max);
                if max > 0.0 {
                    row.iter_mut().for_each(|v| *v /= max);
                } else {
                    warnings.push(format!("respondent {i} has all-zero topic coefficients"));
                }
            }
        }
    }
    Ok((w, warnings))
}

/// A block of encoded features.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPart {
    pub names: Vec<String>,
    pub matrix: Matrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemographicTable {
    pub names: Vec<String>,
    /// Row-major, one inner vector per respondent.
    pub rows: Vec<Vec<Option<String>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSurvey {
    pub x: Matrix<f64>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub demographics: DemographicTable,
    pub warnings: Vec<String>,
}

/// Concatenates parts left to right.
pub fn assemble(
    parts: &[EncodedPart],
    row_ids: Vec<String>,
    demographics: DemographicTable,
) -> Result<EncodedSurvey> {
    let n = row_ids.len();
    for p in parts {
        if p.matrix.n_rows() != n || p.names.len() != p.matrix.n_cols() {
            return Err(Error::shape(
                "assemble",
                format!(
                    "part {:?} is {:?} with {} names; expected {n} rows",
                    p.names.first(),
                    p.matrix.shape(),
                    p.names.len()
                ),
            ));
        }
    }
    if !demographics.rows.is_empty() && demographics.rows.len() != n {
        return Err(Error::shape("assemble", "demographic table row count differs"));
    }
    let x = if parts.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::hstack(&parts.iter().map(|p| &p.matrix).collect::<Vec<_>>())?
    };
    Ok(EncodedSurvey {
        x,
        feature_names: parts.iter().flat_map(|p| p.names.clone()).collect(),
        row_ids,
        demographics,
        warnings: Vec::new(),
    })
}

enum Encoded {
    Part(EncodedPart, Vec<String>),
    Demographic(String, Vec<Option<String>>),
    Skip,
}

/// Encodes every schema column, in schema order.
pub fn encode_survey(table: &RawTable, schema: &SurveySchema, nmf_config: &NmfConfig) -> Result<EncodedSurvey> {
    let encoded: Vec<Encoded> = schema
        .columns
        .par_iter()
        .map(|spec| encode_column(table, spec, nmf_config))
        .collect::<Result<_>>()?;

    let mut parts = Vec::new();
    let mut warnings = Vec::new();
    let mut demo_names = Vec::new();
    let mut demo_cols = Vec::new();
    for e in encoded {
        match e {
            Encoded::Part(p, w) => {
                parts.push(p);
                warnings.extend(w);
            }
            Encoded::Demographic(name, col) => {
                demo_names.push(name);
                demo_cols.push(col);
            }
            Encoded::Skip => {}
        }
    }
    let n = table.n_rows();
    let demographics = DemographicTable {
        names: demo_names,
        rows: if demo_cols.is_empty() {
            Vec::new()
        } else {
            (0..n).map(|i| demo_cols.iter().map(|c| c[i].clone()).collect()).collect()
        },
    };
    let row_ids = match &schema.row_id {
        Some(col) => table
            .column(col)
            .expect("validated schema column")
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or_else(|| format!("row{}", i + 1)))
            .collect(),
        None => (1..=n).map(|i| i.to_string()).collect(),
    };
    let mut survey = assemble(&parts, row_ids, demographics)?;
    survey.warnings = warnings;
    Ok(survey)
}

fn encode_column(table: &RawTable, spec: &ColumnSpec, nmf_config: &NmfConfig) -> Result<Encoded> {
    let col = table
        .column(&spec.name)
        .ok_or_else(|| Error::Schema(format!("column {:?} missing from table", spec.name)))?;
    let name = &spec.name;
    let ctx = |e: Error| match e {
        Error::Schema(msg) => Error::Schema(format!("column {name:?}: {msg}")),
        other => other,
    };
    Ok(match &spec.kind {
        ColumnKind::Categorical { choices } => Encoded::Part(
            EncodedPart {
                names: choices.iter().map(|c| format!("{name}={c}")).collect(),
                matrix: categorical_encode(&col, choices).map_err(ctx)?,
            },
            Vec::new(),
        ),
        ColumnKind::Satisfaction { mapping } => {
            let default = default_satisfaction_mapping();
            let mapping = mapping.as_ref().unwrap_or(&default);
            let ternary = consolidate_satisfaction(&col, mapping).map_err(ctx)?;
            Encoded::Part(
                EncodedPart {
                    names: vec![format!("{name}=pos"), format!("{name}=neg")],
                    matrix: indicator_encode(&ternary),
                },
                Vec::new(),
            )
        }
        ColumnKind::Ordinal { levels } => Encoded::Part(
            EncodedPart {
                names: vec![name.clone()],
                matrix: ordinal_encode(&col, levels.as_deref()).map_err(ctx)?,
            },
            Vec::new(),
        ),
        ColumnKind::Text {
            topics,
            min_df,
            rescale,
        } => {
            let corpus: Vec<&str> = col.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            let (doc_term, _vocab) = tfidf(&corpus, *min_df)?;
            let (features, warnings) = text_topic_features(&doc_term, *topics, nmf_config, *rescale)?;
            Encoded::Part(
                EncodedPart {
                    names: (1..=*topics).map(|t| format!("{name}:topic{t}")).collect(),
                    matrix: features,
                },
                warnings.into_iter().map(|w| format!("column {name:?}: {w}")).collect(),
            )
        }
        ColumnKind::Demographic => Encoded::Demographic(name.clone(), col),
        ColumnKind::Drop => Encoded::Skip,
    })
}

impl EncodedSurvey {
    /// Writes X.csv, feature_names.txt and demographics.csv.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let x_path = dir.join("X.csv");
        linalg::io::save_csv(&self.x, &x_path)?;
        let names_path = dir.join("feature_names.txt");
        let mut names = self.feature_names.join("\n");
        names.push('\n');
        fs::write(&names_path, names).map_err(|e| Error::io(&names_path, e))?;

        let demo_path = dir.join("demographics.csv");
        let mut w = csv::Writer::from_path(&demo_path)
            .map_err(|e| Error::io(&demo_path, std::io::Error::other(e)))?;
        let to_io = |e: csv::Error| Error::io(&demo_path, std::io::Error::other(e));
        let mut header = vec!["row_id".to_string()];
        header.extend(self.demographics.names.iter().cloned());
        w.write_record(&header).map_err(to_io)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            if let Some(r) = self.demographics.rows.get(i) {
                rec.extend(r.iter().map(|v| v.clone().unwrap_or_default()));
            }
            w.write_record(&rec).map_err(to_io)?;
        }
        w.flush().map_err(|e| Error::io(&demo_path, e))?;
        Ok(vec![x_path, names_path, demo_path])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(v: &[Option<&str>]) -> Vec<Option<String>> {
        v.iter().map(|c| c.map(str::to_string)).collect()
    }

    #[test]
    fn satisfaction_defaults() {
        let col = cells(&[Some("Very Satisfied"), Some("Don't Know"), None, Some("very dissatisfied")]);
        let s = consolidate_satisfaction(&col, &default_satisfaction_mapping()).unwrap();
        assert_eq!(s, vec![Sentiment::Pos, Sentiment::Neutral, Sentiment::Neutral, Sentiment::Neg]);
    }

    #[test]
    fn satisfaction_unmapped_lists_values() {
        let col = cells(&[Some("Meh"), Some("Satisfied"), Some("Ugh")]);
        let err = consolidate_satisfaction(&col, &default_satisfaction_mapping()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Meh") && msg.contains("Ugh"), "{msg}");
    }

    #[test]
    fn indicators() {
        let m = indicator_encode(&[Sentiment::Pos, Sentiment::Neutral, Sentiment::Neg]);
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m.row(0), &[1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 0.0]);
        assert_eq!(m.row(2), &[0.0, 1.0]);
        assert!(m.rows_iter().all(|r| r.iter().sum::<f64>() <= 1.0));
    }

    #[test]
    fn categorical_indicators() {
        let choices = vec!["Yes".to_string(), "No".to_string()];
        let m = categorical_encode(&cells(&[Some("yes"), None, Some("No")]), &choices).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(categorical_encode(&cells(&[Some("Maybe")]), &choices).is_err());
    }

    #[test]
    fn ordinal_scaling() {
        let levels: Vec<String> = ["low", "mid", "high"].iter().map(|s| s.to_string()).collect();
        let m = ordinal_encode(&cells(&[Some("mid"), Some("high"), None]), Some(&levels)).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 1.0, 0.0]);
        let m = ordinal_encode(&cells(&[Some("1"), Some("5"), Some("3")]), None).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 1.0, 0.5]);
        assert!(ordinal_encode(&cells(&[Some("x")]), None).is_err());
    }

    #[test]
    fn assemble_widths_and_mismatch() {
        let a = EncodedPart {
            names: vec!["a1".into(), "a2".into(), "a3".into()],
            matrix: Matrix::zeros(2, 3),
        };
        let b = EncodedPart {
            names: vec!["b1".into(), "b2".into()],
            matrix: Matrix::from_fn(2, 2, |i, j| (i + j) as f64),
        };
        let s = assemble(&[a.clone(), b], vec!["r1".into(), "r2".into()], DemographicTable::default()).unwrap();
        assert_eq!(s.x.shape(), (2, 5));
        let j = s.feature_names.iter().position(|n| n == "b2").unwrap();
        assert_eq!(s.x.col(j), vec![1.0, 2.0]);
        assert!(assemble(&[a], vec!["r1".into()], DemographicTable::default()).is_err());
    }
}
