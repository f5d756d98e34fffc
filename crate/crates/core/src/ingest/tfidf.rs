use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Document-term matrix with smoothed idf and L2-normalized rows.
///
/// `tf` is the raw count, `idf = ln((1 + N) / (1 + df)) + 1`; terms seen in
/// fewer than `min_df` documents are dropped. Vocabulary is sorted. Rows with
/// no surviving terms stay zero.
pub fn tfidf<S: AsRef<str>>(corpus: &[S], min_df: usize) -> Result<(Matrix<f64>, Vec<String>)> {
    if corpus.is_empty() {
        return Err(Error::Validation("tf-idf needs a non-empty corpus".into()));
    }
    let docs: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d.as_ref())).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &docs {
        let uniq: BTreeSet<&str> = d.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<String> = df
        .iter()
        .filter(|(_, &c)| c >= min_df)
        .map(|(t, _)| t.to_string())
        .collect();
    if vocab.is_empty() {
        return Err(Error::Validation(format!(
            "empty vocabulary after dropping terms with df < {min_df}"
        )));
    }
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| ((1.0 + n) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0)
        .collect();

    let mut m = Matrix::zeros(docs.len(), vocab.len());
    for (i, d) in docs.iter().enumerate() {
        for t in d {
            if let Some(&j) = index.get(t.as_str()) {
                m.set(i, j, m.get(i, j) + 1.0);
            }
        }
        let row = m.row_mut(i);
        for (v, w) in row.iter_mut().zip(&idf) {
            *v *= w;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok((m, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(tokenize("Traffic, TRAFFIC & roads!"), vec!["traffic", "traffic", "roads"]);
        assert!(tokenize("  ").is_empty());
    }

    #[test]
    fn min_df_filters_and_errors() {
        let (m, vocab) = tfidf(&["x y", "x z", "x"], 2).unwrap();
        assert_eq!(vocab, vec!["x"]);
        assert_eq!(m.shape(), (3, 1));
        assert!(tfidf(&["a", "b"], 2).is_err());
        assert!(tfidf::<&str>(&[], 1).is_err());
    }

    #[test]
    fn empty_and_duplicate_documents() {
        let (m, _) = tfidf(&["good parks", "", "good parks", "bad roads"], 1).unwrap();
        assert!(m.row(1).iter().all(|&v| v == 0.0));
        assert_eq!(m.row(0), m.row(2));
    }
}
