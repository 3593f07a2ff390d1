//! Association weighting (smoothed PPMI, log-entropy) and factorization of
//! weighted matrices into dense embeddings.

mod svd;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cooccur::{read_labeled, write_labeled, ContextKind, CooccurrenceMatrix};
use crate::error::{DsmError, Result};
use crate::sparse::CsrMatrix;

pub use svd::{randomized_svd, truncated_svd, SvdOptions, SvdResult};

/// Default context-distribution smoothing exponent.
pub const DEFAULT_ALPHA: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Raw,
    Ppmi,
    LogEntropy,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Raw => "raw",
            Scheme::Ppmi => "ppmi",
            Scheme::LogEntropy => "log_entropy",
        })
    }
}

impl FromStr for Scheme {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Scheme::Raw),
            "ppmi" => Ok(Scheme::Ppmi),
            "log_entropy" => Ok(Scheme::LogEntropy),
            _ => Err(DsmError::Format(format!("unknown weighting scheme `{s}`"))),
        }
    }
}

/// A co-occurrence matrix after reweighting. Same catalogs as the input;
/// zero weights are not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMatrix {
    pub kind: ContextKind,
    pub scheme: Scheme,
    /// Smoothing exponent, for PPMI.
    pub alpha: Option<f64>,
    targets: Vec<String>,
    contexts: Vec<String>,
    values: CsrMatrix,
    /// Free-form provenance notes carried into embedding metadata.
    pub notes: BTreeMap<String, String>,
}

impl WeightedMatrix {
    pub fn new(
        kind: ContextKind,
        scheme: Scheme,
        targets: Vec<String>,
        contexts: Vec<String>,
        values: CsrMatrix,
    ) -> Result<Self> {
        if values.n_rows() != targets.len() || values.n_cols() != contexts.len() {
            return Err(DsmError::DimensionMismatch {
                expected: targets.len() * contexts.len(),
                found: values.n_rows() * values.n_cols(),
            });
        }
        Ok(WeightedMatrix {
            kind,
            scheme,
            alpha: None,
            targets,
            contexts,
            values,
            notes: BTreeMap::new(),
        })
    }

    /// Unweighted view of raw counts.
    pub fn raw(m: &CooccurrenceMatrix) -> Self {
        WeightedMatrix::new(
            m.kind,
            Scheme::Raw,
            m.targets().to_vec(),
            m.contexts().to_vec(),
            m.counts().clone(),
        )
        .expect("same catalogs")
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn contexts(&self) -> &[String] {
        &self.contexts
    }

    pub fn values(&self) -> &CsrMatrix {
        &self.values
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header = format!(
            "rows={} cols={} kind={} scheme={}",
            self.targets.len(),
            self.contexts.len(),
            self.kind,
            self.scheme
        );
        if let Some(a) = self.alpha {
            header.push_str(&format!(" alpha={a}"));
        }
        write_labeled(
            path.as_ref(),
            &header,
            &self.targets,
            &self.contexts,
            &self.values,
            &self.values.row_sums(),
            &self.values.col_sums(),
        )
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let lm = read_labeled(path.as_ref())?;
        let kind = lm
            .header
            .get("kind")
            .ok_or_else(|| DsmError::Format("matrix header lacks `kind=`".into()))?
            .parse()?;
        let scheme = lm.header.get("scheme").map(|s| s.parse()).transpose()?.unwrap_or(Scheme::Raw);
        let mut w = WeightedMatrix::new(kind, scheme, lm.targets, lm.contexts, lm.matrix)?;
        w.alpha = lm.header.get("alpha").and_then(|a| a.parse().ok());
        Ok(w)
    }
}

/// Positive PMI with context-distribution smoothing:
/// `max(0, log2(p(t,c) / (p(t) · p_α(c))))` where
/// `p_α(c) = count(c)^α / Σ count(c')^α`. Smoothing touches only the context
/// marginal.
pub fn ppmi(m: &CooccurrenceMatrix, alpha: f64) -> Result<WeightedMatrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DsmError::Config(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let total = m.grand_total();
    if total <= 0.0 {
        return Err(DsmError::Config("cannot weight an empty co-occurrence matrix".into()));
    }
    let smoothed: Vec<f64> = m.col_marginals().iter().map(|c| c.powf(alpha)).collect();
    let smoothed_total: f64 = smoothed.iter().sum();
    let rows = m.row_marginals();
    let values = m.counts().map_values(|t, c, n| {
        let p_tc = n / total;
        let p_t = rows[t] / total;
        let p_c = smoothed[c] / smoothed_total;
        let pmi = (p_tc / (p_t * p_c)).log2();
        if pmi > 0.0 {
            pmi
        } else {
            0.0
        }
    });
    let mut w = WeightedMatrix::new(
        m.kind,
        Scheme::Ppmi,
        m.targets().to_vec(),
        m.contexts().to_vec(),
        values,
    )?;
    w.alpha = Some(alpha);
    Ok(w)
}

/// Log-entropy weighting of a term × document matrix:
/// `log2(1 + tf) · (1 − H(t) / log |D|)` with `H(t)` the entropy of the
/// word's distribution over documents. With a single document the global
/// weight is 1 and the matrix is flagged in its notes.
pub fn log_entropy(m: &CooccurrenceMatrix) -> Result<WeightedMatrix> {
    let global = entropy_weights(m);
    let values = m.counts().map_values(|t, _, tf| (1.0 + tf).log2() * global[t]);
    let mut w = WeightedMatrix::new(
        m.kind,
        Scheme::LogEntropy,
        m.targets().to_vec(),
        m.contexts().to_vec(),
        values,
    )?;
    if m.contexts().len() <= 1 {
        w.notes.insert("single_document".into(), "global weight fixed to 1".into());
    }
    Ok(w)
}

/// Global weight `1 − H(t) / log |D|` of every row, in `[0, 1]`.
pub fn entropy_weights(m: &CooccurrenceMatrix) -> Vec<f64> {
    let n_docs = m.contexts().len();
    let counts = m.counts();
    if n_docs <= 1 {
        return vec![1.0; counts.n_rows()];
    }
    let log_d = (n_docs as f64).ln();
    (0..counts.n_rows())
        .map(|t| {
            let (_, tfs) = counts.row(t);
            let sum: f64 = tfs.iter().sum();
            if sum <= 0.0 {
                return 0.0;
            }
            let h: f64 = tfs
                .iter()
                .map(|&tf| {
                    let p = tf / sum;
                    -p * p.ln()
                })
                .sum();
            let g = (1.0 - h / log_d).clamp(0.0, 1.0);
            // uniform spread leaves rounding residue around zero
            if g < 1e-12 {
                0.0
            } else {
                g
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n_rows: usize, n_cols: usize, dense: &[f64]) -> CooccurrenceMatrix {
        CooccurrenceMatrix::new(
            ContextKind::Window,
            (0..n_rows).map(|i| format!("t{i}")).collect(),
            (0..n_cols).map(|i| format!("c{i}")).collect(),
            CsrMatrix::from_dense(n_rows, n_cols, dense).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ppmi_two_by_two_unsmoothed() {
        let w = ppmi(&matrix(2, 2, &[2.0, 0.0, 1.0, 1.0]), 1.0).unwrap();
        let v = w.values();
        assert!((v.get(0, 0) - (4.0f64 / 3.0).log2()).abs() < 1e-12);
        assert_eq!(v.get(0, 1), 0.0);
        assert_eq!(v.get(1, 0), 0.0);
        assert!((v.get(1, 1) - 1.0).abs() < 1e-12);
        assert_eq!(v.nnz(), 2);
    }

    #[test]
    fn ppmi_of_independent_counts_is_empty() {
        let w = ppmi(&matrix(3, 3, &[4.0; 9]), 0.75).unwrap();
        assert_eq!(w.values().nnz(), 0);
    }

    #[test]
    fn ppmi_rejects_bad_alpha_and_empty_input() {
        let m = matrix(1, 1, &[1.0]);
        assert!(ppmi(&m, 0.0).is_err());
        assert!(ppmi(&m, 1.5).is_err());
        assert!(ppmi(&matrix(1, 1, &[0.0]), 1.0).is_err());
    }

    #[test]
    fn log_entropy_concentrated_and_uniform_words() {
        // row 0: once in one doc out of four; row 1: uniform over all docs
        let m = CooccurrenceMatrix::new(
            ContextKind::Document,
            vec!["rare".into(), "flat".into()],
            (0..4).map(|d| d.to_string()).collect(),
            CsrMatrix::from_dense(2, 4, &[1.0, 0.0, 0.0, 0.0, 3.0, 3.0, 3.0, 3.0]).unwrap(),
        )
        .unwrap();
        let w = log_entropy(&m).unwrap();
        assert!((w.values().get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(w.values().row(1).0.len(), 0);
        let g = entropy_weights(&m);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn log_entropy_single_document_is_flagged() {
        let m = CooccurrenceMatrix::new(
            ContextKind::Document,
            vec!["a".into()],
            vec!["0".into()],
            CsrMatrix::from_dense(1, 1, &[3.0]).unwrap(),
        )
        .unwrap();
        let w = log_entropy(&m).unwrap();
        assert!((w.values().get(0, 0) - 2.0).abs() < 1e-12);
        assert!(w.notes.contains_key("single_document"));
    }

    #[test]
    fn weighted_file_round_trip() {
        let w = ppmi(&matrix(2, 2, &[2.0, 0.0, 1.0, 1.0]), 0.75).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.tsv");
        w.write(&p).unwrap();
        let head = std::fs::read_to_string(&p).unwrap();
        assert!(head.starts_with("#rows=2 cols=2 kind=window scheme=ppmi alpha=0.75\n"));
        assert_eq!(WeightedMatrix::read(&p).unwrap(), w);
    }
}
