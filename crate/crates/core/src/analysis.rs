//! Statistics over a results ledger: per-dataset ranks, Kruskal-Wallis and
//! Dunn tests over grouping factors, Wilcoxon signed-rank comparisons,
//! cross-dataset correlations and best-model tables.
//!
//! Score ties are converted to average ranks throughout.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};
use crate::ledger::EvalResult;
use crate::stats::{average_ranks, chi2_sf, normal_sf, spearman, tie_sum};

/// Per-dataset ranks; rank 1 is the best score.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankTable {
    pub ranks: BTreeMap<String, BTreeMap<String, f64>>,
}

impl RankTable {
    pub fn rank(&self, dataset: &str, model: &str) -> Option<f64> {
        self.ranks.get(dataset)?.get(model).copied()
    }

    pub fn n_models(&self, dataset: &str) -> usize {
        self.ranks.get(dataset).map_or(0, BTreeMap::len)
    }

    pub fn datasets(&self) -> impl Iterator<Item = &str> {
        self.ranks.keys().map(String::as_str)
    }

    /// Every `(dataset, model, rank)` cell.
    pub fn cells(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.ranks
            .iter()
            .flat_map(|(d, m)| m.iter().map(move |(model, &r)| (d.as_str(), model.as_str(), r)))
    }

    /// All ranks grouped by the level of `factor` in each model id.
    pub fn group_by(&self, factor: Factor) -> BTreeMap<String, Vec<f64>> {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (_, model, r) in self.cells() {
            groups.entry(factor.level(model).to_string()).or_default().push(r);
        }
        groups
    }
}

/// Descending-score ranks within each dataset.
pub fn rank_scores(ledger: &[EvalResult]) -> Result<RankTable> {
    let mut by_dataset: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in ledger {
        if by_dataset
            .entry(&r.dataset)
            .or_default()
            .insert(&r.model, r.score)
            .is_some()
        {
            return Err(DsmError::Format(format!(
                "ledger holds more than one score for ({}, {})",
                r.dataset, r.model
            )));
        }
    }
    let mut table = RankTable::default();
    for (dataset, scores) in by_dataset {
        let neg: Vec<f64> = scores.values().map(|s| -s).collect();
        let ranks = average_ranks(&neg);
        table.ranks.insert(
            dataset.to_string(),
            scores.keys().map(|m| m.to_string()).zip(ranks).collect(),
        );
    }
    Ok(table)
}

/// A component of a `<MODEL>.<context>.<dim>` model id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Model,
    Context,
    Dim,
}

impl Factor {
    /// The level of this factor in `model_id`, or `-` when absent.
    pub fn level(self, model_id: &str) -> &str {
        let k = match self {
            Factor::Model => 0,
            Factor::Context => 1,
            Factor::Dim => 2,
        };
        model_id.split('.').nth(k).filter(|s| !s.is_empty()).unwrap_or("-")
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factor::Model => "model",
            Factor::Context => "context",
            Factor::Dim => "dim",
        })
    }
}

impl FromStr for Factor {
    type Err = DsmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Factor::Model),
            "context" => Ok(Factor::Context),
            "dim" => Ok(Factor::Dim),
            other => Err(DsmError::Config(format!("unknown factor `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    None,
    Bonferroni,
}

/// Outcome of a single test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    /// `H`, `z` or `V`.
    pub statistic_name: String,
    pub statistic: f64,
    pub df: Option<f64>,
    pub p_value: f64,
    pub correction: Correction,
    pub factor: Option<String>,
}

/// `p < .001`, otherwise `p = .xx` with two decimals (three below .01).
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        return "p < .001".into();
    }
    let s = if p < 0.01 { format!("{p:.3}") } else { format!("{p:.2}") };
    format!("p = {}", s.strip_prefix('0').unwrap_or(&s))
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:.2}", self.statistic_name, self.statistic)?;
        if let Some(df) = self.df {
            write!(f, ", df = {df}")?;
        }
        write!(f, ", {}", format_p(self.p_value))
    }
}

fn check_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(DsmError::InsufficientData {
            needed: 2,
            found: groups.len(),
        });
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(DsmError::InsufficientData { needed: 1, found: 0 });
    }
    Ok(())
}

/// Kruskal-Wallis rank-sum test with tie correction; `df = g − 1`.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestReport> {
    check_groups(groups)?;
    let all: Vec<f64> = groups.concat();
    let n = all.len() as f64;
    let ranks = average_ranks(&all);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let denom = 1.0 - tie_sum(&all) / (n * n * n - n);
    let df = (groups.len() - 1) as f64;
    let (h, p) = if denom <= 0.0 {
        (0.0, 1.0)
    } else {
        let h = (h_raw / denom).max(0.0);
        (h, chi2_sf(h, df))
    };
    Ok(TestReport {
        test: "kruskal-wallis".into(),
        statistic_name: "H".into(),
        statistic: h,
        df: Some(df),
        p_value: p,
        correction: Correction::None,
        factor: None,
    })
}

/// One Dunn comparison between groups `a` and `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Positive when `a` has the larger mean rank.
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub labels: Vec<String>,
    pub comparisons: Vec<Comparison>,
    pub correction: Correction,
}

impl PairwiseReport {
    pub fn get(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
    }

    /// Lower-triangular matrix of adjusted p values as tab-separated text.
    pub fn p_matrix(&self) -> String {
        self.lower_triangle(|c| {
            if c.p_adjusted < 0.001 {
                "<0.001".to_string()
            } else if c.p_adjusted >= 1.0 {
                "1".to_string()
            } else {
                format!("{:.3}", c.p_adjusted)
            }
        })
    }

    /// Lower-triangular matrix with `●` for adjusted `p < alpha`, else `○`.
    pub fn significance_dots(&self, alpha: f64) -> String {
        self.lower_triangle(|c| if c.p_adjusted < alpha { "●" } else { "○" }.to_string())
    }

    fn lower_triangle(&self, cell: impl Fn(&Comparison) -> String) -> String {
        let n = self.labels.len();
        let mut out = String::new();
        out.push('\t');
        out.push_str(&self.labels[..n.saturating_sub(1)].join("\t"));
        out.push('\n');
        for i in 1..n {
            out.push_str(&self.labels[i]);
            for j in 0..i {
                out.push('\t');
                if let Some(c) = self.get(&self.labels[i], &self.labels[j]) {
                    out.push_str(&cell(c));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Dunn's pairwise tests on mean ranks with tie correction and two-sided p
/// values. Empty groups are dropped with a warning.
pub fn dunn_test(groups: &[(String, Vec<f64>)], correction: Correction) -> Result<PairwiseReport> {
    let kept: Vec<&(String, Vec<f64>)> = groups
        .iter()
        .filter(|(label, g)| {
            if g.is_empty() {
                log::warn!("group `{label}` is empty and left out of the comparisons");
            }
            !g.is_empty()
        })
        .collect();
    if kept.len() < 2 {
        return Err(DsmError::InsufficientData {
            needed: 2,
            found: kept.len(),
        });
    }
    let all: Vec<f64> = kept.iter().flat_map(|(_, g)| g.iter().copied()).collect();
    let n = all.len() as f64;
    let ranks = average_ranks(&all);
    let mut mean_ranks = Vec::with_capacity(kept.len());
    let mut offset = 0;
    for (_, g) in &kept {
        mean_ranks.push(ranks[offset..offset + g.len()].iter().sum::<f64>() / g.len() as f64);
        offset += g.len();
    }
    let base_var = n * (n + 1.0) / 12.0 - tie_sum(&all) / (12.0 * (n - 1.0));
    let m = (kept.len() * (kept.len() - 1) / 2) as f64;
    let mut comparisons = Vec::new();
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            let se = (base_var * (1.0 / kept[i].1.len() as f64 + 1.0 / kept[j].1.len() as f64)).sqrt();
            let diff = mean_ranks[i] - mean_ranks[j];
            let z = if se > 0.0 { diff / se } else { 0.0 };
            let p_raw = (2.0 * normal_sf(z.abs())).min(1.0);
            let p_adjusted = match correction {
                Correction::None => p_raw,
                Correction::Bonferroni => (p_raw * m).min(1.0),
            };
            comparisons.push(Comparison {
                a: kept[i].0.clone(),
                b: kept[j].0.clone(),
                z,
                p_raw,
                p_adjusted,
            });
        }
    }
    Ok(PairwiseReport {
        labels: kept.iter().map(|(l, _)| l.clone()).collect(),
        comparisons,
        correction,
    })
}

/// Largest sample size handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Wilcoxon signed-rank test on `x − y`. `V` is the rank sum of positive
/// differences. Zero differences are dropped. Up to
/// [`WILCOXON_EXACT_MAX`] pairs the null distribution is enumerated exactly
/// (conditional on the observed ranks, ties included); beyond that a normal
/// approximation with tie and continuity corrections is used. Two-sided.
pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64]) -> Result<TestReport> {
    if xs.len() != ys.len() {
        return Err(DsmError::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(DsmError::AllZeroDifferences);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let v: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).fold(0.0, |acc, (_, r)| acc + r);
    let n = d.len();
    let p = if n <= WILCOXON_EXACT_MAX {
        wilcoxon_exact_p(&ranks, v)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum(&abs) / 48.0;
        let diff = v - mu;
        let z = (diff - 0.5 * diff.signum()) / var.sqrt();
        (2.0 * normal_sf(z.abs())).min(1.0)
    };
    Ok(TestReport {
        test: "wilcoxon-signed-rank".into(),
        statistic_name: "V".into(),
        statistic: v,
        df: None,
        p_value: p,
        correction: Correction::None,
        factor: None,
    })
}

/// Exact two-sided p: the distribution of the positive-rank sum over all
/// 2ⁿ sign patterns, counted on doubled (integer) ranks.
fn wilcoxon_exact_p(ranks: &[f64], v: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total: f64 = counts.iter().sum();
    let target = (v * 2.0).round() as usize;
    let lower: f64 = counts[..=target].iter().sum::<f64>() / total;
    let upper: f64 = counts[target..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Spearman ρ between datasets over the models they share.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetCorrelation {
    pub datasets: Vec<String>,
    /// Row-major; `None` where fewer than three models are shared or a score
    /// column is constant.
    pub values: Vec<Option<f64>>,
}

impl DatasetCorrelation {
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.values[a * self.datasets.len() + b]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.datasets.len();
        writeln!(w, "dataset,{}", self.datasets.join(","))?;
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| self.get(i, j).map_or("NA".to_string(), |v| format!("{v:.4}")))
                .collect();
            writeln!(w, "{},{}", self.datasets[i], row.join(","))?;
        }
        Ok(())
    }
}

pub fn dataset_correlation(ledger: &[EvalResult]) -> DatasetCorrelation {
    let mut scores: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in ledger {
        scores.entry(&r.dataset).or_default().insert(&r.model, r.score);
    }
    let datasets: Vec<&str> = scores.keys().copied().collect();
    let n = datasets.len();
    let mut values = vec![None; n * n];
    for i in 0..n {
        values[i * n + i] = Some(1.0);
        for j in i + 1..n {
            let (a, b) = (&scores[datasets[i]], &scores[datasets[j]]);
            let (xs, ys): (Vec<f64>, Vec<f64>) = a
                .iter()
                .filter_map(|(m, &s)| b.get(m).map(|&t| (s, t)))
                .unzip();
            let rho = if xs.len() >= 3 { spearman(&xs, &ys).ok() } else { None };
            values[i * n + j] = rho;
            values[j * n + i] = rho;
        }
    }
    DatasetCorrelation {
        datasets: datasets.into_iter().map(String::from).collect(),
        values,
    }
}

/// Best score on a dataset and every model reaching it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub dataset: String,
    pub score: f64,
    pub models: Vec<String>,
}

impl fmt::Display for BestEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.2} {}", self.dataset, self.score, self.models.join(", "))
    }
}

/// Best score per dataset, datasets in order of first appearance.
pub fn best_report(ledger: &[EvalResult]) -> Vec<BestEntry> {
    let mut out: Vec<BestEntry> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for r in ledger {
        match index.get(r.dataset.as_str()) {
            None => {
                index.insert(&r.dataset, out.len());
                out.push(BestEntry {
                    dataset: r.dataset.clone(),
                    score: r.score,
                    models: vec![r.model.clone()],
                });
            }
            Some(&k) => {
                let e = &mut out[k];
                if r.score > e.score {
                    e.score = r.score;
                    e.models = vec![r.model.clone()];
                } else if r.score == e.score && !e.models.contains(&r.model) {
                    e.models.push(r.model.clone());
                }
            }
        }
    }
    out
}

/// Markdown table of [`best_report`] entries.
pub fn best_report_markdown(entries: &[BestEntry]) -> String {
    let mut s = String::from("| Dataset | Score | Model |\n|---|---|---|\n");
    for e in entries {
        s.push_str(&format!("| {} | {:.2} | {} |\n", e.dataset, e.score, e.models.join(", ")));
    }
    s
}
