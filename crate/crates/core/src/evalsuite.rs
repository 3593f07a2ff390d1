//! The intrinsic benchmark battery: synonymy (multiple choice), similarity
//! and relatedness (rating correlation), categorization (K-means purity)
//! and analogy (vector offset).
//!
//! Coverage policy: an item is evaluated only if its essential words exist
//! in the space, and skipped items leave the denominator. Words that exist
//! with an all-zero vector are evaluated but can never win: their cosine is
//! treated as −∞.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{DsmError, Result};
use crate::hashing::mix3;
pub use crate::ledger::EvalResult;
pub use crate::stats::spearman;
use crate::vecspace::{dot, EmbeddingSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Synonymy,
    Similarity,
    Relatedness,
    Categorization,
    Analogy,
}

impl Task {
    pub fn metric(self) -> Metric {
        match self {
            Task::Synonymy | Task::Analogy => Metric::Accuracy,
            Task::Similarity | Task::Relatedness => Metric::Spearman,
            Task::Categorization => Metric::Purity,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Synonymy => "synonymy",
            Task::Similarity => "similarity",
            Task::Relatedness => "relatedness",
            Task::Categorization => "categorization",
            Task::Analogy => "analogy",
        })
    }
}

impl FromStr for Task {
    type Err = DsmError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synonymy" => Task::Synonymy,
            "similarity" => Task::Similarity,
            "relatedness" => Task::Relatedness,
            "categorization" => Task::Categorization,
            "analogy" => Task::Analogy,
            other => return Err(DsmError::Config(format!("unknown task `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Spearman,
    Purity,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::Spearman => "spearman",
            Metric::Purity => "purity",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceItem {
    pub target: String,
    pub options: Vec<String>,
    pub answer: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatingItem {
    pub w1: String,
    pub w2: String,
    pub gold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryItem {
    pub word: String,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyItem {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Items {
    Choice(Vec<ChoiceItem>),
    Rating(Vec<RatingItem>),
    Categorization(Vec<CategoryItem>),
    Analogy(Vec<AnalogyItem>),
}

impl Items {
    pub fn len(&self) -> usize {
        match self {
            Items::Choice(v) => v.len(),
            Items::Rating(v) => v.len(),
            Items::Categorization(v) => v.len(),
            Items::Analogy(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkDataset {
    pub name: String,
    pub task: Task,
    pub items: Items,
}

impl BenchmarkDataset {
    pub fn new(name: impl Into<String>, task: Task, items: Items) -> Result<Self> {
        let ds = BenchmarkDataset {
            name: name.into(),
            task,
            items,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DsmError::Format(format!("{}: {m}", self.name)));
        let shape_ok = matches!(
            (self.task, &self.items),
            (Task::Synonymy, Items::Choice(_))
                | (Task::Similarity | Task::Relatedness, Items::Rating(_))
                | (Task::Categorization, Items::Categorization(_))
                | (Task::Analogy, Items::Analogy(_))
        );
        if !shape_ok {
            return bad(format!("items do not fit task `{}`", self.task));
        }
        match &self.items {
            Items::Choice(items) => {
                for it in items {
                    if it.answer >= it.options.len() {
                        return bad(format!("answer index {} out of range for `{}`", it.answer, it.target));
                    }
                }
            }
            Items::Rating(items) => {
                for it in items {
                    if !it.gold.is_finite() {
                        return bad(format!("non-finite rating for ({}, {})", it.w1, it.w2));
                    }
                }
            }
            Items::Analogy(items) => {
                for it in items {
                    let w = [&it.a, &it.b, &it.c, &it.d];
                    if (0..4).any(|i| (i + 1..4).any(|j| w[i] == w[j])) {
                        return bad(format!("repeated word in analogy {} {} {} {}", it.a, it.b, it.c, it.d));
                    }
                }
            }
            Items::Categorization(_) => {}
        }
        Ok(())
    }

    /// Parses the task's TSV schema; blank lines and `#` comments are skipped.
    pub fn read<R: BufRead>(reader: R, name: &str, task: Task) -> Result<Self> {
        let mut choice = Vec::new();
        let mut rating = Vec::new();
        let mut cat = Vec::new();
        let mut analogy = Vec::new();
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            let err = |m: &str| DsmError::parse(name, ln + 1, m);
            match task {
                Task::Synonymy => {
                    let [target, opts, ans] = cols[..] else {
                        return Err(err("expected `target<TAB>opt1|opt2|…<TAB>answer_index`"));
                    };
                    choice.push(ChoiceItem {
                        target: target.to_string(),
                        options: opts.split('|').map(|o| o.trim().to_string()).collect(),
                        answer: ans.parse().map_err(|_| err("bad answer index"))?,
                    });
                }
                Task::Similarity | Task::Relatedness => {
                    let [w1, w2, score] = cols[..] else {
                        return Err(err("expected `w1<TAB>w2<TAB>score`"));
                    };
                    rating.push(RatingItem {
                        w1: w1.to_string(),
                        w2: w2.to_string(),
                        gold: score.parse().map_err(|_| err("bad score"))?,
                    });
                }
                Task::Categorization => {
                    let [word, class] = cols[..] else {
                        return Err(err("expected `word<TAB>class`"));
                    };
                    cat.push(CategoryItem {
                        word: word.to_string(),
                        class: class.to_string(),
                    });
                }
                Task::Analogy => {
                    let [a, b, c, d] = cols[..] else {
                        return Err(err("expected `a<TAB>b<TAB>c<TAB>d`"));
                    };
                    analogy.push(AnalogyItem {
                        a: a.to_string(),
                        b: b.to_string(),
                        c: c.to_string(),
                        d: d.to_string(),
                    });
                }
            }
        }
        let items = match task {
            Task::Synonymy => Items::Choice(choice),
            Task::Similarity | Task::Relatedness => Items::Rating(rating),
            Task::Categorization => Items::Categorization(cat),
            Task::Analogy => Items::Analogy(analogy),
        };
        Self::new(name, task, items)
    }

    /// Loads `<NAME>.<task>.tsv`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (name, task) = parse_dataset_file_name(path)
            .ok_or_else(|| DsmError::Config(format!("{}: expected a `<NAME>.<task>.tsv` file", path.display())))?;
        Self::read(BufReader::new(File::open(path)?), &name, task)
    }
}

fn parse_dataset_file_name(path: &Path) -> Option<(String, Task)> {
    let file = path.file_name()?.to_str()?;
    let stem = file.strip_suffix(".tsv")?;
    let (name, task) = stem.rsplit_once('.')?;
    Some((name.to_string(), task.parse().ok()?))
}

/// Every `<NAME>.<task>.tsv` in `dir`, ordered by file name.
pub fn load_suite(dir: impl AsRef<Path>) -> Result<Vec<BenchmarkDataset>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| parse_dataset_file_name(p).is_some())
        .collect();
    paths.sort();
    paths.iter().map(BenchmarkDataset::load).collect()
}

fn result(space: &EmbeddingSpace, ds: &BenchmarkDataset, score: f64, covered: usize) -> EvalResult {
    EvalResult {
        model: space.meta.model_id.clone(),
        dataset: ds.name.clone(),
        task: ds.task.to_string(),
        metric: ds.task.metric().to_string(),
        score,
        coverage: if ds.items.is_empty() {
            0.0
        } else {
            covered as f64 / ds.items.len() as f64
        },
    }
}

/// Cosine with zero vectors mapped to −∞.
fn cos_or_floor(space: &EmbeddingSpace, i: usize, j: usize) -> f64 {
    space.cosine_ids(i, j).unwrap_or(f64::NEG_INFINITY)
}

/// Multiple-choice accuracy. An item needs its target and answer in the
/// space; options missing from the space are dropped. The answer must score
/// strictly above every other remaining option.
pub fn eval_choice(space: &EmbeddingSpace, ds: &BenchmarkDataset) -> Result<EvalResult> {
    let Items::Choice(items) = &ds.items else {
        return Err(DsmError::Config(format!("{} is not a choice dataset", ds.name)));
    };
    let outcomes: Vec<bool> = items
        .par_iter()
        .filter_map(|it| {
            let t = space.id(&it.target)?;
            let ans = space.id(&it.options[it.answer])?;
            let ans_score = cos_or_floor(space, t, ans);
            let beaten = it.options.iter().enumerate().any(|(k, o)| {
                k != it.answer
                    && space
                        .id(o)
                        .is_some_and(|j| cos_or_floor(space, t, j) >= ans_score)
            });
            Some(ans_score > f64::NEG_INFINITY && !beaten)
        })
        .collect();
    if outcomes.is_empty() {
        return Err(DsmError::NoCoverage(ds.name.clone()));
    }
    let acc = outcomes.iter().filter(|&&c| c).count() as f64 / outcomes.len() as f64;
    Ok(result(space, ds, acc, outcomes.len()))
}

/// Spearman ρ between cosines and gold ratings over pairs whose two words
/// are in the space.
pub fn eval_correlation(space: &EmbeddingSpace, ds: &BenchmarkDataset) -> Result<EvalResult> {
    let Items::Rating(items) = &ds.items else {
        return Err(DsmError::Config(format!("{} is not a rating dataset", ds.name)));
    };
    let (cos, gold): (Vec<f64>, Vec<f64>) = items
        .iter()
        .filter_map(|it| {
            let (i, j) = (space.id(&it.w1)?, space.id(&it.w2)?);
            Some((cos_or_floor(space, i, j), it.gold))
        })
        .unzip();
    if cos.len() < 3 {
        return Err(DsmError::InsufficientData {
            needed: 3,
            found: cos.len(),
        });
    }
    let rho = spearman(&cos, &gold)?;
    Ok(result(space, ds, rho, cos.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            restarts: 10,
            max_iter: 300,
            seed: 0,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(p: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.chunks(dim).enumerate() {
        let d = sq_dist(p, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_once(points: &[f64], dim: usize, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = points.len() / dim;
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    // k-means++ seeding
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(pt(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(pt(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(pt(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(pt(i), &centroids[start..]));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest_centroid(pt(i), &centroids, dim);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i] * dim..(assign[i] + 1) * dim].iter_mut().zip(pt(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed an empty cluster at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(pt(a), &centroids[assign[a] * dim..(assign[a] + 1) * dim]);
                        let db = sq_dist(pt(b), &centroids[assign[b] * dim..(assign[b] + 1) * dim]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty input");
                centroids[c * dim..(c + 1) * dim].copy_from_slice(pt(far));
            } else {
                for (dst, s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }
    let inertia = (0..n).map(|i| sq_dist(pt(i), &centroids[assign[i] * dim..(assign[i] + 1) * dim])).sum();
    (assign, inertia)
}

/// K-means with k-means++ seeding; the restart with the lowest within-cluster
/// sum of squares wins (earliest restart on ties). `points` is row-major.
pub fn kmeans(points: &[f64], dim: usize, k: usize, opts: KmeansOptions) -> Result<Vec<usize>> {
    let n = if dim == 0 { 0 } else { points.len() / dim };
    if k == 0 || k > n {
        return Err(DsmError::Config(format!("cannot form {k} clusters from {n} points")));
    }
    let runs: Vec<(Vec<usize>, f64)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix3(opts.seed, r as u64, 0x6b6d));
            kmeans_once(points, dim, k, opts.max_iter, &mut rng)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.1 < best.1 { run } else { best })
        .expect("at least one restart");
    Ok(best.0)
}

/// Fraction of items that belong to the majority gold class of their cluster.
pub fn purity(clusters: &[usize], classes: &[usize]) -> f64 {
    assert_eq!(clusters.len(), classes.len());
    if clusters.is_empty() {
        return 0.0;
    }
    let mut table: FxHashMap<(usize, usize), usize> = FxHashMap::default();
    for (&c, &g) in clusters.iter().zip(classes) {
        *table.entry((c, g)).or_insert(0) += 1;
    }
    let mut best: FxHashMap<usize, usize> = FxHashMap::default();
    for (&(c, _), &count) in &table {
        let b = best.entry(c).or_insert(0);
        *b = (*b).max(count);
    }
    best.values().sum::<usize>() as f64 / clusters.len() as f64
}

/// K-means purity on length-normalized vectors of the covered words, with
/// `k` equal to the number of gold classes that keep at least one word.
pub fn eval_categorization(space: &EmbeddingSpace, ds: &BenchmarkDataset, opts: KmeansOptions) -> Result<EvalResult> {
    let Items::Categorization(items) = &ds.items else {
        return Err(DsmError::Config(format!("{} is not a categorization dataset", ds.name)));
    };
    let dim = space.dim();
    let mut class_ids: FxHashMap<&str, usize> = FxHashMap::default();
    let mut classes = Vec::new();
    let mut points = Vec::new();
    let mut all_classes: Vec<&str> = items.iter().map(|it| it.class.as_str()).collect();
    all_classes.sort_unstable();
    all_classes.dedup();
    for it in items {
        let Some(i) = space.id(&it.word) else { continue };
        let next = class_ids.len();
        classes.push(*class_ids.entry(it.class.as_str()).or_insert(next));
        let n = space.norm(i);
        let scale = if n > 0.0 { 1.0 / n } else { 0.0 };
        points.extend(space.vector(i).iter().map(|v| v * scale));
    }
    if classes.is_empty() {
        return Err(DsmError::NoCoverage(ds.name.clone()));
    }
    let k = class_ids.len();
    if k < all_classes.len() {
        log::warn!(
            "{}: {} of {} classes have no covered words; clustering with k = {k}",
            ds.name,
            all_classes.len() - k,
            all_classes.len()
        );
    }
    let assign = kmeans(&points, dim, k, opts)?;
    Ok(result(space, ds, purity(&assign, &classes), classes.len()))
}

/// Offset-method accuracy: the prediction is the word, other than a, b and
/// c, whose vector has the highest cosine to `ĉ + b̂ − â` (unit-length
/// inputs). Items with any word missing from the space are skipped.
pub fn eval_analogy(space: &EmbeddingSpace, ds: &BenchmarkDataset) -> Result<EvalResult> {
    let Items::Analogy(items) = &ds.items else {
        return Err(DsmError::Config(format!("{} is not an analogy dataset", ds.name)));
    };
    let covered: Vec<&AnalogyItem> = items
        .iter()
        .filter(|it| [&it.a, &it.b, &it.c, &it.d].iter().all(|w| space.contains(w)))
        .collect();
    if covered.is_empty() {
        return Err(DsmError::NoCoverage(ds.name.clone()));
    }
    let correct = covered
        .par_iter()
        .filter(|it| predict_analogy(space, &it.a, &it.b, &it.c).is_some_and(|p| p == it.d))
        .count();
    Ok(result(space, ds, correct as f64 / covered.len() as f64, covered.len()))
}

/// Best completion of `a : b :: c : ?`, or `None` when a word is missing,
/// has a zero vector, the offset vanishes, or no candidate remains.
pub fn predict_analogy(space: &EmbeddingSpace, a: &str, b: &str, c: &str) -> Option<String> {
    let unit = |w: &str| -> Option<Vec<f64>> {
        let i = space.id(w)?;
        let n = space.norm(i);
        (n > 0.0).then(|| space.vector(i).iter().map(|v| v / n).collect())
    };
    let (va, vb, vc) = (unit(a)?, unit(b)?, unit(c)?);
    let query: Vec<f64> = (0..space.dim()).map(|i| vc[i] + vb[i] - va[i]).collect();
    if dot(&query, &query) == 0.0 {
        return None;
    }
    let hits = space.nearest(&query, 1, &[a, b, c]).ok()?;
    hits.into_iter().next().map(|h| h.word)
}

/// Runs the evaluator matching the dataset's task.
pub fn evaluate(space: &EmbeddingSpace, ds: &BenchmarkDataset, kmeans: KmeansOptions) -> Result<EvalResult> {
    match ds.task {
        Task::Synonymy => eval_choice(space, ds),
        Task::Similarity | Task::Relatedness => eval_correlation(space, ds),
        Task::Categorization => eval_categorization(space, ds, kmeans),
        Task::Analogy => eval_analogy(space, ds),
    }
}
