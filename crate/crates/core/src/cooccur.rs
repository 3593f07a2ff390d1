//! Sparse target × context co-occurrence counts under four context regimes:
//! undirected windows, dependency-filtered collocates, dependency-typed
//! collocates, and documents.
//!
//! Counting goes through a [`CooccurrenceBuilder`]. Builders can be fed
//! disjoint shards of a corpus and merged, since counts only ever add up;
//! [`CooccurrenceBuilder::finish`] sorts the entries and produces an
//! immutable [`CooccurrenceMatrix`].

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Vocabulary};
use crate::error::{DsmError, Result};
use crate::sparse::CsrMatrix;

/// Default minimum frequency a typed collocate must exceed to be kept.
pub const DEFAULT_TYPED_MIN_FREQ: u64 = 500;
/// Default number of contexts kept for explicit PPMI vectors.
pub const DEFAULT_TOP_K: usize = 10_000;
/// Marker appended to a relation label for inverse arcs.
pub const INVERSE_SUFFIX: &str = "-inv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Window,
    DepFiltered,
    DepTyped,
    Document,
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextKind::Window => "window",
            ContextKind::DepFiltered => "dep_filtered",
            ContextKind::DepTyped => "dep_typed",
            ContextKind::Document => "document",
        })
    }
}

impl FromStr for ContextKind {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(ContextKind::Window),
            "dep_filtered" => Ok(ContextKind::DepFiltered),
            "dep_typed" => Ok(ContextKind::DepTyped),
            "document" => Ok(ContextKind::Document),
            _ => Err(DsmError::Format(format!("unknown context kind `{s}`"))),
        }
    }
}

/// Which contexts to extract.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub kind: ContextKind,
    /// Symmetric window radius; only used by `Window`.
    pub window_radius: usize,
    /// Typed collocates with total frequency ≤ this are dropped.
    pub typed_min_freq: u64,
    /// Directed windows are not supported; must stay `false`.
    pub direction_sensitive: bool,
}

impl ContextSpec {
    pub fn window(radius: usize) -> Self {
        ContextSpec {
            kind: ContextKind::Window,
            window_radius: radius,
            typed_min_freq: DEFAULT_TYPED_MIN_FREQ,
            direction_sensitive: false,
        }
    }

    pub fn dep_filtered() -> Self {
        ContextSpec {
            kind: ContextKind::DepFiltered,
            ..Self::window(0)
        }
    }

    pub fn dep_typed(typed_min_freq: u64) -> Self {
        ContextSpec {
            kind: ContextKind::DepTyped,
            typed_min_freq,
            ..Self::window(0)
        }
    }

    pub fn document() -> Self {
        ContextSpec {
            kind: ContextKind::Document,
            ..Self::window(0)
        }
    }

    /// Parses the short names used on the command line and in model ids:
    /// `window2`, `window10`, `windowN`, `dep-filtered`, `dep-typed`,
    /// `document`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "dep-filtered" | "synf" => Ok(Self::dep_filtered()),
            "dep-typed" | "synt" => Ok(Self::dep_typed(DEFAULT_TYPED_MIN_FREQ)),
            "document" | "doc" => Ok(Self::document()),
            _ => {
                let radius = name
                    .strip_prefix("window")
                    .or_else(|| name.strip_prefix('w'))
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| DsmError::Config(format!("unknown context `{name}`")))?;
                let spec = Self::window(radius);
                spec.validate()?;
                Ok(spec)
            }
        }
    }

    /// Short tag for model ids: `w2`, `w10`, `synf`, `synt`, `doc`.
    pub fn short_name(&self) -> String {
        match self.kind {
            ContextKind::Window => format!("w{}", self.window_radius),
            ContextKind::DepFiltered => "synf".into(),
            ContextKind::DepTyped => "synt".into(),
            ContextKind::Document => "doc".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ContextKind::Window && self.window_radius < 1 {
            return Err(DsmError::Config("window radius must be at least 1".into()));
        }
        if self.direction_sensitive {
            return Err(DsmError::Config("directed windows are not supported".into()));
        }
        Ok(())
    }
}

/// A finalized co-occurrence matrix with its row and column catalogs.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    pub kind: ContextKind,
    targets: Vec<String>,
    contexts: Vec<String>,
    counts: CsrMatrix,
    row_marginals: Vec<f64>,
    col_marginals: Vec<f64>,
    grand_total: f64,
}

impl CooccurrenceMatrix {
    pub fn new(
        kind: ContextKind,
        targets: Vec<String>,
        contexts: Vec<String>,
        counts: CsrMatrix,
    ) -> Result<Self> {
        if counts.n_rows() != targets.len() || counts.n_cols() != contexts.len() {
            return Err(DsmError::DimensionMismatch {
                expected: targets.len() * contexts.len(),
                found: counts.n_rows() * counts.n_cols(),
            });
        }
        if counts.iter().any(|(_, _, v)| v < 0.0) {
            return Err(DsmError::Format("co-occurrence counts must be non-negative".into()));
        }
        let row_marginals = counts.row_sums();
        let col_marginals = counts.col_sums();
        let grand_total = row_marginals.iter().sum();
        Ok(CooccurrenceMatrix {
            kind,
            targets,
            contexts,
            counts,
            row_marginals,
            col_marginals,
            grand_total,
        })
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn contexts(&self) -> &[String] {
        &self.contexts
    }

    pub fn counts(&self) -> &CsrMatrix {
        &self.counts
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[f64] {
        &self.col_marginals
    }

    pub fn grand_total(&self) -> f64 {
        self.grand_total
    }

    pub fn nnz(&self) -> usize {
        self.counts.nnz()
    }

    /// Count for a (target, context) label pair; 0 when either is unknown.
    pub fn get(&self, target: &str, context: &str) -> f64 {
        let r = self.targets.iter().position(|t| t == target);
        let c = self.contexts.iter().position(|t| t == context);
        match (r, c) {
            (Some(r), Some(c)) => self.counts.get(r, c),
            _ => 0.0,
        }
    }

    /// Non-zero entries as `(target, context, value)` label triples.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.counts
            .iter()
            .map(|(r, c, v)| (self.targets[r].as_str(), self.contexts[c].as_str(), v))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = format!(
            "rows={} cols={} kind={}",
            self.targets.len(),
            self.contexts.len(),
            self.kind
        );
        write_labeled(
            path.as_ref(),
            &header,
            &self.targets,
            &self.contexts,
            &self.counts,
            &self.row_marginals,
            &self.col_marginals,
        )
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let lm = read_labeled(path.as_ref())?;
        let kind = lm
            .header
            .get("kind")
            .ok_or_else(|| DsmError::Format("matrix header lacks `kind=`".into()))?
            .parse()?;
        CooccurrenceMatrix::new(kind, lm.targets, lm.contexts, lm.matrix)
    }
}

/// Accumulates co-occurrence counts for one context regime.
pub struct CooccurrenceBuilder<'v> {
    vocab: &'v Vocabulary,
    spec: ContextSpec,
    counts: FxHashMap<(u32, u64), f64>,
    relations: Vec<String>,
    relation_ids: FxHashMap<String, u32>,
    ids: Vec<Option<u32>>,
}

impl<'v> CooccurrenceBuilder<'v> {
    pub fn new(vocab: &'v Vocabulary, spec: ContextSpec) -> Result<Self> {
        spec.validate()?;
        Ok(CooccurrenceBuilder {
            vocab,
            spec,
            counts: FxHashMap::default(),
            relations: Vec::new(),
            relation_ids: FxHashMap::default(),
            ids: Vec::new(),
        })
    }

    pub fn spec(&self) -> &ContextSpec {
        &self.spec
    }

    pub fn add_sentence(&mut self, s: &Sentence) {
        self.ids.clear();
        self.ids.extend(s.tokens.iter().map(|t| self.vocab.id(t)));
        match self.spec.kind {
            ContextKind::Window => self.add_window(),
            ContextKind::DepFiltered | ContextKind::DepTyped => self.add_arcs(s),
            ContextKind::Document => {
                for i in 0..self.ids.len() {
                    if let Some(t) = self.ids[i] {
                        *self.counts.entry((t, s.doc_id)).or_insert(0.0) += 1.0;
                    }
                }
            }
        }
    }

    fn add_window(&mut self) {
        let n = self.ids.len();
        let r = self.spec.window_radius;
        for i in 0..n {
            let Some(t) = self.ids[i] else { continue };
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(n.saturating_sub(1));
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                if let Some(c) = self.ids[j] {
                    *self.counts.entry((t, c as u64)).or_insert(0.0) += 1.0;
                }
            }
        }
    }

    fn relation_id(&mut self, rel: &str) -> u32 {
        if let Some(&id) = self.relation_ids.get(rel) {
            return id;
        }
        let id = self.relations.len() as u32;
        self.relations.push(rel.to_string());
        self.relation_ids.insert(rel.to_string(), id);
        id
    }

    fn add_arcs(&mut self, s: &Sentence) {
        let Some(deps) = &s.deps else { return };
        for d in deps {
            let (Some(&Some(h)), Some(&Some(dep))) = (self.ids.get(d.head), self.ids.get(d.dependent))
            else {
                continue;
            };
            match self.spec.kind {
                ContextKind::DepFiltered => {
                    *self.counts.entry((h, dep as u64)).or_insert(0.0) += 1.0;
                    *self.counts.entry((dep, h as u64)).or_insert(0.0) += 1.0;
                }
                _ => {
                    let rel = self.relation_id(&d.relation) as u64;
                    *self.counts.entry((h, typed_key(rel, false, dep))).or_insert(0.0) += 1.0;
                    *self.counts.entry((dep, typed_key(rel, true, h))).or_insert(0.0) += 1.0;
                }
            }
        }
    }

    /// Adds another builder's counts (same vocabulary and spec).
    pub fn merge(&mut self, other: CooccurrenceBuilder<'_>) -> Result<()> {
        if other.spec != self.spec || other.vocab.len() != self.vocab.len() {
            return Err(DsmError::Config("cannot merge builders with different setups".into()));
        }
        let remap: Vec<u64> = other
            .relations
            .iter()
            .map(|r| self.relation_id(r) as u64)
            .collect();
        let typed = self.spec.kind == ContextKind::DepTyped;
        for ((t, c), v) in other.counts {
            let c = if typed {
                let (rel, inv, w) = split_typed_key(c);
                typed_key(remap[rel as usize], inv, w)
            } else {
                c
            };
            *self.counts.entry((t, c)).or_insert(0.0) += v;
        }
        Ok(())
    }

    /// Builds the column catalog, applies typed-collocate pruning, and sorts
    /// the entries.
    pub fn finish(self) -> CooccurrenceMatrix {
        let targets = self.vocab.words().to_vec();
        let (contexts, col_of): (Vec<String>, FxHashMap<u64, u32>) = match self.spec.kind {
            ContextKind::Window | ContextKind::DepFiltered => {
                let map = (0..self.vocab.len() as u64).map(|i| (i, i as u32)).collect();
                (targets.clone(), map)
            }
            ContextKind::Document => {
                let mut docs: Vec<u64> = self.counts.keys().map(|&(_, d)| d).collect();
                docs.sort_unstable();
                docs.dedup();
                let labels = docs.iter().map(|d| d.to_string()).collect();
                let map = docs.iter().enumerate().map(|(i, &d)| (d, i as u32)).collect();
                (labels, map)
            }
            ContextKind::DepTyped => {
                let mut freq: FxHashMap<u64, f64> = FxHashMap::default();
                for (&(_, c), &v) in &self.counts {
                    *freq.entry(c).or_insert(0.0) += v;
                }
                let mut kept: Vec<(String, f64, u64)> = freq
                    .into_iter()
                    .filter(|&(_, f)| f > self.spec.typed_min_freq as f64)
                    .map(|(key, f)| {
                        let (rel, inv, w) = split_typed_key(key);
                        (typed_label(&self.relations[rel as usize], inv, self.vocab.word(w)), f, key)
                    })
                    .collect();
                kept.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                let map = kept.iter().enumerate().map(|(i, k)| (k.2, i as u32)).collect();
                (kept.into_iter().map(|k| k.0).collect(), map)
            }
        };
        let triplets = self
            .counts
            .into_iter()
            .filter_map(|((t, c), v)| col_of.get(&c).map(|&col| (t, col, v)))
            .collect();
        let csr = CsrMatrix::from_triplets(targets.len(), contexts.len(), triplets)
            .expect("builder indices are within the catalogs");
        CooccurrenceMatrix::new(self.spec.kind, targets, contexts, csr)
            .expect("catalog sizes match by construction")
    }
}

fn typed_key(rel: u64, inverse: bool, word: u32) -> u64 {
    (rel << 33) | ((inverse as u64) << 32) | word as u64
}

fn split_typed_key(key: u64) -> (u64, bool, u32) {
    (key >> 33, (key >> 32) & 1 == 1, key as u32)
}

/// Context label for a typed collocate, e.g. `nsubj-dog` or
/// `nsubj-inv-barks`.
pub fn typed_label(relation: &str, inverse: bool, word: &str) -> String {
    if inverse {
        format!("{relation}{INVERSE_SUFFIX}-{word}")
    } else {
        format!("{relation}-{word}")
    }
}

fn extract<I, S>(stream: I, vocab: &Vocabulary, spec: ContextSpec) -> Result<CooccurrenceMatrix>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    let mut b = CooccurrenceBuilder::new(vocab, spec)?;
    for s in stream {
        b.add_sentence(s.borrow());
    }
    Ok(b.finish())
}

/// Undirected window co-occurrences; windows never cross sentences.
pub fn extract_window<I, S>(stream: I, vocab: &Vocabulary, spec: ContextSpec) -> Result<CooccurrenceMatrix>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    if spec.kind != ContextKind::Window {
        return Err(DsmError::Config("extract_window needs a window spec".into()));
    }
    extract(stream, vocab, spec)
}

/// Dependency collocates with direct and inverse arcs. Arcs touching an
/// out-of-vocabulary word are skipped.
pub fn extract_dependency<I, S>(
    stream: I,
    vocab: &Vocabulary,
    spec: ContextSpec,
) -> Result<CooccurrenceMatrix>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    if !matches!(spec.kind, ContextKind::DepFiltered | ContextKind::DepTyped) {
        return Err(DsmError::Config("extract_dependency needs a dependency spec".into()));
    }
    extract(stream, vocab, spec)
}

/// Word × document counts; columns are the document ids seen in the stream.
pub fn extract_document<I, S>(stream: I, vocab: &Vocabulary) -> Result<CooccurrenceMatrix>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    extract(stream, vocab, ContextSpec::document())
}

/// Dispatches on `spec.kind`.
pub fn extract_contexts<I, S>(stream: I, vocab: &Vocabulary, spec: ContextSpec) -> Result<CooccurrenceMatrix>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    extract(stream, vocab, spec)
}

/// Keeps the `top_k` columns with the largest marginals (ties broken by
/// label), preserving their original order. `top_k ≥ |C|` is the identity.
pub fn prune_contexts(m: &CooccurrenceMatrix, top_k: usize) -> Result<CooccurrenceMatrix> {
    if top_k < 1 {
        return Err(DsmError::Config("top_k must be at least 1".into()));
    }
    if top_k >= m.contexts.len() {
        return Ok(m.clone());
    }
    let mut order: Vec<usize> = (0..m.contexts.len()).collect();
    order.sort_by(|&a, &b| {
        m.col_marginals[b]
            .total_cmp(&m.col_marginals[a])
            .then_with(|| m.contexts[a].cmp(&m.contexts[b]))
    });
    let mut keep = order[..top_k].to_vec();
    keep.sort_unstable();
    let contexts = keep.iter().map(|&c| m.contexts[c].clone()).collect();
    CooccurrenceMatrix::new(m.kind, m.targets.clone(), contexts, m.counts.select_columns(&keep))
}

pub(crate) struct LabeledMatrix {
    pub header: BTreeMap<String, String>,
    pub targets: Vec<String>,
    pub contexts: Vec<String>,
    pub matrix: CsrMatrix,
}

/// Companion catalog paths for a matrix file.
pub fn catalog_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = path.as_os_str().to_string_lossy().into_owned();
    (
        PathBuf::from(format!("{base}.targets.tsv")),
        PathBuf::from(format!("{base}.contexts.tsv")),
    )
}

pub(crate) fn write_labeled(
    path: &Path,
    header: &str,
    targets: &[String],
    contexts: &[String],
    m: &CsrMatrix,
    row_marginals: &[f64],
    col_marginals: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "#{header}")?;
    for (r, c, v) in m.iter() {
        writeln!(w, "{}\t{}\t{}", targets[r], contexts[c], v)?;
    }
    w.flush()?;
    let (tp, cp) = catalog_paths(path);
    for (p, labels, marg) in [(tp, targets, row_marginals), (cp, contexts, col_marginals)] {
        let mut w = BufWriter::new(File::create(p)?);
        for (l, m) in labels.iter().zip(marg) {
            writeln!(w, "{l}\t{m}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn read_catalog(path: &Path) -> Result<Vec<String>> {
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let label = line
            .split('\t')
            .next()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| DsmError::parse(&name, i + 1, "empty catalog line"))?;
        out.push(label.to_string());
    }
    Ok(out)
}

pub(crate) fn read_labeled(path: &Path) -> Result<LabeledMatrix> {
    let name = path.display().to_string();
    let (tp, cp) = catalog_paths(path);
    let targets = read_catalog(&tp)?;
    let contexts = read_catalog(&cp)?;
    let t_ids: FxHashMap<&str, u32> = targets.iter().enumerate().map(|(i, t)| (t.as_str(), i as u32)).collect();
    let c_ids: FxHashMap<&str, u32> = contexts.iter().enumerate().map(|(i, t)| (t.as_str(), i as u32)).collect();
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| DsmError::parse(&name, 1, "empty matrix file"))?;
    let header: BTreeMap<String, String> = header_line
        .strip_prefix('#')
        .ok_or_else(|| DsmError::parse(&name, 1, "missing `#rows=… cols=…` header"))?
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let dim = |key: &str| -> Result<usize> {
        header
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| DsmError::parse(&name, 1, format!("header lacks `{key}=`")))
    };
    if dim("rows")? != targets.len() || dim("cols")? != contexts.len() {
        return Err(DsmError::parse(&name, 1, "header dimensions disagree with catalogs"));
    }
    let mut trip = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let mut f = line.split('\t');
        let (Some(t), Some(c), Some(v), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(DsmError::parse(&name, lineno, "expected target<TAB>context<TAB>value"));
        };
        let r = *t_ids
            .get(t)
            .ok_or_else(|| DsmError::parse(&name, lineno, format!("unknown target `{t}`")))?;
        let c = *c_ids
            .get(c)
            .ok_or_else(|| DsmError::parse(&name, lineno, format!("unknown context `{c}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| DsmError::parse(&name, lineno, format!("bad value `{v}`")))?;
        trip.push((r, c, v));
    }
    let matrix = CsrMatrix::from_triplets(targets.len(), contexts.len(), trip)?;
    Ok(LabeledMatrix {
        header,
        targets,
        contexts,
        matrix,
    })
}
