//! Corpus ingestion: sentence records, plain-text and CoNLL-U readers, the
//! vocabulary, and frequency subsampling.
//!
//! Tokens are case-folded at ingestion. A corpus is consumed as a stream of
//! [`Sentence`] values so that multi-billion-token inputs never have to be
//! held in memory; every operation here takes any `IntoIterator` whose items
//! borrow as a `Sentence`.

use std::borrow::Borrow;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};
use crate::hashing::{mix3, unit_f64};

/// Default minimum corpus frequency for a word to enter the vocabulary.
pub const DEFAULT_MIN_COUNT: u64 = 100;
/// Default subsampling threshold on relative frequency.
pub const DEFAULT_SUBSAMPLE_THRESHOLD: f64 = 1e-5;
/// Share of a word's occurrences that must carry one coarse POS for the word
/// to be assigned that POS.
pub const DEFAULT_POS_MAJORITY: f64 = 0.9;

/// Coarse part of speech used for stratified sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Other,
}

impl PosTag {
    /// Maps a Universal POS tag onto the coarse classes. Proper nouns and
    /// auxiliaries fall into `Other`.
    pub fn from_upos(upos: &str) -> PosTag {
        match upos {
            "NOUN" => PosTag::Noun,
            "VERB" => PosTag::Verb,
            "ADJ" => PosTag::Adjective,
            _ => PosTag::Other,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    const ALL: [PosTag; 4] = [PosTag::Noun, PosTag::Verb, PosTag::Adjective, PosTag::Other];
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Adjective => "adjective",
            PosTag::Other => "other",
        })
    }
}

impl FromStr for PosTag {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noun" => Ok(PosTag::Noun),
            "verb" => Ok(PosTag::Verb),
            "adjective" => Ok(PosTag::Adjective),
            "other" => Ok(PosTag::Other),
            _ => Err(DsmError::Format(format!("unknown POS tag `{s}`"))),
        }
    }
}

/// A basic dependency arc between two tokens of the same sentence, with
/// 0-based token indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dependency {
    pub head: usize,
    pub dependent: usize,
    pub relation: String,
}

/// One sentence of the corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    /// Present when the sentence comes from a parsed corpus.
    pub deps: Option<Vec<Dependency>>,
    /// Per-token coarse POS, when the corpus is tagged.
    pub pos: Option<Vec<PosTag>>,
    pub doc_id: u64,
}

impl Sentence {
    /// A plain sentence without annotation; tokens are case-folded.
    pub fn new<S: AsRef<str>>(tokens: &[S], doc_id: u64) -> Self {
        Sentence {
            tokens: tokens.iter().map(|t| t.as_ref().to_lowercase()).collect(),
            deps: None,
            pos: None,
            doc_id,
        }
    }

    /// Parses a whitespace-separated line.
    pub fn from_line(line: &str, doc_id: u64) -> Self {
        Sentence {
            tokens: line.split_whitespace().map(str::to_lowercase).collect(),
            deps: None,
            pos: None,
            doc_id,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the arc invariants: indices in range and no self-loops.
    pub fn validate(&self) -> Result<()> {
        if let Some(deps) = &self.deps {
            for d in deps {
                if d.head >= self.len() || d.dependent >= self.len() {
                    return Err(DsmError::Format(format!(
                        "arc {}→{} out of range for a {}-token sentence",
                        d.head,
                        d.dependent,
                        self.len()
                    )));
                }
                if d.head == d.dependent {
                    return Err(DsmError::Format(format!("self-loop on token {}", d.head)));
                }
            }
        }
        if let Some(pos) = &self.pos {
            if pos.len() != self.len() {
                return Err(DsmError::Format("POS tags do not align with tokens".into()));
            }
        }
        Ok(())
    }
}

/// Word ↔ id mapping with corpus frequencies.
///
/// Ids are dense and assigned by descending frequency, ties broken
/// lexicographically. `total_tokens` counts every token of the stream the
/// vocabulary was built from, including pruned words.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: FxHashMap<String, u32>,
    freq: Vec<u64>,
    total_tokens: u64,
    pos_tags: Option<Vec<PosTag>>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, freq)` entries already in id order.
    pub fn from_entries(
        entries: Vec<(String, u64)>,
        total_tokens: u64,
        pos_tags: Option<Vec<PosTag>>,
    ) -> Result<Self> {
        if let Some(tags) = &pos_tags {
            if tags.len() != entries.len() {
                return Err(DsmError::Format("POS tags do not align with words".into()));
            }
        }
        let mut index = FxHashMap::default();
        let mut words = Vec::with_capacity(entries.len());
        let mut freq = Vec::with_capacity(entries.len());
        let mut sum = 0u64;
        for (id, (w, f)) in entries.into_iter().enumerate() {
            if index.insert(w.clone(), id as u32).is_some() {
                return Err(DsmError::Format(format!("duplicate word `{w}`")));
            }
            sum += f;
            words.push(w);
            freq.push(f);
        }
        if sum > total_tokens {
            return Err(DsmError::Format(format!(
                "frequencies sum to {sum}, more than total_tokens {total_tokens}"
            )));
        }
        Ok(Vocabulary {
            words,
            index,
            freq,
            total_tokens,
            pos_tags,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freq[id as usize]
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freq
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Relative corpus frequency `freq / total_tokens`.
    pub fn relative_freq(&self, id: u32) -> f64 {
        self.freq[id as usize] as f64 / self.total_tokens as f64
    }

    pub fn pos_tag(&self, id: u32) -> Option<PosTag> {
        self.pos_tags.as_ref().map(|t| t[id as usize])
    }

    pub fn has_pos_tags(&self) -> bool {
        self.pos_tags.is_some()
    }

    /// Writes the TSV form: a `#total_tokens=N` header, then
    /// `word<TAB>freq[<TAB>pos]` per id.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#total_tokens={}", self.total_tokens)?;
        for (id, word) in self.words.iter().enumerate() {
            match &self.pos_tags {
                Some(tags) => writeln!(w, "{word}\t{}\t{}", self.freq[id], tags[id])?,
                None => writeln!(w, "{word}\t{}", self.freq[id])?,
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_tsv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let total_tokens = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                line.strip_prefix("#total_tokens=")
                    .and_then(|n| n.trim().parse::<u64>().ok())
                    .ok_or_else(|| {
                        DsmError::parse(source_name, 1, "expected `#total_tokens=N` header")
                    })?
            }
            None => return Err(DsmError::parse(source_name, 1, "empty vocabulary file")),
        };
        let mut entries = Vec::new();
        let mut tags = Vec::new();
        let mut tagged = None;
        for (i, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let has_tag = match fields.len() {
                2 => false,
                3 => true,
                _ => return Err(DsmError::parse(source_name, i + 1, "expected 2 or 3 columns")),
            };
            if *tagged.get_or_insert(has_tag) != has_tag {
                return Err(DsmError::parse(source_name, i + 1, "inconsistent POS column"));
            }
            let f = fields[1]
                .parse::<u64>()
                .map_err(|e| DsmError::parse(source_name, i + 1, e.to_string()))?;
            entries.push((fields[0].to_string(), f));
            if has_tag {
                tags.push(
                    fields[2]
                        .parse::<PosTag>()
                        .map_err(|e| DsmError::parse(source_name, i + 1, e.to_string()))?,
                );
            }
        }
        let pos = if tagged == Some(true) { Some(tags) } else { None };
        Vocabulary::from_entries(entries, total_tokens, pos)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        Self::read_tsv(reader, &path.display().to_string())
    }
}

/// Options for [`build_vocabulary_with`].
#[derive(Clone, Copy, Debug)]
pub struct VocabConfig {
    pub min_count: u64,
    /// Required share of occurrences for majority-POS assignment.
    pub pos_majority: f64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            min_count: DEFAULT_MIN_COUNT,
            pos_majority: DEFAULT_POS_MAJORITY,
        }
    }
}

/// Counts the stream and keeps words with frequency ≥ `min_count`.
pub fn build_vocabulary<I, S>(stream: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    build_vocabulary_with(
        stream,
        VocabConfig {
            min_count,
            ..VocabConfig::default()
        },
    )
}

/// Like [`build_vocabulary`], also assigning majority POS tags when every
/// sentence of the stream is tagged.
pub fn build_vocabulary_with<I, S>(stream: I, cfg: VocabConfig) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    if cfg.min_count < 1 {
        return Err(DsmError::Config("min_count must be at least 1".into()));
    }
    let mut counts: FxHashMap<String, (u64, [u64; 4])> = FxHashMap::default();
    let mut total = 0u64;
    let mut all_tagged = true;
    for s in stream {
        let s = s.borrow();
        total += s.tokens.len() as u64;
        match &s.pos {
            Some(pos) => {
                for (tok, tag) in s.tokens.iter().zip(pos) {
                    let e = entry(&mut counts, tok);
                    e.0 += 1;
                    e.1[tag.index()] += 1;
                }
            }
            None => {
                if !s.tokens.is_empty() {
                    all_tagged = false;
                }
                for tok in &s.tokens {
                    entry(&mut counts, tok).0 += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(DsmError::EmptyVocabulary {
            min_count: cfg.min_count,
        });
    }
    let mut kept: Vec<(String, (u64, [u64; 4]))> = counts
        .into_iter()
        .filter(|(_, (f, _))| *f >= cfg.min_count)
        .collect();
    if kept.is_empty() {
        return Err(DsmError::EmptyVocabulary {
            min_count: cfg.min_count,
        });
    }
    kept.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
    let pos = all_tagged.then(|| {
        kept.iter()
            .map(|(_, (f, by_tag))| majority_tag(*f, by_tag, cfg.pos_majority))
            .collect()
    });
    let entries = kept.into_iter().map(|(w, (f, _))| (w, f)).collect();
    Vocabulary::from_entries(entries, total, pos)
}

fn entry<'a>(
    counts: &'a mut FxHashMap<String, (u64, [u64; 4])>,
    tok: &str,
) -> &'a mut (u64, [u64; 4]) {
    if !counts.contains_key(tok) {
        counts.insert(tok.to_string(), (0, [0; 4]));
    }
    counts.get_mut(tok).unwrap()
}

fn majority_tag(total: u64, by_tag: &[u64; 4], share: f64) -> PosTag {
    PosTag::ALL
        .into_iter()
        .find(|t| *t != PosTag::Other && by_tag[t.index()] as f64 >= share * total as f64)
        .unwrap_or(PosTag::Other)
}

/// Subsampling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    /// Relative-frequency threshold `t`.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig {
            threshold: DEFAULT_SUBSAMPLE_THRESHOLD,
            seed: 0,
        }
    }
}

impl SubsampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(DsmError::Config(format!(
                "subsampling threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Removal probability `1 − sqrt(t / F)` for relative frequency `F`; zero
/// below the threshold.
pub fn removal_probability(relative_freq: f64, threshold: f64) -> f64 {
    if relative_freq < threshold {
        0.0
    } else {
        1.0 - (threshold / relative_freq).sqrt()
    }
}

/// Lazily subsamples a sentence stream.
///
/// Each in-vocabulary token occurrence is dropped with
/// [`removal_probability`]. The decision for the k-th occurrence of a word
/// depends only on `(seed, word id, k)`, so the output is bit-reproducible.
/// Out-of-vocabulary tokens are always kept. Arcs touching a removed token
/// are dropped and the remaining indices are renumbered; sentences left
/// empty are skipped.
pub fn subsample<'v, I, S>(
    stream: I,
    vocab: &'v Vocabulary,
    cfg: SubsampleConfig,
) -> Result<Subsample<'v, I::IntoIter>>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    cfg.validate()?;
    let drop_prob = (0..vocab.len() as u32)
        .map(|id| removal_probability(vocab.relative_freq(id), cfg.threshold))
        .collect();
    Ok(Subsample {
        inner: stream.into_iter(),
        vocab,
        seed: cfg.seed,
        drop_prob,
        seen: vec![0; vocab.len()],
    })
}

/// Iterator returned by [`subsample`].
pub struct Subsample<'v, I> {
    inner: I,
    vocab: &'v Vocabulary,
    seed: u64,
    drop_prob: Vec<f64>,
    seen: Vec<u64>,
}

impl<I, S> Iterator for Subsample<'_, I>
where
    I: Iterator<Item = S>,
    S: Borrow<Sentence>,
{
    type Item = Sentence;

    fn next(&mut self) -> Option<Sentence> {
        loop {
            let s = self.inner.next()?;
            let out = self.filter(s.borrow());
            if !out.is_empty() {
                return Some(out);
            }
        }
    }
}

impl<I> Subsample<'_, I> {
    fn keep(&mut self, token: &str) -> bool {
        match self.vocab.id(token) {
            None => true,
            Some(id) => {
                let k = self.seen[id as usize];
                self.seen[id as usize] += 1;
                let p = self.drop_prob[id as usize];
                p <= 0.0 || unit_f64(mix3(self.seed, id as u64, k)) >= p
            }
        }
    }

    fn filter(&mut self, s: &Sentence) -> Sentence {
        let mut new_index = vec![usize::MAX; s.len()];
        let mut tokens = Vec::with_capacity(s.len());
        let mut pos = s.pos.as_ref().map(|_| Vec::with_capacity(s.len()));
        for (i, tok) in s.tokens.iter().enumerate() {
            if self.keep(tok) {
                new_index[i] = tokens.len();
                tokens.push(tok.clone());
                if let (Some(out), Some(src)) = (pos.as_mut(), s.pos.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        let deps = s.deps.as_ref().map(|deps| {
            deps.iter()
                .filter(|d| new_index[d.head] != usize::MAX && new_index[d.dependent] != usize::MAX)
                .map(|d| Dependency {
                    head: new_index[d.head],
                    dependent: new_index[d.dependent],
                    relation: d.relation.clone(),
                })
                .collect()
        });
        Sentence {
            tokens,
            deps,
            pos,
            doc_id: s.doc_id,
        }
    }
}

/// Streams a plain corpus: one sentence per line, whitespace-separated
/// tokens, blank lines separating documents.
pub struct PlainReader<R> {
    lines: std::io::Lines<R>,
    doc_id: u64,
    doc_has_sentences: bool,
}

impl<R: BufRead> PlainReader<R> {
    pub fn new(reader: R) -> Self {
        PlainReader {
            lines: reader.lines(),
            doc_id: 0,
            doc_has_sentences: false,
        }
    }
}

impl PlainReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(PlainReader::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead> Iterator for PlainReader<R> {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            if line.trim().is_empty() {
                if self.doc_has_sentences {
                    self.doc_id += 1;
                    self.doc_has_sentences = false;
                }
                continue;
            }
            self.doc_has_sentences = true;
            return Some(Ok(Sentence::from_line(&line, self.doc_id)));
        }
    }
}

/// Writes sentences in the plain format, inserting a blank line whenever the
/// document id changes.
pub fn write_plain<W, I, S>(mut w: W, sentences: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    let mut last_doc = None;
    for s in sentences {
        let s = s.borrow();
        if s.is_empty() {
            continue;
        }
        if last_doc.is_some_and(|d| d != s.doc_id) {
            writeln!(w)?;
        }
        last_doc = Some(s.doc_id);
        writeln!(w, "{}", s.tokens.join(" "))?;
    }
    Ok(())
}

/// Streams CoNLL-U sentences with basic dependency arcs.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped;
/// `# newdoc` comments start a new document. Forms are case-folded and the
/// UPOS column is mapped onto [`PosTag`].
pub struct ConlluReader<R> {
    lines: std::io::Lines<R>,
    source_name: String,
    line_no: usize,
    doc_id: u64,
    doc_has_sentences: bool,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R, source_name: impl Into<String>) -> Self {
        ConlluReader {
            lines: reader.lines(),
            source_name: source_name.into(),
            line_no: 0,
            doc_id: 0,
            doc_has_sentences: false,
            done: false,
        }
    }
}

impl ConlluReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(ConlluReader::new(
            BufReader::new(File::open(path)?),
            path.display().to_string(),
        ))
    }
}

struct PendingSentence {
    tokens: Vec<String>,
    pos: Vec<PosTag>,
    // (head 1-based, dependent 1-based, relation, line number)
    arcs: Vec<(usize, usize, String, usize)>,
}

impl<R: BufRead> ConlluReader<R> {
    fn finish(&mut self, p: PendingSentence) -> Result<Sentence> {
        let n = p.tokens.len();
        let mut deps = Vec::with_capacity(p.arcs.len());
        for (head, dep, rel, line) in p.arcs {
            if head > n {
                return Err(DsmError::parse(
                    &self.source_name,
                    line,
                    format!("head {head} out of range for a {n}-token sentence"),
                ));
            }
            if head == dep {
                return Err(DsmError::parse(&self.source_name, line, "self-loop arc"));
            }
            deps.push(Dependency {
                head: head - 1,
                dependent: dep - 1,
                relation: rel,
            });
        }
        self.doc_has_sentences = true;
        Ok(Sentence {
            tokens: p.tokens,
            deps: Some(deps),
            pos: Some(p.pos),
            doc_id: self.doc_id,
        })
    }

    fn read_token_line(&self, line: &str, p: &mut PendingSentence) -> Result<()> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(DsmError::parse(
                &self.source_name,
                self.line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            return Ok(());
        }
        let id: usize = id.parse().map_err(|_| {
            DsmError::parse(&self.source_name, self.line_no, format!("bad token id `{id}`"))
        })?;
        if id != p.tokens.len() + 1 {
            return Err(DsmError::parse(
                &self.source_name,
                self.line_no,
                format!("token id {id} out of sequence"),
            ));
        }
        p.tokens.push(cols[1].to_lowercase());
        p.pos.push(PosTag::from_upos(cols[3]));
        if cols[6] != "_" {
            let head: usize = cols[6].parse().map_err(|_| {
                DsmError::parse(
                    &self.source_name,
                    self.line_no,
                    format!("bad head `{}`", cols[6]),
                )
            })?;
            if head != 0 {
                p.arcs.push((head, id, cols[7].to_string(), self.line_no));
            }
        }
        Ok(())
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<Sentence>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut pending: Option<PendingSentence> = None;
        loop {
            let line = match self.lines.next() {
                Some(Ok(l)) => l,
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                None => {
                    self.done = true;
                    return pending.map(|p| self.finish(p));
                }
            };
            self.line_no += 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() {
                if let Some(p) = pending.take() {
                    return Some(self.finish(p));
                }
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if comment.trim_start().starts_with("newdoc") && self.doc_has_sentences {
                    self.doc_id += 1;
                    self.doc_has_sentences = false;
                }
                continue;
            }
            let p = pending.get_or_insert_with(|| PendingSentence {
                tokens: Vec::new(),
                pos: Vec::new(),
                arcs: Vec::new(),
            });
            if let Err(e) = self.read_token_line(trimmed, p) {
                self.done = true;
                return Some(Err(e));
            }
        }
    }
}

/// Reads a whole CoNLL-U file.
pub fn load_conllu(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    ConlluReader::open(path)?.collect()
}

/// Writes a minimal CoNLL-U rendering (form, coarse POS, head, relation).
pub fn write_conllu<W, I, S>(mut w: W, sentences: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    let mut last_doc = None;
    for s in sentences {
        let s = s.borrow();
        if last_doc != Some(s.doc_id) {
            writeln!(w, "# newdoc id = {}", s.doc_id)?;
            last_doc = Some(s.doc_id);
        }
        let mut heads = vec![None; s.len()];
        if let Some(deps) = &s.deps {
            for d in deps {
                heads[d.dependent] = Some((d.head + 1, d.relation.as_str()));
            }
        }
        for (i, tok) in s.tokens.iter().enumerate() {
            let upos = match s.pos.as_ref().map(|p| p[i]) {
                Some(PosTag::Noun) => "NOUN",
                Some(PosTag::Verb) => "VERB",
                Some(PosTag::Adjective) => "ADJ",
                Some(PosTag::Other) => "X",
                None => "_",
            };
            let (head, rel) = match heads[i] {
                Some((h, r)) => (h.to_string(), r),
                None => ("0".to_string(), "root"),
            };
            writeln!(w, "{}\t{tok}\t_\t{upos}\t_\t_\t{head}\t{rel}\t_\t_", i + 1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
