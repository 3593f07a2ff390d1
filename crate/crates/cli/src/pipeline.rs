//! Corpus streaming and the chain that turns a corpus into an embedding
//! space: vocabulary, optional subsampling, co-occurrence extraction, then
//! weighting plus SVD or Random Indexing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dsm_core::cooccur::{extract_contexts, prune_contexts, ContextSpec, DEFAULT_TYPED_MIN_FREQ};
use dsm_core::corpus::{
    build_vocabulary_with, subsample, ConlluReader, PlainReader, Sentence, SubsampleConfig, VocabConfig, Vocabulary,
    DEFAULT_MIN_COUNT,
};
use dsm_core::error::DsmError;
use dsm_core::randindex::{make_index_vectors, train_ri, RiConfig, DEFAULT_DELTA, DEFAULT_THETA};
use dsm_core::reweight::{log_entropy, ppmi, truncated_svd, Scheme, DEFAULT_ALPHA};
use dsm_core::vecspace::EmbeddingSpace;
use serde::{Deserialize, Serialize};

/// `.conllu` and `.conll` files are read as CoNLL-U, everything else as
/// plain text.
pub fn is_conllu(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("conllu" | "conll"))
}

fn open_one(path: &Path) -> Result<Box<dyn Iterator<Item = dsm_core::Result<Sentence>>>> {
    Ok(if is_conllu(path) {
        Box::new(ConlluReader::open(path).with_context(|| format!("opening {}", path.display()))?)
    } else {
        Box::new(PlainReader::open(path).with_context(|| format!("opening {}", path.display()))?)
    })
}

/// Sentences of several files in order. Document ids are offset so that
/// documents of different files never share an id. Reading stops at the
/// first error, which is kept for [`SentenceStream::finish`].
pub struct SentenceStream {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<Box<dyn Iterator<Item = dsm_core::Result<Sentence>>>>,
    offset: u64,
    next_offset: u64,
    error: Option<anyhow::Error>,
}

impl SentenceStream {
    pub fn open(paths: &[PathBuf]) -> Result<Self> {
        if paths.is_empty() {
            bail!("no corpus files given");
        }
        for p in paths {
            if !p.is_file() {
                bail!("corpus file {} does not exist", p.display());
            }
        }
        Ok(SentenceStream {
            files: paths.to_vec().into_iter(),
            current: None,
            offset: 0,
            next_offset: 0,
            error: None,
        })
    }

    /// The first read error, if any.
    pub fn finish(self) -> Result<()> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl Iterator for SentenceStream {
    type Item = Sentence;

    fn next(&mut self) -> Option<Sentence> {
        if self.error.is_some() {
            return None;
        }
        loop {
            if self.current.is_none() {
                let path = self.files.next()?;
                self.offset = self.next_offset;
                match open_one(&path) {
                    Ok(it) => self.current = Some(it),
                    Err(e) => {
                        self.error = Some(e);
                        return None;
                    }
                }
            }
            match self.current.as_mut().and_then(|it| it.next()) {
                Some(Ok(mut s)) => {
                    s.doc_id += self.offset;
                    self.next_offset = self.next_offset.max(s.doc_id + 1);
                    return Some(s);
                }
                Some(Err(e)) => {
                    self.error = Some(e.into());
                    return None;
                }
                None => self.current = None,
            }
        }
    }
}

/// Runs `f` over the sentences of `paths`, surfacing read errors.
pub fn with_sentences<T>(
    paths: &[PathBuf],
    f: impl FnOnce(&mut SentenceStream) -> dsm_core::Result<T>,
) -> Result<T> {
    let mut stream = SentenceStream::open(paths)?;
    let out = f(&mut stream);
    stream.finish()?;
    Ok(out?)
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    Vocabulary::load(path).with_context(|| format!("reading vocabulary {}", path.display()))
}

pub fn read_space(path: &Path) -> Result<EmbeddingSpace> {
    EmbeddingSpace::import_text(path).with_context(|| format!("reading space {}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Weighted co-occurrence matrix reduced by truncated SVD.
    Svd,
    /// Random Indexing, optionally with permutations.
    Ri,
}

fn default_context() -> String {
    "window2".into()
}
fn default_dim() -> usize {
    300
}
fn default_min_count() -> u64 {
    DEFAULT_MIN_COUNT
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_scheme() -> Scheme {
    Scheme::Ppmi
}
fn default_method() -> Method {
    Method::Svd
}
fn default_delta() -> usize {
    DEFAULT_DELTA
}
fn default_theta() -> f64 {
    DEFAULT_THETA
}
fn default_typed_min_freq() -> u64 {
    DEFAULT_TYPED_MIN_FREQ
}

/// One model of a grid: either a prebuilt space file or a recipe for
/// building one from a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Ledger id; derived from the recipe when absent.
    #[serde(default)]
    pub id: Option<String>,
    /// Prebuilt space in word2vec text format.
    #[serde(default)]
    pub space: Option<PathBuf>,
    #[serde(default)]
    pub corpus: Vec<PathBuf>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_context")]
    pub context: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Keep only this many most frequent contexts before weighting.
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default = "default_typed_min_freq")]
    pub typed_min_freq: u64,
    /// Subsampling threshold; no subsampling when absent.
    #[serde(default)]
    pub subsample: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub permute: bool,
    #[serde(default)]
    pub dynamic_weighting: bool,
}

impl ModelSpec {
    /// A corpus recipe with default settings.
    pub fn recipe(corpus: Vec<PathBuf>, method: Method) -> Self {
        ModelSpec {
            id: None,
            space: None,
            corpus,
            method,
            scheme: default_scheme(),
            context: default_context(),
            dim: default_dim(),
            seed: 0,
            min_count: default_min_count(),
            alpha: default_alpha(),
            top_k: None,
            typed_min_freq: default_typed_min_freq(),
            subsample: None,
            delta: default_delta(),
            theta: default_theta(),
            permute: false,
            dynamic_weighting: false,
        }
    }

    fn context_spec(&self) -> Result<ContextSpec> {
        let mut spec = ContextSpec::from_name(&self.context)?;
        spec.typed_min_freq = self.typed_min_freq;
        Ok(spec)
    }

    fn ri_config(&self) -> Result<RiConfig> {
        let spec = self.context_spec()?;
        if spec.kind != dsm_core::cooccur::ContextKind::Window {
            bail!("Random Indexing needs a window context, got `{}`", self.context);
        }
        Ok(RiConfig {
            window_radius: spec.window_radius,
            permute: self.permute,
            dynamic_weighting: self.dynamic_weighting,
            theta: self.theta,
        })
    }

    /// `<MODEL>.<context>.<dim>`, e.g. `SVD.w2.300` or `RI-perm.w10.2000`.
    pub fn model_id(&self) -> Result<String> {
        if let Some(id) = &self.id {
            return Ok(id.clone());
        }
        if let Some(p) = &self.space {
            return Ok(read_space(p)?.meta.model_id);
        }
        Ok(match self.method {
            Method::Ri => self.ri_config()?.model_id(self.dim),
            Method::Svd => {
                let name = match self.scheme {
                    Scheme::LogEntropy => "LSA",
                    Scheme::Ppmi => "SVD",
                    Scheme::Raw => "SVD-raw",
                };
                format!("{name}.{}.{}", self.context_spec()?.short_name(), self.dim)
            }
        })
    }

    /// Loads the prebuilt space or runs the recipe. The returned space
    /// carries the model id.
    pub fn build(&self) -> Result<EmbeddingSpace> {
        let id = self.model_id()?;
        let mut space = match &self.space {
            Some(p) => read_space(p)?,
            None => self.build_from_corpus()?,
        };
        space.meta.model_id = id;
        Ok(space)
    }

    fn build_from_corpus(&self) -> Result<EmbeddingSpace> {
        if self.corpus.is_empty() {
            bail!("model needs either `space` or `corpus`");
        }
        let vocab_cfg = VocabConfig {
            min_count: self.min_count,
            ..VocabConfig::default()
        };
        let vocab = with_sentences(&self.corpus, |s| build_vocabulary_with(s, vocab_cfg))?;
        log::info!("vocabulary: {} types, {} tokens", vocab.len(), vocab.total_tokens());
        let sub = self.subsample.map(|threshold| SubsampleConfig {
            threshold,
            seed: self.seed,
        });
        let mut space = match self.method {
            Method::Svd => {
                let spec = self.context_spec()?;
                let counts = with_sentences(&self.corpus, |s| match sub {
                    Some(cfg) => extract_contexts(subsample(s, &vocab, cfg)?, &vocab, spec),
                    None => extract_contexts(s, &vocab, spec),
                })?;
                let counts = match self.top_k {
                    Some(k) => prune_contexts(&counts, k)?,
                    None => counts,
                };
                let weighted = match self.scheme {
                    Scheme::Ppmi => ppmi(&counts, self.alpha)?,
                    Scheme::LogEntropy => log_entropy(&counts)?,
                    Scheme::Raw => dsm_core::reweight::WeightedMatrix::raw(&counts),
                };
                let max_dim = weighted.targets().len().min(weighted.contexts().len());
                if self.dim > max_dim {
                    return Err(DsmError::Config(format!(
                        "dim {} exceeds the {}×{} matrix",
                        self.dim,
                        weighted.targets().len(),
                        weighted.contexts().len()
                    ))
                    .into());
                }
                truncated_svd(&weighted, self.dim, self.seed)?
            }
            Method::Ri => {
                let cfg = self.ri_config()?;
                let idx = make_index_vectors(&vocab, self.dim, self.delta, self.seed)?;
                with_sentences(&self.corpus, |s| match sub {
                    Some(sc) => train_ri(subsample(s, &vocab, sc)?, &vocab, &idx, cfg),
                    None => train_ri(s, &vocab, &idx, cfg),
                })?
            }
        };
        space.meta.context = Some(self.context.clone());
        Ok(space)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_ids_follow_the_naming_scheme() {
        let mut m = ModelSpec::recipe(vec![], Method::Svd);
        assert_eq!(m.model_id().unwrap(), "SVD.w2.300");
        m.scheme = Scheme::LogEntropy;
        m.context = "document".into();
        assert_eq!(m.model_id().unwrap(), "LSA.doc.300");
        let mut r = ModelSpec::recipe(vec![], Method::Ri);
        r.context = "window10".into();
        r.dim = 2000;
        r.permute = true;
        assert_eq!(r.model_id().unwrap(), "RI-perm.w10.2000");
        r.id = Some("custom".into());
        assert_eq!(r.model_id().unwrap(), "custom");
    }

    #[test]
    fn ri_rejects_dependency_contexts() {
        let mut r = ModelSpec::recipe(vec![], Method::Ri);
        r.context = "dep-typed".into();
        assert!(r.model_id().is_err());
    }

    #[test]
    fn document_ids_do_not_collide_across_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        std::fs::write(&a, "x y\n\nz\n").unwrap();
        std::fs::write(&b, "u v\n").unwrap();
        let docs: Vec<u64> = with_sentences(&[a, b], |s| Ok(s.map(|x| x.doc_id).collect())).unwrap();
        assert_eq!(docs, vec![0, 1, 2]);
    }

    #[test]
    fn read_errors_surface() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.conllu");
        std::fs::write(&bad, "1\tx\n").unwrap();
        assert!(with_sentences(&[bad], |s| Ok(s.count())).is_err());
        assert!(SentenceStream::open(&[dir.path().join("missing.txt")]).is_err());
    }

    #[test]
    fn builds_a_small_svd_space() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.txt");
        let mut text = String::new();
        for i in 0..200 {
            text.push_str(&format!("the cat{} sat on the mat{}\n", i % 5, i % 7));
        }
        std::fs::write(&c, text).unwrap();
        let mut m = ModelSpec::recipe(vec![c], Method::Svd);
        m.min_count = 1;
        m.dim = 3;
        let s = m.build().unwrap();
        assert_eq!(s.meta.model_id, "SVD.w2.3");
        assert_eq!(s.dim(), 3);
        assert!(s.contains("cat3"));
        m.method = Method::Ri;
        m.dim = 50;
        m.delta = 4;
        assert_eq!(m.build().unwrap().meta.model_id, "RI.w2.50");
    }
}
