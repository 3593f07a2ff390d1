//! Representational similarity analysis: pairwise-cosine matrices over word
//! samples, Spearman correlation between them, and the global, frequency
//! and POS stratified sampling schemes.
//!
//! Matrices hold similarities (cosines), not dissimilarities. Only the strict
//! upper triangle is stored and correlated; the unit diagonal is implicit.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PosTag, Vocabulary};
use crate::error::{DsmError, Result};
use crate::stats::{average_ranks, mean, median, pearson, std_dev};
use crate::vecspace::{dot, EmbeddingSpace};

/// Symmetric cosine matrix over a word list.
#[derive(Clone, Debug, PartialEq)]
pub struct Rsm {
    pub space_id: String,
    words: Vec<String>,
    upper: Vec<f64>,
}

#[inline]
fn upper_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl Rsm {
    pub fn from_upper(space_id: impl Into<String>, words: Vec<String>, upper: Vec<f64>) -> Result<Self> {
        let n = words.len();
        let want = n * n.saturating_sub(1) / 2;
        if upper.len() != want {
            return Err(DsmError::DimensionMismatch {
                expected: want,
                found: upper.len(),
            });
        }
        Ok(Rsm {
            space_id: space_id.into(),
            words,
            upper,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.upper[upper_index(self.len(), i, j)],
            std::cmp::Ordering::Greater => self.upper[upper_index(self.len(), j, i)],
        }
    }

    /// Strict upper triangle, row-major; length `n(n − 1)/2`.
    pub fn upper_triangle(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    /// Writes the triangle as packed little-endian `f64` to `path` and the
    /// word list to `<path>.words.tsv`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        for v in &self.upper {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let mut wl = BufWriter::new(File::create(words_path(path))?);
        writeln!(wl, "#space={}", self.space_id)?;
        for word in &self.words {
            writeln!(wl, "{word}")?;
        }
        wl.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut space_id = String::new();
        let mut words = Vec::new();
        for line in BufReader::new(File::open(words_path(path))?).lines() {
            let line = line?;
            if let Some(id) = line.strip_prefix("#space=") {
                space_id = id.to_string();
            } else if !line.is_empty() {
                words.push(line);
            }
        }
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(DsmError::Format(format!("{}: truncated matrix", path.display())));
        }
        let upper = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_upper(space_id, words, upper)
    }
}

fn words_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".words.tsv");
    PathBuf::from(s)
}

/// Cosine matrix over the words of `wordlist` that have nonzero vectors in
/// `space` (others are dropped with a warning).
pub fn build_rsm(space: &EmbeddingSpace, wordlist: &[String]) -> Result<Rsm> {
    let mut ids = Vec::with_capacity(wordlist.len());
    let mut words = Vec::with_capacity(wordlist.len());
    for w in wordlist {
        match space.id(w) {
            Some(i) if space.norm(i) > 0.0 => {
                ids.push(i);
                words.push(w.clone());
            }
            _ => {}
        }
    }
    if words.len() < wordlist.len() {
        log::warn!(
            "{}: dropped {} of {} sample words (missing or zero vectors)",
            space.meta.model_id,
            wordlist.len() - words.len(),
            wordlist.len()
        );
    }
    if words.len() < 3 {
        return Err(DsmError::InsufficientData {
            needed: 3,
            found: words.len(),
        });
    }
    let n = ids.len();
    let dim = space.dim();
    let mut unit = Vec::with_capacity(n * dim);
    for &i in &ids {
        let nrm = space.norm(i);
        unit.extend(space.vector(i).iter().map(|v| v / nrm));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let vi = &unit[i * dim..(i + 1) * dim];
            (i + 1..n)
                .map(|j| dot(vi, &unit[j * dim..(j + 1) * dim]).clamp(-1.0, 1.0))
                .collect()
        })
        .collect();
    Rsm::from_upper(space.meta.model_id.clone(), words, rows.concat())
}

/// Words of `wordlist` with nonzero vectors in every space, order preserved.
pub fn align_wordlist(spaces: &[&EmbeddingSpace], wordlist: &[String]) -> Vec<String> {
    wordlist
        .iter()
        .filter(|w| spaces.iter().all(|s| s.covers(w)))
        .cloned()
        .collect()
}

/// Spearman ρ between the strict upper triangles of two matrices over the
/// same word list.
pub fn rsa_correlate(r1: &Rsm, r2: &Rsm) -> Result<f64> {
    if r1.words != r2.words {
        return Err(DsmError::Alignment(format!(
            "`{}` and `{}` are built over different word lists",
            r1.space_id, r2.space_id
        )));
    }
    if r1.len() < 3 {
        return Err(DsmError::InsufficientData {
            needed: 3,
            found: r1.len(),
        });
    }
    pearson(&average_ranks(&r1.upper), &average_ranks(&r2.upper))
}

/// Which part of the vocabulary a plan samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stratum {
    Global,
    FreqHigh,
    FreqMid,
    FreqLow,
    PosHigh(PosTag),
    PosMid(PosTag),
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stratum::Global => f.write_str("global"),
            Stratum::FreqHigh => f.write_str("freq_high"),
            Stratum::FreqMid => f.write_str("freq_mid"),
            Stratum::FreqLow => f.write_str("freq_low"),
            Stratum::PosHigh(t) => write!(f, "pos_high_{t}"),
            Stratum::PosMid(t) => write!(f, "pos_mid_{t}"),
        }
    }
}

impl FromStr for Stratum {
    type Err = DsmError;

    /// Inverse of `Display`: `global`, `freq_high`, `pos_mid_noun`, ...
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Stratum::Global),
            "freq_high" => Ok(Stratum::FreqHigh),
            "freq_mid" => Ok(Stratum::FreqMid),
            "freq_low" => Ok(Stratum::FreqLow),
            _ => {
                if let Some(t) = s.strip_prefix("pos_high_") {
                    Ok(Stratum::PosHigh(t.parse()?))
                } else if let Some(t) = s.strip_prefix("pos_mid_") {
                    Ok(Stratum::PosMid(t.parse()?))
                } else {
                    Err(DsmError::Config(format!("unknown stratum `{s}`")))
                }
            }
        }
    }
}

/// Frequency bounds in absolute corpus counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrataBounds {
    /// Size of the high-frequency head (overall and per POS).
    pub high_count: usize,
    /// Mid stratum: frequency strictly above this, head excluded.
    pub mid_min_freq: u64,
    /// Low stratum: frequency in `low_min_freq..=low_max_freq`.
    pub low_min_freq: u64,
    pub low_max_freq: u64,
    /// POS strata: frequency strictly above this.
    pub pos_min_freq: u64,
}

impl Default for StrataBounds {
    fn default() -> Self {
        StrataBounds {
            high_count: 1000,
            mid_min_freq: 500,
            low_min_freq: 100,
            low_max_freq: 500,
            pos_min_freq: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub stratum: Stratum,
    pub n_samples: usize,
    pub sample_size: usize,
    pub bounds: StrataBounds,
    pub seed: u64,
}

impl SamplePlan {
    /// Paper-scale defaults for a stratum.
    pub fn new(stratum: Stratum, seed: u64) -> Self {
        let n_samples = match stratum {
            Stratum::Global => 100,
            Stratum::FreqHigh | Stratum::PosHigh(_) => 1,
            Stratum::FreqMid | Stratum::FreqLow => 10,
            Stratum::PosMid(_) => 4,
        };
        SamplePlan {
            stratum,
            n_samples,
            sample_size: 1000,
            bounds: StrataBounds::default(),
            seed,
        }
    }

    /// Overrides sample count and size, keeping the head size in step with
    /// the sample size.
    pub fn scaled(mut self, n_samples: usize, sample_size: usize) -> Self {
        self.n_samples = n_samples;
        self.sample_size = sample_size;
        self.bounds.high_count = sample_size;
        self
    }
}

/// Vocabulary ids (most frequent first) eligible for the plan's stratum.
fn candidates(vocab: &Vocabulary, plan: &SamplePlan) -> Result<Vec<u32>> {
    let b = &plan.bounds;
    let ids = 0..vocab.len() as u32;
    let pos_ids = |tag: PosTag| -> Result<Vec<u32>> {
        if !vocab.has_pos_tags() {
            return Err(DsmError::Config("POS sampling needs a vocabulary with POS tags".into()));
        }
        Ok((0..vocab.len() as u32)
            .filter(|&i| vocab.freq(i) > b.pos_min_freq && vocab.pos_tag(i) == Some(tag))
            .collect())
    };
    Ok(match plan.stratum {
        Stratum::Global => ids.collect(),
        Stratum::FreqHigh => ids.take(b.high_count).collect(),
        Stratum::FreqMid => ids.skip(b.high_count).filter(|&i| vocab.freq(i) > b.mid_min_freq).collect(),
        Stratum::FreqLow => ids
            .filter(|&i| (b.low_min_freq..=b.low_max_freq).contains(&vocab.freq(i)))
            .collect(),
        Stratum::PosHigh(t) => pos_ids(t)?.into_iter().take(b.high_count).collect(),
        Stratum::PosMid(t) => pos_ids(t)?.into_iter().skip(b.high_count).collect(),
    })
}

/// Disjoint word samples for a plan, each listed in vocabulary-id order.
///
/// Head strata take the most frequent candidates; the others shuffle the
/// candidates with the plan seed and cut consecutive blocks. A stratum too
/// small for the plan yields fewer samples, or a single shorter one, with a
/// warning.
pub fn sample_strata(vocab: &Vocabulary, plan: &SamplePlan) -> Result<Vec<Vec<String>>> {
    if plan.n_samples == 0 || plan.sample_size == 0 {
        return Err(DsmError::Config("sample count and size must be positive".into()));
    }
    let mut cand = candidates(vocab, plan)?;
    let head = matches!(plan.stratum, Stratum::FreqHigh | Stratum::PosHigh(_));
    if !head {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        cand.shuffle(&mut rng);
    }
    let wanted = plan.n_samples * plan.sample_size;
    let mut blocks: Vec<Vec<u32>> = if cand.len() >= wanted {
        cand.chunks(plan.sample_size).take(plan.n_samples).map(<[u32]>::to_vec).collect()
    } else {
        let full = cand.len() / plan.sample_size;
        log::warn!(
            "stratum {} has {} words, fewer than the {wanted} requested",
            plan.stratum,
            cand.len()
        );
        if full > 0 {
            cand.chunks(plan.sample_size).take(full).map(<[u32]>::to_vec).collect()
        } else {
            vec![cand]
        }
    };
    blocks.retain(|b| !b.is_empty());
    Ok(blocks
        .into_iter()
        .map(|mut b| {
            b.sort_unstable();
            b.into_iter().map(|i| vocab.word(i).to_string()).collect()
        })
        .collect())
}

/// One sample's correlation between two spaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsaRecord {
    pub sample: usize,
    pub space_a: String,
    pub space_b: String,
    pub n_words: usize,
    pub rho: f64,
}

/// Summary of a space pair over all samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsaSummary {
    pub space_a: String,
    pub space_b: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsaReport {
    pub spaces: Vec<String>,
    pub records: Vec<RsaRecord>,
    pub summaries: Vec<RsaSummary>,
    /// Mean ρ, row-major `spaces × spaces`, unit diagonal.
    pub mean_matrix: Vec<f64>,
}

impl RsaReport {
    /// Mean ρ matrix as CSV with a header row of space ids.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.spaces.len();
        writeln!(w, "space,{}", self.spaces.join(","))?;
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.6}", self.mean_matrix[i * n + j])).collect();
            writeln!(w, "{},{}", self.spaces[i], row.join(","))?;
        }
        Ok(())
    }

    /// Per-sample records as JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Mean, median and sd over every between-space record (`a ≠ b`).
    pub fn overall(&self) -> Option<(f64, f64, f64)> {
        let rhos: Vec<f64> = self.summaries.iter().map(|s| s.mean).collect();
        (!rhos.is_empty()).then(|| (mean(&rhos), median(&rhos), std_dev(&rhos)))
    }
}

/// Correlates every pair of spaces on every sample. Each sample's word list
/// is first reduced to the words covered by all spaces.
pub fn rsa_report(spaces: &[&EmbeddingSpace], samples: &[Vec<String>]) -> Result<RsaReport> {
    if spaces.len() < 2 {
        return Err(DsmError::InsufficientData {
            needed: 2,
            found: spaces.len(),
        });
    }
    let n = spaces.len();
    let mut records = Vec::new();
    for (k, sample) in samples.iter().enumerate() {
        let words = align_wordlist(spaces, sample);
        if words.len() < sample.len() {
            log::warn!("sample {k}: {} of {} words shared by all spaces", words.len(), sample.len());
        }
        let ranks: Vec<Vec<f64>> = spaces
            .iter()
            .map(|s| build_rsm(s, &words).map(|r| average_ranks(&r.upper)))
            .collect::<Result<_>>()?;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let rhos: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| pearson(&ranks[i], &ranks[j]))
            .collect::<Result<_>>()?;
        for (&(i, j), rho) in pairs.iter().zip(rhos) {
            records.push(RsaRecord {
                sample: k,
                space_a: spaces[i].meta.model_id.clone(),
                space_b: spaces[j].meta.model_id.clone(),
                n_words: words.len(),
                rho,
            });
        }
    }
    let mut summaries = Vec::new();
    let mut mean_matrix = vec![0.0; n * n];
    for i in 0..n {
        mean_matrix[i * n + i] = 1.0;
    }
    let per_sample = n * (n - 1) / 2;
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let rhos: Vec<f64> = records.iter().skip(p).step_by(per_sample).map(|r| r.rho).collect();
            p += 1;
            let m = if rhos.is_empty() { f64::NAN } else { mean(&rhos) };
            mean_matrix[i * n + j] = m;
            mean_matrix[j * n + i] = m;
            summaries.push(RsaSummary {
                space_a: spaces[i].meta.model_id.clone(),
                space_b: spaces[j].meta.model_id.clone(),
                mean: m,
                median: if rhos.is_empty() { f64::NAN } else { median(&rhos) },
                sd: std_dev(&rhos),
                n_samples: rhos.len(),
            });
        }
    }
    Ok(RsaReport {
        spaces: spaces.iter().map(|s| s.meta.model_id.clone()).collect(),
        records,
        summaries,
        mean_matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecspace::SpaceMeta;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stratum_names_round_trip() {
        for s in [
            Stratum::Global,
            Stratum::FreqHigh,
            Stratum::FreqMid,
            Stratum::FreqLow,
            Stratum::PosHigh(PosTag::Noun),
            Stratum::PosMid(PosTag::Adjective),
        ] {
            assert_eq!(s.to_string().parse::<Stratum>().unwrap(), s);
        }
        assert!("pos_high_adverb".parse::<Stratum>().is_err());
    }

    #[test]
    fn basis_vectors_give_identity() {
        let s = EmbeddingSpace::from_rows(
            vec![("a", vec![1.0, 0.0, 0.0]), ("b", vec![0.0, 1.0, 0.0]), ("c", vec![0.0, 0.0, 1.0])],
            SpaceMeta::new("x"),
        )
        .unwrap();
        let r = build_rsm(&s, &words(&["a", "b", "c"])).unwrap();
        assert_eq!(r.to_dense(), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn upper_index_is_row_major() {
        let n = 5;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(upper_index(n, i, j), k);
                k += 1;
            }
        }
    }

    #[test]
    fn mismatched_lists_are_rejected() {
        let a = Rsm::from_upper("a", words(&["x", "y", "z"]), vec![0.1, 0.2, 0.3]).unwrap();
        let b = Rsm::from_upper("b", words(&["x", "z", "y"]), vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(rsa_correlate(&a, &b), Err(DsmError::Alignment(_))));
        assert_eq!(rsa_correlate(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.bin");
        let a = Rsm::from_upper("sp", words(&["x", "y", "z"]), vec![0.1, -0.2, 0.3]).unwrap();
        a.save(&p).unwrap();
        assert_eq!(Rsm::load(&p).unwrap(), a);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 24);
    }
}
