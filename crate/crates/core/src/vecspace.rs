//! Dense embedding spaces: storage, cosine queries, word2vec text I/O and
//! pooling of contextual token vectors into type vectors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{DsmError, Result};

/// Descriptive metadata carried alongside the vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceMeta {
    /// `<MODEL>.<context>.<dim>`, e.g. `SVD.w2.300`.
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_values: Option<Vec<f64>>,
}

impl SpaceMeta {
    pub fn new(model_id: impl Into<String>) -> Self {
        SpaceMeta {
            model_id: model_id.into(),
            ..SpaceMeta::default()
        }
    }
}

/// One hit of a nearest-neighbour query.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// `|V| × dim` row-major vectors with cached norms.
///
/// All-zero rows are allowed; they never appear as neighbours and any
/// similarity involving them is undefined.
#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    words: Vec<String>,
    index: FxHashMap<String, u32>,
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
    pub meta: SpaceMeta,
}

impl EmbeddingSpace {
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f64>, meta: SpaceMeta) -> Result<Self> {
        if dim == 0 {
            return Err(DsmError::Format("embedding dimension must be positive".into()));
        }
        if data.len() != words.len() * dim {
            return Err(DsmError::DimensionMismatch {
                expected: words.len() * dim,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(DsmError::Format(format!(
                "non-finite entry in the vector of `{}`",
                words[k / dim]
            )));
        }
        let mut index = FxHashMap::default();
        index.reserve(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(DsmError::Format(format!("duplicate word `{w}`")));
            }
        }
        let norms: Vec<f64> = data.chunks(dim).map(norm).collect();
        let zeros = norms.iter().filter(|&&n| n == 0.0).count();
        if zeros > 0 {
            log::warn!("{zeros} all-zero vectors in space `{}`", meta.model_id);
        }
        Ok(EmbeddingSpace {
            words,
            index,
            dim,
            data,
            norms,
            meta,
        })
    }

    /// Builds from `(word, vector)` rows.
    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<f64>)>, meta: SpaceMeta) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut words = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (w, v) in rows {
            let w = w.into();
            if v.len() != dim {
                return Err(DsmError::Format(format!(
                    "vector of `{w}` has {} entries, expected {dim}",
                    v.len()
                )));
            }
            words.push(w);
            data.extend(v);
        }
        Self::new(words, dim, data, meta)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| i as usize)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.id(word).map(|i| self.vector(i))
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// Row-major backing store.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Present with a nonzero vector.
    pub fn covers(&self, word: &str) -> bool {
        self.id(word).is_some_and(|i| self.norms[i] > 0.0)
    }

    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.norms[i] == 0.0).collect()
    }

    /// Cosine between two stored rows; `None` if either is all-zero.
    pub fn cosine_ids(&self, i: usize, j: usize) -> Option<f64> {
        let (ni, nj) = (self.norms[i], self.norms[j]);
        if ni == 0.0 || nj == 0.0 {
            return None;
        }
        Some((dot(self.vector(i), self.vector(j)) / (ni * nj)).clamp(-1.0, 1.0))
    }

    pub fn cosine_words(&self, a: &str, b: &str) -> Option<f64> {
        self.cosine_ids(self.id(a)?, self.id(b)?)
    }

    /// Exact top-`k` rows by cosine to `query`, skipping zero rows and the
    /// excluded words. Ties are ordered lexicographically by word.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: &[&str]) -> Result<Vec<Neighbor>> {
        if query.len() != self.dim {
            return Err(DsmError::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(DsmError::ZeroVector);
        }
        let excluded: FxHashSet<usize> = exclude.iter().filter_map(|w| self.id(w)).collect();
        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .into_par_iter()
            .filter(|i| self.norms[*i] > 0.0 && !excluded.contains(i))
            .map(|i| ((dot(query, self.vector(i)) / (qn * self.norms[i])).clamp(-1.0, 1.0), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.total_cmp(&a.0).then_with(|| self.words[a.1].cmp(&self.words[b.1]))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (score, i))| Neighbor {
                word: self.words[i].clone(),
                score,
                rank: r + 1,
            })
            .collect())
    }

    /// Neighbours of a stored word, excluding the word itself.
    pub fn nearest_to_word(&self, word: &str, k: usize) -> Result<Vec<Neighbor>> {
        let i = self
            .id(word)
            .ok_or_else(|| DsmError::NoCoverage(format!("word `{word}`")))?;
        self.nearest(self.vector(i), k, &[word])
    }

    /// Applies `f` to every vector; `f` must preserve the dimension.
    pub fn map_vectors(&self, mut f: impl FnMut(&str, &[f64]) -> Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        let mut dim = None;
        for (i, w) in self.words.iter().enumerate() {
            let v = f(w, self.vector(i));
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(DsmError::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            data.extend(v);
        }
        Self::new(self.words.clone(), dim.unwrap_or(self.dim), data, self.meta.clone())
    }

    /// Number of words whose vector exactly equals an earlier word's vector.
    pub fn duplicate_vectors(&self) -> usize {
        let mut seen: FxHashSet<Vec<u64>> = FxHashSet::default();
        (0..self.len())
            .filter(|&i| {
                let key: Vec<u64> = self.vector(i).iter().map(|v| (v + 0.0).to_bits()).collect();
                !seen.insert(key)
            })
            .count()
    }

    /// word2vec text format: `<V> <dim>` then `word v1 … vdim`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            for &v in self.vector(i) {
                w.write_all(b" ")?;
                w.write_all(format_sig9(v).as_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the vectors plus a `<path>.meta.json` sidecar.
    pub fn export_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()?;
        let meta = BufWriter::new(File::create(meta_path(path))?);
        serde_json::to_writer_pretty(meta, &self.meta)?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, source_name: &str, meta: SpaceMeta) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (n, dim) = loop {
            let Some((ln, line)) = lines.next() else {
                return Err(DsmError::parse(source_name, 1, "missing `<count> <dim>` header"));
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parsed = (
                parts.next().and_then(|s| s.parse::<usize>().ok()),
                parts.next().and_then(|s| s.parse::<usize>().ok()),
            );
            match (parsed, parts.next()) {
                ((Some(n), Some(d)), None) if d > 0 => break (n, d),
                _ => return Err(DsmError::parse(source_name, ln + 1, "malformed header")),
            }
        };
        let mut words = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        let mut seen = FxHashSet::default();
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default();
            let before = data.len();
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|_| DsmError::parse(source_name, ln + 1, format!("bad float `{p}`")))?;
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(DsmError::parse(
                    source_name,
                    ln + 1,
                    format!("`{word}` has {} values, header says {dim}", data.len() - before),
                ));
            }
            if !seen.insert(word.to_string()) {
                return Err(DsmError::parse(source_name, ln + 1, format!("duplicate word `{word}`")));
            }
            words.push(word.to_string());
        }
        if words.len() != n {
            return Err(DsmError::Format(format!(
                "{source_name}: header announces {n} vectors, found {}",
                words.len()
            )));
        }
        Self::new(words, dim, data, meta)
    }

    /// Reads word2vec text; the metadata sidecar is used when present,
    /// otherwise the model id is the file stem.
    pub fn import_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mp = meta_path(path);
        let meta = if mp.exists() {
            serde_json::from_reader(BufReader::new(File::open(&mp)?))?
        } else {
            SpaceMeta::new(
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            )
        };
        let reader = BufReader::new(File::open(path)?);
        Self::read_text(reader, &path.display().to_string(), meta)
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[inline]
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `u·v / (‖u‖‖v‖)`; a zero vector makes it undefined.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(DsmError::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(DsmError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Shortest `%g`-style rendering with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// One contextual token vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenRecord {
    pub word: String,
    pub occurrence: u64,
    pub vector: Vec<f64>,
}

/// Externally produced token vectors, `word<TAB>occ<TAB>v1,…,vd` per line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TokenVectorFile {
    pub dim: usize,
    pub records: Vec<TokenRecord>,
}

impl TokenVectorFile {
    pub fn new(records: Vec<TokenRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.vector.len());
        for r in &records {
            if r.vector.len() != dim {
                return Err(DsmError::Format(format!(
                    "token vector for `{}` has {} entries, expected {dim}",
                    r.word,
                    r.vector.len()
                )));
            }
        }
        Ok(TokenVectorFile { dim, records })
    }

    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| DsmError::parse(source_name, ln + 1, m);
            let mut cols = line.split('\t');
            let (Some(word), Some(occ), Some(vec), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(err("expected `word<TAB>occ<TAB>v1,…,vd`".into()));
            };
            let occurrence = occ
                .trim()
                .parse()
                .map_err(|_| err(format!("bad occurrence id `{occ}`")))?;
            let vector = vec
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| err(format!("bad float `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = records.first() {
                let first: &TokenRecord = first;
                if first.vector.len() != vector.len() {
                    return Err(err(format!(
                        "{} values, earlier records have {}",
                        vector.len(),
                        first.vector.len()
                    )));
                }
            }
            records.push(TokenRecord {
                word: word.to_string(),
                occurrence,
                vector,
            });
        }
        Self::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read(BufReader::new(File::open(path)?), &path.display().to_string())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            let vals: Vec<String> = r.vector.iter().map(|&v| format_sig9(v)).collect();
            writeln!(w, "{}\t{}\t{}", r.word, r.occurrence, vals.join(","))?;
        }
        Ok(())
    }
}

/// Type vectors as the mean of each word's token vectors. Words are ordered
/// lexicographically; all-zero means are kept and counted in the metadata.
pub fn pool_tokens(tv: &TokenVectorFile) -> Result<EmbeddingSpace> {
    if tv.records.is_empty() {
        return Err(DsmError::Format("no token vectors to pool".into()));
    }
    let mut sums: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for r in &tv.records {
        if r.vector.len() != tv.dim {
            return Err(DsmError::DimensionMismatch {
                expected: tv.dim,
                found: r.vector.len(),
            });
        }
        let entry = sums.entry(&r.word).or_insert_with(|| (vec![0.0; tv.dim], 0));
        for (s, v) in entry.0.iter_mut().zip(&r.vector) {
            *s += v;
        }
        entry.1 += 1;
    }
    let mut words = Vec::with_capacity(sums.len());
    let mut data = Vec::with_capacity(sums.len() * tv.dim);
    let mut zero = 0usize;
    for (w, (sum, n)) in sums {
        words.push(w.to_string());
        let before = data.len();
        data.extend(sum.iter().map(|s| s / n as f64));
        if data[before..].iter().all(|&v| v == 0.0) {
            zero += 1;
        }
    }
    let mut meta = SpaceMeta::new("POOLED");
    meta.provenance.insert("pooling".into(), "mean of token vectors".into());
    meta.provenance.insert("zero_vectors".into(), zero.to_string());
    EmbeddingSpace::new(words, tv.dim, data, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> EmbeddingSpace {
        EmbeddingSpace::from_rows(
            vec![
                ("a", vec![1.0, 0.0]),
                ("b", vec![0.9, 0.1]),
                ("c", vec![0.0, 1.0]),
                ("z", vec![0.0, 0.0]),
            ],
            SpaceMeta::new("toy"),
        )
        .unwrap()
    }

    #[test]
    fn cosine_basics() {
        assert_relative_eq!(cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.8);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(DsmError::ZeroVector)));
    }

    #[test]
    fn nearest_skips_self_and_zero_rows() {
        let s = toy();
        let hits = s.nearest_to_word("a", 10).unwrap();
        let words: Vec<_> = hits.iter().map(|h| h.word.as_str()).collect();
        assert_eq!(words, vec!["b", "c"]);
        assert_eq!(hits[0].rank, 1);
        assert!(s.nearest(&[1.0, 0.0], 3, &["a", "b", "c", "z"]).unwrap().is_empty());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-0.125), "-0.125");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(2.5e12), "2.5e12");
    }

    #[test]
    fn text_round_trip_and_errors() {
        let s = toy();
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        let back = EmbeddingSpace::read_text(&buf[..], "mem", SpaceMeta::new("toy")).unwrap();
        assert_eq!(back.words(), s.words());
        assert_eq!(back.data(), s.data());

        let short = "2 3\na 1 2 3\n";
        assert!(EmbeddingSpace::read_text(short.as_bytes(), "m", SpaceMeta::default()).is_err());
        let wide = "2 3\na 1 2 3 4\nb 1 2 3 4\n";
        assert!(EmbeddingSpace::read_text(wide.as_bytes(), "m", SpaceMeta::default()).is_err());
        let dup = "2 1\na 1\na 2\n";
        assert!(EmbeddingSpace::read_text(dup.as_bytes(), "m", SpaceMeta::default()).is_err());
    }

    #[test]
    fn pooling_means() {
        let tv = TokenVectorFile::read(
            "w\t0\t1,0\nw\t1\t0,1\nw\t2\t2,2\nx\t0\t1,-1\nx\t1\t-1,1\n".as_bytes(),
            "mem",
        )
        .unwrap();
        let s = pool_tokens(&tv).unwrap();
        assert_eq!(s.get("w").unwrap(), &[1.0, 1.0]);
        assert_eq!(s.get("x").unwrap(), &[0.0, 0.0]);
        assert_eq!(s.meta.provenance["zero_vectors"], "1");
        assert!(TokenVectorFile::read("w\t0\t1,0\nw\t1\t1\n".as_bytes(), "m").is_err());
    }

    #[test]
    fn duplicates_are_counted() {
        let s = EmbeddingSpace::from_rows(
            vec![("a", vec![1.0]), ("b", vec![1.0]), ("c", vec![2.0]), ("d", vec![1.0])],
            SpaceMeta::default(),
        )
        .unwrap();
        assert_eq!(s.duplicate_vectors(), 2);
    }
}
