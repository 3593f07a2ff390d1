//! Random Indexing: each context word owns a fixed sparse ternary index
//! vector, and a target's embedding is the running sum of the index vectors
//! of its window neighbours.
//!
//! The permutation variant rotates a neighbour's index vector by one fixed
//! random permutation when it sits to the left of the target and by the
//! inverse permutation when it sits to the right, so the two sides land in
//! decorrelated directions.

use std::borrow::Borrow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentence, Vocabulary};
use crate::error::{DsmError, Result};
use crate::hashing::mix3;
use crate::vecspace::{EmbeddingSpace, SpaceMeta};

pub const DEFAULT_DELTA: usize = 10;
pub const DEFAULT_THETA: f64 = 10_000.0;

/// Which side of the target a neighbour occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Sparse ternary index vectors for a whole vocabulary.
#[derive(Clone, Debug)]
pub struct IndexVectorSet {
    dim: usize,
    delta: usize,
    seed: u64,
    /// `delta` positions per word: the first half carry +1, the rest −1.
    positions: Vec<u32>,
    perm_left: Vec<u32>,
    perm_right: Vec<u32>,
}

impl IndexVectorSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.delta
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn perm_left(&self) -> &[u32] {
        &self.perm_left
    }

    pub fn perm_right(&self) -> &[u32] {
        &self.perm_right
    }

    /// Unpermuted `(position, sign)` pairs of a word's index vector.
    pub fn nonzeros(&self, word_id: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let half = self.delta / 2;
        let start = word_id as usize * self.delta;
        self.positions[start..start + self.delta]
            .iter()
            .enumerate()
            .map(move |(k, &p)| (p, if k < half { 1.0 } else { -1.0 }))
    }

    /// Dense index vector, optionally permuted for a side.
    pub fn dense(&self, word_id: u32, side: Option<Side>) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (p, s) in self.nonzeros(word_id) {
            v[self.permute(p, side) as usize] = s;
        }
        v
    }

    #[inline]
    fn permute(&self, p: u32, side: Option<Side>) -> u32 {
        match side {
            None => p,
            Some(Side::Left) => self.perm_left[p as usize],
            Some(Side::Right) => self.perm_right[p as usize],
        }
    }
}

/// Index vectors of dimension `k` with `delta` nonzeros each. A word's
/// vector depends only on `(seed, word id)`.
pub fn make_index_vectors(vocab: &Vocabulary, k: usize, delta: usize, seed: u64) -> Result<IndexVectorSet> {
    if delta < 2 || delta % 2 != 0 || delta > k {
        return Err(DsmError::Config(format!(
            "index vectors need an even number of nonzeros in 2..={k}, got {delta}"
        )));
    }
    let mut positions = Vec::with_capacity(vocab.len() * delta);
    for id in 0..vocab.len() as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix3(seed, id, 0));
        positions.extend(rand::seq::index::sample(&mut rng, k, delta).into_iter().map(|p| p as u32));
    }
    let mut perm_left: Vec<u32> = (0..k as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix3(seed, u64::MAX, 1));
    perm_left.shuffle(&mut rng);
    let mut perm_right = vec![0u32; k];
    for (i, &p) in perm_left.iter().enumerate() {
        perm_right[p as usize] = i as u32;
    }
    Ok(IndexVectorSet {
        dim: k,
        delta,
        seed,
        positions,
        perm_left,
        perm_right,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiConfig {
    pub window_radius: usize,
    pub permute: bool,
    pub dynamic_weighting: bool,
    /// Damping scale of the dynamic weight `exp(−seen(c)/θ)`.
    pub theta: f64,
}

impl Default for RiConfig {
    fn default() -> Self {
        RiConfig {
            window_radius: 2,
            permute: false,
            dynamic_weighting: false,
            theta: DEFAULT_THETA,
        }
    }
}

impl RiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius < 1 {
            return Err(DsmError::Config("window radius must be at least 1".into()));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(DsmError::Config(format!("theta must be positive, got {}", self.theta)));
        }
        Ok(())
    }

    /// `RI.w2.300` or `RI-perm.w2.300`.
    pub fn model_id(&self, dim: usize) -> String {
        let name = if self.permute { "RI-perm" } else { "RI" };
        format!("{name}.w{}.{dim}", self.window_radius)
    }
}

/// Accumulates Random Indexing vectors over a sentence stream.
///
/// Every in-vocabulary token adds the (possibly permuted) index vector of
/// each in-vocabulary neighbour within `window_radius` positions, scaled by
/// the dynamic weight when enabled. Out-of-vocabulary tokens still occupy
/// window positions. With dynamic weighting, `seen(c)` is the number of
/// occurrences of `c` visited so far as a target, including the current one.
pub fn train_ri<I, S>(stream: I, vocab: &Vocabulary, idx: &IndexVectorSet, cfg: RiConfig) -> Result<EmbeddingSpace>
where
    I: IntoIterator<Item = S>,
    S: Borrow<Sentence>,
{
    cfg.validate()?;
    if idx.len() != vocab.len() {
        return Err(DsmError::DimensionMismatch {
            expected: vocab.len(),
            found: idx.len(),
        });
    }
    let k = idx.dim;
    let mut data = vec![0.0f64; vocab.len() * k];
    let mut seen = vec![0u64; vocab.len()];
    let mut ids: Vec<Option<u32>> = Vec::new();
    for s in stream {
        let s = s.borrow();
        ids.clear();
        ids.extend(s.tokens.iter().map(|t| vocab.id(t)));
        let n = ids.len();
        for i in 0..n {
            let Some(t) = ids[i] else { continue };
            seen[t as usize] += 1;
            let row = &mut data[t as usize * k..(t as usize + 1) * k];
            let lo = i.saturating_sub(cfg.window_radius);
            let hi = (i + cfg.window_radius).min(n - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let Some(c) = ids[j] else { continue };
                let w = if cfg.dynamic_weighting {
                    (-(seen[c as usize] as f64) / cfg.theta).exp()
                } else {
                    1.0
                };
                let side = cfg.permute.then_some(if j < i { Side::Left } else { Side::Right });
                for (p, sign) in idx.nonzeros(c) {
                    row[idx.permute(p, side) as usize] += w * sign;
                }
            }
        }
    }
    let mut meta = SpaceMeta::new(cfg.model_id(k));
    meta.context = Some(format!("w{}", cfg.window_radius));
    let prov = &mut meta.provenance;
    prov.insert("delta".into(), idx.delta.to_string());
    prov.insert("seed".into(), idx.seed.to_string());
    prov.insert("window_radius".into(), cfg.window_radius.to_string());
    if cfg.permute {
        prov.insert(
            "permutation".into(),
            "one random permutation for left neighbours, its inverse for right neighbours (side only; reconstruction)"
                .into(),
        );
    }
    if cfg.dynamic_weighting {
        prov.insert(
            "weighting".into(),
            format!("w(c) = exp(-seen(c)/theta), theta = {} (reconstruction)", cfg.theta),
        );
    }
    EmbeddingSpace::new(vocab.words().to_vec(), k, data, meta)
}
