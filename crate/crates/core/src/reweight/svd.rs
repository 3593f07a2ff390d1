//! Randomized truncated SVD over a sparse matrix.
//!
//! Range finder with Gaussian test vectors, `q` power iterations with
//! re-orthonormalization after every product, then an exact SVD of the small
//! projected matrix. The sparse operand is only touched through products
//! with dense panels, so it is never materialized.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::WeightedMatrix;
use crate::error::{DsmError, Result};
use crate::sparse::CsrMatrix;
use crate::vecspace::{EmbeddingSpace, SpaceMeta};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvdOptions {
    pub oversampling: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversampling: 10,
            power_iterations: 4,
            seed: 0,
        }
    }
}

/// Rank-`d` factors `A ≈ U diag(s) Vᵀ`, both factor matrices row-major.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub n_rows: usize,
    pub n_cols: usize,
    pub rank: usize,
    /// `n_rows × rank`
    pub u: Vec<f64>,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// `n_cols × rank`
    pub v: Vec<f64>,
}

impl SvdResult {
    /// Dense row-major `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let k = self.rank;
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                out[r * self.n_cols + c] = (0..k)
                    .map(|j| self.u[r * k + j] * self.singular_values[j] * self.v[c * k + j])
                    .sum();
            }
        }
        out
    }
}

fn gaussian_panel(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Orthonormal basis (Householder QR) of a row-major `rows × cols` panel
/// with `cols ≤ rows`.
fn orthonormalize(panel: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let q = DMatrix::from_row_slice(rows, cols, panel).qr().q();
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = q[(r, c)];
        }
    }
    out
}

/// Randomized SVD of `a` truncated to `d` components.
///
/// Deterministic given `opts.seed`. Each left singular vector's
/// largest-magnitude entry is made positive (the matching right vector is
/// flipped with it).
pub fn randomized_svd(a: &CsrMatrix, d: usize, opts: SvdOptions) -> Result<SvdResult> {
    let (m, n) = (a.n_rows(), a.n_cols());
    let max_rank = m.min(n);
    if d < 1 || d > max_rank {
        return Err(DsmError::Config(format!(
            "SVD rank {d} must lie in 1..={max_rank} for a {m}×{n} matrix"
        )));
    }
    let l = (d + opts.oversampling).min(max_rank);
    let at = a.transpose();

    let omega = gaussian_panel(n, l, opts.seed);
    let mut q = orthonormalize(&a.mul_panel(&omega, l), m, l);
    for _ in 0..opts.power_iterations {
        let z = orthonormalize(&at.mul_panel(&q, l), n, l);
        q = orthonormalize(&a.mul_panel(&z, l), m, l);
    }

    // Bᵀ = Aᵀ Q is n × l; its SVD W Σ Zᵀ gives B = Z Σ Wᵀ.
    let bt = DMatrix::from_row_slice(n, l, &at.mul_panel(&q, l));
    let svd = bt.svd(true, true);
    let w = svd.u.expect("requested U");
    let z_t = svd.v_t.expect("requested Vᵀ");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    order.truncate(d);

    let mut u = vec![0.0; m * d];
    let mut v = vec![0.0; n * d];
    let mut singular_values = Vec::with_capacity(d);
    for (out_col, &k) in order.iter().enumerate() {
        singular_values.push(sv[k]);
        // U[:, k] = Q · Z[:, k], with Z[:, k] = row k of Zᵀ
        let mut col = vec![0.0; m];
        for (r, slot) in col.iter_mut().enumerate() {
            *slot = (0..l).map(|j| q[r * l + j] * z_t[(k, j)]).sum();
        }
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            u[r * d + out_col] = sign * col[r];
        }
        for c in 0..n {
            v[c * d + out_col] = sign * w[(c, k)];
        }
    }
    let top = singular_values[0];
    if let Some(&last) = singular_values.last() {
        if top == 0.0 || last <= top * 1e-12 {
            log::warn!(
                "requested rank {d} exceeds the numerical rank; trailing components are arbitrary"
            );
        }
    }
    Ok(SvdResult {
        n_rows: m,
        n_cols: n,
        rank: d,
        u,
        singular_values,
        v,
    })
}

/// Embeddings from the rows of `U`; the singular values are discarded from
/// the vectors and kept in the metadata.
pub fn truncated_svd(m: &WeightedMatrix, d: usize, seed: u64) -> Result<EmbeddingSpace> {
    let opts = SvdOptions {
        seed,
        ..SvdOptions::default()
    };
    let svd = randomized_svd(m.values(), d, opts)?;
    let mut meta = SpaceMeta::new(format!("SVD.{}", d));
    meta.context = Some(m.kind.to_string());
    meta.provenance.insert("weighting".into(), m.scheme.to_string());
    if let Some(a) = m.alpha {
        meta.provenance.insert("alpha".into(), a.to_string());
    }
    meta.provenance.insert(
        "svd".into(),
        format!(
            "randomized range finder, oversampling={} power_iterations={} seed={}",
            opts.oversampling, opts.power_iterations, seed
        ),
    );
    meta.provenance.insert("singular_vectors".into(), "U rows, singular values discarded".into());
    for (k, v) in &m.notes {
        meta.provenance.insert(k.clone(), v.clone());
    }
    meta.singular_values = Some(svd.singular_values.clone());
    EmbeddingSpace::new(m.targets().to_vec(), d, svd.u, meta)
}
