//! Non-negative matrix factorization by multiplicative updates.
//!
//! `X (m x n) ~ W (m x k) H (k x n)`, minimizing the squared Frobenius
//! reconstruction error. Updates keep every iterate non-negative and the
//! objective non-increasing; encoding against a fixed basis runs the
//! H update alone, which is a convex problem per column.

use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 4] = b"ABNM";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Denominator stabilizer.
    pub epsilon: f64,
}

impl NmfConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        NmfConfig {
            rank,
            max_iter: 500,
            rel_tol: 1e-6,
            seed,
            epsilon: 1e-12,
        }
    }
}

/// Fit metadata alongside the basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NmfFitInfo {
    pub iterations: usize,
    pub final_objective: f64,
    /// Objective after initialization and after every iteration.
    pub objective_history: Vec<f64>,
    /// Iterations at which a dead basis column was re-seeded.
    pub reseeded_at: Vec<usize>,
}

/// A fitted basis.
#[derive(Debug, Clone)]
pub struct NmfModel {
    w: Array2<f64>,
    pub config: NmfConfig,
    pub info: NmfFitInfo,
}

impl NmfModel {
    /// Model around an externally supplied non-negative basis.
    pub fn from_basis(w: Array2<f64>, config: NmfConfig) -> Result<Self> {
        validate_non_negative(&w.view())?;
        Ok(NmfModel {
            w,
            config,
            info: NmfFitInfo {
                iterations: 0,
                final_objective: f64::NAN,
                objective_history: Vec::new(),
                reseeded_at: Vec::new(),
            },
        })
    }

    /// The m x k basis matrix.
    pub fn basis(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn feature_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }
}

fn validate_non_negative(x: &ArrayView2<f64>) -> Result<()> {
    for ((i, j), &v) in x.indexed_iter() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidMatrixEntry(i, j));
        }
    }
    Ok(())
}

fn objective(x: &ArrayView2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let r = x - &w.dot(h);
    r.iter().map(|v| v * v).sum()
}

fn uniform_open(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    // Uniform over (0, 1]: strictly positive so multiplicative updates can
    // move every entry.
    Array2::from_shape_fn((rows, cols), |_| 1.0 - rng.random::<f64>())
}

/// One multiplicative H update: `H <- H .* (W^T X) ./ (W^T W H + eps)`.
fn update_h(x: &ArrayView2<f64>, w: &Array2<f64>, h: &mut Array2<f64>, eps: f64) {
    let wt = w.t();
    let numer = wt.dot(x);
    let denom = wt.dot(w).dot(h);
    ndarray::Zip::from(h)
        .and(&numer)
        .and(&denom)
        .for_each(|hv, &n, &d| *hv *= n / (d + eps));
}

/// One multiplicative W update: `W <- W .* (X H^T) ./ (W H H^T + eps)`.
fn update_w(x: &ArrayView2<f64>, w: &mut Array2<f64>, h: &Array2<f64>, eps: f64) {
    let ht = h.t();
    let numer = x.dot(&ht);
    let denom = w.dot(&h.dot(&ht));
    ndarray::Zip::from(w)
        .and(&numer)
        .and(&denom)
        .for_each(|wv, &n, &d| *wv *= n / (d + eps));
}

/// Re-seed basis columns that collapsed to zero from the residual's largest
/// column. Returns whether anything was re-seeded.
fn reseed_dead_columns(
    x: &ArrayView2<f64>,
    w: &mut Array2<f64>,
    h: &mut Array2<f64>,
    log: &mut Vec<usize>,
    iteration: usize,
) -> bool {
    let dead: Vec<usize> = (0..w.ncols())
        .filter(|&c| w.column(c).sum() < 1e-300)
        .collect();
    if dead.is_empty() {
        return false;
    }
    let residual = x - &w.dot(&*h);
    let mut best_col = 0;
    let mut best_norm = -1.0;
    for (j, col) in residual.axis_iter(Axis(1)).enumerate() {
        let n: f64 = col.iter().map(|v| v * v).sum();
        if n > best_norm {
            best_norm = n;
            best_col = j;
        }
    }
    for c in dead {
        for (i, wv) in w.column_mut(c).iter_mut().enumerate() {
            *wv = residual[[i, best_col]].max(0.0) + 1e-6;
        }
        for hv in h.row_mut(c).iter_mut() {
            *hv = 1e-6;
        }
        log.push(iteration);
    }
    true
}

/// Factor a non-negative matrix. Returns the model (basis W plus fit
/// metadata) and the code matrix H (k x n).
pub fn nmf_fit(x: ArrayView2<f64>, cfg: &NmfConfig) -> Result<(NmfModel, Array2<f64>)> {
    if cfg.rank == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidConfig(
            "nmf rank and max_iter must be >= 1".into(),
        ));
    }
    if x.ncols() == 0 || x.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    validate_non_negative(&x)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = uniform_open(&mut rng, x.nrows(), cfg.rank);
    let mut h = uniform_open(&mut rng, cfg.rank, x.ncols());

    let mut history = vec![objective(&x, &w, &h)];
    let mut reseeded_at = Vec::new();
    let mut iterations = 0;
    for iter in 0..cfg.max_iter {
        update_h(&x, &w, &mut h, cfg.epsilon);
        update_w(&x, &mut w, &h, cfg.epsilon);
        let reseeded = reseed_dead_columns(&x, &mut w, &mut h, &mut reseeded_at, iter);

        let j = objective(&x, &w, &h);
        let j_prev = *history.last().unwrap();
        // Multiplicative updates never increase the objective; a re-seed is
        // the one deliberate exception. The relative term covers f64
        // evaluation noise of J itself at large scales.
        if !reseeded {
            assert!(
                j <= j_prev + 1e-10 + 1e-12 * j_prev.abs(),
                "objective increased: {j_prev} -> {j}"
            );
        }
        history.push(j);
        iterations = iter + 1;
        if j_prev > 0.0 && (j_prev - j).abs() / j_prev.max(f64::MIN_POSITIVE) < cfg.rel_tol {
            break;
        }
        if j == 0.0 {
            break;
        }
    }

    debug_assert!(w.iter().all(|&v| v >= 0.0));
    debug_assert!(h.iter().all(|&v| v >= 0.0));
    let final_objective = *history.last().unwrap();
    Ok((
        NmfModel {
            w,
            config: *cfg,
            info: NmfFitInfo {
                iterations,
                final_objective,
                objective_history: history,
                reseeded_at,
            },
        },
        h,
    ))
}

/// Encode new feature columns against a fixed basis: H updates only, from a
/// seeded positive initialization. `x_new` is m x n.
pub fn nmf_encode(
    x_new: ArrayView2<f64>,
    model: &NmfModel,
    cfg: &NmfConfig,
) -> Result<Array2<f64>> {
    if x_new.nrows() != model.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim(),
            got: x_new.nrows(),
        });
    }
    validate_non_negative(&x_new)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x95b5_29f2_c0de_c0de);
    let mut h = uniform_open(&mut rng, model.rank(), x_new.ncols());
    let mut prev = objective(&x_new, &model.w, &h);
    for _ in 0..cfg.max_iter {
        update_h(&x_new, &model.w, &mut h, cfg.epsilon);
        let j = objective(&x_new, &model.w, &h);
        let done = (prev > 0.0 && (prev - j).abs() / prev.max(f64::MIN_POSITIVE) < cfg.rel_tol)
            || j == 0.0;
        prev = j;
        if done {
            break;
        }
    }
    Ok(h)
}

/// Encode a single m-vector to its k-dim codes.
pub fn nmf_encode_one(x_new: &[f64], model: &NmfModel, cfg: &NmfConfig) -> Result<Vec<f64>> {
    let col = ArrayView2::from_shape((x_new.len(), 1), x_new)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let h = nmf_encode(col, model, cfg)?;
    Ok(h.column(0).to_vec())
}

impl NmfModel {
    /// Binary basis dump (magic, m, k, W row-major f64 LE) plus a JSON
    /// sidecar with config and fit metadata.
    pub fn save(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let prefix = prefix.as_ref();
        let bin_path = prefix.with_extension("abnm");
        let mut buf = Vec::new();
        buf.extend_from_slice(BINARY_MAGIC);
        buf.extend_from_slice(&(self.feature_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.rank() as u32).to_le_bytes());
        for v in self.w.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&bin_path, buf).map_err(|e| Error::io(&bin_path, e))?;

        #[derive(Serialize)]
        struct Sidecar<'a> {
            config: &'a NmfConfig,
            info: &'a NmfFitInfo,
        }
        let json_path = prefix.with_extension("json");
        let json = serde_json::to_string_pretty(&Sidecar {
            config: &self.config,
            info: &self.info,
        })
        .map_err(|e| Error::bad_format(&json_path, e.to_string()))?;
        std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        Ok(())
    }

    pub fn load(prefix: impl AsRef<Path>) -> Result<Self> {
        let prefix = prefix.as_ref();
        let bin_path = prefix.with_extension("abnm");
        let bytes = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let mut r = bytes.as_slice();
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|e| Error::io(&bin_path, e))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::bad_format(&bin_path, "bad nmf magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|e| Error::io(&bin_path, e))?;
        let m = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(|e| Error::io(&bin_path, e))?;
        let k = u32::from_le_bytes(b4) as usize;
        let mut data = vec![0.0f64; m * k];
        let mut b8 = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut b8).map_err(|e| Error::io(&bin_path, e))?;
            *v = f64::from_le_bytes(b8);
        }
        let w = Array2::from_shape_vec((m, k), data)
            .map_err(|e| Error::bad_format(&bin_path, e.to_string()))?;

        #[derive(Deserialize)]
        struct Sidecar {
            config: NmfConfig,
            info: NmfFitInfo,
        }
        let json_path = prefix.with_extension("json");
        let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::bad_format(&json_path, e.to_string()))?;
        Ok(NmfModel {
            w,
            config: sidecar.config,
            info: sidecar.info,
        })
    }
}
