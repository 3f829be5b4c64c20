//! Soft-margin RBF SVMs trained by sequential minimal optimization.
//!
//! The default kernel is `K(x, y) = exp(-||x - y||^2 / (2 sigma^2))` with
//! sigma a length scale; the gamma form `exp(-gamma ||x - y||^2)` is
//! available for configurations tuned that way. Multiclass is one-vs-all
//! (N_c machines, argmax) or one-vs-one (all pairs, majority vote).

use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabeledSet;
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

const SV_BLOCK_MAGIC: &[u8; 4] = b"ABSV";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvmScheme {
    OneVsAll,
    OneVsOne,
}

/// How the width parameter parameterizes the RBF exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RbfForm {
    /// `exp(-d^2 / (2 width^2))`, width as a length scale.
    #[default]
    Sigma,
    /// `exp(-width * d^2)`, width as gamma.
    Gamma,
}

impl RbfForm {
    /// The multiplier applied to the squared distance in the exponent.
    fn exponent_factor(self, width: f64) -> f64 {
        match self {
            RbfForm::Sigma => -1.0 / (2.0 * width * width),
            RbfForm::Gamma => -width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    /// Kernel width: sigma under `RbfForm::Sigma`, gamma under
    /// `RbfForm::Gamma`.
    pub sigma: f64,
    pub form: RbfForm,
    pub scheme: SvmScheme,
    pub tol: f64,
    pub max_passes: usize,
}

impl SvmConfig {
    pub fn new(c: f64, sigma: f64, scheme: SvmScheme) -> Self {
        SvmConfig {
            c,
            sigma,
            form: RbfForm::Sigma,
            scheme,
            tol: 1e-3,
            max_passes: 10,
        }
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

fn rbf_kernel_factor(a: ArrayView1<f64>, b: &[f64], factor: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (factor * d2).exp()
}

/// Full RBF Gram matrix of the rows of `x` in the sigma form.
pub fn rbf_gram(x: ArrayView2<f64>, sigma: f64) -> Array2<f64> {
    rbf_gram_with(x, RbfForm::Sigma, sigma)
}

/// Full RBF Gram matrix with an explicit kernel form.
pub fn rbf_gram_with(x: ArrayView2<f64>, form: RbfForm, width: f64) -> Array2<f64> {
    let n = x.nrows();
    let inv = form.exponent_factor(width);
    let mut gram = Array2::zeros((n, n));
    for i in 0..n {
        gram[[i, i]] = 1.0;
        for j in 0..i {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let k = (inv * d2).exp();
            gram[[i, j]] = k;
            gram[[j, i]] = k;
        }
    }
    gram
}

/// Dual variables of one binary machine.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub sweeps: usize,
}

impl SmoSolution {
    fn decision(&self, gram: &ArrayView2<f64>, y: &[f64], i: usize) -> f64 {
        let mut f = self.bias;
        for (j, &a) in self.alphas.iter().enumerate() {
            if a > 0.0 {
                f += a * y[j] * gram[[j, i]];
            }
        }
        f
    }
}

/// Solve the soft-margin dual for labels in {-1, +1} over a precomputed
/// Gram matrix. The partner index starts at a seeded random position and
/// sweeps until a step makes progress, so a fixed seed gives a fixed
/// solution.
pub fn smo_solve(
    gram: ArrayView2<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_passes: usize,
    seed: u64,
) -> SmoSolution {
    let n = y.len();
    debug_assert_eq!(gram.nrows(), n);
    debug_assert!(y.iter().all(|&v| v == 1.0 || v == -1.0));

    let mut sol = SmoSolution {
        alphas: vec![0.0; n],
        bias: 0.0,
        sweeps: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = 0;
    // Hard cap so a pathological instance cannot loop forever.
    let sweep_cap = 200 * max_passes.max(1) + 1000;

    while passes < max_passes && sol.sweeps < sweep_cap {
        let mut changed = 0;
        for i in 0..n {
            let e_i = sol.decision(&gram, y, i) - y[i];
            let r_i = y[i] * e_i;
            let violates = (r_i < -tol && sol.alphas[i] < c) || (r_i > tol && sol.alphas[i] > 0.0);
            if !violates {
                continue;
            }
            let start = rng.random_range(0..n);
            for off in 0..n {
                let j = (start + off) % n;
                if j == i {
                    continue;
                }
                if try_step(&mut sol, &gram, y, c, i, j, e_i) {
                    changed += 1;
                    break;
                }
            }
        }
        sol.sweeps += 1;
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }
    sol
}

fn try_step(
    sol: &mut SmoSolution,
    gram: &ArrayView2<f64>,
    y: &[f64],
    c: f64,
    i: usize,
    j: usize,
    e_i: f64,
) -> bool {
    let e_j = sol.decision(gram, y, j) - y[j];
    let (a_i_old, a_j_old) = (sol.alphas[i], sol.alphas[j]);

    let (lo, hi) = if y[i] != y[j] {
        ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
    } else {
        ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
    };
    if lo >= hi {
        return false;
    }

    let eta = 2.0 * gram[[i, j]] - gram[[i, i]] - gram[[j, j]];
    if eta >= 0.0 {
        return false;
    }

    let mut a_j = a_j_old - y[j] * (e_i - e_j) / eta;
    a_j = a_j.clamp(lo, hi);
    if (a_j - a_j_old).abs() < 1e-5 {
        return false;
    }
    let a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j);

    let d_i = a_i - a_i_old;
    let d_j = a_j - a_j_old;
    let b1 = sol.bias - e_i - y[i] * d_i * gram[[i, i]] - y[j] * d_j * gram[[i, j]];
    let b2 = sol.bias - e_j - y[i] * d_i * gram[[i, j]] - y[j] * d_j * gram[[j, j]];
    sol.bias = if a_i > 0.0 && a_i < c {
        b1
    } else if a_j > 0.0 && a_j < c {
        b2
    } else {
        0.5 * (b1 + b2)
    };
    sol.alphas[i] = a_i;
    sol.alphas[j] = a_j;
    true
}

/// Largest KKT violation of a solution: 0 at an exact optimum, and at most
/// the SMO tolerance after a clean convergence.
pub fn max_kkt_violation(gram: ArrayView2<f64>, y: &[f64], sol: &SmoSolution, c: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        let margin = y[i] * sol.decision(&gram, y, i);
        let a = sol.alphas[i];
        let viol = if a <= 1e-9 {
            (1.0 - margin).max(0.0)
        } else if a >= c - 1e-9 {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(viol);
    }
    worst
}

/// One trained binary machine.
#[derive(Debug, Clone)]
struct BinaryMachine {
    positive: usize,
    /// `None` in one-vs-all (positive class against the rest).
    negative: Option<usize>,
    sv: Array2<f64>,
    /// `alpha_i * y_i` per support vector.
    coeff: Vec<f64>,
    bias: f64,
}

impl BinaryMachine {
    fn decision(&self, query: &[f64], exponent_factor: f64) -> f64 {
        let mut f = self.bias;
        for (row, &w) in self.sv.rows().into_iter().zip(&self.coeff) {
            f += w * rbf_kernel_factor(row, query, exponent_factor);
        }
        f
    }
}

/// Trained multiclass model.
#[derive(Debug, Clone)]
pub struct SvmModel {
    scheme: SvmScheme,
    sigma: f64,
    form: RbfForm,
    n_classes: usize,
    dim: usize,
    machines: Vec<BinaryMachine>,
}

impl SvmModel {
    pub fn scheme(&self) -> SvmScheme {
        self.scheme
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_machines(&self) -> usize {
        self.machines.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw decision values per machine, in machine order.
    pub fn decision_values(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let factor = self.form.exponent_factor(self.sigma);
        Ok(self
            .machines
            .iter()
            .map(|m| m.decision(query, factor))
            .collect())
    }
}

fn solve_machine(
    gram: &Array2<f64>,
    indices: &[usize],
    y: &[f64],
    cfg: &SvmConfig,
    seed: u64,
) -> (Vec<usize>, Vec<f64>, f64) {
    // Sub-Gram for the machine's subset.
    let m = indices.len();
    let sub = Array2::from_shape_fn((m, m), |(a, b)| gram[[indices[a], indices[b]]]);
    let sol = smo_solve(sub.view(), y, cfg.c, cfg.tol, cfg.max_passes, seed);
    let mut kept = Vec::new();
    let mut coeff = Vec::new();
    for (local, &a) in sol.alphas.iter().enumerate() {
        if a > 1e-9 {
            kept.push(indices[local]);
            coeff.push(a * y[local]);
        }
    }
    (kept, coeff, sol.bias)
}

/// Train the configured multiclass scheme. Machines are independent and
/// train in parallel; each machine's SMO stream is seeded separately, so
/// the result is deterministic for a fixed `(data, cfg, seed)`.
pub fn svm_train(train: &LabeledSet, cfg: &SvmConfig, seed: u64) -> Result<SvmModel> {
    train.require_all_classes()?;
    if train.n_classes() < 2 {
        return Err(Error::SingleClassTrainingSet);
    }
    if !(cfg.c > 0.0 && cfg.sigma > 0.0) {
        return Err(Error::InvalidConfig("svm C and sigma must be > 0".into()));
    }

    let gram = rbf_gram_with(train.features().view(), cfg.form, cfg.sigma);
    let n = train.len();
    let n_classes = train.n_classes();

    let jobs: Vec<(usize, Option<usize>)> = match cfg.scheme {
        SvmScheme::OneVsAll => (0..n_classes).map(|c| (c, None)).collect(),
        SvmScheme::OneVsOne => {
            let mut pairs = Vec::new();
            for a in 0..n_classes {
                for b in a + 1..n_classes {
                    pairs.push((a, b.into()));
                }
            }
            pairs
        }
    };

    let machines: Vec<BinaryMachine> = jobs
        .par_iter()
        .enumerate()
        .map(|(machine_idx, &(positive, negative))| {
            let (indices, y): (Vec<usize>, Vec<f64>) = match negative {
                None => (
                    (0..n).collect(),
                    train
                        .labels()
                        .iter()
                        .map(|&l| if l == positive { 1.0 } else { -1.0 })
                        .collect(),
                ),
                Some(neg) => {
                    let idx: Vec<usize> = (0..n)
                        .filter(|&i| train.labels()[i] == positive || train.labels()[i] == neg)
                        .collect();
                    let y = idx
                        .iter()
                        .map(|&i| {
                            if train.labels()[i] == positive {
                                1.0
                            } else {
                                -1.0
                            }
                        })
                        .collect();
                    (idx, y)
                }
            };
            let (kept, coeff, bias) = solve_machine(
                &gram,
                &indices,
                &y,
                cfg,
                derive_seed(seed, "svm-machine", machine_idx as u64),
            );
            let mut sv = Array2::zeros((kept.len(), train.dim()));
            for (row, &idx) in kept.iter().enumerate() {
                sv.row_mut(row).assign(&train.row(idx));
            }
            BinaryMachine {
                positive,
                negative,
                sv,
                coeff,
                bias,
            }
        })
        .collect();

    Ok(SvmModel {
        scheme: cfg.scheme,
        sigma: cfg.sigma,
        form: cfg.form,
        n_classes,
        dim: train.dim(),
        machines,
    })
}

/// Predict a class id. One-vs-all takes the argmax decision value (ties to
/// the lower class id); one-vs-one majority-votes pairwise winners, with
/// ties broken by the summed |decision| collected by each winning class,
/// then by the lower class id.
pub fn svm_predict(model: &SvmModel, query: &[f64]) -> Result<usize> {
    let decisions = model.decision_values(query)?;
    match model.scheme {
        SvmScheme::OneVsAll => {
            let mut best = 0usize;
            let mut best_val = f64::NEG_INFINITY;
            for (m, &d) in model.machines.iter().zip(&decisions) {
                if d > best_val {
                    best_val = d;
                    best = m.positive;
                }
            }
            Ok(best)
        }
        SvmScheme::OneVsOne => {
            let mut votes = vec![0usize; model.n_classes];
            let mut magnitude = vec![0.0f64; model.n_classes];
            for (m, &d) in model.machines.iter().zip(&decisions) {
                let winner = if d >= 0.0 {
                    m.positive
                } else {
                    m.negative.expect("one-vs-one machine has a pair")
                };
                votes[winner] += 1;
                magnitude[winner] += d.abs();
            }
            let best_votes = *votes.iter().max().unwrap();
            let winner = (0..model.n_classes)
                .filter(|&c| votes[c] == best_votes)
                .max_by(|&a, &b| {
                    magnitude[a]
                        .partial_cmp(&magnitude[b])
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .unwrap();
            Ok(winner)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SvmManifest {
    scheme: SvmScheme,
    sigma: f64,
    #[serde(default)]
    form: RbfForm,
    n_classes: usize,
    dim: usize,
    machines: Vec<MachineEntry>,
}

#[derive(Serialize, Deserialize)]
struct MachineEntry {
    positive: usize,
    negative: Option<usize>,
    bias: f64,
    coeff: Vec<f64>,
    sv_offset: usize,
    n_sv: usize,
}

impl SvmModel {
    /// JSON manifest plus one binary block holding every machine's support
    /// vectors.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::new();
        let mut block = Vec::new();
        block.extend_from_slice(SV_BLOCK_MAGIC);
        block.extend_from_slice(&(self.dim as u32).to_le_bytes());
        let total: usize = self.machines.iter().map(|m| m.sv.nrows()).sum();
        block.extend_from_slice(&(total as u32).to_le_bytes());
        let mut offset = 0usize;
        for m in &self.machines {
            entries.push(MachineEntry {
                positive: m.positive,
                negative: m.negative,
                bias: m.bias,
                coeff: m.coeff.clone(),
                sv_offset: offset,
                n_sv: m.sv.nrows(),
            });
            for v in m.sv.iter() {
                block.extend_from_slice(&v.to_le_bytes());
            }
            offset += m.sv.nrows();
        }
        let sv_path = dir.join("support_vectors.absv");
        std::fs::write(&sv_path, block).map_err(|e| Error::io(&sv_path, e))?;

        let manifest = SvmManifest {
            scheme: self.scheme,
            sigma: self.sigma,
            form: self.form,
            n_classes: self.n_classes,
            dim: self.dim,
            machines: entries,
        };
        let path = dir.join("model.json");
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::bad_format(&path, e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("model.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: SvmManifest =
            serde_json::from_str(&text).map_err(|e| Error::bad_format(&path, e.to_string()))?;

        let sv_path = dir.join("support_vectors.absv");
        let bytes = std::fs::read(&sv_path).map_err(|e| Error::io(&sv_path, e))?;
        let mut r = bytes.as_slice();
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|e| Error::io(&sv_path, e))?;
        if &magic != SV_BLOCK_MAGIC {
            return Err(Error::bad_format(&sv_path, "bad support-vector magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(|e| Error::io(&sv_path, e))?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(|e| Error::io(&sv_path, e))?;
        let total = u32::from_le_bytes(b4) as usize;
        if dim != manifest.dim {
            return Err(Error::bad_format(&sv_path, "dim mismatch with manifest"));
        }
        let mut data = vec![0.0f64; total * dim];
        let mut b8 = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut b8).map_err(|e| Error::io(&sv_path, e))?;
            *v = f64::from_le_bytes(b8);
        }

        let mut machines = Vec::with_capacity(manifest.machines.len());
        for e in &manifest.machines {
            let mut sv = Array2::zeros((e.n_sv, dim));
            for row in 0..e.n_sv {
                let base = (e.sv_offset + row) * dim;
                for col in 0..dim {
                    sv[[row, col]] = data[base + col];
                }
            }
            if e.coeff.len() != e.n_sv {
                return Err(Error::bad_format(&path, "coeff/support-vector mismatch"));
            }
            machines.push(BinaryMachine {
                positive: e.positive,
                negative: e.negative,
                sv,
                coeff: e.coeff.clone(),
                bias: e.bias,
            });
        }
        Ok(SvmModel {
            scheme: manifest.scheme,
            sigma: manifest.sigma,
            form: manifest.form,
            n_classes: manifest.n_classes,
            dim,
            machines,
        })
    }
}
