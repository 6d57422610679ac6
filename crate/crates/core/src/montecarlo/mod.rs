//! Non-rigorous Monte Carlo estimators used to cross-check the certified
//! results: sampled Ulam matrices, long-orbit histograms and rotation
//! numbers averaged over noise realizations.
//!
//! Every random stream is a ChaCha8 generator keyed by the seed and a stream
//! id (source cell, orbit or realization index), so results do not depend on
//! the thread count or scheduling.

use crate::dynamics::NoisyMapParams;
use crate::error::{Error, Result};
use crate::ulam::Partition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    /// Samples per source cell for the sampled Ulam matrix.
    pub samples_per_cell: u64,
    /// Independent orbits (histograms) or noise realizations (rotation).
    pub n_ic: u64,
    /// Iterations per orbit.
    pub n_it: u64,
    pub n_bins: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { seed: 0, samples_per_cell: 10_000, n_ic: 1000, n_it: 100_000, n_bins: 1000 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cell == 0 || self.n_ic == 0 || self.n_it == 0 || self.n_bins == 0 {
            return Err(Error::InvalidParams("Monte Carlo counts must all be at least 1".into()));
        }
        Ok(())
    }
}

// Stream-id offsets so the estimators never share a stream.
const ULAM_STREAMS: u64 = 0;
const ORBIT_STREAMS: u64 = 1 << 40;
const ROTATION_STREAMS: u64 = 2 << 40;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One random step: `T(x) + eta`, `eta` uniform on `[-xi/2, xi/2)`, as a
/// displacement (not reduced mod 1).
#[derive(Clone, Copy)]
struct Stepper {
    tau: f64,
    k: f64,
    xi: f64,
}

impl Stepper {
    fn new(p: &NoisyMapParams) -> Self {
        Stepper { tau: p.tau, k: p.eps / TAU, xi: p.xi }
    }

    #[inline]
    fn displacement(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        self.tau - self.k * (TAU * x).sin() + self.xi * (u - 0.5)
    }
}

#[inline]
fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
fn bin(x: f64, n: usize) -> usize {
    ((x * n as f64) as usize).min(n - 1)
}

/// Sampled Ulam matrix: row `j` holds the counts of samples from cell `j`
/// landing in each cell, out of `samples` per row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McUlam {
    pub n: usize,
    pub samples: u64,
    pub rows: Vec<Vec<(usize, u64)>>,
}

impl McUlam {
    /// Transition probability from cell `j` to cell `i`.
    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.rows[j].iter().find(|e| e.0 == i).map_or(0.0, |e| e.1 as f64 / self.samples as f64)
    }

    pub fn row_count(&self, j: usize) -> u64 {
        self.rows[j].iter().map(|e| e.1).sum()
    }

    /// Left fixed vector by power iteration, normalized in the Euclidean norm
    /// at every step, returned as a density of mass 1.
    pub fn stationary(&self, tol: f64, max_iter: usize) -> McStationary {
        let n = self.n;
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut y = vec![0.0; n];
        let mut it = 0;
        let mut diff = f64::INFINITY;
        while it < max_iter && diff >= tol {
            y.fill(0.0);
            for (j, row) in self.rows.iter().enumerate() {
                for &(i, c) in row {
                    y[i] += x[j] * c as f64 / self.samples as f64;
                }
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            diff = 0.0;
            for (a, b) in y.iter_mut().zip(&x) {
                *a /= norm;
                diff += (*a - b).powi(2);
            }
            diff = diff.sqrt();
            std::mem::swap(&mut x, &mut y);
            it += 1;
        }
        let mass: f64 = x.iter().sum::<f64>() / n as f64;
        McStationary { density: x.iter().map(|v| v / mass).collect(), iterations: it, last_step: diff, norm: "euclidean".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McStationary {
    pub density: Vec<f64>,
    pub iterations: usize,
    pub last_step: f64,
    /// Norm used for the stopping rule and normalization.
    pub norm: String,
}

pub fn ulam_mc(p: &NoisyMapParams, part: &Partition, cfg: &McConfig) -> Result<McUlam> {
    cfg.validate()?;
    let n = part.n();
    let step = Stepper::new(p);
    let width = 1.0 / n as f64;
    let rows = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(cfg.seed, ULAM_STREAMS + j as u64);
            let mut counts = std::collections::BTreeMap::new();
            for _ in 0..cfg.samples_per_cell {
                let u: f64 = rng.random();
                let x = (j as f64 + u) * width;
                let y = reduce(x + step.displacement(x, &mut rng));
                *counts.entry(bin(y, n)).or_insert(0u64) += 1;
            }
            counts.into_iter().collect()
        })
        .collect();
    Ok(McUlam { n, samples: cfg.samples_per_cell, rows })
}

/// Histogram density of long noisy orbits, with per-batch histograms for a
/// statistical error estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Histogram {
    pub n_bins: usize,
    pub density: Vec<f64>,
    pub samples: u64,
    /// Densities of disjoint groups of orbits.
    pub batches: Vec<Vec<f64>>,
}

impl Histogram {
    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| (k as f64 + 0.5) / self.n_bins as f64).collect()
    }

    /// Statistical L1 envelope: mean plus three standard deviations of the
    /// batch deviations, scaled to the full sample.
    pub fn l1_envelope(&self) -> f64 {
        let b = self.batches.len();
        if b < 2 {
            return f64::INFINITY;
        }
        let d: Vec<f64> = self.batches.iter().map(|h| l1_distance(h, &self.density)).collect();
        let m = d.iter().sum::<f64>() / b as f64;
        let s = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt();
        (m + 3.0 * s) / ((b - 1) as f64).sqrt()
    }
}

pub const HISTOGRAM_BATCHES: u64 = 10;

pub fn orbit_histogram(p: &NoisyMapParams, cfg: &McConfig) -> Result<Histogram> {
    cfg.validate()?;
    let nb = cfg.n_bins;
    let step = Stepper::new(p);
    let batches = HISTOGRAM_BATCHES.min(cfg.n_ic);
    // Integer counts make the merge order irrelevant.
    let per_batch: Vec<Vec<u64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut counts = vec![0u64; nb];
            let mut o = b;
            while o < cfg.n_ic {
                let mut rng = stream(cfg.seed, ORBIT_STREAMS + o);
                let mut x: f64 = rng.random();
                for _ in 0..cfg.n_it {
                    x = reduce(x + step.displacement(x, &mut rng));
                    counts[bin(x, nb)] += 1;
                }
                o += batches;
            }
            counts
        })
        .collect();
    let to_density = |c: &[u64]| {
        let total: u64 = c.iter().sum();
        c.iter().map(|&k| k as f64 * nb as f64 / total as f64).collect::<Vec<f64>>()
    };
    let mut total = vec![0u64; nb];
    for c in &per_batch {
        for (t, k) in total.iter_mut().zip(c) {
            *t += k;
        }
    }
    Ok(Histogram {
        n_bins: nb,
        density: to_density(&total),
        samples: total.iter().sum(),
        batches: per_batch.iter().map(|c| to_density(c)).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationStats {
    pub tau: f64,
    pub mean: f64,
    pub std: f64,
    pub realizations: u64,
    pub n_it: u64,
}

impl RotationStats {
    pub fn std_error(&self) -> f64 {
        self.std / (self.realizations as f64).sqrt()
    }
}

/// Mean and standard deviation over realizations of the lift displacement
/// per iterate.
pub fn rotation_mc(p: &NoisyMapParams, cfg: &McConfig, realizations: u64) -> Result<RotationStats> {
    cfg.validate()?;
    if realizations == 0 {
        return Err(Error::InvalidParams("need at least one realization".into()));
    }
    let step = Stepper::new(p);
    let values: Vec<f64> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, ROTATION_STREAMS + r);
            let mut x: f64 = rng.random();
            let mut lift = 0.0;
            for _ in 0..cfg.n_it {
                let d = step.displacement(x, &mut rng);
                lift += d;
                x = reduce(x + d);
            }
            lift / cfg.n_it as f64
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(RotationStats { tau: p.tau, mean, std: var.sqrt(), realizations, n_it: cfg.n_it })
}

/// Welch two-sample t statistic for `b.mean - a.mean`.
pub fn t_statistic(a: &RotationStats, b: &RotationStats) -> f64 {
    let se = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    (b.mean - a.mean) / se
}

/// L1 distance of two piecewise-constant densities on uniform grids of
/// possibly different sizes over `[0, 1)`.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut x = 0.0;
    let mut acc = 0.0;
    while i < na && j < nb {
        let ea = (i + 1) as f64 / na as f64;
        let eb = (j + 1) as f64 / nb as f64;
        let e = ea.min(eb);
        acc += (a[i] - b[j]).abs() * (e - x);
        x = e;
        // Advance on exact rational comparison of the edges.
        let (ca, cb) = ((i + 1) * nb, (j + 1) * na);
        if ca <= cb {
            i += 1;
        }
        if cb <= ca {
            j += 1;
        }
    }
    acc
}

/// Averages of a piecewise-constant density over `n_bins` uniform bins.
pub fn rebin(f: &[f64], n_bins: usize) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n_bins];
    let (mut i, mut k) = (0usize, 0usize);
    let mut x = 0.0;
    while i < n && k < n_bins {
        let (ci, ck) = ((i + 1) * n_bins, (k + 1) * n);
        let e = if ci <= ck { (i + 1) as f64 / n as f64 } else { (k + 1) as f64 / n_bins as f64 };
        out[k] += f[i] * (e - x) * n_bins as f64;
        x = e;
        if ci <= ck {
            i += 1;
        }
        if ck <= ci {
            k += 1;
        }
    }
    out
}
