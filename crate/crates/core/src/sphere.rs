//! Minimization of even functions over the Euclidean unit sphere.
//!
//! Dense quasi-uniform sampling locates candidate minima; the best few
//! separated candidates are then refined by projected gradient descent (when
//! the objective supplies a gradient) followed by a tangent-space pattern
//! search, which also handles the nonsmooth max-of-norms objectives. The
//! refined value never exceeds the best sampled value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereConfig {
    /// Number of sample points (exact for `n ≤ 3`, random beyond).
    pub samples: usize,
    /// Number of separated candidates handed to local refinement.
    pub restarts: usize,
    /// Seed for random sampling in dimension `n > 3`.
    pub seed: u64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self { samples: 10_000, restarts: 8, seed: 0 }
    }
}

/// Sample points on the half sphere (objectives here are even in `v`).
#[derive(Debug, Clone)]
pub struct SphereSamples {
    dim: usize,
    points: Vec<f64>,
}

impl SphereSamples {
    pub fn new(dim: usize, cfg: &SphereConfig) -> Self {
        let m = cfg.samples.max(1);
        let mut points = Vec::new();
        match dim {
            0 => {}
            1 => points.push(1.0),
            2 => {
                for k in 0..m {
                    let (s, c) = (std::f64::consts::PI * k as f64 / m as f64).sin_cos();
                    points.extend_from_slice(&[c, s]);
                }
            }
            3 => {
                points.extend_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                for k in 0..m {
                    let z = (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let (s, c) = (golden * k as f64).sin_cos();
                    points.extend_from_slice(&[r * c, r * s, z]);
                }
            }
            n => {
                for i in 0..n {
                    points.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut v = vec![0.0; n];
                for _ in 0..m {
                    for x in v.iter_mut() {
                        *x = rng.sample(StandardNormal);
                    }
                    let norm = dot(&v, &v).sqrt();
                    points.extend(v.iter().map(|x| x / norm));
                }
            }
        }
        Self { dim, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

pub trait SphereObjective {
    fn value(&self, v: &[f64]) -> f64;

    /// Euclidean gradient at `v`; returns `false` if unavailable.
    fn gradient(&self, _v: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct SphereMinimum {
    pub value: f64,
    /// Best value among the raw samples, before refinement.
    pub sampled: f64,
    pub argmin: Vec<f64>,
}

const CANDIDATE_POOL: usize = 64;
const SEPARATION: f64 = 0.999;

pub fn minimize<O: SphereObjective + ?Sized>(obj: &O, samples: &SphereSamples, cfg: &SphereConfig) -> SphereMinimum {
    let n = samples.dim();
    // (value, index), ascending, bounded pool
    let mut pool: Vec<(f64, usize)> = Vec::with_capacity(CANDIDATE_POOL + 1);
    for i in 0..samples.len() {
        let f = obj.value(samples.point(i));
        if pool.len() < CANDIDATE_POOL || f < pool[pool.len() - 1].0 {
            let at = pool.partition_point(|&(g, _)| g <= f);
            pool.insert(at, (f, i));
            pool.truncate(CANDIDATE_POOL);
        }
    }
    let (sampled, best_idx) = pool[0];
    let mut best = SphereMinimum { value: sampled, sampled, argmin: samples.point(best_idx).to_vec() };
    if n < 2 {
        return best;
    }
    let mut starts: Vec<&[f64]> = Vec::new();
    for &(_, i) in &pool {
        let p = samples.point(i);
        if starts.iter().all(|q| dot(p, q).abs() < SEPARATION) {
            starts.push(p);
            if starts.len() >= cfg.restarts.max(1) {
                break;
            }
        }
    }
    for start in starts {
        let (v, f) = refine(obj, start);
        if f < best.value {
            best.value = f;
            best.argmin = v;
        }
    }
    best
}

fn refine<O: SphereObjective + ?Sized>(obj: &O, start: &[f64]) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut v = start.to_vec();
    let mut f = obj.value(&v);
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];

    if obj.gradient(&v, &mut grad) {
        for _ in 0..200 {
            if !obj.gradient(&v, &mut grad) {
                break;
            }
            let radial = dot(&grad, &v);
            for (g, x) in grad.iter_mut().zip(&v) {
                *g -= radial * x;
            }
            let gnorm2 = dot(&grad, &grad);
            if gnorm2 < 1e-28 {
                break;
            }
            let mut eta = 0.5 / gnorm2.sqrt();
            let mut moved = false;
            while eta > 1e-16 {
                for ((t, x), g) in trial.iter_mut().zip(&v).zip(&grad) {
                    *t = x - eta * g;
                }
                normalize(&mut trial);
                let ft = obj.value(&trial);
                if ft < f - 1e-4 * eta * gnorm2 {
                    v.copy_from_slice(&trial);
                    f = ft;
                    moved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }

    let mut delta = 1e-2;
    let mut iters = 0;
    while delta > 1e-12 && iters < 20_000 {
        iters += 1;
        let basis = tangent_basis(&v);
        let mut improved = false;
        'search: for b in &basis {
            for sign in [1.0, -1.0] {
                for ((t, x), bi) in trial.iter_mut().zip(&v).zip(b) {
                    *t = x + sign * delta * bi;
                }
                normalize(&mut trial);
                let ft = obj.value(&trial);
                if ft < f {
                    v.copy_from_slice(&trial);
                    f = ft;
                    improved = true;
                    break 'search;
                }
            }
        }
        if improved {
            delta *= 1.5;
        } else {
            delta *= 0.5;
        }
    }
    (v, f)
}

/// Orthonormal basis of the tangent space `v⊥`.
fn tangent_basis(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut basis: Vec<Vec<f64>> = vec![v.to_vec()];
    for i in 0..n {
        let mut w: Vec<f64> = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
        for u in &basis {
            let c = dot(&w, u);
            for (wj, uj) in w.iter_mut().zip(u) {
                *wj -= c * uj;
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > 1e-6 {
            w.iter_mut().for_each(|x| *x /= norm);
            basis.push(w);
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}
