//! Evolution families generated by linear ODEs `x' = A(t) x`.
//!
//! The fundamental matrix `Φ(t) = T(t, origin)` is propagated with
//! fixed-step classical RK4 on the node lattice `origin + k·step`, forward
//! for `t ≥ origin` and backward otherwise. Every `checkpoint_every`-th node
//! is cached, and `T(t, s) = Φ(t) Φ(s)⁻¹`. Evaluation at a time `t` always
//! walks the same node sequence, so results do not depend on the order in
//! which times are requested.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::family::EvolutionFamily;
use crate::linalg::{self, Matrix};

const CHECKPOINT_EVERY: usize = 32;
/// Safety cap on the number of RK4 nodes on either side of the origin.
const MAX_NODES: f64 = 5.0e7;

type Generator = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;

pub struct OdePropagator {
    dim: usize,
    a0: f64,
    origin: f64,
    step: f64,
    generator: Generator,
    forward: RwLock<Vec<Matrix>>,
    backward: RwLock<Vec<Matrix>>,
    memo: RwLock<HashMap<u64, Arc<(Matrix, Matrix)>>>,
}

impl fmt::Debug for OdePropagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdePropagator")
            .field("dim", &self.dim)
            .field("a0", &self.a0)
            .field("origin", &self.origin)
            .field("step", &self.step)
            .finish()
    }
}

impl OdePropagator {
    fn new(dim: usize, a0: f64, origin: f64, step: f64, generator: Generator) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument(format!("integrator step must be positive, got {step}")));
        }
        if !origin.is_finite() || origin <= a0 {
            return Err(Error::Domain(format!("origin {origin} must lie in ({a0}, ∞)")));
        }
        let probe = generator(origin);
        if probe.nrows() != dim || probe.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "generator returns {}x{}, expected {dim}x{dim}",
                probe.nrows(),
                probe.ncols()
            )));
        }
        let id = Matrix::identity(dim, dim);
        Ok(Self {
            dim,
            a0,
            origin,
            step,
            generator,
            forward: RwLock::new(vec![id.clone()]),
            backward: RwLock::new(vec![id]),
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    fn rk4(&self, phi: &Matrix, t: f64, dt: f64) -> Result<Matrix> {
        let a = &self.generator;
        let k1 = a(t) * phi;
        let k2 = a(t + 0.5 * dt) * (phi + &k1 * (0.5 * dt));
        let k3 = a(t + 0.5 * dt) * (phi + &k2 * (0.5 * dt));
        let k4 = a(t + dt) * (phi + &k3 * dt);
        let next = phi + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !linalg::is_finite(&next) {
            return Err(Error::Integration { t: t + dt });
        }
        Ok(next)
    }

    /// Node time `origin ± k·step`.
    fn node(&self, k: usize, sign: f64) -> f64 {
        self.origin + sign * (k as f64) * self.step
    }

    fn checkpoint(&self, j: usize, sign: f64) -> Result<Matrix> {
        let cache = if sign > 0.0 { &self.forward } else { &self.backward };
        if let Some(m) = cache.read().expect("checkpoint lock").get(j) {
            return Ok(m.clone());
        }
        let mut ckpts = cache.write().expect("checkpoint lock");
        while ckpts.len() <= j {
            let i = ckpts.len() - 1;
            let mut phi = ckpts[i].clone();
            for k in i * CHECKPOINT_EVERY..(i + 1) * CHECKPOINT_EVERY {
                phi = self.rk4(&phi, self.node(k, sign), sign * self.step)?;
            }
            ckpts.push(phi);
        }
        Ok(ckpts[j].clone())
    }

    fn integrate_to(&self, t: f64) -> Result<Matrix> {
        if !t.is_finite() || t <= self.a0 {
            return Err(Error::Domain(format!("time {t} outside ({}, ∞)", self.a0)));
        }
        let offset = t - self.origin;
        let sign = if offset >= 0.0 { 1.0 } else { -1.0 };
        let x = offset.abs() / self.step;
        if x > MAX_NODES {
            return Err(Error::Domain(format!("time {t} is {x:.2e} integrator steps from the origin")));
        }
        let k = x.floor() as usize;
        let j = k / CHECKPOINT_EVERY;
        let mut phi = self.checkpoint(j, sign)?;
        for m in j * CHECKPOINT_EVERY..k {
            phi = self.rk4(&phi, self.node(m, sign), sign * self.step)?;
        }
        let tk = self.node(k, sign);
        let rest = t - tk;
        if rest != 0.0 {
            phi = self.rk4(&phi, tk, rest)?;
        }
        Ok(phi)
    }

    /// `(Φ(t), Φ(t)⁻¹)`, memoized per exact time value.
    fn fundamental(&self, t: f64) -> Result<Arc<(Matrix, Matrix)>> {
        let key = t.to_bits();
        if let Some(hit) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(hit.clone());
        }
        let phi = self.integrate_to(t)?;
        let inv = linalg::inverse(&phi)?;
        let entry = Arc::new((phi, inv));
        self.memo.write().expect("memo lock").entry(key).or_insert_with(|| entry.clone());
        Ok(entry)
    }

    pub fn transition(&self, t: f64, s: f64) -> Result<Matrix> {
        let ft = self.fundamental(t)?;
        let fs = self.fundamental(s)?;
        Ok(&ft.0 * &fs.1)
    }
}

/// Evolution family of `x' = A(t) x` with the integration origin placed at
/// `a0 + 1` (or `0` when `a0 = -∞`).
pub fn make_ode_family<F>(
    name: impl Into<String>,
    dim: usize,
    a0: f64,
    step: f64,
    generator: F,
) -> Result<EvolutionFamily>
where
    F: Fn(f64) -> Matrix + Send + Sync + 'static,
{
    let origin = if a0.is_finite() { a0 + 1.0 } else { 0.0 };
    make_ode_family_at(name, dim, a0, origin, step, generator)
}

/// As [`make_ode_family`] with an explicit integration origin.
pub fn make_ode_family_at<F>(
    name: impl Into<String>,
    dim: usize,
    a0: f64,
    origin: f64,
    step: f64,
    generator: F,
) -> Result<EvolutionFamily>
where
    F: Fn(f64) -> Matrix + Send + Sync + 'static,
{
    let prop = OdePropagator::new(dim, a0, origin, step, Arc::new(generator))?;
    Ok(EvolutionFamily::from_ode(name, prop))
}
