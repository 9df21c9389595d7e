//! Seeded random streams and the increments needed to simulate the process and its
//! relativistic and truncated variants.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::levy_model::{stable_constant, ProcessSpec, Variant};

/// One reproducible random stream: the pair `(master_seed, stream_id)` fixes the sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform on the open interval (0, 1).
    pub fn open_uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }

    pub fn poisson(&mut self, mean: f64) -> Result<u64> {
        if mean == 0.0 {
            return Ok(0);
        }
        let dist = Poisson::new(mean).map_err(|e| Error::Sampling(format!("poisson({mean}): {e}")))?;
        Ok(dist.sample(&mut self.rng) as u64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Gaussian increment of Brownian motion with generator Δ (covariance `2 dt I`), written into `out`.
pub fn fill_gaussian_increment(dt: f64, rng: &mut RngStream, out: &mut [f64]) {
    let s = (2.0 * dt).sqrt();
    for v in out.iter_mut() {
        *v = s * rng.normal();
    }
}

pub fn sample_gaussian_increment(dt: f64, d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let mut out = vec![0.0; d];
    fill_gaussian_increment(dt, rng, &mut out);
    Ok(out)
}

/// Positive `beta`-stable variable with Laplace transform `exp(-lam^beta)` (Kanter's form).
fn unit_positive_stable(beta: f64, rng: &mut RngStream) -> f64 {
    let u = PI * rng.open_uniform();
    let e = rng.exponential();
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = ((1.0 - beta) * u).sin() / e;
    a * b.powf((1.0 - beta) / beta)
}

/// Increment over time `t` of the `beta`-stable subordinator with Laplace exponent `lam^beta`.
pub fn sample_stable_subordinator(beta: f64, t: f64, rng: &mut RngStream) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("subordinator index must lie in (0, 1), got {beta}"));
    }
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    Ok(t.powf(1.0 / beta) * unit_positive_stable(beta, rng))
}

/// Isotropic stable vector with exponent `|xi|^alpha`, times `scale`, written into `out`:
/// a Gaussian with covariance `2 S I` for an `alpha/2`-stable `S`.
pub fn fill_stable_sym(alpha: f64, scale: f64, rng: &mut RngStream, out: &mut [f64]) {
    let s = unit_positive_stable(alpha / 2.0, rng);
    let g = scale * (2.0 * s).sqrt();
    for v in out.iter_mut() {
        *v = g * rng.normal();
    }
}

pub fn sample_stable_sym(alpha: f64, scale: f64, d: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("stability index must lie in (0, 2), got {alpha}"));
    }
    if !(scale > 0.0) {
        return domain(format!("scale must be positive, got {scale}"));
    }
    let mut out = vec![0.0; d];
    fill_stable_sym(alpha, scale, rng, &mut out);
    Ok(out)
}

/// Draw of the relativistic subordinator together with the number of proposals used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedDraw {
    pub value: f64,
    pub proposals: u64,
}

/// Relativistic subordinator increment, Laplace exponent `(lam + m^{2/alpha})^{alpha/2} - m`,
/// by rejection from the stable subordinator with acceptance `exp(-m^{2/alpha} S)`.
pub fn sample_relativistic_subordinator(alpha: f64, m: f64, t: f64, rng: &mut RngStream) -> Result<f64> {
    sample_relativistic_counted(alpha, m, t, rng).map(|d| d.value)
}

pub fn sample_relativistic_counted(alpha: f64, m: f64, t: f64, rng: &mut RngStream) -> Result<TiltedDraw> {
    if !(m >= 0.0) || !m.is_finite() {
        return domain(format!("mass must be finite and non-negative, got {m}"));
    }
    let beta = alpha / 2.0;
    let tilt = m.powf(1.0 / beta);
    let budget = (10.0 * (m * t).exp()).min(1e6).ceil() as u64;
    for k in 1..=budget.max(1) {
        let s = sample_stable_subordinator(beta, t, rng)?;
        if tilt == 0.0 || rng.open_uniform() < (-tilt * s).exp() {
            return Ok(TiltedDraw {
                value: s,
                proposals: k,
            });
        }
    }
    Err(Error::Sampling(format!(
        "relativistic rejection exhausted {budget} proposals (m={m}, t={t})"
    )))
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Compound-Poisson split of the truncated jump measure at `cutoff_eps`: jumps longer
/// than the cutoff are simulated exactly, shorter ones by a Gaussian of matching variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDecomposition {
    pub cutoff_eps: f64,
    pub big_jump_rate: f64,
    /// Per coordinate.
    pub small_jump_variance_per_time: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub d: usize,
}

pub fn decompose_truncated(spec: &ProcessSpec, eps: f64) -> Result<JumpDecomposition> {
    let Variant::Truncated { lambda } = spec.variant else {
        return Err(Error::UnsupportedVariant(spec.variant.name().into()));
    };
    if !(eps > 0.0 && eps < lambda) {
        return domain(format!("cutoff must lie in (0, {lambda}), got {eps}"));
    }
    let alpha = spec.alpha;
    let c = stable_constant(spec.d, alpha)?.value * sphere_area(spec.d);
    let rate = c * (eps.powf(-alpha) - lambda.powf(-alpha)) / alpha;
    let var = c * eps.powf(2.0 - alpha) / ((2.0 - alpha) * spec.d as f64);
    Ok(JumpDecomposition {
        cutoff_eps: eps,
        big_jump_rate: rate,
        small_jump_variance_per_time: var,
        lambda,
        alpha,
        d: spec.d,
    })
}

fn fill_unit_direction(rng: &mut RngStream, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.normal();
            n2 += *v * *v;
        }
        if n2 > 0.0 {
            let n = n2.sqrt();
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

impl JumpDecomposition {
    /// Length of one big jump: density proportional to `r^{-1-alpha}` on `(eps, lambda)`.
    pub fn sample_jump_length(&self, rng: &mut RngStream) -> f64 {
        let lo = self.cutoff_eps.powf(-self.alpha);
        let hi = self.lambda.powf(-self.alpha);
        let u = rng.open_uniform();
        (lo - u * (lo - hi)).powf(-1.0 / self.alpha)
    }

    /// Adds the big jumps of a step of length `h` to `out`; returns how many there were.
    pub fn add_big_jumps(&self, h: f64, rng: &mut RngStream, out: &mut [f64]) -> Result<u64> {
        let n = rng.poisson(self.big_jump_rate * h)?;
        let mut dir = [0.0; 3];
        for _ in 0..n {
            let r = self.sample_jump_length(rng);
            fill_unit_direction(rng, &mut dir[..self.d]);
            for k in 0..self.d {
                out[k] += r * dir[k];
            }
        }
        Ok(n)
    }

    /// Adds the Gaussian stand-in for the small jumps over a step of length `h`.
    pub fn add_small_jumps(&self, h: f64, rng: &mut RngStream, out: &mut [f64]) {
        let s = (self.small_jump_variance_per_time * h).sqrt();
        for v in out.iter_mut() {
            *v += s * rng.normal();
        }
    }
}
