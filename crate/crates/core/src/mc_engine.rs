//! Killed-path simulation and the Monte-Carlo estimators built on it.
//!
//! Each step draws the continuous part `G` (Brownian motion, plus the Gaussian stand-in for
//! small jumps in the truncated variant) and the jump part `J` separately, so an exit can be
//! attributed to a boundary crossing or to a jump out of the component.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{distance, Domain, DomainPoint};
use crate::levy_model::{ProcessSpec, Variant};
use crate::sampler::{
    decompose_truncated, fill_gaussian_increment, fill_stable_sym, sample_relativistic_subordinator,
    JumpDecomposition, RngStream,
};

/// z-value of a two-sided 99% normal interval.
pub const Z99: f64 = 2.576;
pub const DEFAULT_BATCHES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitMode {
    JumpedOut,
    Crossed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Exited,
    HitTarget,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KilledPathSummary {
    pub exit_time: f64,
    pub exit_position: Vec<f64>,
    pub exit_mode: ExitMode,
    /// One accumulator per scalar functional (a mesh contributes one per cell).
    pub occupation: Vec<f64>,
    pub steps: u64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimScheme {
    pub base_step: f64,
    /// Near the boundary the step is `boundary_refine_factor * delta^2 / 2`.
    pub boundary_refine_factor: f64,
    pub bridge_correction: bool,
    /// Small/big jump cutoff for the truncated variant; the effective cutoff is
    /// `min(lambda / 100, jump_cutoff_eps)`.
    pub jump_cutoff_eps: f64,
    pub max_steps: u64,
    /// Floor for refined and halved steps, relative to `base_step`.
    pub min_step_ratio: f64,
}

impl Default for SimScheme {
    fn default() -> Self {
        Self {
            base_step: 1e-3,
            boundary_refine_factor: 0.5,
            bridge_correction: true,
            jump_cutoff_eps: 0.01,
            max_steps: 50_000_000,
            min_step_ratio: 1e-4,
        }
    }
}

impl SimScheme {
    pub fn with_step(base_step: f64) -> Self {
        Self {
            base_step,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_step > 0.0) || !self.base_step.is_finite() {
            return domain(format!("base step must be positive, got {}", self.base_step));
        }
        if !(self.boundary_refine_factor > 0.0 && self.boundary_refine_factor < 1.0) {
            return domain(format!(
                "boundary refine factor must lie in (0, 1), got {}",
                self.boundary_refine_factor
            ));
        }
        if !(self.jump_cutoff_eps > 0.0) {
            return domain("jump cutoff must be positive");
        }
        if self.max_steps == 0 {
            return domain("max_steps must be at least 1");
        }
        if !(self.min_step_ratio > 0.0 && self.min_step_ratio <= 1.0) {
            return domain("min_step_ratio must lie in (0, 1]");
        }
        Ok(())
    }

    fn min_step(&self) -> f64 {
        self.base_step * self.min_step_ratio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Component { index: usize },
}

impl Region {
    fn contains(&self, domain: &Domain, comp: usize, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => distance(x, center) < *radius,
            Region::Component { index } => {
                let _ = domain;
                comp == *index
            }
        }
    }
}

/// Occupation functional `int_0^tau f(X_s) ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    Constant { value: f64 },
    Indicator { region: Region },
    /// `(1 - |x - y|^2 / b^2)^2` normalized to unit mass.
    Bump { center: Vec<f64>, bandwidth: f64 },
    /// One-dimensional occupation density on `cells` cells of width `width` from `lo`.
    Mesh { lo: f64, width: f64, cells: usize },
}

pub fn bump_mass(d: usize, bandwidth: f64) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 16.0 / 15.0 * bandwidth,
        2 => PI / 3.0 * bandwidth * bandwidth,
        _ => 32.0 * PI / 105.0 * bandwidth.powi(3),
    }
}

impl Functional {
    pub fn len(&self) -> usize {
        match self {
            Functional::Mesh { cells, .. } => *cells,
            _ => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn accumulate(&self, domain: &Domain, comp: usize, x: &[f64], h: f64, out: &mut [f64]) {
        match self {
            Functional::Constant { value } => out[0] += value * h,
            Functional::Indicator { region } => {
                if region.contains(domain, comp, x) {
                    out[0] += h;
                }
            }
            Functional::Bump { center, bandwidth } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let b2 = bandwidth * bandwidth;
                if r2 < b2 {
                    let s = 1.0 - r2 / b2;
                    out[0] += h * s * s / bump_mass(x.len(), *bandwidth);
                }
            }
            Functional::Mesh { lo, width, cells } => {
                let k = ((x[0] - lo) / width).floor();
                if k >= 0.0 && (k as usize) < *cells {
                    out[k as usize] += h / width;
                }
            }
        }
    }
}

/// Optional early stopping: a closed target ball and a time horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathOptions {
    pub target: Option<(Vec<f64>, f64)>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub ci99: [f64; 2],
}

impl Estimate {
    /// Combine per-batch sums into an estimate; batch variance gives the standard error.
    pub fn from_batches(sums: &[f64], counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 || sums.len() < 2 {
            return Err(Error::InsufficientData("need at least two non-empty batches".into()));
        }
        let total: f64 = sums.iter().sum();
        let mean = total / n as f64;
        let b = sums.len() as f64;
        let mut ss = 0.0;
        for (s, &c) in sums.iter().zip(counts) {
            let dev = s - mean * c as f64;
            ss += dev * dev;
        }
        let std_error = (ss * b / (b - 1.0)).sqrt() / n as f64;
        Ok(Self {
            mean,
            std_error,
            n,
            ci99: [mean - Z99 * std_error, mean + Z99 * std_error],
        })
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.ci99[0] <= other.ci99[1] && other.ci99[0] <= self.ci99[1]
    }
}

/// Per-output batch sums of a Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    /// `sums[output][batch]`.
    pub sums: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
}

impl Tally {
    pub fn estimate(&self, output: usize) -> Result<Estimate> {
        Estimate::from_batches(&self.sums[output], &self.counts)
    }

    pub fn estimates(&self) -> Result<Vec<Estimate>> {
        (0..self.sums.len()).map(|k| self.estimate(k)).collect()
    }

    /// Per-batch means of one output.
    pub fn batch_means(&self, output: usize) -> Vec<f64> {
        self.sums[output]
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| s / c as f64)
            .collect()
    }

    pub fn outputs(&self) -> usize {
        self.sums.len()
    }
}

enum JumpLaw {
    None,
    Stable { alpha: f64, weight: f64 },
    Relativistic { alpha: f64, m: f64 },
    Truncated(JumpDecomposition),
}

/// Killed-path simulator for one process on one domain.
pub struct Simulator {
    spec: ProcessSpec,
    domain: Domain,
    scheme: SimScheme,
    workers: usize,
    batches: usize,
    jumps: JumpLaw,
    /// Per-coordinate variance rate of the continuous part.
    diffusivity: f64,
}

impl Simulator {
    pub fn new(spec: &ProcessSpec, domain: &Domain, scheme: &SimScheme) -> Result<Self> {
        spec.validate()?;
        scheme.validate()?;
        if domain.dim() != spec.d {
            return Err(Error::Shape {
                expected: spec.d,
                got: domain.dim(),
            });
        }
        let (jumps, diffusivity) = match spec.variant {
            Variant::Plain if spec.a == 0.0 => (JumpLaw::None, 2.0),
            Variant::Plain => (
                JumpLaw::Stable {
                    alpha: spec.alpha,
                    weight: spec.a,
                },
                2.0,
            ),
            Variant::Relativistic { m } => (JumpLaw::Relativistic { alpha: spec.alpha, m }, 2.0),
            Variant::Truncated { lambda } => {
                let eps = if lambda.is_finite() {
                    (lambda / 100.0).min(scheme.jump_cutoff_eps)
                } else {
                    scheme.jump_cutoff_eps
                };
                let dec = decompose_truncated(spec, eps)?;
                let var = dec.small_jump_variance_per_time;
                (JumpLaw::Truncated(dec), 2.0 + var)
            }
        };
        Ok(Self {
            spec: *spec,
            domain: domain.clone(),
            scheme: *scheme,
            workers: 0,
            batches: DEFAULT_BATCHES,
            jumps,
            diffusivity,
        })
    }

    /// Worker threads for path fan-out (0 = rayon default). Results do not depend on it.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches.max(2);
        self
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn scheme(&self) -> &SimScheme {
        &self.scheme
    }

    fn draw_continuous(&self, h: f64, rng: &mut RngStream, out: &mut [f64]) {
        fill_gaussian_increment(h, rng, out);
        if let JumpLaw::Truncated(dec) = &self.jumps {
            dec.add_small_jumps(h, rng, out);
        }
    }

    /// Returns whether the jump part is non-zero.
    fn draw_jump(&self, h: f64, rng: &mut RngStream, out: &mut [f64]) -> Result<bool> {
        match &self.jumps {
            JumpLaw::None => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(false)
            }
            JumpLaw::Stable { alpha, weight } => {
                fill_stable_sym(*alpha, weight * h.powf(1.0 / alpha), rng, out);
                Ok(true)
            }
            JumpLaw::Relativistic { alpha, m } => {
                let s = sample_relativistic_subordinator(*alpha, *m, h, rng)?;
                let g = (2.0 * s).sqrt();
                for v in out.iter_mut() {
                    *v = g * rng.normal();
                }
                Ok(true)
            }
            JumpLaw::Truncated(dec) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(dec.add_big_jumps(h, rng, out)? > 0)
            }
        }
    }

    /// Simulate one path from `x0` until it is killed (or stopped by `opts`).
    pub fn simulate_path(
        &self,
        x0: &[f64],
        rng: &mut RngStream,
        functionals: &[Functional],
        opts: &PathOptions,
    ) -> Result<KilledPathSummary> {
        let d = self.spec.d;
        let Some((mut comp, mut delta)) = self.domain.locate(x0) else {
            return domain(format!("start point {x0:?} is not inside the domain"));
        };
        let n_out: usize = functionals.iter().map(|f| f.len()).sum();
        let mut occupation = vec![0.0; n_out];
        let mut x = [0.0f64; 3];
        x[..d].copy_from_slice(x0);
        let mut g = [0.0f64; 3];
        let mut j = [0.0f64; 3];
        let mut y = [0.0f64; 3];
        let mut t = 0.0;
        let mut steps = 0u64;
        let min_step = self.scheme.min_step();
        let sigma2 = self.diffusivity;

        let summary = |t: f64, pos: &[f64], mode, occ: Vec<f64>, steps, stop| KilledPathSummary {
            exit_time: t,
            exit_position: pos.to_vec(),
            exit_mode: mode,
            occupation: occ,
            steps,
            stop,
        };

        if let Some((c, r)) = &opts.target {
            if distance(x0, c) <= *r {
                return Ok(summary(0.0, x0, ExitMode::Crossed, occupation, 0, StopReason::HitTarget));
            }
        }

        loop {
            if steps >= self.scheme.max_steps {
                return Err(Error::Truncated {
                    steps,
                    partial: Box::new(summary(t, &x[..d], ExitMode::Crossed, occupation, steps, StopReason::Exited)),
                });
            }
            let mut h = (self.scheme.boundary_refine_factor * delta * delta / 2.0)
                .min(self.scheme.base_step)
                .max(min_step);
            if let Some(hz) = opts.horizon {
                if hz - t < h {
                    h = (hz - t).max(f64::MIN_POSITIVE);
                }
            }
            // draw, halving on ambiguous steps
            let outcome = loop {
                self.draw_continuous(h, rng, &mut g[..d]);
                let has_jump = self.draw_jump(h, rng, &mut j[..d])?;
                let gy = &mut y[..d];
                for k in 0..d {
                    gy[k] = x[k] + g[k];
                }
                let dg = self.domain.signed_component_distance(comp, gy);
                let mut gauss_out = dg <= 0.0;
                if !gauss_out && self.scheme.bridge_correction {
                    let p = (-2.0 * delta * dg / (sigma2 * h)).exp();
                    if p > 1e-300 && rng.open_uniform() < p {
                        gauss_out = true;
                    }
                }
                let jump_out = has_jump && {
                    for k in 0..d {
                        gy[k] = x[k] + j[k];
                    }
                    self.domain.signed_component_distance(comp, gy) <= 0.0
                };
                for k in 0..d {
                    gy[k] = x[k] + g[k] + j[k];
                }
                let landed = self.domain.locate(gy);
                let g_norm = norm(&g[..d]);
                let j_norm = norm(&j[..d]);
                let ambiguous = (gauss_out && jump_out)
                    || (jump_out && matches!(landed, Some((c, _)) if c == comp));
                if ambiguous && h > min_step {
                    h = (h / 2.0).max(min_step);
                    continue;
                }
                break if gauss_out && !(jump_out && j_norm >= g_norm) {
                    // crossed during the continuous motion
                    for k in 0..d {
                        gy[k] = x[k] + g[k];
                    }
                    Step::Killed(ExitMode::Crossed)
                } else if let Some((c, s)) = landed {
                    // a jump may land in another component; diffusion alone may not
                    if jump_out || c == comp || j_norm >= g_norm {
                        Step::Move(c, s)
                    } else {
                        // the continuous part left one component and entered another: killed
                        Step::Killed(ExitMode::Crossed)
                    }
                } else if jump_out || j_norm >= g_norm {
                    Step::Killed(ExitMode::JumpedOut)
                } else {
                    Step::Killed(ExitMode::Crossed)
                };
            };
            // occupation at the pre-step point, including the final step
            let mut off = 0;
            for f in functionals {
                let len = f.len();
                f.accumulate(&self.domain, comp, &x[..d], h, &mut occupation[off..off + len]);
                off += len;
            }
            t += h;
            steps += 1;
            match outcome {
                Step::Move(c, s) => {
                    x[..d].copy_from_slice(&y[..d]);
                    comp = c;
                    delta = s;
                    if let Some((tc, tr)) = &opts.target {
                        if self.hits_target(&x[..d], tc, *tr, h, rng) {
                            return Ok(summary(t, &x[..d], ExitMode::Crossed, occupation, steps, StopReason::HitTarget));
                        }
                    }
                    if let Some(hz) = opts.horizon {
                        if t >= hz {
                            return Ok(summary(t, &x[..d], ExitMode::Crossed, occupation, steps, StopReason::Horizon));
                        }
                    }
                }
                Step::Killed(mode) => {
                    let mut pos = [0.0f64; 3];
                    match mode {
                        ExitMode::Crossed => {
                            self.domain.project_to_component_boundary(comp, &y[..d], &mut pos[..d])
                        }
                        ExitMode::JumpedOut => pos[..d].copy_from_slice(&y[..d]),
                    }
                    return Ok(summary(t, &pos[..d], mode, occupation, steps, StopReason::Exited));
                }
            }
        }
    }

    // Only the endpoint is checked; the bridge term covers continuous entry near the sphere.
    fn hits_target(&self, x: &[f64], center: &[f64], radius: f64, h: f64, rng: &mut RngStream) -> bool {
        let gap = distance(x, center) - radius;
        if gap <= 0.0 {
            return true;
        }
        if self.scheme.bridge_correction {
            let p = (-2.0 * gap * gap / (self.diffusivity * h)).exp();
            return p > 1e-300 && rng.open_uniform() < p;
        }
        false
    }

    fn run_batches<F>(&self, n_paths: u64, seed: u64, n_out: usize, per_path: F) -> Result<Tally>
    where
        F: Fn(u64, &mut RngStream, &mut [f64]) -> Result<()> + Sync,
    {
        let b = self.batches as u64;
        if n_paths < b {
            return Err(Error::InsufficientData(format!(
                "{n_paths} paths for {b} batches"
            )));
        }
        let bounds: Vec<(u64, u64)> = (0..b).map(|k| (k * n_paths / b, (k + 1) * n_paths / b)).collect();
        let run = || -> Result<Vec<Vec<f64>>> {
            bounds
                .par_iter()
                .map(|&(lo, hi)| {
                    let mut sums = vec![0.0; n_out];
                    let mut vals = vec![0.0; n_out];
                    for path in lo..hi {
                        let mut rng = RngStream::new(seed, path);
                        vals.iter_mut().for_each(|v| *v = 0.0);
                        per_path(path, &mut rng, &mut vals)?;
                        for (s, v) in sums.iter_mut().zip(&vals) {
                            *s += v;
                        }
                    }
                    Ok(sums)
                })
                .collect()
        };
        let per_batch = if self.workers == 0 {
            run()?
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?
                .install(run)?
        };
        let mut sums = vec![vec![0.0; bounds.len()]; n_out];
        for (k, batch) in per_batch.iter().enumerate() {
            for (o, v) in batch.iter().enumerate() {
                sums[o][k] = *v;
            }
        }
        Ok(Tally {
            sums,
            counts: bounds.iter().map(|(lo, hi)| hi - lo).collect(),
        })
    }

    /// Batch sums of path statistics: the occupation accumulators first, then
    /// `exit_time`, `[jumped_out]`, `[hit target]`, `[reached horizon]`.
    pub fn tally(
        &self,
        x0: &[f64],
        functionals: &[Functional],
        opts: &PathOptions,
        n_paths: u64,
        seed: u64,
    ) -> Result<Tally> {
        let n_occ: usize = functionals.iter().map(|f| f.len()).sum();
        self.run_batches(n_paths, seed, n_occ + 4, |_, rng, out| {
            let s = self.simulate_path(x0, rng, functionals, opts)?;
            out[..n_occ].copy_from_slice(&s.occupation);
            out[n_occ] = s.exit_time;
            out[n_occ + 1] = f64::from(u8::from(s.stop == StopReason::Exited && s.exit_mode == ExitMode::JumpedOut));
            out[n_occ + 2] = f64::from(u8::from(s.stop == StopReason::HitTarget));
            out[n_occ + 3] = f64::from(u8::from(s.stop == StopReason::Horizon));
            Ok(())
        })
    }

    /// Batch sums of an arbitrary per-path statistic.
    pub fn tally_with<F>(&self, x0: &[f64], functionals: &[Functional], opts: &PathOptions, n_paths: u64, seed: u64, n_out: usize, stat: F) -> Result<Tally>
    where
        F: Fn(&KilledPathSummary, &mut [f64]) + Sync,
    {
        self.run_batches(n_paths, seed, n_out, |_, rng, out| {
            let s = self.simulate_path(x0, rng, functionals, opts)?;
            stat(&s, out);
            Ok(())
        })
    }

    /// Exit times of `n_paths` paths in path order.
    pub fn exit_times(&self, x0: &[f64], n_paths: u64, seed: u64) -> Result<Vec<f64>> {
        let run = || -> Result<Vec<f64>> {
            (0..n_paths)
                .into_par_iter()
                .map(|p| {
                    let mut rng = RngStream::new(seed, p);
                    Ok(self.simulate_path(x0, &mut rng, &[], &PathOptions::default())?.exit_time)
                })
                .collect()
        };
        if self.workers == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?
                .install(run)
        }
    }

    pub fn mean_exit_time(&self, x0: &[f64], n_paths: u64, seed: u64) -> Result<Estimate> {
        check_paths(n_paths)?;
        let t = self.tally(x0, &[], &PathOptions::default(), n_paths, seed)?;
        t.estimate(0)
    }

    pub fn occupation(&self, x0: &[f64], f: &Functional, n_paths: u64, seed: u64) -> Result<Estimate> {
        check_paths(n_paths)?;
        let t = self.tally(x0, std::slice::from_ref(f), &PathOptions::default(), n_paths, seed)?;
        t.estimate(0)
    }

    /// Pointwise Green values `G(x0, y)` for several `y`, from bump occupation on shared paths.
    pub fn green_pointwise_many(&self, x0: &[f64], ys: &[Vec<f64>], bandwidth: f64, n_paths: u64, seed: u64) -> Result<Vec<Estimate>> {
        check_paths(n_paths)?;
        if !(bandwidth > 0.0) {
            return domain(format!("bandwidth must be positive, got {bandwidth}"));
        }
        let mut fs = Vec::with_capacity(ys.len());
        for y in ys {
            self.domain.point(y)?;
            if distance(x0, y) <= 3.0 * bandwidth {
                return Err(Error::Bias(format!(
                    "|x0 - y| = {} within 3 bandwidths ({bandwidth})",
                    distance(x0, y)
                )));
            }
            fs.push(Functional::Bump {
                center: y.clone(),
                bandwidth,
            });
        }
        let t = self.tally(x0, &fs, &PathOptions::default(), n_paths, seed)?;
        (0..ys.len()).map(|k| t.estimate(k)).collect()
    }

    pub fn green_pointwise(&self, x0: &[f64], y: &[f64], bandwidth: f64, n_paths: u64, seed: u64) -> Result<Estimate> {
        Ok(self.green_pointwise_many(x0, &[y.to_vec()], bandwidth, n_paths, seed)?[0])
    }

    pub fn hitting_prob(&self, x0: &[f64], center: &[f64], radius: f64, n_paths: u64, seed: u64) -> Result<Estimate> {
        check_paths(n_paths)?;
        let opts = PathOptions {
            target: Some((center.to_vec(), radius)),
            horizon: None,
        };
        let t = self.tally(x0, &[], &opts, n_paths, seed)?;
        t.estimate(2)
    }

    pub fn survival(&self, x0: &[f64], horizon: f64, n_paths: u64, seed: u64) -> Result<Estimate> {
        check_paths(n_paths)?;
        if !(horizon > 0.0) {
            return domain(format!("time must be positive, got {horizon}"));
        }
        let opts = PathOptions {
            target: None,
            horizon: Some(horizon),
        };
        let t = self.tally(x0, &[], &opts, n_paths, seed)?;
        t.estimate(3)
    }

    /// Density per unit volume of jump exits landing in the shell `r_in <= |z - center| < r_out`.
    pub fn poisson_kernel_shell(&self, x0: &[f64], center: &[f64], r_in: f64, r_out: f64, n_paths: u64, seed: u64) -> Result<Estimate> {
        check_paths(n_paths)?;
        Ok(self.poisson_kernel_shells(x0, center, &[(r_in, r_out)], n_paths, seed)?[0])
    }

    pub fn poisson_kernel_shells(&self, x0: &[f64], center: &[f64], shells: &[(f64, f64)], n_paths: u64, seed: u64) -> Result<Vec<Estimate>> {
        check_paths(n_paths)?;
        let d = self.spec.d;
        let vols: Vec<f64> = shells
            .iter()
            .map(|&(a, b)| shell_volume(d, a, b))
            .collect();
        let t = self.tally_with(x0, &[], &PathOptions::default(), n_paths, seed, shells.len() + 1, |s, out| {
            if s.exit_mode != ExitMode::JumpedOut || s.stop != StopReason::Exited {
                return;
            }
            let r = distance(&s.exit_position, center);
            out[shells.len()] = 1.0;
            for (k, &(a, b)) in shells.iter().enumerate() {
                if r >= a && r < b {
                    out[k] = 1.0 / vols[k];
                }
            }
        })?;
        if t.sums[shells.len()].iter().sum::<f64>() == 0.0 {
            return Err(Error::InsufficientData("no jump exits recorded".into()));
        }
        (0..shells.len()).map(|k| t.estimate(k)).collect()
    }
}

enum Step {
    Move(usize, f64),
    Killed(ExitMode),
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_paths(n: u64) -> Result<()> {
    if n < 100 {
        return domain(format!("at least 100 paths required, got {n}"));
    }
    Ok(())
}

pub fn shell_volume(d: usize, r_in: f64, r_out: f64) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0 * (r_out - r_in),
        2 => PI * (r_out * r_out - r_in * r_in),
        _ => 4.0 / 3.0 * PI * (r_out.powi(3) - r_in.powi(3)),
    }
}

/// Default smoothing radius `0.4 n^{-1/(d+4)} diam(D)`.
pub fn default_bandwidth(d: usize, n_paths: u64, diameter: f64) -> f64 {
    0.4 * (n_paths as f64).powf(-1.0 / (d as f64 + 4.0)) * diameter
}

pub fn simulate_killed_path(
    spec: &ProcessSpec,
    domain: &Domain,
    x0: &DomainPoint,
    scheme: &SimScheme,
    rng: &mut RngStream,
    functionals: &[Functional],
) -> Result<KilledPathSummary> {
    Simulator::new(spec, domain, scheme)?.simulate_path(&x0.coords, rng, functionals, &PathOptions::default())
}

pub fn estimate_mean_exit_time(spec: &ProcessSpec, domain: &Domain, x0: &DomainPoint, scheme: &SimScheme, n_paths: u64, seed: u64) -> Result<Estimate> {
    Simulator::new(spec, domain, scheme)?.mean_exit_time(&x0.coords, n_paths, seed)
}

pub fn estimate_occupation_functional(spec: &ProcessSpec, domain: &Domain, x0: &DomainPoint, f: &Functional, scheme: &SimScheme, n_paths: u64, seed: u64) -> Result<Estimate> {
    Simulator::new(spec, domain, scheme)?.occupation(&x0.coords, f, n_paths, seed)
}

pub fn estimate_green_pointwise(spec: &ProcessSpec, domain: &Domain, x0: &DomainPoint, y: &DomainPoint, bandwidth: f64, scheme: &SimScheme, n_paths: u64, seed: u64) -> Result<Estimate> {
    Simulator::new(spec, domain, scheme)?.green_pointwise(&x0.coords, &y.coords, bandwidth, n_paths, seed)
}

pub fn estimate_hitting_prob(spec: &ProcessSpec, domain: &Domain, center: &[f64], radius: f64, x0: &DomainPoint, scheme: &SimScheme, n_paths: u64, seed: u64) -> Result<Estimate> {
    Simulator::new(spec, domain, scheme)?.hitting_prob(&x0.coords, center, radius, n_paths, seed)
}

pub fn estimate_poisson_kernel(spec: &ProcessSpec, domain: &Domain, x0: &DomainPoint, center: &[f64], r_in: f64, r_out: f64, scheme: &SimScheme, n_paths: u64, seed: u64) -> Result<Estimate> {
    Simulator::new(spec, domain, scheme)?.poisson_kernel_shell(&x0.coords, center, r_in, r_out, n_paths, seed)
}

pub fn estimate_survival(spec: &ProcessSpec, domain: &Domain, x0: &DomainPoint, t: f64, scheme: &SimScheme, n_paths: u64, seed: u64) -> Result<Estimate> {
    Simulator::new(spec, domain, scheme)?.survival(&x0.coords, t, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> ProcessSpec {
        ProcessSpec::plain(1, 1.0, 0.0).unwrap()
    }

    #[test]
    fn brownian_paths_only_cross() {
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let sim = Simulator::new(&bm(), &dom, &SimScheme::default()).unwrap();
        for p in 0..200 {
            let mut rng = RngStream::new(11, p);
            let s = sim.simulate_path(&[0.0], &mut rng, &[], &PathOptions::default()).unwrap();
            assert_eq!(s.exit_mode, ExitMode::Crossed);
            assert!((s.exit_position[0].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn occupation_of_one_is_exit_time() {
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let spec = ProcessSpec::plain(1, 1.2, 0.7).unwrap();
        let sim = Simulator::new(&spec, &dom, &SimScheme::default()).unwrap();
        let f = Functional::Constant { value: 1.0 };
        let a = sim.occupation(&[0.3], &f, 400, 5).unwrap();
        let b = sim.mean_exit_time(&[0.3], 400, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_exit_time_of_brownian_motion() {
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let sim = Simulator::new(&bm(), &dom, &SimScheme::default()).unwrap();
        let e = sim.mean_exit_time(&[0.0], 20_000, 1).unwrap();
        assert!((e.mean - 0.5).abs() < 3.0 * e.std_error + 0.005, "{e:?}");
    }

    #[test]
    fn interval_occupation_matches_green_integral() {
        // G(x, y) = (x∧y)(1 - x∨y) on (0, 1); integral over (0.4, 0.6) from 0.5 is 0.045
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let sim = Simulator::new(&bm(), &dom, &SimScheme::default()).unwrap();
        let f = Functional::Indicator {
            region: Region::Ball {
                center: vec![0.5],
                radius: 0.1,
            },
        };
        let e = sim.occupation(&[0.5], &f, 20_000, 2).unwrap();
        assert!((e.mean - 0.045).abs() < 3.0 * e.std_error + 5e-4, "{e:?}");
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let dom = Domain::ball_union(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![0.6, 0.6]).unwrap();
        let spec = ProcessSpec::plain(2, 1.0, 1.0).unwrap();
        let a = Simulator::new(&spec, &dom, &SimScheme::default()).unwrap().with_workers(1);
        let b = Simulator::new(&spec, &dom, &SimScheme::default()).unwrap().with_workers(3);
        let ea = a.mean_exit_time(&[-1.0, 0.1], 400, 9).unwrap();
        let eb = b.mean_exit_time(&[-1.0, 0.1], 400, 9).unwrap();
        assert_eq!(ea.mean.to_bits(), eb.mean.to_bits());
        assert_eq!(ea.std_error.to_bits(), eb.std_error.to_bits());
    }

    #[test]
    fn exits_into_other_component_are_jumps() {
        let dom = Domain::interval_union(vec![[-1.5, -0.5], [0.5, 1.5]]).unwrap();
        let spec = ProcessSpec::plain(1, 1.0, 1.0).unwrap();
        let sim = Simulator::new(&spec, &dom, &SimScheme::default()).unwrap();
        let mut visited = 0;
        for p in 0..2000 {
            let mut rng = RngStream::new(3, p);
            let f = Functional::Indicator {
                region: Region::Component { index: 1 },
            };
            let s = sim.simulate_path(&[-1.0], &mut rng, &[f], &PathOptions::default()).unwrap();
            if s.occupation[0] > 0.0 {
                visited += 1;
            }
            if (s.exit_position[0] - 0.5).abs() < 1e-12 || (s.exit_position[0] - 1.5).abs() < 1e-12 {
                // crossing out of the far component is fine only after a jump there
                assert!(s.occupation[0] > 0.0);
            }
            if s.exit_position[0] > 0.5 && s.exit_position[0] < 1.5 {
                panic!("exit position inside the domain");
            }
        }
        assert!(visited > 0);
    }

    #[test]
    fn survival_and_hitting_edge_cases() {
        let disk = Domain::unit_disk();
        let spec = ProcessSpec::plain(2, 1.0, 0.5).unwrap();
        let sim = Simulator::new(&spec, &disk, &SimScheme::default()).unwrap();
        let h = sim.hitting_prob(&[0.0, 0.0], &[0.0, 0.0], 0.2, 100, 1).unwrap();
        assert_eq!(h.mean, 1.0);
        let s = sim.survival(&[0.0, 0.0], 1e-6, 200, 1).unwrap();
        assert_eq!(s.mean, 1.0);
    }

    #[test]
    fn bump_has_unit_mass() {
        use crate::special_fn::{integrate_adaptive, QuadSpec};
        let q = QuadSpec::default();
        let b: f64 = 0.3;
        let f = |r: f64| (1.0 - r * r / (b * b)).powi(2);
        let m1 = 2.0 * integrate_adaptive(f, 0.0, b, &q).unwrap();
        let m2 = 2.0 * std::f64::consts::PI * integrate_adaptive(|r| r * f(r), 0.0, b, &q).unwrap();
        let m3 = 4.0 * std::f64::consts::PI * integrate_adaptive(|r| r * r * f(r), 0.0, b, &q).unwrap();
        assert!((m1 - bump_mass(1, b)).abs() < 1e-12);
        assert!((m2 - bump_mass(2, b)).abs() < 1e-12);
        assert!((m3 - bump_mass(3, b)).abs() < 1e-12);
    }
}
