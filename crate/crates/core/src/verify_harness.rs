//! Experiment drivers: each check turns a bound or identity into a report with
//! empirical constants, confidence intervals and a pass/fail verdict.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain as domain_error, Error, Result};
use crate::geometry::{distance, Domain, DomainKind, SampleStrategy};
use crate::green_bounds::{
    capacity_concentric_with, disk_green_exact, f_ratio, g_bound, interval_green, martin_bound,
    scaling_transform, subordinate_killed_green, threeg_classical, threeg_rhs_2d, threeg_rhs_highd,
    MartinCase, MultiplierCase, ThreeGInput,
};
use crate::levy_model::{ProcessSpec, Variant};
use crate::mc_engine::{
    default_bandwidth, shell_volume, Estimate, ExitMode, Functional, PathOptions, SimScheme,
    Simulator, StopReason, DEFAULT_BATCHES,
};
use crate::sampler::RngStream;
use crate::special_fn::QuadSpec;

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
}

impl Grid {
    /// Cartesian product in row-major order (`x` outer).
    pub fn pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.xs.len() * self.ys.len());
        for x in &self.xs {
            for y in &self.ys {
                out.push((x.clone(), y.clone()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed relative change of a band or constant when the sample is doubled.
    pub band_stability: f64,
    /// Same, for deterministic sweeps (3G).
    pub sweep_stability: f64,
    /// Cauchy tolerance over the last three terms of a limit sequence.
    pub cauchy: f64,
    /// Widening of the coarse band used to count CI violations.
    pub ci_slack: f64,
    /// Relative bias allowance of smoothed Green estimates against exact references.
    pub bias_allowance: f64,
    /// Weights at or below this are compared against the Brownian reference.
    pub reference_weight: f64,
    pub ks_level: f64,
    pub mesh_width: f64,
    pub bandwidth: Option<f64>,
    pub slope: f64,
    pub relative: f64,
    /// Allowed relative deviation of a predicted scaling factor.
    pub factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            band_stability: 0.15,
            sweep_stability: 0.10,
            cauchy: 0.02,
            ci_slack: 1.05,
            bias_allowance: 0.02,
            reference_weight: 1e-3,
            ks_level: 0.01,
            mesh_width: 0.01,
            bandwidth: None,
            slope: 0.3,
            relative: 0.01,
            factor: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: ProcessSpec,
    pub domain: Domain,
    pub grid: Grid,
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: SimScheme,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Worker threads (0 = all cores); never affects results.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.scheme.validate()?;
        if self.domain.dim() != self.spec.d {
            return Err(Error::Config(format!(
                "domain dimension {} does not match process dimension {}",
                self.domain.dim(),
                self.spec.d
            )));
        }
        if self.n_paths < 1000 {
            return Err(Error::Config(format!("n_paths must be at least 1000, got {}", self.n_paths)));
        }
        for p in self.grid.xs.iter().chain(&self.grid.ys) {
            if p.len() != self.spec.d {
                return Err(Error::Config(format!("grid point {p:?} has wrong dimension")));
            }
        }
        Ok(())
    }

    fn simulator(&self, spec: &ProcessSpec, domain: &Domain) -> Result<Simulator> {
        Ok(Simulator::new(spec, domain, &self.scheme)?
            .with_workers(self.workers)
            .with_batches(2 * DEFAULT_BATCHES))
    }

    fn check_pairs(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        for (x, y) in pairs {
            if distance(x, y) == 0.0 {
                return Err(Error::Config(format!("grid pair with coincident points {x:?}")));
            }
        }
        Ok(())
    }
}

fn group_seed(seed: u64, group: usize) -> u64 {
    seed.wrapping_add((group as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

// ---------------------------------------------------------------------------
// statistics

/// Student-t 99% interval from batch means.
pub fn confidence_interval(batch_means: &[f64]) -> Result<[f64; 2]> {
    let b = batch_means.len();
    if b < 20 {
        return Err(Error::Statistics(format!("need at least 20 batches, got {b}")));
    }
    let n = b as f64;
    let mean = batch_means.iter().sum::<f64>() / n;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Statistics(e.to_string()))?
        .inverse_cdf(0.995);
    let half = t * (var / n).sqrt();
    Ok([mean - half, mean + half])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstabilityDiagnostic {
    /// Largest deviation of a batch mean from the median, in robust (MAD) units.
    pub outlier_score: f64,
    pub unstable: bool,
}

const OUTLIER_LIMIT: f64 = 5.0;

/// Flags batch means whose spread is dominated by single batches (heavy tails).
pub fn batch_instability(batch_means: &[f64]) -> Result<InstabilityDiagnostic> {
    if batch_means.len() < 20 {
        return Err(Error::Statistics(format!(
            "need at least 20 batches, got {}",
            batch_means.len()
        )));
    }
    let med = median(batch_means);
    let dev: Vec<f64> = batch_means.iter().map(|m| (m - med).abs()).collect();
    let mad = 1.4826 * median(&dev);
    let worst = dev.iter().cloned().fold(0.0, f64::max);
    let outlier_score = if mad > 0.0 {
        worst / mad
    } else if worst > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(InstabilityDiagnostic {
        outlier_score,
        unstable: outlier_score > OUTLIER_LIMIT,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut stat: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = a[i].min(b[j]);
        while i < n1 && a[i] <= v {
            i += 1;
        }
        while j < n2 && b[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * stat;
    Ok(KsResult {
        statistic: stat,
        p_value: kolmogorov_q(lam),
        n1,
        n2,
    })
}

fn kolmogorov_q(lam: f64) -> f64 {
    if lam < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
}

impl Band {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Self { min, max }
    }

    /// `max / min`.
    pub fn width(&self) -> f64 {
        self.max / self.min
    }

    pub fn is_finite_positive(&self) -> bool {
        self.min > 0.0 && self.max.is_finite()
    }

    /// Largest relative change of either endpoint.
    pub fn shift(&self, other: &Band) -> f64 {
        (self.min / other.min - 1.0).abs().max((self.max / other.max - 1.0).abs())
    }
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new / old - 1.0).abs()
}

// ---------------------------------------------------------------------------
// pointwise Green estimates on shared paths

/// Per-pair batch sums of pointwise Green estimates over `2n` paths; the first half of the
/// batches is exactly the `n`-path run.
struct GreenRun {
    counts: Vec<u64>,
    sums: Vec<Vec<f64>>,
}

impl GreenRun {
    fn full(&self, k: usize) -> Result<Estimate> {
        Estimate::from_batches(&self.sums[k], &self.counts)
    }

    fn half(&self, k: usize) -> Result<Estimate> {
        let h = self.counts.len() / 2;
        Estimate::from_batches(&self.sums[k][..h], &self.counts[..h])
    }

    fn batch_means(&self, k: usize) -> Vec<f64> {
        self.sums[k]
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| s / c as f64)
            .collect()
    }

    /// Batch sums of several pairs added together.
    fn pooled(&self, ks: &[usize]) -> Vec<f64> {
        (0..self.counts.len())
            .map(|b| ks.iter().map(|&k| self.sums[k][b]).sum())
            .collect()
    }
}

fn interval_bounds(domain: &Domain) -> Option<(f64, f64)> {
    match domain.kind() {
        DomainKind::IntervalUnion { intervals } => Some((intervals[0][0], intervals[intervals.len() - 1][1])),
        _ => None,
    }
}

/// Green estimates at `pairs` using one path family per distinct `x`: a mesh occupation
/// density in one dimension, a smoothing bump otherwise. `scale` dilates the mesh width
/// and bandwidth (used by the scaling check).
fn green_run(
    cfg: &ExperimentConfig,
    spec: &ProcessSpec,
    domain: &Domain,
    pairs: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
    scale: f64,
) -> Result<GreenRun> {
    let sim = cfg.simulator(spec, domain)?;
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (k, (x, _)) in pairs.iter().enumerate() {
        match groups.iter_mut().find(|(gx, _)| gx == x) {
            Some(g) => g.1.push(k),
            None => groups.push((x.clone(), vec![k])),
        }
    }
    let mut sums = vec![Vec::new(); pairs.len()];
    let mut counts = Vec::new();
    for (g, (x, members)) in groups.iter().enumerate() {
        domain.point(x)?;
        let (functionals, slot): (Vec<Functional>, Vec<usize>) = if spec.d == 1 {
            let (lo, hi) = interval_bounds(domain).ok_or_else(|| Error::UnsupportedDomain("one-dimensional mesh".into()))?;
            let width = cfg.tolerances.mesh_width * scale;
            let cells = ((hi - lo) / width).ceil() as usize;
            let slot = members
                .iter()
                .map(|&k| {
                    let y = &pairs[k].1;
                    domain.point(y)?;
                    Ok((((y[0] - lo) / width).floor() as usize).min(cells - 1))
                })
                .collect::<Result<Vec<_>>>()?;
            (vec![Functional::Mesh { lo, width, cells }], slot)
        } else {
            let bw = cfg
                .tolerances
                .bandwidth
                .unwrap_or_else(|| default_bandwidth(spec.d, cfg.n_paths, cfg.domain.diameter()))
                * scale;
            let mut fs = Vec::new();
            for &k in members {
                let y = &pairs[k].1;
                domain.point(y)?;
                if distance(x, y) <= 3.0 * bw {
                    return Err(Error::Bias(format!(
                        "|x - y| = {} within 3 bandwidths ({bw}) at x = {x:?}, y = {y:?}",
                        distance(x, y)
                    )));
                }
                fs.push(Functional::Bump {
                    center: y.clone(),
                    bandwidth: bw,
                });
            }
            let slot = (0..members.len()).collect();
            (fs, slot)
        };
        let tally = sim.tally(x, &functionals, &PathOptions::default(), 2 * cfg.n_paths, group_seed(seed, g))?;
        for (&k, &s) in members.iter().zip(&slot) {
            sums[k] = tally.sums[s].clone();
        }
        counts = tally.counts.clone();
    }
    Ok(GreenRun { counts, sums })
}

fn exact_reference(domain: &Domain, x: &[f64], y: &[f64]) -> Option<f64> {
    match domain.kind() {
        DomainKind::Ball { center, radius } if center.len() == 2 && *radius == 1.0 && center.iter().all(|c| *c == 0.0) => {
            disk_green_exact(x, y).ok()
        }
        DomainKind::IntervalUnion { intervals } if intervals.len() == 1 => {
            Some(interval_green(intervals[0][0], intervals[0][1], x[0], y[0]))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// two-sided comparability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub estimate: Estimate,
    pub bound_value: f64,
    pub same_component: bool,
    pub ratio: f64,
    pub ratio_ci: [f64; 2],
    /// Killed Brownian Green function where it is known in closed form.
    pub reference: Option<f64>,
    pub unstable_batches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub pair_grid: Vec<PairRatio>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Band from the first half of the paths.
    pub half_band: Band,
    pub band_change: f64,
    pub ci_violations: usize,
    pub stable_under_refinement: bool,
    /// Closed-form agreement at near-zero weight, when a reference exists.
    pub reference_ok: Option<bool>,
    pub pass: bool,
}

pub fn run_comparability(cfg: &ExperimentConfig) -> Result<ComparabilityReport> {
    cfg.validate()?;
    if !(cfg.spec.a > 0.0) {
        return domain_error("comparability needs a > 0");
    }
    let pairs = cfg.grid.pairs();
    cfg.check_pairs(&pairs)?;
    let run = green_run(cfg, &cfg.spec, &cfg.domain, &pairs, cfg.seed, 1.0)?;
    let tol = &cfg.tolerances;
    let mut rows = Vec::with_capacity(pairs.len());
    let mut half_ratios = Vec::with_capacity(pairs.len());
    for (k, (x, y)) in pairs.iter().enumerate() {
        let b = g_bound(&cfg.spec, &cfg.domain, x, y)?;
        let est = run.full(k)?;
        half_ratios.push(run.half(k)?.mean / b.value);
        let reference = if cfg.spec.a <= tol.reference_weight && cfg.spec.variant == Variant::Plain {
            exact_reference(&cfg.domain, x, y)
        } else {
            None
        };
        rows.push(PairRatio {
            x: x.clone(),
            y: y.clone(),
            estimate: est,
            bound_value: b.value,
            same_component: b.same_component,
            ratio: est.mean / b.value,
            ratio_ci: [est.ci99[0] / b.value, est.ci99[1] / b.value],
            reference,
            unstable_batches: batch_instability(&run.batch_means(k))?.unstable,
        });
    }
    let band = Band::of(rows.iter().map(|r| r.ratio));
    let half_band = Band::of(half_ratios);
    let band_change = rel_change(band.width(), half_band.width());
    let lo = half_band.min / tol.ci_slack;
    let hi = half_band.max * tol.ci_slack;
    let ci_violations = rows
        .iter()
        .filter(|r| r.ratio_ci[1] < lo || r.ratio_ci[0] > hi)
        .count();
    let reference_ok = if rows.iter().any(|r| r.reference.is_some()) {
        Some(rows.iter().all(|r| match r.reference {
            Some(g) => {
                let e = &r.estimate;
                (e.mean - g).abs() <= 3.0 * e.std_error + tol.bias_allowance * g
                    && (0.9..=1.1).contains(&(e.mean / g))
            }
            None => true,
        }))
    } else {
        None
    };
    let stable = band_change <= tol.band_stability;
    let pass = band.is_finite_positive() && stable && reference_ok.unwrap_or(true);
    Ok(ComparabilityReport {
        pair_grid: rows,
        ratio_min: band.min,
        ratio_max: band.max,
        half_band,
        band_change,
        ci_violations,
        stable_under_refinement: stable,
        reference_ok,
        pass,
    })
}

// ---------------------------------------------------------------------------
// cross-component weight scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub low: Estimate,
    pub high: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScalingReport {
    pub a_low: f64,
    pub a_high: f64,
    /// `(a_high / a_low)^alpha`.
    pub predicted: f64,
    pub pairs: Vec<WeightPair>,
    /// Ratio of the pooled cross-component estimates.
    pub factor: f64,
    pub factor_ci: [f64; 2],
    pub pass: bool,
    pub inconclusive: bool,
}

/// Cross-component Green estimates at two weights; their ratio should follow `a^alpha`.
pub fn run_weight_scaling_check(cfg: &ExperimentConfig, a_low: f64, a_high: f64) -> Result<WeightScalingReport> {
    cfg.validate()?;
    if !(a_low > 0.0 && a_high > a_low) {
        return domain_error("weights must satisfy 0 < a_low < a_high");
    }
    let pairs: Vec<_> = cfg
        .grid
        .pairs()
        .into_iter()
        .filter(|(x, y)| cfg.domain.component_of(x) != cfg.domain.component_of(y))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Config("no cross-component pairs in the grid".into()));
    }
    let low_spec = cfg.spec.with_weight(a_low)?;
    let high_spec = cfg.spec.with_weight(a_high)?;
    let low = green_run(cfg, &low_spec, &cfg.domain, &pairs, cfg.seed, 1.0)?;
    let high = green_run(cfg, &high_spec, &cfg.domain, &pairs, group_seed(cfg.seed, 1000), 1.0)?;
    let all: Vec<usize> = (0..pairs.len()).collect();
    let pl = Estimate::from_batches(&low.pooled(&all), &low.counts)?;
    let ph = Estimate::from_batches(&high.pooled(&all), &high.counts)?;
    let predicted = (a_high / a_low).powf(cfg.spec.alpha);
    let inconclusive = !(pl.mean > 0.0 && ph.mean > 0.0);
    let (factor, factor_ci) = if inconclusive {
        (f64::NAN, [f64::NAN, f64::NAN])
    } else {
        let f = ph.mean / pl.mean;
        let rel = ((ph.std_error / ph.mean).powi(2) + (pl.std_error / pl.mean).powi(2)).sqrt();
        (f, [f * (1.0 - 2.576 * rel), f * (1.0 + 2.576 * rel)])
    };
    let tol = cfg.tolerances.factor;
    let pass = !inconclusive
        && factor_ci[0] <= predicted * (1.0 + tol)
        && factor_ci[1] >= predicted * (1.0 - tol);
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(k, (x, y))| {
            Ok(WeightPair {
                x: x.clone(),
                y: y.clone(),
                low: low.full(k)?,
                high: high.full(k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightScalingReport {
        a_low,
        a_high,
        predicted,
        pairs: rows,
        factor,
        factor_ci,
        pass,
        inconclusive,
    })
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lam: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub direct: Estimate,
    /// Image-problem estimate multiplied by the prefactor.
    pub scaled: Estimate,
    pub prefactor: f64,
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Largest relative defect of the bound identity over same-component pairs.
    pub bound_identity_max_err: f64,
    /// Largest relative deviation of cross-component bound ratios from `lam^{alpha-2}`.
    pub cross_component_defect_err: Option<f64>,
    pub pass: bool,
}

/// Relative defect of `g(x, y) = lam^{d-2} g_image(lam x, lam y)`, and whether the pair
/// is in one component. Cross-component pairs are compared against `lam^{alpha-2}` instead.
pub fn bound_scaling_defect(spec: &ProcessSpec, domain: &Domain, x: &[f64], y: &[f64], lam: f64) -> Result<(f64, bool)> {
    let sp = scaling_transform(spec, domain, x, y, lam)?;
    let g = g_bound(spec, domain, x, y)?;
    let gs = g_bound(&sp.spec, &sp.domain, &sp.x, &sp.y)?;
    let ratio = sp.prefactor * gs.value / g.value;
    if g.same_component {
        Ok(((ratio - 1.0).abs(), true))
    } else {
        let expect = lam.powf(spec.alpha - 2.0);
        Ok(((ratio / expect - 1.0).abs(), false))
    }
}

pub fn run_scaling_check(cfg: &ExperimentConfig, lam_list: &[f64]) -> Result<ScalingReport> {
    cfg.validate()?;
    let pairs = cfg.grid.pairs();
    cfg.check_pairs(&pairs)?;
    let direct = green_run(cfg, &cfg.spec, &cfg.domain, &pairs, cfg.seed, 1.0)?;
    let mut rows = Vec::new();
    let mut same_err: f64 = 0.0;
    let mut cross_err: Option<f64> = None;
    for &lam in lam_list {
        if !(lam > 0.0) {
            return domain_error(format!("scale factor must be positive, got {lam}"));
        }
        let images = pairs
            .iter()
            .map(|(x, y)| scaling_transform(&cfg.spec, &cfg.domain, x, y, lam))
            .collect::<Result<Vec<_>>>()?;
        for (x, y) in &pairs {
            let (err, same) = bound_scaling_defect(&cfg.spec, &cfg.domain, x, y, lam)?;
            if same {
                same_err = same_err.max(err);
            } else {
                cross_err = Some(cross_err.unwrap_or(0.0).max(err));
            }
        }
        let img_pairs: Vec<_> = images.iter().map(|p| (p.x.clone(), p.y.clone())).collect();
        let image = green_run(cfg, &images[0].spec, &images[0].domain, &img_pairs, cfg.seed, lam)?;
        for (k, (x, y)) in pairs.iter().enumerate() {
            let d = direct.full(k)?;
            let s = image.full(k)?;
            let pf = images[k].prefactor;
            let scaled = Estimate {
                mean: s.mean * pf,
                std_error: s.std_error * pf,
                n: s.n,
                ci99: [s.ci99[0] * pf, s.ci99[1] * pf],
            };
            rows.push(ScalingRow {
                lam,
                x: x.clone(),
                y: y.clone(),
                direct: d,
                scaled,
                prefactor: pf,
                overlap: d.overlaps(&scaled),
            });
        }
    }
    let pass = rows.iter().all(|r| r.overlap) && same_err <= 1e-12;
    Ok(ScalingReport {
        rows,
        bound_identity_max_err: same_err,
        cross_component_defect_err: cross_err,
        pass,
    })
}

// ---------------------------------------------------------------------------
// 3G sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeGReport {
    pub dim: usize,
    pub samples: u64,
    /// `sup LHS / RHS` over all samples and over the first half.
    pub constant: f64,
    pub constant_half: f64,
    pub stable: bool,
    pub case_counts: Vec<(MultiplierCase, u64)>,
    pub cases_covered: bool,
    /// The `y = z` specialization against the classical kernel.
    pub classical_constant: Option<f64>,
    pub collapse_max_err: Option<f64>,
    pub pass: bool,
}

fn cases_possible(n_components: usize) -> Vec<MultiplierCase> {
    MultiplierCase::LISTED
        .into_iter()
        .filter(|c| match c {
            MultiplierCase::SameComponent => true,
            MultiplierCase::AllDifferent => n_components >= 4,
            _ => n_components >= 2,
        })
        .collect()
}

const MIN_CASE_HITS: u64 = 100;

/// Deterministic sweep of `g(x,y) g(z,w) / g(x,w)` against the 3G right-hand side over
/// `2 n_quadruples` uniform draws (triples `x, y, z` in the plane).
pub fn run_3g_check(cfg: &ExperimentConfig, n_quadruples: u64) -> Result<ThreeGReport> {
    cfg.spec.validate()?;
    let d = cfg.spec.d;
    if d < 2 {
        return domain_error("3G sweep needs d >= 2");
    }
    if cfg.domain.dim() != d {
        return Err(Error::Config("domain and process dimensions differ".into()));
    }
    if n_quadruples == 0 {
        return domain_error("need at least one sample");
    }
    let spec = &cfg.spec;
    let dom = &cfg.domain;
    let mut rng = RngStream::new(cfg.seed, 0);
    let total = 2 * n_quadruples;
    let (mut sup, mut sup_half) = (0.0f64, 0.0f64);
    let mut classical: f64 = 0.0;
    let mut collapse: f64 = 0.0;
    let mut counts: Vec<(MultiplierCase, u64)> = MultiplierCase::LISTED.iter().map(|c| (*c, 0)).collect();
    counts.push((MultiplierCase::Other, 0));
    let g = |p: &[f64], q: &[f64]| g_bound(spec, dom, p, q).map(|b| b.value);
    let mut top: Vec<(f64, Vec<Vec<f64>>)> = Vec::new();
    let mut top_half: Vec<(f64, Vec<Vec<f64>>)> = Vec::new();
    let mut i = 0;
    while i < total {
        let mut draw = || dom.sample_interior(&mut rng, SampleStrategy::Uniform).map(|p| p.coords);
        let (x, y, z) = (draw()?, draw()?, draw()?);
        let w = if d >= 3 { draw()? } else { z.clone() };
        let ratio = if d >= 3 {
            let q = ThreeGInput::new(dom, &x, &y, &z, &w)?;
            let lhs = match (g(&x, &y), g(&z, &w), g(&x, &w)) {
                (Ok(a), Ok(b), Ok(c)) => a * b / c,
                (Err(Error::Singularity), ..) | (_, Err(Error::Singularity), _) | (.., Err(Error::Singularity)) => continue,
                (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => return Err(e),
            };
            let rhs = threeg_rhs_highd(spec, &q)?;
            let case = q.multiplier(spec)?.case;
            if let Some(c) = counts.iter_mut().find(|c| c.0 == case) {
                c.1 += 1;
            }
            // y = z specialization
            let qz = ThreeGInput::new(dom, &x, &z, &z, &w)?;
            let full = threeg_rhs_highd(spec, &qz)?;
            let cl = threeg_classical(spec, dom, &x, &z, &w)?;
            collapse = collapse.max((full - cl).abs() / cl.abs());
            let lhs_cl = g(&x, &z)? * g(&z, &w)? / g(&x, &w)?;
            classical = classical.max(lhs_cl / cl);
            lhs / rhs
        } else {
            let lhs = match (g(&x, &y), g(&y, &z), g(&x, &z)) {
                (Ok(a), Ok(b), Ok(c)) => a * b / c,
                (Err(Error::Singularity), ..) | (_, Err(Error::Singularity), _) | (.., Err(Error::Singularity)) => continue,
                (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => return Err(e),
            };
            let c = dom.component_of(&x);
            let same = c == dom.component_of(&y) && c == dom.component_of(&z);
            let case = if same { MultiplierCase::SameComponent } else { MultiplierCase::Other };
            if let Some(e) = counts.iter_mut().find(|e| e.0 == case) {
                e.1 += 1;
            }
            lhs / threeg_rhs_2d(dom, &x, &y, &z)?
        };
        sup = sup.max(ratio);
        let pts = if d >= 3 { vec![x, y, z, w] } else { vec![x, y, z] };
        if i < n_quadruples {
            sup_half = sup_half.max(ratio);
            keep_top(&mut top_half, ratio, &pts);
        }
        keep_top(&mut top, ratio, &pts);
        i += 1;
    }
    // the sup is approached slowly by uniform draws; climb from the best draws
    let mut climb_rng = RngStream::new(cfg.seed, 1);
    for (start, best) in [(&top_half, &mut sup_half), (&top, &mut sup)] {
        for (_, pts) in start {
            *best = best.max(climb_3g(spec, dom, pts, &mut climb_rng));
        }
    }
    // the full sweep contains the half sweep
    sup = sup.max(sup_half);
    let stable = sup.is_finite() && rel_change(sup, sup_half) <= cfg.tolerances.sweep_stability;
    let cases_covered = if d >= 3 {
        cases_possible(dom.n_components())
            .iter()
            .all(|c| counts.iter().any(|e| e.0 == *c && e.1 >= MIN_CASE_HITS))
    } else {
        true
    };
    let collapse_max_err = (d >= 3).then_some(collapse);
    let pass = sup > 0.0 && stable && cases_covered && collapse_max_err.is_none_or(|e| e <= 1e-12);
    Ok(ThreeGReport {
        dim: d,
        samples: total,
        constant: sup,
        constant_half: sup_half,
        stable,
        case_counts: counts,
        cases_covered,
        classical_constant: (d >= 3).then_some(classical),
        collapse_max_err,
        pass,
    })
}

const CLIMB_STARTS: usize = 16;
const CLIMB_STEPS: usize = 1500;

fn keep_top(top: &mut Vec<(f64, Vec<Vec<f64>>)>, ratio: f64, pts: &[Vec<f64>]) {
    if top.len() >= CLIMB_STARTS && ratio <= top[top.len() - 1].0 {
        return;
    }
    top.push((ratio, pts.to_vec()));
    top.sort_by(|a, b| b.0.total_cmp(&a.0));
    top.truncate(CLIMB_STARTS);
}

/// `LHS / RHS` of the 3G inequality for `(x, y, z, w)` (or `(x, y, z)` in the plane).
fn threeg_ratio(spec: &ProcessSpec, dom: &Domain, p: &[Vec<f64>]) -> Option<f64> {
    let g = |a: &[f64], b: &[f64]| g_bound(spec, dom, a, b).ok().map(|v| v.value);
    if p.len() == 4 {
        let q = ThreeGInput::new(dom, &p[0], &p[1], &p[2], &p[3]).ok()?;
        let lhs = g(&p[0], &p[1])? * g(&p[2], &p[3])? / g(&p[0], &p[3])?;
        Some(lhs / threeg_rhs_highd(spec, &q).ok()?)
    } else {
        let lhs = g(&p[0], &p[1])? * g(&p[1], &p[2])? / g(&p[0], &p[2])?;
        Some(lhs / threeg_rhs_2d(dom, &p[0], &p[1], &p[2]).ok()?)
    }
}

/// Greedy random-perturbation ascent of the 3G ratio with a shrinking step.
fn climb_3g(spec: &ProcessSpec, dom: &Domain, start: &[Vec<f64>], rng: &mut RngStream) -> f64 {
    let mut pts = start.to_vec();
    let Some(mut best) = threeg_ratio(spec, dom, &pts) else {
        return 0.0;
    };
    let scale = 0.1 * dom.diameter();
    for k in 0..CLIMB_STEPS {
        let step = scale * (1.0 - k as f64 / CLIMB_STEPS as f64).powi(2) + 1e-6;
        let which = (rng.open_uniform() * pts.len() as f64) as usize % pts.len();
        let old = pts[which].clone();
        for c in pts[which].iter_mut() {
            *c += step * rng.normal();
        }
        match threeg_ratio(spec, dom, &pts) {
            Some(r) if r > best => best = r,
            _ => pts[which] = old,
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Martin kernel limit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartinRow {
    pub x: Vec<f64>,
    pub case: MartinCase,
    pub units: i32,
    pub limit_units: i32,
    pub ratios: Vec<f64>,
    pub limit: f64,
    pub cauchy_spread: f64,
    pub converged: bool,
    pub h_value: f64,
    /// `limit / h`.
    pub band_value: f64,
    /// Same, with the sequence continued four more halvings.
    pub refined_band_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartinReport {
    pub z: Vec<f64>,
    pub x0: Vec<f64>,
    pub rows: Vec<MartinRow>,
    pub band: Band,
    pub refined_band: Band,
    pub stable: bool,
    pub pass: bool,
}

fn martin_ratios(cfg: &ExperimentConfig, x: &[f64], x0: &[f64], z: &[f64], normal: &[f64], deltas: &[f64]) -> Result<Vec<f64>> {
    deltas
        .iter()
        .map(|&dl| {
            let y: Vec<f64> = z.iter().zip(normal).map(|(zi, ni)| zi - dl * ni).collect();
            let num = g_bound(&cfg.spec, &cfg.domain, x, &y)?.value;
            let den = g_bound(&cfg.spec, &cfg.domain, x0, &y)?.value;
            Ok(num / den)
        })
        .collect()
}

/// Boundary limit of `g(x, y) / g(x0, y)` as `y -> z` along the inward normal. The
/// reference point is the first grid point; every grid `x` is evaluated.
pub fn run_martin_limit_check(cfg: &ExperimentConfig, z: &[f64], deltas: &[f64]) -> Result<MartinReport> {
    cfg.spec.validate()?;
    if deltas.len() < 3 {
        return domain_error("need at least three distances");
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) || !(deltas[deltas.len() - 1] > 0.0) {
        return domain_error("distance sequence must be positive and decreasing");
    }
    let Some(cz) = cfg.domain.boundary_owner(z) else {
        return domain_error(format!("{z:?} is not on the boundary"));
    };
    let x0 = cfg
        .grid
        .xs
        .first()
        .ok_or_else(|| Error::Config("grid needs a reference point".into()))?
        .clone();
    let mut normal = vec![0.0; z.len()];
    cfg.domain.outward_normal(cz, z, &mut normal);
    let last = deltas[deltas.len() - 1];
    let mut refined = deltas.to_vec();
    refined.extend((1..=4).map(|k| last / f64::from(1 << k)));
    let mut rows = Vec::new();
    for x in &cfg.grid.xs {
        let ratios = martin_ratios(cfg, x, &x0, z, &normal, deltas)?;
        let tail = &ratios[ratios.len() - 3..];
        let spread = Band::of(tail.iter().cloned()).width() - 1.0;
        let limit = ratios[ratios.len() - 1];
        let refined_limit = *martin_ratios(cfg, x, &x0, z, &normal, &refined)?.last().unwrap_or(&limit);
        let h = martin_bound(&cfg.spec, &cfg.domain, x, z, &x0)?;
        let h0 = martin_bound(&cfg.spec, &cfg.domain, &x0, z, &x0)?;
        // the ratio is normalized at x0, so compare against h(x) / h(x0)
        let h_value = h.value / h0.value;
        rows.push(MartinRow {
            x: x.clone(),
            case: h.case,
            units: h.units,
            limit_units: h.limit_units,
            ratios,
            limit,
            cauchy_spread: spread,
            converged: spread <= cfg.tolerances.cauchy,
            h_value,
            band_value: limit / h_value,
            refined_band_value: refined_limit / h_value,
        });
    }
    let band = Band::of(rows.iter().map(|r| r.band_value));
    let refined_band = Band::of(rows.iter().map(|r| r.refined_band_value));
    let stable = band.shift(&refined_band) <= cfg.tolerances.cauchy;
    let pass = rows.iter().all(|r| r.converged) && band.is_finite_positive() && stable;
    Ok(MartinReport {
        z: z.to_vec(),
        x0,
        rows,
        band,
        refined_band,
        stable,
        pass,
    })
}

// ---------------------------------------------------------------------------
// subordinate killed lower bound

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinateRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub estimate: Estimate,
    pub r_value: f64,
    /// `log(1 + f)` in the plane, the one-dimensional bound shape otherwise.
    pub log_form: f64,
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinateReport {
    pub rows: Vec<SubordinateRow>,
    /// `min R / log_form` over the grid.
    pub r_log_constant: f64,
    /// `min estimate / log_form`, all paths and first half.
    pub mc_log_constant: f64,
    pub mc_log_constant_half: f64,
    pub stable: bool,
    pub pass: bool,
}

pub fn run_subordinate_lower_check(cfg: &ExperimentConfig) -> Result<SubordinateReport> {
    cfg.validate()?;
    let single = match cfg.domain.kind() {
        DomainKind::IntervalUnion { intervals } => intervals.len() == 1,
        DomainKind::Ball { .. } => cfg.spec.d == 2,
        _ => false,
    };
    if !single {
        return Err(Error::UnsupportedDomain("subordinate check needs one interval or a disk".into()));
    }
    let pairs = cfg.grid.pairs();
    cfg.check_pairs(&pairs)?;
    let run = green_run(cfg, &cfg.spec, &cfg.domain, &pairs, cfg.seed, 1.0)?;
    let mut rows = Vec::new();
    let mut half_min = f64::INFINITY;
    for (k, (x, y)) in pairs.iter().enumerate() {
        let est = run.full(k)?;
        let r_value = subordinate_killed_green(&cfg.spec, &cfg.domain, x, y)?;
        let log_form = if cfg.spec.d == 2 {
            f_ratio(&cfg.domain, x, y)?.ln_1p()
        } else {
            let shape = ProcessSpec::plain(1, cfg.spec.alpha, 0.0)?;
            g_bound(&shape, &cfg.domain, x, y)?.value
        };
        half_min = half_min.min(run.half(k)?.mean / log_form);
        rows.push(SubordinateRow {
            x: x.clone(),
            y: y.clone(),
            estimate: est,
            r_value,
            log_form,
            dominates: est.mean + 3.0 * est.std_error >= r_value,
        });
    }
    let r_log_constant = rows.iter().map(|r| r.r_value / r.log_form).fold(f64::INFINITY, f64::min);
    let mc = rows.iter().map(|r| r.estimate.mean / r.log_form).fold(f64::INFINITY, f64::min);
    let stable = mc > 0.0 && rel_change(mc, half_min) <= cfg.tolerances.band_stability;
    let pass = rows.iter().all(|r| r.dominates) && r_log_constant > 0.0 && stable;
    Ok(SubordinateReport {
        rows,
        r_log_constant,
        mc_log_constant: mc,
        mc_log_constant_half: half_min,
        stable,
        pass,
    })
}

// ---------------------------------------------------------------------------
// relativistic and truncated perturbations

fn variant_spec(base: &ProcessSpec, variant: Variant, domain: &Domain) -> Result<ProcessSpec> {
    if let Variant::Truncated { lambda } = variant {
        if lambda.is_finite() && !domain.is_roughly_connected(lambda) {
            return Err(Error::Config(format!(
                "domain is not {lambda}-roughly connected (component gap {})",
                domain.gap()
            )));
        }
    }
    ProcessSpec::new(base.d, base.alpha, 1.0, variant, base.m_cap.max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub variant_estimate: Estimate,
    pub plain_estimate: Estimate,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub variant: Variant,
    pub rows: Vec<PerturbationRow>,
    pub band: Band,
    pub half_band: Band,
    pub band_change: f64,
    pub stable: bool,
    pub pass: bool,
}

/// Green estimates of a variant against the plain process with `a = 1` on the same grid.
pub fn run_perturbation_check(cfg: &ExperimentConfig, variant: Variant) -> Result<PerturbationReport> {
    cfg.validate()?;
    if variant == Variant::Plain {
        return domain_error("perturbation check needs a relativistic or truncated variant");
    }
    let vspec = variant_spec(&cfg.spec, variant, &cfg.domain)?;
    let plain = ProcessSpec::plain(cfg.spec.d, cfg.spec.alpha, 1.0)?;
    let pairs = cfg.grid.pairs();
    cfg.check_pairs(&pairs)?;
    let vr = green_run(cfg, &vspec, &cfg.domain, &pairs, group_seed(cfg.seed, 2000), 1.0)?;
    let pr = green_run(cfg, &plain, &cfg.domain, &pairs, cfg.seed, 1.0)?;
    let mut rows = Vec::new();
    let mut half = Vec::new();
    for (k, (x, y)) in pairs.iter().enumerate() {
        let v = vr.full(k)?;
        let p = pr.full(k)?;
        half.push(vr.half(k)?.mean / pr.half(k)?.mean);
        rows.push(PerturbationRow {
            x: x.clone(),
            y: y.clone(),
            variant_estimate: v,
            plain_estimate: p,
            ratio: v.mean / p.mean,
        });
    }
    let band = Band::of(rows.iter().map(|r| r.ratio));
    let half_band = Band::of(half);
    let band_change = band.shift(&half_band);
    let stable = band_change <= cfg.tolerances.band_stability;
    Ok(PerturbationReport {
        variant,
        rows,
        band,
        half_band,
        band_change,
        stable,
        pass: band.is_finite_positive() && stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantIdentityReport {
    pub variant: Variant,
    pub ks: KsResult,
    pub plain_mean: f64,
    pub variant_mean: f64,
    pub pass: bool,
}

/// Two-sample test of exit times: a variant that reduces to the plain process
/// (`m = 0`, `lambda = inf`) against the plain process with `a = 1`.
pub fn run_variant_identity_check(cfg: &ExperimentConfig, variant: Variant) -> Result<VariantIdentityReport> {
    cfg.validate()?;
    let x0 = cfg.grid.xs.first().ok_or_else(|| Error::Config("grid needs a start point".into()))?;
    let vspec = variant_spec(&cfg.spec, variant, &cfg.domain)?;
    let plain = ProcessSpec::plain(cfg.spec.d, cfg.spec.alpha, 1.0)?;
    let a = cfg.simulator(&plain, &cfg.domain)?.exit_times(x0, cfg.n_paths, cfg.seed)?;
    let b = cfg
        .simulator(&vspec, &cfg.domain)?
        .exit_times(x0, cfg.n_paths, group_seed(cfg.seed, 3000))?;
    let ks = ks_two_sample(&a, &b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(VariantIdentityReport {
        variant,
        ks,
        plain_mean: mean(&a),
        variant_mean: mean(&b),
        pass: ks.p_value >= cfg.tolerances.ks_level,
    })
}

// ---------------------------------------------------------------------------
// capacity

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub r: f64,
    pub capacity: f64,
    /// `capacity * log(1/r)`.
    pub product: f64,
    /// Relative change of the capacity between two quadrature tolerances.
    pub tolerance_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub rows: Vec<CapacityRow>,
    pub band: Band,
    pub pass: bool,
}

pub fn run_capacity_check(r_list: &[f64]) -> Result<CapacityReport> {
    if r_list.is_empty() {
        return domain_error("empty radius list");
    }
    let loose = QuadSpec::new(1e-8, 1e-12, 200)?;
    let rows = r_list
        .iter()
        .map(|&r| {
            let capacity = capacity_concentric_with(r, &QuadSpec::tight())?;
            let coarse = capacity_concentric_with(r, &loose)?;
            Ok(CapacityRow {
                r,
                capacity,
                product: capacity * (1.0 / r).ln(),
                tolerance_change: rel_change(coarse, capacity),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let band = Band::of(rows.iter().map(|r| r.product));
    let pass = band.is_finite_positive() && band.width() < 10.0 && rows.iter().all(|r| r.tolerance_change <= 1e-6);
    Ok(CapacityReport { rows, band, pass })
}

// ---------------------------------------------------------------------------
// exit time, survival, Poisson kernel

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeRow {
    pub x: Vec<f64>,
    pub delta: f64,
    pub estimate: Estimate,
    /// Same seed with half the base step.
    pub halved_step: Estimate,
    pub exact: Option<f64>,
    pub step_change: f64,
    pub per_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeReport {
    pub rows: Vec<ExitTimeRow>,
    pub per_delta_band: Band,
    pub pass: bool,
}

fn exact_exit_time(spec: &ProcessSpec, domain: &Domain, x: &[f64]) -> Option<f64> {
    if spec.a != 0.0 || spec.variant != Variant::Plain {
        return None;
    }
    match domain.kind() {
        DomainKind::IntervalUnion { intervals } => {
            let c = domain.component_of(x)?;
            Some((x[0] - intervals[c][0]) * (intervals[c][1] - x[0]) / 2.0)
        }
        DomainKind::Ball { center, radius } => {
            Some((radius * radius - distance(x, center).powi(2)) / (2.0 * spec.d as f64))
        }
        _ => None,
    }
}

/// Mean exit times at the grid points, with a step-halving rerun and the closed form
/// where the process is Brownian.
pub fn run_exit_time_check(cfg: &ExperimentConfig) -> Result<ExitTimeReport> {
    cfg.validate()?;
    let sim = cfg.simulator(&cfg.spec, &cfg.domain)?;
    let mut fine_scheme = cfg.scheme;
    fine_scheme.base_step /= 2.0;
    let fine = Simulator::new(&cfg.spec, &cfg.domain, &fine_scheme)?
        .with_workers(cfg.workers)
        .with_batches(2 * DEFAULT_BATCHES);
    let tol = cfg.tolerances.relative;
    let mut rows = Vec::new();
    for (g, x) in cfg.grid.xs.iter().enumerate() {
        let p = cfg.domain.point(x)?;
        let seed = group_seed(cfg.seed, g);
        let est = sim.mean_exit_time(x, cfg.n_paths, seed)?;
        let halved = fine.mean_exit_time(x, cfg.n_paths, seed)?;
        rows.push(ExitTimeRow {
            x: x.clone(),
            delta: p.delta,
            estimate: est,
            halved_step: halved,
            exact: exact_exit_time(&cfg.spec, &cfg.domain, x),
            step_change: rel_change(halved.mean, est.mean),
            per_delta: est.mean / p.delta,
        });
    }
    let per_delta_band = Band::of(rows.iter().map(|r| r.per_delta));
    let pass = per_delta_band.is_finite_positive()
        && rows.iter().all(|r| {
            r.step_change < tol && r.exact.is_none_or(|e| rel_change(r.estimate.mean, e) <= tol)
        });
    Ok(ExitTimeReport {
        rows,
        per_delta_band,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub x: Vec<f64>,
    pub delta: f64,
    pub t: f64,
    pub estimate: Estimate,
    /// `estimate (t + sqrt t) / delta`, all paths and first half.
    pub scaled: f64,
    pub scaled_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub rows: Vec<SurvivalRow>,
    pub constant: f64,
    pub constant_half: f64,
    pub stable: bool,
    pub monotone: bool,
    pub pass: bool,
}

pub fn run_survival_check(cfg: &ExperimentConfig, times: &[f64]) -> Result<SurvivalReport> {
    cfg.validate()?;
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return domain_error("survival times must be positive");
    }
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let sim = cfg.simulator(&cfg.spec, &cfg.domain)?;
    let opts = PathOptions {
        target: None,
        horizon: Some(horizon),
    };
    let mut rows = Vec::new();
    let mut monotone = true;
    for (g, x) in cfg.grid.xs.iter().enumerate() {
        let delta = cfg.domain.point(x)?.delta;
        let tally = sim.tally_with(x, &[], &opts, 2 * cfg.n_paths, group_seed(cfg.seed, g), times.len(), |s, out| {
            for (k, &t) in times.iter().enumerate() {
                if s.stop == StopReason::Horizon || s.exit_time > t {
                    out[k] = 1.0;
                }
            }
        })?;
        let h = tally.counts.len() / 2;
        let mut prev: Option<Estimate> = None;
        for (k, &t) in times.iter().enumerate() {
            let est = tally.estimate(k)?;
            let half = Estimate::from_batches(&tally.sums[k][..h], &tally.counts[..h])?;
            let w = (t + t.sqrt()) / delta;
            if let Some(p) = prev {
                // times are listed increasing in the usual call; compare in time order
                let (early, late) = if times[k - 1] < t { (p, est) } else { (est, p) };
                if late.mean > early.mean + 5.0 * (early.std_error + late.std_error) {
                    monotone = false;
                }
            }
            prev = Some(est);
            rows.push(SurvivalRow {
                x: x.clone(),
                delta,
                t,
                estimate: est,
                scaled: est.mean * w,
                scaled_half: half.mean * w,
            });
        }
    }
    let constant = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let constant_half = rows.iter().map(|r| r.scaled_half).fold(0.0, f64::max);
    let stable = constant.is_finite() && constant > 0.0 && rel_change(constant, constant_half) <= cfg.tolerances.band_stability;
    Ok(SurvivalReport {
        rows,
        constant,
        constant_half,
        stable,
        monotone,
        pass: stable && monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRow {
    /// Shell radius in units of the ball radius.
    pub multiple: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub estimate: Estimate,
    /// `(r - |x0 - c|) (s - r)^{-d-alpha}` at the shell radius `s`.
    pub upper_form: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    pub rows: Vec<PoissonRow>,
    pub slope: f64,
    pub target_slope: f64,
    pub jump_exit_fraction: f64,
    pub band: Band,
    pub pass: bool,
    pub inconclusive: bool,
}

/// Jump-exit landing density from a ball in shells at `multiples` of its radius; the
/// log-log slope should be `-(d + alpha)`.
pub fn run_poisson_check(cfg: &ExperimentConfig, multiples: &[f64]) -> Result<PoissonReport> {
    cfg.validate()?;
    let (center, radius) = match cfg.domain.kind() {
        DomainKind::Ball { center, radius } => (center.clone(), *radius),
        _ => return Err(Error::UnsupportedDomain("Poisson kernel check needs a ball".into())),
    };
    if !(cfg.spec.a > 0.0) {
        return domain_error("Poisson kernel check needs a > 0");
    }
    if multiples.len() < 2 || multiples.iter().any(|m| !(*m * 0.8 > 1.0)) {
        return domain_error("need at least two shell multiples above 1.25");
    }
    let x0 = cfg.grid.xs.first().ok_or_else(|| Error::Config("grid needs a start point".into()))?;
    let d = cfg.spec.d;
    let shells: Vec<(f64, f64)> = multiples.iter().map(|m| (0.8 * m * radius, 1.25 * m * radius)).collect();
    let vols: Vec<f64> = shells.iter().map(|&(a, b)| shell_volume(d, a, b)).collect();
    let sim = cfg.simulator(&cfg.spec, &cfg.domain)?;
    let ns = shells.len();
    let tally = sim.tally_with(x0, &[], &PathOptions::default(), cfg.n_paths, cfg.seed, ns + 1, |s, out| {
        if s.exit_mode != ExitMode::JumpedOut {
            return;
        }
        out[ns] = 1.0;
        let r = distance(&s.exit_position, &center);
        for (k, &(a, b)) in shells.iter().enumerate() {
            if r >= a && r < b {
                out[k] = 1.0 / vols[k];
            }
        }
    })?;
    let jump = tally.estimate(ns)?.mean;
    let depth = radius - distance(x0, &center);
    let mut rows = Vec::new();
    for (k, (&m, &(a, b))) in multiples.iter().zip(&shells).enumerate() {
        let est = tally.estimate(k)?;
        let s = m * radius;
        let upper_form = depth * (s - radius).powf(-(d as f64) - cfg.spec.alpha);
        rows.push(PoissonRow {
            multiple: m,
            r_in: a,
            r_out: b,
            estimate: est,
            upper_form,
            ratio: est.mean / upper_form,
        });
    }
    let inconclusive = rows.iter().any(|r| !(r.estimate.mean > 0.0));
    let slope = if inconclusive {
        f64::NAN
    } else {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.multiple * radius).ln(), r.estimate.mean.ln())).collect();
        least_squares_slope(&pts)
    };
    let target_slope = -(d as f64) - cfg.spec.alpha;
    let band = Band::of(rows.iter().map(|r| r.ratio));
    let pass = !inconclusive && (slope - target_slope).abs() <= cfg.tolerances.slope && band.is_finite_positive();
    Ok(PoissonReport {
        rows,
        slope,
        target_slope,
        jump_exit_fraction: jump,
        band,
        pass,
        inconclusive,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// uniform view for serializers

/// A flat table of report rows, cells already formatted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

fn cell(v: f64) -> String {
    format!("{v}")
}

fn coords(v: &[f64]) -> String {
    v.iter().map(|c| cell(*c)).collect::<Vec<_>>().join(";")
}

pub trait CheckReport: Serialize {
    fn name(&self) -> &'static str;
    fn passed(&self) -> bool;
    fn inconclusive(&self) -> bool {
        false
    }
    /// Headline band (empirical constants or ratio extremes).
    fn band(&self) -> Band;
    fn table(&self) -> Table;
    /// `(x, y)` points for the ratio plot.
    fn plot_points(&self) -> Vec<(f64, f64)> {
        Vec::new()
    }
}

impl CheckReport for ComparabilityReport {
    fn name(&self) -> &'static str {
        "theorem1"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn inconclusive(&self) -> bool {
        self.pair_grid.iter().any(|p| p.estimate.mean == 0.0)
    }
    fn band(&self) -> Band {
        Band {
            min: self.ratio_min,
            max: self.ratio_max,
        }
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "y", "estimate", "std_error", "bound", "ratio", "same_component"]);
        for p in &self.pair_grid {
            t.rows.push(vec![
                coords(&p.x),
                coords(&p.y),
                cell(p.estimate.mean),
                cell(p.estimate.std_error),
                cell(p.bound_value),
                cell(p.ratio),
                p.same_component.to_string(),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.pair_grid.iter().map(|p| (p.bound_value, p.ratio)).collect()
    }
}

impl CheckReport for WeightScalingReport {
    fn name(&self) -> &'static str {
        "weight_scaling"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn inconclusive(&self) -> bool {
        self.inconclusive
    }
    fn band(&self) -> Band {
        Band {
            min: self.factor_ci[0],
            max: self.factor_ci[1],
        }
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "y", "low", "high"]);
        for p in &self.pairs {
            t.rows.push(vec![coords(&p.x), coords(&p.y), cell(p.low.mean), cell(p.high.mean)]);
        }
        t
    }
}

impl CheckReport for ScalingReport {
    fn name(&self) -> &'static str {
        "scaling"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        Band::of(self.rows.iter().map(|r| r.scaled.mean / r.direct.mean))
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["lam", "x", "y", "direct", "scaled", "prefactor", "overlap"]);
        for r in &self.rows {
            t.rows.push(vec![
                cell(r.lam),
                coords(&r.x),
                coords(&r.y),
                cell(r.direct.mean),
                cell(r.scaled.mean),
                cell(r.prefactor),
                r.overlap.to_string(),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.direct.mean, r.scaled.mean)).collect()
    }
}

impl CheckReport for ThreeGReport {
    fn name(&self) -> &'static str {
        "threeg"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        Band {
            min: self.constant_half,
            max: self.constant,
        }
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["case", "count"]);
        for (c, n) in &self.case_counts {
            t.rows.push(vec![format!("{c:?}"), n.to_string()]);
        }
        t
    }
}

impl CheckReport for MartinReport {
    fn name(&self) -> &'static str {
        "martin"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        self.band
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "case", "units", "limit", "h", "band_value", "cauchy_spread"]);
        for r in &self.rows {
            t.rows.push(vec![
                coords(&r.x),
                format!("{:?}", r.case),
                r.units.to_string(),
                cell(r.limit),
                cell(r.h_value),
                cell(r.band_value),
                cell(r.cauchy_spread),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.h_value, r.limit)).collect()
    }
}

impl CheckReport for SubordinateReport {
    fn name(&self) -> &'static str {
        "subordinate"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        Band::of(self.rows.iter().map(|r| r.estimate.mean / r.r_value))
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "y", "estimate", "std_error", "r_value", "log_form", "dominates"]);
        for r in &self.rows {
            t.rows.push(vec![
                coords(&r.x),
                coords(&r.y),
                cell(r.estimate.mean),
                cell(r.estimate.std_error),
                cell(r.r_value),
                cell(r.log_form),
                r.dominates.to_string(),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.r_value, r.estimate.mean)).collect()
    }
}

impl CheckReport for PerturbationReport {
    fn name(&self) -> &'static str {
        "perturbation"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        self.band
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "y", "variant", "plain", "ratio"]);
        for r in &self.rows {
            t.rows.push(vec![
                coords(&r.x),
                coords(&r.y),
                cell(r.variant_estimate.mean),
                cell(r.plain_estimate.mean),
                cell(r.ratio),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.plain_estimate.mean, r.ratio)).collect()
    }
}

impl CheckReport for CapacityReport {
    fn name(&self) -> &'static str {
        "capacity"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        self.band
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["r", "capacity", "product", "tolerance_change"]);
        for r in &self.rows {
            t.rows.push(vec![cell(r.r), cell(r.capacity), cell(r.product), cell(r.tolerance_change)]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.r, r.product)).collect()
    }
}

impl CheckReport for ExitTimeReport {
    fn name(&self) -> &'static str {
        "exit_time"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        self.per_delta_band
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "delta", "estimate", "std_error", "halved_step", "exact"]);
        for r in &self.rows {
            t.rows.push(vec![
                coords(&r.x),
                cell(r.delta),
                cell(r.estimate.mean),
                cell(r.estimate.std_error),
                cell(r.halved_step.mean),
                r.exact.map(cell).unwrap_or_default(),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.delta, r.estimate.mean)).collect()
    }
}

impl CheckReport for SurvivalReport {
    fn name(&self) -> &'static str {
        "survival"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        Band {
            min: self.constant_half.min(self.constant),
            max: self.constant_half.max(self.constant),
        }
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["x", "delta", "t", "estimate", "std_error", "scaled"]);
        for r in &self.rows {
            t.rows.push(vec![
                coords(&r.x),
                cell(r.delta),
                cell(r.t),
                cell(r.estimate.mean),
                cell(r.estimate.std_error),
                cell(r.scaled),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, r.scaled)).collect()
    }
}

impl CheckReport for PoissonReport {
    fn name(&self) -> &'static str {
        "poisson"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn inconclusive(&self) -> bool {
        self.inconclusive
    }
    fn band(&self) -> Band {
        self.band
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["multiple", "r_in", "r_out", "estimate", "std_error", "upper_form"]);
        for r in &self.rows {
            t.rows.push(vec![
                cell(r.multiple),
                cell(r.r_in),
                cell(r.r_out),
                cell(r.estimate.mean),
                cell(r.estimate.std_error),
                cell(r.upper_form),
            ]);
        }
        t
    }
    fn plot_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.estimate.mean > 0.0)
            .map(|r| (r.multiple.ln(), r.estimate.mean.ln()))
            .collect()
    }
}

impl CheckReport for VariantIdentityReport {
    fn name(&self) -> &'static str {
        "variant_identity"
    }
    fn passed(&self) -> bool {
        self.pass
    }
    fn band(&self) -> Band {
        Band {
            min: self.ks.statistic,
            max: self.ks.p_value,
        }
    }
    fn table(&self) -> Table {
        let mut t = Table::new(&["statistic", "p_value", "plain_mean", "variant_mean"]);
        t.rows.push(vec![
            cell(self.ks.statistic),
            cell(self.ks.p_value),
            cell(self.plain_mean),
            cell(self.variant_mean),
        ]);
        t
    }
}
