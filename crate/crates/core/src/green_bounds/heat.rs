//! Dirichlet heat kernels of e^{tΔ} on an interval and on a disk.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::special_fn::{bessel_j, bessel_j_all};

/// Largest Bessel zero kept in the disk spectrum.
pub const DISK_ZERO_LIMIT: f64 = 320.0;

/// Eigen-expansion terms are dropped once `rate * t` exceeds this.
const DECAY_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy)]
pub struct DiskMode {
    pub order: usize,
    pub zero: f64,
    /// `eps_n / (pi J_{n+1}(zero)^2)` with `eps_0 = 1`, `eps_n = 2`.
    pub weight: f64,
}

static DISK_MODES: OnceLock<Vec<DiskMode>> = OnceLock::new();

fn j_and_next(n: usize, x: f64) -> (f64, f64) {
    if x > 25.0 + 0.5 * ((n + 1) * (n + 1)) as f64 {
        (bessel_j(n, x), bessel_j(n + 1, x))
    } else {
        let v = bessel_j_all(n + 1, x);
        (v[n], v[n + 1])
    }
}

fn refine_zero(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = j_and_next(n, lo).0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (jn, jn1) = j_and_next(n, x);
        if jn == 0.0 {
            return x;
        }
        if (jn > 0.0) == (f_lo > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let deriv = n as f64 / x * jn - jn1;
        let mut next = x - jn / deriv;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x {
            return next;
        }
        x = next;
    }
    x
}

fn build_disk_modes() -> Vec<DiskMode> {
    let nmax = DISK_ZERO_LIMIT as usize;
    let step = 0.25;
    let mut brackets: Vec<(usize, f64, f64)> = Vec::new();
    let mut prev_x = 0.0;
    let mut prev: Option<Vec<f64>> = None;
    let mut x = step;
    while x <= DISK_ZERO_LIMIT + step {
        let cur = bessel_j_all(nmax, x);
        if let Some(p) = &prev {
            for n in 0..=nmax {
                if (p[n] > 0.0 && cur[n] < 0.0) || (p[n] < 0.0 && cur[n] > 0.0) {
                    brackets.push((n, prev_x, x));
                }
            }
        }
        prev = Some(cur);
        prev_x = x;
        x += step;
    }
    let mut modes: Vec<DiskMode> = brackets
        .into_iter()
        .map(|(n, lo, hi)| {
            let zero = refine_zero(n, lo, hi);
            let next = j_and_next(n, zero).1;
            let eps = if n == 0 { 1.0 } else { 2.0 };
            DiskMode {
                order: n,
                zero,
                weight: eps / (PI * next * next),
            }
        })
        .filter(|m| m.zero <= DISK_ZERO_LIMIT)
        .collect();
    modes.sort_by(|a, b| a.zero.total_cmp(&b.zero));
    modes
}

/// Dirichlet spectrum of the unit disk below [`DISK_ZERO_LIMIT`], sorted by zero.
pub fn disk_modes() -> &'static [DiskMode] {
    DISK_MODES.get_or_init(build_disk_modes)
}

/// The first `count` positive zeros of `J_n` (from the cached spectrum).
pub fn bessel_zeros(n: usize, count: usize) -> Vec<f64> {
    disk_modes()
        .iter()
        .filter(|m| m.order == n)
        .map(|m| m.zero)
        .take(count)
        .collect()
}

/// Earliest time at which the cached disk spectrum resolves the kernel, in units of R^2.
pub fn disk_series_floor() -> f64 {
    DECAY_CUTOFF / (DISK_ZERO_LIMIT * DISK_ZERO_LIMIT)
}

/// Eigen-expansion of the disk kernel for one pair of points: `sum w_k exp(-rate_k t)`.
#[derive(Debug, Clone)]
pub struct DiskExpansion {
    rates: Vec<f64>,
    weights: Vec<f64>,
}

impl DiskExpansion {
    /// Terms needed for all `t >= t_min` on the disk `B(center, radius)`.
    pub fn new(center: &[f64], radius: f64, x: &[f64], y: &[f64], t_min: f64) -> Self {
        let rel = |p: &[f64]| [(p[0] - center[0]) / radius, (p[1] - center[1]) / radius];
        let px = rel(x);
        let py = rel(y);
        let rx = (px[0] * px[0] + px[1] * px[1]).sqrt();
        let ry = (py[0] * py[0] + py[1] * py[1]).sqrt();
        let dtheta = py[1].atan2(py[0]) - px[1].atan2(px[0]);
        let tau = t_min / (radius * radius);
        let r2 = radius * radius;
        let mut rates = Vec::new();
        let mut weights = Vec::new();
        for m in disk_modes() {
            let rate = m.zero * m.zero;
            if rate * tau > DECAY_CUTOFF {
                break;
            }
            let w = m.weight
                * bessel_j(m.order, m.zero * rx)
                * bessel_j(m.order, m.zero * ry)
                * (m.order as f64 * dtheta).cos()
                / r2;
            rates.push(rate / r2);
            weights.push(w);
        }
        Self { rates, weights }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (r, w) in self.rates.iter().zip(&self.weights) {
            let e = r * t;
            if e > DECAY_CUTOFF + 5.0 {
                break;
            }
            acc += w * (-e).exp();
        }
        acc
    }

    pub fn lowest_rate(&self) -> f64 {
        self.rates.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

fn gauss2(t: f64, d2: f64) -> f64 {
    (-d2 / (4.0 * t)).exp() / (4.0 * PI * t)
}

/// Short-time disk kernel: free kernel minus the symmetrized tangent-plane images.
pub fn disk_small_time(center: &[f64], radius: f64, x: &[f64], y: &[f64], t: f64) -> f64 {
    let reflect = |p: &[f64]| {
        let dx = p[0] - center[0];
        let dy = p[1] - center[1];
        let r = (dx * dx + dy * dy).sqrt();
        let (nx, ny) = if r > 0.0 { (dx / r, dy / r) } else { (1.0, 0.0) };
        let delta = radius - r;
        [p[0] + 2.0 * delta * nx, p[1] + 2.0 * delta * ny]
    };
    let sq = |a: &[f64], b: &[f64]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let xs = reflect(x);
    let ys = reflect(y);
    gauss2(t, sq(x, y)) - 0.5 * (gauss2(t, sq(x, &ys)) + gauss2(t, sq(&xs, y)))
}

/// Switch time between the image form and the eigen-expansion on the disk for a pair
/// with boundary distances `dx`, `dy`.
pub fn disk_switch_time(radius: f64, dx: f64, dy: f64) -> f64 {
    let r2 = radius * radius;
    let by_pair = dx.min(dy).powi(2) / 35.0;
    by_pair.min(0.01 * r2).max(disk_series_floor() * r2)
}

/// Dirichlet kernel of e^{tΔ} on `(lo, lo + len)`.
pub fn interval_kernel(lo: f64, len: f64, t: f64, x: f64, y: f64) -> f64 {
    let xs = x - lo;
    let ys = y - lo;
    if t >= len * len / 100.0 {
        let mut acc = 0.0;
        let mut n = 1;
        loop {
            let k = n as f64 * PI / len;
            let e = k * k * t;
            if e > DECAY_CUTOFF {
                break;
            }
            acc += (k * xs).sin() * (k * ys).sin() * (-e).exp();
            n += 1;
        }
        2.0 / len * acc
    } else {
        let g = |z: f64| (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        let mut acc = 0.0;
        for k in -3i32..=3 {
            let shift = 2.0 * k as f64 * len;
            acc += g(xs - ys + shift) - g(xs + ys + shift);
        }
        acc
    }
}
