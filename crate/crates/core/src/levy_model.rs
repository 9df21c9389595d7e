//! Closed-form Lévy quantities of the weighted sum `B + a·S` (Brownian motion with
//! generator Δ plus an isotropic α-stable process), and of its relativistic and
//! truncated relatives.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special_fn::{
    bessel_j, gamma, integrate_adaptive, integrate_split, integrate_with_error, laplace_invert_nodes,
    mittag_leffler_alt, QuadSpec, TALBOT_NODES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Plain,
    /// Jumps of length at least `lambda` removed (`lambda = inf` keeps all jumps).
    Truncated { lambda: f64 },
    /// Relativistic stable jumps with mass `m`.
    Relativistic { m: f64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Truncated { .. } => "truncated",
            Variant::Relativistic { .. } => "relativistic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub d: usize,
    pub alpha: f64,
    pub a: f64,
    pub variant: Variant,
    /// Upper end of the weight range the comparison constants are meant to cover.
    pub m_cap: f64,
}

impl ProcessSpec {
    pub fn new(d: usize, alpha: f64, a: f64, variant: Variant, m_cap: f64) -> Result<Self> {
        let spec = Self {
            d,
            alpha,
            a,
            variant,
            m_cap,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Plain process with `m_cap = max(a, 1)`.
    pub fn plain(d: usize, alpha: f64, a: f64) -> Result<Self> {
        Self::new(d, alpha, a, Variant::Plain, a.max(1.0))
    }

    /// Unit-weight process with jumps longer than `lambda` removed.
    pub fn truncated(d: usize, alpha: f64, lambda: f64) -> Result<Self> {
        Self::new(d, alpha, 1.0, Variant::Truncated { lambda }, 1.0)
    }

    /// Unit-weight relativistic process with mass `m`.
    pub fn relativistic(d: usize, alpha: f64, m: f64) -> Result<Self> {
        Self::new(d, alpha, 1.0, Variant::Relativistic { m }, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return domain(format!("dimension must be 1, 2 or 3, got {}", self.d));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return domain(format!("stability index must lie in (0, 2), got {}", self.alpha));
        }
        if !(self.a >= 0.0) || !self.a.is_finite() {
            return domain(format!("weight must be finite and non-negative, got {}", self.a));
        }
        if !(self.a <= self.m_cap) {
            return domain(format!("weight {} exceeds the cap {}", self.a, self.m_cap));
        }
        match self.variant {
            Variant::Plain => {}
            Variant::Truncated { lambda } => {
                if !(lambda > 0.0) {
                    return domain(format!("truncation length must be positive, got {lambda}"));
                }
                if self.a != 1.0 {
                    return domain("truncated variant carries unit weight");
                }
            }
            Variant::Relativistic { m } => {
                if !(m >= 0.0) || !m.is_finite() {
                    return domain(format!("mass must be finite and non-negative, got {m}"));
                }
                if self.a != 1.0 {
                    return domain("relativistic variant carries unit weight");
                }
            }
        }
        Ok(())
    }

    /// Same process with another weight (plain variant only).
    pub fn with_weight(&self, a: f64) -> Result<Self> {
        Self::new(self.d, self.alpha, a, self.variant, self.m_cap.max(a))
    }

    /// Transience criterion: `d >= 3`, or a non-trivial jump part with `alpha < d`.
    pub fn is_transient(&self) -> bool {
        self.d >= 3 || (self.a > 0.0 && self.alpha < self.d as f64)
    }

    fn require_plain(&self, op: &str) -> Result<()> {
        if self.variant != Variant::Plain {
            return Err(Error::UnsupportedVariant(format!("{} in {op}", self.variant.name())));
        }
        Ok(())
    }
}

/// Normalizing constant of the isotropic stable jump density `c |x|^{-d-alpha}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableConstant {
    pub value: f64,
}

pub fn stable_constant(d: usize, alpha: f64) -> Result<StableConstant> {
    if d == 0 {
        return domain("dimension must be positive");
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("stability index must lie in (0, 2), got {alpha}"));
    }
    let df = d as f64;
    let value = alpha * 2f64.powf(alpha - 1.0) * PI.powf(-df / 2.0) * gamma((df + alpha) / 2.0)?
        / gamma(1.0 - alpha / 2.0)?;
    Ok(StableConstant { value })
}

/// Tempering profile of the relativistic jump density, normalized to 1 at the origin.
pub fn relativistic_profile(d: usize, alpha: f64, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return domain(format!("profile argument must be non-negative, got {r}"));
    }
    let k = (d as f64 + alpha) / 2.0;
    let spec = QuadSpec::new(1e-11, 1e-300, 4000)?;
    let r2 = r * r;
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        ((k - 1.0) * s.ln() - s / 4.0 - r2 / s).exp()
    };
    let peak = 2.0 * r + 4.0 * k;
    let head = integrate_split(integrand, &[0.0, r.max(1e-3), peak, peak + 60.0], &spec)?;
    let tail = integrate_adaptive(integrand, peak + 60.0, f64::INFINITY, &spec)?;
    Ok((head + tail) * 2f64.powf(-(d as f64 + alpha)) / gamma(k)?)
}

/// Jump intensity per unit volume at distance `r`.
pub fn levy_density(spec: &ProcessSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("jump length must be positive, got {r}"));
    }
    let c = stable_constant(spec.d, spec.alpha)?.value;
    let base = c * r.powf(-(spec.d as f64) - spec.alpha);
    match spec.variant {
        Variant::Plain => Ok(spec.a.powf(spec.alpha) * base),
        Variant::Truncated { lambda } => Ok(if r < lambda { base } else { 0.0 }),
        Variant::Relativistic { m } => {
            Ok(base * relativistic_profile(spec.d, spec.alpha, m.powf(1.0 / spec.alpha) * r)?)
        }
    }
}

/// `|xi|^2 + a^alpha |xi|^alpha`.
pub fn char_exponent(spec: &ProcessSpec, xi_norm: f64) -> Result<f64> {
    spec.require_plain("char_exponent")?;
    if !(xi_norm >= 0.0) {
        return domain(format!("frequency norm must be non-negative, got {xi_norm}"));
    }
    Ok(xi_norm * xi_norm + spec.a.powf(spec.alpha) * xi_norm.powf(spec.alpha))
}

/// Laplace exponent of the subordinator realizing the process as time-changed Brownian motion.
pub fn subordinator_exponent(spec: &ProcessSpec, lam: f64) -> Result<f64> {
    if !(lam >= 0.0) {
        return domain(format!("Laplace argument must be non-negative, got {lam}"));
    }
    match spec.variant {
        Variant::Plain => Ok(lam + spec.a.powf(spec.alpha) * lam.powf(spec.alpha / 2.0)),
        Variant::Relativistic { m } => {
            let mu = m.powf(2.0 / spec.alpha);
            Ok(lam + (lam + mu).powf(spec.alpha / 2.0) - m)
        }
        Variant::Truncated { .. } => Err(Error::UnsupportedVariant(
            "truncated process is not subordinate Brownian motion".into(),
        )),
    }
}

/// Potential density of the subordinator: a rescaled alternating Mittag-Leffler series.
pub fn potential_density(spec: &ProcessSpec, t: f64) -> Result<f64> {
    spec.require_plain("potential_density")?;
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("time must be finite and non-negative, got {t}"));
    }
    let alpha = spec.alpha;
    let scale = spec.a.powf(2.0 * alpha / (2.0 - alpha));
    Ok(mittag_leffler_alt(1.0 - alpha / 2.0, scale * t)?.value)
}

/// Same density by inverting `1 / (lam + a^alpha lam^{alpha/2})` on the contour.
pub fn potential_density_by_inversion(spec: &ProcessSpec, t: f64) -> Result<f64> {
    spec.require_plain("potential_density_by_inversion")?;
    let c = spec.a.powf(spec.alpha);
    let half = spec.alpha / 2.0;
    laplace_invert_nodes(|l| 1.0 / (l + c * l.powf(half)), t, TALBOT_NODES)
}

fn ladder_quad() -> QuadSpec {
    QuadSpec {
        rel_tol: 1e-12,
        abs_tol: 1e-13,
        max_refinements: 4000,
    }
}

/// Laplace exponent of the ascending ladder-height process of the one-dimensional process,
/// from the displayed integral with the `theta <-> 1/theta` fold onto `(0, 1)`.
pub fn ladder_exponent(a: f64, alpha: f64, lam: f64) -> Result<f64> {
    ladder_exponent_with(a, alpha, lam, &ladder_quad())
}

pub fn ladder_exponent_with(a: f64, alpha: f64, lam: f64, quad: &QuadSpec) -> Result<f64> {
    check_ladder_args(a, alpha)?;
    if !(lam > 0.0) || !lam.is_finite() {
        return domain(format!("ladder exponent needs a positive argument, got {lam}"));
    }
    let c = a.powf(alpha);
    let g = |th: f64| (th * th * lam * lam + c * th.powf(alpha) * lam.powf(alpha)).ln();
    let folded = |th: f64| (g(th) + g(1.0 / th)) / (1.0 + th * th);
    let integral = integrate_adaptive(folded, 0.0, 1.0, quad)?;
    Ok((integral / PI).exp())
}

fn check_ladder_args(a: f64, alpha: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return domain(format!("weight must be finite and non-negative, got {a}"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("stability index must lie in (0, 2), got {alpha}"));
    }
    Ok(())
}

/// `log chi(lam) - log lam` on the closed right half-plane:
/// `(1/pi) int_0^inf Log(1 + a^alpha (theta lam)^{alpha-2}) / (1 + theta^2) dtheta`.
fn ladder_log_excess(c: f64, alpha: f64, lam: Complex64) -> Result<Complex64> {
    if c == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let lp = lam.powf(alpha - 2.0);
    let h = |th: f64| (1.0 + lp * (c * th.powf(alpha - 2.0))).ln();
    let folded = |th: f64| (h(th) + h(1.0 / th)) * (1.0 / (1.0 + th * th));
    let (v, _) = integrate_with_error(folded, 0.0, 1.0, &ladder_quad())?;
    Ok(v / PI)
}

/// Analytic continuation of the ladder exponent to the slit plane.
///
/// On the right half-plane the integral form is used directly. On the left half-plane
/// the integral form has a line of branch points (at `arg lam = ±pi/(2-alpha)` when
/// `alpha < 1`), so the value comes from the reflected argument plus the residue picked
/// up when the kernel's pole crosses the integration ray:
/// `log chi(lam) = -I(-lam) + log((-i lam)^2 + a^alpha (-i lam)^alpha)` (upper half-plane).
pub fn ladder_exponent_complex(a: f64, alpha: f64, lam: Complex64) -> Result<Complex64> {
    check_ladder_args(a, alpha)?;
    if lam.norm() == 0.0 || !lam.re.is_finite() || !lam.im.is_finite() {
        return domain("ladder exponent needs a finite non-zero argument");
    }
    let c = a.powf(alpha);
    if lam.re >= 0.0 {
        return Ok(lam * ladder_log_excess(c, alpha, lam)?.exp());
    }
    let refl = -lam;
    let log_refl = refl.ln() + ladder_log_excess(c, alpha, refl)?;
    let rot = if lam.im >= 0.0 {
        Complex64::new(0.0, -1.0) * lam
    } else {
        Complex64::new(0.0, 1.0) * lam
    };
    let residue = 2.0 * rot.ln() + (1.0 + c * rot.powf(alpha - 2.0)).ln();
    Ok((residue - log_refl).exp())
}

/// Ladder potential `V(x)` by inverting `1 / (lam chi(lam))`.
pub fn ladder_potential(a: f64, alpha: f64, x: f64) -> Result<f64> {
    ladder_potential_nodes(a, alpha, x, TALBOT_NODES)
}

pub fn ladder_potential_nodes(a: f64, alpha: f64, x: f64, nodes: usize) -> Result<f64> {
    check_ladder_args(a, alpha)?;
    if !(x > 0.0) {
        return domain(format!("ladder potential needs a positive argument, got {x}"));
    }
    let failure = std::cell::Cell::new(None);
    let transform = |l: Complex64| match ladder_exponent_complex(a, alpha, l) {
        Ok(chi) => 1.0 / (l * chi),
        Err(e) => {
            failure.set(Some(e.to_string()));
            Complex64::new(f64::NAN, f64::NAN)
        }
    };
    let v = laplace_invert_nodes(transform, x, nodes);
    if let Some(msg) = failure.take() {
        return Err(Error::Inversion(msg));
    }
    v
}

/// Angular average of `1 - cos(xi . y)` over the sphere of radius `r`, times the sphere area.
fn angular_factor(d: usize, s: f64) -> f64 {
    match d {
        1 => 4.0 * (0.5 * s).sin().powi(2),
        2 => {
            if s < 0.5 {
                // 1 - J0(s) by its power series, avoiding cancellation
                let q = 0.25 * s * s;
                let mut term = -1.0;
                let mut sum = 0.0;
                for k in 1..12 {
                    term *= -q / (k * k) as f64;
                    sum += term;
                }
                2.0 * PI * sum
            } else {
                2.0 * PI * (1.0 - bessel_j(0, s))
            }
        }
        _ => {
            if s < 0.05 {
                let s2 = s * s;
                4.0 * PI * s2 * (1.0 / 6.0 - s2 / 120.0 + s2 * s2 / 5040.0)
            } else {
                4.0 * PI * (1.0 - s.sin() / s)
            }
        }
    }
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Lévy exponent of the stable process with jumps of length `>= lambda` removed.
pub fn truncated_exponent(lambda: f64, alpha: f64, xi: &[f64]) -> Result<f64> {
    truncated_exponent_with(lambda, alpha, xi, &QuadSpec::new(1e-10, 1e-14, 4000)?)
}

pub fn truncated_exponent_with(lambda: f64, alpha: f64, xi: &[f64], quad: &QuadSpec) -> Result<f64> {
    if !(lambda > 0.0) {
        return domain(format!("truncation length must be positive, got {lambda}"));
    }
    let d = xi.len();
    if !(1..=3).contains(&d) {
        return Err(Error::Shape { expected: 3, got: d });
    }
    let c = stable_constant(d, alpha)?.value;
    let k = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if k == 0.0 {
        return Ok(0.0);
    }
    let integrand = |r: f64| angular_factor(d, k * r) * r.powf(-1.0 - alpha);
    // panels of half an oscillation; far oscillations are dropped and only the mean kept
    let width = PI / k;
    let reach = lambda.min(4000.0 * width);
    let mut total = integrate_adaptive(integrand, 0.0, width.min(reach), quad)?;
    let mut lo = width;
    while lo < reach {
        let hi = (lo + width).min(reach);
        total += integrate_adaptive(integrand, lo, hi, quad)?;
        lo = hi;
    }
    if lambda > reach {
        let far = if lambda.is_finite() {
            reach.powf(-alpha) - lambda.powf(-alpha)
        } else {
            reach.powf(-alpha)
        };
        total += sphere_area(d) * far / alpha;
    }
    Ok(c * total)
}

/// Newtonian kernel of Brownian motion with generator Δ in `d >= 3`.
pub fn brownian_green(d: usize, r: f64) -> Result<f64> {
    if d < 3 {
        return Err(Error::Recurrent(format!("Brownian motion in dimension {d}")));
    }
    if !(r > 0.0) {
        return domain(format!("distance must be positive, got {r}"));
    }
    let df = d as f64;
    Ok(gamma(df / 2.0 - 1.0)? / (4.0 * PI.powf(df / 2.0)) * r.powf(2.0 - df))
}

/// Whole-space Green function `int_0^inf (4 pi t)^{-d/2} exp(-r^2/(4t)) u(t) dt`.
pub fn whole_space_green(spec: &ProcessSpec, r: f64) -> Result<f64> {
    whole_space_green_with(spec, r, &QuadSpec::new(1e-10, 1e-300, 4000)?)
}

pub fn whole_space_green_with(spec: &ProcessSpec, r: f64, quad: &QuadSpec) -> Result<f64> {
    spec.require_plain("whole_space_green")?;
    if !spec.is_transient() {
        return Err(Error::Recurrent(format!(
            "d={}, alpha={}, a={}",
            spec.d, spec.alpha, spec.a
        )));
    }
    if !(r > 0.0) {
        return domain(format!("distance must be positive, got {r}"));
    }
    let half_d = spec.d as f64 / 2.0;
    let r2 = r * r;
    // t = r^2 s
    let failure = std::cell::Cell::new(None);
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let u = match potential_density(spec, r2 * s) {
            Ok(u) => u,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        (4.0 * PI * s).powf(-half_d) * (-0.25 / s).exp() * u
    };
    let head = integrate_adaptive(&integrand, 0.0, 1.0, quad);
    let tail = integrate_adaptive(&integrand, 1.0, f64::INFINITY, quad);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r.powf(2.0 - 2.0 * half_d) * (head? + tail?))
}
