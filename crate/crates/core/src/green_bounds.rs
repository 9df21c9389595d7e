//! Closed-form comparison functions for the killed Green function, and analytic
//! reference Green functions (disk, interval, subordinate killed Brownian motion).

mod heat;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain as domain_error, Error, Result};
use crate::geometry::{distance, Domain, DomainKind, DomainPoint};
use crate::levy_model::{potential_density, ProcessSpec, Variant};
use crate::special_fn::{integrate_adaptive, integrate_split, QuadSpec};

pub use heat::{bessel_zeros, disk_modes, DiskExpansion, DiskMode, DISK_ZERO_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    D1,
    D2,
    D3Plus,
}

impl Branch {
    pub fn for_dim(d: usize) -> Self {
        match d {
            1 => Branch::D1,
            2 => Branch::D2,
            _ => Branch::D3Plus,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::D1 => "d1",
            Branch::D2 => "d2",
            Branch::D3Plus => "d3plus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEval {
    pub value: f64,
    pub same_component: bool,
    pub branch: Branch,
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn pair_points(domain: &Domain, x: &[f64], y: &[f64]) -> Result<(DomainPoint, DomainPoint, f64)> {
    let px = domain.point(x)?;
    let py = domain.point(y)?;
    let r = distance(x, y);
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    Ok((px, py, r))
}

/// `delta(x) delta(y) / |x - y|^2`.
pub fn f_ratio(domain: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    let (px, py, r) = pair_points(domain, x, y)?;
    Ok(px.delta * py.delta / (r * r))
}

/// Same-component shape of the two-sided Green bound, before the cross-component weight.
fn g_shape(d: usize, dx: f64, dy: f64, r: f64) -> f64 {
    let prod = dx * dy;
    match d {
        1 => prod.sqrt().min(prod / r),
        2 => (prod / (r * r)).ln_1p(),
        _ => r.powf(2.0 - d as f64) * (prod / (r * r)).min(1.0),
    }
}

/// The comparison function `g` of the two-sided Green estimate. Pairs in different
/// components carry the factor `a^alpha`.
pub fn g_bound(spec: &ProcessSpec, domain: &Domain, x: &[f64], y: &[f64]) -> Result<BoundEval> {
    if domain.dim() != spec.d {
        return Err(Error::Shape {
            expected: spec.d,
            got: domain.dim(),
        });
    }
    let (px, py, r) = pair_points(domain, x, y)?;
    let same = px.component_id == py.component_id;
    let shape = g_shape(spec.d, px.delta, py.delta, r);
    let value = if same {
        shape
    } else {
        if spec.a == 0.0 {
            return Err(Error::DegenerateBound(
                "zero weight across components: the bound vanishes".into(),
            ));
        }
        spec.a.powf(spec.alpha) * shape
    };
    Ok(BoundEval {
        value,
        same_component: same,
        branch: Branch::for_dim(spec.d),
    })
}

// ---------------------------------------------------------------------------
// 3G inequalities

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierCase {
    /// All four points in one component.
    SameComponent,
    /// `x, y` together, `z, w` together elsewhere.
    SplitPairs,
    /// `x, w` together and exactly one of `y, z` with them.
    OneAcross,
    /// Four distinct components.
    AllDifferent,
    /// `x, w` together, neither `y` nor `z` with them.
    BothAcross,
    /// A configuration not listed in the table; exponent from the general rule.
    Other,
}

impl MultiplierCase {
    pub const LISTED: [MultiplierCase; 5] = [
        MultiplierCase::SameComponent,
        MultiplierCase::SplitPairs,
        MultiplierCase::OneAcross,
        MultiplierCase::AllDifferent,
        MultiplierCase::BothAcross,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub case: MultiplierCase,
    /// Exponent of `a` in units of `alpha`: one of -1, 0, 1, 2 for listed cases.
    pub units: i32,
    pub exponent: f64,
    pub value: f64,
}

/// Classify component labels of `(x, y, z, w)`. The exponent in units of `alpha` is
/// `[x~/y] + [z~/w] - [x~/w]`, which reproduces every listed case.
pub fn classify_components(cx: usize, cy: usize, cz: usize, cw: usize) -> (MultiplierCase, i32) {
    let ne = |p: usize, q: usize| i32::from(p != q);
    let units = ne(cx, cy) + ne(cz, cw) - ne(cx, cw);
    let mut distinct = vec![cx, cy, cz, cw];
    distinct.sort_unstable();
    distinct.dedup();
    let case = if distinct.len() == 1 {
        MultiplierCase::SameComponent
    } else if distinct.len() == 4 {
        MultiplierCase::AllDifferent
    } else if cx == cy && cz != cx && cw == cz {
        MultiplierCase::SplitPairs
    } else if cw == cx && (cy == cx) != (cz == cx) {
        MultiplierCase::OneAcross
    } else if cw == cx && cy != cx && cz != cx {
        MultiplierCase::BothAcross
    } else {
        MultiplierCase::Other
    };
    (case, units)
}

pub fn component_multiplier(
    spec: &ProcessSpec,
    domain: &Domain,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    w: &[f64],
) -> Result<Multiplier> {
    let comp = |p: &[f64]| domain.point(p).map(|q| q.component_id);
    let (case, units) = classify_components(comp(x)?, comp(y)?, comp(z)?, comp(w)?);
    multiplier_from(spec, case, units)
}

fn multiplier_from(spec: &ProcessSpec, case: MultiplierCase, units: i32) -> Result<Multiplier> {
    if spec.a == 0.0 && units != 0 {
        return Err(Error::DegenerateBound(
            "zero weight with points in different components".into(),
        ));
    }
    let exponent = units as f64 * spec.alpha;
    Ok(Multiplier {
        case,
        units,
        exponent,
        value: spec.a.powf(exponent),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeGInput {
    pub x: DomainPoint,
    pub y: DomainPoint,
    pub z: DomainPoint,
    pub w: DomainPoint,
}

impl ThreeGInput {
    pub fn new(domain: &Domain, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> Result<Self> {
        Ok(Self {
            x: domain.point(x)?,
            y: domain.point(y)?,
            z: domain.point(z)?,
            w: domain.point(w)?,
        })
    }

    pub fn multiplier(&self, spec: &ProcessSpec) -> Result<Multiplier> {
        let (case, units) = classify_components(
            self.x.component_id,
            self.y.component_id,
            self.z.component_id,
            self.w.component_id,
        );
        multiplier_from(spec, case, units)
    }

    /// `delta(x) v delta(y) v |x - y|`.
    pub fn reach(p: &DomainPoint, q: &DomainPoint) -> f64 {
        p.delta.max(q.delta).max(distance(&p.coords, &q.coords))
    }
}

/// Right-hand side of the generalized 3G inequality without its constant (`d >= 3`).
pub fn threeg_rhs_highd(spec: &ProcessSpec, q: &ThreeGInput) -> Result<f64> {
    if spec.d < 3 {
        return domain_error(format!("high-dimensional 3G form needs d >= 3, got {}", spec.d));
    }
    let xy = distance(&q.x.coords, &q.y.coords);
    let zw = distance(&q.z.coords, &q.w.coords);
    let xw = distance(&q.x.coords, &q.w.coords);
    let yz = distance(&q.y.coords, &q.z.coords);
    if xy == 0.0 || zw == 0.0 || xw == 0.0 {
        return Err(Error::Singularity);
    }
    let m = q.multiplier(spec)?;
    let short = xw.min(yz);
    let p = spec.d as f64 - 2.0;
    Ok(m.value * (short / xy).max(1.0) * (short / zw).max(1.0) * xw.powf(p)
        / (xy.powf(p) * zw.powf(p)))
}

/// Classical 3G kernel `a(x,z,z,w) |x-w|^{d-2} / (|x-z|^{d-2} |z-w|^{d-2})`.
pub fn threeg_classical(spec: &ProcessSpec, domain: &Domain, x: &[f64], z: &[f64], w: &[f64]) -> Result<f64> {
    let q = ThreeGInput::new(domain, x, z, z, w)?;
    let xz = distance(x, z);
    let zw = distance(z, w);
    let xw = distance(x, w);
    if xz == 0.0 || zw == 0.0 || xw == 0.0 {
        return Err(Error::Singularity);
    }
    let p = spec.d as f64 - 2.0;
    Ok(q.multiplier(spec)?.value * xw.powf(p) / (xz.powf(p) * zw.powf(p)))
}

/// Planar 3G right-hand side `log(1 + f(x,y)) + log(1 + f(y,z)) + 1`.
pub fn threeg_rhs_2d(domain: &Domain, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    if domain.dim() != 2 {
        return domain_err_dim(domain.dim());
    }
    Ok(f_ratio(domain, x, y)?.ln_1p() + f_ratio(domain, y, z)?.ln_1p() + 1.0)
}

fn domain_err_dim<T>(d: usize) -> Result<T> {
    domain_error(format!("planar form needs d = 2, got {d}"))
}

// ---------------------------------------------------------------------------
// Martin kernel bound

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MartinCase {
    /// `x` with the reference point, `z` on their component.
    Home,
    /// `x` with the reference point, `z` on another component.
    HomeAway,
    /// `x` away from the reference point, `z` on the reference component.
    AwayHome,
    /// `x` away, `z` on a third component.
    AwayElsewhere,
    /// `x` away, `z` on the component of `x` (not covered by the displayed table).
    AwayOwn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartinEval {
    pub value: f64,
    pub case: MartinCase,
    /// Exponent of `a` used for `value`, in units of `alpha`.
    pub units: i32,
    /// Exponent in units of `alpha` obtained as the boundary limit of the ratio
    /// `g(x, y) / g(x0, y)`; differs from `units` in two cases.
    pub limit_units: i32,
}

/// `a^e delta(x) / |x - z|^d` with `e` chosen by the components of `x`, `x0` and `z`.
pub fn martin_bound(spec: &ProcessSpec, domain: &Domain, x: &[f64], z: &[f64], x0: &[f64]) -> Result<MartinEval> {
    check_dim(spec.d, z)?;
    let px = domain.point(x)?;
    let p0 = domain.point(x0)?;
    let Some(cz) = domain.boundary_owner(z) else {
        return domain_error(format!("{z:?} is not on the boundary"));
    };
    let (cx, c0) = (px.component_id, p0.component_id);
    let (case, units, limit_units) = if cx == c0 {
        if cz == c0 {
            (MartinCase::Home, 0, 0)
        } else {
            (MartinCase::HomeAway, 1, 0)
        }
    } else if cz == c0 {
        (MartinCase::AwayHome, -1, 1)
    } else if cz == cx {
        (MartinCase::AwayOwn, -1, -1)
    } else {
        (MartinCase::AwayElsewhere, 0, 0)
    };
    if spec.a == 0.0 && units != 0 {
        return Err(Error::DegenerateBound(
            "zero weight with x and the reference point in different components".into(),
        ));
    }
    let r = distance(x, z);
    let value = spec.a.powf(units as f64 * spec.alpha) * px.delta / r.powi(spec.d as i32);
    Ok(MartinEval {
        value,
        case,
        units,
        limit_units,
    })
}

// ---------------------------------------------------------------------------
// Exact and analytic Green functions of killed Brownian motion (generator Δ)

/// Green function of Brownian motion with generator Δ killed on leaving the unit disk:
/// `(1/4pi) log(1 + (1-|x|^2)(1-|y|^2)/|x-y|^2)`.
pub fn disk_green_exact(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(2, x)?;
    check_dim(2, y)?;
    let nx = x[0] * x[0] + x[1] * x[1];
    let ny = y[0] * y[0] + y[1] * y[1];
    if !(nx < 1.0 && ny < 1.0) {
        return domain_error("points must lie in the open unit disk");
    }
    let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    if r2 == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(((1.0 - nx) * (1.0 - ny) / r2).ln_1p() / (4.0 * PI))
}

/// Green function of killed Brownian motion on the disk `B(center, radius)`.
pub fn disk_green(center: &[f64], radius: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(2, center)?;
    let s = |p: &[f64]| [(p[0] - center[0]) / radius, (p[1] - center[1]) / radius];
    check_dim(2, x)?;
    check_dim(2, y)?;
    disk_green_exact(&s(x), &s(y))
}

/// Green function of killed Brownian motion (generator Δ) on `(lo, hi)`.
pub fn interval_green(lo: f64, hi: f64, x: f64, y: f64) -> f64 {
    let len = hi - lo;
    let (s, t) = if x <= y { (x - lo, y - lo) } else { (y - lo, x - lo) };
    s * (len - t) / len
}

enum KernelSupport {
    Interval { lo: f64, len: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

fn kernel_support(domain: &Domain) -> Result<KernelSupport> {
    match domain.kind() {
        DomainKind::IntervalUnion { intervals } if intervals.len() == 1 => Ok(KernelSupport::Interval {
            lo: intervals[0][0],
            len: intervals[0][1] - intervals[0][0],
        }),
        DomainKind::Ball { center, radius } if center.len() == 2 => Ok(KernelSupport::Disk {
            center: [center[0], center[1]],
            radius: *radius,
        }),
        other => Err(Error::UnsupportedDomain(format!(
            "heat kernel needs a single interval or a disk, got {other:?}"
        ))),
    }
}

/// Dirichlet heat kernel of e^{tΔ}; zero when either point lies outside the domain.
pub fn killed_bm_heat_kernel(domain: &Domain, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let support = kernel_support(domain)?;
    check_dim(domain.dim(), x)?;
    check_dim(domain.dim(), y)?;
    if !(t > 0.0) {
        return domain_error(format!("time must be positive, got {t}"));
    }
    let (Some((_, dx)), Some((_, dy))) = (domain.locate(x), domain.locate(y)) else {
        return Ok(0.0);
    };
    Ok(match support {
        KernelSupport::Interval { lo, len } => heat::interval_kernel(lo, len, t, x[0], y[0]),
        KernelSupport::Disk { center, radius } => {
            let ts = heat::disk_switch_time(radius, dx, dy);
            if t < ts {
                heat::disk_small_time(&center, radius, x, y, t)
            } else {
                DiskExpansion::new(&center, radius, x, y, t).eval(t)
            }
        }
    })
}

fn green_quad() -> QuadSpec {
    QuadSpec {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        max_refinements: 4000,
    }
}

/// Green function of subordinate killed Brownian motion:
/// `int_0^inf p_D(t, x, y) u(t) dt` with the subordinator potential density `u`.
pub fn subordinate_killed_green(spec: &ProcessSpec, domain: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    subordinate_killed_green_with(spec, domain, x, y, &green_quad())
}

pub fn subordinate_killed_green_with(
    spec: &ProcessSpec,
    domain: &Domain,
    x: &[f64],
    y: &[f64],
    quad: &QuadSpec,
) -> Result<f64> {
    if spec.variant != Variant::Plain {
        return Err(Error::UnsupportedVariant(spec.variant.name().into()));
    }
    let support = kernel_support(domain)?;
    if domain.dim() != spec.d {
        return Err(Error::Shape {
            expected: spec.d,
            got: domain.dim(),
        });
    }
    let px = domain.point(x)?;
    let py = domain.point(y)?;
    if spec.d == 2 && distance(x, y) == 0.0 {
        return Err(Error::Singularity);
    }
    let failure = std::cell::Cell::new(None);
    let u = |t: f64| {
        if spec.a == 0.0 {
            return 1.0;
        }
        match potential_density(spec, t) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let (ts, lowest, head, tail_kernel): (f64, f64, f64, Box<dyn Fn(f64) -> f64>) = match support {
        KernelSupport::Interval { lo, len } => {
            let ts = len * len / 100.0;
            let (a, b) = (x[0], y[0]);
            let head = integrate_adaptive(
                |t: f64| {
                    if t <= 0.0 {
                        0.0
                    } else {
                        heat::interval_kernel(lo, len, t, a, b) * u(t)
                    }
                },
                0.0,
                ts,
                quad,
            )?;
            let lowest = (PI / len).powi(2);
            (ts, lowest, head, Box::new(move |t| heat::interval_kernel(lo, len, t, a, b)))
        }
        KernelSupport::Disk { center, radius } => {
            let ts = heat::disk_switch_time(radius, px.delta, py.delta);
            let head = integrate_adaptive(
                |t: f64| {
                    if t <= 0.0 {
                        0.0
                    } else {
                        heat::disk_small_time(&center, radius, x, y, t) * u(t)
                    }
                },
                0.0,
                ts,
                quad,
            )?;
            let expansion = DiskExpansion::new(&center, radius, x, y, ts);
            let lowest = expansion.lowest_rate();
            (ts, lowest, head, Box::new(move |t| expansion.eval(t)))
        }
    };
    // the eigen-expansion is smooth and decays like exp(-lowest t); geometric breaks
    // keep each panel within a few decay scales
    let t_end = ts + 45.0 / lowest;
    let mut breaks = vec![ts];
    let mut b = ts;
    while b < t_end {
        b = (b * 4.0).min(t_end);
        breaks.push(b);
    }
    let tail = integrate_split(|t| tail_kernel(t) * u(t), &breaks, quad)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(head + tail)
}

/// Heat-kernel lower-bound shape `c0 (1 ∧ delta(x)delta(y)/t) t^{-1} exp(-c1 |x-y|^2 / t)`.
pub fn heat_kernel_lower_form(domain: &Domain, t: f64, x: &[f64], y: &[f64], c0: f64, c1: f64) -> Result<f64> {
    if domain.dim() != 2 {
        return domain_err_dim(domain.dim());
    }
    if !(t > 0.0) {
        return domain_error(format!("time must be positive, got {t}"));
    }
    let dx = domain.dist_to_boundary(x)?;
    let dy = domain.dist_to_boundary(y)?;
    let r2 = distance(x, y).powi(2);
    Ok(c0 * (dx * dy / t).min(1.0) / t * (-c1 * r2 / t).exp())
}

// ---------------------------------------------------------------------------
// Scaling and capacity

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProblem {
    pub spec: ProcessSpec,
    pub domain: Domain,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `lam^{d-2}`: the original Green function equals this times the image Green function.
    pub prefactor: f64,
}

/// Dilation by `lam`: weight `a lam^{(alpha-2)/alpha}` on `lam D` at `lam x`, `lam y`.
pub fn scaling_transform(spec: &ProcessSpec, domain: &Domain, x: &[f64], y: &[f64], lam: f64) -> Result<ScaledProblem> {
    if spec.variant != Variant::Plain {
        return Err(Error::UnsupportedVariant(spec.variant.name().into()));
    }
    if !(lam > 0.0) || !lam.is_finite() {
        return domain_error(format!("scale factor must be positive, got {lam}"));
    }
    let factor = lam.powf((spec.alpha - 2.0) / spec.alpha);
    let scaled_spec = ProcessSpec::new(
        spec.d,
        spec.alpha,
        spec.a * factor,
        Variant::Plain,
        spec.m_cap * factor,
    )?;
    Ok(ScaledProblem {
        spec: scaled_spec,
        domain: domain.scaled(lam)?,
        x: x.iter().map(|v| v * lam).collect(),
        y: y.iter().map(|v| v * lam).collect(),
        prefactor: lam.powi(spec.d as i32 - 2),
    })
}

/// Capacity of the closed disk `|x| <= r` relative to the unit disk, from the uniform
/// equilibrium measure on the circle `|x| = r`.
pub fn capacity_concentric(r: f64) -> Result<f64> {
    capacity_concentric_with(r, &QuadSpec::tight())
}

pub fn capacity_concentric_with(r: f64, quad: &QuadSpec) -> Result<f64> {
    if !(r > 0.0 && r < 0.75) {
        return domain_error(format!("radius must lie in (0, 3/4), got {r}"));
    }
    let num = (1.0 - r * r).powi(2);
    // potential at (r, 0) of the uniform probability on the circle, by symmetry over (0, pi)
    let integrand = |theta: f64| {
        let s = (0.5 * theta).sin();
        let d2 = 4.0 * r * r * s * s;
        if d2 == 0.0 {
            return 0.0;
        }
        (num / d2).ln_1p() / (4.0 * PI)
    };
    let potential = integrate_adaptive(integrand, 0.0, PI, quad)? / PI;
    Ok(1.0 / potential)
}
