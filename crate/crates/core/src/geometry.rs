//! Catalog of bounded C^{1,1} domains with exact distance to the boundary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    IntervalUnion { intervals: Vec<[f64; 2]> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    BallUnion { centers: Vec<Vec<f64>>, radii: Vec<f64> },
}

/// A validated catalog domain. Components are indexed in construction order
/// (intervals sorted left to right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainKind", into = "DomainKind")]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
}

impl TryFrom<DomainKind> for Domain {
    type Error = Error;
    fn try_from(kind: DomainKind) -> Result<Self> {
        Domain::new(kind)
    }
}

impl From<Domain> for DomainKind {
    fn from(d: Domain) -> Self {
        d.kind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPoint {
    pub coords: Vec<f64>,
    pub component_id: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleStrategy {
    Uniform,
    /// Points within `depth` of the boundary.
    BoundaryLayer(f64),
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_dim(d: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        return domain(format!("dimension must be 1, 2 or 3, got {d}"));
    }
    Ok(())
}

fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        _ => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
    }
}

impl Domain {
    pub fn new(kind: DomainKind) -> Result<Self> {
        let (kind, dim) = match kind {
            DomainKind::IntervalUnion { mut intervals } => {
                if intervals.is_empty() {
                    return domain("interval union needs at least one interval");
                }
                for iv in &intervals {
                    if !(iv[0] < iv[1]) || !iv[0].is_finite() || !iv[1].is_finite() {
                        return domain(format!("interval ({}, {}) is empty or unbounded", iv[0], iv[1]));
                    }
                }
                intervals.sort_by(|a, b| a[0].total_cmp(&b[0]));
                for w in intervals.windows(2) {
                    if !(w[1][0] > w[0][1]) {
                        return domain("intervals must be pairwise disjoint with positive gaps");
                    }
                }
                (DomainKind::IntervalUnion { intervals }, 1)
            }
            DomainKind::Ball { center, radius } => {
                check_dim(center.len())?;
                if !(radius > 0.0) || !radius.is_finite() {
                    return domain(format!("ball radius must be positive, got {radius}"));
                }
                let d = center.len();
                (DomainKind::Ball { center, radius }, d)
            }
            DomainKind::Annulus { center, r_in, r_out } => {
                check_dim(center.len())?;
                if center.len() < 2 {
                    return domain("annulus needs dimension 2 or 3");
                }
                if !(r_in > 0.0 && r_in < r_out) || !r_out.is_finite() {
                    return domain(format!("annulus needs 0 < r_in < r_out, got {r_in}, {r_out}"));
                }
                let d = center.len();
                (DomainKind::Annulus { center, r_in, r_out }, d)
            }
            DomainKind::BallUnion { centers, radii } => {
                if centers.is_empty() || centers.len() != radii.len() {
                    return domain("ball union needs matching non-empty centers and radii");
                }
                let d = centers[0].len();
                check_dim(d)?;
                for (c, r) in centers.iter().zip(&radii) {
                    if c.len() != d {
                        return Err(Error::Shape { expected: d, got: c.len() });
                    }
                    if !(*r > 0.0) || !r.is_finite() {
                        return domain(format!("ball radius must be positive, got {r}"));
                    }
                }
                for i in 0..centers.len() {
                    for j in i + 1..centers.len() {
                        if !(distance(&centers[i], &centers[j]) - radii[i] - radii[j] > 0.0) {
                            return domain("balls must be pairwise disjoint with positive gaps");
                        }
                    }
                }
                (DomainKind::BallUnion { centers, radii }, d)
            }
        };
        Ok(Self { kind, dim })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DomainKind::IntervalUnion {
            intervals: vec![[lo, hi]],
        })
    }

    pub fn interval_union(intervals: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(DomainKind::IntervalUnion { intervals })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(DomainKind::Ball { center, radius })
    }

    pub fn unit_disk() -> Self {
        Self::ball(vec![0.0, 0.0], 1.0).expect("valid disk")
    }

    pub fn annulus(center: Vec<f64>, r_in: f64, r_out: f64) -> Result<Self> {
        Self::new(DomainKind::Annulus { center, r_in, r_out })
    }

    pub fn ball_union(centers: Vec<Vec<f64>>, radii: Vec<f64>) -> Result<Self> {
        Self::new(DomainKind::BallUnion { centers, radii })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => intervals.len(),
            DomainKind::BallUnion { radii, .. } => radii.len(),
            _ => 1,
        }
    }

    fn check_shape(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Signed distance to the boundary of component `c`: positive inside, negative outside.
    pub fn signed_component_distance(&self, c: usize, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => {
                let iv = intervals[c];
                (x[0] - iv[0]).min(iv[1] - x[0])
            }
            DomainKind::Ball { center, radius } => radius - distance(x, center),
            DomainKind::Annulus { center, r_in, r_out } => {
                let r = distance(x, center);
                (r - r_in).min(r_out - r)
            }
            DomainKind::BallUnion { centers, radii } => radii[c] - distance(x, &centers[c]),
        }
    }

    /// Component containing `x` together with the distance to its boundary.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, f64)> {
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => {
                let v = x[0];
                // intervals are sorted; few components, linear scan is fastest
                for (i, iv) in intervals.iter().enumerate() {
                    if v > iv[0] && v < iv[1] {
                        return Some((i, (v - iv[0]).min(iv[1] - v)));
                    }
                }
                None
            }
            DomainKind::BallUnion { radii, .. } => {
                for c in 0..radii.len() {
                    let s = self.signed_component_distance(c, x);
                    if s > 0.0 {
                        return Some((c, s));
                    }
                }
                None
            }
            _ => {
                let s = self.signed_component_distance(0, x);
                (s > 0.0).then_some((0, s))
            }
        }
    }

    pub fn component_of(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim {
            return None;
        }
        self.locate(x).map(|(c, _)| c)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.component_of(x).is_some()
    }

    /// Exact distance to the boundary; zero outside the domain (boundary points count as outside).
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_shape(x)?;
        Ok(self.locate(x).map_or(0.0, |(_, s)| s))
    }

    pub fn point(&self, x: &[f64]) -> Result<DomainPoint> {
        self.check_shape(x)?;
        match self.locate(x) {
            Some((c, s)) => Ok(DomainPoint {
                coords: x.to_vec(),
                component_id: c,
                delta: s,
            }),
            None => domain(format!("point {x:?} is not inside the domain")),
        }
    }

    /// Nearest point of the boundary of component `c`, written into `out`.
    pub fn project_to_component_boundary(&self, c: usize, x: &[f64], out: &mut [f64]) {
        let to_sphere = |center: &[f64], r: f64, out: &mut [f64]| {
            let dist = distance(x, center);
            for k in 0..x.len() {
                let dir = if dist > 0.0 {
                    (x[k] - center[k]) / dist
                } else if k == 0 {
                    1.0
                } else {
                    0.0
                };
                out[k] = center[k] + r * dir;
            }
        };
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => {
                let iv = intervals[c];
                out[0] = if (x[0] - iv[0]).abs() <= (iv[1] - x[0]).abs() {
                    iv[0]
                } else {
                    iv[1]
                };
            }
            DomainKind::Ball { center, radius } => to_sphere(center, *radius, out),
            DomainKind::Annulus { center, r_in, r_out } => {
                let r = distance(x, center);
                let target = if (r - r_in).abs() <= (r_out - r).abs() {
                    *r_in
                } else {
                    *r_out
                };
                to_sphere(center, target, out)
            }
            DomainKind::BallUnion { centers, radii } => to_sphere(&centers[c], radii[c], out),
        }
    }

    /// Outward unit normal of component `c` at its boundary point nearest to `x`.
    pub fn outward_normal(&self, c: usize, x: &[f64], out: &mut [f64]) {
        let radial = |center: &[f64], sign: f64, out: &mut [f64]| {
            let dist = distance(x, center);
            for k in 0..x.len() {
                out[k] = if dist > 0.0 {
                    sign * (x[k] - center[k]) / dist
                } else if k == 0 {
                    sign
                } else {
                    0.0
                };
            }
        };
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => {
                let iv = intervals[c];
                out[0] = if (x[0] - iv[0]).abs() <= (iv[1] - x[0]).abs() {
                    -1.0
                } else {
                    1.0
                };
            }
            DomainKind::Ball { center, .. } => radial(center, 1.0, out),
            DomainKind::Annulus { center, r_in, r_out } => {
                let r = distance(x, center);
                let sign = if (r - r_in).abs() <= (r_out - r).abs() {
                    -1.0
                } else {
                    1.0
                };
                radial(center, sign, out)
            }
            DomainKind::BallUnion { centers, .. } => radial(&centers[c], 1.0, out),
        }
    }

    /// Component whose boundary passes through `z` (within 1e-12 relative to the domain size).
    pub fn boundary_owner(&self, z: &[f64]) -> Option<usize> {
        if z.len() != self.dim {
            return None;
        }
        let tol = 1e-12 * self.diameter().max(1.0);
        (0..self.n_components()).find(|&c| self.signed_component_distance(c, z).abs() <= tol)
    }

    pub fn component_volume(&self, c: usize) -> f64 {
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => intervals[c][1] - intervals[c][0],
            DomainKind::Ball { radius, .. } => ball_volume(self.dim, *radius),
            DomainKind::Annulus { r_in, r_out, .. } => {
                ball_volume(self.dim, *r_out) - ball_volume(self.dim, *r_in)
            }
            DomainKind::BallUnion { radii, .. } => ball_volume(self.dim, radii[c]),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => intervals[intervals.len() - 1][1] - intervals[0][0],
            DomainKind::Ball { radius, .. } => 2.0 * radius,
            DomainKind::Annulus { r_out, .. } => 2.0 * r_out,
            DomainKind::BallUnion { centers, radii } => {
                let mut best: f64 = 0.0;
                for i in 0..centers.len() {
                    best = best.max(2.0 * radii[i]);
                    for j in i + 1..centers.len() {
                        best = best.max(distance(&centers[i], &centers[j]) + radii[i] + radii[j]);
                    }
                }
                best
            }
        }
    }

    /// Distance between the closures of components `i` and `j`.
    pub fn component_gap(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => {
                let (a, b) = if intervals[i][0] < intervals[j][0] { (i, j) } else { (j, i) };
                intervals[b][0] - intervals[a][1]
            }
            DomainKind::BallUnion { centers, radii } => {
                distance(&centers[i], &centers[j]) - radii[i] - radii[j]
            }
            _ => 0.0,
        }
    }

    /// Smallest gap between distinct components (`inf` when connected).
    pub fn gap(&self) -> f64 {
        let n = self.n_components();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(self.component_gap(i, j));
            }
        }
        best
    }

    /// Components can be chained so that consecutive ones are closer than `lambda`.
    pub fn is_roughly_connected(&self, lambda: f64) -> bool {
        let n = self.n_components();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.component_gap(i, j) < lambda {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// The dilation `lam * D`.
    pub fn scaled(&self, lam: f64) -> Result<Self> {
        if !(lam > 0.0) {
            return domain(format!("scale factor must be positive, got {lam}"));
        }
        let sv = |v: &[f64]| v.iter().map(|x| x * lam).collect::<Vec<_>>();
        let kind = match &self.kind {
            DomainKind::IntervalUnion { intervals } => DomainKind::IntervalUnion {
                intervals: intervals.iter().map(|iv| [iv[0] * lam, iv[1] * lam]).collect(),
            },
            DomainKind::Ball { center, radius } => DomainKind::Ball {
                center: sv(center),
                radius: radius * lam,
            },
            DomainKind::Annulus { center, r_in, r_out } => DomainKind::Annulus {
                center: sv(center),
                r_in: r_in * lam,
                r_out: r_out * lam,
            },
            DomainKind::BallUnion { centers, radii } => DomainKind::BallUnion {
                centers: centers.iter().map(|c| sv(c)).collect(),
                radii: radii.iter().map(|r| r * lam).collect(),
            },
        };
        Self::new(kind)
    }

    fn sample_component<R: Rng + ?Sized>(&self, c: usize, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            DomainKind::IntervalUnion { intervals } => {
                let iv = intervals[c];
                out[0] = iv[0] + (iv[1] - iv[0]) * rng.random::<f64>();
            }
            _ => {
                let (center, r) = match &self.kind {
                    DomainKind::Ball { center, radius } => (center, *radius),
                    DomainKind::Annulus { center, r_out, .. } => (center, *r_out),
                    DomainKind::BallUnion { centers, radii } => (&centers[c], radii[c]),
                    DomainKind::IntervalUnion { .. } => unreachable!(),
                };
                loop {
                    for k in 0..self.dim {
                        out[k] = 2.0 * rng.random::<f64>() - 1.0;
                    }
                    if norm(out) < 1.0 {
                        for k in 0..self.dim {
                            out[k] = center[k] + r * out[k];
                        }
                        if self.signed_component_distance(c, out) > 0.0 {
                            return;
                        }
                    }
                }
            }
        }
    }

    /// Random interior point; `BoundaryLayer(depth)` restricts to points with `delta < depth`.
    pub fn sample_interior<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        strategy: SampleStrategy,
    ) -> Result<DomainPoint> {
        let n = self.n_components();
        let total: f64 = (0..n).map(|c| self.component_volume(c)).sum();
        let mut x = vec![0.0; self.dim];
        let depth = match strategy {
            SampleStrategy::Uniform => f64::INFINITY,
            SampleStrategy::BoundaryLayer(d) if d > 0.0 => d,
            SampleStrategy::BoundaryLayer(d) => {
                return domain(format!("boundary layer depth must be positive, got {d}"))
            }
        };
        for _ in 0..100_000 {
            let mut pick = rng.random::<f64>() * total;
            let mut c = n - 1;
            for k in 0..n {
                let v = self.component_volume(k);
                if pick < v {
                    c = k;
                    break;
                }
                pick -= v;
            }
            self.sample_component(c, rng, &mut x);
            if let Some((comp, delta)) = self.locate(&x) {
                if delta < depth {
                    return Ok(DomainPoint {
                        coords: x,
                        component_id: comp,
                        delta,
                    });
                }
            }
        }
        Err(Error::Sampling(format!(
            "no point with delta < {depth} after 100000 attempts"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_intervals() -> Domain {
        Domain::interval_union(vec![[1.0, 2.0], [-2.0, -1.0]]).unwrap()
    }

    fn two_balls() -> Domain {
        Domain::ball_union(vec![vec![-2.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn distances() {
        let b = Domain::unit_disk();
        assert_eq!(b.dist_to_boundary(&[0.0, 0.0]).unwrap(), 1.0);
        let i = Domain::interval(-1.0, 1.0).unwrap();
        assert!((i.dist_to_boundary(&[0.4]).unwrap() - 0.6).abs() < 1e-15);
        let a = Domain::annulus(vec![0.0, 0.0], 0.5, 1.0).unwrap();
        assert!((a.dist_to_boundary(&[0.7, 0.0]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(a.dist_to_boundary(&[0.1, 0.0]).unwrap(), 0.0);
        assert!(matches!(b.dist_to_boundary(&[0.0]), Err(Error::Shape { .. })));
        // boundary points are exterior
        assert_eq!(b.component_of(&[1.0, 0.0]), None);
    }

    #[test]
    fn components() {
        let d = two_intervals();
        assert_eq!(d.component_of(&[1.5]), Some(1));
        assert_eq!(d.component_of(&[-1.5]), Some(0));
        assert_eq!(d.component_of(&[0.0]), None);
        assert_eq!(two_balls().component_of(&[2.0, 0.0, 0.0]), Some(1));
    }

    #[test]
    fn diameter_and_gap() {
        let b = Domain::unit_disk();
        assert_eq!(b.diameter(), 2.0);
        assert_eq!(b.gap(), f64::INFINITY);
        let d = two_intervals();
        assert_eq!(d.diameter(), 4.0);
        assert_eq!(d.gap(), 2.0);
        let u = two_balls();
        assert_eq!(u.diameter(), 6.0);
        assert_eq!(u.gap(), 2.0);
    }

    #[test]
    fn validation() {
        assert!(Domain::interval_union(vec![[0.0, 1.0], [1.0, 2.0]]).is_err());
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball_union(vec![vec![0.0, 0.0], vec![1.5, 0.0]], vec![1.0, 1.0]).is_err());
        assert!(Domain::annulus(vec![0.0, 0.0], 1.0, 0.5).is_err());
        assert!(Domain::ball(vec![0.0; 4], 1.0).is_err());
    }

    #[test]
    fn rough_connectivity() {
        let d = two_intervals();
        assert!(!d.is_roughly_connected(1.5));
        assert!(d.is_roughly_connected(2.5));
        assert!(Domain::unit_disk().is_roughly_connected(0.01));
        let chain = Domain::interval_union(vec![[0.0, 1.0], [1.5, 2.0], [2.4, 3.0]]).unwrap();
        assert!(chain.is_roughly_connected(0.6));
        assert!(!chain.is_roughly_connected(0.45));
    }

    #[test]
    fn projection_and_owner() {
        let u = two_balls();
        let mut z = [0.0; 3];
        u.project_to_component_boundary(1, &[2.5, 0.1, 0.0], &mut z);
        assert!((distance(&z, &[2.0, 0.0, 0.0]) - 1.0).abs() < 1e-14);
        assert_eq!(u.boundary_owner(&z), Some(1));
        assert_eq!(u.boundary_owner(&[0.0, 0.0, 0.0]), None);
        let mut n = [0.0; 3];
        u.outward_normal(0, &[-2.5, 0.0, 0.0], &mut n);
        assert_eq!(n, [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = Domain::unit_disk();
        for _ in 0..1000 {
            let p = b.sample_interior(&mut rng, SampleStrategy::Uniform).unwrap();
            assert!(norm(&p.coords) < 1.0);
            let q = b.sample_interior(&mut rng, SampleStrategy::BoundaryLayer(0.05)).unwrap();
            assert!(q.delta < 0.05);
        }
        // component frequencies proportional to lengths
        let d = Domain::interval_union(vec![[0.0, 1.0], [2.0, 5.0]]).unwrap();
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| d.sample_interior(&mut rng, SampleStrategy::Uniform).unwrap().component_id == 1)
            .count() as f64;
        let p = 0.75;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() < 5.0 * sd);
    }

    #[test]
    fn scaling_and_serde() {
        let u = two_balls().scaled(2.0).unwrap();
        assert_eq!(u.gap(), 4.0);
        let json = serde_json::to_string(&u).unwrap();
        let back: Domain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
        let bad = r#"{"kind":"ball","center":[0,0],"radius":-1}"#;
        assert!(serde_json::from_str::<Domain>(bad).is_err());
    }
}
