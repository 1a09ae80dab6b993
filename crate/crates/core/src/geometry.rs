//! Obstacles, configurations, boundary quadrature and rigid motions.

use crate::error::{CasimirError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Range;

pub type Point = [f64; 2];

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Truncated Fourier series `a0 + sum_k cos[k-1] cos(kt) + sin[k-1] sin(kt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    pub a0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigSeries {
    /// (value, first derivative, second derivative) at t.
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let mut v = self.a0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let kmax = self.cos.len().max(self.sin.len());
        for k in 1..=kmax {
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            v += a * c + b * s;
            d1 += kf * (b * c - a * s);
            d2 -= kf * kf * (a * c + b * s);
        }
        (v, d1, d2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Interval { a: f64, b: f64 },
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    Curve { x: TrigSeries, y: TrigSeries },
}

/// Point, first and second derivative of a closed curve at parameter t.
#[derive(Debug, Clone, Copy)]
pub struct CurveJet {
    pub p: Point,
    pub d1: Point,
    pub d2: Point,
}

impl Obstacle {
    pub fn interval(a: f64, b: f64) -> Self {
        Obstacle::Interval { a, b }
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Obstacle::Circle { center, radius }
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2]) -> Self {
        Obstacle::Ellipse { center, semi_axes }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Obstacle::Interval { .. } => 1,
            _ => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Obstacle::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite()) || a >= b {
                    return Err(CasimirError::Geometry(format!("interval needs a < b, got ({a}, {b})")));
                }
            }
            Obstacle::Circle { center, radius } => {
                if !finite(center) || !radius.is_finite() || *radius <= 0.0 {
                    return Err(CasimirError::Geometry(format!("circle radius must be positive, got {radius}")));
                }
            }
            Obstacle::Ellipse { center, semi_axes } => {
                if !finite(center) || !finite(semi_axes) || semi_axes[0] <= 0.0 || semi_axes[1] <= 0.0 {
                    return Err(CasimirError::Geometry(format!(
                        "ellipse semi-axes must be positive, got {semi_axes:?}"
                    )));
                }
            }
            Obstacle::Curve { x, y } => {
                let ok = [x, y]
                    .iter()
                    .all(|s| s.a0.is_finite() && finite(&s.cos) && finite(&s.sin));
                if !ok {
                    return Err(CasimirError::Geometry("non-finite curve coefficient".into()));
                }
                // reject degenerate parameterizations at a fine sampling
                let m = 4 * (x.cos.len().max(x.sin.len()).max(y.cos.len()).max(y.sin.len()) + 16);
                for i in 0..m {
                    let t = 2.0 * PI * i as f64 / m as f64;
                    let speed = norm(self.jet(t).d1);
                    if speed < 1e-12 {
                        return Err(CasimirError::DegenerateCurve { t, speed });
                    }
                }
                if self.signed_area().abs() < 1e-300 {
                    return Err(CasimirError::Geometry("curve encloses zero area".into()));
                }
            }
        }
        Ok(())
    }

    /// Curve jet; panics on an interval.
    pub fn jet(&self, t: f64) -> CurveJet {
        match self {
            Obstacle::Circle { center, radius } => {
                let (s, c) = t.sin_cos();
                CurveJet {
                    p: [center[0] + radius * c, center[1] + radius * s],
                    d1: [-radius * s, radius * c],
                    d2: [-radius * c, -radius * s],
                }
            }
            Obstacle::Ellipse { center, semi_axes } => {
                let (s, c) = t.sin_cos();
                let [a, b] = *semi_axes;
                CurveJet {
                    p: [center[0] + a * c, center[1] + b * s],
                    d1: [-a * s, b * c],
                    d2: [-a * c, -b * s],
                }
            }
            Obstacle::Curve { x, y } => {
                let (x0, x1, x2) = x.eval(t);
                let (y0, y1, y2) = y.eval(t);
                CurveJet {
                    p: [x0, y0],
                    d1: [x1, y1],
                    d2: [x2, y2],
                }
            }
            Obstacle::Interval { .. } => panic!("jet() called on an interval"),
        }
    }

    /// Signed enclosed area (positive for counter-clockwise curves).
    fn signed_area(&self) -> f64 {
        let m = 256;
        (0..m)
            .map(|i| {
                let j = self.jet(2.0 * PI * i as f64 / m as f64);
                0.5 * (j.p[0] * j.d1[1] - j.p[1] * j.d1[0])
            })
            .sum::<f64>()
            * (2.0 * PI / m as f64)
    }

    /// +1 for counter-clockwise curves, -1 otherwise.
    pub fn orientation(&self) -> f64 {
        match self {
            Obstacle::Circle { .. } | Obstacle::Ellipse { .. } | Obstacle::Interval { .. } => 1.0,
            Obstacle::Curve { .. } => self.signed_area().signum(),
        }
    }

    /// Outward unit normal of a curve with the given orientation.
    pub fn outward_normal(jet: &CurveJet, orientation: f64) -> Point {
        let s = norm(jet.d1);
        [orientation * jet.d1[1] / s, -orientation * jet.d1[0] / s]
    }

    pub fn translated(&self, d: Point) -> Obstacle {
        match self {
            Obstacle::Interval { a, b } => Obstacle::Interval { a: a + d[0], b: b + d[0] },
            Obstacle::Circle { center, radius } => Obstacle::Circle {
                center: [center[0] + d[0], center[1] + d[1]],
                radius: *radius,
            },
            Obstacle::Ellipse { center, semi_axes } => Obstacle::Ellipse {
                center: [center[0] + d[0], center[1] + d[1]],
                semi_axes: *semi_axes,
            },
            Obstacle::Curve { x, y } => {
                let mut x = x.clone();
                let mut y = y.clone();
                x.a0 += d[0];
                y.a0 += d[1];
                Obstacle::Curve { x, y }
            }
        }
    }

    /// Area centroid (interval midpoint in 1D).
    pub fn centroid(&self) -> Point {
        match self {
            Obstacle::Interval { a, b } => [0.5 * (a + b), 0.0],
            Obstacle::Circle { center, .. } | Obstacle::Ellipse { center, .. } => *center,
            Obstacle::Curve { .. } => {
                // Green's theorem moments on a fine trapezoid grid
                let m = 512;
                let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let j = self.jet(2.0 * PI * i as f64 / m as f64);
                    let cross = j.p[0] * j.d1[1] - j.p[1] * j.d1[0];
                    area += 0.5 * cross;
                    mx += j.p[0] * j.p[0] * j.d1[1] * 0.5;
                    my -= j.p[1] * j.p[1] * j.d1[0] * 0.5;
                }
                [mx / area, my / area]
            }
        }
    }

    /// Largest distance from `c` to the boundary.
    pub fn max_radius_from(&self, c: Point) -> f64 {
        match self {
            Obstacle::Interval { a, b } => (a - c[0]).abs().max((b - c[0]).abs()),
            Obstacle::Circle { center, radius } => norm(sub(*center, c)) + radius,
            _ => {
                let m = 1024;
                (0..m)
                    .map(|i| norm(sub(self.jet(2.0 * PI * i as f64 / m as f64).p, c)))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Whether a point lies strictly inside the obstacle.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Obstacle::Interval { a, b } => p[0] > *a && p[0] < *b,
            Obstacle::Circle { center, radius } => norm(sub(p, *center)) < *radius,
            Obstacle::Ellipse { center, semi_axes } => {
                let u = (p[0] - center[0]) / semi_axes[0];
                let v = (p[1] - center[1]) / semi_axes[1];
                u * u + v * v < 1.0
            }
            Obstacle::Curve { .. } => point_in_polygon(p, &self.polygon(512)),
        }
    }

    fn polygon(&self, m: usize) -> Vec<Point> {
        (0..m).map(|i| self.jet(2.0 * PI * i as f64 / m as f64).p).collect()
    }

    /// Distance from a point to the boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            Obstacle::Interval { a, b } => (p[0] - a).abs().min((p[0] - b).abs()),
            Obstacle::Circle { center, radius } => (norm(sub(p, *center)) - radius).abs(),
            _ => {
                let m = 256;
                let mut best_t = 0.0;
                let mut best = f64::INFINITY;
                for i in 0..m {
                    let t = 2.0 * PI * i as f64 / m as f64;
                    let d = norm(sub(self.jet(t).p, p));
                    if d < best {
                        best = d;
                        best_t = t;
                    }
                }
                // Newton on g(t) = <gamma(t) - p, gamma'(t)>
                let mut t = best_t;
                for _ in 0..30 {
                    let j = self.jet(t);
                    let r = sub(j.p, p);
                    let g = dot(r, j.d1);
                    let gp = dot(j.d1, j.d1) + dot(r, j.d2);
                    if gp <= 0.0 {
                        break;
                    }
                    let step = g / gp;
                    t -= step.clamp(-0.1, 0.1);
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                best.min(norm(sub(self.jet(t).p, p)))
            }
        }
    }
}

fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let orient = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn check_simple(obs: &Obstacle, m: usize) -> Result<()> {
    if !matches!(obs, Obstacle::Curve { .. }) {
        return Ok(());
    }
    let poly = obs.polygon(m);
    for i in 0..m {
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % m], poly[j], poly[(j + 1) % m]) {
                return Err(CasimirError::Geometry(format!(
                    "curve self-intersects near parameters {:.4} and {:.4}",
                    2.0 * PI * i as f64 / m as f64,
                    2.0 * PI * j as f64 / m as f64
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub dimension: usize,
    pub mass: f64,
    pub obstacles: Vec<Obstacle>,
}

impl Configuration {
    pub fn new(dimension: usize, mass: f64, obstacles: Vec<Obstacle>) -> Result<Self> {
        let c = Configuration {
            dimension,
            mass,
            obstacles,
        };
        c.validate()?;
        Ok(c)
    }

    /// Two intervals (a1, b1), (a2, b2) on the line, massless.
    pub fn two_intervals(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        Self::new(1, 0.0, vec![Obstacle::interval(a1, b1), Obstacle::interval(a2, b2)])
    }

    /// Discs of the given radii with centers on the x-axis, massless.
    pub fn two_discs(r1: f64, r2: f64, center_distance: f64) -> Result<Self> {
        Self::new(
            2,
            0.0,
            vec![Obstacle::circle([0.0, 0.0], r1), Obstacle::circle([center_distance, 0.0], r2)],
        )
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::new(self.dimension, mass, self.obstacles.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 1 && self.dimension != 2 {
            return Err(CasimirError::Geometry(format!(
                "dimension must be 1 or 2, got {}",
                self.dimension
            )));
        }
        if !self.mass.is_finite() || self.mass < 0.0 {
            return Err(CasimirError::InvalidParameter(format!("mass must be >= 0, got {}", self.mass)));
        }
        if self.obstacles.is_empty() {
            return Err(CasimirError::Geometry("configuration has no obstacles".into()));
        }
        for o in &self.obstacles {
            if o.dimension() != self.dimension {
                return Err(CasimirError::DimensionMismatch {
                    expected: self.dimension,
                    found: o.dimension(),
                });
            }
            o.validate()?;
            check_simple(o, 256)?;
        }
        for i in 0..self.obstacles.len() {
            for j in (i + 1)..self.obstacles.len() {
                let g = pair_gap(&self.obstacles[i], &self.obstacles[j]);
                if g <= 0.0 {
                    return Err(CasimirError::Overlap {
                        first: i,
                        second: j,
                        gap: g,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Distance from a point to the nearest obstacle boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.boundary_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `p` lies strictly inside some obstacle.
    pub fn inside_obstacle(&self, p: Point) -> Option<usize> {
        self.obstacles.iter().position(|o| o.contains(p))
    }
}

/// Gap between two obstacles; non-positive when they touch, cross or nest.
fn pair_gap(a: &Obstacle, b: &Obstacle) -> f64 {
    match (a, b) {
        (Obstacle::Interval { a: a1, b: b1 }, Obstacle::Interval { a: a2, b: b2 }) => {
            if b1 <= a2 {
                a2 - b1
            } else if b2 <= a1 {
                a1 - b2
            } else {
                -(b1.min(*b2) - a1.max(*a2))
            }
        }
        (Obstacle::Circle { center: c1, radius: r1 }, Obstacle::Circle { center: c2, radius: r2 }) => {
            norm(sub(*c1, *c2)) - r1 - r2
        }
        _ => curve_gap(a, b),
    }
}

fn curve_gap(a: &Obstacle, b: &Obstacle) -> f64 {
    let m = 256;
    let pa = a.polygon(m);
    let pb = b.polygon(m);
    for i in 0..m {
        for j in 0..m {
            if segments_cross(pa[i], pa[(i + 1) % m], pb[j], pb[(j + 1) % m]) {
                return -1.0;
            }
        }
    }
    if point_in_polygon(pa[0], &pb) || point_in_polygon(pb[0], &pa) {
        return -1.0;
    }
    // dense scan followed by Newton refinement of the closest few pairs
    let mut cands: Vec<(f64, usize, usize)> = Vec::with_capacity(m * m);
    for (i, p) in pa.iter().enumerate() {
        for (j, q) in pb.iter().enumerate() {
            cands.push((norm(sub(*p, *q)), i, j));
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0));
    let h = 2.0 * PI / m as f64;
    cands
        .iter()
        .take(4)
        .map(|&(d0, i, j)| d0.min(refine_pair(a, b, i as f64 * h, j as f64 * h)))
        .fold(f64::INFINITY, f64::min)
}

/// Newton iteration for the minimum of |a(t) - b(s)|^2 / 2.
fn refine_pair(a: &Obstacle, b: &Obstacle, mut t: f64, mut s: f64) -> f64 {
    for _ in 0..40 {
        let ja = a.jet(t);
        let jb = b.jet(s);
        let d = sub(ja.p, jb.p);
        let g = [dot(d, ja.d1), -dot(d, jb.d1)];
        let h11 = dot(ja.d1, ja.d1) + dot(d, ja.d2);
        let h22 = dot(jb.d1, jb.d1) - dot(d, jb.d2);
        let h12 = -dot(ja.d1, jb.d1);
        let det = h11 * h22 - h12 * h12;
        if det <= 0.0 || h11 <= 0.0 {
            break;
        }
        let dt = (h22 * g[0] - h12 * g[1]) / det;
        let ds = (h11 * g[1] - h12 * g[0]) / det;
        t -= dt.clamp(-0.1, 0.1);
        s -= ds.clamp(-0.1, 0.1);
        if dt.abs().max(ds.abs()) < 1e-15 {
            break;
        }
    }
    norm(sub(a.jet(t).p, b.jet(s).p))
}

/// Minimum pairwise boundary distance; +inf for a single obstacle.
pub fn min_gap(config: &Configuration) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..config.obstacles.len() {
        for j in (i + 1)..config.obstacles.len() {
            g = g.min(pair_gap(&config.obstacles[i], &config.obstacles[j]));
        }
    }
    g
}

/// Distance from obstacle `j` to the nearest other obstacle.
pub fn gap_to_others(config: &Configuration, j: usize) -> f64 {
    (0..config.obstacles.len())
        .filter(|&i| i != j)
        .map(|i| pair_gap(&config.obstacles[i], &config.obstacles[j]))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDiscretization {
    pub dimension: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
    pub block_ranges: Vec<Range<usize>>,
    pub n_per_obstacle: Vec<usize>,
    /// |gamma'(t_i)| (1 in 1D).
    pub speeds: Vec<f64>,
    /// <gamma''(t_i), n_i> / |gamma'(t_i)|^2, the signed curvature seen from outside (0 in 1D).
    pub curvatures: Vec<f64>,
}

impl BoundaryDiscretization {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_ranges.iter().position(|r| r.contains(&i)).unwrap()
    }

    /// Largest distance between consecutive nodes on any curve.
    pub fn max_spacing(&self) -> f64 {
        if self.dimension == 1 {
            return 0.0;
        }
        let mut h: f64 = 0.0;
        for r in &self.block_ranges {
            let n = r.len();
            for k in 0..n {
                let a = self.nodes[r.start + k];
                let b = self.nodes[r.start + (k + 1) % n];
                h = h.max(norm(sub(a, b)));
            }
        }
        h
    }
}

/// Trapezoid-rule boundary quadrature with outward normals.
pub fn discretize(config: &Configuration, n_per_obstacle: usize) -> Result<BoundaryDiscretization> {
    config.validate()?;
    let mut d = BoundaryDiscretization {
        dimension: config.dimension,
        nodes: vec![],
        weights: vec![],
        normals: vec![],
        block_ranges: vec![],
        n_per_obstacle: vec![],
        speeds: vec![],
        curvatures: vec![],
    };
    if config.dimension == 1 {
        for o in &config.obstacles {
            if let Obstacle::Interval { a, b } = o {
                let start = d.nodes.len();
                d.nodes.extend([[*a, 0.0], [*b, 0.0]]);
                d.normals.extend([[-1.0, 0.0], [1.0, 0.0]]);
                d.weights.extend([1.0, 1.0]);
                d.speeds.extend([1.0, 1.0]);
                d.curvatures.extend([0.0, 0.0]);
                d.block_ranges.push(start..start + 2);
                d.n_per_obstacle.push(2);
            }
        }
        return Ok(d);
    }
    let n = n_per_obstacle;
    if n < 8 || !n.is_multiple_of(2) {
        return Err(CasimirError::InvalidParameter(format!(
            "n_per_obstacle must be even and >= 8, got {n}"
        )));
    }
    for o in &config.obstacles {
        let orient = o.orientation();
        let start = d.nodes.len();
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            let j = o.jet(t);
            let speed = norm(j.d1);
            if speed < 1e-12 {
                return Err(CasimirError::DegenerateCurve { t, speed });
            }
            let nrm = Obstacle::outward_normal(&j, orient);
            d.nodes.push(j.p);
            d.normals.push(nrm);
            d.weights.push(speed * 2.0 * PI / n as f64);
            d.speeds.push(speed);
            d.curvatures.push(dot(j.d2, nrm) / (speed * speed));
        }
        d.block_ranges.push(start..start + n);
        d.n_per_obstacle.push(n);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub obstacle_index: usize,
    pub translation: Point,
}

pub fn apply_motion(config: &Configuration, motion: RigidMotion) -> Result<Configuration> {
    let j = motion.obstacle_index;
    if j >= config.obstacles.len() {
        return Err(CasimirError::InvalidParameter(format!(
            "obstacle index {j} out of range (have {})",
            config.obstacles.len()
        )));
    }
    let mut obstacles = config.obstacles.clone();
    obstacles[j] = obstacles[j].translated(motion.translation);
    Configuration::new(config.dimension, config.mass, obstacles)
}

/// Translate every obstacle by the same vector.
pub fn translate_all(config: &Configuration, d: Point) -> Result<Configuration> {
    Configuration::new(
        config.dimension,
        config.mass,
        config.obstacles.iter().map(|o| o.translated(d)).collect(),
    )
}
