//! Relative Green's kernel, relative stress tensor and the three force routes.
//!
//! At frequency κ the relative resolvent kernel is
//! `G_rel(x, y) = -h(x)ᵀ E h(y)`, `E = B⁻¹ - B̃⁻¹ = -B⁻¹ T B̃⁻¹`, where
//! `h(x)_i = √w_i G(x - z_i)` and B, B̃ are the symmetric forms of Q and its
//! block diagonal. Derivatives in x and y fall on h. Inside an obstacle the
//! same formula gives the relative kernel too, since both the full and the
//! single-obstacle Dirichlet kernels vanish there.
//!
//! Frequency integrals use κ = √(m² + u²) on the energy grid:
//! `H⁻¹_rel = (2/π) ∫ G_rel du` and `H_rel(x, x) = -(2/π) ∫ u² G_rel(x, x) du`.
//!
//! Forces are physical forces, `F = -∇E` for the displaced obstacle. With
//! `dE/dε = Z·∮_Σ T n dσ`, the surface route reports `-∮_Σ T n dσ`, and the
//! boundary route `-¼ ∮ d n_out dσ` with `d` the exterior boundary value of
//! `∂_ν∂'_ν (H̆_O⁻¹ - H̆_{O_j}⁻¹)`.

use crate::energy::{build_frequency_grid, integrate_on_grid, relative_energy_on, FrequencyQuadrature};
use crate::error::{CasimirError, Result};
use crate::geometry::{apply_motion, discretize, min_gap, BoundaryDiscretization, Configuration, Point, RigidMotion};
use crate::layerop::{assemble_q, green_jet, normal_trace_operator};
use crate::spectral::{block_factors, resolved_n, UNDERFLOW_EXPONENT};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelKernelJet {
    pub x: Point,
    pub y: Point,
    /// None when the frequency integral diverges (massless d = 1).
    pub value: Option<f64>,
    pub grad_x: Point,
    pub grad_y: Point,
    /// ∂_i ∂'_j
    pub hessian_xy: Mat2,
    /// ∂_i ∂_j
    pub hessian_xx: Mat2,
}

impl RelKernelJet {
    fn zero(x: Point, y: Point) -> Self {
        RelKernelJet {
            x,
            y,
            value: Some(0.0),
            grad_x: [0.0; 2],
            grad_y: [0.0; 2],
            hessian_xy: [[0.0; 2]; 2],
            hessian_xx: [[0.0; 2]; 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorSample {
    pub point: Point,
    pub dimension: usize,
    pub t00: f64,
    /// Spatial components; only `[0][0]` is used in d = 1.
    pub tij: Mat2,
    /// ½ H_rel(x, x)
    pub half_h_rel: f64,
    /// Δ(H⁻¹_rel restricted to the diagonal)
    pub laplacian_diag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceRoute {
    FiniteDifference,
    SurfaceIntegral,
    BoundaryHadamard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCircle {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryLimit {
    /// Jump relation of the normal derivative of the single layer.
    Jump,
    /// Outward offsets (decreasing) extrapolated to zero.
    Offsets(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceParams {
    pub n_per_obstacle: usize,
    pub tol: f64,
    pub step: Option<f64>,
    pub sigma: Option<SigmaCircle>,
    pub n_sigma: Option<usize>,
    pub limit: Option<BoundaryLimit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceResult {
    pub obstacle_index: usize,
    pub force: Point,
    pub route: ForceRoute,
    pub error_estimate: f64,
    /// Surface route with the ⅛Δ terms dropped, kept as a diagnostic.
    pub force_without_laplacian: Option<Point>,
    /// Boundary values d at the nodes of the obstacle, when every frequency
    /// used the same discretization (boundary route only).
    pub boundary_values: Option<Vec<(Point, f64)>>,
    pub params: ForceParams,
}

/// E = B⁻¹ - B̃⁻¹ at one frequency, with the block inverses kept.
pub struct RelOperator {
    pub kappa: f64,
    pub disc: BoundaryDiscretization,
    sw: Vec<f64>,
    e: DMatrix<f64>,
    block_inv: Vec<DMatrix<f64>>,
}

impl RelOperator {
    pub fn new(disc: BoundaryDiscretization, kappa: f64) -> Result<Self> {
        let q = assemble_q(&disc, kappa, 0.0)?;
        let n = q.dim();
        let chol = block_factors(&q.entries, &q.block_ranges, kappa)?;
        let block_inv: Vec<DMatrix<f64>> = chol.iter().map(|c| c.inverse()).collect();
        let full = nalgebra::Cholesky::new(q.entries.clone()).ok_or(CasimirError::NonPositiveDeterminant { det: 0.0, kappa })?;
        let binv = full.inverse();
        // T B̃⁻¹, then E = -B⁻¹ (T B̃⁻¹): no cancellation when E is small
        let mut tb = DMatrix::<f64>::zeros(n, n);
        for (q_idx, rq) in q.block_ranges.iter().enumerate() {
            for (p_idx, rp) in q.block_ranges.iter().enumerate() {
                if p_idx == q_idx {
                    continue;
                }
                let t_pq = q.entries.view((rp.start, rq.start), (rp.len(), rq.len()));
                let prod = t_pq * &block_inv[q_idx];
                tb.view_mut((rp.start, rq.start), (rp.len(), rq.len())).copy_from(&prod);
            }
        }
        let mut e = -(&binv * tb);
        let et = e.transpose();
        e += et;
        e *= 0.5;
        let sw = disc.weights.iter().map(|w| w.sqrt()).collect();
        Ok(RelOperator {
            kappa,
            disc,
            sw,
            e,
            block_inv,
        })
    }

    /// B⁻¹ - B_pp⁻¹ (only obstacle p removed).
    pub fn matrix_excluding(&self, p: usize) -> DMatrix<f64> {
        let mut m = self.e.clone();
        for (q, r) in self.disc.block_ranges.iter().enumerate() {
            if q != p {
                let mut v = m.view_mut((r.start, r.start), (r.len(), r.len()));
                v += &self.block_inv[q];
            }
        }
        m
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// Columns [h, ∂₁h, ∂₂h, ∂₁₁h, ∂₁₂h, ∂₂₂h] at x.
    fn jet_columns(&self, x: Point) -> DMatrix<f64> {
        let n = self.disc.len();
        let dim = self.disc.dimension;
        let mut c = DMatrix::<f64>::zeros(n, 6);
        for i in 0..n {
            let (g, d, h) = green_jet(dim, self.kappa, x, self.disc.nodes[i]);
            let s = self.sw[i];
            c[(i, 0)] = s * g;
            c[(i, 1)] = s * d[0];
            c[(i, 2)] = s * d[1];
            c[(i, 3)] = s * h[0][0];
            c[(i, 4)] = s * h[0][1];
            c[(i, 5)] = s * h[1][1];
        }
        c
    }

    /// Jets of -h(x)ᵀ M h(y) for each pair.
    pub fn jets_with(&self, m: &DMatrix<f64>, pairs: &[(Point, Point)]) -> Vec<RelKernelJet> {
        pairs
            .iter()
            .map(|&(x, y)| {
                let cx = self.jet_columns(x);
                let cy = if x == y { cx.clone() } else { self.jet_columns(y) };
                let my = m * cy.columns(0, 3);
                let f = |a: usize, b: usize| -> f64 { -cx.column(a).dot(&my.column(b)) };
                RelKernelJet {
                    x,
                    y,
                    value: Some(f(0, 0)),
                    grad_x: [f(1, 0), f(2, 0)],
                    grad_y: [f(0, 1), f(0, 2)],
                    hessian_xy: [[f(1, 1), f(1, 2)], [f(2, 1), f(2, 2)]],
                    hessian_xx: [[f(3, 0), f(4, 0)], [f(4, 0), f(5, 0)]],
                }
            })
            .collect()
    }

    pub fn jets(&self, pairs: &[(Point, Point)]) -> Vec<RelKernelJet> {
        self.jets_with(&self.e, pairs)
    }
}

/// Discretizations per node count, shared by all frequencies of one call.
struct DiscCache<'a> {
    config: &'a Configuration,
    n: usize,
    cache: HashMap<usize, BoundaryDiscretization>,
}

impl<'a> DiscCache<'a> {
    fn new(config: &'a Configuration, n: usize) -> Self {
        DiscCache {
            config,
            n,
            cache: HashMap::new(),
        }
    }

    fn prepare(&mut self, kappas: &[f64]) -> Result<Vec<usize>> {
        let ns = kappas
            .iter()
            .map(|&k| resolved_n(self.config, k, self.n))
            .collect::<Result<Vec<_>>>()?;
        for &n in &ns {
            if let std::collections::hash_map::Entry::Vacant(e) = self.cache.entry(n) {
                e.insert(discretize(self.config, n)?);
            }
        }
        Ok(ns)
    }
}

/// Smallest admissible distance from an evaluation point to the boundary.
pub fn proximity_threshold(config: &Configuration, n: usize) -> Result<f64> {
    if config.dimension == 1 {
        return Ok(1e-12 * (1.0 + min_gap(config).min(1.0)));
    }
    Ok(discretize(config, n)?.max_spacing())
}

fn check_points(config: &Configuration, n: usize, pts: &[Point]) -> Result<()> {
    let thr = proximity_threshold(config, n)?;
    for &p in pts {
        let d = config.boundary_distance(p);
        if !(d > thr) {
            return Err(CasimirError::Proximity {
                x: p[0],
                y: p[1],
                dist: d,
                threshold: thr,
            });
        }
    }
    Ok(())
}

fn default_grid(config: &Configuration, tol: f64) -> Result<FrequencyQuadrature> {
    build_frequency_grid(config.mass, min_gap(config), config.dimension, tol)
}

/// Relative resolvent kernel jet at one frequency.
pub fn rel_resolvent_jet(config: &Configuration, kappa: f64, x: Point, y: Point, n_per_obstacle: usize) -> Result<RelKernelJet> {
    config.validate()?;
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(CasimirError::domain("rel_resolvent_jet", format!("kappa must be positive, got {kappa}")));
    }
    check_points(config, n_per_obstacle, &[x, y])?;
    if config.len() < 2 || kappa * min_gap(config) > UNDERFLOW_EXPONENT {
        return Ok(RelKernelJet::zero(x, y));
    }
    let n = resolved_n(config, kappa, n_per_obstacle)?;
    let op = RelOperator::new(discretize(config, n)?, kappa).map_err(|e| e.at_kappa(kappa))?;
    Ok(op.jets(&[(x, y)])[0])
}

/// Per-frequency samples of jets for many pairs, on the grid nodes.
fn sample_jets(
    config: &Configuration,
    grid: &FrequencyQuadrature,
    n_per_obstacle: usize,
    pairs: &[(Point, Point)],
) -> Result<Vec<Vec<RelKernelJet>>> {
    let kappas = grid.kappa_nodes();
    let mut dc = DiscCache::new(config, n_per_obstacle);
    let ns = dc.prepare(&kappas)?;
    let g = min_gap(config);
    let dc = &dc;
    kappas
        .par_iter()
        .zip(ns.par_iter())
        .map(|(&k, n)| {
            if k * g > UNDERFLOW_EXPONENT {
                return Ok(pairs.iter().map(|&(x, y)| RelKernelJet::zero(x, y)).collect());
            }
            let op = RelOperator::new(dc.cache[n].clone(), k).map_err(|e| e.at_kappa(k))?;
            Ok(op.jets(pairs))
        })
        .collect()
}

fn integrate_series(grid: &FrequencyQuadrature, xs: &[f64]) -> (f64, f64) {
    let r = integrate_on_grid(grid, xs);
    (r.value, r.quadrature_error + r.endpoint_error)
}

/// Frequency-integrated jets of H⁻¹_rel = (2/π) ∫ G_rel du.
fn integrate_jets(config: &Configuration, grid: &FrequencyQuadrature, samples: &[Vec<RelKernelJet>], pairs: &[(Point, Point)]) -> Vec<(RelKernelJet, f64)> {
    let c = 2.0 / PI;
    let value_diverges = config.dimension == 1 && config.mass == 0.0;
    (0..pairs.len())
        .map(|p| {
            let series = |f: &dyn Fn(&RelKernelJet) -> f64| -> (f64, f64) {
                let xs: Vec<f64> = samples.iter().map(|s| f(&s[p])).collect();
                let (v, e) = integrate_series(grid, &xs);
                (c * v, c * e)
            };
            let mut err: f64 = 0.0;
            let mut take = |f: &dyn Fn(&RelKernelJet) -> f64| {
                let (v, e) = series(f);
                err = err.max(e);
                v
            };
            let mut j = RelKernelJet::zero(pairs[p].0, pairs[p].1);
            j.value = if value_diverges { None } else { Some(take(&|s| s.value.unwrap_or(0.0))) };
            for a in 0..2 {
                j.grad_x[a] = take(&|s| s.grad_x[a]);
                j.grad_y[a] = take(&|s| s.grad_y[a]);
                for b in 0..2 {
                    j.hessian_xy[a][b] = take(&|s| s.hessian_xy[a][b]);
                    j.hessian_xx[a][b] = take(&|s| s.hessian_xx[a][b]);
                }
            }
            (j, err)
        })
        .collect()
}

/// Frequency-integrated kernel jet of H⁻¹_rel.
pub fn hinv_rel_jet(config: &Configuration, x: Point, y: Point, n_per_obstacle: usize, tol: f64) -> Result<RelKernelJet> {
    config.validate()?;
    check_points(config, n_per_obstacle, &[x, y])?;
    if config.len() < 2 {
        return Ok(RelKernelJet::zero(x, y));
    }
    let grid = default_grid(config, tol)?;
    let pairs = [(x, y)];
    let s = sample_jets(config, &grid, n_per_obstacle, &pairs)?;
    Ok(integrate_jets(config, &grid, &s, &pairs)[0].0)
}

/// H_rel(x, x) = -(2/π) ∫ u² G_rel(x, x; √(m² + u²)) du.
pub fn h_rel_diag(config: &Configuration, x: Point, n_per_obstacle: usize, tol: f64) -> Result<f64> {
    config.validate()?;
    check_points(config, n_per_obstacle, &[x])?;
    if config.len() < 2 {
        return Ok(0.0);
    }
    let grid = default_grid(config, tol)?;
    let s = sample_jets(config, &grid, n_per_obstacle, &[(x, x)])?;
    let xs: Vec<f64> = s.iter().zip(&grid.u_nodes).map(|(j, u)| u * u * j[0].value.unwrap_or(0.0)).collect();
    Ok(-2.0 / PI * integrate_series(&grid, &xs).0)
}

fn tensor_from(dimension: usize, point: Point, half_h: f64, hinv_xx: Mat2, hinv_xy: Mat2) -> TensorSample {
    let d = dimension;
    let mut lap = 0.0;
    for k in 0..d {
        lap += 2.0 * hinv_xx[k][k] + 2.0 * hinv_xy[k][k];
    }
    let mut tij = [[0.0; 2]; 2];
    for i in 0..d {
        for j in 0..d {
            let sym = 0.5 * (hinv_xy[i][j] + hinv_xy[j][i]);
            tij[i][j] = 0.5 * sym - if i == j { lap / 8.0 } else { 0.0 };
        }
    }
    TensorSample {
        point,
        dimension,
        t00: half_h + lap / 8.0,
        tij,
        half_h_rel: half_h,
        laplacian_diag: lap,
    }
}

/// T_rel at many points with one pass over the frequencies.
pub fn t_rel_many(config: &Configuration, points: &[Point], n_per_obstacle: usize, tol: f64) -> Result<Vec<TensorSample>> {
    config.validate()?;
    check_points(config, n_per_obstacle, points)?;
    if config.len() < 2 {
        return Ok(points.iter().map(|&p| tensor_from(config.dimension, p, 0.0, [[0.0; 2]; 2], [[0.0; 2]; 2])).collect());
    }
    let grid = default_grid(config, tol)?;
    Ok(tensor_batch(config, &grid, n_per_obstacle, points)?.into_iter().map(|(t, _)| t).collect())
}

fn tensor_batch(config: &Configuration, grid: &FrequencyQuadrature, n: usize, points: &[Point]) -> Result<Vec<(TensorSample, f64)>> {
    let pairs: Vec<(Point, Point)> = points.iter().map(|&p| (p, p)).collect();
    let samples = sample_jets(config, grid, n, &pairs)?;
    let jets = integrate_jets(config, grid, &samples, &pairs);
    Ok((0..points.len())
        .map(|p| {
            let xs: Vec<f64> = samples.iter().zip(&grid.u_nodes).map(|(s, u)| u * u * s[p].value.unwrap_or(0.0)).collect();
            let (h, herr) = integrate_series(grid, &xs);
            let half_h = -h / PI;
            let (j, err) = jets[p];
            (tensor_from(config.dimension, points[p], half_h, j.hessian_xx, j.hessian_xy), err.max(herr / PI))
        })
        .collect())
}

pub fn t_rel(config: &Configuration, x: Point, n_per_obstacle: usize, tol: f64) -> Result<TensorSample> {
    Ok(t_rel_many(config, &[x], n_per_obstacle, tol)?[0])
}

/// Default FD step as a fraction of the smallest gap.
pub const FD_STEP_FRACTION: f64 = 1e-3;

/// Force along `direction` by central differences of E with one Richardson
/// step; all four energies share the frequency grid of the base configuration.
pub fn force_fd(config: &Configuration, obstacle_index: usize, direction: Point, step: Option<f64>, n_per_obstacle: usize, tol: f64) -> Result<ForceResult> {
    force_fd_with(config, obstacle_index, direction, step, n_per_obstacle, tol, |c, grid| {
        relative_energy_on(c, n_per_obstacle, grid, tol).map(|r| r.value)
    })
}

/// As [`force_fd`], with the energy of each displaced configuration supplied
/// by `energy` (for example from cached Ξ samples).
pub fn force_fd_with<F>(
    config: &Configuration,
    obstacle_index: usize,
    direction: Point,
    step: Option<f64>,
    n_per_obstacle: usize,
    tol: f64,
    energy: F,
) -> Result<ForceResult>
where
    F: Fn(&Configuration, &FrequencyQuadrature) -> Result<f64>,
{
    config.validate()?;
    let len = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if !(len > 0.0) {
        return Err(CasimirError::InvalidParameter("direction must be nonzero".into()));
    }
    let dir = [direction[0] / len, direction[1] / len];
    let g = min_gap(config);
    let h = step.unwrap_or(FD_STEP_FRACTION * if g.is_finite() { g } else { 1.0 });
    let params = ForceParams {
        n_per_obstacle,
        tol,
        step: Some(h),
        sigma: None,
        n_sigma: None,
        limit: None,
    };
    if obstacle_index >= config.len() {
        return Err(CasimirError::InvalidParameter(format!("no obstacle {obstacle_index}")));
    }
    if config.len() < 2 {
        return Ok(ForceResult {
            obstacle_index,
            force: [0.0; 2],
            route: ForceRoute::FiniteDifference,
            error_estimate: 0.0,
            force_without_laplacian: None,
            boundary_values: None,
            params,
        });
    }
    let grid = default_grid(config, tol)?;
    let shifts = [h, -h, h / 2.0, -h / 2.0];
    let configs = shifts
        .iter()
        .map(|&s| {
            apply_motion(
                config,
                RigidMotion {
                    obstacle_index,
                    translation: [s * dir[0], s * dir[1]],
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let e = configs
        .iter()
        .map(|c| energy(c, &grid))
        .collect::<Result<Vec<_>>>()?;
    let d1 = (e[0] - e[1]) / (2.0 * h);
    let d2 = (e[2] - e[3]) / h;
    let rich = (4.0 * d2 - d1) / 3.0;
    let f = -rich;
    Ok(ForceResult {
        obstacle_index,
        force: [f * dir[0], f * dir[1]],
        route: ForceRoute::FiniteDifference,
        error_estimate: (rich - d2).abs(),
        force_without_laplacian: None,
        boundary_values: None,
        params,
    })
}

/// Full force vector by finite differences along each axis.
pub fn force_fd_vector(config: &Configuration, obstacle_index: usize, step: Option<f64>, n_per_obstacle: usize, tol: f64) -> Result<ForceResult> {
    let mut r = force_fd(config, obstacle_index, [1.0, 0.0], step, n_per_obstacle, tol)?;
    if config.dimension == 2 {
        let y = force_fd(config, obstacle_index, [0.0, 1.0], step, n_per_obstacle, tol)?;
        r.force[1] = y.force[1];
        r.error_estimate = r.error_estimate.hypot(y.error_estimate);
    }
    Ok(r)
}

/// Circle around obstacle j halfway between its boundary and the nearest other obstacle.
pub fn default_sigma(config: &Configuration, obstacle_index: usize) -> Result<SigmaCircle> {
    let o = config
        .obstacles
        .get(obstacle_index)
        .ok_or_else(|| CasimirError::InvalidParameter(format!("no obstacle {obstacle_index}")))?;
    let c = o.centroid();
    let own = o.max_radius_from(c);
    let other = config
        .obstacles
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != obstacle_index)
        .map(|(_, p)| p.boundary_distance(c))
        .fold(f64::INFINITY, f64::min);
    let radius = if other.is_finite() { 0.5 * (own + other) } else { 2.0 * own };
    let s = SigmaCircle { center: c, radius };
    validate_sigma(config, obstacle_index, &s, 64, 0)?;
    Ok(s)
}

fn sigma_points(dimension: usize, s: &SigmaCircle, n_sigma: usize) -> (Vec<Point>, Vec<Point>, f64) {
    if dimension == 1 {
        let c = s.center[0];
        return (vec![[c - s.radius, 0.0], [c + s.radius, 0.0]], vec![[-1.0, 0.0], [1.0, 0.0]], 1.0);
    }
    let h = 2.0 * PI / n_sigma as f64;
    let pts = (0..n_sigma)
        .map(|k| {
            let t = k as f64 * h;
            [s.center[0] + s.radius * t.cos(), s.center[1] + s.radius * t.sin()]
        })
        .collect();
    let nrm = (0..n_sigma).map(|k| [(k as f64 * h).cos(), (k as f64 * h).sin()]).collect();
    (pts, nrm, s.radius * h)
}

fn validate_sigma(config: &Configuration, j: usize, s: &SigmaCircle, n_sigma: usize, n: usize) -> Result<()> {
    let bad = |msg: String| Err(CasimirError::Geometry(format!("invalid Σ: {msg}")));
    if !(s.radius > 0.0) {
        return bad("radius must be positive".into());
    }
    let target = &config.obstacles[j];
    if target.max_radius_from(s.center) >= s.radius {
        return bad(format!("does not enclose obstacle {j}"));
    }
    for (i, o) in config.obstacles.iter().enumerate() {
        if i == j {
            continue;
        }
        if o.contains(s.center) || o.boundary_distance(s.center) <= s.radius {
            return bad(format!("meets or encloses obstacle {i}"));
        }
    }
    if n > 0 {
        let (pts, _, _) = sigma_points(config.dimension, s, n_sigma);
        check_points(config, n, &pts)?;
    }
    Ok(())
}

pub const DEFAULT_N_SIGMA: usize = 96;

/// Force from the stress tensor on a circle Σ enclosing obstacle j.
pub fn force_surface(config: &Configuration, obstacle_index: usize, sigma: Option<SigmaCircle>, n_sigma: usize, n_per_obstacle: usize, tol: f64) -> Result<ForceResult> {
    config.validate()?;
    if obstacle_index >= config.len() {
        return Err(CasimirError::InvalidParameter(format!("no obstacle {obstacle_index}")));
    }
    if config.dimension == 2 && (n_sigma < 8 || !n_sigma.is_multiple_of(2)) {
        return Err(CasimirError::InvalidParameter(format!("n_sigma must be even and >= 8, got {n_sigma}")));
    }
    let s = match sigma {
        Some(s) => s,
        None => default_sigma(config, obstacle_index)?,
    };
    validate_sigma(config, obstacle_index, &s, n_sigma, n_per_obstacle)?;
    let params = ForceParams {
        n_per_obstacle,
        tol,
        step: None,
        sigma: Some(s),
        n_sigma: Some(n_sigma),
        limit: None,
    };
    let mut out = ForceResult {
        obstacle_index,
        force: [0.0; 2],
        route: ForceRoute::SurfaceIntegral,
        error_estimate: 0.0,
        force_without_laplacian: Some([0.0; 2]),
        boundary_values: None,
        params,
    };
    if config.len() < 2 {
        return Ok(out);
    }
    let grid = default_grid(config, tol)?;
    let (pts, nrm, ds) = sigma_points(config.dimension, &s, n_sigma);
    let tens = tensor_batch(config, &grid, n_per_obstacle, &pts)?;
    let d = config.dimension;
    let contract = |step: usize, with_lap: bool| -> Point {
        let mut f = [0.0; 2];
        for k in (0..pts.len()).step_by(step) {
            let t = &tens[k].0;
            for i in 0..d {
                for m in 0..d {
                    let mut tim = t.tij[i][m];
                    if !with_lap && i == m {
                        tim += t.laplacian_diag / 8.0;
                    }
                    f[i] -= tim * nrm[k][m] * ds * step as f64;
                }
            }
        }
        f
    };
    out.force = contract(1, true);
    out.force_without_laplacian = Some(contract(1, false));
    let qerr: f64 = tens.iter().map(|t| t.1).sum::<f64>() * ds;
    if d == 2 {
        let half = contract(2, true);
        out.error_estimate = ((out.force[0] - half[0]).hypot(out.force[1] - half[1])) + qerr;
    } else {
        out.error_estimate = qerr;
    }
    Ok(out)
}

/// Default outward offsets for the extrapolated boundary limit, in units of the gap.
pub const DEFAULT_OFFSET_FRACTIONS: [f64; 4] = [8e-2, 4e-2, 2e-2, 1e-2];

pub fn default_offsets(config: &Configuration) -> Vec<f64> {
    let g = min_gap(config);
    DEFAULT_OFFSET_FRACTIONS.iter().map(|f| f * g).collect()
}

/// Neville extrapolation of samples f(δ_k) to δ = 0; returns all diagonal extrapolants.
fn extrapolate_to_zero(deltas: &[f64], values: &[f64]) -> Vec<f64> {
    let n = deltas.len();
    let mut p = values.to_vec();
    let mut diag = vec![p[n - 1]];
    for m in 1..n {
        for i in 0..n - m {
            let (a, b) = (deltas[i], deltas[i + m]);
            p[i] = (a * p[i + 1] - b * p[i]) / (a - b);
        }
        diag.push(p[0]);
    }
    diag
}

/// Force from the exterior boundary value of ∂_ν∂'_ν(H̆_O⁻¹ - H̆_{O_j}⁻¹).
pub fn force_boundary_hadamard(config: &Configuration, obstacle_index: usize, limit: BoundaryLimit, n_per_obstacle: usize, tol: f64) -> Result<ForceResult> {
    config.validate()?;
    if obstacle_index >= config.len() {
        return Err(CasimirError::InvalidParameter(format!("no obstacle {obstacle_index}")));
    }
    let params = ForceParams {
        n_per_obstacle,
        tol,
        step: None,
        sigma: None,
        n_sigma: None,
        limit: Some(limit.clone()),
    };
    let mut out = ForceResult {
        obstacle_index,
        force: [0.0; 2],
        route: ForceRoute::BoundaryHadamard,
        error_estimate: 0.0,
        force_without_laplacian: None,
        boundary_values: None,
        params,
    };
    if config.len() < 2 {
        return Ok(out);
    }
    let grid = default_grid(config, tol)?;
    match limit {
        BoundaryLimit::Jump => hadamard_jump(config, obstacle_index, &grid, n_per_obstacle, &mut out)?,
        BoundaryLimit::Offsets(offsets) => hadamard_offsets(config, obstacle_index, &grid, n_per_obstacle, &offsets, &mut out)?,
    }
    Ok(out)
}

fn hadamard_jump(config: &Configuration, j: usize, grid: &FrequencyQuadrature, n: usize, out: &mut ForceResult) -> Result<()> {
    let kappas = grid.kappa_nodes();
    let mut dc = DiscCache::new(config, n);
    let ns = dc.prepare(&kappas)?;
    let uniform = ns.iter().all(|m| *m == ns[0]);
    let g = min_gap(config);
    let dc = &dc;
    // per frequency: node values D_i, the force density sum and its half-node version
    let per_k = kappas
        .par_iter()
        .zip(ns.par_iter())
        .map(|(&k, m)| -> Result<(Vec<f64>, Point, Point)> {
            let disc = &dc.cache[m];
            let r = disc.block_ranges[j].clone();
            if k * g > UNDERFLOW_EXPONENT {
                return Ok((vec![0.0; r.len()], [0.0; 2], [0.0; 2]));
            }
            let op = RelOperator::new(disc.clone(), k).map_err(|e| e.at_kappa(k))?;
            let ep = op.matrix_excluding(j);
            let mt = normal_trace_operator(disc, k, j)?;
            let me = &mt * &ep;
            let mut dv = Vec::with_capacity(r.len());
            let (mut f, mut fh) = ([0.0; 2], [0.0; 2]);
            for (li, i) in r.clone().enumerate() {
                let di = -me.row(li).dot(&mt.row(li)) / disc.weights[i];
                dv.push(di);
                for a in 0..2 {
                    let c = -0.25 * di * disc.normals[i][a] * disc.weights[i];
                    f[a] += c;
                    if li % 2 == 0 {
                        fh[a] += 2.0 * c;
                    }
                }
            }
            Ok((dv, f, fh))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = 2.0 / PI;
    let mut err: f64 = 0.0;
    for a in 0..config.dimension {
        let xs: Vec<f64> = per_k.iter().map(|p| p.1[a]).collect();
        let (v, e) = integrate_series(grid, &xs);
        out.force[a] = c * v;
        err += c * e;
        if config.dimension == 2 {
            let xh: Vec<f64> = per_k.iter().map(|p| p.2[a]).collect();
            err += (c * integrate_series(grid, &xh).0 - out.force[a]).abs();
        }
    }
    out.error_estimate = err;
    if uniform {
        let disc = &dc.cache[&ns[0]];
        let r = disc.block_ranges[j].clone();
        out.boundary_values = Some(
            r.clone()
                .enumerate()
                .map(|(li, i)| {
                    let xs: Vec<f64> = per_k.iter().map(|p| p.0[li]).collect();
                    (disc.nodes[i], c * integrate_series(grid, &xs).0)
                })
                .collect(),
        );
    }
    Ok(())
}

fn hadamard_offsets(config: &Configuration, j: usize, grid: &FrequencyQuadrature, n: usize, offsets: &[f64], out: &mut ForceResult) -> Result<()> {
    if offsets.len() < 2 || offsets.iter().any(|d| !(*d > 0.0)) || offsets.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CasimirError::InvalidParameter("offsets must be positive and strictly decreasing (at least two)".into()));
    }
    let base = discretize(config, n)?;
    let r = base.block_ranges[j].clone();
    let kappas = grid.kappa_nodes();
    let mut dc = DiscCache::new(config, n);
    let ns = dc.prepare(&kappas)?;
    if ns.iter().any(|m| *m != n) {
        return Err(CasimirError::Budget("offset boundary limit needs one discretization for all frequencies; raise n".into()));
    }
    // evaluation points: each boundary node pushed outward by each offset
    let mut pairs = Vec::new();
    for &d in offsets {
        for i in r.clone() {
            let p = [base.nodes[i][0] + d * base.normals[i][0], base.nodes[i][1] + d * base.normals[i][1]];
            pairs.push((p, p));
        }
    }
    let pts: Vec<Point> = pairs.iter().map(|p| p.0).collect();
    check_points(config, n, &pts)?;
    let g = min_gap(config);
    let samples = kappas
        .par_iter()
        .map(|&k| -> Result<Vec<f64>> {
            if k * g > UNDERFLOW_EXPONENT {
                return Ok(vec![0.0; pairs.len()]);
            }
            let op = RelOperator::new(base.clone(), k).map_err(|e| e.at_kappa(k))?;
            let ep = op.matrix_excluding(j);
            Ok(op
                .jets_with(&ep, &pairs)
                .iter()
                .enumerate()
                .map(|(q, jet)| {
                    let nu = base.normals[r.start + q % r.len()];
                    let mut s = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            s += nu[a] * jet.hessian_xy[a][b] * nu[b];
                        }
                    }
                    s
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let c = 2.0 / PI;
    let nb = r.len();
    let mut dvals = vec![vec![0.0; offsets.len()]; nb];
    for (q, slot) in (0..pairs.len()).map(|q| (q, (q % nb, q / nb))) {
        let xs: Vec<f64> = samples.iter().map(|s| s[q]).collect();
        dvals[slot.0][slot.1] = c * integrate_series(grid, &xs).0;
    }
    let ex: Vec<Vec<f64>> = dvals.iter().map(|v| extrapolate_to_zero(offsets, v)).collect();
    // noise floor relative to the largest boundary value on this obstacle
    let scale = ex.iter().map(|e| e.last().unwrap().abs()).fold(0.0, f64::max);
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut bvals = Vec::with_capacity(nb);
    let mut err: f64 = 0.0;
    for (li, i) in r.clone().enumerate() {
        let disc: Vec<f64> = ex[li].windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in disc.windows(2) {
            if w[1] >= w[0] && w[1] > floor {
                return Err(CasimirError::ExtrapolationDivergence(format!(
                    "boundary value at node {i}: discrepancies {disc:?}"
                )));
            }
        }
        err = err.max(*disc.last().unwrap_or(&0.0));
        bvals.push((base.nodes[i], *ex[li].last().unwrap()));
    }
    for (li, i) in r.clone().enumerate() {
        for a in 0..2 {
            out.force[a] += -0.25 * bvals[li].1 * base.normals[i][a] * base.weights[i];
        }
    }
    let total_w: f64 = r.clone().map(|i| base.weights[i]).sum();
    out.error_estimate = 0.25 * err * total_w;
    out.boundary_values = Some(bvals);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact1d::{green_rel_1d, Interval1DConfig};
    use crate::geometry::Obstacle;

    fn gap1() -> Configuration {
        Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap()
    }

    #[test]
    fn one_d_kernel_matches_closed_form() {
        let c = gap1();
        let ic = Interval1DConfig::from_configuration(&c).unwrap();
        for (x, y) in [(1.5, 1.5), (1.2, 1.7), (-0.5, -0.1), (0.5, 0.5), (3.5, 2.5), (0.3, 2.4)] {
            let j = rel_resolvent_jet(&c, 1.0, [x, 0.0], [y, 0.0], 0).unwrap();
            let want = green_rel_1d(&ic, 1.0, x, y).unwrap();
            assert!((j.value.unwrap() - want).abs() < 1e-13, "({x}, {y}): {} vs {want}", j.value.unwrap());
        }
    }

    #[test]
    fn single_obstacle_zero_jet() {
        let c = Configuration::new(2, 0.0, vec![Obstacle::circle([0.0, 0.0], 1.0)]).unwrap();
        let j = rel_resolvent_jet(&c, 1.0, [2.0, 0.0], [0.0, 3.0], 32).unwrap();
        assert_eq!(j, RelKernelJet::zero([2.0, 0.0], [0.0, 3.0]));
    }

    #[test]
    fn proximity_rejected() {
        let c = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
        let e = rel_resolvent_jet(&c, 1.0, [1.001, 0.0], [0.0, 3.0], 64).unwrap_err();
        assert!(matches!(e, CasimirError::Proximity { .. }));
    }

    #[test]
    fn one_d_gap_tensor_and_forces() {
        let c = gap1();
        let e = -PI / 24.0;
        let half = 0.5 * h_rel_diag(&c, [1.5, 0.0], 0, 1e-10).unwrap();
        assert!((half - (PI / 12.0 - 1.0 / PI)).abs() < 1e-9);
        let t = t_rel(&c, [1.3, 0.0], 0, 1e-10).unwrap();
        assert!((t.t00 - e).abs() < 1e-9 && (t.tij[0][0] - e).abs() < 1e-9);
        let out = t_rel(&c, [-0.7, 0.0], 0, 1e-10).unwrap();
        assert!(out.t00.abs() < 1e-12);
        for f in [
            force_fd(&c, 1, [1.0, 0.0], None, 0, 1e-10).unwrap(),
            force_surface(&c, 1, None, 2, 0, 1e-10).unwrap(),
            force_boundary_hadamard(&c, 1, BoundaryLimit::Jump, 0, 1e-10).unwrap(),
        ] {
            assert!((f.force[0] - e).abs() < 1e-8, "{:?}: {}", f.route, f.force[0]);
        }
        let h = force_boundary_hadamard(&c, 1, BoundaryLimit::Offsets(default_offsets(&c)), 0, 1e-10).unwrap();
        let bv = h.boundary_values.unwrap();
        assert!((bv[0].1 + PI / 6.0).abs() < 1e-5 * PI / 6.0);
    }

    #[test]
    fn one_d_newton_third_law() {
        let c = gap1();
        let a = force_boundary_hadamard(&c, 0, BoundaryLimit::Jump, 0, 1e-10).unwrap();
        let b = force_boundary_hadamard(&c, 1, BoundaryLimit::Jump, 0, 1e-10).unwrap();
        assert!((a.force[0] + b.force[0]).abs() < 1e-12);
    }

    #[test]
    fn sigma_must_separate() {
        let c = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
        let bad = SigmaCircle { center: [3.0, 0.0], radius: 2.5 };
        assert!(matches!(force_surface(&c, 1, Some(bad), 32, 32, 1e-6), Err(CasimirError::Geometry(_))));
        let s = default_sigma(&c, 1).unwrap();
        assert!((s.radius - 1.5).abs() < 1e-12);
    }

    #[test]
    fn offsets_validated() {
        let c = gap1();
        let e = force_boundary_hadamard(&c, 1, BoundaryLimit::Offsets(vec![0.01, 0.02]), 0, 1e-8);
        assert!(matches!(e, Err(CasimirError::InvalidParameter(_))));
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let d = [0.08, 0.04, 0.02, 0.01];
        let v: Vec<f64> = d.iter().map(|x| 3.0 - 2.0 * x + 5.0 * x * x).collect();
        let ex = extrapolate_to_zero(&d, &v);
        assert!((ex[2] - 3.0).abs() < 1e-13);
    }
}
