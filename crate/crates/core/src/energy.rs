//! Relative energy E = (1/2π) ∫_0^∞ Ξ(i√(m² + u²)) du.
//!
//! The grid is fixed before any Ξ evaluation: Gauss-Kronrod 7-15 panels,
//! geometric (ratio 4) from `u_min` up to a quarter of the inverse gap, then
//! widening panels up to a cutoff chosen from the e^{-2 g u} decay. On
//! [0, u_min] the integrand is replaced by a least-squares fit of
//! α + β ln u + γ ln² u on the first panel, which captures the ln u endpoint
//! behavior of the massless 1D case and the slower log-type behavior in 2D.
//! With m > 0 the integrand is smooth and even in u on the scale m, so the
//! panels start at u = 0 with a first panel [0, min(m/64, knee/4)] and no
//! endpoint model is needed.

use crate::error::{CasimirError, Result};
use crate::geometry::{min_gap, translate_all, Configuration, Point};
use crate::quad::Panel;
use crate::spectral::{config_hash, xi_curve, XiCurve};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_PANELS: usize = 400;
/// Lower end of the panel region in d = 1 and d = 2.
pub const U_MIN_1D: f64 = 1e-6;
pub const U_MIN_2D: f64 = 1e-8;
const GEOMETRIC_RATIO: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Substitution {
    MasslessDirect,
    MassDesingularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyQuadrature {
    pub substitution: Substitution,
    pub mass: f64,
    pub u_nodes: Vec<f64>,
    /// Kronrod weights.
    pub u_weights: Vec<f64>,
    /// Embedded Gauss weights (zero at Kronrod-only nodes).
    pub gauss_weights: Vec<f64>,
    pub panel_count: usize,
    pub panel_edges: Vec<f64>,
    pub u_min: f64,
    pub truncation: f64,
    /// Bound on the truncated tail assuming |Ξ| ≤ e^{-2 g κ}.
    pub tail_bound: f64,
    pub min_gap: f64,
}

impl FrequencyQuadrature {
    /// κ = √(m² + u²) at each node.
    pub fn kappa_nodes(&self) -> Vec<f64> {
        self.u_nodes.iter().map(|u| self.mass.hypot(*u)).collect()
    }

    /// The same grid with every panel split in half.
    pub fn refined(&self) -> FrequencyQuadrature {
        let mut edges = Vec::with_capacity(2 * self.panel_edges.len());
        for w in self.panel_edges.windows(2) {
            edges.push(w[0]);
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.extend(self.panel_edges.last());
        let mut q = FrequencyQuadrature {
            panel_count: 0,
            panel_edges: vec![],
            u_nodes: vec![],
            u_weights: vec![],
            gauss_weights: vec![],
            ..self.clone()
        };
        q.fill_panels(edges);
        q
    }

    fn fill_panels(&mut self, edges: Vec<f64>) {
        for e in edges.windows(2) {
            let p = Panel::new(e[0], e[1]);
            self.u_nodes.extend(p.nodes);
            self.u_weights.extend(p.wk);
            self.gauss_weights.extend(p.wg);
        }
        self.panel_count = edges.len() - 1;
        self.panel_edges = edges;
    }
}

pub fn build_frequency_grid(m: f64, min_gap: f64, dimension: usize, tol: f64) -> Result<FrequencyQuadrature> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CasimirError::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(m >= 0.0) || !m.is_finite() {
        return Err(CasimirError::InvalidParameter(format!("mass must be >= 0, got {m}")));
    }
    if !(min_gap > 0.0) {
        return Err(CasimirError::InvalidParameter(format!("min_gap must be positive, got {min_gap}")));
    }
    let u_min = match dimension {
        1 => U_MIN_1D,
        2 => U_MIN_2D,
        d => return Err(CasimirError::DimensionMismatch { expected: 2, found: d }),
    };
    let g = if min_gap.is_finite() { min_gap } else { 1.0 };
    let tail = |u: f64| (-2.0 * g * m.hypot(u)).exp() / (2.0 * g);
    // cutoff with a factor e^{-3} of margin over the tail condition tail ≤ tol/2
    let mut cutoff = ((1.0 / (g * tol)).ln() + 3.0).max(1.0) / (2.0 * g);
    while cutoff > 0.5 / g && tail(cutoff * 0.9) < tol / 2.0 * (-3f64).exp() {
        cutoff *= 0.9;
    }
    let knee = (0.25 / g).min(cutoff / 2.0);
    let (u_min, mut edges, mut a) = if m > 0.0 {
        let u0 = (m / 64.0).min(knee / 4.0);
        (0.0, vec![0.0, u0], u0)
    } else {
        (u_min, vec![u_min], u_min)
    };
    while a * GEOMETRIC_RATIO < knee {
        a *= GEOMETRIC_RATIO;
        edges.push(a);
    }
    edges.push(knee);
    a = knee;
    let wmax = 1.0 / g;
    while a < cutoff {
        let w = a.min(wmax);
        a = (a + w).min(cutoff);
        if cutoff - a < 0.25 * w {
            a = cutoff;
        }
        edges.push(a);
    }
    if edges.len() - 1 > MAX_PANELS {
        return Err(CasimirError::Budget(format!(
            "frequency grid needs {} panels (limit {MAX_PANELS}) for tol {tol:e}",
            edges.len() - 1
        )));
    }
    let mut q = FrequencyQuadrature {
        substitution: if m == 0.0 {
            Substitution::MasslessDirect
        } else {
            Substitution::MassDesingularized
        },
        mass: m,
        u_nodes: vec![],
        u_weights: vec![],
        gauss_weights: vec![],
        panel_count: 0,
        panel_edges: vec![],
        u_min,
        truncation: cutoff,
        tail_bound: tail(cutoff),
        min_gap,
    };
    q.fill_panels(edges);
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub n_per_obstacle: usize,
    pub tol: f64,
    pub mass: f64,
    pub panel_count: usize,
    pub node_count: usize,
    pub u_min: f64,
    pub truncation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// Kronrod-Gauss panel error estimate (QUADPACK scaling).
    pub quadrature_error: f64,
    /// Contribution of [0, u_min] and its model uncertainty.
    pub endpoint_contribution: f64,
    pub endpoint_error: f64,
    pub tail_bound: f64,
    pub xi_curve: XiCurve,
    pub params: EnergyParams,
}

/// ∫_0^∞ f(u) du from samples on the grid nodes, excluding the tail.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridIntegral {
    pub value: f64,
    pub quadrature_error: f64,
    pub endpoint: f64,
    pub endpoint_error: f64,
}

pub fn integrate_on_grid(grid: &FrequencyQuadrature, xs: &[f64]) -> GridIntegral {
    assert_eq!(xs.len(), grid.u_nodes.len(), "samples do not match the frequency grid");
    let mut kron = 0.0;
    let mut err = 0.0;
    for p in 0..grid.panel_count {
        let r = 15 * p..15 * (p + 1);
        let mut k = 0.0;
        let mut g = 0.0;
        let mut len = 0.0;
        for i in r.clone() {
            k += grid.u_weights[i] * xs[i];
            g += grid.gauss_weights[i] * xs[i];
            len += grid.u_weights[i];
        }
        kron += k;
        // QUADPACK's scaling of the Kronrod-Gauss difference
        let mean = k / len;
        let resasc: f64 = r.map(|i| grid.u_weights[i] * (xs[i] - mean).abs()).sum();
        let diff = (k - g).abs();
        if resasc > 0.0 && diff > 0.0 {
            err += resasc * (200.0 * diff / resasc).powf(1.5).min(1.0);
        }
    }
    let (endpoint, endpoint_error) = if grid.u_min > 0.0 {
        endpoint_integral(&grid.u_nodes[..15], &xs[..15], grid.u_min)
    } else {
        (0.0, 0.0)
    };
    GridIntegral {
        value: kron + endpoint,
        quadrature_error: err,
        endpoint,
        endpoint_error,
    }
}

/// Integrate a Ξ curve sampled on the grid's κ nodes.
pub fn energy_from_curve(grid: &FrequencyQuadrature, curve: XiCurve, tol: f64) -> Result<EnergyResult> {
    let xs = &curve.xi_values;
    if xs.len() != grid.u_nodes.len() {
        return Err(CasimirError::InvalidParameter("Ξ curve does not match the frequency grid".into()));
    }
    let int = integrate_on_grid(grid, xs);
    // data-driven tail: Ξ at the last node, continued with the asymptotic rate
    let g = if grid.min_gap.is_finite() { grid.min_gap } else { 1.0 };
    let tail = xs.last().map_or(0.0, |v| v.abs() / (2.0 * g)).max(grid.tail_bound.min(tol));
    let scale = 1.0 / (2.0 * PI);
    Ok(EnergyResult {
        value: scale * int.value,
        abs_error_estimate: scale * (int.quadrature_error + int.endpoint_error + tail),
        quadrature_error: scale * int.quadrature_error,
        endpoint_contribution: scale * int.endpoint,
        endpoint_error: scale * int.endpoint_error,
        tail_bound: scale * tail,
        params: EnergyParams {
            n_per_obstacle: curve.n_per_obstacle,
            tol,
            mass: grid.mass,
            panel_count: grid.panel_count,
            node_count: grid.u_nodes.len(),
            u_min: grid.u_min,
            truncation: grid.truncation,
        },
        xi_curve: curve,
    })
}

/// ∫_0^a of the least-squares model α + β ln u + γ ln² u fitted to (u, f),
/// with the difference from the two-term fit as its error.
fn endpoint_integral(u: &[f64], f: &[f64], a: f64) -> (f64, f64) {
    if f.iter().all(|v| *v == 0.0) || f.iter().any(|v| !v.is_finite()) {
        return (0.0, 0.0);
    }
    let la = a.ln();
    let moments = [a, a * (la - 1.0), a * (la * la - 2.0 * la + 2.0)];
    let fit = |terms: usize| -> f64 {
        let m = DMatrix::from_fn(u.len(), terms, |i, j| u[i].ln().powi(j as i32));
        let rhs = DVector::from_column_slice(f);
        let coef = m.svd(true, true).solve(&rhs, 1e-14).expect("least-squares solve");
        (0..terms).map(|j| coef[j] * moments[j]).sum()
    };
    let full = fit(3);
    let reduced = fit(2);
    (full, (full - reduced).abs())
}

pub fn relative_energy(config: &Configuration, n_per_obstacle: usize, tol: f64) -> Result<EnergyResult> {
    config.validate()?;
    let grid = build_frequency_grid(config.mass, min_gap(config), config.dimension, tol)?;
    relative_energy_on(config, n_per_obstacle, &grid, tol)
}

/// Energy on a prescribed grid (so that nearby configurations share nodes).
pub fn relative_energy_on(config: &Configuration, n_per_obstacle: usize, grid: &FrequencyQuadrature, tol: f64) -> Result<EnergyResult> {
    if grid.mass != config.mass {
        return Err(CasimirError::InvalidParameter("grid mass differs from configuration mass".into()));
    }
    if config.len() < 2 {
        let curve = XiCurve {
            kappa_nodes: grid.kappa_nodes(),
            xi_values: vec![0.0; grid.u_nodes.len()],
            config_hash: config_hash(config, n_per_obstacle),
            n_per_obstacle,
        };
        let mut r = energy_from_curve(grid, curve, tol)?;
        r.abs_error_estimate = 0.0;
        r.tail_bound = 0.0;
        return Ok(r);
    }
    let curve = xi_curve(config, &grid.kappa_nodes(), n_per_obstacle)?;
    energy_from_curve(grid, curve, tol)
}

/// Energies with obstacle `obstacle_index` moved by `s·direction` for each s.
pub fn energy_sweep(
    config: &Configuration,
    obstacle_index: usize,
    direction: Point,
    grid: &[f64],
    n_per_obstacle: usize,
    tol: f64,
) -> Result<Vec<(f64, EnergyResult)>> {
    if obstacle_index >= config.len() {
        return Err(CasimirError::InvalidParameter(format!("no obstacle {obstacle_index}")));
    }
    let configs = grid
        .iter()
        .map(|&s| {
            let mut c = config.clone();
            c.obstacles[obstacle_index] = c.obstacles[obstacle_index].translated([s * direction[0], s * direction[1]]);
            c.validate().map(|_| (s, c))
        })
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .map(|(s, c)| relative_energy(&c, n_per_obstacle, tol).map(|e| (s, e)))
        .collect()
}

/// E for the configuration translated as a whole (used by invariance checks).
pub fn translated_energy(config: &Configuration, shift: Point, n_per_obstacle: usize, tol: f64) -> Result<EnergyResult> {
    relative_energy(&translate_all(config, shift)?, n_per_obstacle, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = build_frequency_grid(0.0, 1.0, 1, 1e-10).unwrap();
        assert_eq!(g.substitution, Substitution::MasslessDirect);
        assert!(g.u_nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.u_weights.iter().all(|w| *w > 0.0));
        assert!(g.tail_bound <= 5e-11);
        assert!(g.truncation > 11.0 && g.truncation < 14.0, "{}", g.truncation);
        let m = build_frequency_grid(2.0, 1.0, 2, 1e-10).unwrap();
        assert_eq!(m.substitution, Substitution::MassDesingularized);
        assert!(m.kappa_nodes()[0] >= 2.0);
        assert!(build_frequency_grid(0.0, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn closed_form_integrand() {
        // (1/2π) ∫ log(1 - e^{-2u}) du = -π/24 without any Nyström work
        let g = build_frequency_grid(0.0, 1.0, 1, 1e-12).unwrap();
        let curve = XiCurve {
            kappa_nodes: g.kappa_nodes(),
            xi_values: g.u_nodes.iter().map(|u| (-(-2.0 * u).exp()).ln_1p()).collect(),
            config_hash: String::new(),
            n_per_obstacle: 0,
        };
        let e = energy_from_curve(&g, curve, 1e-12).unwrap();
        assert!((e.value + PI / 24.0).abs() < 1e-11, "{}", e.value + PI / 24.0);
        assert!(e.abs_error_estimate < 1e-8, "{} {} {} {}", e.quadrature_error, e.endpoint_error, e.tail_bound, e.endpoint_contribution);
    }

    #[test]
    fn single_obstacle_zero() {
        let c = Configuration::new(1, 0.0, vec![crate::geometry::Obstacle::interval(0.0, 1.0)]).unwrap();
        let e = relative_energy(&c, 0, 1e-10).unwrap();
        assert_eq!(e.value, 0.0);
    }
}
