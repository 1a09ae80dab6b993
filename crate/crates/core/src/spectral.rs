//! Ξ(iκ) = log det(Q Q̃⁻¹) = log det(I + Q̃⁻¹T).
//!
//! Both routes factor the diagonal blocks of Q̃ by Cholesky. The LU route
//! eliminates on `X = Q̃⁻¹T` directly, and the symmetric route on
//! `Y = L⁻¹TL⁻ᵀ`. In both, the pivots are kept in the form `1 + δ` with δ
//! updated on its own, and the log-determinant is `Σ ln_1p(δ)`. This keeps
//! full relative accuracy when Ξ is many orders below unity.

use crate::digest::digest;
use crate::error::{CasimirError, Result};
use crate::geometry::{discretize, min_gap, BoundaryDiscretization, Configuration};
use crate::layerop::{assemble_q, split_blocks};
use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Ξ is reported as exactly zero once κ·min_gap exceeds this (|Ξ| < e^{-1000}).
pub const UNDERFLOW_EXPONENT: f64 = 500.0;
/// Largest κ·(node weight) allowed before nodes are added on a curve.
pub const RESOLUTION_LIMIT: f64 = 1.5;
pub const MAX_NODES_PER_OBSTACLE: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XiRoute {
    Lu,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiSample {
    pub kappa: f64,
    pub value: f64,
    /// Nodes per curve actually used (≥ the requested count at large κ).
    pub n_per_obstacle: usize,
    pub underflow: bool,
}

/// Nodes per curve needed at frequency κ so that κ times the largest
/// quadrature weight stays below [`RESOLUTION_LIMIT`]. Multiples of 8.
pub fn resolved_n(config: &Configuration, kappa: f64, n: usize) -> Result<usize> {
    if config.dimension == 1 {
        return Ok(n);
    }
    let disc = discretize(config, n)?;
    let wmax = disc.weights.iter().cloned().fold(0.0, f64::max);
    let ratio = kappa * wmax / RESOLUTION_LIMIT;
    if ratio <= 1.0 {
        return Ok(n);
    }
    let need = ((n as f64 * ratio) / 8.0).ceil() as usize * 8;
    if need > MAX_NODES_PER_OBSTACLE {
        return Err(CasimirError::Budget(format!(
            "kappa = {kappa:e} needs {need} nodes per curve (limit {MAX_NODES_PER_OBSTACLE})"
        )));
    }
    Ok(need)
}

pub fn xi(config: &Configuration, kappa: f64, n_per_obstacle: usize) -> Result<f64> {
    Ok(xi_sample(config, kappa, n_per_obstacle, XiRoute::Lu)?.value)
}

pub fn xi_sample(config: &Configuration, kappa: f64, n_per_obstacle: usize, route: XiRoute) -> Result<XiSample> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(CasimirError::domain("xi", format!("kappa must be positive and finite, got {kappa}")));
    }
    config.validate()?;
    let mut s = XiSample {
        kappa,
        value: 0.0,
        n_per_obstacle,
        underflow: false,
    };
    if config.len() < 2 {
        return Ok(s);
    }
    if kappa * min_gap(config) > UNDERFLOW_EXPONENT {
        s.underflow = true;
        return Ok(s);
    }
    let n = resolved_n(config, kappa, n_per_obstacle)?;
    let disc = discretize(config, n)?;
    s.n_per_obstacle = n;
    s.value = xi_disc(&disc, kappa, route).map_err(|e| e.at_kappa(kappa))?;
    Ok(s)
}

/// Cholesky factors of the diagonal blocks of Q at κ.
pub(crate) fn block_factors(q: &DMatrix<f64>, ranges: &[std::ops::Range<usize>], kappa: f64) -> Result<Vec<Cholesky<f64, Dyn>>> {
    ranges
        .iter()
        .enumerate()
        .map(|(p, r)| {
            let blk = q.view((r.start, r.start), (r.len(), r.len())).clone_owned();
            Cholesky::new(blk).ok_or(CasimirError::CholeskyFailure { obstacle: p, kappa })
        })
        .collect()
}

/// Ξ on a fixed discretization.
pub fn xi_disc(disc: &BoundaryDiscretization, kappa: f64, route: XiRoute) -> Result<f64> {
    if disc.block_ranges.len() < 2 {
        return Ok(0.0);
    }
    let q = assemble_q(disc, kappa, 0.0)?;
    let (_, t) = split_blocks(&q)?;
    let chol = block_factors(&q.entries, &q.block_ranges, kappa)?;
    let n = q.dim();
    match route {
        XiRoute::Lu => {
            let mut x = DMatrix::<f64>::zeros(n, n);
            for (p, r) in q.block_ranges.iter().enumerate() {
                let rhs = t.entries.rows(r.start, r.len()).clone_owned();
                let sol = chol[p].solve(&rhs);
                x.rows_mut(r.start, r.len()).copy_from(&sol);
            }
            logdet_identity_plus(x, kappa)
        }
        XiRoute::Symmetric => {
            // Y = L⁻¹ T L⁻ᵀ, block by block
            let mut y = t.entries.clone();
            for (p, r) in q.block_ranges.iter().enumerate() {
                let l = chol[p].l();
                let mut rows = y.rows(r.start, r.len()).clone_owned();
                l.solve_lower_triangular_mut(&mut rows);
                y.rows_mut(r.start, r.len()).copy_from(&rows);
            }
            for (p, r) in q.block_ranges.iter().enumerate() {
                let l = chol[p].l();
                let mut cols = y.columns(r.start, r.len()).transpose();
                l.solve_lower_triangular_mut(&mut cols);
                y.columns_mut(r.start, r.len()).copy_from(&cols.transpose());
            }
            logdet_identity_plus_spd(y, kappa)
        }
    }
}

/// log det(I + X) by Gaussian elimination on X with partial pivoting.
///
/// While no row exchange is needed the pivots are `1 + x_kk` with x_kk
/// tracked exactly; a row exchange switches to a plain pivoted LU of I + X.
pub fn logdet_identity_plus(mut x: DMatrix<f64>, kappa: f64) -> Result<f64> {
    let n = x.nrows();
    let original = x.clone();
    let mut acc = 0.0;
    let mut sign_negative = false;
    for k in 0..n {
        let piv = 1.0 + x[(k, k)];
        let mut best = piv.abs();
        for i in (k + 1)..n {
            if x[(i, k)].abs() > best {
                best = x[(i, k)].abs();
            }
        }
        if best > piv.abs() {
            return logdet_pivoted(original, kappa);
        }
        if piv == 0.0 {
            return Err(CasimirError::NonPositiveDeterminant { det: 0.0, kappa });
        }
        if piv < 0.0 {
            sign_negative = !sign_negative;
            acc += piv.abs().ln();
        } else {
            acc += x[(k, k)].ln_1p();
        }
        for i in (k + 1)..n {
            let l = x[(i, k)] / piv;
            if l == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                let u = x[(k, j)];
                x[(i, j)] -= l * u;
            }
        }
    }
    if sign_negative {
        return Err(CasimirError::NonPositiveDeterminant { det: -acc.exp(), kappa });
    }
    Ok(acc)
}

fn logdet_pivoted(x: DMatrix<f64>, kappa: f64) -> Result<f64> {
    let n = x.nrows();
    let a = DMatrix::<f64>::identity(n, n) + x;
    let lu = a.lu();
    let u = lu.u();
    let mut acc = 0.0;
    let mut negative = lu.p().determinant::<f64>() < 0.0;
    for k in 0..n {
        let d = u[(k, k)];
        if d == 0.0 {
            return Err(CasimirError::NonPositiveDeterminant { det: 0.0, kappa });
        }
        if d < 0.0 {
            negative = !negative;
        }
        acc += d.abs().ln();
    }
    if negative {
        return Err(CasimirError::NonPositiveDeterminant { det: -acc.exp(), kappa });
    }
    Ok(acc)
}

/// log det(I + Y) for symmetric Y with I + Y positive definite, by Cholesky
/// with diagonal offsets `c_jj² - 1` tracked directly.
pub fn logdet_identity_plus_spd(y: DMatrix<f64>, kappa: f64) -> Result<f64> {
    let n = y.nrows();
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut acc = 0.0;
    for j in 0..n {
        let mut off = y[(j, j)];
        for k in 0..j {
            off -= c[(j, k)] * c[(j, k)];
        }
        if off <= -1.0 {
            return Err(CasimirError::NonPositiveDeterminant { det: 0.0, kappa });
        }
        acc += off.ln_1p();
        let d = (1.0 + off).sqrt();
        c[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = y[(i, j)];
            for k in 0..j {
                s -= c[(i, k)] * c[(j, k)];
            }
            c[(i, j)] = s / d;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCurve {
    pub kappa_nodes: Vec<f64>,
    pub xi_values: Vec<f64>,
    pub config_hash: String,
    pub n_per_obstacle: usize,
}

impl XiCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kappa,xi\n");
        for (k, v) in self.kappa_nodes.iter().zip(&self.xi_values) {
            s.push_str(&format!("{k:.17e},{v:.17e}\n"));
        }
        s
    }
}

/// Digest of a configuration together with the discretization size.
pub fn config_hash(config: &Configuration, n_per_obstacle: usize) -> String {
    digest(&serde_json::json!({ "config": config, "n_per_obstacle": n_per_obstacle }))
}

/// Ξ at each κ node, evaluated in parallel and stored by index.
pub fn xi_curve(config: &Configuration, kappa_nodes: &[f64], n_per_obstacle: usize) -> Result<XiCurve> {
    if kappa_nodes.iter().any(|k| !(*k > 0.0)) || kappa_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CasimirError::InvalidParameter("kappa nodes must be positive and increasing".into()));
    }
    let xi_values = kappa_nodes
        .par_iter()
        .map(|&k| xi(config, k, n_per_obstacle).map_err(|e| e.at_kappa(k)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(XiCurve {
        kappa_nodes: kappa_nodes.to_vec(),
        xi_values,
        config_hash: config_hash(config, n_per_obstacle),
        n_per_obstacle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Obstacle;

    #[test]
    fn one_d_rank_one_closed_form() {
        let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
        for k in [0.01_f64, 0.3, 1.0, 4.0, 20.0] {
            let want = (-(-2.0 * k).exp()).ln_1p();
            for route in [XiRoute::Lu, XiRoute::Symmetric] {
                let v = xi_sample(&c, k, 0, route).unwrap().value;
                assert!((v - want).abs() <= 1e-12 * want.abs().max(1e-300) + 1e-15, "{k} {v} {want}");
            }
        }
    }

    #[test]
    fn tiny_values_keep_relative_accuracy() {
        let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
        let v = xi(&c, 15.0, 0).unwrap();
        let want = -(-30f64).exp();
        assert!((v / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_obstacle_is_zero() {
        let c = Configuration::new(2, 0.0, vec![Obstacle::circle([0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(xi(&c, 1.0, 32).unwrap(), 0.0);
    }

    #[test]
    fn underflow_flag() {
        let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
        let s = xi_sample(&c, 501.0, 0, XiRoute::Lu).unwrap();
        assert!(s.underflow);
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn two_discs_match_reference() {
        let c = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
        let v = xi(&c, 1.0, 64).unwrap();
        assert!((v + 0.053_259_579_175_41).abs() < 1e-10, "{v}");
    }

    #[test]
    fn node_bump_at_large_kappa() {
        let c = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
        assert_eq!(resolved_n(&c, 1.0, 64).unwrap(), 64);
        assert!(resolved_n(&c, 25.0, 64).unwrap() >= 112);
    }

    #[test]
    fn curve_rejects_unsorted_nodes() {
        let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
        assert!(xi_curve(&c, &[1.0, 0.5], 0).is_err());
        let curve = xi_curve(&c, &[0.5, 1.0], 0).unwrap();
        assert!(curve.to_csv().starts_with("kappa,xi\n"));
    }
}
