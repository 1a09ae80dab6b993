//! Partial-wave Ξ for two discs, independent of the boundary discretization.
//!
//! On a circle of radius R the single layer is diagonal in e^{inθ} with
//! eigenvalue R·I_n(κR)K_n(κR), and Graf's addition theorem moves K_n waves
//! between the two centers. After symmetric scaling the cross operator is
//!
//!   A_nm = √(I_n/K_n)(κR₁) · K_{n-m}(κd) · √(I_m/K_m)(κR₂),  |n|, |m| ≤ N,
//!
//! and Ξ = log det(I - AAᵀ). Entries are formed from log-scaled Bessel values
//! so nothing overflows for large |n|.

use crate::energy::{build_frequency_grid, energy_from_curve, EnergyResult};
use crate::error::{CasimirError, Result};
use crate::spectral::{logdet_identity_plus_spd, XiCurve};
use crate::specfun::{bessel_i_log_seq, bessel_k_log_seq};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MODES: usize = 40;
/// κ·gap at or beyond which Ξ is reported as zero (|Ξ| < e^{-100}).
pub const PW_UNDERFLOW: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoDiscSpec {
    pub r1: f64,
    pub r2: f64,
    pub d_centers: f64,
    pub modes: usize,
}

impl TwoDiscSpec {
    pub fn new(r1: f64, r2: f64, d_centers: f64, modes: usize) -> Result<Self> {
        let s = TwoDiscSpec { r1, r2, d_centers, modes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r2 > 0.0) {
            return Err(CasimirError::Geometry("disc radii must be positive".into()));
        }
        if !(self.d_centers > self.r1 + self.r2) {
            return Err(CasimirError::Overlap {
                first: 0,
                second: 1,
                gap: self.d_centers - self.r1 - self.r2,
            });
        }
        if self.modes < 4 {
            return Err(CasimirError::InvalidParameter(format!("need at least 4 modes, got {}", self.modes)));
        }
        Ok(())
    }

    pub fn gap(&self) -> f64 {
        self.d_centers - self.r1 - self.r2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwXi {
    pub value: f64,
    /// |Ξ(N) - Ξ(N - 1)|.
    pub truncation_delta: f64,
    pub truncation_warning: bool,
    pub underflow: bool,
}

fn xi_modes(spec: &TwoDiscSpec, kappa: f64, n: usize) -> Result<f64> {
    let li1 = bessel_i_log_seq(n, kappa * spec.r1)?;
    let lk1 = bessel_k_log_seq(n, kappa * spec.r1)?;
    let li2 = bessel_i_log_seq(n, kappa * spec.r2)?;
    let lk2 = bessel_k_log_seq(n, kappa * spec.r2)?;
    let lkd = bessel_k_log_seq(2 * n, kappa * spec.d_centers)?;
    let dim = 2 * n + 1;
    let idx = |i: usize| (i as i64 - n as i64).unsigned_abs() as usize;
    let a = DMatrix::from_fn(dim, dim, |i, j| {
        let (p, q) = (idx(i), idx(j));
        let d = (i as i64 - j as i64).unsigned_abs() as usize;
        (0.5 * (li1[p] - lk1[p]) + lkd[d] + 0.5 * (li2[q] - lk2[q])).exp()
    });
    let m = -(&a * a.transpose());
    logdet_identity_plus_spd(m, kappa)
}

pub fn xi_pw(spec: &TwoDiscSpec, kappa: f64) -> Result<PwXi> {
    spec.validate()?;
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(CasimirError::domain("xi_pw", format!("kappa must be positive, got {kappa}")));
    }
    if kappa * spec.gap() >= PW_UNDERFLOW {
        return Ok(PwXi {
            value: 0.0,
            truncation_delta: 0.0,
            truncation_warning: false,
            underflow: true,
        });
    }
    let v = xi_modes(spec, kappa, spec.modes)?;
    let prev = xi_modes(spec, kappa, spec.modes - 1)?;
    let delta = (v - prev).abs();
    let warn = delta > 1e-12 * v.abs();
    if warn {
        log::warn!("partial-wave truncation N = {} insufficient at kappa = {kappa:e}: last mode changes Ξ by {delta:e}", spec.modes);
    }
    Ok(PwXi {
        value: v,
        truncation_delta: delta,
        truncation_warning: warn,
        underflow: false,
    })
}

/// Oracle energy on the same massless or massive frequency grid as the
/// boundary-integral pipeline.
pub fn energy_pw(spec: &TwoDiscSpec, m: f64, tol: f64) -> Result<EnergyResult> {
    spec.validate()?;
    let grid = build_frequency_grid(m, spec.gap(), 2, tol)?;
    let kappas = grid.kappa_nodes();
    let values = kappas
        .par_iter()
        .map(|&k| xi_pw(spec, k).map(|x| x.value).map_err(|e| e.at_kappa(k)))
        .collect::<Result<Vec<f64>>>()?;
    let curve = XiCurve {
        kappa_nodes: kappas,
        xi_values: values,
        config_hash: crate::digest::digest(spec),
        n_per_obstacle: spec.modes,
    };
    energy_from_curve(&grid, curve, tol)
}
