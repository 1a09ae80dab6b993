//! Closed forms for two Dirichlet intervals on the line, at imaginary
//! frequency k = iκ (sin → sinh, e^{ik|·|} → e^{-κ|·|}).

use crate::error::{CasimirError, Result};
use crate::geometry::{Configuration, Obstacle};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval1DConfig {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Interval1DConfig {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        if !(a1 < b1 && b1 < a2 && a2 < b2) || ![a1, b1, a2, b2].iter().all(|v| v.is_finite()) {
            return Err(CasimirError::Geometry(format!("need a1 < b1 < a2 < b2, got {a1}, {b1}, {a2}, {b2}")));
        }
        Ok(Interval1DConfig { a1, b1, a2, b2 })
    }

    /// Reads two intervals from a 1D configuration, ordered left to right.
    pub fn from_configuration(c: &Configuration) -> Result<Self> {
        let mut iv: Vec<(f64, f64)> = c
            .obstacles
            .iter()
            .filter_map(|o| match o {
                Obstacle::Interval { a, b } => Some((*a, *b)),
                _ => None,
            })
            .collect();
        if c.dimension != 1 || iv.len() != 2 || c.obstacles.len() != 2 {
            return Err(CasimirError::Geometry("closed forms need exactly two intervals in d = 1".into()));
        }
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        Interval1DConfig::new(iv[0].0, iv[0].1, iv[1].0, iv[1].1)
    }

    pub fn gap(&self) -> f64 {
        self.a2 - self.b1
    }
}

fn check_kappa(func: &'static str, kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(CasimirError::domain(func, format!("kappa must be positive, got {kappa}")))
    }
}

pub fn green_free_1d(kappa: f64, x: f64, y: f64) -> Result<f64> {
    check_kappa("green_free_1d", kappa)?;
    Ok((-kappa * (x - y).abs()).exp() / (2.0 * kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfLine {
    /// (-∞, endpoint)
    LeftOf,
    /// (endpoint, +∞)
    RightOf,
}

pub fn green_halfline_1d(kind: HalfLine, endpoint: f64, kappa: f64, x: f64, y: f64) -> Result<f64> {
    check_kappa("green_halfline_1d", kappa)?;
    let inside = |p: f64| match kind {
        HalfLine::LeftOf => p <= endpoint,
        HalfLine::RightOf => p >= endpoint,
    };
    if !inside(x) || !inside(y) {
        return Err(CasimirError::domain("green_halfline_1d", format!("({x}, {y}) outside the half-line")));
    }
    let direct = (-kappa * (x - y).abs()).exp();
    let image = (-kappa * (x + y - 2.0 * endpoint).abs()).exp();
    Ok((direct - image) / (2.0 * kappa))
}

/// sinh(κ(x_< - a)) sinh(κ(b - x_>)) / (κ sinh(κ(b - a))), written with
/// decaying exponentials only.
pub fn green_interval_1d(a: f64, b: f64, kappa: f64, x: f64, y: f64) -> Result<f64> {
    check_kappa("green_interval_1d", kappa)?;
    if !(a < b) || x < a || x > b || y < a || y > b {
        return Err(CasimirError::domain("green_interval_1d", format!("({x}, {y}) outside [{a}, {b}]")));
    }
    let (lo, hi) = (x.min(y), x.max(y));
    let (p, q, l) = (lo - a, b - hi, b - a);
    let om = |t: f64| -(-2.0 * kappa * t).exp_m1();
    Ok((kappa * (p + q - l)).exp() * om(p) * om(q) / (2.0 * kappa * om(l)))
}

/// Dirichlet Green's function of ℝ with the given intervals removed,
/// extended by zero inside them.
fn green_complement(removed: &[(f64, f64)], kappa: f64, x: f64, y: f64) -> Result<f64> {
    let component = |p: f64| -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &(a, b) in removed {
            if p >= a && p <= b {
                return None;
            }
            if b <= p {
                lo = lo.max(b);
            }
            if a >= p {
                hi = hi.min(a);
            }
        }
        Some((lo, hi))
    };
    let (Some(cx), Some(cy)) = (component(x), component(y)) else {
        return Ok(0.0);
    };
    if cx != cy {
        return Ok(0.0);
    }
    match (cx.0.is_finite(), cx.1.is_finite()) {
        (false, false) => green_free_1d(kappa, x, y),
        (true, false) => green_halfline_1d(HalfLine::RightOf, cx.0, kappa, x, y),
        (false, true) => green_halfline_1d(HalfLine::LeftOf, cx.1, kappa, x, y),
        (true, true) => green_interval_1d(cx.0, cx.1, kappa, x, y),
    }
}

/// G_O - G_{O1} - G_{O2} + G_free. Defined on all of ℝ: inside an obstacle
/// the Green's functions that see it vanish and the others remain.
pub fn green_rel_1d(c: &Interval1DConfig, kappa: f64, x: f64, y: f64) -> Result<f64> {
    check_kappa("green_rel_1d", kappa)?;
    let o1 = (c.a1, c.b1);
    let o2 = (c.a2, c.b2);
    Ok(green_complement(&[o1, o2], kappa, x, y)? - green_complement(&[o1], kappa, x, y)?
        - green_complement(&[o2], kappa, x, y)?
        + green_free_1d(kappa, x, y)?)
}

pub fn xi_exact_1d(c: &Interval1DConfig, kappa: f64) -> f64 {
    (-(-2.0 * kappa * c.gap()).exp()).ln_1p()
}

pub fn energy_exact_1d(c: &Interval1DConfig) -> f64 {
    -PI / (24.0 * c.gap())
}

/// Force on the right interval along +x (negative: toward the left one).
pub fn force_exact_1d(c: &Interval1DConfig) -> f64 {
    -PI / (24.0 * c.gap() * c.gap())
}

/// Exterior boundary value of ∂_ν∂'_ν(H̆_O⁻¹ - H̆_{O2}⁻¹) at a₂.
pub fn boundary_kernel_exact_1d(c: &Interval1DConfig) -> f64 {
    -PI / (6.0 * c.gap() * c.gap())
}

/// ½ H_rel(x), the first term of the relative energy density, on all of ℝ.
/// Its integral over ℝ is the relative energy.
pub fn h_rel_profile_1d(c: &Interval1DConfig, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(CasimirError::domain("h_rel_profile_1d", format!("x must be finite, got {x}")));
    }
    let g = c.gap();
    if x < c.b1 {
        return Ok(-1.0 / (8.0 * PI * (x - c.a2).powi(2)));
    }
    if x > c.a2 {
        return Ok(-1.0 / (8.0 * PI * (x - c.b1).powi(2)));
    }
    // csc² has period π, so pair it with the image term of the nearer endpoint
    let (near, far) = if x - c.b1 <= c.a2 - x { (c.b1, c.a2) } else { (c.a2, c.b1) };
    let z = PI * (x - near) / g;
    Ok(PI / (8.0 * g * g) * csc2_minus_inv2(z) - PI / (24.0 * g * g) - 1.0 / (8.0 * PI * (x - far).powi(2)))
}

/// csc²z - 1/z², finite at z = 0.
fn csc2_minus_inv2(z: f64) -> f64 {
    if z.abs() < 0.2 {
        let z2 = z * z;
        1.0 / 3.0 + z2 * (1.0 / 15.0 + z2 * (2.0 / 189.0 + z2 * (1.0 / 675.0 + z2 * 2.0 / 10395.0)))
    } else {
        1.0 / z.sin().powi(2) - 1.0 / (z * z)
    }
}
