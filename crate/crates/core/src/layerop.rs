//! Single-layer operator Q(iκ) on the obstacle boundaries and its block split.
//!
//! Matrices are stored in symmetric form `B = W^{1/2} S W^{1/2}`, where `S` is
//! the symmetric kernel matrix of the Nyström discretization `A = S W` and
//! `W` holds the quadrature weights. `B` is similar to `A`, so determinants,
//! eigenvalues and `log det(I + Q̃⁻¹T)` are unchanged, while Cholesky applies.
//!
//! In 2D the logarithmic singularity of K0 is handled by a locally corrected
//! trapezoid rule: the plain trapezoid sum over off-diagonal nodes, the
//! analytic diagonal limit of the smooth remainder, and a symmetric stencil
//! of width 2P+1 that cancels the leading terms of the generalized
//! Euler-Maclaurin error expansion for `a(s) ln|s - t|`. The weights come
//! from ζ'(-2m). Only local Taylor data of the singular coefficient is used,
//! so entries stay O(1) even when κ times the obstacle size is large (a
//! global split would multiply the log by I0(κr), which grows like e^{κ diam}).

use crate::error::{CasimirError, Result};
use crate::geometry::{dot, norm, sub, BoundaryDiscretization, Point};
use crate::specfun::{i0_i1_scaled, k0_k1, EULER_GAMMA};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::ops::Range;
use std::sync::OnceLock;

/// ζ'(-2m) for m = 0..=8 (30-digit reference evaluation, rounded).
const ZETA_PRIME_NEG_EVEN: [f64; 9] = [
    -0.918_938_533_204_672_741_780_3,
    -0.030_448_457_058_393_270_780_25,
    0.007_983_811_450_268_624_280_697,
    -0.005_899_759_143_515_937_450_63,
    0.008_316_161_985_602_247_359_524,
    -0.018_929_926_338_140_374_228_98,
    0.063_270_583_341_463_000_595_18,
    -0.291_657_724_743_873_520_321_2,
    1.773_025_660_899_096_396_248,
];

/// Largest stencil half-width used by the corrected trapezoid rule.
pub const MAX_STENCIL: usize = 7;

/// Stencil weights c_0..c_P with c_0 δ_{m0} + 2 Σ_q c_q q^{2m} = 2ζ'(-2m), m = 0..P.
fn zeta_stencil(p: usize) -> &'static [f64] {
    static CACHE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        (0..=MAX_STENCIL)
            .map(|p| {
                let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
                let mut rhs = nalgebra::DVector::<f64>::zeros(p + 1);
                for m in 0..=p {
                    a[(m, 0)] = if m == 0 { 1.0 } else { 0.0 };
                    for q in 1..=p {
                        a[(m, q)] = 2.0 * (q as f64).powi(2 * m as i32);
                    }
                    rhs[m] = 2.0 * ZETA_PRIME_NEG_EVEN[m];
                }
                a.lu().solve(&rhs).expect("stencil system is nonsingular").iter().copied().collect()
            })
            .collect()
    });
    &all[p]
}

/// Stencil half-width for n nodes per curve.
pub fn stencil_width(n: usize) -> usize {
    MAX_STENCIL.min((n / 4).saturating_sub(1))
}

/// Free Green's function of (-Δ + κ²) in dimension 1 or 2.
pub fn free_kernel(dimension: usize, kappa: f64, r: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(CasimirError::domain("free_kernel", format!("kappa must be positive, got {kappa}")));
    }
    if !(r >= 0.0) {
        return Err(CasimirError::domain("free_kernel", format!("distance must be >= 0, got {r}")));
    }
    match dimension {
        1 => Ok((-kappa * r).exp() / (2.0 * kappa)),
        2 => {
            if r == 0.0 {
                return Err(CasimirError::domain("free_kernel", "logarithmic singularity at r = 0 in 2D"));
            }
            Ok(k0_k1(kappa * r).0 / (2.0 * PI))
        }
        d => Err(CasimirError::DimensionMismatch { expected: 2, found: d }),
    }
}

/// G, ∇_x G and the Hessian ∇_x∇_x G of G(x - z), for x ≠ z.
pub(crate) fn green_jet(dimension: usize, kappa: f64, x: Point, z: Point) -> (f64, Point, [[f64; 2]; 2]) {
    let d = sub(x, z);
    if dimension == 1 {
        let r = d[0].abs();
        let e = (-kappa * r).exp();
        let s = d[0].signum();
        return (e / (2.0 * kappa), [-0.5 * s * e, 0.0], [[0.5 * kappa * e, 0.0], [0.0, 0.0]]);
    }
    let r = norm(d);
    let (k0, k1) = k0_k1(kappa * r);
    let e = [d[0] / r, d[1] / r];
    let g = k0 / (2.0 * PI);
    let gp = -kappa * k1 / (2.0 * PI); // dG/dr
    // d²G/dr² = κ² K0''(κr)/(2π), K0'' = K0 + K1/(κr)
    let gpp = kappa * kappa * (k0 + k1 / (kappa * r)) / (2.0 * PI);
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            hess[i][j] = gpp * e[i] * e[j] + gp * (delta - e[i] * e[j]) / r;
        }
    }
    (g, [gp * e[0], gp * e[1]], hess)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Full,
    Diagonal,
    OffDiagonal,
}

#[derive(Debug, Clone)]
pub struct LayerMatrix {
    pub kappa: f64,
    pub entries: DMatrix<f64>,
    pub block_ranges: Vec<Range<usize>>,
    pub kind: LayerKind,
}

impl LayerMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Assemble the symmetric Nyström form of Q(iκ).
///
/// `mass_shift` must be zero: massive fields enter only through the
/// frequency at which Q is evaluated.
pub fn assemble_q(disc: &BoundaryDiscretization, kappa: f64, mass_shift: f64) -> Result<LayerMatrix> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(CasimirError::domain("assemble_q", format!("kappa must be positive, got {kappa}")));
    }
    if mass_shift != 0.0 {
        return Err(CasimirError::InvalidParameter(
            "mass enters through the frequency argument; mass_shift must be 0".into(),
        ));
    }
    let n = disc.len();
    let mut b = DMatrix::<f64>::zeros(n, n);
    if disc.dimension == 1 {
        for i in 0..n {
            for j in 0..n {
                let r = (disc.nodes[i][0] - disc.nodes[j][0]).abs();
                b[(i, j)] = (-kappa * r).exp() / (2.0 * kappa);
            }
        }
    } else {
        let sw: Vec<f64> = disc.weights.iter().map(|w| w.sqrt()).collect();
        for (bi, ri) in disc.block_ranges.iter().enumerate() {
            for (bj, rj) in disc.block_ranges.iter().enumerate() {
                if bj < bi {
                    continue;
                }
                if bi == bj {
                    fill_self_block(disc, ri.clone(), kappa, &sw, &mut b);
                } else {
                    for i in ri.clone() {
                        for j in rj.clone() {
                            let r = norm(sub(disc.nodes[i], disc.nodes[j]));
                            let v = sw[i] * sw[j] * k0_k1(kappa * r).0 / (2.0 * PI);
                            b[(i, j)] = v;
                            b[(j, i)] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(LayerMatrix {
        kappa,
        entries: b,
        block_ranges: disc.block_ranges.clone(),
        kind: LayerKind::Full,
    })
}

fn fill_self_block(disc: &BoundaryDiscretization, range: Range<usize>, kappa: f64, sw: &[f64], b: &mut DMatrix<f64>) {
    let n = range.len();
    let p = stencil_width(n);
    let c = zeta_stencil(p);
    let h = 2.0 * PI / n as f64;
    let off = range.start;
    for li in 0..n {
        let i = off + li;
        let speed = disc.speeds[i];
        // smooth-part diagonal limit plus the log-moment and c_0 corrections
        let diag = ((2.0 / (kappa * speed)).ln() - EULER_GAMMA) / (2.0 * PI) - (h.ln() + c[0]) / (2.0 * PI);
        b[(i, i)] = sw[i] * sw[i] * diag;
        for lj in (li + 1)..n {
            let j = off + lj;
            let r = norm(sub(disc.nodes[i], disc.nodes[j]));
            let mut s = k0_k1(kappa * r).0 / (2.0 * PI);
            let q = lj - li;
            let q = q.min(n - q);
            if q >= 1 && q <= p {
                let x = kappa * r;
                let i0 = i0_i1_scaled(x).0 * x.exp();
                s -= c[q] * i0 / (2.0 * PI);
            }
            let v = sw[i] * sw[j] * s;
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
}

/// Q̃ (same-obstacle blocks) and T (cross-obstacle blocks); Q̃ + T = Q exactly.
pub fn split_blocks(q: &LayerMatrix) -> Result<(LayerMatrix, LayerMatrix)> {
    if q.kind != LayerKind::Full {
        return Err(CasimirError::InvalidParameter("split_blocks expects a full Q".into()));
    }
    let n = q.dim();
    let mut owner = vec![0usize; n];
    for (k, r) in q.block_ranges.iter().enumerate() {
        for i in r.clone() {
            owner[i] = k;
        }
    }
    let mut qt = DMatrix::<f64>::zeros(n, n);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if owner[i] == owner[j] {
                qt[(i, j)] = q.entries[(i, j)];
            } else {
                t[(i, j)] = q.entries[(i, j)];
            }
        }
    }
    let mk = |entries, kind| LayerMatrix {
        kappa: q.kappa,
        entries,
        block_ranges: q.block_ranges.clone(),
        kind,
    };
    Ok((mk(qt, LayerKind::Diagonal), mk(t, LayerKind::OffDiagonal)))
}

/// Exterior trace of the normal derivative of the single layer, `K' - 1/2`,
/// for target nodes on block `p` and densities on all nodes.
///
/// Returned in the same symmetric scaling as `B`: the matrix maps
/// `W^{1/2} φ` to `W^{1/2} ((K' - 1/2) φ)` restricted to block p.
pub fn normal_trace_operator(disc: &BoundaryDiscretization, kappa: f64, p: usize) -> Result<DMatrix<f64>> {
    if p >= disc.block_ranges.len() {
        return Err(CasimirError::InvalidParameter(format!("no obstacle {p}")));
    }
    if disc.dimension == 1 {
        let rows = disc.block_ranges[p].clone();
        return Ok(DMatrix::from_fn(rows.len(), disc.len(), |li, j| {
            let i = rows.start + li;
            if i == j {
                return -0.5;
            }
            let d = disc.nodes[i][0] - disc.nodes[j][0];
            -0.5 * disc.normals[i][0] * d.signum() * (-kappa * d.abs()).exp()
        }));
    }
    let rows = disc.block_ranges[p].clone();
    let np = rows.len();
    let ntot = disc.len();
    let sw: Vec<f64> = disc.weights.iter().map(|w| w.sqrt()).collect();
    let sp = stencil_width(np);
    let c = zeta_stencil(sp);
    let mut m = DMatrix::<f64>::zeros(np, ntot);
    for (li, i) in rows.clone().enumerate() {
        let x = disc.nodes[i];
        let nx = disc.normals[i];
        for j in 0..ntot {
            let wj = disc.weights[j];
            let v = if i == j {
                // smooth diagonal limit curv/(4π) per unit length, then the jump
                disc.curvatures[i] / (4.0 * PI) * wj - 0.5
            } else {
                let d = sub(x, disc.nodes[j]);
                let r = norm(d);
                let (_, k1) = k0_k1(kappa * r);
                let mut kern = -kappa * k1 * dot(d, nx) / (2.0 * PI * r);
                if rows.contains(&j) {
                    let lj = j - rows.start;
                    let q = lj.abs_diff(li);
                    let q = q.min(np - q);
                    if q >= 1 && q <= sp {
                        // log coefficient a(s) = -(κ/2π) I1(κr) ((x-y)·n_x)/r per unit weight
                        let z = kappa * r;
                        let i1 = i0_i1_scaled(z).1 * z.exp();
                        let a = -kappa * i1 * dot(d, nx) / (2.0 * PI * r);
                        kern += c[q] * a;
                    }
                }
                kern * wj
            };
            // symmetric scaling: W^{1/2} M W^{-1/2}
            m[(li, j)] = sw[i] * v / sw[j];
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Configuration, Obstacle};

    #[test]
    fn kernel_values() {
        assert!((free_kernel(1, 1.0, 1.0).unwrap() - (-1f64).exp() / 2.0).abs() < 1e-16);
        assert!((free_kernel(2, 1.0, 1.0).unwrap() - 0.421_024_438_240_708_333_34 / (2.0 * PI)).abs() < 1e-16);
        assert_eq!(free_kernel(1, 2.0, 0.0).unwrap(), 0.25);
        assert!(free_kernel(2, 1.0, 0.0).is_err());
        assert!(free_kernel(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn stencil_reproduces_moments() {
        for p in 1..=MAX_STENCIL {
            let c = zeta_stencil(p);
            for m in 0..=p {
                let mut s = if m == 0 { c[0] } else { 0.0 };
                let mut scale = s.abs();
                for q in 1..=p {
                    let t = 2.0 * c[q] * (q as f64).powi(2 * m as i32);
                    s += t;
                    scale += t.abs();
                }
                assert!((s - 2.0 * ZETA_PRIME_NEG_EVEN[m]).abs() < 1e-11 * scale.max(1.0), "p {p} m {m} {s} {scale}");
            }
        }
    }

    #[test]
    fn stencil_p7_values() {
        let c = zeta_stencil(7);
        let want = [
            -1.73491365, -6.14824818e-02, 1.23811565e-02, -2.89773276e-03, 6.05230344e-04, -9.78429900e-05,
            1.05143664e-05, -5.53758680e-07,
        ];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn one_d_entries() {
        let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
        let d = discretize(&c, 0).unwrap();
        let q = assemble_q(&d, 1.0, 0.0).unwrap();
        assert!((q.entries[(1, 2)] - (-1f64).exp() / 2.0).abs() < 1e-16);
        let (_, t) = split_blocks(&q).unwrap();
        assert_eq!(t.entries.iter().filter(|v| **v != 0.0).count(), 8);
    }

    #[test]
    fn circle_constant_mode() {
        let c = Configuration::new(2, 0.0, vec![Obstacle::circle([0.0, 0.0], 1.0)]).unwrap();
        let d = discretize(&c, 64).unwrap();
        let q = assemble_q(&d, 1.0, 0.0).unwrap();
        let v = nalgebra::DVector::from_element(64, 1.0);
        let qv = &q.entries * &v;
        let want = 1.266_065_877_752_008_4 * 0.421_024_438_240_708_333_34;
        for x in qv.iter() {
            assert!((x - want).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_mass_shift() {
        let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
        let d = discretize(&c, 0).unwrap();
        assert!(assemble_q(&d, 1.0, 0.5).is_err());
    }
}
