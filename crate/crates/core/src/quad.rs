//! Gauss-Kronrod 7-15 panels.

// Kronrod abscissae on [-1, 1], positive half, descending; last entry is the center.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the abscissae XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One panel's 15 nodes with Kronrod and embedded Gauss weights
/// (Gauss weight is zero at Kronrod-only nodes).
#[derive(Debug, Clone)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub nodes: [f64; 15],
    pub wk: [f64; 15],
    pub wg: [f64; 15],
}

impl Panel {
    pub fn new(a: f64, b: f64) -> Self {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut nodes = [0.0; 15];
        let mut wk = [0.0; 15];
        let mut wg = [0.0; 15];
        for k in 0..7 {
            nodes[k] = c - h * XGK[k];
            nodes[14 - k] = c + h * XGK[k];
            wk[k] = h * WGK[k];
            wk[14 - k] = h * WGK[k];
            if k % 2 == 1 {
                wg[k] = h * WG[k / 2];
                wg[14 - k] = h * WG[k / 2];
            }
        }
        nodes[7] = c;
        wk[7] = h * WGK[7];
        wg[7] = h * WG[3];
        Panel { a, b, nodes, wk, wg }
    }

    /// (Kronrod, Gauss) estimates from 15 function values.
    pub fn apply(&self, f: &[f64]) -> (f64, f64) {
        let mut k = 0.0;
        let mut g = 0.0;
        for i in 0..15 {
            k += self.wk[i] * f[i];
            g += self.wg[i] * f[i];
        }
        (k, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials() {
        let p = Panel::new(0.5, 2.0);
        for deg in 0..=22 {
            let f: Vec<f64> = p.nodes.iter().map(|x| x.powi(deg)).collect();
            let exact = (2f64.powi(deg + 1) - 0.5f64.powi(deg + 1)) / (deg + 1) as f64;
            let (k, g) = p.apply(&f);
            assert!((k - exact).abs() < 1e-13 * exact.abs().max(1.0), "deg {deg}");
            if deg <= 13 {
                assert!((g - exact).abs() < 1e-13 * exact.abs().max(1.0), "gauss deg {deg}");
            }
        }
    }
}
