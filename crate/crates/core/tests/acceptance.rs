//! Acceptance criteria 1-9. Each test prints one PASS/FAIL line with the
//! measured discrepancy, its tolerance and the runtime against its budget.
//! Tests hold a shared lock so that runtimes are not inflated by each other.

use casimir_core::energy::relative_energy;
use casimir_core::exact1d::{boundary_kernel_exact_1d, energy_exact_1d, force_exact_1d, h_rel_profile_1d, Interval1DConfig};
use casimir_core::geometry::{min_gap, translate_all, Configuration, Obstacle};
use casimir_core::oracle_pw::{energy_pw, xi_pw, TwoDiscSpec};
use casimir_core::quad::Panel;
use casimir_core::spectral::xi;
use casimir_core::stressforce::{
    default_offsets, default_sigma, force_boundary_hadamard, force_fd, force_surface, h_rel_diag, t_rel_many, BoundaryLimit, SigmaCircle,
};
use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::{Duration, Instant};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Check {
    what: String,
    value: f64,
    tol: f64,
}

fn check(what: impl Into<String>, value: f64, tol: f64) -> Check {
    Check {
        what: what.into(),
        value,
        tol,
    }
}

fn report(id: u32, title: &str, checks: &[Check], elapsed: Duration, budget: Duration) {
    let ok_checks = checks.iter().all(|c| c.value <= c.tol);
    let ok_time = elapsed <= budget;
    let detail: Vec<String> = checks.iter().map(|c| format!("{} = {:.2e} (tol {:e})", c.what, c.value, c.tol)).collect();
    println!(
        "{} criterion {id} [{title}]: {}; runtime {:.2} s (budget {} s)",
        if ok_checks && ok_time { "PASS" } else { "FAIL" },
        detail.join("; "),
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(ok_checks, "criterion {id}: tolerance exceeded");
    assert!(ok_time, "criterion {id}: runtime budget exceeded");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gap_config(g: f64, w1: f64, w2: f64) -> Configuration {
    Configuration::two_intervals(-w1, 0.0, g, g + w2).unwrap()
}

#[test]
fn criterion_1_one_d_exact_energy() {
    let _l = serial();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for g in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let want = -PI / (24.0 * g);
        let es: Vec<f64> = [0.3, 1.0, 2.0]
            .iter()
            .map(|&w| relative_energy(&gap_config(g, w, w), 0, 1e-10).unwrap().value)
            .collect();
        for e in &es {
            worst = worst.max((e - want).abs());
        }
        let (lo, hi) = es.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(*e), b.max(*e)));
        spread = spread.max(hi - lo);
    }
    report(
        1,
        "1D exact energy",
        &[check("max |E + π/(24g)|", worst, 1e-8), check("width spread", spread, 1e-10)],
        t.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_2_one_d_force() {
    let _l = serial();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for g in [0.5, 1.0, 2.0] {
        let c = gap_config(g, 1.0, 1.0);
        let ic = Interval1DConfig::from_configuration(&c).unwrap();
        let f = force_fd(&c, 1, [1.0, 0.0], None, 0, 1e-10).unwrap();
        assert!((force_exact_1d(&ic) + PI / (24.0 * g * g)).abs() < 1e-15);
        worst = worst.max(rel(f.force[0].abs(), PI / (24.0 * g * g)));
    }
    let c = gap_config(1.0, 1.0, 1.0);
    let want = boundary_kernel_exact_1d(&Interval1DConfig::from_configuration(&c).unwrap());
    let jump = force_boundary_hadamard(&c, 1, BoundaryLimit::Jump, 0, 1e-10).unwrap();
    let off = force_boundary_hadamard(&c, 1, BoundaryLimit::Offsets(default_offsets(&c)), 0, 1e-10).unwrap();
    // node 0 of the right interval is its left endpoint, facing the gap
    let bj = jump.boundary_values.unwrap()[0].1;
    let bo = off.boundary_values.unwrap()[0].1;
    report(
        2,
        "1D force",
        &[
            check("fd rel err vs π/(24g²)", worst, 1e-6),
            check("boundary kernel rel err (jump)", rel(bj, want), 1e-4),
            check("boundary kernel rel err (offsets)", rel(bo, want), 1e-4),
        ],
        t.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_3_two_disc_oracle_equivalence() {
    let _l = serial();
    let t = Instant::now();
    let c = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
    let spec = TwoDiscSpec::new(1.0, 1.0, 3.0, 40).unwrap();
    let mut worst: f64 = 0.0;
    let mut certified = true;
    for k in [0.5, 1.0, 2.0, 5.0] {
        let p = xi_pw(&spec, k).unwrap();
        certified &= !p.truncation_warning;
        worst = worst.max((xi(&c, k, 128).unwrap() - p.value).abs());
    }
    assert!(certified, "partial-wave truncation not certified at N = 40");
    let en = relative_energy(&c, 128, 1e-10).unwrap().value;
    let ep = energy_pw(&spec, 0.0, 1e-10).unwrap().value;
    report(
        3,
        "2D oracle equivalence",
        &[check("max |Ξ_nyström - Ξ_pw|", worst, 1e-8), check("energy rel diff", rel(en, ep), 1e-6)],
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_4_three_route_equivalence() {
    let _l = serial();
    let t = Instant::now();
    let (n, tol) = (64, 1e-8);
    let mut fd_s: f64 = 0.0;
    let mut h_s: f64 = 0.0;
    for g in [0.5, 1.0, 2.0] {
        let c = Configuration::two_discs(1.0, 1.0, 2.0 + g).unwrap();
        let fd = force_fd(&c, 1, [1.0, 0.0], None, n, tol).unwrap().force[0];
        let s = force_surface(&c, 1, None, 96, n, tol).unwrap().force[0];
        let h = force_boundary_hadamard(&c, 1, BoundaryLimit::Jump, n, tol).unwrap().force[0];
        println!("  gap {g}: fd {fd:.12e}  surface {s:.12e}  hadamard {h:.12e}");
        fd_s = fd_s.max(rel(fd, s));
        h_s = h_s.max(rel(h, s));
    }
    report(
        4,
        "three-route force equivalence",
        &[check("max |fd - surface|/|surface|", fd_s, 1e-4), check("max |hadamard - surface|/|surface|", h_s, 1e-3)],
        t.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_5_surface_independence() {
    let _l = serial();
    let t = Instant::now();
    let (n, tol) = (64, 1e-8);
    let mut worst: f64 = 0.0;
    for g in [0.5, 1.0] {
        let c = Configuration::two_discs(1.0, 1.0, 2.0 + g).unwrap();
        let a = default_sigma(&c, 1).unwrap();
        let b = SigmaCircle {
            center: [2.0 + g + 0.05 * g, 0.03 * g],
            radius: 1.0 + 0.35 * g,
        };
        assert!(a != b);
        let fa = force_surface(&c, 1, Some(a), 96, n, tol).unwrap().force;
        let fb = force_surface(&c, 1, Some(b), 96, n, tol).unwrap().force;
        worst = worst.max((fa[0] - fb[0]).hypot(fa[1] - fb[1]) / fa[0].hypot(fa[1]));
    }
    report(
        5,
        "surface independence",
        &[check("max rel diff between Σ", worst, 1e-6)],
        t.elapsed(),
        Duration::from_secs(60),
    );
}

/// Least-squares slope of ln|Ξ| against κ on [5, 15], negated.
fn decay_rate(c: &Configuration, n: usize) -> f64 {
    let ks: Vec<f64> = (0..=20).map(|i| 5.0 + 0.5 * i as f64).collect();
    let ys: Vec<f64> = ks.iter().map(|&k| xi(c, k, n).unwrap().abs().ln()).collect();
    let m = ks.len() as f64;
    let (mk, my) = (ks.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let num: f64 = ks.iter().zip(&ys).map(|(k, y)| (k - mk) * (y - my)).sum();
    let den: f64 = ks.iter().map(|k| (k - mk).powi(2)).sum();
    -num / den
}

#[test]
fn criterion_6_xi_decay() {
    let _l = serial();
    let t = Instant::now();
    let one = gap_config(1.0, 1.0, 1.0);
    let two = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
    let r1 = decay_rate(&one, 0);
    let r2 = decay_rate(&two, 64);
    println!("  fitted rates: 1D {r1:.6} (2g = 2), two discs {r2:.6} (2g = 2)");
    report(
        6,
        "Ξ decay bound",
        &[
            check("1D |rate - 2g|/2g", rel(r1, 2.0 * min_gap(&one)), 0.15),
            check("two discs |rate - 2g|/2g", rel(r2, 2.0 * min_gap(&two)), 0.15),
        ],
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_7_invariance_suite() {
    let _l = serial();
    let t = Instant::now();
    let (n, tol) = (48, 1e-8);
    let pair = Configuration::new(2, 0.0, vec![Obstacle::circle([0.0, 0.0], 1.0), Obstacle::ellipse([2.7, 0.6], [0.9, 0.5])]).unwrap();
    let e0 = relative_energy(&pair, n, tol).unwrap().value;
    let e1 = relative_energy(&translate_all(&pair, [0.37, -1.2]).unwrap(), n, tol).unwrap().value;
    let one = gap_config(1.0, 1.0, 1.0);
    let e1d = relative_energy(&one, 0, 1e-10).unwrap().value;
    let e1d_t = relative_energy(&translate_all(&one, [0.37, 0.0]).unwrap(), 0, 1e-10).unwrap().value;
    let translation = (e0 - e1).abs().max((e1d - e1d_t).abs());

    // Newton's third law on an asymmetric pair, both boundary and surface routes
    let mut third: f64 = 0.0;
    for route in 0..2 {
        let f = |j| match route {
            0 => force_boundary_hadamard(&pair, j, BoundaryLimit::Jump, n, tol).unwrap().force,
            _ => force_surface(&pair, j, None, 96, n, tol).unwrap().force,
        };
        let (a, b) = (f(0), f(1));
        third = third.max((a[0] + b[0]).hypot(a[1] + b[1]) / a[0].hypot(a[1]));
    }

    // two discs mirrored in the y-axis: forces along x and attractive
    let sym = Configuration::new(2, 0.0, vec![Obstacle::circle([-1.6, 0.0], 1.0), Obstacle::circle([1.6, 0.0], 1.0)]).unwrap();
    let mut reflect: f64 = 0.0;
    for j in 0..2 {
        let f = force_boundary_hadamard(&sym, j, BoundaryLimit::Jump, n, tol).unwrap().force;
        reflect = reflect.max(f[1].abs() / f[0].abs());
        let toward = if j == 0 { 1.0 } else { -1.0 };
        assert!(f[0] * toward > 0.0, "force on disc {j} is not attractive: {f:?}");
    }

    let single = Configuration::new(2, 0.0, vec![Obstacle::circle([0.3, 0.1], 1.0)]).unwrap();
    let es = relative_energy(&single, n, tol).unwrap().value;
    let fs = [
        force_fd(&single, 0, [1.0, 0.0], None, n, tol).unwrap().force,
        force_surface(&single, 0, None, 96, n, tol).unwrap().force,
        force_boundary_hadamard(&single, 0, BoundaryLimit::Jump, n, tol).unwrap().force,
    ];
    let single_zero = es == 0.0 && fs.iter().all(|f| f[0] == 0.0 && f[1] == 0.0);
    report(
        7,
        "invariance suite",
        &[
            check("translation |ΔE|", translation, 1e-10),
            check("Newton third law rel", third, 1e-7),
            check("reflection |F_y|/|F_x|", reflect, 1e-8),
            check("single obstacle nonzero", if single_zero { 0.0 } else { 1.0 }, 0.0),
        ],
        t.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_8_mass_behavior() {
    let _l = serial();
    let t = Instant::now();
    let one = gap_config(1.0, 1.0, 1.0);
    let two = Configuration::two_discs(1.0, 1.0, 3.0).unwrap();
    let masses = [0.0, 0.5, 1.0, 2.0];
    let mut violations = 0.0;
    for (c, n, tol) in [(&one, 0, 1e-10), (&two, 48, 1e-8)] {
        let es: Vec<f64> = masses.iter().map(|&m| relative_energy(&c.with_mass(m).unwrap(), n, tol).unwrap().value).collect();
        println!("  d = {}: E(m) = {es:?}", c.dimension);
        if !(es.windows(2).all(|w| w[0] < w[1]) && es.iter().all(|e| *e < 0.0)) {
            violations += 1.0;
        }
    }
    let e0 = relative_energy(&one, 0, 1e-10).unwrap().value;
    let e_small = relative_energy(&one.with_mass(1e-4).unwrap(), 0, 1e-10).unwrap().value;
    report(
        8,
        "mass behavior",
        &[
            check("monotonicity violations", violations, 0.0),
            check("|E(1e-4) - E(0)|", (e_small - e0).abs(), 1e-4),
        ],
        t.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_9_pointwise_trace_consistency() {
    let _l = serial();
    let t = Instant::now();
    let c = Configuration::two_intervals(0.0, 1.0, 2.0, 3.0).unwrap();
    let ic = Interval1DConfig::from_configuration(&c).unwrap();
    // Gauss-Kronrod panels on the unit intervals of [-5, 8], so the obstacle
    // endpoints 0, 1, 2, 3 are panel edges and never evaluation points
    let panels: Vec<Panel> = (-5..8).map(|a| Panel::new(a as f64, a as f64 + 1.0)).collect();
    let pts: Vec<[f64; 2]> = panels.iter().flat_map(|p| p.nodes.iter().map(|&x| [x, 0.0])).collect();
    let ts = t_rel_many(&c, &pts, 0, 1e-10).unwrap();
    let mut integral = 0.0;
    for (i, p) in panels.iter().enumerate() {
        let v: Vec<f64> = ts[15 * i..15 * (i + 1)].iter().map(|s| s.t00).collect();
        integral += p.apply(&v).0;
    }
    let e = energy_exact_1d(&ic);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let x = -4.7 + 0.65 * i as f64;
        let num = 0.5 * h_rel_diag(&c, [x, 0.0], 0, 1e-10).unwrap();
        worst = worst.max((num - h_rel_profile_1d(&ic, x).unwrap()).abs());
    }
    report(
        9,
        "pointwise/trace consistency",
        &[check("|∫T00 - E|", (integral - e).abs(), 1e-4), check("max profile deviation", worst, 1e-6)],
        t.elapsed(),
        Duration::from_secs(60),
    );
}
