//! Acceptance checks. Runs without the libtest harness so that every check
//! prints its `[PASS]` or `[FAIL]` line; the process fails if any check does.

use std::f64::consts::PI;

use excitable_core::analysis::{
    compute_thresholds, fenichel_distance_scaling, fhn_regime, fold_curves, karma_manifold,
    karma_regime, layer_jacobian, Regime,
};
use excitable_core::blowup::{blowup_jacobian, circle_equilibria};
use excitable_core::integrate::{integrate_to_times, IntegratorConfig, Switched};
use excitable_core::model::{karma93_rhs, karma94_rhs, rescale_94_to_93, Karma94Params};
use excitable_core::pde::{
    back_point_nearest, back_sharpness, profile_align, sweep, sweep_row, Field1D, PdeModel,
    RowStatus, StandardProtocol, SweepParam,
};
use excitable_core::wave::{
    certify_back_connection, continue_locus, find_heteroclinic_c, gap, hamiltonian, Connection,
    ShootOptions,
};
use excitable_core::{FhnParams, KarmaParams, PhaseState};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

type Check = fn() -> Outcome;

const CHECKS: [(&str, Check); 14] = [
    ("C1", c01_fold_point),
    ("C2", c02_thresholds),
    ("C3", c03_hamiltonian_gate),
    ("C4", c04_front_speed),
    ("C5", c05_min_speed_and_certification),
    ("C6", c06_locus_shape),
    ("C7", c07_pde_speed),
    ("C8", c08_breakdown_thresholds),
    ("C9", c09_sweep_monotonicities),
    ("C10", c10_model_contrast),
    ("C11", c11_ode_regimes),
    ("C12", c12_scaling_laws),
    ("C13", c13_blowup_equilibria),
    ("C14", c14_rescaling_equivalence),
];

fn main() {
    // checks are independent; run them side by side and report in order
    let results: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = CHECKS
            .iter()
            .map(|&(id, check)| (id, s.spawn(check)))
            .collect();
        handles
            .into_iter()
            .map(|(id, h)| {
                h.join().unwrap_or_else(|e| {
                    let msg = e
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_default();
                    report(id, false, format!("panicked: {msg}"))
                })
            })
            .collect()
    });
    let mut failed = 0;
    for r in &results {
        println!(
            "[{}] {} {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.detail
        );
        failed += usize::from(!r.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn defaults() -> KarmaParams {
    KarmaParams::default()
}

/// Front speed of `w_z = (c w - f) / D`-type bistable fronts for a cubic
/// `f = -E + A E^2 (1/delta - E)`: with roots `0 < e1 < e2` of the bracket the
/// speed is `sqrt(A D / 2) |e2 - 2 e1|`.
fn cubic_front_speed(n_m: f64, p: &KarmaParams) -> f64 {
    let a = 2.0 * p.delta * (p.e_star - n_m);
    // -1 + A E (1/delta - E) = 0  =>  A E^2 - (A/delta) E + 1 = 0
    let b = a / p.delta;
    let disc = (b * b - 4.0 * a).sqrt();
    let (e1, e2) = ((b - disc) / (2.0 * a), (b + disc) / (2.0 * a));
    (a * p.diff / 2.0).sqrt() * (e2 - 2.0 * e1).abs()
}

fn c01_fold_point() -> Outcome {
    let p = defaults();
    let n = karma_manifold(2.0, &p).unwrap();
    let j = layer_jacobian(2.0, 1.0, &p);
    let pass = (n - 1.0).abs() < 1e-10 && j.abs() < 1e-10;
    report(
        "C1",
        pass,
        format!("manifold(2) = {n:.12}, J(2,1) = {j:.3e}"),
    )
}

fn c02_thresholds() -> Outcome {
    let p = defaults();
    let th = compute_thresholds(&p).unwrap();
    let f = fold_curves(4.0 / 9.0, &p).unwrap();
    let (ep, em) = (f.e_plus.unwrap_or(f64::NAN), f.e_minus.unwrap_or(f64::NAN));
    let pass = (th.i0 - 0.08718).abs() <= 1e-4
        && th.i1 == 4.0 / 9.0
        && (ep - 4.0 / 3.0).abs() < 1e-6
        && (em - 4.0 / 3.0).abs() < 1e-6;
    report(
        "C2",
        pass,
        format!(
            "I0 = {:.6}, I1 = {:.17}, folds at I1: E+ = {ep:.9}, E- = {em:.9}",
            th.i0, th.i1
        ),
    )
}

fn c03_hamiltonian_gate() -> Outcome {
    let p = defaults();
    let h0 = hamiltonian(8.0 / 3.0, 0.0, 15.0 / 16.0, &p);
    // closed form: V(E) D = E^2/2 - k (2E^3/3 - delta E^4 / 2), k = E* - n^M
    let v = |e: f64, nm: f64| {
        e * e / 2.0 - (1.5 - nm) * (2.0 * e.powi(3) / 3.0 - 0.25 * e.powi(4) / 2.0)
    };
    let off: Vec<f64> = [0.9, 0.96]
        .iter()
        .map(|&nm| hamiltonian(8.0 / 3.0, 0.0, nm, &p))
        .collect();
    let oracle_ok = v(8.0 / 3.0, 15.0 / 16.0).abs() < 1e-12
        && off
            .iter()
            .zip([0.9, 0.96])
            .all(|(h, nm)| (h + v(8.0 / 3.0, nm)).abs() < 1e-12);
    let pass = h0.abs() < 1e-12 && off.iter().all(|h| h.abs() > 1e-6) && oracle_ok;
    report(
        "C3",
        pass,
        format!("H(8/3,0;15/16) = {h0:.3e}, H at 0.9, 0.96 = {off:.6?}"),
    )
}

fn c04_front_speed() -> Outcome {
    let p = defaults();
    let c = find_heteroclinic_c(0.0, &p, (0.5, 3.0), &ShootOptions::default())
        .unwrap()
        .c;
    let oracle = cubic_front_speed(0.0, &p);
    let pass = (c - 1.77).abs() <= 0.02 && (c - oracle).abs() < 1e-4;
    report("C4", pass, format!("c = {c:.6} (closed form {oracle:.6})"))
}

fn c05_min_speed_and_certification() -> Outcome {
    let p = defaults();
    let opts = ShootOptions::default();
    let c = find_heteroclinic_c(1.0, &p, (0.05, 3.0), &opts).unwrap().c;
    let oracle = cubic_front_speed(1.0, &p);
    let hi = certify_back_connection(1.5 * c, &p, 1e-2, 2000.0, &opts);
    let lo = certify_back_connection(0.5 * c, &p, 1e-2, 2000.0, &opts);
    let pass = (c - 0.707).abs() <= 0.01 && (c - oracle).abs() < 1e-4 && hi.is_ok() && lo.is_err();
    report(
        "C5",
        pass,
        format!(
            "c_min = {c:.6} (closed form {oracle:.6}); 1.5 c_min certified: {}, 0.5 c_min certified: {}",
            hi.is_ok(),
            lo.is_ok()
        ),
    )
}

fn c06_locus_shape() -> Outcome {
    let base = defaults();
    let opts = ShootOptions::default();
    // n^M where the c = 0 gap of the p0 -> p2 shot changes sign, by bisection
    let g = |nm: f64| {
        gap(nm, 0.0, Connection::P0ToP2, &base, &opts)
            .unwrap()
            .delta
    };
    let (mut a, mut b) = (0.90, 0.97);
    let (ga, gb) = (g(a), g(b));
    let bracketed = ga.signum() != gb.signum();
    if bracketed {
        let mut ga = ga;
        for _ in 0..50 {
            let m = 0.5 * (a + b);
            let gm = g(m);
            if gm.signum() == ga.signum() {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
    }
    let switch = 0.5 * (a + b);
    let mut lines = Vec::new();
    let mut shape_ok = bracketed && (switch - 15.0 / 16.0).abs() <= 1e-3;
    let mut flatness = Vec::new();
    for m in [4u32, 10, 30] {
        let p = KarmaParams { m, ..base };
        let mut grid: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
        grid.extend(
            [0.90, 0.92, 0.95, 0.96, 0.97, 0.98, 0.99]
                .iter()
                .map(|q: &f64| q.powf(1.0 / m as f64)),
        );
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let locus = continue_locus(&p, &grid, 3.0, &opts);
        let pts = &locus.points;
        let k = pts
            .iter()
            .position(|q| q.direction == Connection::P2ToP0)
            .unwrap_or(pts.len());
        let left_down = pts[..k].windows(2).all(|w| w[1].c <= w[0].c + 1e-9);
        let right_up = k < pts.len() && pts[k..].windows(2).all(|w| w[1].c >= w[0].c - 1e-9);
        let n_switch_lo = pts[k.saturating_sub(1)].n.powi(m as i32);
        let n_switch_hi = pts.get(k).map_or(f64::NAN, |q| q.n.powi(m as i32));
        let v_ok = locus.failure.is_none()
            && left_down
            && right_up
            && n_switch_lo <= switch
            && switch <= n_switch_hi;
        shape_ok &= v_ok;
        // mean drop from the n = 0 speed over n <= 0.9
        let c0 = pts[0].c;
        let early: Vec<f64> = pts
            .iter()
            .filter(|q| q.n <= 0.9)
            .map(|q| c0 - q.c)
            .collect();
        let flat = early.iter().sum::<f64>() / early.len() as f64;
        flatness.push(flat);
        lines.push(format!("M={m}: V {v_ok}, switch bracket n^M in [{n_switch_lo:.4}, {n_switch_hi:.4}], mean drop {flat:.4}"));
    }
    let flattening = flatness.windows(2).all(|w| w[1] < w[0]);
    let pass = shape_ok && flattening;
    report(
        "C6",
        pass,
        format!("c=0 gap switch at n^M = {switch:.6}; {}", lines.join("; ")),
    )
}

fn measured_speed(model: &PdeModel) -> Option<f64> {
    let run = StandardProtocol::default().run(model).ok()?;
    run.measurement.ok().map(|m| m.speed)
}

fn c07_pde_speed() -> Outcome {
    let p = defaults();
    let c_shoot = find_heteroclinic_c(0.0, &p, (0.5, 3.0), &ShootOptions::default())
        .unwrap()
        .c;
    let s2 = measured_speed(&PdeModel::Karma(p)).unwrap_or(f64::NAN);
    let s3 = measured_speed(&PdeModel::Karma(KarmaParams { eps: 1e-3, ..p })).unwrap_or(f64::NAN);
    let pass = (s2 - c_shoot).abs() / c_shoot < 0.05 && (s3 - s2).abs() / s2 < 0.03;
    report(
        "C7",
        pass,
        format!("speed {s2:.5} at eps=1e-2, {s3:.5} at eps=1e-3, shooting {c_shoot:.5}"),
    )
}

fn c08_breakdown_thresholds() -> Outcome {
    let model = PdeModel::Karma(defaults());
    let pr = StandardProtocol::default();
    let eps = sweep_row(&model, SweepParam::Eps, 0.08, &pr);
    let d = sweep(&model, SweepParam::Diff, &[0.10, 0.15], &pr);
    let speed = |r: &excitable_core::pde::SweepRow| r.measurement.map_or(f64::NAN, |m| m.speed);
    let pass = eps.status == RowStatus::WaveLost
        && d[0].status == RowStatus::WaveLost
        && d[1].status == RowStatus::Ok;
    report(
        "C8",
        pass,
        format!(
            "eps=0.08: {} (speed {:.4}); D=0.10: {} (speed {:.4}); D=0.15: {} (speed {:.4}); want wave-lost, wave-lost, ok",
            eps.status.name(),
            speed(&eps),
            d[0].status.name(),
            speed(&d[0]),
            d[1].status.name(),
            speed(&d[1])
        ),
    )
}

/// Largest `|n_a(x) - n_b(x)|` after aligning fronts, with `n_b` linearly
/// interpolated onto the aligned coordinates of `a`.
fn aligned_slow_difference(a: &Field1D, b: &Field1D, level: f64) -> f64 {
    let al = profile_align(&[a.clone(), b.clone()], level);
    let (pa, pb) = (al[0].as_ref().unwrap(), al[1].as_ref().unwrap());
    let dx = a.grid.dx();
    let mut worst: f64 = 0.0;
    for (i, &x) in pa.x.iter().enumerate() {
        let s = (x - pb.x[0]) / dx;
        if s < 0.0 || s >= (pb.x.len() - 1) as f64 {
            continue;
        }
        let j = s.floor() as usize;
        let t = s - j as f64;
        let nb = pb.slow[j] * (1.0 - t) + pb.slow[j + 1] * t;
        worst = worst.max((pa.slow[i] - nb).abs());
    }
    worst
}

fn c09_sweep_monotonicities() -> Outcome {
    let model = PdeModel::Karma(defaults());
    let pr = StandardProtocol::default();
    let survivors = |rows: &[excitable_core::pde::SweepRow],
                     f: fn(&excitable_core::pde::WaveMeasurement) -> f64| {
        rows.iter()
            .filter(|r| r.status == RowStatus::Ok)
            .map(|r| f(r.measurement.as_ref().unwrap()))
            .collect::<Vec<f64>>()
    };
    let increasing = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]);
    let d_rows = sweep(&model, SweepParam::Diff, &[0.1, 0.5, 1.0, 2.0], &pr);
    let i_rows = sweep(&model, SweepParam::Current, &[0.0, 0.04, 0.08], &pr);
    let nb_rows = sweep(&model, SweepParam::NB, &[0.3, 0.5, 0.8], &pr);
    let m_rows = sweep(&model, SweepParam::M, &[4.0, 30.0], &pr);
    let d_speed = survivors(&d_rows, |m| m.speed);
    let i_speed = survivors(&i_rows, |m| m.speed);
    let widths = survivors(&nb_rows, |m| m.pulse_width);
    let (f4, f30) = (
        m_rows[0].final_field.as_ref().unwrap(),
        m_rows[1].final_field.as_ref().unwrap(),
    );
    let n_diff = aligned_slow_difference(f4, f30, 1.0);
    let n_amp = f4.slow.iter().copied().fold(0.0, f64::max);
    let sharp = [
        back_sharpness(f4, 1.0).unwrap(),
        back_sharpness(f30, 1.0).unwrap(),
    ];
    let pass = increasing(&d_speed)
        && increasing(&i_speed)
        && widths.len() == 3
        && increasing(&widths)
        && n_diff < 0.1 * n_amp
        && sharp[1] > sharp[0];
    report(
        "C9",
        pass,
        format!(
            "D speeds {d_speed:.4?}; I speeds {i_speed:.4?}; n_B widths {widths:.3?}; M 4 vs 30: n diff {n_diff:.4} (amplitude {n_amp:.4}), back slope {sharp:.4?}"
        ),
    )
}

fn c10_model_contrast() -> Outcome {
    let pr = StandardProtocol::default();
    let fhn = pr.run(&PdeModel::Fhn(FhnParams::default())).unwrap();
    let karma = pr.run(&PdeModel::Karma(defaults())).unwrap();
    let fm = fhn.measurement.unwrap();
    let km = karma.measurement.unwrap();
    let last = karma.snapshots.last().unwrap();
    let (q, dist) = back_point_nearest(last, 1.0, PhaseState::new(2.0, 1.0)).unwrap();
    let pass =
        fm.hyperpolarization_depth < -0.1 && km.hyperpolarization_depth > -1e-6 && dist < 0.15;
    report(
        "C10",
        pass,
        format!(
            "FHN depth {:.4} below rest {:.4}; Karma depth {:.3e}; Karma back passes ({:.4}, {:.4}), {dist:.4} from the fold",
            fm.hyperpolarization_depth, fm.baseline, km.hyperpolarization_depth, q.fast, q.slow
        ),
    )
}

fn regime_tag(r: &Regime) -> &'static str {
    match r {
        Regime::Converge { .. } => "converge",
        Regime::Oscillate { .. } => "oscillate",
        Regime::Undetermined { .. } => "undetermined",
    }
}

fn c11_ode_regimes() -> Outcome {
    let f: Vec<&str> = [0.0, 1.0, 2.0]
        .iter()
        .map(|&i| {
            let p = FhnParams {
                current: i,
                ..FhnParams::default()
            };
            regime_tag(&fhn_regime(&p, PhaseState::new(0.0, 0.0), 2000.0).unwrap())
        })
        .collect();
    let k: Vec<&str> = [0.0, 0.1, 0.5]
        .iter()
        .map(|&i| {
            let p = KarmaParams {
                current: i,
                ..defaults()
            };
            regime_tag(&karma_regime(&p, PhaseState::new(1.5, 0.0), 2000.0).unwrap())
        })
        .collect();
    let expected = ["converge", "oscillate", "converge"];
    let pass = f == expected && k == expected;
    report(
        "C11",
        pass,
        format!("FHN I=0,1,2: {f:?}; Karma I=0,0.1,0.5: {k:?}"),
    )
}

fn c12_scaling_laws() -> Outcome {
    let r = fenichel_distance_scaling(&defaults(), &[1e-2, 5e-3, 2e-3, 1e-3]).unwrap();
    let (a, b) = (r.distance.slope, r.fold_exit.slope);
    let pass = (0.8..=1.2).contains(&a) && (0.55..=0.78).contains(&b);
    report(
        "C12",
        pass,
        format!("distance exponent {a:.4} (+/- {:.4}); fold exit exponent {b:.4} (+/- {:.4}), theory 2/3", r.distance.slope_stderr, r.fold_exit.slope_stderr),
    )
}

fn c13_blowup_equilibria() -> Outcome {
    let eq = circle_equilibria();
    // zeros of cos sin (sin - cos) on [0, 2 pi)
    let oracle = [0.0, PI / 4.0, PI / 2.0, PI, 5.0 * PI / 4.0, 3.0 * PI / 2.0];
    let matches = eq.len() == oracle.len()
        && eq
            .iter()
            .zip(oracle)
            .all(|(q, t)| (q.theta - t).abs() < 1e-10);
    let simple = eq
        .iter()
        .all(|q| blowup_jacobian(q.theta, 0.0)[0][0].abs() > 1e-9);
    let pass = eq.len() == 6 && eq.iter().all(|q| q.hyperbolic) && matches && simple;
    let thetas: Vec<f64> = eq.iter().map(|q| q.theta).collect();
    report(
        "C13",
        pass,
        format!(
            "{} equilibria at {thetas:.6?}, all hyperbolic: {}",
            eq.len(),
            eq.iter().all(|q| q.hyperbolic)
        ),
    )
}

fn c14_rescaling_equivalence() -> Outcome {
    let q = Karma94Params::default();
    let p = rescale_94_to_93(&q).unwrap();
    let cfg = IntegratorConfig::with_tol(1e-12, 1e-14);
    let f94 = Switched {
        field: |_t: f64, y: &[f64; 2]| {
            karma94_rhs(PhaseState::new(y[0], y[1]), &q)
                .unwrap()
                .to_array()
        },
        switch: |y: &[f64; 2]| y[0] - 1.0,
    };
    let f93 = Switched {
        field: |_t: f64, y: &[f64; 2]| karma93_rhs(PhaseState::new(y[0], y[1]), &p).to_array(),
        switch: |y: &[f64; 2]| y[0] - 1.0,
    };
    let t94: Vec<f64> = (1..=8).map(|k| 50.0 * k as f64).collect();
    let t93: Vec<f64> = t94.iter().map(|t| t / q.tau_n).collect();
    let mut worst: f64 = 0.0;
    for (e0, n0) in [(1.5, 0.0), (3.0, 0.4), (0.5, 0.9)] {
        let a = integrate_to_times(&f94, [e0, n0], 0.0, &t94, &cfg).unwrap();
        let b = integrate_to_times(&f93, [e0, p.n_b * n0], 0.0, &t93, &cfg).unwrap();
        for (ya, yb) in a.states.iter().zip(&b.states) {
            worst = worst
                .max((ya[0] - yb[0]).abs())
                .max((ya[1] - yb[1] / p.n_b).abs());
        }
    }
    let pass = worst < 1e-6;
    report(
        "C14",
        pass,
        format!("max deviation {worst:.3e} over t in [0, 400]"),
    )
}
