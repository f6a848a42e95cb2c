use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use excitable_core::analysis::{self, Regime};
use excitable_core::blowup;
use excitable_core::integrate::{self, EventKind, FhnOde, IntegratorConfig, KarmaOde, Trajectory};
use excitable_core::pde::{self, RowStatus, StandardProtocol, SweepParam};
use excitable_core::wave::{self, ShootOptions};

use crate::config::{Command, ModelKind, RunConfig};
use crate::csv::{Cell, Table};

/// Request the command cannot serve, reported as a usage error.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Runs `cfg.command`, writing into `out`. Returns the files written.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cfg.command {
        Command::Ode => cmd_ode(cfg, out),
        Command::Analyze => cmd_analyze(cfg, out),
        Command::Wave => cmd_wave(cfg, out),
        Command::Pde => cmd_pde(cfg, out),
        Command::Sweep => cmd_sweep(cfg, out),
        Command::Blowup => cmd_blowup(cfg, out),
    }
}

fn regime_name(r: &Regime) -> String {
    match r {
        Regime::Converge { to } => format!(
            "converge to ({}, {})",
            crate::csv::fmt_f64(to.fast),
            crate::csv::fmt_f64(to.slow)
        ),
        Regime::Oscillate { amplitude } => {
            format!("oscillate, amplitude {}", crate::csv::fmt_f64(*amplitude))
        }
        Regime::Undetermined { amplitude } => format!(
            "undetermined, amplitude {}",
            crate::csv::fmt_f64(*amplitude)
        ),
    }
}

fn write_trajectory(cfg: &RunConfig, out: &Path, tr: &Trajectory<2>) -> Result<Vec<PathBuf>> {
    let regime = analysis::classify_regime(&tr.times, &tr.states, 0.25);
    let mut t = Table::new(cfg, &["t", "fast", "slow"]);
    t.comment("regime", regime_name(&regime));
    for (time, y) in tr.times.iter().zip(&tr.states) {
        t.row([*time, y[0], y[1]]);
    }
    let mut ev = Table::new(cfg, &["t", "kind"]);
    for e in &tr.events {
        let kind = match e.kind {
            EventKind::Switch { up: true } => "switch_up".to_string(),
            EventKind::Switch { up: false } => "switch_down".to_string(),
            EventKind::Section(i) => format!("section_{i}"),
        };
        ev.row([Cell::F(e.t), Cell::S(kind)]);
    }
    Ok(vec![
        t.write(out, "trajectory.csv")?,
        ev.write(out, "events.csv")?,
    ])
}

fn equilibria_table(cfg: &RunConfig, eq: &[analysis::EquilibriumInfo]) -> Table {
    let mut t = Table::new(
        cfg,
        &["E", "n", "re_l1", "im_l1", "re_l2", "im_l2", "class"],
    );
    for q in eq {
        t.row([
            Cell::F(q.position.fast),
            Cell::F(q.position.slow),
            Cell::F(q.eigenvalues[0].re),
            Cell::F(q.eigenvalues[0].im),
            Cell::F(q.eigenvalues[1].re),
            Cell::F(q.eigenvalues[1].im),
            Cell::from(q.classification.name()),
        ]);
    }
    t
}

fn manifold_table(cfg: &RunConfig, samples: &[analysis::CriticalManifoldSample]) -> Table {
    let mut t = Table::new(cfg, &["E", "n", "branch", "J"]);
    for s in samples {
        t.row([
            Cell::F(s.e),
            Cell::F(s.n),
            Cell::from(s.branch.name()),
            Cell::F(s.layer_jacobian),
        ]);
    }
    t
}

fn cmd_ode(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let y0 = [cfg.f64("fast0")?, cfg.f64("slow0")?];
    let t_end = cfg.f64("t_end")?;
    let icfg = IntegratorConfig::with_tol(cfg.f64("rtol")?, cfg.f64("atol")?).max_step(0.5);
    let mut files = Vec::new();
    match cfg.model {
        ModelKind::Karma => {
            let p = cfg.karma()?;
            let tr = integrate::integrate(&KarmaOde::new(p), y0, 0.0, t_end, &icfg)
                .map_err(|e| anyhow::anyhow!("integration failed: {e}"))?;
            files.extend(write_trajectory(cfg, out, &tr)?);
            let mut nc = Table::new(cfg, &["E", "slow_nullcline_n"]);
            for i in 0..=400 {
                let e = -0.5 + 5.0 * i as f64 / 400.0;
                nc.row([e, (e - 1.0).max(0.0) / p.n_b]);
            }
            files.push(nc.write(out, "nullclines.csv")?);
            files.push(
                manifold_table(cfg, &analysis::sample_karma_manifold(&p, 400))
                    .write(out, "manifold.csv")?,
            );
            let eq = analysis::find_karma_equilibria(&p)?;
            files.push(equilibria_table(cfg, &eq).write(out, "equilibria.csv")?);
        }
        ModelKind::Fhn => {
            let p = cfg.fhn()?;
            let tr = integrate::integrate(&FhnOde(p), y0, 0.0, t_end, &icfg)
                .map_err(|e| anyhow::anyhow!("integration failed: {e}"))?;
            files.extend(write_trajectory(cfg, out, &tr)?);
            let mut nc = Table::new(cfg, &["v", "fast_nullcline_w", "slow_nullcline_w"]);
            for i in 0..=400 {
                let v = -2.5 + 5.0 * i as f64 / 400.0;
                nc.row([v, analysis::fhn_manifold(v, &p), (v + p.a) / p.b]);
            }
            files.push(nc.write(out, "nullclines.csv")?);
            files.push(
                manifold_table(cfg, &analysis::sample_fhn_manifold(&p, -2.5, 2.5, 401))
                    .write(out, "manifold.csv")?,
            );
            files.push(
                equilibria_table(cfg, &analysis::find_fhn_equilibria(&p))
                    .write(out, "equilibria.csv")?,
            );
        }
    }
    Ok(files)
}

fn require_karma(cfg: &RunConfig, what: &str) -> Result<()> {
    if cfg.model == ModelKind::Fhn {
        return Err(UsageError(format!(
            "`{}` needs --model karma: {what}",
            cfg.command.name()
        ))
        .into());
    }
    Ok(())
}

fn cmd_analyze(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    require_karma(
        cfg,
        "the FitzHugh-Nagumo fold curves are parallel and never meet, so there are no thresholds to compute",
    )?;
    let p = cfg.karma()?;
    let th = analysis::compute_thresholds(&p).context("threshold search failed")?;
    let mut t = Table::new(cfg, &["I0", "I1", "I2", "E_cusp"]);
    t.row([th.i0, th.i1, th.i2, th.e_cusp]);
    let mut files = vec![t.write(out, "thresholds.csv")?];

    let i_max = cfg.f64("I_max")?;
    let count = cfg.usize("I_points")?.max(2);
    let mut currents: Vec<f64> = (0..count)
        .map(|k| i_max * k as f64 / (count - 1) as f64)
        .collect();
    if (0.0..=i_max).contains(&th.i1) && !currents.contains(&th.i1) {
        currents.push(th.i1);
        currents.sort_by(f64::total_cmp);
    }
    let mut fc = Table::new(
        cfg,
        &[
            "I",
            "E_plus",
            "E_minus",
            "on_manifold_plus",
            "on_manifold_minus",
        ],
    );
    for i in currents {
        let f = analysis::fold_curves(i, &p)?;
        fc.row([
            Cell::F(i),
            Cell::F(f.e_plus.unwrap_or(f64::NAN)),
            Cell::F(f.e_minus.unwrap_or(f64::NAN)),
            Cell::from(f.plus_on_manifold),
            Cell::from(f.minus_on_manifold),
        ]);
    }
    files.push(fc.write(out, "fold_curves.csv")?);
    Ok(files)
}

fn cmd_wave(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    require_karma(
        cfg,
        "travelling-wave shooting is implemented for the Karma model only",
    )?;
    let base = cfg.karma()?;
    let opts = ShootOptions::default();
    let count = cfg.usize("locus_points")?.max(2);
    let n_grid: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
    let c_max = cfg.f64("c_max")?;
    let ms = cfg.list("M_values")?;
    let mut params = Vec::with_capacity(ms.len());
    for &m in &ms {
        if !(m >= 1.0) || m.fract() != 0.0 || m > u32::MAX as f64 {
            bail!(UsageError(format!(
                "M_values entry {m} is not a positive integer"
            )));
        }
        params.push(excitable_core::KarmaParams {
            m: m as u32,
            ..base
        });
    }
    let loci: Vec<wave::Locus> = params
        .par_iter()
        .map(|p| wave::continue_locus(p, &n_grid, c_max, &opts))
        .collect();
    let mut files = Vec::new();
    let mut failures = Vec::new();
    for (p, locus) in params.iter().zip(&loci) {
        let mut t = Table::new(cfg, &["n", "c", "direction", "residual"]);
        t.comment("locus_M", p.m);
        for q in &locus.points {
            t.row([
                Cell::F(q.n),
                Cell::F(q.c),
                Cell::from(q.direction.name()),
                Cell::F(q.residual),
            ]);
        }
        if let Some(i) = locus.failure {
            t.comment("failed_at_n", crate::csv::fmt_f64(n_grid[i]));
            failures.push(format!(
                "M = {}: continuation lost the root at n = {}",
                p.m, n_grid[i]
            ));
        }
        files.push(t.write(out, &format!("locus_M{}.csv", p.m))?);
    }

    let gate = wave::balance_gate(&base)?;
    let mut h = Table::new(cfg, &["polyline", "level", "E", "w", "H"]);
    h.comment("n_M", crate::csv::fmt_f64(gate));
    let mut id = 0usize;
    for level in [-0.1, -0.05, 0.0, 0.05, 0.1] {
        for line in wave::hamiltonian_level_set(level, gate, &base, -0.5, 4.5, 801) {
            for (e, w) in line {
                h.row([
                    Cell::from(id),
                    Cell::F(level),
                    Cell::F(e),
                    Cell::F(w),
                    Cell::F(wave::hamiltonian(e, w, gate, &base)),
                ]);
            }
            id += 1;
        }
    }
    files.push(h.write(out, "hamiltonian.csv")?);

    match wave::assemble_singular_pulse(&base, &opts) {
        Ok(pulse) => {
            let mut t = Table::new(cfg, &["segment", "kind", "param", "E", "w", "n"]);
            t.comment("c_front", crate::csv::fmt_f64(pulse.c_front));
            t.comment("c_min", crate::csv::fmt_f64(pulse.c_min));
            for (k, seg) in pulse.segments.iter().enumerate() {
                for q in &seg.points {
                    t.row([
                        Cell::from(k),
                        Cell::from(seg.kind.name()),
                        Cell::F(q.param),
                        Cell::F(q.e),
                        Cell::F(q.w),
                        Cell::F(q.n),
                    ]);
                }
            }
            files.push(t.write(out, "pulse.csv")?);
        }
        Err(e) => failures.push(format!("singular pulse: {e}")),
    }
    if !failures.is_empty() {
        bail!("partial output written: {}", failures.join("; "));
    }
    Ok(files)
}

fn protocol(cfg: &RunConfig, times_key: &str) -> Result<StandardProtocol> {
    Ok(StandardProtocol {
        grid: cfg.grid()?,
        center: cfg.f64("center")?,
        width: cfg.f64("width")?,
        height: cfg.f64("height")?,
        t_end: cfg.f64("t_end")?,
        snapshot_times: cfg.list(times_key)?,
        dt: cfg.dt()?,
    })
}

fn cmd_pde(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let model = cfg.pde_model()?;
    let pr = protocol(cfg, "snapshots")?;
    let f0 = pde::init_bump_on_rest(pr.grid, &model, pr.center, pr.width, pr.height)?;
    let snaps = pde::run_simulation(&f0, &model, pr.t_end, &pr.snapshot_times, pr.dt)?;
    let mut files = Vec::new();
    for s in &snaps {
        let mut t = Table::new(cfg, &["x", "fast", "slow"]);
        t.comment("time", crate::csv::fmt_f64(s.time));
        for i in 0..s.grid.n_points {
            t.row([s.x(i), s.fast[i], s.slow[i]]);
        }
        files.push(t.write(
            out,
            &format!("snapshot_t{}.csv", crate::csv::fmt_f64(s.time)),
        )?);
    }
    Ok(files)
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let model = cfg.pde_model()?;
    let name = cfg.str("sweep_param");
    let param = SweepParam::from_name(name).ok_or_else(|| {
        UsageError(format!(
            "unknown sweep_param `{name}` (eps, D, M, n_B, I, a, b)"
        ))
    })?;
    if let Some(&v) = cfg.list("sweep_values")?.first() {
        // catches parameters that do not belong to the model before any work
        if let Err(e) = param.apply(&model, v) {
            if matches!(e, pde::PdeError::Params(m) if m.contains("does not apply")) {
                bail!(UsageError(format!(
                    "sweep_param `{name}` does not apply to {}",
                    cfg.model.name()
                )));
            }
        }
    }
    let pr = protocol(cfg, "measure_times")?;
    let values = cfg.list("sweep_values")?;
    let rows: Vec<pde::SweepRow> = values
        .par_iter()
        .map(|&v| pde::sweep_row(&model, param, v, &pr))
        .collect();
    let mut t = Table::new(
        cfg,
        &[
            "param_value",
            "speed",
            "speed_stderr",
            "width",
            "amplitude",
            "baseline",
            "hyperpolarization_depth",
            "status",
        ],
    );
    for r in &rows {
        let m = r.measurement;
        let g = |f: fn(&pde::WaveMeasurement) -> f64| Cell::F(m.as_ref().map_or(f64::NAN, f));
        t.row([
            Cell::F(r.value),
            g(|m| m.speed),
            g(|m| m.speed_stderr),
            g(|m| m.pulse_width),
            g(|m| m.amplitude),
            g(|m| m.baseline),
            g(|m| m.hyperpolarization_depth),
            Cell::from(r.status.name()),
        ]);
    }
    let files = vec![t.write(out, &format!("sweep_{}.csv", param.name()))?];
    if rows.iter().any(|r| r.status == RowStatus::Error) {
        bail!("some sweep rows had invalid parameters");
    }
    Ok(files)
}

fn cmd_blowup(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let n_theta = cfg.usize("theta_points")?.max(1);
    let n_r = cfg.usize("r_points")?.max(1);
    let mut t = Table::new(cfg, &["theta", "r", "dtheta", "dr"]);
    for s in blowup::blowup_grid(n_theta, 0.0, cfg.f64("r_max")?, n_r) {
        t.row([s.theta, s.r, s.dtheta, s.dr]);
    }
    let mut e = Table::new(cfg, &["theta", "lambda_theta", "lambda_r", "hyperbolic"]);
    for q in blowup::circle_equilibria() {
        e.row([
            Cell::F(q.theta),
            Cell::F(q.eigenvalues[0]),
            Cell::F(q.eigenvalues[1]),
            Cell::from(q.hyperbolic),
        ]);
    }
    Ok(vec![
        t.write(out, "blowup_field.csv")?,
        e.write(out, "blowup_equilibria.csv")?,
    ])
}
