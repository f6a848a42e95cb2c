//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! A [`System`] may expose a switching function. Whenever its sign changes
//! inside a step, the crossing is bisected on the dense output, the step is
//! redone up to the crossing and integration restarts there, so every step
//! stays on one smooth piece of a piecewise-smooth field. Sections
//! (`y[coord] = value`) are located the same way and can stop the run.
//!
//! Integration runs backward when `t_end < t0`. Crossing directions always
//! refer to the order in which the solution is traversed.

use alloc::vec::Vec;
use core::cell::Cell;

use crate::math;
use crate::model::{dispersion_clamped, FhnParams, KarmaParams};
use crate::roots;

/// Vector field `y' = f(t, y)` on `R^N`.
pub trait System<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Function whose sign changes mark switching lines of a non-smooth field.
    fn switching(&self, _y: &[f64; N]) -> Option<f64> {
        None
    }
}

impl<F, const N: usize> System<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

/// A closure field paired with a switching function.
pub struct Switched<F, G> {
    pub field: F,
    pub switch: G,
}

impl<F, G, const N: usize> System<N> for Switched<F, G>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    G: Fn(&[f64; N]) -> f64,
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.field)(t, y)
    }

    fn switching(&self, y: &[f64; N]) -> Option<f64> {
        Some((self.switch)(y))
    }
}

/// Karma reaction ODE with the switching line `E = 1`. Counts how often the
/// gate had to be clamped at zero.
pub struct KarmaOde {
    pub params: KarmaParams,
    clamps: Cell<usize>,
}

impl KarmaOde {
    pub fn new(params: KarmaParams) -> Self {
        Self {
            params,
            clamps: Cell::new(0),
        }
    }

    pub fn clamp_count(&self) -> usize {
        self.clamps.get()
    }
}

impl System<2> for KarmaOde {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        let p = &self.params;
        let (n_m, clamped) = dispersion_clamped(y[1], p.m);
        if clamped {
            self.clamps.set(self.clamps.get() + 1);
        }
        [
            p.fast_reaction(y[0], n_m),
            p.eps * p.slow_reaction(y[0], y[1]),
        ]
    }

    fn switching(&self, y: &[f64; 2]) -> Option<f64> {
        Some(y[0] - 1.0)
    }
}

pub struct FhnOde(pub FhnParams);

impl System<2> for FhnOde {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        let p = &self.0;
        let v = y[0];
        [
            v - v * v * v / 3.0 - y[1] + p.current,
            p.eps * (v + p.a - p.b * y[1]),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            event_tol: 1e-10,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrateError<const N: usize> {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, state: [f64; N] },
    #[error("non-finite right-hand side at t = {t}")]
    NonFinite { t: f64, state: [f64; N] },
    #[error("step budget of {steps} exhausted at t = {t}")]
    TooManySteps {
        steps: usize,
        t: f64,
        state: [f64; N],
    },
    #[error("no section crossing before t = {t}")]
    NoCrossing { t: f64, state: [f64; N] },
    #[error("invalid integrator configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Either,
}

/// Hyperplane `y[coord] = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub coord: usize,
    pub value: f64,
    pub direction: Direction,
    pub terminal: bool,
}

impl Section {
    pub fn new(coord: usize, value: f64, direction: Direction) -> Self {
        Self {
            coord,
            value,
            direction,
            terminal: true,
        }
    }

    pub fn non_terminal(mut self) -> Self {
        self.terminal = false;
        self
    }

    fn crossed(&self, before: f64, after: f64) -> bool {
        let a = before - self.value;
        let b = after - self.value;
        let up = a < 0.0 && b >= 0.0;
        let down = a > 0.0 && b <= 0.0;
        match self.direction {
            Direction::Increasing => up,
            Direction::Decreasing => down,
            Direction::Either => up || down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Switching function went from negative to positive (`up = true`) or back.
    Switch { up: bool },
    /// Index into the section list.
    Section(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<const N: usize> {
    pub t: f64,
    pub kind: EventKind,
    pub state: [f64; N],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub events: Vec<Event<N>>,
    /// True when a terminal section stopped the run.
    pub terminated: bool,
}

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        let i = self.times.len() - 1;
        (self.times[i], self.states[i])
    }

    pub fn section_events(&self, index: usize) -> impl Iterator<Item = &Event<N>> {
        self.events
            .iter()
            .filter(move |e| e.kind == EventKind::Section(index))
    }
}

// Dormand-Prince 5(4) tableau with the dense-output polynomial used by scipy.
const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    -71.0 / 57600.0,
    0.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
];
const P: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

struct Step<const N: usize> {
    y_new: [f64; N],
    f_new: [f64; N],
    k: [[f64; N]; 7],
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn rk_step<S: System<N> + ?Sized, const N: usize>(
    sys: &S,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    h: f64,
) -> Step<N> {
    let mut k = [[0.0; N]; 7];
    k[0] = *f0;
    for s in 1..6 {
        let mut ys = *y;
        for (j, a) in A[s].iter().enumerate().take(s) {
            if *a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * k[j][i];
                }
            }
        }
        k[s] = sys.rhs(t + C[s] * h, &ys);
    }
    let mut y_new = *y;
    for (j, b) in B.iter().enumerate() {
        for i in 0..N {
            y_new[i] += h * b * k[j][i];
        }
    }
    let f_new = sys.rhs(t + h, &y_new);
    k[6] = f_new;
    Step { y_new, f_new, k }
}

fn error_norm<const N: usize>(step: &Step<N>, y: &[f64; N], h: f64, cfg: &IntegratorConfig) -> f64 {
    let mut acc = 0.0;
    #[allow(clippy::needless_range_loop)]
    for i in 0..N {
        let mut err = 0.0;
        for j in 0..7 {
            err += E[j] * step.k[j][i];
        }
        err *= h;
        let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(step.y_new[i].abs());
        let r = err / scale;
        acc += r * r;
    }
    math::sqrt(acc / N as f64)
}

/// Dense output on one step.
struct Dense<const N: usize> {
    t0: f64,
    h: f64,
    y0: [f64; N],
    q: [[f64; 4]; N],
}

impl<const N: usize> Dense<N> {
    fn new(t0: f64, h: f64, y0: [f64; N], k: &[[f64; N]; 7]) -> Self {
        let mut q = [[0.0; 4]; N];
        for (i, qi) in q.iter_mut().enumerate() {
            for (c, qc) in qi.iter_mut().enumerate() {
                let mut s = 0.0;
                for j in 0..7 {
                    s += k[j][i] * P[j][c];
                }
                *qc = s;
            }
        }
        Self { t0, h, y0, q }
    }

    fn at_fraction(&self, x: f64) -> [f64; N] {
        let mut y = self.y0;
        for (i, yi) in y.iter_mut().enumerate() {
            let q = &self.q[i];
            let poly = x * (q[0] + x * (q[1] + x * (q[2] + x * q[3])));
            *yi += self.h * poly;
        }
        y
    }

    fn at(&self, t: f64) -> [f64; N] {
        self.at_fraction((t - self.t0) / self.h)
    }
}

fn initial_step<S: System<N> + ?Sized, const N: usize>(
    sys: &S,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        d0 += (y0[i] / sc) * (y0[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = math::sqrt(d0 / N as f64);
    d1 = math::sqrt(d1 / N as f64);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += dir * h0 * f0[i];
    }
    let f1 = sys.rhs(t0 + dir * h0, &y1);
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        let r = (f1[i] - f0[i]) / sc;
        d2 += r * r;
    }
    d2 = math::sqrt(d2 / N as f64) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        math::powf(0.01 / d1.max(d2), 0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

/// Output control for [`solve`].
#[derive(Debug, Clone, Copy)]
pub enum Output<'a> {
    /// Every accepted step.
    Steps,
    /// Only at these times (ordered along the integration direction).
    At(&'a [f64]),
}

/// Integrates `sys` from `(t0, y0)` to `t_end`, recording every step.
pub fn integrate<S: System<N> + ?Sized, const N: usize>(
    sys: &S,
    y0: [f64; N],
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>, IntegrateError<N>> {
    solve(sys, y0, t0, t_end, cfg, &[], Output::Steps)
}

/// Integrates and samples the solution at `times` through the dense output.
pub fn integrate_to_times<S: System<N> + ?Sized, const N: usize>(
    sys: &S,
    y0: [f64; N],
    t0: f64,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>, IntegrateError<N>> {
    let t_end = match times.last() {
        Some(&t) => t,
        None => t0,
    };
    solve(sys, y0, t0, t_end, cfg, &[], Output::At(times))
}

/// State at the first directed crossing of `section` in `(t0, t_end]`.
pub fn section_crossing<S: System<N> + ?Sized, const N: usize>(
    sys: &S,
    y0: [f64; N],
    t0: f64,
    t_end: f64,
    section: Section,
    cfg: &IntegratorConfig,
) -> Result<(f64, [f64; N]), IntegrateError<N>> {
    let sec = Section {
        terminal: true,
        ..section
    };
    let traj = solve(sys, y0, t0, t_end, cfg, &[sec], Output::Steps)?;
    let first = traj.section_events(0).next().map(|e| (e.t, e.state));
    match first {
        Some(hit) => Ok(hit),
        None => {
            let (t, state) = traj.last();
            Err(IntegrateError::NoCrossing { t, state })
        }
    }
}

/// General driver: integrates from `t0` to `t_end` with the given sections
/// and output mode.
pub fn solve<S: System<N> + ?Sized, const N: usize>(
    sys: &S,
    y0: [f64; N],
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    sections: &[Section],
    output: Output<'_>,
) -> Result<Trajectory<N>, IntegrateError<N>> {
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0 && cfg.event_tol > 0.0 && cfg.max_step > 0.0) {
        return Err(IntegrateError::Config(
            "tolerances and max_step must be positive",
        ));
    }
    if !all_finite(&y0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(IntegrateError::NonFinite { t: t0, state: y0 });
    }
    for s in sections {
        if s.coord >= N {
            return Err(IntegrateError::Config("section coordinate out of range"));
        }
    }

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        events: Vec::new(),
        terminated: false,
    };
    let mut eval_idx = 0usize;
    let eval: &[f64] = match output {
        Output::Steps => {
            traj.times.push(t0);
            traj.states.push(y0);
            &[]
        }
        Output::At(ts) => ts,
    };
    // sample points at t0 itself
    while eval_idx < eval.len() && eval[eval_idx] == t0 {
        traj.times.push(t0);
        traj.states.push(y0);
        eval_idx += 1;
    }
    if t_end == t0 {
        return Ok(traj);
    }

    let dir = if t_end > t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut f = sys.rhs(t, &y);
    if !all_finite(&f) {
        return Err(IntegrateError::NonFinite { t, state: y });
    }
    let mut side = sys.switching(&y).map(|g| g > 0.0);
    let mut h_abs = initial_step(sys, t, &y, &f, dir, cfg);
    let mut steps = 0usize;

    while dir * (t_end - t) > 0.0 {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(IntegrateError::TooManySteps {
                steps: cfg.max_steps,
                t,
                state: y,
            });
        }
        let min_step = 10.0 * (libm::nextafter(t, dir * f64::INFINITY) - t).abs();
        h_abs = h_abs.min(cfg.max_step);
        if h_abs < min_step {
            return Err(IntegrateError::StepUnderflow { t, state: y });
        }
        let mut rejected = false;
        let (step, h) = loop {
            let mut h = dir * h_abs;
            if dir * (t + h - t_end) > 0.0 {
                h = t_end - t;
            }
            let step = rk_step(sys, t, &y, &f, h);
            if !all_finite(&step.y_new) || !all_finite(&step.f_new) {
                h_abs *= 0.2;
                rejected = true;
                if h_abs < min_step {
                    return Err(IntegrateError::NonFinite { t, state: y });
                }
                continue;
            }
            let err = error_norm(&step, &y, h, cfg);
            if err < 1.0 {
                let mut factor = if err == 0.0 {
                    10.0
                } else {
                    (0.9 * math::powf(err, -0.2)).min(10.0)
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                h_abs = h.abs() * factor;
                break (step, h);
            }
            h_abs = h.abs() * (0.9 * math::powf(err, -0.2)).max(0.2);
            rejected = true;
            if h_abs < min_step {
                return Err(IntegrateError::StepUnderflow { t, state: y });
            }
        };

        let mut step = step;
        let mut h = h;
        let mut dense = Dense::new(t, h, y, &step.k);

        // switching line: root-find the step length itself so the restarted
        // state lies on the line up to event_tol
        let mut switch_event = None;
        if let (Some(s), Some(g_new)) = (side, sys.switching(&step.y_new)) {
            if g_new != 0.0 && (g_new > 0.0) != s {
                let phi = |hc: f64| {
                    if hc == 0.0 {
                        return sys.switching(&y).unwrap_or(0.0);
                    }
                    let r = rk_step(sys, t, &y, &f, hc);
                    sys.switching(&r.y_new).unwrap_or(0.0)
                };
                let (lo, hi) = if h > 0.0 { (0.0, h) } else { (h, 0.0) };
                let xtol = 0.01 * cfg.event_tol;
                if let Ok(h_c) = roots::brent(phi, lo, hi, xtol, 200) {
                    if h_c != 0.0 && h_c != h {
                        let redo = rk_step(sys, t, &y, &f, h_c);
                        if all_finite(&redo.y_new) && all_finite(&redo.f_new) {
                            step = redo;
                            h = h_c;
                            dense = Dense::new(t, h, y, &step.k);
                        }
                    }
                }
                switch_event = Some(Event {
                    t: t + h,
                    kind: EventKind::Switch { up: !s },
                    state: step.y_new,
                });
                side = Some(!s);
            }
        }
        if switch_event.is_none() {
            if let Some(g_new) = sys.switching(&step.y_new) {
                if g_new != 0.0 {
                    side = Some(g_new > 0.0);
                }
            }
        }

        let t_new = t + h;

        // sections
        let mut stop: Option<(f64, [f64; N])> = None;
        let mut section_events: Vec<Event<N>> = Vec::new();
        for (si, sec) in sections.iter().enumerate() {
            let before = y[sec.coord];
            let after = step.y_new[sec.coord];
            if !sec.crossed(before, after) {
                continue;
            }
            let val = |x: f64| dense.at_fraction(x)[sec.coord] - sec.value;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let s_lo = (before - sec.value) > 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let v = val(mid);
                if v != 0.0 && (v > 0.0) == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) * h.abs() < cfg.event_tol {
                    break;
                }
            }
            let mut ys = dense.at_fraction(hi);
            ys[sec.coord] = sec.value;
            let te = t + hi * h;
            section_events.push(Event {
                t: te,
                kind: EventKind::Section(si),
                state: ys,
            });
            if sec.terminal && stop.is_none_or(|(ts, _)| dir * (te - ts) < 0.0) {
                stop = Some((te, ys));
            }
        }
        section_events.sort_by(|a, b| (dir * a.t).total_cmp(&(dir * b.t)));

        let limit = stop.map_or(t_new, |(ts, _)| ts);
        while eval_idx < eval.len() && dir * (eval[eval_idx] - limit) <= 0.0 {
            let te = eval[eval_idx];
            traj.times.push(te);
            traj.states.push(if te == t_new {
                step.y_new
            } else {
                dense.at(te)
            });
            eval_idx += 1;
        }

        if let Some((ts, ys)) = stop {
            for ev in section_events {
                if dir * (ev.t - ts) <= 0.0 {
                    traj.events.push(ev);
                }
            }
            if matches!(output, Output::Steps) {
                traj.times.push(ts);
                traj.states.push(ys);
            }
            traj.terminated = true;
            return Ok(traj);
        }

        traj.events.extend(section_events);
        if let Some(ev) = switch_event {
            traj.events.push(ev);
        }
        t = t_new;
        y = step.y_new;
        f = step.f_new;
        if matches!(output, Output::Steps) {
            traj.times.push(t);
            traj.states.push(y);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64; 1]) -> [f64; 1] {
        [-y[0]]
    }

    fn rotation(_t: f64, y: &[f64; 2]) -> [f64; 2] {
        [-y[1], y[0]]
    }

    #[test]
    fn linear_decay() {
        let cfg = IntegratorConfig::with_tol(1e-9, 1e-12);
        let tr = integrate(&decay, [1.0], 0.0, 1.0, &cfg).unwrap();
        let (t, y) = tr.last();
        assert_eq!(t, 1.0);
        assert!((y[0] - libm::exp(-1.0)).abs() < 1e-9);
    }

    #[test]
    fn backward_decay() {
        let cfg = IntegratorConfig::with_tol(1e-10, 1e-12);
        let tr = integrate(&decay, [libm::exp(-1.0)], 1.0, 0.0, &cfg).unwrap();
        let (_, y) = tr.last();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(tr.times.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn quarter_turn_section() {
        let cfg = IntegratorConfig::with_tol(1e-10, 1e-12);
        let sec = Section::new(0, 0.0, Direction::Decreasing);
        let (t, y) = section_crossing(&rotation, [1.0, 0.0], 0.0, 10.0, sec, &cfg).unwrap();
        assert!((t - core::f64::consts::FRAC_PI_2).abs() < 1e-6);
        assert!(y[0].abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn upward_crossing_of_x_axis() {
        // y = 0 crossed upward from (1, 0) only after a full turn... start slightly below
        let cfg = IntegratorConfig::with_tol(1e-10, 1e-12);
        let sec = Section::new(1, 0.0, Direction::Increasing);
        let (_, y) = section_crossing(&rotation, [1.0, -1e-3], 0.0, 10.0, sec, &cfg).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn section_behind_start_is_missed() {
        let cfg = IntegratorConfig::default();
        let sec = Section::new(0, -1.0, Direction::Increasing);
        let r = section_crossing(&decay, [1.0], 0.0, 5.0, sec, &cfg);
        assert!(matches!(r, Err(IntegrateError::NoCrossing { .. })));
    }

    #[test]
    fn sampled_output() {
        let cfg = IntegratorConfig::with_tol(1e-10, 1e-12);
        let ts = [0.0, 0.25, 0.5, 2.0];
        let tr = integrate_to_times(&decay, [1.0], 0.0, &ts, &cfg).unwrap();
        assert_eq!(tr.times, ts.to_vec());
        for (t, y) in tr.times.iter().zip(&tr.states) {
            assert!((y[0] - libm::exp(-t)).abs() < 1e-9);
        }
    }

    #[test]
    fn switch_events_are_localized() {
        let sys = KarmaOde::new(KarmaParams::default());
        let cfg = IntegratorConfig {
            event_tol: 1e-10,
            ..IntegratorConfig::with_tol(1e-8, 1e-10)
        };
        let tr = integrate(&sys, [3.0, 0.2], 0.0, 300.0, &cfg).unwrap();
        assert!(!tr.events.is_empty());
        for ev in &tr.events {
            assert!((ev.state[0] - 1.0).abs() < 1e-9, "{ev:?}");
        }
    }

    #[test]
    fn step_underflow_on_blowup() {
        let cfg = IntegratorConfig::default();
        let r = integrate(
            &|_t: f64, y: &[f64; 1]| [y[0] * y[0]],
            [1.0],
            0.0,
            2.0,
            &cfg,
        );
        assert!(matches!(
            r,
            Err(IntegrateError::StepUnderflow { .. }) | Err(IntegrateError::NonFinite { .. })
        ));
    }
}
