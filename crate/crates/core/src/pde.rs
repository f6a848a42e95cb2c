//! Method-of-lines simulation of the reaction-diffusion models on an interval
//! with zero-flux ends, plus front tracking and parameter sweeps.
//!
//! Space uses the three-point Laplacian with mirror ghost points, time the
//! classical fourth-order Runge-Kutta scheme at a fixed step.

use alloc::vec::Vec;

use crate::analysis::find_fhn_equilibria;
use crate::math;
use crate::model::{dispersion_clamped, rectifier, FhnParams, KarmaParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdeError {
    #[error("grid needs at least 16 points and a positive length")]
    Grid,
    #[error("bump [{lo}, {hi}] does not fit in [0, {length}]")]
    Geometry { lo: f64, hi: f64, length: f64 },
    #[error("time step {dt} exceeds the explicit diffusion bound {bound}")]
    TimeStep { dt: f64, bound: f64 },
    #[error("non-finite values at t = {time}")]
    BlowUp { time: f64 },
    #[error("snapshot times must be sorted and within [0, t_end]")]
    Snapshots,
    #[error("need at least 3 snapshots, got {0}")]
    TooFewSnapshots(usize),
    #[error("wave lost: {0}")]
    WaveLost(LossReason),
    #[error("invalid parameters: {0}")]
    Params(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReason {
    /// Snapshot with this index has no level crossing.
    NoCrossing { snapshot: usize },
    /// The final snapshot holds this many separate excited intervals.
    Fragmented { intervals: usize },
}

impl core::fmt::Display for LossReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LossReason::NoCrossing { snapshot } => write!(f, "no front in snapshot {snapshot}"),
            LossReason::Fragmented { intervals } => {
                write!(f, "{intervals} excited intervals in the final snapshot")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub length: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub fn new(length: f64, n_points: usize) -> Result<Self, PdeError> {
        if n_points < 16 || !(length > 0.0) || !length.is_finite() {
            return Err(PdeError::Grid);
        }
        Ok(Self { length, n_points })
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.dx() * i as f64
    }
}

impl Default for Grid1D {
    fn default() -> Self {
        Self {
            length: 400.0,
            n_points: 2001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeModel {
    Karma(KarmaParams),
    Fhn(FhnParams),
}

impl PdeModel {
    pub fn diff(&self) -> f64 {
        match self {
            PdeModel::Karma(p) => p.diff,
            PdeModel::Fhn(p) => p.diff,
        }
    }

    /// Spatially uniform rest state.
    pub fn rest_state(&self) -> (f64, f64) {
        match self {
            PdeModel::Karma(p) if p.current == 0.0 => (0.0, 0.0),
            PdeModel::Karma(p) => {
                // lowest equilibrium on the n = 0 piece, else the unique one
                crate::analysis::find_karma_equilibria(p)
                    .ok()
                    .and_then(|eq| eq.first().map(|q| (q.position.fast, q.position.slow)))
                    .unwrap_or((0.0, 0.0))
            }
            PdeModel::Fhn(p) => find_fhn_equilibria(p)
                .first()
                .map(|q| (q.position.fast, q.position.slow))
                .unwrap_or((0.0, 0.0)),
        }
    }

    /// Default level used to locate fronts: `E = 1` for Karma, `v = 0` for
    /// FitzHugh-Nagumo.
    pub fn default_level(&self) -> f64 {
        match self {
            PdeModel::Karma(_) => 1.0,
            PdeModel::Fhn(_) => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        match self {
            PdeModel::Karma(p) => p.validate(),
            PdeModel::Fhn(p) => p.validate(),
        }
        .map_err(|_| PdeError::Params("model parameters out of range"))
    }

    #[inline]
    fn reaction(&self, u: f64, v: f64) -> (f64, f64) {
        match self {
            PdeModel::Karma(p) => {
                let (n_m, _) = dispersion_clamped(v, p.m);
                (
                    p.fast_reaction(u, n_m),
                    p.eps * (rectifier(u - 1.0) / p.n_b - v),
                )
            }
            PdeModel::Fhn(p) => (
                u - u * u * u / 3.0 - v + p.current,
                p.eps * (u + p.a - p.b * v),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    pub grid: Grid1D,
    pub fast: Vec<f64>,
    pub slow: Vec<f64>,
    pub time: f64,
}

impl Field1D {
    pub fn zeros(grid: Grid1D) -> Self {
        Self::uniform(grid, 0.0, 0.0)
    }

    pub fn uniform(grid: Grid1D, fast: f64, slow: f64) -> Self {
        Self {
            grid,
            fast: alloc::vec![fast; grid.n_points],
            slow: alloc::vec![slow; grid.n_points],
            time: 0.0,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.x(i)
    }

    pub fn is_finite(&self) -> bool {
        self.fast.iter().chain(&self.slow).all(|v| v.is_finite())
    }

    /// Trapezoidal integral of the fast component.
    pub fn fast_mass(&self) -> f64 {
        let n = self.fast.len();
        let inner: f64 = self.fast[1..n - 1].iter().sum();
        self.grid.dx() * (inner + 0.5 * (self.fast[0] + self.fast[n - 1]))
    }
}

/// Cosine-squared bump of half-width `width` centred at `center` on a zero
/// field: `height cos^2(pi (x - center) / (2 width))` on `[center - width,
/// center + width]`.
pub fn init_bump(grid: Grid1D, center: f64, width: f64, height: f64) -> Result<Field1D, PdeError> {
    let mut f = Field1D::zeros(grid);
    add_bump(&mut f, center, width, height)?;
    Ok(f)
}

/// Bump added on top of the rest state of `model`.
pub fn init_bump_on_rest(
    grid: Grid1D,
    model: &PdeModel,
    center: f64,
    width: f64,
    height: f64,
) -> Result<Field1D, PdeError> {
    let (u0, v0) = model.rest_state();
    let mut f = Field1D::uniform(grid, u0, v0);
    add_bump(&mut f, center, width, height)?;
    Ok(f)
}

fn add_bump(f: &mut Field1D, center: f64, width: f64, height: f64) -> Result<(), PdeError> {
    let (lo, hi) = (center - width, center + width);
    if !(width > 0.0) || lo < 0.0 || hi > f.grid.length {
        return Err(PdeError::Geometry {
            lo,
            hi,
            length: f.grid.length,
        });
    }
    for i in 0..f.grid.n_points {
        let x = f.grid.x(i);
        if (x - center).abs() <= width {
            let c = math::cos(core::f64::consts::PI * (x - center) / (2.0 * width));
            f.fast[i] += height * c * c;
        }
    }
    Ok(())
}

/// Largest stable step for the explicit scheme, capped at 0.01.
pub fn default_dt(grid: &Grid1D, diff: f64) -> f64 {
    let dx = grid.dx();
    if diff > 0.0 {
        (0.9 * dx * dx / (2.0 * diff)).min(0.01)
    } else {
        0.01
    }
}

/// RK4 stepper with preallocated stage buffers.
pub struct Stepper {
    model: PdeModel,
    dt: f64,
    n: usize,
    inv_dx2: f64,
    k: [Vec<f64>; 8],
    tmp_u: Vec<f64>,
    tmp_v: Vec<f64>,
}

impl Stepper {
    pub fn new(model: PdeModel, grid: &Grid1D, dt: f64) -> Result<Self, PdeError> {
        model.validate()?;
        let d = model.diff();
        let dx = grid.dx();
        let bound = if d > 0.0 {
            0.9 * dx * dx / (2.0 * d)
        } else {
            f64::INFINITY
        };
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(PdeError::TimeStep { dt, bound });
        }
        let n = grid.n_points;
        let z = || alloc::vec![0.0; n];
        Ok(Self {
            model,
            dt,
            n,
            inv_dx2: 1.0 / (dx * dx),
            k: [z(), z(), z(), z(), z(), z(), z(), z()],
            tmp_u: z(),
            tmp_v: z(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn eval(model: &PdeModel, inv_dx2: f64, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let n = u.len();
        let d = model.diff() * inv_dx2;
        for i in 0..n {
            let left = if i == 0 { u[1] } else { u[i - 1] };
            let right = if i == n - 1 { u[n - 2] } else { u[i + 1] };
            // summing the neighbours first keeps mirror-symmetric data symmetric
            let lap = (right + left) - 2.0 * u[i];
            let (ru, rv) = model.reaction(u[i], v[i]);
            du[i] = d * lap + ru;
            dv[i] = rv;
        }
    }

    /// Advances `f` by one step in place.
    pub fn step(&mut self, f: &mut Field1D) -> Result<(), PdeError> {
        let n = self.n;
        let dt = self.dt;
        let [k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v] = &mut self.k;
        Self::eval(&self.model, self.inv_dx2, &f.fast, &f.slow, k1u, k1v);
        for i in 0..n {
            self.tmp_u[i] = f.fast[i] + 0.5 * dt * k1u[i];
            self.tmp_v[i] = f.slow[i] + 0.5 * dt * k1v[i];
        }
        Self::eval(
            &self.model,
            self.inv_dx2,
            &self.tmp_u,
            &self.tmp_v,
            k2u,
            k2v,
        );
        for i in 0..n {
            self.tmp_u[i] = f.fast[i] + 0.5 * dt * k2u[i];
            self.tmp_v[i] = f.slow[i] + 0.5 * dt * k2v[i];
        }
        Self::eval(
            &self.model,
            self.inv_dx2,
            &self.tmp_u,
            &self.tmp_v,
            k3u,
            k3v,
        );
        for i in 0..n {
            self.tmp_u[i] = f.fast[i] + dt * k3u[i];
            self.tmp_v[i] = f.slow[i] + dt * k3v[i];
        }
        Self::eval(
            &self.model,
            self.inv_dx2,
            &self.tmp_u,
            &self.tmp_v,
            k4u,
            k4v,
        );
        let mut finite = true;
        for i in 0..n {
            f.fast[i] += dt / 6.0 * (k1u[i] + 2.0 * (k2u[i] + k3u[i]) + k4u[i]);
            f.slow[i] += dt / 6.0 * (k1v[i] + 2.0 * (k2v[i] + k3v[i]) + k4v[i]);
            finite &= f.fast[i].is_finite() && f.slow[i].is_finite();
        }
        f.time += dt;
        if !finite {
            return Err(PdeError::BlowUp { time: f.time });
        }
        Ok(())
    }
}

/// One RK4 step of size `dt`.
pub fn step_pde(f: &Field1D, model: &PdeModel, dt: f64) -> Result<Field1D, PdeError> {
    let mut s = Stepper::new(*model, &f.grid, dt)?;
    let mut out = f.clone();
    s.step(&mut out)?;
    Ok(out)
}

/// Discrete Laplacian with mirror ends, as used by the stepper.
pub fn laplacian(u: &[f64], dx: f64) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { u[1] } else { u[i - 1] };
            let right = if i == n - 1 { u[n - 2] } else { u[i + 1] };
            ((right + left) - 2.0 * u[i]) / (dx * dx)
        })
        .collect()
}

/// Runs to `t_end` with step `dt` (default [`default_dt`]) and returns the
/// fields at the steps nearest to `snapshot_times`. With no snapshot times the
/// final field is returned.
pub fn run_simulation(
    f0: &Field1D,
    model: &PdeModel,
    t_end: f64,
    snapshot_times: &[f64],
    dt: Option<f64>,
) -> Result<Vec<Field1D>, PdeError> {
    if snapshot_times.windows(2).any(|w| w[1] < w[0])
        || snapshot_times
            .iter()
            .any(|&t| t < f0.time - 1e-12 || t > t_end + 1e-12)
        || !(t_end >= f0.time)
    {
        return Err(PdeError::Snapshots);
    }
    let dt = dt.unwrap_or_else(|| default_dt(&f0.grid, model.diff()));
    let mut stepper = Stepper::new(*model, &f0.grid, dt)?;
    let t0 = f0.time;
    let total = math::floor((t_end - t0) / dt + 0.5) as usize;
    let targets: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| math::floor((t - t0) / dt + 0.5) as usize)
        .collect();
    let mut out = Vec::with_capacity(targets.len().max(1));
    let mut f = f0.clone();
    let mut next = 0;
    let emit = |k: usize, f: &Field1D, out: &mut Vec<Field1D>, next: &mut usize| {
        while *next < targets.len() && targets[*next] == k {
            let mut s = f.clone();
            s.time = t0 + k as f64 * dt;
            out.push(s);
            *next += 1;
        }
    };
    emit(0, &f, &mut out, &mut next);
    for k in 1..=total {
        stepper.step(&mut f)?;
        emit(k, &f, &mut out, &mut next);
    }
    if targets.is_empty() {
        f.time = t0 + total as f64 * dt;
        out.push(f);
    }
    Ok(out)
}

/// Rightmost crossing of `level` by the fast component, linearly interpolated.
pub fn front_position(f: &Field1D, level: f64) -> Option<f64> {
    let u = &f.fast;
    (0..u.len() - 1).rev().find_map(|i| {
        let (a, b) = (u[i] - level, u[i + 1] - level);
        if a >= 0.0 && b < 0.0 {
            Some(f.x(i) + f.grid.dx() * a / (a - b))
        } else {
            None
        }
    })
}

/// Number of maximal runs of grid points with `fast > level`.
pub fn excited_intervals(f: &Field1D, level: f64) -> usize {
    let mut count = 0;
    let mut inside = false;
    for &u in &f.fast {
        let above = u > level;
        if above && !inside {
            count += 1;
        }
        inside = above;
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveMeasurement {
    pub speed: f64,
    pub speed_stderr: f64,
    /// Distance between the front and the trailing level crossing.
    pub pulse_width: f64,
    pub amplitude: f64,
    /// Median of the fast component at least 20 units ahead of the front.
    pub baseline: f64,
    /// Minimum of the fast component minus the baseline.
    pub hyperpolarization_depth: f64,
    pub front: f64,
}

/// Speed and shape of a right-moving pulse from a series of snapshots.
///
/// The wave counts as lost when a snapshot has no crossing of `level` or the
/// final snapshot holds more than one excited interval.
pub fn measure_wave(snapshots: &[Field1D], level: f64) -> Result<WaveMeasurement, PdeError> {
    if snapshots.len() < 3 {
        return Err(PdeError::TooFewSnapshots(snapshots.len()));
    }
    let mut ts = Vec::with_capacity(snapshots.len());
    let mut xs = Vec::with_capacity(snapshots.len());
    for (k, s) in snapshots.iter().enumerate() {
        let x = front_position(s, level)
            .ok_or(PdeError::WaveLost(LossReason::NoCrossing { snapshot: k }))?;
        ts.push(s.time);
        xs.push(x);
    }
    let last = &snapshots[snapshots.len() - 1];
    let intervals = excited_intervals(last, level);
    if intervals > 1 {
        return Err(PdeError::WaveLost(LossReason::Fragmented { intervals }));
    }
    let (speed, _, speed_stderr) = math::linear_fit(&ts, &xs);
    let front = xs[xs.len() - 1];
    let u = &last.fast;
    let dx = last.grid.dx();
    let i_front = math::floor(front / dx) as usize;
    // trailing crossing: walk left through the excited region
    let mut j = i_front.min(u.len() - 1);
    while j > 0 && u[j] >= level {
        j -= 1;
    }
    let pulse_width = if u[j] < level && j + 1 < u.len() && u[j + 1] >= level {
        let (a, b) = (u[j] - level, u[j + 1] - level);
        let x_back = last.x(j) + dx * a / (a - b);
        front - x_back
    } else {
        front
    };
    let amplitude = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ahead: Vec<f64> = (0..u.len())
        .filter(|&i| last.x(i) > front + 20.0)
        .map(|i| u[i])
        .collect();
    let baseline = if ahead.len() >= 10 {
        math::median(&ahead).unwrap_or(0.0)
    } else {
        math::median(&u[u.len() - 10..]).unwrap_or(0.0)
    };
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(WaveMeasurement {
        speed,
        speed_stderr,
        pulse_width,
        amplitude,
        baseline,
        hyperpolarization_depth: min - baseline,
        front,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedProfile {
    pub x: Vec<f64>,
    pub fast: Vec<f64>,
    pub slow: Vec<f64>,
    pub shift: f64,
}

/// Shifts each profile so its front sits at `x = 0`. Profiles without a
/// front come back as `None`.
pub fn profile_align(fields: &[Field1D], level: f64) -> Vec<Option<AlignedProfile>> {
    fields
        .iter()
        .map(|f| {
            let x0 = front_position(f, level)?;
            Some(AlignedProfile {
                x: (0..f.grid.n_points).map(|i| f.x(i) - x0).collect(),
                fast: f.fast.clone(),
                slow: f.slow.clone(),
                shift: x0,
            })
        })
        .collect()
}

/// Pointwise `(fast, slow)` pairs ordered by `x`.
pub fn project_phase(f: &Field1D) -> Vec<crate::PhaseState> {
    f.fast
        .iter()
        .zip(&f.slow)
        .map(|(&u, &v)| crate::PhaseState::new(u, v))
        .collect()
}

/// Index range of the pulse back: from where the fast component has relaxed
/// to within 5% of its trailing minimum up to the pulse maximum.
fn back_range(f: &Field1D, level: f64) -> Option<(usize, usize)> {
    let x_front = front_position(f, level)?;
    let u = &f.fast;
    let i_front = (math::floor(x_front / f.grid.dx()) as usize).min(u.len() - 2);
    let mut i_back = i_front;
    while i_back > 0 && u[i_back] >= level {
        i_back -= 1;
    }
    let rest = u[..i_back + 1]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let (i_peak, peak) =
        u[i_back..=i_front]
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
    let i_peak = i_back + i_peak;
    let mut i_low = i_back;
    while i_low > 0 && u[i_low] > rest + 0.05 * (peak - rest) {
        i_low -= 1;
    }
    Some((i_low.max(1), i_peak))
}

/// Point on the pulse back nearest to `target` in the `(fast, slow)` plane,
/// with its distance.
pub fn back_point_nearest(
    f: &Field1D,
    level: f64,
    target: crate::PhaseState,
) -> Option<(crate::PhaseState, f64)> {
    let (lo, hi) = back_range(f, level)?;
    (lo..=hi)
        .map(|i| {
            let q = crate::PhaseState::new(f.fast[i], f.slow[i]);
            (q, q.dist(&target))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Largest `|du/dx|` on the pulse back.
pub fn back_sharpness(f: &Field1D, level: f64) -> Option<f64> {
    let (lo, hi) = back_range(f, level)?;
    let u = &f.fast;
    let dx = f.grid.dx();
    Some(
        (lo..hi)
            .map(|k| (u[k + 1] - u[k - 1]).abs() / (2.0 * dx))
            .fold(0.0, f64::max),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardProtocol {
    pub grid: Grid1D,
    pub center: f64,
    pub width: f64,
    pub height: f64,
    pub t_end: f64,
    /// Times used for speed measurement.
    pub snapshot_times: Vec<f64>,
    pub dt: Option<f64>,
}

impl Default for StandardProtocol {
    fn default() -> Self {
        Self {
            grid: Grid1D::default(),
            center: 50.0,
            width: 10.0,
            height: 3.0,
            t_end: 120.0,
            snapshot_times: (0..8).map(|k| 50.0 + 10.0 * k as f64).collect(),
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub snapshots: Vec<Field1D>,
    pub measurement: Result<WaveMeasurement, PdeError>,
}

impl StandardProtocol {
    /// Bump on the rest state of `model`, run, measure at the model's level.
    pub fn run(&self, model: &PdeModel) -> Result<ProtocolRun, PdeError> {
        let f0 = init_bump_on_rest(self.grid, model, self.center, self.width, self.height)?;
        let snapshots = run_simulation(&f0, model, self.t_end, &self.snapshot_times, self.dt)?;
        let measurement = measure_wave(&snapshots, model.default_level());
        Ok(ProtocolRun {
            snapshots,
            measurement,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Eps,
    Diff,
    M,
    NB,
    Current,
    A,
    B,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Eps => "eps",
            SweepParam::Diff => "D",
            SweepParam::M => "M",
            SweepParam::NB => "n_B",
            SweepParam::Current => "I",
            SweepParam::A => "a",
            SweepParam::B => "b",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "eps" => SweepParam::Eps,
            "D" => SweepParam::Diff,
            "M" => SweepParam::M,
            "n_B" => SweepParam::NB,
            "I" => SweepParam::Current,
            "a" => SweepParam::A,
            "b" => SweepParam::B,
            _ => return None,
        })
    }

    /// Copy of `model` with this parameter set to `value`.
    pub fn apply(self, model: &PdeModel, value: f64) -> Result<PdeModel, PdeError> {
        let mut m = *model;
        match (&mut m, self) {
            (PdeModel::Karma(p), SweepParam::Eps) => p.eps = value,
            (PdeModel::Karma(p), SweepParam::Diff) => p.diff = value,
            (PdeModel::Karma(p), SweepParam::M) => {
                if !(value >= 1.0) || math::floor(value) != value {
                    return Err(PdeError::Params("M must be a positive integer"));
                }
                p.m = value as u32
            }
            (PdeModel::Karma(p), SweepParam::NB) => p.n_b = value,
            (PdeModel::Karma(p), SweepParam::Current) => p.current = value,
            (PdeModel::Fhn(p), SweepParam::Eps) => p.eps = value,
            (PdeModel::Fhn(p), SweepParam::Diff) => p.diff = value,
            (PdeModel::Fhn(p), SweepParam::Current) => p.current = value,
            (PdeModel::Fhn(p), SweepParam::A) => p.a = value,
            (PdeModel::Fhn(p), SweepParam::B) => p.b = value,
            _ => return Err(PdeError::Params("parameter does not apply to this model")),
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    WaveLost,
    BlowUp,
    Error,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::WaveLost => "wave-lost",
            RowStatus::BlowUp => "blow-up",
            RowStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub status: RowStatus,
    pub measurement: Option<WaveMeasurement>,
    /// Last snapshot of the run, when the run finished.
    pub final_field: Option<Field1D>,
}

/// Runs the protocol for one parameter value; failures become row statuses.
pub fn sweep_row(
    model: &PdeModel,
    param: SweepParam,
    value: f64,
    protocol: &StandardProtocol,
) -> SweepRow {
    let m = match param.apply(model, value) {
        Ok(m) => m,
        Err(_) => {
            return SweepRow {
                value,
                status: RowStatus::Error,
                measurement: None,
                final_field: None,
            }
        }
    };
    match protocol.run(&m) {
        Ok(run) => {
            let final_field = run.snapshots.last().cloned();
            match run.measurement {
                Ok(w) => SweepRow {
                    value,
                    status: RowStatus::Ok,
                    measurement: Some(w),
                    final_field,
                },
                Err(_) => SweepRow {
                    value,
                    status: RowStatus::WaveLost,
                    measurement: None,
                    final_field,
                },
            }
        }
        Err(PdeError::BlowUp { .. }) => SweepRow {
            value,
            status: RowStatus::BlowUp,
            measurement: None,
            final_field: None,
        },
        Err(_) => SweepRow {
            value,
            status: RowStatus::Error,
            measurement: None,
            final_field: None,
        },
    }
}

/// Sequential sweep; rows follow the order of `values`.
pub fn sweep(
    model: &PdeModel,
    param: SweepParam,
    values: &[f64],
    protocol: &StandardProtocol,
) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&v| sweep_row(model, param, v, protocol))
        .collect()
}
