//! Travelling pulses of the Karma model in the co-moving frame `z = x + ct`.
//!
//! With `w = E_z` the profile equations are
//!
//! ```text
//! E_z   = w
//! D w_z = c w + E - (E* - n^M) h(E) - I
//! c n_z = eps (max(E - 1, 0)/n_B - n)
//! ```
//!
//! Freezing `n` gives a planar fast subsystem with equilibria `p0 = (0, 0)`,
//! `p1` and `p2` on the `E` axis. Fronts (`p0 -> p2`) and backs (`p2 -> p0`)
//! are found by shooting the one-dimensional invariant manifolds of the two
//! saddles to the section `E = E2/2` and zeroing the gap in `w`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::analysis::eigenvector_2x2;
use crate::integrate::{self, Direction, IntegrateError, IntegratorConfig, Output, Section};
use crate::math;
use crate::model::{dispersion, rectifier, KarmaParams, Reaction};
use crate::roots;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveError {
    #[error("the gate equation is undefined for c = 0")]
    ZeroSpeed,
    #[error("diffusion coefficient must be positive")]
    ZeroDiffusion,
    #[error("equilibrium p2 does not exist at n^M = {n_m}")]
    NoSaddle { n_m: f64 },
    #[error("shot missed the section ({reason}) at z = {z}, state ({e}, {w})")]
    ShootMissed {
        reason: MissReason,
        z: f64,
        e: f64,
        w: f64,
    },
    #[error("shooting offset {0} outside [1e-8, 1e-4]")]
    Offset(f64),
    #[error("no sign change of the gap on [{lo}, {hi}] (gap {g_lo}, {g_hi})")]
    RootNotBracketed {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
    #[error("root rejected: |gap| = {residual} at c = {c}")]
    Residual { c: f64, residual: f64 },
    #[error("connection not certified at c = {c}: {reason}")]
    CertificationFailed { c: f64, reason: &'static str },
    #[error("pulse assembly infeasible: front speed {c_front} below minimal back speed {c_min}")]
    Infeasible { c_front: f64, c_min: f64 },
    #[error("integration failed at z = {z}")]
    Integration { z: f64 },
    #[error("operation requires the cubic reaction")]
    NeedsCubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissReason {
    /// `w` changed sign before the section: the manifold turns back.
    TurnedBack,
    /// The z budget ran out.
    Budget,
    /// The orbit blew up.
    Diverged,
}

impl core::fmt::Display for MissReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            MissReason::TurnedBack => "turned back",
            MissReason::Budget => "z budget exhausted",
            MissReason::Diverged => "diverged",
        })
    }
}

impl From<IntegrateError<2>> for WaveError {
    fn from(e: IntegrateError<2>) -> Self {
        match e {
            IntegrateError::StepUnderflow { t, .. }
            | IntegrateError::NonFinite { t, .. }
            | IntegrateError::TooManySteps { t, .. }
            | IntegrateError::NoCrossing { t, .. } => WaveError::Integration { z: t },
            IntegrateError::Config(_) => WaveError::Integration { z: f64::NAN },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComovingState {
    pub e: f64,
    pub w: f64,
    pub n: f64,
}

impl ComovingState {
    pub const fn new(e: f64, w: f64, n: f64) -> Self {
        Self { e, w, n }
    }
}

/// `D w_z` without the `c w` term: `E - (E* - n^M) h(E) - I`.
#[inline]
fn restoring(e: f64, n_m: f64, p: &KarmaParams) -> f64 {
    -p.fast_reaction(e, n_m)
}

/// Full co-moving field.
pub fn comoving_rhs(s: ComovingState, c: f64, p: &KarmaParams) -> Result<ComovingState, WaveError> {
    if c == 0.0 {
        return Err(WaveError::ZeroSpeed);
    }
    if !(p.diff > 0.0) {
        return Err(WaveError::ZeroDiffusion);
    }
    let n_m = dispersion(s.n.max(0.0), p.m);
    Ok(ComovingState {
        e: s.w,
        w: (c * s.w + restoring(s.e, n_m, p)) / p.diff,
        n: p.eps * (rectifier(s.e - 1.0) / p.n_b - s.n) / c,
    })
}

/// Fast subsystem with `n^M` frozen; valid for any `c`, including zero.
#[inline]
pub fn frozen_rhs(e: f64, w: f64, n_m: f64, c: f64, p: &KarmaParams) -> [f64; 2] {
    [w, (c * w + restoring(e, n_m, p)) / p.diff]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastTwEquilibria {
    pub p0: f64,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    /// `E* - n^M - 2 delta`; `p1` and `p2` exist iff this is non-negative.
    pub condition: f64,
}

/// Equilibria `(E, 0)` of the frozen fast subsystem at gate value `n`.
pub fn fast_tw_equilibria(n: f64, p: &KarmaParams) -> FastTwEquilibria {
    fast_tw_equilibria_nm(dispersion(n.max(0.0), p.m), p)
}

/// As [`fast_tw_equilibria`] with `n^M` given directly.
pub fn fast_tw_equilibria_nm(n_m: f64, p: &KarmaParams) -> FastTwEquilibria {
    let k = p.e_star - n_m;
    let condition = k - 2.0 * p.delta;
    if p.reaction == Reaction::Cubic && p.current == 0.0 {
        if condition < -1e-14 || k <= 0.0 {
            return FastTwEquilibria {
                p0: 0.0,
                p1: None,
                p2: None,
                condition,
            };
        }
        let r = math::sqrt((1.0 - 2.0 * p.delta / k).max(0.0));
        let (e1, e2) = ((1.0 - r) / (2.0 * p.delta), (1.0 + r) / (2.0 * p.delta));
        return FastTwEquilibria {
            p0: 0.0,
            p1: Some(e1),
            p2: Some(e2),
            condition,
        };
    }
    let rs: Vec<f64> = match p.reaction {
        Reaction::Cubic => roots::real_cubic_roots(-2.0 * k * p.delta, 2.0 * k, -1.0, p.current),
        Reaction::Tanh93 => roots::scan_roots(|e| p.fast_reaction(e, n_m), -2.0, 12.0, 6000, 1e-14),
    };
    match rs.len() {
        0 => FastTwEquilibria {
            p0: f64::NAN,
            p1: None,
            p2: None,
            condition,
        },
        1 | 2 => FastTwEquilibria {
            p0: rs[0],
            p1: None,
            p2: None,
            condition,
        },
        _ => FastTwEquilibria {
            p0: rs[0],
            p1: Some(rs[1]),
            p2: Some(rs[2]),
            condition,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwClass {
    Saddle,
    UnstableNode,
    UnstableSpiral,
    StableNode,
    StableSpiral,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwEigen {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    /// `(1, lambda)` for each eigenvalue.
    pub v_plus: [Complex64; 2],
    pub v_minus: [Complex64; 2],
    pub class: TwClass,
}

/// Linearization of the frozen fast subsystem at `(E, 0)`:
/// `lambda = c/2D +- sqrt(c^2/4D^2 - J/D)` with `J` the layer Jacobian.
pub fn tw_eigen(e: f64, n: f64, c: f64, p: &KarmaParams) -> TwEigen {
    tw_eigen_nm(e, dispersion(n.max(0.0), p.m), c, p)
}

pub fn tw_eigen_nm(e: f64, n_m: f64, c: f64, p: &KarmaParams) -> TwEigen {
    let d = p.diff;
    let j = -1.0 + (p.e_star - n_m) * p.dh(e);
    let mid = c / (2.0 * d);
    let rad = mid * mid - j / d;
    let (lp, lm) = if rad >= 0.0 {
        let s = math::sqrt(rad);
        (Complex64::new(mid + s, 0.0), Complex64::new(mid - s, 0.0))
    } else {
        let s = math::sqrt(-rad);
        (Complex64::new(mid, s), Complex64::new(mid, -s))
    };
    let one = Complex64::new(1.0, 0.0);
    let class = if rad > 0.0 {
        if lp.re > 0.0 && lm.re < 0.0 {
            TwClass::Saddle
        } else if lm.re > 0.0 {
            TwClass::UnstableNode
        } else if lp.re < 0.0 {
            TwClass::StableNode
        } else {
            TwClass::Degenerate
        }
    } else if rad < 0.0 && c > 0.0 {
        TwClass::UnstableSpiral
    } else if rad < 0.0 && c < 0.0 {
        TwClass::StableSpiral
    } else {
        TwClass::Degenerate
    };
    TwEigen {
        lambda_plus: lp,
        lambda_minus: lm,
        v_plus: [one, lp],
        v_minus: [one, lm],
        class,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwPoint {
    P0,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    Unstable,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    /// Distance from the equilibrium along the unit eigenvector.
    pub offset: f64,
    pub z_budget: f64,
    pub cfg: IntegratorConfig,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            offset: 1e-6,
            z_budget: 200.0,
            cfg: IntegratorConfig {
                event_tol: 1e-12,
                ..IntegratorConfig::with_tol(1e-11, 1e-13)
            },
        }
    }
}

/// Start of a manifold shot: the equilibrium `E`, the starting point and the
/// direction of traversal (`+1` forward in z).
fn shot_start(
    at: TwPoint,
    which: Manifold,
    n_m: f64,
    c: f64,
    p: &KarmaParams,
    offset: f64,
) -> Result<(f64, [f64; 2], f64, f64), WaveError> {
    let eq = fast_tw_equilibria_nm(n_m, p);
    let e2 = eq.p2.ok_or(WaveError::NoSaddle { n_m })?;
    let e_eq = match at {
        TwPoint::P0 => eq.p0,
        TwPoint::P2 => e2,
    };
    let eig = tw_eigen_nm(e_eq, n_m, c, p);
    let lam = match which {
        Manifold::Unstable => eig.lambda_plus.re,
        Manifold::Stable => eig.lambda_minus.re,
    };
    let jmat = [
        [0.0, 1.0],
        [(1.0 - (p.e_star - n_m) * p.dh(e_eq)) / p.diff, c / p.diff],
    ];
    let mut v = eigenvector_2x2(&jmat, lam);
    let norm = math::hypot(v[0], v[1]);
    v = [v[0] / norm, v[1] / norm];
    // orient toward the interior of (p0, p2)
    let inward = match at {
        TwPoint::P0 => 1.0,
        TwPoint::P2 => -1.0,
    };
    if v[0] * inward < 0.0 || (v[0] == 0.0 && v[1] * inward < 0.0) {
        v = [-v[0], -v[1]];
    }
    let y0 = [e_eq + offset * v[0], offset * v[1]];
    let dir = match which {
        Manifold::Unstable => 1.0,
        Manifold::Stable => -1.0,
    };
    Ok((e_eq, y0, dir, e2))
}

/// Trajectory of a manifold shot up to the section `E = E2/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub z: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub hit: Option<[f64; 2]>,
    pub miss: Option<MissReason>,
}

/// Integrates one invariant manifold of `at` (frozen `n^M`) to the section
/// `E = E2/2`. Stable manifolds are integrated backward in z. The shot
/// starts `offset` away from the equilibrium along the eigenvector pointing
/// into `0 < E < E2`.
pub fn shoot(
    at: TwPoint,
    which: Manifold,
    n_m: f64,
    c: f64,
    p: &KarmaParams,
    opts: &ShootOptions,
    outward: bool,
) -> Result<Shot, WaveError> {
    if !(opts.offset >= 1e-8 && opts.offset <= 1e-4) {
        return Err(WaveError::Offset(opts.offset));
    }
    if !(p.diff > 0.0) {
        return Err(WaveError::ZeroDiffusion);
    }
    let (e_eq, mut y0, dir, e2) = shot_start(at, which, n_m, c, p, opts.offset)?;
    if outward {
        y0 = [2.0 * e_eq - y0[0], -y0[1]];
    }
    let sigma = e2 / 2.0;
    let toward = match at {
        TwPoint::P0 => Direction::Increasing,
        TwPoint::P2 => Direction::Decreasing,
    };
    let sections = [
        Section::new(0, sigma, toward),
        Section::new(1, 0.0, Direction::Either),
        // far outside the strip the orbit is gone
        Section::new(0, -e2, Direction::Decreasing),
        Section::new(0, 2.0 * e2, Direction::Increasing),
    ];
    let field = |_z: f64, y: &[f64; 2]| frozen_rhs(y[0], y[1], n_m, c, p);
    let res = integrate::solve(
        &field,
        y0,
        0.0,
        dir * opts.z_budget,
        &opts.cfg,
        &sections,
        Output::Steps,
    );
    let tr = match res {
        Ok(tr) => tr,
        Err(
            IntegrateError::StepUnderflow { t, state } | IntegrateError::NonFinite { t, state },
        ) => {
            return Ok(Shot {
                z: alloc::vec![t],
                states: alloc::vec![state],
                hit: None,
                miss: Some(MissReason::Diverged),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let first = tr
        .events
        .iter()
        .find(|e| matches!(e.kind, integrate::EventKind::Section(_)));
    let (hit, miss) = match first.map(|e| e.kind) {
        Some(integrate::EventKind::Section(0)) => (tr.states.last().copied(), None),
        Some(integrate::EventKind::Section(1)) => (None, Some(MissReason::TurnedBack)),
        Some(_) => (None, Some(MissReason::Diverged)),
        None => (None, Some(MissReason::Budget)),
    };
    Ok(Shot {
        z: tr.times,
        states: tr.states,
        hit,
        miss,
    })
}

/// State on `Sigma: E = E2/2` reached by the chosen manifold.
pub fn shoot_manifold(
    at: TwPoint,
    which: Manifold,
    n: f64,
    c: f64,
    p: &KarmaParams,
    opts: &ShootOptions,
) -> Result<ComovingState, WaveError> {
    shoot_manifold_impl(at, which, n, c, p, opts, false)
}

/// As [`shoot_manifold`] but starting on the outward side of the equilibrium.
pub fn shoot_manifold_outward(
    at: TwPoint,
    which: Manifold,
    n: f64,
    c: f64,
    p: &KarmaParams,
    opts: &ShootOptions,
) -> Result<ComovingState, WaveError> {
    shoot_manifold_impl(at, which, n, c, p, opts, true)
}

fn shoot_manifold_impl(
    at: TwPoint,
    which: Manifold,
    n: f64,
    c: f64,
    p: &KarmaParams,
    opts: &ShootOptions,
    outward: bool,
) -> Result<ComovingState, WaveError> {
    let shot = shoot(at, which, dispersion(n.max(0.0), p.m), c, p, opts, outward)?;
    match shot.hit {
        Some(y) => Ok(ComovingState::new(y[0], y[1], n)),
        None => {
            let i = shot.states.len() - 1;
            Err(WaveError::ShootMissed {
                reason: shot.miss.unwrap_or(MissReason::Budget),
                z: shot.z[i],
                e: shot.states[i][0],
                w: shot.states[i][1],
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    /// Front: rest state to excited state.
    P0ToP2,
    /// Back: excited state to rest state.
    P2ToP0,
}

impl Connection {
    pub fn name(self) -> &'static str {
        match self {
            Connection::P0ToP2 => "p0->p2",
            Connection::P2ToP0 => "p2->p0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapValue {
    /// `w` of the unstable-manifold shot minus `w` of the stable-manifold
    /// shot on the section. A shot that turns back counts as `w = 0`.
    pub delta: f64,
    pub unstable_hit: bool,
    pub stable_hit: bool,
}

/// Gap between the two shots that would form a connection in direction `dir`.
pub fn gap(
    n_m: f64,
    c: f64,
    dir: Connection,
    p: &KarmaParams,
    opts: &ShootOptions,
) -> Result<GapValue, WaveError> {
    let (u_at, s_at) = match dir {
        Connection::P0ToP2 => (TwPoint::P0, TwPoint::P2),
        Connection::P2ToP0 => (TwPoint::P2, TwPoint::P0),
    };
    let su = shoot(u_at, Manifold::Unstable, n_m, c, p, opts, false)?;
    let ss = shoot(s_at, Manifold::Stable, n_m, c, p, opts, false)?;
    let w_of = |s: &Shot| -> Result<f64, WaveError> {
        match (s.hit, s.miss) {
            (Some(y), _) => Ok(y[1]),
            (None, Some(MissReason::TurnedBack)) => Ok(0.0),
            _ => {
                let i = s.states.len() - 1;
                Err(WaveError::ShootMissed {
                    reason: s.miss.unwrap_or(MissReason::Budget),
                    z: s.z[i],
                    e: s.states[i][0],
                    w: s.states[i][1],
                })
            }
        }
    };
    let wu = w_of(&su)?;
    let ws = w_of(&ss)?;
    // orient so that the front and back gaps share their sign convention
    let delta = match dir {
        Connection::P0ToP2 => wu - ws,
        Connection::P2ToP0 => ws - wu,
    };
    Ok(GapValue {
        delta,
        unstable_hit: su.hit.is_some(),
        stable_hit: ss.hit.is_some(),
    })
}

/// Value of `n^M` at which `p0` and `p2` lie on the same Hamiltonian level
/// (`15/16` for the default constants); the connection direction switches there.
pub fn balance_gate(p: &KarmaParams) -> Result<f64, WaveError> {
    let top = p.e_star - 2.0 * p.delta;
    let g = |n_m: f64| {
        let e2 = fast_tw_equilibria_nm(n_m, p).p2.unwrap_or(f64::NAN);
        hamiltonian(e2, 0.0, n_m, p)
    };
    roots::brent(g, 0.0, top * (1.0 - 1e-12), 1e-15, 200).map_err(|_| WaveError::RootNotBracketed {
        lo: 0.0,
        hi: top,
        g_lo: g(0.0),
        g_hi: g(top),
    })
}

/// Connection direction for a given `n^M`.
pub fn connection_for(n_m: f64, gate: f64) -> Connection {
    if n_m <= gate {
        Connection::P0ToP2
    } else {
        Connection::P2ToP0
    }
}

/// `Delta(n^M, c)` with the direction chosen from the balance gate.
pub fn gap_delta(n_m: f64, c: f64, p: &KarmaParams) -> Result<f64, WaveError> {
    let gate = balance_gate(p)?;
    Ok(gap(
        n_m,
        c,
        connection_for(n_m, gate),
        p,
        &ShootOptions::default(),
    )?
    .delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroclinicLocusPoint {
    pub n: f64,
    pub c: f64,
    pub direction: Connection,
    pub residual: f64,
}

/// Speed `c` in `bracket` at which the fast subsystem at gate value `n` has a
/// heteroclinic connection.
pub fn find_heteroclinic_c(
    n: f64,
    p: &KarmaParams,
    bracket: (f64, f64),
    opts: &ShootOptions,
) -> Result<HeteroclinicLocusPoint, WaveError> {
    let n_m = dispersion(n.max(0.0), p.m);
    let gate = balance_gate(p)?;
    let dir = connection_for(n_m, gate);
    find_c_directed(n, n_m, dir, p, bracket, opts)
}

fn find_c_directed(
    n: f64,
    n_m: f64,
    dir: Connection,
    p: &KarmaParams,
    bracket: (f64, f64),
    opts: &ShootOptions,
) -> Result<HeteroclinicLocusPoint, WaveError> {
    let (lo, hi) = bracket;
    let g = |c: f64| gap(n_m, c, dir, p, opts).map(|v| v.delta);
    let g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo.signum() == g_hi.signum() && g_lo != 0.0 && g_hi != 0.0 {
        return Err(WaveError::RootNotBracketed { lo, hi, g_lo, g_hi });
    }
    let mut failure = None;
    let c = roots::brent(
        |c| match g(c) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-13,
        200,
    )
    .map_err(|_| {
        failure
            .clone()
            .unwrap_or(WaveError::RootNotBracketed { lo, hi, g_lo, g_hi })
    })?;
    let gv = gap(n_m, c, dir, p, opts)?;
    // at c = 0 exactly on the gate both shots meet by symmetry
    let residual = gv.delta.abs();
    let tol = 1e-8;
    if residual >= tol || (c > 0.0 && !(gv.unstable_hit && gv.stable_hit)) {
        return Err(WaveError::Residual { c, residual });
    }
    Ok(HeteroclinicLocusPoint {
        n,
        c,
        direction: dir,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Locus {
    pub points: Vec<HeteroclinicLocusPoint>,
    /// Index into the n grid at which continuation lost the root.
    pub failure: Option<usize>,
}

/// Follows the heteroclinic speed over `n_grid`. Each root seeds the bracket
/// of the next; when the direction switches the search restarts from `c = 0`.
pub fn continue_locus(p: &KarmaParams, n_grid: &[f64], c_max: f64, opts: &ShootOptions) -> Locus {
    let mut points: Vec<HeteroclinicLocusPoint> = Vec::with_capacity(n_grid.len());
    let gate = match balance_gate(p) {
        Ok(g) => g,
        Err(_) => {
            return Locus {
                points,
                failure: Some(0),
            }
        }
    };
    for (i, &n) in n_grid.iter().enumerate() {
        let n_m = dispersion(n.max(0.0), p.m);
        let dir = connection_for(n_m, gate);
        let prev = points.last().filter(|q| q.direction == dir).map(|q| q.c);
        let found = match prev {
            Some(c0) => bracket_search(n, n_m, dir, p, c0, c_max, opts),
            None => scan_search(n, n_m, dir, p, c_max, opts),
        };
        match found {
            Some(pt) => points.push(pt),
            None => {
                return Locus {
                    points,
                    failure: Some(i),
                }
            }
        }
    }
    Locus {
        points,
        failure: None,
    }
}

fn bracket_search(
    n: f64,
    n_m: f64,
    dir: Connection,
    p: &KarmaParams,
    c0: f64,
    c_max: f64,
    opts: &ShootOptions,
) -> Option<HeteroclinicLocusPoint> {
    let mut w = 0.05;
    while w <= 1.0 {
        let lo = (c0 - w).max(0.0);
        let hi = (c0 + w).min(c_max);
        if let Ok(pt) = find_c_directed(n, n_m, dir, p, (lo, hi), opts) {
            return Some(pt);
        }
        w *= 2.0;
    }
    scan_search(n, n_m, dir, p, c_max, opts)
}

fn scan_search(
    n: f64,
    n_m: f64,
    dir: Connection,
    p: &KarmaParams,
    c_max: f64,
    opts: &ShootOptions,
) -> Option<HeteroclinicLocusPoint> {
    let cells = 24;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=cells {
        let c = c_max * k as f64 / cells as f64;
        let g = match gap(n_m, c, dir, p, opts) {
            Ok(v) => v.delta,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if g == 0.0 && c == 0.0 {
            return find_c_directed(n, n_m, dir, p, (0.0, c_max / cells as f64), opts).ok();
        }
        if let Some((c_prev, g_prev)) = prev {
            if g_prev.signum() != g.signum() {
                if let Ok(pt) = find_c_directed(n, n_m, dir, p, (c_prev, c), opts) {
                    return Some(pt);
                }
            }
        }
        prev = Some((c, g));
    }
    None
}

/// `1/2 w^2 - V(E)` with `D V(E) = E^2/2 - (E* - n^M) int_0^E h - I E`.
/// Conserved by the frozen fast subsystem at `c = 0`.
pub fn hamiltonian(e: f64, w: f64, n_m: f64, p: &KarmaParams) -> f64 {
    0.5 * w * w - potential(e, n_m, p)
}

fn potential(e: f64, n_m: f64, p: &KarmaParams) -> f64 {
    let k = p.e_star - n_m;
    let int_h = match p.reaction {
        Reaction::Cubic => 2.0 * (e * e * e / 3.0 - p.delta * e * e * e * e / 4.0),
        Reaction::Tanh93 => {
            // composite Simpson
            let m = 400;
            let hstep = e / m as f64;
            let mut s = p.h(0.0) + p.h(e);
            for i in 1..m {
                let x = hstep * i as f64;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * p.h(x);
            }
            s * hstep / 3.0
        }
    };
    (0.5 * e * e - k * int_h - p.current * e) / p.diff
}

/// Polylines of the level set `H = level` in the `(E, w)` plane over
/// `E in [e_lo, e_hi]`, split wherever the level set leaves the strip.
pub fn hamiltonian_level_set(
    level: f64,
    n_m: f64,
    p: &KarmaParams,
    e_lo: f64,
    e_hi: f64,
    count: usize,
) -> Vec<Vec<(f64, f64)>> {
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    for sign in [1.0, -1.0] {
        let mut cur: Vec<(f64, f64)> = Vec::new();
        for i in 0..count {
            let e = e_lo + (e_hi - e_lo) * i as f64 / (count - 1) as f64;
            let r = 2.0 * (level + potential(e, n_m, p));
            if r >= 0.0 {
                cur.push((e, sign * math::sqrt(r)));
            } else if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinSpeed {
    pub c_min: f64,
    pub point: HeteroclinicLocusPoint,
}

/// Minimal speed of the back connection at the fold gate value `n = 1`.
pub fn min_speed_family(p: &KarmaParams, opts: &ShootOptions) -> Result<MinSpeed, WaveError> {
    let n_m = p.e_star - 2.0 * p.delta;
    let n = math::powf(n_m.max(0.0), 1.0 / p.m as f64);
    let lo = 0.05;
    let hi = 3.0;
    let point = match find_c_directed(n, n_m, Connection::P2ToP0, p, (lo, hi), opts) {
        Ok(pt) => pt,
        Err(_) => scan_search(n, n_m, Connection::P2ToP0, p, hi, opts).ok_or(
            WaveError::RootNotBracketed {
                lo,
                hi,
                g_lo: f64::NAN,
                g_hi: f64::NAN,
            },
        )?,
    };
    Ok(MinSpeed {
        c_min: point.c,
        point,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub c: f64,
    /// Closest approach of the backward orbit to `p2`.
    pub min_distance: f64,
    /// Backward orbit from `p0`, in the order it was integrated.
    pub z: Vec<f64>,
    pub states: Vec<[f64; 2]>,
}

/// Checks numerically that a back connection exists at speed `c` on the
/// fold gate value: the stable manifold of `p0`, followed backward in z,
/// must enter the `radius`-neighbourhood of `p2` without `w` changing sign.
pub fn certify_back_connection(
    c: f64,
    p: &KarmaParams,
    radius: f64,
    z_budget: f64,
    opts: &ShootOptions,
) -> Result<Certificate, WaveError> {
    let n_m = p.e_star - 2.0 * p.delta;
    let (_, y0, _, e2) = shot_start(TwPoint::P0, Manifold::Stable, n_m, c, p, opts.offset)?;
    let field = |_z: f64, y: &[f64; 2]| frozen_rhs(y[0], y[1], n_m, c, p);
    let sections = [
        Section::new(1, 0.0, Direction::Either),
        Section::new(0, 2.0 * e2, Direction::Increasing),
    ];
    let tr = match integrate::solve(
        &field,
        y0,
        0.0,
        -z_budget,
        &opts.cfg,
        &sections,
        Output::Steps,
    ) {
        Ok(tr) => tr,
        Err(_) => {
            return Err(WaveError::CertificationFailed {
                c,
                reason: "backward orbit diverged",
            })
        }
    };
    let mut min_distance = f64::INFINITY;
    for y in &tr.states {
        min_distance = min_distance.min(math::hypot(y[0] - e2, y[1]));
    }
    if tr.terminated {
        return Err(WaveError::CertificationFailed {
            c,
            reason: "backward orbit left the trapping region",
        });
    }
    if min_distance >= radius {
        return Err(WaveError::CertificationFailed {
            c,
            reason: "backward orbit did not approach p2",
        });
    }
    Ok(Certificate {
        c,
        min_distance,
        z: tr.times,
        states: tr.states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePoint {
    /// `z` on fast segments, `n` on slow segments.
    pub param: f64,
    pub e: f64,
    pub w: f64,
    pub n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseSegmentKind {
    Front,
    Plateau,
    Back,
    Recovery,
}

impl PulseSegmentKind {
    pub fn name(self) -> &'static str {
        match self {
            PulseSegmentKind::Front => "front",
            PulseSegmentKind::Plateau => "plateau",
            PulseSegmentKind::Back => "back",
            PulseSegmentKind::Recovery => "recovery",
        }
    }

    pub fn is_fast(self) -> bool {
        matches!(self, PulseSegmentKind::Front | PulseSegmentKind::Back)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSegment {
    pub kind: PulseSegmentKind,
    pub points: Vec<PulsePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPulse {
    pub segments: Vec<PulseSegment>,
    pub c_front: f64,
    pub c_min: f64,
}

/// Singular homoclinic pulse: front at `n = 0`, slow plateau on the right
/// branch up to the fold, back jump at the fold with the front speed, slow
/// recovery on `E = 0`.
pub fn assemble_singular_pulse(
    p: &KarmaParams,
    opts: &ShootOptions,
) -> Result<SingularPulse, WaveError> {
    if p.reaction != Reaction::Cubic || p.current != 0.0 {
        return Err(WaveError::NeedsCubic);
    }
    let front = find_heteroclinic_c(0.0, p, (0.5, 3.0), opts)?;
    let c = front.c;
    let ms = min_speed_family(p, opts)?;
    if c < ms.c_min {
        return Err(WaveError::Infeasible {
            c_front: c,
            c_min: ms.c_min,
        });
    }

    let mut segments = Vec::with_capacity(4);

    // front: unstable manifold of p0 to the section, then the stable
    // manifold of p2 back out from it
    let su = shoot(TwPoint::P0, Manifold::Unstable, 0.0, c, p, opts, false)?;
    let ss = shoot(TwPoint::P2, Manifold::Stable, 0.0, c, p, opts, false)?;
    let mut pts = alloc::vec![PulsePoint {
        param: f64::NEG_INFINITY,
        e: 0.0,
        w: 0.0,
        n: 0.0
    }];
    let z_join = *su.z.last().unwrap_or(&0.0);
    for (z, y) in su.z.iter().zip(&su.states) {
        pts.push(PulsePoint {
            param: *z - z_join,
            e: y[0],
            w: y[1],
            n: 0.0,
        });
    }
    let z_s = *ss.z.last().unwrap_or(&0.0);
    for (z, y) in ss.z.iter().zip(&ss.states).rev().skip(1) {
        pts.push(PulsePoint {
            param: *z - z_s,
            e: y[0],
            w: y[1],
            n: 0.0,
        });
    }
    let e2_0 = fast_tw_equilibria_nm(0.0, p).p2.unwrap_or(f64::NAN);
    pts.push(PulsePoint {
        param: f64::INFINITY,
        e: e2_0,
        w: 0.0,
        n: 0.0,
    });
    segments.push(PulseSegment {
        kind: PulseSegmentKind::Front,
        points: pts,
    });

    // plateau on the right branch, n from 0 to the fold
    let n_fold = math::powf(p.e_star - 2.0 * p.delta, 1.0 / p.m as f64);
    let steps = 200;
    let pts = (0..=steps)
        .map(|i| {
            let n = n_fold * i as f64 / steps as f64;
            let e2 = fast_tw_equilibria(n, p).p2.unwrap_or(2.0);
            PulsePoint {
                param: n,
                e: e2,
                w: 0.0,
                n,
            }
        })
        .collect();
    segments.push(PulseSegment {
        kind: PulseSegmentKind::Plateau,
        points: pts,
    });

    // back: the backward stable manifold of p0 at the fold, read forward
    let cert = certify_back_connection(c, p, 1e-2, 2000.0, opts)?;
    let e_fold = fast_tw_equilibria(n_fold, p).p2.unwrap_or(2.0);
    let mut pts = alloc::vec![PulsePoint {
        param: f64::NEG_INFINITY,
        e: e_fold,
        w: 0.0,
        n: n_fold
    }];
    for (z, y) in cert.z.iter().zip(&cert.states).rev() {
        pts.push(PulsePoint {
            param: *z,
            e: y[0],
            w: y[1],
            n: n_fold,
        });
    }
    pts.push(PulsePoint {
        param: f64::INFINITY,
        e: 0.0,
        w: 0.0,
        n: n_fold,
    });
    segments.push(PulseSegment {
        kind: PulseSegmentKind::Back,
        points: pts,
    });

    // recovery on E = 0 where c n_z = -eps n
    let pts = (0..=steps)
        .map(|i| {
            let n = n_fold * (1.0 - i as f64 / steps as f64);
            PulsePoint {
                param: n,
                e: 0.0,
                w: 0.0,
                n,
            }
        })
        .collect();
    segments.push(PulseSegment {
        kind: PulseSegmentKind::Recovery,
        points: pts,
    });

    Ok(SingularPulse {
        segments,
        c_front: c,
        c_min: ms.c_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> KarmaParams {
        KarmaParams::default()
    }

    #[test]
    fn comoving_examples() {
        let p = defaults();
        let r = comoving_rhs(ComovingState::new(0.0, 0.0, 0.4), 1.3, &p).unwrap();
        assert_eq!((r.e, r.w), (0.0, 0.0));
        let n = math::powf(15.0 / 16.0, 0.25);
        let r = comoving_rhs(ComovingState::new(8.0 / 3.0, 0.0, n), 1.0, &p).unwrap();
        assert!(r.e == 0.0 && r.w.abs() < 1e-12);
        let r = comoving_rhs(ComovingState::new(1.0, 1.0, 0.0), 1.0, &p).unwrap();
        assert_eq!(r.e, 1.0);
        assert!((r.w + 0.25).abs() < 1e-15);
        assert_eq!(
            comoving_rhs(ComovingState::new(1.0, 1.0, 0.0), 0.0, &p),
            Err(WaveError::ZeroSpeed)
        );
        // frozen mode is fine at c = 0
        let f = frozen_rhs(1.0, 1.0, 0.0, 0.0, &p);
        assert!((f[1] + 1.25).abs() < 1e-15);
    }

    #[test]
    fn equilibria_examples() {
        let p = defaults();
        let eq = fast_tw_equilibria(0.0, &p);
        let s6 = math::sqrt(6.0);
        assert!((eq.p1.unwrap() - (3.0 - s6) / 1.5).abs() < 1e-12);
        assert!((eq.p2.unwrap() - (3.0 + s6) / 1.5).abs() < 1e-12);
        let eq = fast_tw_equilibria_nm(15.0 / 16.0, &p);
        assert!((eq.p2.unwrap() - 8.0 / 3.0).abs() < 1e-12);
        let eq = fast_tw_equilibria(1.0, &p);
        assert_eq!(eq.p1, Some(2.0));
        assert_eq!(eq.p2, Some(2.0));
        assert!(fast_tw_equilibria(1.01, &p).p2.is_none());
    }

    #[test]
    fn eigen_examples() {
        let p = defaults();
        let ev = tw_eigen(0.0, 0.3, 0.0, &p);
        assert_eq!(ev.lambda_plus.re, 1.0);
        assert_eq!(ev.lambda_minus.re, -1.0);
        assert_eq!(ev.class, TwClass::Saddle);
        let e1 = fast_tw_equilibria(0.0, &p).p1.unwrap();
        assert_eq!(tw_eigen(e1, 0.0, 0.1, &p).class, TwClass::UnstableSpiral);
        assert_eq!(tw_eigen(e1, 0.0, 5.0, &p).class, TwClass::UnstableNode);
    }

    #[test]
    fn hamiltonian_examples() {
        let p = defaults();
        assert_eq!(hamiltonian(0.0, 0.0, 0.5, &p), 0.0);
        assert!(hamiltonian(8.0 / 3.0, 0.0, 15.0 / 16.0, &p).abs() < 1e-12);
        assert!(hamiltonian(8.0 / 3.0, 0.0, 0.9, &p).abs() > 1e-3);
        assert!((balance_gate(&p).unwrap() - 15.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn front_shots_hit_section() {
        let p = defaults();
        let o = ShootOptions::default();
        let a = shoot_manifold(TwPoint::P0, Manifold::Unstable, 0.0, 1.77, &p, &o).unwrap();
        let b = shoot_manifold(TwPoint::P2, Manifold::Stable, 0.0, 1.77, &p, &o).unwrap();
        let sigma = fast_tw_equilibria(0.0, &p).p2.unwrap() / 2.0;
        assert!((a.e - sigma).abs() < 1e-12 && (b.e - sigma).abs() < 1e-12);
        assert!(a.w.is_finite() && b.w.is_finite());
        assert!(matches!(
            shoot_manifold_outward(TwPoint::P0, Manifold::Unstable, 0.0, 1.77, &p, &o),
            Err(WaveError::ShootMissed { .. })
        ));
    }

    #[test]
    fn offset_is_range_checked() {
        let o = ShootOptions {
            offset: 1e-2,
            ..ShootOptions::default()
        };
        assert!(matches!(
            shoot_manifold(TwPoint::P0, Manifold::Unstable, 0.0, 1.0, &defaults(), &o),
            Err(WaveError::Offset(_))
        ));
    }

    #[test]
    fn reflection_symmetry() {
        // (E(z), w(z)) at speed c maps to (E(-z), -w(-z)) at speed -c
        let p = defaults();
        let c = 0.8;
        let cfg = IntegratorConfig::with_tol(1e-11, 1e-13);
        let f = |_z: f64, y: &[f64; 2]| frozen_rhs(y[0], y[1], 0.2, c, &p);
        let g = |_z: f64, y: &[f64; 2]| frozen_rhs(y[0], y[1], 0.2, -c, &p);
        let y0 = [0.7, 0.1];
        let a = integrate::integrate(&f, y0, 0.0, 2.0, &cfg)
            .unwrap()
            .last()
            .1;
        let b = integrate::integrate(&g, [a[0], -a[1]], 0.0, 2.0, &cfg)
            .unwrap()
            .last()
            .1;
        assert!((b[0] - y0[0]).abs() < 1e-8 && (b[1] + y0[1]).abs() < 1e-8);
    }

    #[test]
    fn hamiltonian_conserved_at_zero_speed() {
        let p = defaults();
        let n_m = 0.5;
        let cfg = IntegratorConfig::with_tol(1e-10, 1e-12);
        let f = |_z: f64, y: &[f64; 2]| frozen_rhs(y[0], y[1], n_m, 0.0, &p);
        // closed orbit around the centre p1
        let tr = integrate::integrate(&f, [0.75, 0.0], 0.0, 20.0, &cfg).unwrap();
        let h0 = hamiltonian(0.75, 0.0, n_m, &p);
        let drift = tr
            .states
            .iter()
            .map(|y| (hamiltonian(y[0], y[1], n_m, &p) - h0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 100.0 * 1e-10, "{drift}");
    }

    #[test]
    fn level_set_through_origin() {
        let p = defaults();
        let lines = hamiltonian_level_set(0.0, 15.0 / 16.0, &p, 0.0, 8.0 / 3.0, 401);
        assert!(!lines.is_empty());
        for line in &lines {
            for &(e, w) in line {
                assert!(hamiltonian(e, w, 15.0 / 16.0, &p).abs() < 1e-10);
            }
        }
    }
}
