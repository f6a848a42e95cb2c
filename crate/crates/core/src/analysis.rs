//! Critical manifolds, equilibria, current thresholds, fold curves, singular
//! orbits and slow-manifold scaling checks.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::integrate::{
    self, Direction, FhnOde, IntegrateError, IntegratorConfig, KarmaOde, Section,
};
use crate::math;
use crate::model::{dispersion, rectifier, FhnParams, KarmaParams, PhaseState, Reaction};
use crate::roots;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("root finding failed on [{lo}, {hi}]: {what}")]
    RootFailure {
        what: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("threshold {which} not found: {detail}")]
    ThresholdNotFound {
        which: &'static str,
        detail: &'static str,
    },
    #[error("current I = {current} is within {tol} of threshold {which}")]
    RegimeAmbiguous {
        current: f64,
        which: &'static str,
        tol: f64,
    },
    #[error("operation requires the cubic reaction")]
    NeedsCubic,
    #[error("insufficient data: need at least {need} eps values, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("scaling inconclusive: {0}")]
    ScalingInconclusive(&'static str),
    #[error("integration failed at t = {t}")]
    Integration { t: f64, state: [f64; 2] },
    #[error("singular orbit construction failed: {0}")]
    Construction(&'static str),
}

impl From<IntegrateError<2>> for AnalysisError {
    fn from(e: IntegrateError<2>) -> Self {
        match e {
            IntegrateError::StepUnderflow { t, state }
            | IntegrateError::NonFinite { t, state }
            | IntegrateError::TooManySteps { t, state, .. }
            | IntegrateError::NoCrossing { t, state } => AnalysisError::Integration { t, state },
            IntegrateError::Config(_) => AnalysisError::Integration {
                t: f64::NAN,
                state: [f64::NAN; 2],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    LeftAttracting,
    MiddleRepelling,
    RightAttracting,
    SingleAttracting,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::LeftAttracting => "left-attracting",
            Branch::MiddleRepelling => "middle-repelling",
            Branch::RightAttracting => "right-attracting",
            Branch::SingleAttracting => "single-attracting",
        }
    }

    pub fn attracting(self) -> bool {
        !matches!(self, Branch::MiddleRepelling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalManifoldSample {
    pub e: f64,
    pub n: f64,
    pub branch: Branch,
    pub layer_jacobian: f64,
}

/// `E* - (E - I) / h(E)`, the value `n^M` must take on the critical manifold.
pub fn manifold_radicand(e: f64, p: &KarmaParams) -> f64 {
    p.e_star - (e - p.current) / p.h(e)
}

/// Gate value on the nontrivial part of the critical manifold, or `None`
/// when the radicand is negative (or undefined). For `I = 0` the line `E = 0`
/// is an additional branch, see [`trivial_branch`].
pub fn karma_manifold(e: f64, p: &KarmaParams) -> Option<f64> {
    let r = manifold_radicand(e, p);
    if !r.is_finite() || r < 0.0 {
        return None;
    }
    Some(math::powf(r, 1.0 / p.m as f64))
}

/// True when `E = 0` is part of the critical manifold (exactly when `I = 0`).
pub fn trivial_branch(p: &KarmaParams) -> bool {
    p.current == 0.0
}

/// `-1 + (E* - n^M) h'(E)`.
pub fn layer_jacobian(e: f64, n: f64, p: &KarmaParams) -> f64 {
    -1.0 + (p.e_star - dispersion(n.max(0.0), p.m)) * p.dh(e)
}

/// `v - v^3/3 + I`.
pub fn fhn_manifold(v: f64, p: &FhnParams) -> f64 {
    v - v * v * v / 3.0 + p.current
}

pub fn fhn_layer_jacobian(v: f64) -> f64 {
    1.0 - v * v
}

/// Samples the Karma critical manifold on `E in (0, E_max)` with `E_max = 1/delta`
/// for the cubic reaction. Includes the line `E = 0` when `I = 0`.
pub fn sample_karma_manifold(p: &KarmaParams, count: usize) -> Vec<CriticalManifoldSample> {
    let e_max = e_upper(p);
    let folds = fold_curves(p.current, p).ok();
    let mut out = Vec::with_capacity(count + 2);
    if trivial_branch(p) {
        let n_top = 1.5 * karma_manifold(2.0, p).unwrap_or(1.0).max(1.0);
        let k = count.clamp(2, 200);
        for i in 0..k {
            let n = n_top * i as f64 / (k - 1) as f64;
            out.push(CriticalManifoldSample {
                e: 0.0,
                n,
                branch: Branch::LeftAttracting,
                layer_jacobian: -1.0,
            });
        }
    }
    for i in 1..count {
        let e = e_max * i as f64 / count as f64;
        if let Some(n) = karma_manifold(e, p) {
            let j = layer_jacobian(e, n, p);
            out.push(CriticalManifoldSample {
                e,
                n,
                branch: classify_branch(e, j, p, folds.as_ref()),
                layer_jacobian: j,
            });
        }
    }
    out
}

fn classify_branch(e: f64, j: f64, p: &KarmaParams, folds: Option<&FoldCurves>) -> Branch {
    if j > 0.0 {
        return Branch::MiddleRepelling;
    }
    match folds {
        Some(FoldCurves {
            e_plus: Some(ep),
            e_minus: Some(em),
            ..
        }) if p.reaction == Reaction::Cubic && ep > em => {
            if e <= *em {
                Branch::LeftAttracting
            } else if e >= *ep {
                Branch::RightAttracting
            } else {
                // numerically on a fold
                if (e - em).abs() < (e - ep).abs() {
                    Branch::LeftAttracting
                } else {
                    Branch::RightAttracting
                }
            }
        }
        Some(_) if p.reaction == Reaction::Cubic => Branch::SingleAttracting,
        _ => {
            if e < 1.0 {
                Branch::LeftAttracting
            } else {
                Branch::RightAttracting
            }
        }
    }
}

/// Samples the FitzHugh-Nagumo critical manifold `w = v - v^3/3 + I`.
pub fn sample_fhn_manifold(
    p: &FhnParams,
    v_min: f64,
    v_max: f64,
    count: usize,
) -> Vec<CriticalManifoldSample> {
    (0..count)
        .map(|i| {
            let v = v_min + (v_max - v_min) * i as f64 / (count - 1) as f64;
            let j = fhn_layer_jacobian(v);
            let branch = if v < -1.0 {
                Branch::LeftAttracting
            } else if v > 1.0 {
                Branch::RightAttracting
            } else {
                Branch::MiddleRepelling
            };
            CriticalManifoldSample {
                e: v,
                n: fhn_manifold(v, p),
                branch,
                layer_jacobian: j,
            }
        })
        .collect()
}

fn e_upper(p: &KarmaParams) -> f64 {
    match p.reaction {
        Reaction::Cubic if p.delta > 0.0 => 1.0 / p.delta,
        _ => 10.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    StableNode,
    StableSpiral,
    UnstableNode,
    UnstableSpiral,
    Saddle,
    /// Non-hyperbolic (zero determinant or purely imaginary pair).
    Degenerate,
    /// One-sided linearizations on the switching line disagree.
    NonSmoothDegenerate,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::StableNode => "stable-node",
            Classification::StableSpiral => "stable-spiral",
            Classification::UnstableNode => "unstable-node",
            Classification::UnstableSpiral => "unstable-spiral",
            Classification::Saddle => "saddle",
            Classification::Degenerate => "degenerate",
            Classification::NonSmoothDegenerate => "non-smooth-degenerate",
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(
            self,
            Classification::StableNode | Classification::StableSpiral
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumInfo {
    pub position: PhaseState,
    pub eigenvalues: [Complex64; 2],
    pub classification: Classification,
}

/// Eigenvalues and classification of a real 2x2 matrix `[[a, b], [c, d]]`.
pub fn classify_2x2(a: f64, b: f64, c: f64, d: f64) -> ([Complex64; 2], Classification) {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr / 4.0 - det;
    let eig = if disc >= 0.0 {
        let s = math::sqrt(disc);
        [
            Complex64::new(tr / 2.0 + s, 0.0),
            Complex64::new(tr / 2.0 - s, 0.0),
        ]
    } else {
        let s = math::sqrt(-disc);
        [Complex64::new(tr / 2.0, s), Complex64::new(tr / 2.0, -s)]
    };
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs()).max(1e-300);
    let class = if det < -1e-14 * scale * scale {
        Classification::Saddle
    } else if det.abs() <= 1e-14 * scale * scale || tr.abs() <= 1e-14 * scale {
        Classification::Degenerate
    } else if tr < 0.0 {
        if disc < 0.0 {
            Classification::StableSpiral
        } else {
            Classification::StableNode
        }
    } else if disc < 0.0 {
        Classification::UnstableSpiral
    } else {
        Classification::UnstableNode
    };
    (eig, class)
}

/// Eigenvector of a real 2x2 matrix for a real eigenvalue `lam`.
pub fn eigenvector_2x2(j: &[[f64; 2]; 2], lam: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = *j;
    if b.abs() > 1e-14 {
        [b, lam - a]
    } else if c.abs() > 1e-14 {
        [lam - d, c]
    } else if (a - lam).abs() < (d - lam).abs() {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    }
}

/// Full-system Jacobian of the Karma field on one smooth piece
/// (`upper = true` for `E > 1`).
pub fn karma_jacobian(e: f64, n: f64, p: &KarmaParams, upper: bool) -> [[f64; 2]; 2] {
    let n_pos = n.max(0.0);
    let dn_m = if p.m == 0 {
        0.0
    } else {
        p.m as f64 * dispersion(n_pos, p.m - 1)
    };
    [
        [layer_jacobian(e, n, p), -dn_m * p.h(e)],
        [if upper { p.eps / p.n_b } else { 0.0 }, -p.eps],
    ]
}

fn karma_equilibrium_info(e: f64, n: f64, p: &KarmaParams) -> EquilibriumInfo {
    let classify = |upper: bool| {
        let j = karma_jacobian(e, n, p, upper);
        classify_2x2(j[0][0], j[0][1], j[1][0], j[1][1])
    };
    let (eig, class) = if (e - 1.0).abs() < 1e-9 {
        let lo = classify(false);
        let hi = classify(true);
        if lo.1 == hi.1 {
            lo
        } else {
            (lo.0, Classification::NonSmoothDegenerate)
        }
    } else {
        classify(e > 1.0)
    };
    EquilibriumInfo {
        position: PhaseState::new(e, n),
        eigenvalues: eig,
        classification: class,
    }
}

/// Equilibria of the Karma reaction system, sorted by `E`.
///
/// Each smooth piece of the gate nullcline is handled separately: `n = 0`
/// for `E <= 1` and `n = (E - 1)/n_B` for `E in (1, E_max)`.
pub fn find_karma_equilibria(p: &KarmaParams) -> Result<Vec<EquilibriumInfo>, AnalysisError> {
    let mut es: Vec<(f64, f64)> = Vec::new();
    // lower piece: n = 0
    let lower: Vec<f64> = match p.reaction {
        Reaction::Cubic => {
            roots::real_cubic_roots(-2.0 * p.e_star * p.delta, 2.0 * p.e_star, -1.0, p.current)
        }
        Reaction::Tanh93 => roots::scan_roots(|e| p.fast_reaction(e, 0.0), -2.0, 1.0, 6000, 1e-14),
    };
    for e in lower {
        if e <= 1.0 {
            es.push((e, 0.0));
        }
    }
    // upper piece
    let g = |e: f64| p.fast_reaction(e, dispersion((e - 1.0) / p.n_b, p.m));
    let hi = e_upper(p);
    let brackets = roots::bracket_sign_changes(g, 1.0, hi, 8000);
    for (a, b) in brackets {
        let e = if a == b {
            a
        } else {
            roots::brent(g, a, b, 1e-15, 200).map_err(|_| AnalysisError::RootFailure {
                what: "equilibrium on the upper nullcline piece",
                lo: a,
                hi: b,
            })?
        };
        if e > 1.0 {
            es.push((e, (e - 1.0) / p.n_b));
        }
    }
    es.sort_by(|a, b| a.0.total_cmp(&b.0));
    es.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-10);
    Ok(es
        .into_iter()
        .map(|(e, n)| karma_equilibrium_info(e, n, p))
        .collect())
}

/// Equilibria of the FitzHugh-Nagumo system.
pub fn find_fhn_equilibria(p: &FhnParams) -> Vec<EquilibriumInfo> {
    // w = (v + a)/b substituted into the fast nullcline gives
    // v^3 + 3(1/b - 1) v + 3(a/b - I) = 0
    let vs = if p.b != 0.0 {
        roots::real_cubic_roots(
            1.0,
            0.0,
            3.0 * (1.0 / p.b - 1.0),
            3.0 * (p.a / p.b - p.current),
        )
    } else {
        alloc::vec![-p.a]
    };
    vs.into_iter()
        .map(|v| {
            let w = if p.b != 0.0 {
                (v + p.a) / p.b
            } else {
                fhn_manifold(v, p)
            };
            let (eig, class) = classify_2x2(1.0 - v * v, -1.0, p.eps, -p.eps * p.b);
            EquilibriumInfo {
                position: PhaseState::new(v, w),
                eigenvalues: eig,
                classification: class,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldCurves {
    pub e_plus: Option<f64>,
    pub e_minus: Option<f64>,
    pub plus_on_manifold: bool,
    pub minus_on_manifold: bool,
}

/// Roots of `2 E^2 - (1/delta + 3I) E + 2I/delta = 0`, the `E` values where
/// the critical manifold folds at current `I`. A root is flagged on-manifold
/// when the corresponding `n^M` is non-negative.
pub fn fold_curves(current: f64, p: &KarmaParams) -> Result<FoldCurves, AnalysisError> {
    if p.reaction != Reaction::Cubic {
        return Err(AnalysisError::NeedsCubic);
    }
    let a = 1.0 / p.delta;
    let b = a + 3.0 * current;
    let disc = b * b - 16.0 * current * a;
    let q = KarmaParams { current, ..*p };
    let on = |e: f64| {
        let r = manifold_radicand(e, &q);
        r.is_finite() && r >= -1e-12
    };
    if disc < 0.0 {
        return Ok(FoldCurves {
            e_plus: None,
            e_minus: None,
            plus_on_manifold: false,
            minus_on_manifold: false,
        });
    }
    let (e_plus, e_minus) = if disc == 0.0 || (current - i1_value(p)).abs() < 1e-15 {
        (b / 4.0, b / 4.0)
    } else {
        let s = math::sqrt(disc);
        (
            (b + s) / 4.0,
            // product of the roots is I/delta
            if b + s != 0.0 {
                (current * a) / ((b + s) / 4.0)
            } else {
                (b - s) / 4.0
            },
        )
    };
    Ok(FoldCurves {
        e_plus: Some(e_plus),
        e_minus: Some(e_minus),
        plus_on_manifold: on(e_plus),
        minus_on_manifold: on(e_minus),
    })
}

/// The current at which the two fold curves meet (`4/9` for `delta = 1/4`).
pub fn i1_value(p: &KarmaParams) -> f64 {
    1.0 / (9.0 * p.delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
    pub e_cusp: f64,
    /// All crossings of the gate nullcline with the fold image, as
    /// `(I, E_fold, on the upper fold curve)`.
    pub i2_candidates: Vec<(f64, f64, bool)>,
}

fn fold_n(e: f64, current: f64, p: &KarmaParams) -> f64 {
    let q = KarmaParams { current, ..*p };
    manifold_radicand(e, &q)
}

fn e_minus_of(current: f64, p: &KarmaParams) -> f64 {
    fold_curves(current, p)
        .ok()
        .and_then(|f| f.e_minus)
        .unwrap_or(f64::NAN)
}

fn e_plus_of(current: f64, p: &KarmaParams) -> f64 {
    fold_curves(current, p)
        .ok()
        .and_then(|f| f.e_plus)
        .unwrap_or(f64::NAN)
}

/// Current thresholds of the Karma model.
///
/// `I0`: the lower fold `E_-` reaches `n = 0`. `I1`: the folds merge in a
/// cusp. `I2`: the gate nullcline passes through a fold.
pub fn compute_thresholds(p: &KarmaParams) -> Result<Thresholds, AnalysisError> {
    if p.reaction != Reaction::Cubic {
        return Err(AnalysisError::NeedsCubic);
    }
    let i1 = i1_value(p);
    let e_cusp = 1.0 / (3.0 * p.delta);
    let lo = 1e-9;
    let hi = i1 * (1.0 - 1e-9);

    let phi0 = |i: f64| fold_n(e_minus_of(i, p), i, p);
    let i0 = {
        let brackets = roots::bracket_sign_changes(phi0, lo, hi, 2000);
        let (a, b) = *brackets.first().ok_or(AnalysisError::ThresholdNotFound {
            which: "I0",
            detail: "n^M at the lower fold never changes sign on (0, I1)",
        })?;
        roots::brent(phi0, a, b, 1e-15, 200).map_err(|_| AnalysisError::ThresholdNotFound {
            which: "I0",
            detail: "Brent iteration failed",
        })?
    };

    let nullcline = |e: f64| rectifier(e - 1.0) / p.n_b;
    let n_at = |e: f64, i: f64| {
        let r = fold_n(e, i, p);
        if r < 0.0 {
            f64::NAN
        } else {
            math::powf(r, 1.0 / p.m as f64)
        }
    };
    let phi_plus = |i: f64| {
        let e = e_plus_of(i, p);
        n_at(e, i) - nullcline(e)
    };
    let phi_minus = |i: f64| {
        let e = e_minus_of(i, p);
        n_at(e, i) - nullcline(e)
    };
    let mut candidates = Vec::new();
    for (a, b) in roots::bracket_sign_changes(phi_plus, lo, hi, 2000) {
        if let Ok(r) = roots::brent(phi_plus, a, b, 1e-15, 200) {
            candidates.push((r, e_plus_of(r, p), true));
        }
    }
    // the lower fold touches the n = 0 piece at I0 itself; that contact is the
    // saddle-node, not a crossing, so the scan starts just above it
    for (a, b) in roots::bracket_sign_changes(phi_minus, i0 * (1.0 + 1e-6) + lo, hi, 2000) {
        if let Ok(r) = roots::brent(phi_minus, a, b, 1e-15, 200) {
            candidates.push((r, e_minus_of(r, p), false));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let i2 = candidates
        .first()
        .map(|c| c.0)
        .ok_or(AnalysisError::ThresholdNotFound {
            which: "I2",
            detail: "gate nullcline does not cross the fold image on (0, I1)",
        })?;
    Ok(Thresholds {
        i0,
        i1,
        i2,
        e_cusp,
        i2_candidates: candidates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Fast,
    Slow,
}

impl SegmentKind {
    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::Fast => "fast",
            SegmentKind::Slow => "slow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub kind: SegmentKind,
    pub points: Vec<PhaseState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitEnd {
    Equilibrium(PhaseState),
    /// The orbit returned to a fold it had already jumped from.
    Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularOrbit {
    pub segments: Vec<OrbitSegment>,
    pub end: OrbitEnd,
    /// Points where fast jumps left the critical manifold.
    pub jump_points: Vec<PhaseState>,
}

/// Zeros of the fast field at frozen `n`, sorted.
fn layer_roots(n: f64, p: &KarmaParams) -> Vec<f64> {
    let n_m = dispersion(n.max(0.0), p.m);
    let mut r = match p.reaction {
        Reaction::Cubic => roots::real_cubic_roots(
            -2.0 * (p.e_star - n_m) * p.delta,
            2.0 * (p.e_star - n_m),
            -1.0,
            p.current,
        ),
        Reaction::Tanh93 => {
            roots::scan_roots(|e| p.fast_reaction(e, n_m), -2.0, e_upper(p), 6000, 1e-14)
        }
    };
    r.retain(|&e| e < e_upper(p) + 1e-9);
    r
}

/// Endpoint of the fast fibre from `e0` at frozen `n`.
fn fast_fibre_end(e0: f64, n: f64, p: &KarmaParams) -> Option<f64> {
    let n_m = dispersion(n.max(0.0), p.m);
    let f0 = p.fast_reaction(e0, n_m);
    let rs = layer_roots(n, p);
    if f0 > 0.0 {
        rs.into_iter().find(|&e| e > e0)
    } else if f0 < 0.0 {
        rs.into_iter().rev().find(|&e| e < e0)
    } else {
        Some(e0)
    }
}

/// Root of the layer problem at `n` on the same branch as `e_prev`, if that
/// branch still exists at `n`.
fn track_branch(
    e_prev: f64,
    n: f64,
    repelling: bool,
    p: &KarmaParams,
    max_jump: f64,
) -> Option<f64> {
    layer_roots(n, p)
        .into_iter()
        .filter(|&e| (layer_jacobian(e, n, p) > 0.0) == repelling)
        .min_by(|a, b| (a - e_prev).abs().total_cmp(&(b - e_prev).abs()))
        .filter(|e| (e - e_prev).abs() < max_jump)
}

/// Candidate orbit of the singular limit `eps = 0` starting at `s0`.
///
/// Alternates fast fibres at frozen `n` with slow drift along the critical
/// manifold. Jumps happen at folds only. The construction stops at an
/// equilibrium or when a fold is revisited (singular relaxation cycle).
pub fn singular_orbit(s0: PhaseState, p: &KarmaParams) -> Result<SingularOrbit, AnalysisError> {
    let eq = find_karma_equilibria(p)?;
    if p.reaction == Reaction::Cubic && p.current > 0.0 {
        let th = compute_thresholds(p)?;
        let tol = 1e-6;
        for (which, v) in [("I0", th.i0), ("I1", th.i1), ("I2", th.i2)] {
            if (p.current - v).abs() < tol {
                return Err(AnalysisError::RegimeAmbiguous {
                    current: p.current,
                    which,
                    tol,
                });
            }
        }
    }

    let dn = 1e-3;
    let mut segments = Vec::new();
    let mut jumps: Vec<PhaseState> = Vec::new();
    let (mut e, mut n) = (s0.fast, s0.slow.max(0.0));

    for _ in 0..40 {
        // fast fibre unless already on the manifold
        let n_m = dispersion(n, p.m);
        if p.fast_reaction(e, n_m).abs() > 1e-12 {
            let e_end =
                fast_fibre_end(e, n, p).ok_or(AnalysisError::Construction("fast fibre escapes"))?;
            let pts = (0..=50)
                .map(|k| PhaseState::new(e + (e_end - e) * k as f64 / 50.0, n))
                .collect();
            segments.push(OrbitSegment {
                kind: SegmentKind::Fast,
                points: pts,
            });
            e = e_end;
        }
        // slow drift along the branch
        let repelling = layer_jacobian(e, n, p) > 0.0;
        let mut pts = alloc::vec![PhaseState::new(e, n)];
        let slow = |e: f64, n: f64| rectifier(e - 1.0) / p.n_b - n;
        let dir = slow(e, n);
        if let Some(hit) = eq
            .iter()
            .find(|q| q.position.dist(&PhaseState::new(e, n)) < 1e-9)
        {
            segments.push(OrbitSegment {
                kind: SegmentKind::Slow,
                points: pts,
            });
            return Ok(SingularOrbit {
                segments,
                end: OrbitEnd::Equilibrium(hit.position),
                jump_points: jumps,
            });
        }
        let sgn = if dir >= 0.0 { 1.0 } else { -1.0 };
        let folded;
        loop {
            let n_next = n + sgn * dn;
            // equilibrium reached between n and n_next on this branch
            if let Some(q) = eq.iter().find(|q| {
                let qn = q.position.slow;
                (q.position.fast - e).abs() < 0.1
                    && (qn - n) * sgn >= 0.0
                    && (qn - n_next) * sgn <= 0.0
            }) {
                pts.push(q.position);
                segments.push(OrbitSegment {
                    kind: SegmentKind::Slow,
                    points: pts,
                });
                return Ok(SingularOrbit {
                    segments,
                    end: OrbitEnd::Equilibrium(q.position),
                    jump_points: jumps,
                });
            }
            if n_next < 0.0 {
                return Err(AnalysisError::Construction("slow flow left n >= 0"));
            }
            match track_branch(e, n_next, repelling, p, 0.25) {
                Some(e_next) if slow(e_next, n_next) * sgn > 0.0 => {
                    e = e_next;
                    n = n_next;
                    pts.push(PhaseState::new(e, n));
                }
                Some(_) => {
                    // slow flow reverses without an equilibrium on record
                    return Err(AnalysisError::Construction("slow flow stalls"));
                }
                None => {
                    // branch ends between n and n_next: locate the fold
                    let (mut a, mut b) = (n, n_next);
                    let mut e_a = e;
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        match track_branch(e_a, m, repelling, p, 0.25) {
                            Some(em) => {
                                a = m;
                                e_a = em;
                            }
                            None => b = m,
                        }
                    }
                    e = e_a;
                    n = a;
                    pts.push(PhaseState::new(e, n));
                    folded = true;
                    break;
                }
            }
        }
        segments.push(OrbitSegment {
            kind: SegmentKind::Slow,
            points: pts,
        });
        if folded {
            let here = PhaseState::new(e, n);
            if jumps.iter().any(|j| j.dist(&here) < 1e-4) {
                return Ok(SingularOrbit {
                    segments,
                    end: OrbitEnd::Cycle,
                    jump_points: jumps,
                });
            }
            jumps.push(here);
            // step just past the fold so the fast fibre has a direction
            n = (n + sgn * 2e-9).max(0.0);
            let n_m = dispersion(n, p.m);
            let f = p.fast_reaction(e, n_m);
            if f == 0.0 {
                return Err(AnalysisError::Construction("degenerate fold"));
            }
            let e_end =
                fast_fibre_end(e, n, p).ok_or(AnalysisError::Construction("fast fibre escapes"))?;
            let pts = (0..=50)
                .map(|k| PhaseState::new(e + (e_end - e) * k as f64 / 50.0, n))
                .collect();
            segments.push(OrbitSegment {
                kind: SegmentKind::Fast,
                points: pts,
            });
            e = e_end;
        }
    }
    Err(AnalysisError::Construction("segment budget exhausted"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `(eps, measured quantity)`.
    pub data: Vec<(f64, f64)>,
}

fn fit_loglog(data: Vec<(f64, f64)>) -> Result<ScalingFit, AnalysisError> {
    for w in data.windows(2) {
        if !(w[1].1 < w[0].1) {
            return Err(AnalysisError::ScalingInconclusive(
                "measured quantity is not monotone in eps",
            ));
        }
    }
    let xs: Vec<f64> = data.iter().map(|d| math::ln(d.0)).collect();
    let ys: Vec<f64> = data.iter().map(|d| math::ln(d.1)).collect();
    let (slope, intercept, slope_stderr) = math::linear_fit(&xs, &ys);
    Ok(ScalingFit {
        slope,
        intercept,
        slope_stderr,
        data,
    })
}

fn check_eps_list(eps: &[f64]) -> Result<(), AnalysisError> {
    if eps.len() < 4 {
        return Err(AnalysisError::InsufficientData {
            need: 4,
            got: eps.len(),
        });
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(AnalysisError::ScalingInconclusive(
            "eps values must be positive and decreasing",
        ));
    }
    Ok(())
}

fn scaling_cfg(eps: f64) -> IntegratorConfig {
    IntegratorConfig {
        event_tol: 1e-12,
        ..IntegratorConfig::with_tol(1e-10, 1e-12)
    }
    .max_step(0.05 / eps)
}

/// Distance from a point to the right attracting branch of the critical
/// manifold, minimized over the branch parametrized by `n`.
fn distance_to_right_branch(pt: PhaseState, p: &KarmaParams) -> Option<f64> {
    let branch_e = |n: f64| {
        layer_roots(n, p)
            .into_iter()
            .rev()
            .find(|&e| e > 1.0 && layer_jacobian(e, n, p) < 0.0)
    };
    let dist = |n: f64| branch_e(n).map(|e| math::hypot(e - pt.fast, n - pt.slow));
    let (mut a, mut b) = ((pt.slow - 0.2).max(0.0), pt.slow + 0.2);
    let gr = 0.5 * (math::sqrt(5.0) - 1.0);
    for _ in 0..120 {
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        let (fc, fd) = (dist(c)?, dist(d)?);
        if fc < fd {
            b = d;
        } else {
            a = c;
        }
    }
    dist(0.5 * (a + b))
}

/// Distance to the right attracting branch when the trajectory from
/// `(3.5, 0)` first crosses `n = checkpoint`, for each `eps`.
pub fn slow_manifold_distances(
    p: &KarmaParams,
    eps: &[f64],
    checkpoint: f64,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let q = KarmaParams { eps: e, ..*p };
        let sys = KarmaOde::new(q);
        let sec = Section::new(1, checkpoint, Direction::Increasing);
        let (_, y) =
            integrate::section_crossing(&sys, [3.5, 0.0], 0.0, 50.0 / e, sec, &scaling_cfg(e))?;
        let d = distance_to_right_branch(PhaseState::new(y[0], y[1]), &q).ok_or(
            AnalysisError::ScalingInconclusive("checkpoint off the right branch"),
        )?;
        out.push((e, d));
    }
    Ok(out)
}

/// Overshoot `n - 1` past the fold when the trajectory from `(3, 0.5)` first
/// crosses `E = exit_e` on its way down, for each `eps`.
pub fn fold_exit_heights(
    p: &KarmaParams,
    eps: &[f64],
    exit_e: f64,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let q = KarmaParams { eps: e, ..*p };
        let sys = KarmaOde::new(q);
        let sec = Section::new(0, exit_e, Direction::Decreasing);
        let (_, y) =
            integrate::section_crossing(&sys, [3.0, 0.5], 0.0, 50.0 / e, sec, &scaling_cfg(e))?;
        out.push((e, y[1] - 1.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    /// Distance to the attracting slow manifold, expected exponent 1.
    pub distance: ScalingFit,
    /// Exit height past the fold, expected exponent 2/3.
    pub fold_exit: ScalingFit,
}

/// Log-log fits of slow-manifold distance and fold-exit height against eps.
/// Uses the checkpoint `n = 0.5` on the right branch and the exit section
/// `E = 1.5` beyond the fold at `(2, 1)`.
pub fn fenichel_distance_scaling(
    p: &KarmaParams,
    eps: &[f64],
) -> Result<ScalingReport, AnalysisError> {
    check_eps_list(eps)?;
    let distance = fit_loglog(slow_manifold_distances(p, eps, 0.5)?)?;
    let fold_exit = fit_loglog(fold_exit_heights(p, eps, 1.5)?)?;
    Ok(ScalingReport {
        distance,
        fold_exit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceReport {
    /// Closest approach of the backward orbit to the interior equilibrium.
    pub min_distance: f64,
    pub target: PhaseState,
    pub reached: bool,
}

/// Follows the stable manifold of the saddle on `n = 0` backward in time and
/// reports whether it reaches the `tol`-neighbourhood of the interior
/// unstable equilibrium (the connection that persists for small eps).
pub fn heteroclinic_persistence(
    p: &KarmaParams,
    tol: f64,
) -> Result<PersistenceReport, AnalysisError> {
    let eq = find_karma_equilibria(p)?;
    let saddle = eq
        .iter()
        .find(|q| q.classification == Classification::Saddle)
        .ok_or(AnalysisError::Construction("no saddle"))?;
    let target = eq
        .iter()
        .find(|q| q.position.fast > 1.0 && !q.classification.is_stable())
        .ok_or(AnalysisError::Construction(
            "no interior unstable equilibrium",
        ))?;
    let s = saddle.position;
    let j = karma_jacobian(s.fast, s.slow, p, s.fast > 1.0);
    // stable eigenvector for the eigenvalue of smallest real part
    let lam = saddle.eigenvalues[1].re.min(saddle.eigenvalues[0].re);
    let v = eigenvector_2x2(&j, lam);
    let norm = math::hypot(v[0], v[1]);
    let mut v = [v[0] / norm, v[1] / norm];
    if v[1] < 0.0 {
        v = [-v[0], -v[1]];
    }
    let off = 1e-7;
    let y0 = [s.fast + off * v[0], s.slow + off * v[1]];
    let sys = KarmaOde::new(*p);
    let cfg = IntegratorConfig::with_tol(1e-10, 1e-12).max_step(0.1 / p.eps);
    let tr = integrate::integrate(&sys, y0, 0.0, -40.0 / p.eps, &cfg)?;
    let tp = target.position;
    let min_distance = tr
        .states
        .iter()
        .map(|y| math::hypot(y[0] - tp.fast, y[1] - tp.slow))
        .fold(f64::INFINITY, f64::min);
    Ok(PersistenceReport {
        min_distance,
        target: tp,
        reached: min_distance < tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Converge {
        to: PhaseState,
    },
    Oscillate {
        amplitude: f64,
    },
    /// Neither clearly settled nor clearly oscillating by the end of the run.
    Undetermined {
        amplitude: f64,
    },
}

/// Late-time behaviour of an ODE trajectory: the fast-variable range over
/// the last `window` fraction of the run.
pub fn classify_regime(times: &[f64], states: &[[f64; 2]], window: f64) -> Regime {
    let t_end = *times.last().unwrap_or(&0.0);
    let t_from = t_end - window * (t_end - times.first().copied().unwrap_or(0.0));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, y) in times.iter().zip(states) {
        if *t >= t_from {
            lo = lo.min(y[0]);
            hi = hi.max(y[0]);
        }
    }
    let amplitude = hi - lo;
    let last = states.last().copied().unwrap_or([f64::NAN; 2]);
    if amplitude < 1e-3 {
        Regime::Converge {
            to: PhaseState::new(last[0], last[1]),
        }
    } else if amplitude > 0.5 {
        Regime::Oscillate { amplitude }
    } else {
        Regime::Undetermined { amplitude }
    }
}

/// Integrates the Karma ODE to `t_end` and classifies the late-time regime.
pub fn karma_regime(p: &KarmaParams, s0: PhaseState, t_end: f64) -> Result<Regime, AnalysisError> {
    let sys = KarmaOde::new(*p);
    let cfg = IntegratorConfig::with_tol(1e-8, 1e-10).max_step(0.5);
    let tr = integrate::integrate(&sys, s0.to_array(), 0.0, t_end, &cfg)?;
    Ok(classify_regime(&tr.times, &tr.states, 0.25))
}

pub fn fhn_regime(p: &FhnParams, s0: PhaseState, t_end: f64) -> Result<Regime, AnalysisError> {
    let sys = FhnOde(*p);
    let cfg = IntegratorConfig::with_tol(1e-8, 1e-10).max_step(0.5);
    let tr = integrate::integrate(&sys, s0.to_array(), 0.0, t_end, &cfg)?;
    Ok(classify_regime(&tr.times, &tr.states, 0.25))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> KarmaParams {
        KarmaParams::default()
    }

    #[test]
    fn manifold_examples() {
        let p = defaults();
        assert!((karma_manifold(2.0, &p).unwrap() - 1.0).abs() < 1e-12);
        let n = karma_manifold(8.0 / 3.0, &p).unwrap();
        assert!((n - math::powf(15.0 / 16.0, 0.25)).abs() < 1e-12);
        assert!(karma_manifold(0.2, &p).is_none());
    }

    #[test]
    fn jacobian_examples() {
        let p = defaults();
        assert!(layer_jacobian(2.0, 1.0, &p).abs() < 1e-12);
        assert_eq!(layer_jacobian(0.0, 0.7, &p), -1.0);
        let e = (3.0 + math::sqrt(6.0)) / 1.5;
        assert!(layer_jacobian(e, 0.0, &p) < 0.0);
    }

    #[test]
    fn samples_satisfy_manifold_equation() {
        for current in [0.0, 0.05, 0.2, 0.5] {
            let p = KarmaParams {
                current,
                ..defaults()
            };
            for s in sample_karma_manifold(&p, 2000) {
                let f = p.fast_reaction(s.e, dispersion(s.n, p.m));
                assert!(f.abs() < 1e-10, "{s:?} {f}");
                assert_eq!(s.branch.attracting(), s.layer_jacobian <= 0.0, "{s:?}");
            }
        }
    }

    #[test]
    fn equilibria_at_zero_current() {
        let p = defaults();
        let eq = find_karma_equilibria(&p).unwrap();
        assert_eq!(eq.len(), 3, "{eq:?}");
        assert!(eq[0].position.norm() < 1e-12 && eq[0].classification.is_stable());
        let saddle_e = (3.0 - math::sqrt(6.0)) / 1.5;
        assert!((eq[1].position.fast - saddle_e).abs() < 1e-12);
        assert_eq!(eq[1].classification, Classification::Saddle);
        let interior = eq[2].position;
        assert!(interior.fast > 1.0);
        assert!((interior.slow - (interior.fast - 1.0) / p.n_b).abs() < 1e-12);
        assert!(matches!(
            eq[2].classification,
            Classification::UnstableNode | Classification::UnstableSpiral
        ));
        assert!(layer_jacobian(interior.fast, interior.slow, &p) > 0.0);
    }

    #[test]
    fn unique_equilibrium_above_i0() {
        let p = KarmaParams {
            current: 0.2,
            ..defaults()
        };
        assert_eq!(find_karma_equilibria(&p).unwrap().len(), 1);
    }

    #[test]
    fn fhn_equilibrium() {
        let eq = find_fhn_equilibria(&FhnParams::default());
        assert_eq!(eq.len(), 1);
        let q = eq[0].position;
        assert!((q.fast + 1.1994).abs() < 1e-4 && (q.slow + 0.6243).abs() < 1e-4);
        assert!(eq[0].classification.is_stable());
    }

    #[test]
    fn fold_curve_examples() {
        let p = defaults();
        let f = fold_curves(0.0, &p).unwrap();
        assert_eq!(f.e_plus, Some(2.0));
        assert_eq!(f.e_minus, Some(0.0));
        let f = fold_curves(4.0 / 9.0, &p).unwrap();
        assert_eq!(f.e_plus, f.e_minus);
        assert!((f.e_plus.unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let f = fold_curves(0.2, &p).unwrap();
        assert!((f.e_plus.unwrap() - 1.8728).abs() < 1e-4);
        assert!((f.e_minus.unwrap() - 0.4271).abs() < 1e-4);
        let f = fold_curves(1.0, &p).unwrap();
        assert!(f.e_plus.is_none());
    }

    #[test]
    fn fold_roots_have_zero_layer_jacobian() {
        let p0 = defaults();
        for k in 1..40 {
            let current = 0.44 * k as f64 / 40.0;
            let p = KarmaParams { current, ..p0 };
            let f = fold_curves(current, &p).unwrap();
            for e in [f.e_plus.unwrap(), f.e_minus.unwrap()] {
                let n_m = manifold_radicand(e, &p);
                let j = -1.0 + (p.e_star - n_m) * p.dh(e);
                assert!(j.abs() < 1e-10, "I={current} E={e} J={j}");
            }
        }
    }

    #[test]
    fn threshold_values() {
        let th = compute_thresholds(&defaults()).unwrap();
        assert!((th.i0 - 0.08718).abs() < 1e-4, "{}", th.i0);
        assert_eq!(th.i1, 4.0 / 9.0);
        assert!((th.e_cusp - 4.0 / 3.0).abs() < 1e-15);
        assert!(th.i2 > 0.0 && th.i2 <= th.i1);
        assert!(th.i0 < th.i1);
    }

    #[test]
    fn saddle_node_at_i0() {
        let th = compute_thresholds(&defaults()).unwrap();
        let below = KarmaParams {
            current: th.i0 - 1e-3,
            ..defaults()
        };
        let above = KarmaParams {
            current: th.i0 + 1e-3,
            ..defaults()
        };
        let count_low = |p: &KarmaParams| {
            find_karma_equilibria(p)
                .unwrap()
                .iter()
                .filter(|q| q.position.fast < 1.0)
                .count()
        };
        assert_eq!(count_low(&below), 2);
        assert_eq!(count_low(&above), 0);
    }

    #[test]
    fn singular_orbit_from_right_side() {
        let orbit = singular_orbit(PhaseState::new(3.0, 0.2), &defaults()).unwrap();
        let kinds: Vec<_> = orbit.segments.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            [
                SegmentKind::Fast,
                SegmentKind::Slow,
                SegmentKind::Fast,
                SegmentKind::Slow
            ]
        );
        assert_eq!(orbit.jump_points.len(), 1);
        assert!(orbit.jump_points[0].dist(&PhaseState::new(2.0, 1.0)) < 1e-3);
        match orbit.end {
            OrbitEnd::Equilibrium(q) => assert!(q.norm() < 1e-9),
            OrbitEnd::Cycle => panic!("expected rest state"),
        }
        // the return runs along E = 0
        assert!(orbit.segments[3].points.iter().all(|q| q.fast.abs() < 1e-9));
    }

    #[test]
    fn singular_orbit_cycles_in_oscillatory_regime() {
        let p = KarmaParams {
            current: 0.2,
            ..defaults()
        };
        let orbit = singular_orbit(PhaseState::new(3.0, 0.2), &p).unwrap();
        assert_eq!(orbit.end, OrbitEnd::Cycle);
        assert!(orbit.jump_points.len() >= 2);
    }

    #[test]
    fn singular_orbit_on_middle_branch_reaches_saddle() {
        let p = defaults();
        let e = 0.6;
        let n = karma_manifold(e, &p).unwrap();
        let orbit = singular_orbit(PhaseState::new(e, n), &p).unwrap();
        let saddle_e = (3.0 - math::sqrt(6.0)) / 1.5;
        match orbit.end {
            OrbitEnd::Equilibrium(q) => assert!((q.fast - saddle_e).abs() < 1e-9),
            OrbitEnd::Cycle => panic!(),
        }
    }

    #[test]
    fn regime_ambiguous_near_threshold() {
        let th = compute_thresholds(&defaults()).unwrap();
        let p = KarmaParams {
            current: th.i0,
            ..defaults()
        };
        assert!(matches!(
            singular_orbit(PhaseState::new(3.0, 0.2), &p),
            Err(AnalysisError::RegimeAmbiguous { .. })
        ));
    }

    #[test]
    fn scaling_needs_four_eps() {
        assert!(matches!(
            fenichel_distance_scaling(&defaults(), &[1e-2]),
            Err(AnalysisError::InsufficientData { .. })
        ));
    }

    #[test]
    fn classify_2x2_cases() {
        assert_eq!(
            classify_2x2(-1.0, 0.0, 0.0, -2.0).1,
            Classification::StableNode
        );
        assert_eq!(classify_2x2(1.0, 0.0, 0.0, -2.0).1, Classification::Saddle);
        assert_eq!(
            classify_2x2(-0.1, -1.0, 1.0, -0.1).1,
            Classification::StableSpiral
        );
        assert_eq!(
            classify_2x2(0.1, -1.0, 1.0, 0.1).1,
            Classification::UnstableSpiral
        );
        assert_eq!(
            classify_2x2(1.0, 0.0, 0.0, 2.0).1,
            Classification::UnstableNode
        );
    }
}
