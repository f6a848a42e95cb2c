//! Model definitions: parameters, reaction terms and right-hand sides.
//!
//! The Karma model is stored in the rescaled form used throughout the crate:
//!
//! ```text
//! E' = D E_xx - E + (E* - n^M) h(E) + I
//! n' = eps (max(E - 1, 0) / n_B - n)
//! ```
//!
//! with `h(E) = 2 (E^2 - delta E^3)` for the cubic reaction. The older
//! formulations are available through [`Karma94Params`], [`karma94_rhs`] and
//! [`karma93_rhs`].

use crate::math;
use crate::roots;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("tangency condition violated: f_E and df_E/dE have no common zero (closest |f_E| = {closest})")]
    ConditionViolated { closest: f64 },
}

/// Reaction nonlinearity `h(E)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reaction {
    /// `2 (E^2 - delta E^3)`, the Taylor expansion of the tanh form at `E = 3`.
    #[default]
    Cubic,
    /// `(1 - tanh(E - 3)) E^2 / 2`.
    Tanh93,
}

impl Reaction {
    pub fn name(self) -> &'static str {
        match self {
            Reaction::Cubic => "cubic",
            Reaction::Tanh93 => "tanh93",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "cubic" => Some(Reaction::Cubic),
            "tanh93" => Some(Reaction::Tanh93),
            _ => None,
        }
    }

    #[inline]
    pub fn h(self, e: f64, delta: f64) -> f64 {
        match self {
            Reaction::Cubic => 2.0 * e * e * (1.0 - delta * e),
            Reaction::Tanh93 => (1.0 - math::tanh(e - 3.0)) * e * e / 2.0,
        }
    }

    #[inline]
    pub fn dh(self, e: f64, delta: f64) -> f64 {
        match self {
            Reaction::Cubic => 2.0 * e * (2.0 - 3.0 * delta * e),
            Reaction::Tanh93 => {
                let t = math::tanh(e - 3.0);
                (1.0 - t) * e - (1.0 - t * t) * e * e / 2.0
            }
        }
    }
}

/// `max(x, 0)`.
#[inline]
pub fn rectifier(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `h(E)` with the fixed cubic coefficient `delta = 1/4`.
pub fn reaction_h(e: f64, variant: Reaction) -> f64 {
    variant.h(e, 0.25)
}

/// Restitution map `(1 - (1 - e^{-Re}) n) / (1 - e^{-Re})`.
pub fn restitution(n: f64, re: f64) -> Result<f64, ModelError> {
    if !(re > 0.0) {
        return Err(ModelError::Domain("restitution requires Re > 0"));
    }
    let nb = 1.0 - math::exp(-re);
    Ok((1.0 - nb * n) / nb)
}

/// Dispersion `n^M`.
#[inline]
pub fn dispersion(n: f64, m: u32) -> f64 {
    math::powi(n, m)
}

/// `n^M` with `n` clamped to be non-negative. The flag reports whether the
/// clamp was needed.
#[inline]
pub fn dispersion_clamped(n: f64, m: u32) -> (f64, bool) {
    if n < 0.0 {
        (0.0, true)
    } else {
        (math::powi(n, m), false)
    }
}

/// A point in the phase plane: `(E, n)` for Karma, `(v, w)` for FitzHugh-Nagumo.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState {
    pub fast: f64,
    pub slow: f64,
}

impl PhaseState {
    pub const fn new(fast: f64, slow: f64) -> Self {
        Self { fast, slow }
    }

    pub fn norm(&self) -> f64 {
        math::hypot(self.fast, self.slow)
    }

    pub fn dist(&self, other: &PhaseState) -> f64 {
        math::hypot(self.fast - other.fast, self.slow - other.slow)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.fast, self.slow]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn is_finite(&self) -> bool {
        self.fast.is_finite() && self.slow.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarmaParams {
    pub eps: f64,
    pub diff: f64,
    pub m: u32,
    pub n_b: f64,
    pub current: f64,
    pub e_star: f64,
    pub delta: f64,
    pub reaction: Reaction,
}

impl Default for KarmaParams {
    fn default() -> Self {
        Self {
            eps: 0.01,
            diff: 1.0,
            m: 4,
            n_b: 0.5,
            current: 0.0,
            e_star: 1.5,
            delta: 0.25,
            reaction: Reaction::Cubic,
        }
    }
}

impl KarmaParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.eps > 0.0) {
            return Err(ModelError::Domain("eps must be positive"));
        }
        if !(self.diff >= 0.0) {
            return Err(ModelError::Domain("D must be non-negative"));
        }
        if self.m == 0 {
            return Err(ModelError::Domain("M must be at least 1"));
        }
        if !(self.n_b > 0.0) {
            return Err(ModelError::Domain("n_B must be positive"));
        }
        if !self.current.is_finite() || !self.e_star.is_finite() || !self.delta.is_finite() {
            return Err(ModelError::Domain("I, E_star and delta must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn h(&self, e: f64) -> f64 {
        self.reaction.h(e, self.delta)
    }

    #[inline]
    pub fn dh(&self, e: f64) -> f64 {
        self.reaction.dh(e, self.delta)
    }

    /// Fast reaction `-E + (E* - nM) h(E) + I` for a given value of `n^M`.
    #[inline]
    pub fn fast_reaction(&self, e: f64, n_m: f64) -> f64 {
        -e + (self.e_star - n_m) * self.h(e) + self.current
    }

    /// Slow reaction divided by eps: `max(E - 1, 0) / n_B - n`.
    #[inline]
    pub fn slow_reaction(&self, e: f64, n: f64) -> f64 {
        rectifier(e - 1.0) / self.n_b - n
    }
}

/// Karma reaction field (no diffusion).
#[inline]
pub fn karma_rhs(s: PhaseState, p: &KarmaParams) -> PhaseState {
    karma_rhs_checked(s, p).0
}

/// Karma reaction field; the flag is set when `n < 0` had to be clamped
/// before raising it to the power `M`.
#[inline]
pub fn karma_rhs_checked(s: PhaseState, p: &KarmaParams) -> (PhaseState, bool) {
    let (n_m, clamped) = dispersion_clamped(s.slow, p.m);
    (
        PhaseState::new(
            p.fast_reaction(s.fast, n_m),
            p.eps * p.slow_reaction(s.fast, s.slow),
        ),
        clamped,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    pub eps: f64,
    pub diff: f64,
    pub a: f64,
    pub b: f64,
    pub current: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            eps: 0.01,
            diff: 1.0,
            a: 0.7,
            b: 0.8,
            current: 0.0,
        }
    }
}

impl FhnParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.eps > 0.0) {
            return Err(ModelError::Domain("eps must be positive"));
        }
        if !(self.diff >= 0.0) {
            return Err(ModelError::Domain("D must be non-negative"));
        }
        if !self.a.is_finite() || !self.b.is_finite() || !self.current.is_finite() {
            return Err(ModelError::Domain("a, b and I must be finite"));
        }
        Ok(())
    }

    /// True when `0 < b < 1` and `1 - 2b/3 < a < 1`.
    pub fn in_standard_regime(&self) -> bool {
        self.b > 0.0 && self.b < 1.0 && self.a > 1.0 - 2.0 * self.b / 3.0 && self.a < 1.0
    }
}

#[inline]
pub fn fhn_rhs(s: PhaseState, p: &FhnParams) -> PhaseState {
    let v = s.fast;
    let w = s.slow;
    PhaseState::new(
        v - v * v * v / 3.0 - w + p.current,
        p.eps * (v + p.a - p.b * w),
    )
}

/// Parameters of the 1994 formulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Karma94Params {
    pub tau_e: f64,
    pub tau_n: f64,
    pub gamma: f64,
    pub re: f64,
    pub m: u32,
    pub e_star: f64,
    pub delta: f64,
    pub reaction: Reaction,
}

impl Default for Karma94Params {
    fn default() -> Self {
        Self {
            tau_e: 1.0,
            tau_n: 100.0,
            gamma: 1e-4,
            re: core::f64::consts::LN_2,
            m: 4,
            e_star: 1.5,
            delta: 0.25,
            reaction: Reaction::Cubic,
        }
    }
}

impl Karma94Params {
    pub fn n_b(&self) -> f64 {
        1.0 - math::exp(-self.re)
    }
}

/// Rescaled parameters equivalent to a 1994 parameter set.
///
/// `eps = tau_E / tau_n`, `n_B = 1 - e^{-Re}`, `D = gamma tau_E`. With
/// `tau_E = 1` and `gamma = eps^2` the diffusion coefficient is `eps^2`.
pub fn rescale_94_to_93(q: &Karma94Params) -> Result<KarmaParams, ModelError> {
    if q.tau_n == 0.0 {
        return Err(ModelError::Domain("tau_n must be nonzero"));
    }
    if !(q.tau_e > 0.0) || !(q.tau_n > 0.0) {
        return Err(ModelError::Domain("time constants must be positive"));
    }
    if !(q.re > 0.0) {
        return Err(ModelError::Domain("Re must be positive"));
    }
    Ok(KarmaParams {
        eps: q.tau_e / q.tau_n,
        diff: q.gamma * q.tau_e,
        m: q.m,
        n_b: q.n_b(),
        current: 0.0,
        e_star: q.e_star,
        delta: q.delta,
        reaction: q.reaction,
    })
}

/// 1994 reaction field in its own time and gate variable.
///
/// `n' = (R(n) H - (1 - H) n) / tau_n` with `H = max(E - 1, 0)`.
pub fn karma94_rhs(s: PhaseState, q: &Karma94Params) -> Result<PhaseState, ModelError> {
    let (n_m, _) = dispersion_clamped(s.slow, q.m);
    let e = s.fast;
    let hh = rectifier(e - 1.0);
    let r = restitution(s.slow, q.re)?;
    Ok(PhaseState::new(
        (-e + (q.e_star - n_m) * q.reaction.h(e, q.delta)) / q.tau_e,
        (r * hh - (1.0 - hh) * s.slow) / q.tau_n,
    ))
}

/// 1993 reaction field in slow time with the unnormalized gate `n93 = n_B n`.
///
/// `eps E' = -E + (E* - (n93/n_B)^M) h(E) + I`, `n93' = max(E - 1, 0) - n93`.
pub fn karma93_rhs(s: PhaseState, p: &KarmaParams) -> PhaseState {
    let (n_m, _) = dispersion_clamped(s.slow / p.n_b, p.m);
    PhaseState::new(
        p.fast_reaction(s.fast, n_m) / p.eps,
        rectifier(s.fast - 1.0) - s.slow,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstarTangency {
    pub e_tangent: f64,
    /// `(f_E, df_E/dE)` at `e_tangent`.
    pub residuals: (f64, f64),
}

/// Checks that `f_E(E) = -E + (E* - 1) h(E)` has a double zero for some
/// `E > 0`, i.e. that the fold of the critical manifold sits at `n^M = 1`.
/// Evaluated at `I = 0`.
pub fn check_estar_condition(p: &KarmaParams) -> Result<EstarTangency, ModelError> {
    let k = p.e_star - 1.0;
    let f = |e: f64| -e + k * p.h(e);
    let df = |e: f64| -1.0 + k * p.dh(e);
    let hi = search_limit(p.reaction, p.delta);
    let candidates = roots::scan_roots(df, 1e-6, hi, 2000, 1e-15);
    let mut best: Option<(f64, f64)> = None;
    for e in candidates {
        let r = f(e).abs();
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((e, r));
        }
    }
    match best {
        Some((e, r)) if r < 1e-9 * e.max(1.0) => Ok(EstarTangency {
            e_tangent: e,
            residuals: (f(e), df(e)),
        }),
        Some((_, r)) => Err(ModelError::ConditionViolated { closest: r }),
        None => Err(ModelError::ConditionViolated {
            closest: f64::INFINITY,
        }),
    }
}

/// Solves the tangency condition for `E*`: returns `(E_tangent, E*)` such that
/// `-E + (E* - 1) h(E)` has a double zero at `E_tangent`.
pub fn fit_estar(reaction: Reaction, delta: f64) -> Result<(f64, f64), ModelError> {
    // eliminating E* leaves E h'(E) = h(E)
    let g = |e: f64| e * reaction.dh(e, delta) - reaction.h(e, delta);
    let hi = search_limit(reaction, delta);
    let roots = roots::scan_roots(g, 1e-3, hi, 4000, 1e-15);
    let e = roots
        .into_iter()
        .find(|&e| reaction.h(e, delta) > 0.0)
        .ok_or(ModelError::ConditionViolated {
            closest: f64::INFINITY,
        })?;
    Ok((e, 1.0 + e / reaction.h(e, delta)))
}

fn search_limit(reaction: Reaction, delta: f64) -> f64 {
    match reaction {
        Reaction::Cubic if delta > 0.0 => 1.0 / delta,
        _ => 10.0,
    }
}
