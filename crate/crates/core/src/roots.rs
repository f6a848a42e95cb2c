//! Scalar root finding: Brent's method, grid bracketing and real polynomial roots.

use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("no sign change on [{a}, {b}] (f(a) = {fa}, f(b) = {fb})")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("no convergence after {iterations} iterations, last bracket [{a}, {b}]")]
    NoConvergence { iterations: usize, a: f64, b: f64 },
    #[error("function returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Brent's method on `[a, b]`. `xtol` is the absolute width at which the
/// bracket is considered converged.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { a, b, fa, fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite { x: b });
        }
    }
    Err(RootError::NoConvergence {
        iterations: max_iter,
        a: b,
        b: c,
    })
}

/// Sub-intervals of a uniform grid on `[lo, hi]` where `f` changes sign.
/// Grid points where `f` is exactly zero are returned as degenerate brackets.
pub fn bracket_sign_changes<F>(mut f: F, lo: f64, hi: f64, cells: usize) -> Vec<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut out = Vec::new();
    let h = (hi - lo) / cells as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    if f0 == 0.0 {
        out.push((x0, x0));
    }
    for i in 1..=cells {
        let x1 = if i == cells { hi } else { lo + h * i as f64 };
        let f1 = f(x1);
        if f1 == 0.0 {
            out.push((x1, x1));
        } else if f0 != 0.0 && f0.is_finite() && f1.is_finite() && f0.signum() != f1.signum() {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// All sign-change roots of `f` on `[lo, hi]`, located by grid scan and Brent.
pub fn scan_roots<F>(mut f: F, lo: f64, hi: f64, cells: usize, xtol: f64) -> Vec<f64>
where
    F: FnMut(f64) -> f64,
{
    let brackets = bracket_sign_changes(&mut f, lo, hi, cells);
    let mut roots: Vec<f64> = Vec::with_capacity(brackets.len());
    for (a, b) in brackets {
        let r = if a == b {
            a
        } else {
            match brent(&mut f, a, b, xtol, 200) {
                Ok(r) => r,
                Err(_) => continue,
            }
        };
        if roots.last().is_none_or(|&last| (r - last).abs() > xtol) {
            roots.push(r);
        }
    }
    roots
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, ascending, polished by Newton.
/// Degenerate leading coefficients fall back to the quadratic/linear case.
/// Double roots are returned once.
pub fn real_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = if c3.abs() <= 1e-14 * scale {
        real_quadratic_roots(c2, c1, c0)
    } else {
        // depressed cubic t^3 + p t + q with x = t - b/3
        let b = c2 / c3;
        let c = c1 / c3;
        let d = c0 / c3;
        let p = c - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
        let shift = -b / 3.0;
        let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
        let pscale = p.abs().max(q.abs()).max(1.0);
        if disc.abs() <= 1e-14 * pscale * pscale {
            // repeated root
            if p.abs() <= 1e-14 * pscale {
                alloc::vec![shift]
            } else {
                let u = math::cbrt(-q / 2.0);
                let mut r = alloc::vec![2.0 * u + shift, -u + shift];
                r.sort_by(|a, b| a.total_cmp(b));
                r
            }
        } else if disc > 0.0 {
            let sq = math::sqrt(disc);
            let u = math::cbrt(-q / 2.0 + sq);
            let v = math::cbrt(-q / 2.0 - sq);
            alloc::vec![u + v + shift]
        } else {
            let r = math::sqrt(-p / 3.0);
            let phi = libm::acos((-q / 2.0) / (r * r * r)).clamp(0.0, core::f64::consts::PI);
            let mut v: Vec<f64> = (0..3)
                .map(|k| {
                    2.0 * r * math::cos((phi + 2.0 * core::f64::consts::PI * k as f64) / 3.0)
                        + shift
                })
                .collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v
        }
    };
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((c3 * *r + c2) * *r + c1) * *r + c0;
            let df = (3.0 * c3 * *r + 2.0 * c2) * *r + c1;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs().max(1.0));
    roots
}

/// Real roots of `a x^2 + b x + c`, ascending.
pub fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return Vec::new();
        }
        return alloc::vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc > -1e-14 * b * b {
            return alloc::vec![-b / (2.0 * a)];
        }
        return Vec::new();
    }
    let sq = math::sqrt(disc);
    // numerically stable form
    let q = -0.5 * (b + sq.copysign(b));
    let mut r = if q == 0.0 {
        alloc::vec![0.0, 0.0]
    } else {
        alloc::vec![q / a, c / q]
    };
    r.sort_by(|x, y| x.total_cmp(y));
    r.dedup();
    r
}
