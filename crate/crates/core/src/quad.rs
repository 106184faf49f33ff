//! Adaptive Simpson quadrature, including the log-spaced altitude driver used
//! for turbulence path integrals.

use crate::{Error, Result};

/// Relative tolerance for altitude integrals.
pub const ALTITUDE_REL_TOL: f64 = 1e-10;
/// Absolute floor below which a sub-interval is considered converged.
pub const ALTITUDE_ABS_FLOOR: f64 = 1e-30;
const MAX_DEPTH: u32 = 48;
const MAX_EVALUATIONS: usize = 1 << 21;
const SEGMENTS_PER_DECADE: f64 = 8.0;

/// Integrates `f` over `[a, b]` with adaptive Simpson refinement.
///
/// Converges when the Richardson error estimate of every leaf interval is
/// below `max(rel_tol * |whole|, abs_floor)`, split evenly among children.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let eps = (rel_tol * whole.abs()).max(abs_floor);
    let mut stats = Stats::default();
    let v = recurse(f, a, b, fa, fm, fb, whole, eps, MAX_DEPTH, &mut stats);
    if stats.unconverged > 0 {
        return Err(Error::Numerical(format!(
            "adaptive Simpson did not converge on [{a:e}, {b:e}]: {} leaf interval(s) unresolved \
             after {} evaluations, worst error estimate {:e} near x = {:e} (target {:e}), value {:e}",
            stats.unconverged, stats.evaluations, stats.worst_err, stats.worst_at, eps, v
        )));
    }
    if !v.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integral on [{a:e}, {b:e}]"
        )));
    }
    Ok(v)
}

#[derive(Default)]
struct Stats {
    unconverged: usize,
    evaluations: usize,
    worst_err: f64,
    worst_at: f64,
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    stats: &mut Stats,
) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    stats.evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    if depth == 0 || stats.evaluations >= MAX_EVALUATIONS {
        stats.unconverged += 1;
        if delta.abs() > stats.worst_err {
            stats.worst_err = delta.abs();
            stats.worst_at = m;
        }
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1, stats)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1, stats)
}

/// Integrates an altitude-dependent integrand over `[lo, hi]` meters.
///
/// The range above 1 m is split on a log-spaced grid (8 segments per decade)
/// because turbulence integrands span many orders of magnitude; anything
/// below 1 m is a single linear segment.
pub fn altitude_integral<F>(f: &F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        return Err(Error::Domain(format!(
            "altitude interval [{lo}, {hi}] is not a valid ascending range of altitudes"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let log_start = lo.max(1.0);
    if lo < log_start {
        let top = log_start.min(hi);
        total += adaptive_simpson(f, lo, top, ALTITUDE_REL_TOL, ALTITUDE_ABS_FLOOR)?;
    }
    if hi > log_start {
        let decades = (hi / log_start).log10();
        let segments = ((decades * SEGMENTS_PER_DECADE).ceil() as usize).max(1);
        let ratio = (hi / log_start).powf(1.0 / segments as f64);
        let mut a = log_start;
        for i in 0..segments {
            let b = if i + 1 == segments { hi } else { a * ratio };
            total += adaptive_simpson(f, a, b, ALTITUDE_REL_TOL, ALTITUDE_ABS_FLOOR)?;
            a = b;
        }
    }
    Ok(total)
}
