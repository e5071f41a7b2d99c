//! Bracketing bisection for monotone scalar equations.

use crate::exp_family::Interval;

pub(crate) const MAX_ITER: usize = 200;
pub(crate) const OBJ_TOL: f64 = 1e-12;

/// Step from `from` toward the upper end of `domain` by `step`, never leaving it.
fn advance_up(domain: &Interval, from: f64, step: f64) -> f64 {
    if domain.hi.is_finite() {
        (from + step).min(from + 0.5 * (domain.hi - from))
    } else {
        from + step
    }
}

fn advance_down(domain: &Interval, from: f64, step: f64) -> f64 {
    if domain.lo.is_finite() {
        (from - step).max(from - 0.5 * (from - domain.lo))
    } else {
        from - step
    }
}

/// Solve `f(x) = target` for increasing `f` on the open interval `domain`, starting
/// the bracket search at `start`. Returns `None` when the target is not attained
/// before the bracket stalls at a domain edge.
pub(crate) fn invert_increasing<F>(f: F, target: f64, domain: &Interval, start: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let f0 = f(start);
    if !f0.is_finite() {
        return None;
    }
    if (f0 - target).abs() <= OBJ_TOL {
        return Some(start);
    }
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    if f0 < target {
        let mut found = false;
        for _ in 0..MAX_ITER {
            let next = advance_up(domain, hi, step);
            if next == hi {
                break;
            }
            lo = hi;
            hi = next;
            step *= 2.0;
            if f(hi) >= target {
                found = true;
                break;
            }
        }
        if !found {
            return None;
        }
    } else {
        let mut found = false;
        for _ in 0..MAX_ITER {
            let next = advance_down(domain, lo, step);
            if next == lo {
                break;
            }
            hi = lo;
            lo = next;
            step *= 2.0;
            if f(lo) <= target {
                found = true;
                break;
            }
        }
        if !found {
            return None;
        }
    }
    Some(bisect(f, target, lo, hi))
}

/// Plain bisection on a bracket `[lo, hi]` with `f(lo) <= target <= f(hi)`.
pub(crate) fn bisect<F>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() <= OBJ_TOL || mid == lo || mid == hi {
            break;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}
