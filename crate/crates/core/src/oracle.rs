//! Brute-force reference computations for small classical inputs.
//!
//! Every routine here is exponential or grid-based and meant for dimensions
//! up to about 6. They share no code with the production solvers.

use crate::error::{Error, Result};
use crate::thermo::feasible_with_work;

/// Probabilities below this count as zero.
const ZERO: f64 = 1e-15;
/// Slack on the removed-mass constraint.
const MASS_SLACK: f64 = 1e-12;

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::ShapeError("probability vectors of different lengths".into()));
    }
    if p.len() > 20 {
        return Err(Error::DimensionLimit { dim: p.len(), limit: 20 });
    }
    Ok(())
}

/// `max −ln q(S)` over index sets `S` with `p(S) ≥ 1 − ε`, by enumeration.
pub fn d_min_subsets(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    check_pair(p, q)?;
    let d = p.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << d) {
        let (mut ps, mut qs) = (0.0, 0.0);
        for i in 0..d {
            if mask >> i & 1 == 1 {
                ps += p[i];
                qs += q[i];
            }
        }
        if ps >= 1.0 - eps - MASS_SLACK {
            best = best.max(if qs > 0.0 { -qs.ln() } else { f64::INFINITY });
        }
    }
    Ok(best)
}

/// Least `λ ≥ 0`, at the given resolution, with `Σ (p − e^λ q)₊ ≤ ε`.
pub fn d_max_grid(p: &[f64], q: &[f64], eps: f64, resolution: f64) -> Result<f64> {
    check_pair(p, q)?;
    let excess = |lam: f64| -> f64 { p.iter().zip(q).map(|(a, b)| (a - lam.exp() * b).max(0.0)).sum() };
    let null: f64 = p.iter().zip(q).filter(|(_, &b)| b <= ZERO).map(|(a, _)| a).sum();
    if null > eps + MASS_SLACK {
        return Ok(f64::INFINITY);
    }
    if excess(0.0) <= eps {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while excess(hi) > eps {
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if excess(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `−ln β_ε` from the dual `max_u u(1 − ε) − Σ (u p − q)₊`, evaluated at every
/// likelihood-ratio threshold `u = q_i / p_i`.
pub fn d_hyp_thresholds(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    check_pair(p, q)?;
    let dual = |u: f64| -> f64 { u * (1.0 - eps) - p.iter().zip(q).map(|(a, b)| (u * a - b).max(0.0)).sum::<f64>() };
    let mut best: f64 = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > ZERO {
            best = best.max(dual(b / a));
        }
    }
    Ok(if best > 0.0 { -best.ln() } else { f64::INFINITY })
}

/// `min(p, t g)` with the clipped mass poured into the remaining room, or
/// `None` when it does not fit.
fn clip_and_fill(p: &[f64], g: &[f64], t: f64) -> Option<Vec<f64>> {
    let mut out: Vec<f64> = p.iter().zip(g).map(|(a, b)| a.min(t * b)).collect();
    let mut left: f64 = 1.0 - out.iter().sum::<f64>();
    for (o, b) in out.iter_mut().zip(g) {
        let room = (t * b - *o).max(0.0);
        let add = room.min(left);
        *o += add;
        left -= add;
    }
    (left <= MASS_SLACK).then_some(out)
}

fn trace_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Least battery drop `k·step` for which `γ → ρ̃` is feasible with some
/// `ρ̃` within trace distance ε of `ρ` (approximant built by clipping at
/// `e^{βW} g`).
pub fn formation_by_battery(p: &[f64], g: &[f64], beta: f64, eps: f64, step: f64) -> Result<f64> {
    check_pair(p, g)?;
    let ok = |k: u64| -> Result<bool> {
        let w = k as f64 * step;
        match clip_and_fill(p, g, (beta * w).exp()) {
            Some(t) if trace_distance(&t, p) <= eps + MASS_SLACK => feasible_with_work(g, g, &t, g, beta, w),
            _ => Ok(false),
        }
    };
    let mut hi = 1u64;
    while !ok(hi)? {
        hi *= 2;
        if hi > 1 << 40 {
            return Ok(f64::INFINITY);
        }
    }
    if ok(0)? {
        return Ok(0.0);
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 * step)
}

/// Largest battery raise `k·step` for which `ρ̃ → γ` is feasible, over all
/// renormalized restrictions `ρ̃` of `ρ` that drop at most ε of its mass.
pub fn distillation_by_battery(p: &[f64], g: &[f64], beta: f64, eps: f64, step: f64) -> Result<f64> {
    check_pair(p, g)?;
    let d = p.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << d) {
        let kept: f64 = (0..d).filter(|&i| mask >> i & 1 == 1).map(|i| p[i]).sum();
        if kept < 1.0 - eps - MASS_SLACK || kept <= 0.0 {
            continue;
        }
        let t: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { p[i] / kept } else { 0.0 }).collect();
        let ok = |k: u64| feasible_with_work(&t, g, g, g, beta, -(k as f64) * step);
        if !ok(0)? {
            continue;
        }
        let mut lo = 0u64;
        let mut hi = 1u64;
        while ok(hi)? {
            lo = hi;
            hi *= 2;
            if hi > 1 << 40 {
                return Ok(f64::INFINITY);
            }
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ok(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.max(lo as f64 * step);
    }
    Ok(best)
}
