//! Quantum Neyman–Pearson tests for non-commuting pairs.

use nalgebra::DMatrix;

use crate::operator::{eigh, C64};

/// Relative width at which threshold bisections stop.
const REL_WIDTH: f64 = 1e-13;
const MAX_DOUBLINGS: usize = 400;

/// Spectral data of `P₊(a·ρ − b·σ)`: `(tr P₊ρ, tr P₊σ, tr(aρ − bσ)₊)`.
fn positive_part(rho: &DMatrix<C64>, sigma: &DMatrix<C64>, a: f64, b: f64) -> (f64, f64, f64) {
    let m = rho.map(|z| z * a) - sigma.map(|z| z * b);
    let (vals, vecs) = eigh(&m);
    let (mut tr_rho, mut tr_sigma, mut pos) = (0.0, 0.0, 0.0);
    let rv = rho * &vecs;
    let sv = sigma * &vecs;
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= 0.0 {
            break;
        }
        let v = vecs.column(k);
        tr_rho += v.dotc(&rv.column(k)).re;
        tr_sigma += v.dotc(&sv.column(k)).re;
        pos += lam;
    }
    (tr_rho, tr_sigma, pos)
}

struct Probe {
    u: f64,
    tr_rho: f64,
    tr_sigma: f64,
    dual: f64,
}

fn probe(rho: &DMatrix<C64>, sigma: &DMatrix<C64>, u: f64, target: f64) -> Probe {
    let (tr_rho, tr_sigma, pos) = positive_part(rho, sigma, u, 1.0);
    Probe { u, tr_rho, tr_sigma, dual: u * target - pos }
}

/// Bounds on the optimal type-II error.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TypeTwo {
    /// Dual value, a lower bound.
    pub lower: f64,
    /// Value of the interpolated optimal test, an upper bound.
    pub upper: f64,
    /// Type-II error of the projector test `P₊(uρ − σ)` with `tr(P₊ρ) ≥ 1 − ε`.
    pub projector: f64,
}

/// `min tr(Qσ)` over `0 ≤ Q ≤ 1`, `tr(Qρ) ≥ 1 − ε`.
///
/// The optimum is `max_u u(1−ε) − tr(uρ − σ)₊`; the maximizer is bracketed by
/// bisection in `ln u` on the sign of `tr(P₊(uρ−σ)ρ) − (1−ε)`, and the primal
/// test interpolates the two bracketing projectors so that `tr(Qρ) = 1 − ε`.
pub(crate) fn type_two(rho: &DMatrix<C64>, sigma: &DMatrix<C64>, eps: f64) -> TypeTwo {
    let target = 1.0 - eps;
    let feasible = |p: &Probe| p.tr_rho >= target;
    let mut lo = Probe { u: 0.0, tr_rho: 0.0, tr_sigma: 0.0, dual: 0.0 };
    let mut hi = probe(rho, sigma, 1.0, target);
    if feasible(&hi) {
        let mut u = 0.5;
        for _ in 0..MAX_DOUBLINGS {
            let p = probe(rho, sigma, u, target);
            if feasible(&p) {
                hi = p;
                u *= 0.5;
            } else {
                lo = p;
                break;
            }
        }
    } else {
        lo = hi;
        let mut u = 2.0;
        let mut found = None;
        for _ in 0..MAX_DOUBLINGS {
            let p = probe(rho, sigma, u, target);
            if feasible(&p) {
                found = Some(p);
                break;
            }
            lo = p;
            u *= 2.0;
        }
        hi = match found {
            Some(p) => p,
            // Support projector of ρ: tr(Πρ) = 1.
            None => {
                let (tr_rho, tr_sigma, _) = positive_part(rho, sigma, 1.0, 0.0);
                Probe { u: f64::INFINITY, tr_rho, tr_sigma, dual: f64::NEG_INFINITY }
            }
        };
    }
    if hi.u.is_finite() && lo.u > 0.0 {
        while hi.u / lo.u - 1.0 > REL_WIDTH {
            let p = probe(rho, sigma, (lo.u * hi.u).sqrt(), target);
            if feasible(&p) {
                hi = p;
            } else {
                lo = p;
            }
        }
    }
    let c = if hi.tr_rho > lo.tr_rho { ((target - lo.tr_rho) / (hi.tr_rho - lo.tr_rho)).clamp(0.0, 1.0) } else { 1.0 };
    let upper = ((1.0 - c) * lo.tr_sigma + c * hi.tr_sigma).max(0.0);
    let lower = lo.dual.max(hi.dual).max(0.0).min(upper);
    TypeTwo { lower, upper, projector: hi.tr_sigma.max(upper) }
}

/// Largest `ln t` certified infeasible for smoothing: `tr(ρ − tσ)₊ > ε` for
/// all `t` below it (and `t ≥ 1`). `t_cap` is any `t` with `tr(ρ − tσ)₊ ≤ ε`.
pub(crate) fn smoothed_max_lower(rho: &DMatrix<C64>, sigma: &DMatrix<C64>, eps: f64, t_cap: Option<f64>) -> f64 {
    let excess = |t: f64| positive_part(rho, sigma, 1.0, t).2;
    if excess(1.0) <= eps {
        return 0.0;
    }
    let mut lo = 1.0f64;
    let mut hi = match t_cap {
        Some(t) => t.max(1.0),
        None => {
            let mut t = 2.0;
            let mut found = None;
            for _ in 0..MAX_DOUBLINGS {
                if excess(t) <= eps {
                    found = Some(t);
                    break;
                }
                lo = t;
                t *= 2.0;
            }
            match found {
                Some(t) => t,
                None => return lo.ln(),
            }
        }
    };
    if hi <= lo {
        return lo.ln();
    }
    while hi / lo - 1.0 > REL_WIDTH {
        let mid = (lo * hi).sqrt();
        if excess(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo.ln()
}
