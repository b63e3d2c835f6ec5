//! Divergences of commuting pairs, computed from their ratio spectrum.

use super::spectrum::{Atom, RatioSpectrum};
use super::Estimate;
use crate::nats::Nats;

/// Work budget (item visits) of the D_min branch and bound.
pub const KNAPSACK_WORK_LIMIT: u64 = 20_000_000;

/// Relative slack on the smoothing budget.
const BUDGET_REL: f64 = 1e-12;
/// Relative pruning tolerance of the branch and bound.
const PRUNE_REL: f64 = 1e-12;

pub fn umegaki(s: &RatioSpectrum) -> Estimate {
    if s.rho_excess > 0.0 {
        return Estimate::exact(Nats::Infinite);
    }
    let v: f64 = s.atoms.iter().map(|a| a.rho_mass * a.mean_log_ratio).sum();
    Estimate::exact(Nats::Finite(v))
}

/// Least `ln t` with `e_eps(t) = r₀ + Σ (p − t q)₊ ≤ ε`, for items
/// `(ln(p/q), p, q)` sorted by log-ratio descending. `None` if `r₀ > ε`.
fn least_log_t<I: Iterator<Item = (f64, f64, f64)>>(items: I, rho_excess: f64, eps: f64) -> Option<f64> {
    if rho_excess > eps * (1.0 + BUDGET_REL) {
        return None;
    }
    let (mut p_sum, mut q_sum) = (rho_excess, 0.0f64);
    for (l, p, q) in items {
        if q_sum > 0.0 && p_sum > eps {
            let root = (p_sum - eps).ln() - q_sum.ln();
            if root > l {
                return Some(root);
            }
        }
        p_sum += p;
        q_sum += q;
    }
    if p_sum > eps && q_sum > 0.0 {
        Some((p_sum - eps).ln() - q_sum.ln())
    } else {
        Some(f64::NEG_INFINITY)
    }
}

pub fn d_max(s: &RatioSpectrum, eps: f64) -> Estimate {
    let items = s.atoms.iter().map(|a| (a.log_ratio, a.rho_mass, a.sigma_mass));
    let lower = match least_log_t(items, s.rho_excess, eps) {
        None => return Estimate::exact(Nats::Infinite),
        Some(l) => l.max(0.0),
    };
    if s.max_displacement() == 0.0 {
        return Estimate::exact(Nats::Finite(lower));
    }
    // Pseudo-atoms (Q·e^hi, Q) dominate every member's contribution.
    let mut pseudo: Vec<(f64, f64, f64)> =
        s.atoms.iter().map(|a| (a.hi, (a.hi + a.sigma_mass.ln()).exp(), a.sigma_mass)).collect();
    pseudo.sort_by(|x, y| y.0.total_cmp(&x.0));
    let upper = least_log_t(pseudo.into_iter(), s.rho_excess, eps).map_or(Nats::Infinite, |l| Nats::Finite(l.max(0.0)));
    Estimate::bracket(Nats::Finite(lower), upper.max(Nats::Finite(lower)))
}

/// Optimal Neyman–Pearson type-II error of the (aggregated) spectrum at
/// type-I error `ε`, with a fractional boundary atom.
fn np_beta(s: &RatioSpectrum, eps: f64) -> f64 {
    let target = (1.0 - eps) * s.total_rho();
    let mut got = s.rho_excess;
    let mut beta = 0.0;
    if got >= target {
        return 0.0;
    }
    for a in &s.atoms {
        if got + a.rho_mass >= target {
            beta += a.sigma_mass * ((target - got) / a.rho_mass).clamp(0.0, 1.0);
            return beta;
        }
        got += a.rho_mass;
        beta += a.sigma_mass;
    }
    beta
}

pub fn d_hyp(s: &RatioSpectrum, eps: f64) -> Estimate {
    let lower = Nats::neg_ln(np_beta(s, eps));
    let w = s.atoms.iter().map(|a| a.hi - a.log_ratio).fold(0.0, f64::max);
    if w == 0.0 {
        Estimate::exact(lower)
    } else {
        Estimate::bracket(lower, lower.add(w))
    }
}

/// `−ln tr(Π_ρ σ)`.
pub fn d_min0(s: &RatioSpectrum) -> Nats {
    Nats::neg_ln(s.atoms.iter().map(|a| a.sigma_mass).sum())
}

struct Item {
    w: f64,
    v: f64,
}

/// Items of the 0/1 covering problem; homogeneous atoms are split into
/// binary pieces so any member count can be kept.
fn items(s: &RatioSpectrum) -> Vec<Item> {
    let mut out = Vec::new();
    if s.rho_excess > 0.0 {
        out.push(Item { w: s.rho_excess, v: 0.0 });
    }
    for a in &s.atoms {
        let c = a.count.round();
        if a.count > 1.0 && a.is_homogeneous() && c < 2f64.powi(62) {
            let (p1, q1) = (a.rho_mass / a.count, a.sigma_mass / a.count);
            let mut left = c as u64;
            let mut k = 1u64;
            while left > 0 {
                let take = k.min(left);
                out.push(Item { w: p1 * take as f64, v: q1 * take as f64 });
                left -= take;
                k *= 2;
            }
        } else {
            out.push(Item { w: a.rho_mass, v: a.sigma_mass });
        }
    }
    // Keep-first order: highest ρ/σ ratio first (free items lead).
    out.sort_by(|x, y| (y.w * x.v).total_cmp(&(x.w * y.v)));
    out
}

/// Least kept σ-mass over item subsets whose ρ-mass covers `need`.
/// Returns `(best, complete)`.
fn min_cover(items: &[Item], need: f64, tol: f64, start: f64, limit: u64) -> (f64, bool) {
    let n = items.len();
    let mut best = start;
    let mut work = 0u64;
    let mut stack = vec![(0usize, need, 0.0f64)];
    while let Some((i, need, kept)) = stack.pop() {
        if need <= tol {
            best = best.min(kept);
            continue;
        }
        if i == n {
            continue;
        }
        // Fractional cover of the remaining requirement bounds the subtree.
        let mut lb = kept;
        let mut left = need;
        let mut j = i;
        while j < n && left > tol {
            let it = &items[j];
            if it.w >= left {
                lb += it.v * (left / it.w);
                left = 0.0;
            } else {
                lb += it.v;
                left -= it.w;
            }
            j += 1;
        }
        work += (j - i) as u64 + 1;
        if work > limit {
            return (best, false);
        }
        if left > tol || lb >= best * (1.0 - PRUNE_REL) {
            continue;
        }
        stack.push((i + 1, need, kept));
        stack.push((i + 1, need - items[i].w, kept + items[i].v));
    }
    (best, true)
}

/// Greedy cover in likelihood order, refined by dropping part of one kept
/// inhomogeneous atom with the leftover budget.
fn greedy_with_partial(s: &RatioSpectrum, budget: f64) -> f64 {
    let target = s.total_rho() - budget;
    let mut covered = s.rho_excess;
    let mut kept = 0.0;
    let mut used: Vec<&Atom> = Vec::new();
    for a in &s.atoms {
        if covered >= target {
            break;
        }
        covered += a.rho_mass;
        kept += a.sigma_mass;
        used.push(a);
    }
    let slack = covered - target;
    let gain = used
        .iter()
        .filter(|a| !a.is_homogeneous())
        .map(|a| (slack.min(a.rho_mass) - a.rho_piece.1).max(0.0) * (-a.hi).exp())
        .fold(0.0, f64::max);
    kept - gain.min(kept)
}

pub fn d_min(s: &RatioSpectrum, eps: f64) -> Estimate {
    let hyp = d_hyp(s, eps);
    if eps == 0.0 {
        return Estimate::exact(d_min0(s));
    }
    let total = s.total_rho();
    let budget = eps * total;
    let items = items(s);
    let need = total - budget;
    let tol = BUDGET_REL * budget + 1e-14 * total;
    let all: f64 = s.atoms.iter().map(|a| a.sigma_mass).sum();
    let (best, complete) = min_cover(&items, need, tol, all, KNAPSACK_WORK_LIMIT);
    let homogeneous = s.atoms.iter().all(Atom::is_homogeneous);
    if complete && homogeneous {
        return Estimate::exact(Nats::neg_ln(best));
    }
    let kept = best.min(greedy_with_partial(s, budget));
    let lower = Nats::neg_ln(kept);
    // The support test is an admissible hypothesis test.
    let upper = if homogeneous { Nats::neg_ln(np_beta(s, eps)) } else { hyp.upper };
    Estimate::bracket(lower.min(upper), upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(p: &[f64], q: &[f64]) -> RatioSpectrum {
        RatioSpectrum::from_probabilities(p, q).unwrap()
    }

    #[test]
    fn identical_states() {
        let s = spec(&[0.1, 0.2, 0.7], &[0.1, 0.2, 0.7]);
        for eps in [0.0, 0.05, 0.3] {
            assert_abs_diff_eq!(d_max(&s, eps).value().to_f64(), 0.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(d_min(&s, 0.05).value().to_f64(), 0.0, epsilon = 1e-14);
        // dropping the two small atoms is within a budget of 0.3
        assert_abs_diff_eq!(d_min(&s, 0.3).value().to_f64(), -(0.7f64).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(umegaki(&s).value().to_f64(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn d_max_closed_form() {
        // p/q ratios 2, 1, 0.5; ε small enough to stay on the top segment
        let s = spec(&[0.4, 0.3, 0.3], &[0.2, 0.3, 0.6]);
        assert_abs_diff_eq!(d_max(&s, 0.0).value().to_f64(), 2f64.ln(), epsilon = 1e-15);
        // t = (0.4 − ε)/0.2
        assert_abs_diff_eq!(d_max(&s, 0.1).value().to_f64(), 1.5f64.ln(), epsilon = 1e-14);
        // beyond the first segment the optimum sits at t = 1 and clamps to 0
        assert_eq!(d_max(&s, 0.25).value().to_f64(), 0.0);
    }

    #[test]
    fn support_mismatch_is_infinite() {
        let s = spec(&[0.5, 0.5], &[1.0, 0.0]);
        assert_eq!(d_max(&s, 0.0).value(), Nats::Infinite);
        assert_eq!(umegaki(&s).value(), Nats::Infinite);
        assert_abs_diff_eq!(d_max(&s, 0.5).value().to_f64(), 0.0, epsilon = 1e-15);
        let s = spec(&[1.0, 0.0], &[0.5, 0.5]);
        assert_abs_diff_eq!(d_min(&s, 0.0).value().to_f64(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn knapsack_beats_likelihood_order() {
        // removing the lowest-ratio atom (ρ .06) blocks the better removal of
        // the next one (ρ .10, σ .4); the budget fits only one of them
        let s = spec(&[0.84, 0.06, 0.10], &[0.3, 0.3, 0.4]);
        let e = d_min(&s, 0.15);
        assert!(e.exact);
        assert_abs_diff_eq!(e.value().to_f64(), -(0.6f64).ln(), epsilon = 1e-14);
        assert!(greedy_with_partial(&s, 0.15) > 0.6 + 1e-3);
    }

    #[test]
    fn homogeneous_atoms_split_into_pieces() {
        // 8 members of mass 1/8 each against uniform σ on 16 outcomes
        let mut p = vec![0.125; 8];
        p.extend(vec![0.0; 8]);
        let q = vec![1.0 / 16.0; 16];
        let s = spec(&p, &q);
        assert_eq!(s.atoms.len(), 1);
        // ε = 0.3 allows dropping two members: kept σ = 6/16
        let e = d_min(&s, 0.3);
        assert!(e.exact);
        assert_abs_diff_eq!(e.value().to_f64(), (16.0f64 / 6.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(d_hyp(&s, 0.3).value().to_f64(), (16.0f64 / (8.0 * 0.7)).ln(), epsilon = 1e-14);
    }

    #[test]
    fn hypothesis_test_at_zero_matches_support_projection() {
        let s = spec(&[0.5, 0.5, 0.0], &[0.2, 0.3, 0.5]);
        assert_abs_diff_eq!(d_hyp(&s, 0.0).value().to_f64(), -(0.5f64).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(d_min0(&s).to_f64(), -(0.5f64).ln(), epsilon = 1e-15);
    }
}
