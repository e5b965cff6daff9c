//! Brute-force reference computations used to cross-check the fast paths.

use crate::coupling::{find_coupling_window, CouplingSpec, SpecSet};
use crate::error::Result;
use crate::flowsim::{Point, StreamField};
use crate::rulesys::{exact_stationary, site_marginal, Boundary, RuleSet};

/// Latest coupling time before `anchor` by exhaustive enumeration of
/// `(t₋, t₀, t₊)` triples with every time in `[h, anchor.t)`.
pub fn brute_force_coupling_time(
    f: &StreamField,
    spec: &CouplingSpec,
    anchor: Point,
    h: f64,
) -> Option<f64> {
    let y = anchor.x;
    let times = |x: i64, set: SpecSet| -> Vec<f64> {
        let mut v: Vec<f64> = f
            .site_events(x, h)
            .into_iter()
            .filter(|e| e.t < anchor.t && spec.contains(set, e.rule))
            .map(|e| e.t)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let zm = times(y - 1, SpecSet::ZMinus);
    let zpm = times(y - 1, SpecSet::ZPrimeMinus);
    let z0 = times(y, SpecSet::Z0);
    let zp = times(y + 1, SpecSet::ZPlus);
    let zpp = times(y + 1, SpecSet::ZPrimePlus);
    // first blocking time strictly after each candidate
    let next_after = |blocks: &[f64], t: f64| -> f64 {
        let i = blocks.partition_point(|&b| b <= t);
        blocks.get(i).copied().unwrap_or(f64::INFINITY)
    };
    let zm_block: Vec<f64> = zm.iter().map(|&t| next_after(&zpm, t)).collect();
    let zp_block: Vec<f64> = zp.iter().map(|&t| next_after(&zpp, t)).collect();
    let mut best: Option<f64> = None;
    for &t0 in &z0 {
        for (i, &tm) in zm.iter().enumerate() {
            if tm >= t0 || zm_block[i] < t0 {
                continue;
            }
            for (j, &tp) in zp.iter().enumerate() {
                if tp >= t0 || zp_block[j] < t0 {
                    continue;
                }
                let t = tm.min(tp);
                if best.is_none_or(|b| t > b) {
                    best = Some(t);
                }
            }
        }
    }
    best
}

/// `(β₁, N₁)` for `rule` read directly off the streams around `(0, 0)`.
pub fn direct_first_round(f: &StreamField, spec: &CouplingSpec, rule: usize) -> Result<(bool, u64)> {
    let w = find_coupling_window(f, spec, Point::new(0.0, 0), None)?;
    let l1 = w.scan.lambda1;
    let n1 = (-1..=1)
        .map(|x| {
            f.site_events(x, l1)
                .iter()
                .filter(|e| e.rule == rule && e.t >= l1)
                .count() as u64
        })
        .sum();
    Ok((w.scan.beta1, n1))
}

/// Stationary law of a rule set without spatial interaction, solved on
/// one site.
pub fn single_site_stationary(rs: &RuleSet) -> Result<Vec<f64>> {
    exact_stationary(rs, 1, Boundary::Periodic)
}

/// Marginal of `site` under the stationary law of a periodic ring.
pub fn ring_marginal(rs: &RuleSet, n_sites: usize, site: usize) -> Result<Vec<f64>> {
    let joint = exact_stationary(rs, n_sites, Boundary::Periodic)?;
    Ok(site_marginal(&joint, rs.alphabet().len(), n_sites, site))
}
