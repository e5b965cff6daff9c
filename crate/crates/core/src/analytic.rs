//! Closed-form growth parameters, the first-round tree sampler and the
//! explicit total-variation bounds.

use num_rational::Rational64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::coupling::{CouplingSpec, LaplaceEstimate, SpecSet};
use crate::error::{Error, Result};
use crate::rulesys::RuleSet;

/// Aggregate rates `r₀ … r₆` of a coupling spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
}

impl RateSummary {
    pub fn new(r0: f64, r1: f64, r2: f64, r4: f64, r5: f64) -> Self {
        Self {
            r0,
            r1,
            r2,
            r3: r1 + r2,
            r4,
            r5,
            r6: r4 + r5,
        }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.r0, self.r1, self.r2, self.r3, self.r4, self.r5, self.r6]
    }

    /// `E[−λ₁]`: expected length of the first scan round.
    pub fn first_round_length(&self) -> Result<f64> {
        let s = self;
        if !(s.r0 > 0.0 && s.r3 > 0.0 && s.r6 > 0.0) {
            return Err(Error::DegenerateRates(format!(
                "first round needs r0, r3, r6 > 0 (got {}, {}, {})",
                s.r0, s.r3, s.r6
            )));
        }
        Ok(1.0 / s.r0 + (1.0 + s.r1 / s.r6 + s.r4 / s.r3) / (s.r3 + s.r6))
    }
}

pub fn rate_summary(rs: &RuleSet, spec: &CouplingSpec) -> RateSummary {
    let r = |s| spec.rate(rs, s);
    RateSummary::new(
        r(SpecSet::Z0),
        r(SpecSet::ZPlus),
        r(SpecSet::ZPrimePlus),
        r(SpecSet::ZMinus),
        r(SpecSet::ZPrimeMinus),
    )
}

/// `P[β₁ = 1] = r₁r₄ / (r₃r₆)`.
pub fn beta1_probability(s: &RateSummary) -> Result<f64> {
    if !(s.r3 * s.r6 > 0.0) {
        return Err(Error::DegenerateRates(format!(
            "P[beta1] needs r3 * r6 > 0 (got r3 = {}, r6 = {})",
            s.r3, s.r6
        )));
    }
    Ok(s.r1 * s.r4 / (s.r3 * s.r6))
}

/// Where a perturbative rule sits relative to the primed sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    Plain,
    ZPrimePlus,
    ZPrimeMinus,
}

impl Membership {
    pub fn of(spec: &CouplingSpec, rule: usize) -> Self {
        if spec.contains(SpecSet::ZPrimePlus, rule) {
            Membership::ZPrimePlus
        } else if spec.contains(SpecSet::ZPrimeMinus, rule) {
            Membership::ZPrimeMinus
        } else {
            Membership::Plain
        }
    }
}

/// `E[N₁(𝓡)]` for a rule of rate `rate`.
///
/// `N₁` counts the rule's events at the three sites over `[λ₁, 0)`, and
/// `−λ₁` is a stopping time for the backward filtration, so the mean is
/// `3r·E[−λ₁]` whatever the membership: blocked stretches on the primed
/// branches are compensated by the possibility that the blocking event is
/// the rule itself.
pub fn expected_n1(rate: f64, s: &RateSummary, membership: Membership) -> Result<f64> {
    let _ = membership;
    if rate == 0.0 {
        return Ok(0.0);
    }
    Ok(3.0 * rate * s.first_round_length()?)
}

fn perturbative_load(rs: &RuleSet, spec: &CouplingSpec) -> f64 {
    spec.members(SpecSet::P)
        .iter()
        .map(|&i| rs.rate(i) * rs.rule(i).arity() as f64)
        .sum()
}

/// `m = P[β₁ = 1]⁻¹ Σ_{𝓡ᵢ ∈ 𝔓} #Aᵢ · E[N₁(𝓡ᵢ)]`.
pub fn growth_closed_form(rs: &RuleSet, spec: &CouplingSpec) -> Result<f64> {
    if perturbative_load(rs, spec) == 0.0 {
        return Ok(0.0);
    }
    let s = rate_summary(rs, spec);
    let beta = beta1_probability(&s)?;
    if beta == 0.0 {
        return Err(Error::DegenerateRates("P[beta1] = 0".into()));
    }
    let mut total = 0.0;
    for i in spec.members(SpecSet::P) {
        let n1 = expected_n1(rs.rate(i), &s, Membership::of(spec, i))?;
        total += rs.rule(i).arity() as f64 * n1;
    }
    Ok(total / beta)
}

/// `M(𝔷) = r₃r₆/(r₁r₄) · (1/r₀ + (1 + r₁/r₆ + r₄/r₃)/(r₃ + r₆))`.
pub fn m_factor(s: &RateSummary) -> Result<f64> {
    if !(s.r0 > 0.0 && s.r1 > 0.0 && s.r4 > 0.0) {
        return Err(Error::DegenerateRates(format!(
            "M needs r0, r1, r4 > 0 (got {}, {}, {})",
            s.r0, s.r1, s.r4
        )));
    }
    Ok(s.r3 * s.r6 / (s.r1 * s.r4) * s.first_round_length()?)
}

/// `3·M(𝔷)·Σ rᵢ·#Aᵢ`.
pub fn growth_upper_bound(rs: &RuleSet, spec: &CouplingSpec) -> Result<f64> {
    let load = perturbative_load(rs, spec);
    let m = m_factor(&rate_summary(rs, spec))?;
    Ok(if load == 0.0 { 0.0 } else { 3.0 * m * load })
}

fn pow_conv(m: f64, e: f64) -> f64 {
    if m == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        m.powf(e)
    }
}

fn clamp_tv(v: f64) -> f64 {
    if v.is_nan() {
        1.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Explicit total-variation bound between the law at time `t` and
/// equilibrium, projected on `card_b` sites.
///
/// `profile` holds `(λ, Λ_T(λ), Λ_H(λ))` triples.
pub fn theorem_b_bound(
    card_b: usize,
    t: f64,
    m: f64,
    profile: &[(f64, f64, f64)],
    n_max: usize,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    if profile.is_empty() {
        return Err(Error::InvalidArgument("empty Laplace profile".into()));
    }
    let term = |k: usize| -> f64 {
        profile
            .iter()
            .map(|&(l, lt, lh)| pow_conv(lh, k as f64) * lt * (-l * t).exp())
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = f64::INFINITY;
    let mut partial = 0.0;
    for n in 0..=n_max {
        best = best.min(pow_conv(m, n as f64) + partial);
        partial += term(n);
    }
    Ok(clamp_tv(card_b as f64 * best))
}

/// Converts Laplace estimates into `(λ, Λ_T, Λ_H)` triples.
pub fn laplace_profile(est: &[LaplaceEstimate]) -> Vec<(f64, f64, f64)> {
    est.iter()
        .map(|e| (e.lambda, e.lambda_t, e.lambda_h))
        .collect()
}

fn check_decay_inputs(m: f64, a_minus: f64, a_plus: f64, d: f64) -> Result<()> {
    if !(m >= 0.0) {
        return Err(Error::InvalidArgument(format!("m must be >= 0, got {m}")));
    }
    if m >= 1.0 {
        return Err(Error::SupercriticalInput { m });
    }
    if !(a_minus >= 1.0 && a_plus >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "widths must be >= 1, got a- = {a_minus}, a+ = {a_plus}"
        )));
    }
    if !(d >= 1.0) {
        return Err(Error::InvalidArgument(format!("distance must be >= 1, got {d}")));
    }
    Ok(())
}

/// Correlation bound `2m^{κ(d)−1}` with `κ(d) = d/(a₊ + a₋)`.
pub fn theorem_d_pair(m: f64, a_minus: f64, a_plus: f64, d: f64) -> Result<f64> {
    check_decay_inputs(m, a_minus, a_plus, d)?;
    Ok(clamp_tv(2.0 * pow_conv(m, d / (a_plus + a_minus) - 1.0)))
}

/// Half-line bound `m^{κ(x)−1}(1/(1 − m^{1/a₋}) + 1/(1 − m^{1/a₊}))`.
pub fn theorem_d_half_line(m: f64, a_minus: f64, a_plus: f64, gap: f64) -> Result<f64> {
    check_decay_inputs(m, a_minus, a_plus, gap)?;
    let k = gap / (a_plus + a_minus);
    let tail = 1.0 / (1.0 - pow_conv(m, 1.0 / a_minus)) + 1.0 / (1.0 - pow_conv(m, 1.0 / a_plus));
    Ok(clamp_tv(pow_conv(m, k - 1.0) * tail))
}

/// Subcriticality thresholds for Jukes–Cantor with CpG hypermutability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcThresholds {
    pub eps_sen: Rational64,
    pub eps_ins: f64,
}

/// `ε_sen(δ) = 64/(3(40 + 10δ + δ²))` exactly, and the root of
/// `3ε(64 + 12ε + ε²) = 64` in `[0, 1]`.
pub fn jc_cpg_thresholds(delta: Rational64) -> Result<JcThresholds> {
    if delta < Rational64::from_integer(0) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    let q = Rational64::from_integer(40) + delta * 10 + delta * delta;
    let eps_sen = Rational64::from_integer(64) / (q * 3);
    Ok(JcThresholds {
        eps_sen,
        eps_ins: eps_ins(),
    })
}

/// Floating-point `ε_sen(δ)`.
pub fn eps_sen(delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    Ok(64.0 / (3.0 * (40.0 + 10.0 * delta + delta * delta)))
}

fn ins_cubic(e: f64) -> f64 {
    3.0 * e * (64.0 + 12.0 * e + e * e) - 64.0
}

/// Root of the insensitive threshold cubic.
pub fn eps_ins() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = ins_cubic(mid);
        if v.abs() <= 1e-12 {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First-round branch of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeBranch {
    /// `χ₁` at `+1` in `𝔷₊`.
    PlusZ,
    /// `χ₁` at `+1` in `𝔷′₊`.
    PlusPrime,
    /// `χ₁` at `−1` in `𝔷₋`.
    MinusZ,
    /// `χ₁` at `−1` in `𝔷′₋`.
    MinusPrime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeTrace {
    pub kappa1: f64,
    pub chi1: f64,
    pub lambda1: f64,
    pub beta1: bool,
    pub n1: u64,
    pub branch: TreeBranch,
}

fn exp_sample<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite mean").sample(rng) as u64
    }
}

/// Samples `(κ₁, χ₁, λ₁, β₁, N₁)` for one perturbative rule of rate `rate`.
///
/// Poisson multiplicities count how many of the three sites can carry the
/// rule on each stretch; on the primed branches the blocking event itself
/// may be the rule.
pub fn tree_trace_sample<R: Rng + ?Sized>(
    s: &RateSummary,
    rate: f64,
    membership: Membership,
    rng: &mut R,
) -> Result<TreeTrace> {
    if !(s.r0 > 0.0 && s.r3 > 0.0 && s.r6 > 0.0) {
        return Err(Error::DegenerateRates(format!(
            "tree needs r0, r3, r6 > 0 (got {}, {}, {})",
            s.r0, s.r3, s.r6
        )));
    }
    let zpp = membership == Membership::ZPrimePlus;
    let zpm = membership == Membership::ZPrimeMinus;
    let kappa1 = -exp_sample(s.r0, rng);
    let mut n1 = poisson(3.0 * rate * -kappa1, rng);
    let d = exp_sample(s.r3 + s.r6, rng);
    let chi1 = kappa1 - d;
    let c4 = if zpp || zpm { 2.0 } else { 3.0 };
    n1 += poisson(c4 * rate * d, rng);

    let bern = |p: f64, rng: &mut R| rng.random::<f64>() < p;
    let (lambda1, beta1, branch);
    if bern(s.r3 / (s.r3 + s.r6), rng) {
        if bern(s.r1 / s.r3, rng) {
            let e = exp_sample(s.r6, rng);
            lambda1 = chi1 - e;
            n1 += poisson(if zpm { 2.0 } else { 3.0 } * rate * e, rng);
            beta1 = bern(s.r4 / s.r6, rng);
            if zpm && !beta1 && bern(rate / s.r5, rng) {
                n1 += 1;
            }
            branch = TreeBranch::PlusZ;
        } else {
            lambda1 = chi1;
            beta1 = false;
            if zpp && bern(rate / s.r2, rng) {
                n1 += 1;
            }
            branch = TreeBranch::PlusPrime;
        }
    } else if bern(s.r4 / s.r6, rng) {
        let e = exp_sample(s.r3, rng);
        lambda1 = chi1 - e;
        n1 += poisson(if zpp { 2.0 } else { 3.0 } * rate * e, rng);
        beta1 = bern(s.r1 / s.r3, rng);
        if zpp && !beta1 && bern(rate / s.r2, rng) {
            n1 += 1;
        }
        branch = TreeBranch::MinusZ;
    } else {
        lambda1 = chi1;
        beta1 = false;
        if zpm && bern(rate / s.r5, rng) {
            n1 += 1;
        }
        branch = TreeBranch::MinusPrime;
    }
    Ok(TreeTrace {
        kappa1,
        chi1,
        lambda1,
        beta1,
        n1,
        branch,
    })
}

/// Reporting grids for [`bound_report`].
#[derive(Debug, Clone)]
pub struct BoundOptions {
    pub card_b: usize,
    pub n_max: usize,
    pub times: Vec<f64>,
    pub distances: Vec<u32>,
    pub a_minus: f64,
    pub a_plus: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            card_b: 1,
            n_max: 20,
            times: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            distances: vec![4, 5, 6, 8, 12, 16, 24, 32],
            a_minus: 2.0,
            a_plus: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub m: f64,
    pub big_m: Option<f64>,
    pub rates: RateSummary,
    pub theorem_b: Vec<(f64, f64)>,
    pub theorem_d_pair: Vec<(u32, f64)>,
    pub theorem_d_half_line: Vec<(u32, f64)>,
    pub thresholds: Option<JcThresholds>,
}

/// Assembles the bound tables. Correlation rows are omitted when `m ≥ 1`;
/// Total-variation rows need a Laplace profile.
pub fn bound_report(
    rs: &RuleSet,
    spec: &CouplingSpec,
    m: f64,
    profile: &[(f64, f64, f64)],
    opts: &BoundOptions,
    thresholds: Option<JcThresholds>,
) -> Result<BoundReport> {
    let rates = rate_summary(rs, spec);
    let theorem_b = if profile.is_empty() {
        Vec::new()
    } else {
        opts.times
            .iter()
            .map(|&t| Ok((t, theorem_b_bound(opts.card_b, t, m, profile, opts.n_max)?)))
            .collect::<Result<_>>()?
    };
    let (pair, half) = if m < 1.0 {
        let pair = opts
            .distances
            .iter()
            .map(|&d| Ok((d, theorem_d_pair(m, opts.a_minus, opts.a_plus, d as f64)?)))
            .collect::<Result<_>>()?;
        let half = opts
            .distances
            .iter()
            .map(|&d| Ok((d, theorem_d_half_line(m, opts.a_minus, opts.a_plus, d as f64)?)))
            .collect::<Result<_>>()?;
        (pair, half)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(BoundReport {
        m,
        big_m: m_factor(&rates).ok(),
        rates,
        theorem_b,
        theorem_d_pair: pair,
        theorem_d_half_line: half,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::make_sensitive_spec;
    use crate::ypr::{jukes_cantor_cpg, PerturbationSpec, A, C};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn thresholds_exact() {
        assert_eq!(jc_cpg_thresholds(r(0, 1)).unwrap().eps_sen, r(8, 15));
        assert_eq!(jc_cpg_thresholds(r(2, 1)).unwrap().eps_sen, r(1, 3));
        assert_eq!(jc_cpg_thresholds(r(10, 1)).unwrap().eps_sen, r(4, 45));
        let e = eps_ins();
        assert!(ins_cubic(e).abs() <= 1e-12);
        assert!(e > 0.31 && e < 0.32);
        assert!(jc_cpg_thresholds(r(-1, 2)).is_err());
    }

    #[test]
    fn jc_sensitive_summary() {
        let m = jukes_cantor_cpg(2.0, PerturbationSpec::none().with_single(A, C, 0.1))
            .unwrap()
            .compile();
        let spec = make_sensitive_spec(&m).unwrap();
        let s = rate_summary(&m.rules, &spec);
        assert_eq!(s.as_array(), [4.0, 4.0, 2.0, 6.0, 4.0, 2.0, 6.0]);
        assert!((beta1_probability(&s).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        let plain = expected_n1(1.0, &RateSummary::new(4.0, 4.0, 0.0, 4.0, 0.0), Membership::Plain);
        assert!((plain.unwrap() - 15.0 / 8.0).abs() < 1e-15);
        let closed = growth_closed_form(&m.rules, &spec).unwrap();
        assert!((closed - 0.3 * 64.0 / 64.0).abs() < 1e-12);
        assert!((growth_upper_bound(&m.rules, &spec).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn zero_rates() {
        let s = RateSummary::new(1.0, 0.0, 0.0, 1.0, 1.0);
        assert!(matches!(beta1_probability(&s), Err(Error::DegenerateRates(_))));
        assert_eq!(expected_n1(0.0, &s, Membership::Plain).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = RateSummary::new(1.0, 1.0, 1.0, 1.0, 1.0);
        for _ in 0..100 {
            let t = tree_trace_sample(&s, 0.0, Membership::ZPrimePlus, &mut rng).unwrap();
            assert_eq!(t.n1, 0);
            assert!(t.lambda1 <= t.chi1 && t.chi1 < t.kappa1 && t.kappa1 < 0.0);
        }
    }

    #[test]
    fn decay_bounds() {
        assert_eq!(theorem_d_pair(0.5, 2.0, 2.0, 8.0).unwrap(), 1.0);
        assert_eq!(theorem_d_pair(0.0, 2.0, 2.0, 8.0).unwrap(), 0.0);
        assert_eq!(theorem_d_pair(0.3, 2.0, 2.0, 9.0).unwrap(), 2.0 * 0.3f64.powf(9.0 / 4.0 - 1.0));
        assert!(matches!(
            theorem_d_pair(1.0, 2.0, 2.0, 8.0),
            Err(Error::SupercriticalInput { .. })
        ));
        let a = theorem_d_half_line(0.1, 2.0, 2.0, 12.0).unwrap();
        let b = theorem_d_half_line(0.1, 2.0, 2.0, 16.0).unwrap();
        assert!(b < a && a <= 1.0);
        assert_eq!(theorem_d_pair(0.0, 2.0, 2.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn theorem_b_edge_cases() {
        let profile: [(f64, f64, f64); 3] = [(0.0, 1.0, 0.0), (0.5, 1.5, 0.0), (1.0, 3.0, 0.0)];
        let t: f64 = 4.0;
        let direct = profile
            .iter()
            .map(|&(l, lt, _)| lt * (-l * t).exp())
            .fold(f64::INFINITY, f64::min);
        let b = theorem_b_bound(2, t, 0.0, &profile, 1).unwrap();
        assert!((b - (2.0 * direct).min(1.0)).abs() < 1e-15);
        assert_eq!(theorem_b_bound(1, 0.0, 0.5, &profile, 5).unwrap(), 1.0);
        let mut prev = 1.0;
        for t in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let v = theorem_b_bound(1, t, 0.2, &[(0.0, 1.0, 0.2), (1.0, 2.0, 0.4)], 10).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }
}
