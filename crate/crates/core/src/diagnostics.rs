//! Self-checking suites that compare fast paths against their oracles.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::{self, Membership};
use crate::coupling::{
    ambiguity_closure, find_coupling_window, make_sensitive_spec, resolve,
    sample_batch, sample_windows, CouplingOptions, CouplingSpec, SpecSet,
};
use crate::error::{Error, Result};
use crate::flowsim::{
    influence_closure, replica_seed, simulate_forward, EventKey, Flow, PerfOverrides, Point,
    StreamField,
};
use crate::oracle;
use crate::rulesys::{Boundary, RuleSet, SparseConfig, State, WindowConfig};
use crate::stats::{empirical, mean_se, proportion_se, tv_distance};
use crate::ypr::{jukes_cantor_cpg, PerturbationSpec, A, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Flow,
    Coupling,
    Analytic,
    Tree,
    Stationary,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Flow,
        Suite::Coupling,
        Suite::Analytic,
        Suite::Tree,
        Suite::Stationary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Flow => "flow",
            Suite::Coupling => "coupling",
            Suite::Analytic => "analytic",
            Suite::Tree => "tree",
            Suite::Stationary => "stationary",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown suite `{s}` (expected flow, coupling, analytic, tree or stationary)"
                ))
            })
    }
}

/// One measured quantity and its acceptance test.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn exact(name: impl Into<String>, value: f64, reference: f64) -> Self {
        Self {
            name: name.into(),
            value,
            se: None,
            reference,
            tolerance: 0.0,
            pass: value == reference,
        }
    }

    fn within(name: impl Into<String>, value: f64, se: Option<f64>, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            se,
            reference,
            tolerance,
            pass: (value - reference).abs() <= tolerance,
        }
    }

    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            se: None,
            reference: limit,
            tolerance: 0.0,
            pass: value <= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Inputs shared by every suite.
pub struct SuiteInput<'a> {
    pub rules: Arc<RuleSet>,
    pub spec: &'a CouplingSpec,
    pub seed: u64,
    /// Monte Carlo sample size; suites scale their own counts from it.
    pub samples: usize,
}

pub fn run_suite(suite: Suite, input: &SuiteInput<'_>) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Flow => flow_suite(input)?,
        Suite::Coupling => coupling_suite(input)?,
        Suite::Analytic => analytic_suite(input)?,
        Suite::Tree => tree_suite(input)?,
        Suite::Stationary => stationary_suite(input)?,
    };
    Ok(SuiteReport { suite, checks })
}

/// Mismatch counts `(semigroup, perf query order)` on one seeded instance.
pub fn flow_exactness_instance(rs: &Arc<RuleSet>, seed: u64) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = StreamField::new(rs.clone(), seed);
    let q = rs.alphabet().len() as u8;
    let u = -rng.random_range(1.0..4.0);
    let s = u * rng.random_range(0.2..0.8);
    let mut xi = SparseConfig::new(State(0));
    for z in -12..=12 {
        xi.states.insert(z, State(rng.random_range(0..q)));
    }
    let none = PerfOverrides::new();
    let mut semigroup = 0;
    let mut order = 0;
    for x in -2..=2 {
        let t = s * rng.random_range(0.0..1.0);
        let direct = Flow::new(&f, &xi, u, &none).at(t, x)?;
        let mut zeta = SparseConfig::new(State(q - 1));
        let mut mid = Flow::new(&f, &xi, u, &none);
        for p in influence_closure(&f, s, t, x) {
            zeta.states.insert(p.x, mid.at(s, p.x)?);
        }
        let composed = Flow::new(&f, &zeta, s, &none).at(t, x)?;
        if composed != direct {
            semigroup += 1;
        }
    }
    let events: Vec<EventKey> = (-2..=2)
        .flat_map(|x| {
            f.site_events(x, u)
                .into_iter()
                .filter(|e| e.t > u)
                .map(move |e| e.key(x))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut warm = Flow::new(&f, &xi, u, &none);
    for x in -3..=3 {
        warm.before(0.0, x)?;
    }
    for e in events.iter().rev().take(40) {
        let fresh = Flow::new(&f, &xi, u, &none).performed(e)?;
        if warm.performed(e)? != fresh {
            order += 1;
        }
    }
    Ok((semigroup, order))
}

fn flow_suite(input: &SuiteInput<'_>) -> Result<Vec<Check>> {
    let n = 100;
    let counts: Vec<(usize, usize)> = (0..n as u64)
        .into_par_iter()
        .map(|i| flow_exactness_instance(&input.rules, replica_seed(input.seed, i)))
        .collect::<Result<_>>()?;
    let semigroup: usize = counts.iter().map(|c| c.0).sum();
    let order: usize = counts.iter().map(|c| c.1).sum();
    Ok(vec![
        Check::exact("semigroup_mismatches", semigroup as f64, 0.0),
        Check::exact("perf_order_mismatches", order as f64, 0.0),
    ])
}

/// Outcome of one assertion-mode resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssertionOutcome {
    Clean,
    DualStart,
    Width,
}

pub fn assertion_replicate(rs: &Arc<RuleSet>, spec: &CouplingSpec, seed: u64) -> Result<AssertionOutcome> {
    let opts = CouplingOptions {
        assertion: true,
        force: true,
        ..CouplingOptions::default()
    };
    let f = StreamField::new(rs.clone(), seed);
    let g = ambiguity_closure(&f, spec, 0, &opts)?;
    match resolve(&f, spec, &g, &opts) {
        Ok(_) => Ok(AssertionOutcome::Clean),
        Err(Error::DualStartMismatch { .. }) => Ok(AssertionOutcome::DualStart),
        Err(Error::WidthViolation(_)) => Ok(AssertionOutcome::Width),
        Err(e) => Err(e),
    }
}

/// Whether the scan and the brute-force enumeration agree on one horizon.
pub fn scan_agrees_with_brute_force(rs: &Arc<RuleSet>, spec: &CouplingSpec, seed: u64, horizon: f64) -> bool {
    let f = StreamField::new(rs.clone(), seed);
    let anchor = Point::new(0.0, 0);
    let scan = find_coupling_window(&f, spec, anchor, Some(horizon)).ok().map(|w| w.t);
    scan == oracle::brute_force_coupling_time(&f, spec, anchor, -horizon)
}

fn coupling_suite(input: &SuiteInput<'_>) -> Result<Vec<Check>> {
    let n = input.samples.clamp(1, 1000);
    let outcomes: Vec<AssertionOutcome> = (0..n as u64)
        .into_par_iter()
        .map(|i| assertion_replicate(&input.rules, input.spec, replica_seed(input.seed, i)))
        .collect::<Result<_>>()?;
    let dual = outcomes.iter().filter(|&&o| o == AssertionOutcome::DualStart).count();
    let width = outcomes.iter().filter(|&&o| o == AssertionOutcome::Width).count();
    let horizon = 8.0 / input.spec.rate(&input.rules, SpecSet::Z0).max(1e-9);
    let disagreements = (0..200u64)
        .into_par_iter()
        .filter(|&i| {
            !scan_agrees_with_brute_force(&input.rules, input.spec, replica_seed(input.seed ^ 0x5ca9, i), horizon)
        })
        .count();
    Ok(vec![
        Check::exact("dual_start_mismatches", dual as f64, 0.0),
        Check::exact("width_violations", width as f64, 0.0),
        Check::exact("scan_vs_brute_force_disagreements", disagreements as f64, 0.0),
    ])
}

fn analytic_suite(input: &SuiteInput<'_>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let t0 = analytic::jc_cpg_thresholds(Rational64::from_integer(0))?;
    checks.push(Check::exact(
        "eps_sen_0_is_8_15",
        (t0.eps_sen == Rational64::new(8, 15)) as u8 as f64,
        1.0,
    ));
    checks.push(Check::at_most(
        "eps_ins_residual",
        (3.0 * t0.eps_ins * (64.0 + 12.0 * t0.eps_ins + t0.eps_ins.powi(2)) - 64.0).abs(),
        1e-12,
    ));
    let mut worst = 0.0f64;
    for (delta, eps) in [(0.0, 0.1), (2.0, 0.05), (10.0, 0.02), (1.5, 0.2)] {
        let m = jukes_cantor_cpg(delta, PerturbationSpec::none().with_single(A, C, eps))?.compile();
        let spec = make_sensitive_spec(&m)?;
        let closed = analytic::growth_closed_form(&m.rules, &spec)?;
        let expected = 3.0 * eps * (40.0 + 10.0 * delta + delta * delta) / 64.0;
        worst = worst.max(((closed - expected) / expected).abs());
    }
    checks.push(Check::at_most("jc_closed_form_relative_error", worst, 1e-12));

    let rs = &input.rules;
    let summary = analytic::rate_summary(rs, input.spec);
    let n = input.samples.max(100);
    let windows = sample_windows(rs, input.spec, n, input.seed, None)?;
    if let Ok(p) = analytic::beta1_probability(&summary) {
        let freq = windows.iter().filter(|w| w.scan.beta1).count() as f64 / n as f64;
        let se = proportion_se(p, n);
        checks.push(Check::within("beta1_frequency", freq, Some(se), p, 3.0 * se));
    }
    if let Ok(m) = analytic::growth_closed_form(rs, input.spec) {
        let counts: Vec<f64> = windows.iter().map(|w| w.influence_count(rs) as f64).collect();
        let (mhat, se) = mean_se(&counts);
        checks.push(Check::within("growth_monte_carlo", mhat, Some(se), m, 3.0 * se + 1e-12));
        if let Ok(up) = analytic::growth_upper_bound(rs, input.spec) {
            checks.push(Check::at_most("closed_form_below_upper_bound", m - up, 1e-12 * up.max(1.0)));
        }
    }
    Ok(checks)
}

/// Joint law of `(β₁, min(N₁, 5))` as a 12-cell distribution.
pub fn beta_n1_law(draws: impl IntoIterator<Item = (bool, u64)>) -> Vec<f64> {
    empirical(
        draws
            .into_iter()
            .map(|(b, n)| b as usize * 6 + n.min(5) as usize),
        12,
    )
}

/// Tree-sampled `(β₁, N₁)` draws for `rule`.
pub fn tree_draws(rs: &RuleSet, spec: &CouplingSpec, rule: usize, n: usize, seed: u64) -> Result<Vec<(bool, u64)>> {
    let s = analytic::rate_summary(rs, spec);
    let membership = Membership::of(spec, rule);
    let rate = rs.rate(rule);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = analytic::tree_trace_sample(&s, rate, membership, &mut rng)?;
            Ok((t.beta1, t.n1))
        })
        .collect()
}

/// Directly simulated `(β₁, N₁)` draws for `rule`.
pub fn direct_draws(rs: &Arc<RuleSet>, spec: &CouplingSpec, rule: usize, n: usize, seed: u64) -> Result<Vec<(bool, u64)>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let f = StreamField::new(rs.clone(), replica_seed(seed, i));
            oracle::direct_first_round(&f, spec, rule)
        })
        .collect()
}

fn tree_suite(input: &SuiteInput<'_>) -> Result<Vec<Check>> {
    let rs = &input.rules;
    let n = input.samples.max(1000);
    let mut checks = Vec::new();
    let s = analytic::rate_summary(rs, input.spec);
    let perturbative: Vec<usize> = input
        .spec
        .members(SpecSet::P)
        .into_iter()
        .filter(|&i| rs.rate(i) > 0.0)
        .collect();
    // one representative per membership case
    let mut seen = HashMap::new();
    for &i in &perturbative {
        seen.entry(Membership::of(input.spec, i)).or_insert(i);
    }
    let mut reps: Vec<(Membership, usize)> = seen.into_iter().collect();
    reps.sort_by_key(|&(_, i)| i);
    for (membership, rule) in reps {
        let label = rs.label(rule).to_string();
        let tree = tree_draws(rs, input.spec, rule, n, input.seed)?;
        let direct = direct_draws(rs, input.spec, rule, n, input.seed ^ 0xd1ec7)?;
        let tv = tv_distance(&beta_n1_law(tree.iter().copied()), &beta_n1_law(direct.iter().copied()));
        let noise = 2.0 * (12.0 / n as f64).sqrt();
        checks.push(Check::at_most(format!("tree_vs_direct_tv[{label}]"), tv, noise.max(0.02)));
        let n1: Vec<f64> = tree.iter().map(|&(_, k)| k as f64).collect();
        let (mean, se) = mean_se(&n1);
        let expected = analytic::expected_n1(rs.rate(rule), &s, membership)?;
        checks.push(Check::within(
            format!("tree_mean_n1[{label}]"),
            mean,
            Some(se),
            expected,
            3.0 * se + 1e-12,
        ));
    }
    Ok(checks)
}

/// Central-site marginal of a frozen-boundary window after `duration`.
pub fn forward_marginal(rs: &RuleSet, width: usize, duration: f64, n: usize, seed: u64) -> Vec<f64> {
    let q = rs.alphabet().len();
    let centre = (width / 2) as i64;
    let states: Vec<usize> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(seed, i));
            let init: Vec<State> = (0..width).map(|_| State(rng.random_range(0..q as u8))).collect();
            let cfg = WindowConfig::new(
                0,
                init,
                Boundary::Frozen {
                    left: State(0),
                    right: State(0),
                },
            )
            .expect("window fits");
            let out = simulate_forward(rs, &cfg, duration, &mut rng);
            out.states()[centre as usize].index()
        })
        .collect();
    empirical(states, q)
}

/// Central-site CFTP marginal.
pub fn cftp_marginal(rs: &Arc<RuleSet>, spec: &CouplingSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let rows = sample_batch(rs, spec, &[0], n, seed, &CouplingOptions::default())?;
    Ok(empirical(rows.iter().map(|r| r[0].index()), rs.alphabet().len()))
}

fn stationary_suite(input: &SuiteInput<'_>) -> Result<Vec<Check>> {
    let rs = &input.rules;
    let n = input.samples.max(1000);
    let cftp = cftp_marginal(rs, input.spec, n, input.seed)?;
    let fwd = forward_marginal(rs, 21, 60.0, n, input.seed ^ 0xf0e1);
    let noise = 2.0 * (4.0 / n as f64).sqrt();
    let mut checks = vec![Check::at_most("cftp_vs_forward_tv", tv_distance(&cftp, &fwd), noise.max(0.03))];
    let max_reach = rs.max_reach();
    if max_reach == 0 {
        let exact = oracle::single_site_stationary(rs)?;
        checks.push(Check::at_most("cftp_vs_exact_tv", tv_distance(&cftp, &exact), noise.max(0.02)));
    }
    Ok(checks)
}

/// Flat `key=value` rendering.
impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "check.{}.value={}\ncheck.{}.reference={}\ncheck.{}.tolerance={}\n",
                c.name, c.value, c.name, c.reference, c.name, c.tolerance
            )?;
            if let Some(se) = c.se {
                writeln!(f, "check.{}.se={se}", c.name)?;
            }
            writeln!(f, "check.{}.pass={}", c.name, c.pass)?;
        }
        write!(f, "suite.{}.pass={}", self.suite, self.passed())
    }
}
