//! Coupling events on a three-site window, ambiguity closures and their
//! resolution into exact stationary draws.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::analytic;
use crate::error::{Error, Result};
use crate::flowsim::{influ, replica_seed, EventKey, Flow, PerfOverrides, Point, StreamField};
use crate::rulesys::{RuleSet, State, Uniform};
use crate::stats;
use crate::ypr::{self, fuse_states, is_purine, CompiledModel, RuleTag};

/// The six rule sets of a coupling event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecSet {
    ZPlus,
    Z0,
    ZMinus,
    ZPrimePlus,
    ZPrimeMinus,
    P,
}

impl SpecSet {
    pub const ALL: [SpecSet; 6] = [
        SpecSet::ZPlus,
        SpecSet::Z0,
        SpecSet::ZMinus,
        SpecSet::ZPrimePlus,
        SpecSet::ZPrimeMinus,
        SpecSet::P,
    ];

    fn bit(self) -> u8 {
        match self {
            SpecSet::ZPlus => 1,
            SpecSet::Z0 => 2,
            SpecSet::ZMinus => 4,
            SpecSet::ZPrimePlus => 8,
            SpecSet::ZPrimeMinus => 16,
            SpecSet::P => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpecSet::ZPlus => "z_plus",
            SpecSet::Z0 => "z0",
            SpecSet::ZMinus => "z_minus",
            SpecSet::ZPrimePlus => "zp_plus",
            SpecSet::ZPrimeMinus => "zp_minus",
            SpecSet::P => "p",
        }
    }
}

impl fmt::Display for SpecSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rule-index sets `(𝔷₊, 𝔷₀, 𝔷₋, 𝔷′₊, 𝔷′₋, 𝔓)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    membership: Vec<u8>,
    nucleotide: bool,
}

/// The six pairwise (or triple) intersections that must be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Disjointness {
    pub zplus_zpplus: Vec<usize>,
    pub zminus_zpminus: Vec<usize>,
    pub z0_p: Vec<usize>,
    pub zplus_p: Vec<usize>,
    pub zminus_p: Vec<usize>,
    pub zpplus_zpminus_p: Vec<usize>,
}

impl Disjointness {
    pub fn all_empty(&self) -> bool {
        self.zplus_zpplus.is_empty()
            && self.zminus_zpminus.is_empty()
            && self.z0_p.is_empty()
            && self.zplus_p.is_empty()
            && self.zminus_p.is_empty()
            && self.zpplus_zpminus_p.is_empty()
    }
}

impl CouplingSpec {
    /// Builds a spec from explicit index sets over `n_rules` rules.
    pub fn from_sets(n_rules: usize, sets: &[(SpecSet, Vec<usize>)]) -> Result<Self> {
        let mut membership = vec![0u8; n_rules];
        for (set, members) in sets {
            for &i in members {
                if i >= n_rules {
                    return Err(Error::InvalidArgument(format!(
                        "coupling set {set} references rule {i}, but only {n_rules} rules exist"
                    )));
                }
                membership[i] |= set.bit();
            }
        }
        let spec = Self {
            membership,
            nucleotide: false,
        };
        let report = spec.disjointness();
        if !report.all_empty() {
            return Err(Error::InvalidArgument(format!(
                "coupling sets overlap: {report:?}"
            )));
        }
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn contains(&self, set: SpecSet, i: usize) -> bool {
        self.membership[i] & set.bit() != 0
    }

    fn has_any(&self, mask: u8, i: usize) -> bool {
        self.membership[i] & mask != 0
    }

    pub fn members(&self, set: SpecSet) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&i| self.contains(set, i))
            .collect()
    }

    /// Whether the `ϱ / η` fused-triple check applies (nucleotide models).
    pub fn nucleotide(&self) -> bool {
        self.nucleotide
    }

    /// `r(K)` for one of the sets.
    pub fn rate(&self, rs: &RuleSet, set: SpecSet) -> f64 {
        self.members(set).iter().map(|&i| rs.rate(i)).sum()
    }

    pub fn disjointness(&self) -> Disjointness {
        let pick = |a: &[SpecSet]| -> Vec<usize> {
            (0..self.membership.len())
                .filter(|&i| a.iter().all(|&s| self.contains(s, i)))
                .collect()
        };
        use SpecSet::*;
        Disjointness {
            zplus_zpplus: pick(&[ZPlus, ZPrimePlus]),
            zminus_zpminus: pick(&[ZMinus, ZPrimeMinus]),
            z0_p: pick(&[Z0, P]),
            zplus_p: pick(&[ZPlus, P]),
            zminus_p: pick(&[ZMinus, P]),
            zpplus_zpminus_p: pick(&[ZPrimePlus, ZPrimeMinus, P]),
        }
    }

    /// Rejects specs whose `𝔷₀`, `𝔷₊` or `𝔷₋` carry no rate.
    pub fn check_rates(&self, rs: &RuleSet) -> Result<()> {
        for set in [SpecSet::Z0, SpecSet::ZPlus, SpecSet::ZMinus] {
            if !(self.rate(rs, set) > 0.0) {
                return Err(Error::NonDegenerateViolated(format!(
                    "coupling set {set} has zero total rate"
                )));
            }
        }
        Ok(())
    }
}

fn ypr_spec(model: &CompiledModel, sets: [(SpecSet, Box<dyn Fn(&RuleTag) -> bool>); 6]) -> Result<CouplingSpec> {
    let assigned: Vec<(SpecSet, Vec<usize>)> = sets
        .iter()
        .map(|(s, pred)| (*s, model.indices(|t| pred(t))))
        .collect();
    let mut spec = CouplingSpec::from_sets(model.rules.len(), &assigned)?;
    spec.nucleotide = true;
    spec.check_rates(&model.rules)?;
    Ok(spec)
}

/// Sensitive coupling sets: `𝔷₀ = U`, `𝔷∓ = U ∪ V` toward purines /
/// pyrimidines, `𝔷′₋ = 𝓡ʸ`, `𝔷′₊ = 𝓡ᴿ`, `𝔓 = ε`.
pub fn make_sensitive_spec(model: &CompiledModel) -> Result<CouplingSpec> {
    ypr_spec(
        model,
        [
            (SpecSet::Z0, Box::new(|t| matches!(t, RuleTag::U(_)))),
            (
                SpecSet::ZMinus,
                Box::new(|t| matches!(t, RuleTag::U(_)) || matches!(t, RuleTag::V(y) if is_purine(*y))),
            ),
            (
                SpecSet::ZPlus,
                Box::new(|t| matches!(t, RuleTag::U(_)) || matches!(t, RuleTag::V(y) if !is_purine(*y))),
            ),
            (SpecSet::ZPrimeMinus, Box::new(|t| matches!(t, RuleTag::Y { .. }))),
            (SpecSet::ZPrimePlus, Box::new(|t| matches!(t, RuleTag::R { .. }))),
            (SpecSet::P, Box::new(|t| t.is_perturbative())),
        ],
    )
}

/// Insensitive coupling sets: `𝔷∓` are the U/V rules into purines /
/// pyrimidines, `𝔷′∓` the U/V and ε rules into pyrimidines / purines.
pub fn make_insensitive_spec(model: &CompiledModel) -> Result<CouplingSpec> {
    fn uv(t: &RuleTag) -> bool {
        matches!(t, RuleTag::U(_) | RuleTag::V(_))
    }
    ypr_spec(
        model,
        [
            (SpecSet::Z0, Box::new(|t| matches!(t, RuleTag::U(_)))),
            (SpecSet::ZMinus, Box::new(|t| uv(t) && is_purine(t.target()))),
            (SpecSet::ZPlus, Box::new(|t| uv(t) && !is_purine(t.target()))),
            (
                SpecSet::ZPrimeMinus,
                Box::new(|t| (uv(t) || t.is_perturbative()) && !is_purine(t.target())),
            ),
            (
                SpecSet::ZPrimePlus,
                Box::new(|t| (uv(t) || t.is_perturbative()) && is_purine(t.target())),
            ),
            (SpecSet::P, Box::new(|t| t.is_perturbative())),
        ],
    )
}

/// First round of the backward scan: `(κ₁, χ₁, λ₁, β₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSummary {
    pub kappa1: f64,
    pub chi1: f64,
    pub lambda1: f64,
    pub beta1: bool,
    /// Number of rounds until the first `β = 1`.
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingWindow {
    pub anchor: Point,
    /// Coupling time `T = min{t₋, t₊}`.
    pub t: f64,
    pub t_minus: f64,
    pub t0: f64,
    pub t_plus: f64,
    /// Perturbative events at `y − 1, y, y + 1` in `[T, anchor)`, ascending.
    pub h: Vec<EventKey>,
    pub scan: ScanSummary,
}

impl CouplingWindow {
    /// `Σ_{e ∈ H} #A_e`.
    pub fn influence_count(&self, rs: &RuleSet) -> usize {
        self.h.iter().map(|e| rs.rule(e.rule).arity()).sum()
    }

    /// Checks `H ⊂ [T, anchor)`, H sites in `y ± 1` and influence in `y ± 2`.
    pub fn check_width(&self, rs: &RuleSet) -> Result<()> {
        let y = self.anchor.x;
        for e in &self.h {
            if !(e.t >= self.t && e.t < self.anchor.t) {
                return Err(Error::WidthViolation(format!(
                    "event at time {} outside [{}, {})",
                    e.t, self.t, self.anchor.t
                )));
            }
            if (e.x - y).abs() > 1 {
                return Err(Error::WidthViolation(format!(
                    "H event at site {} for anchor site {y}",
                    e.x
                )));
            }
            for p in influ(e, rs) {
                if (p.x - y).abs() > 2 {
                    return Err(Error::WidthViolation(format!(
                        "influence at site {} for anchor site {y}",
                        p.x
                    )));
                }
            }
        }
        Ok(())
    }
}

fn default_lookback(spec: &CouplingSpec, rs: &RuleSet) -> f64 {
    1000.0 / spec.rate(rs, SpecSet::Z0)
}

/// Most recent coupling event strictly before `anchor`.
///
/// `lookback` bounds the scan to `[anchor.t − lookback, anchor.t)`; `None`
/// uses `1000 / r(𝔷₀)`.
pub fn find_coupling_window(
    f: &StreamField,
    spec: &CouplingSpec,
    anchor: Point,
    lookback: Option<f64>,
) -> Result<CouplingWindow> {
    let rs = f.rules().clone();
    let lookback = lookback.unwrap_or_else(|| default_lookback(spec, &rs));
    let unreachable = Error::CouplingUnreachable {
        anchor: anchor.t,
        limit: lookback,
    };
    if [SpecSet::Z0, SpecSet::ZPlus, SpecSet::ZMinus]
        .iter()
        .any(|&s| !(spec.rate(&rs, s) > 0.0))
        || !lookback.is_finite()
    {
        return Err(unreachable);
    }
    let floor = anchor.t - lookback;
    let y = anchor.x;
    let z0 = SpecSet::Z0.bit();
    let right_mask = SpecSet::ZPlus.bit() | SpecSet::ZPrimePlus.bit();
    let left_mask = SpecSet::ZMinus.bit() | SpecSet::ZPrimeMinus.bit();

    let mut summary: Option<ScanSummary> = None;
    let mut lambda = anchor.t;
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        let kappa = f
            .latest_before(y, lambda, floor, |i| spec.has_any(z0, i))
            .ok_or_else(|| unreachable.clone())?;
        let right = f.latest_before(y + 1, kappa.t, floor, |i| spec.has_any(right_mask, i));
        let left = f.latest_before(y - 1, kappa.t, floor, |i| spec.has_any(left_mask, i));
        let right_first = match (&right, &left) {
            (Some(r), Some(l)) => r.t > l.t,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => return Err(unreachable),
        };
        // (χ, λ, β, t₋, t₊)
        let (chi, lam, beta, t_minus, t_plus) = if right_first {
            let r = right.unwrap();
            if spec.contains(SpecSet::ZPlus, r.rule) {
                let l = left.ok_or_else(|| unreachable.clone())?;
                let beta = spec.contains(SpecSet::ZMinus, l.rule);
                (r.t, l.t, beta, l.t, r.t)
            } else {
                (r.t, r.t, false, f64::NAN, f64::NAN)
            }
        } else {
            let l = left.unwrap();
            if spec.contains(SpecSet::ZMinus, l.rule) {
                let r = right.ok_or_else(|| unreachable.clone())?;
                let beta = spec.contains(SpecSet::ZPlus, r.rule);
                (l.t, r.t, beta, l.t, r.t)
            } else {
                (l.t, l.t, false, f64::NAN, f64::NAN)
            }
        };
        if summary.is_none() {
            summary = Some(ScanSummary {
                kappa1: kappa.t,
                chi1: chi,
                lambda1: lam,
                beta1: beta,
                rounds: 0,
            });
        }
        if beta {
            let mut scan = summary.unwrap();
            scan.rounds = rounds;
            let t = lam;
            let mut h = Vec::new();
            for x in [y - 1, y, y + 1] {
                for e in f.site_events(x, t) {
                    if e.t < anchor.t && spec.contains(SpecSet::P, e.rule) {
                        h.push(e.key(x));
                    }
                }
            }
            h.sort();
            return Ok(CouplingWindow {
                anchor,
                t,
                t_minus,
                t0: kappa.t,
                t_plus,
                h,
                scan,
            });
        }
        lambda = lam;
    }
}

#[derive(Debug, Clone)]
pub struct CouplingOptions {
    /// Maximal number of distinct ambiguity points.
    pub budget: usize,
    /// Scan lookback; `None` means `1000 / r(𝔷₀)`.
    pub lookback: Option<f64>,
    /// Check fill independence, fused triples and widths.
    pub assertion: bool,
    pub fill: State,
    pub alt_fill: State,
    /// Skip the subcriticality gate.
    pub force: bool,
    /// Monte Carlo sample size used by the gate when no closed form exists.
    pub gate_samples: usize,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            budget: 10_000,
            lookback: None,
            assertion: false,
            fill: State(0),
            alt_fill: State(1),
            force: false,
            gate_samples: 10_000,
        }
    }
}

/// The closed ambiguity set of one site with its layers `Z_n`.
#[derive(Debug, Clone)]
pub struct AmbiguityGraph {
    pub root: Point,
    /// Distinct ambiguity points; index 0 is the root.
    pub points: Vec<Point>,
    /// Smallest layer containing each point.
    pub min_layer: Vec<usize>,
    /// `Z_0, …, Z_{N*−1}` as point indices.
    pub layers: Vec<Vec<usize>>,
    /// `(from, to)`: `to` lies in the influence of `from`'s ambiguities.
    pub edges: Vec<(usize, usize)>,
    pub windows: Vec<CouplingWindow>,
    pub n_star: usize,
    pub t_star: f64,
    index: HashMap<Point, usize>,
}

impl AmbiguityGraph {
    pub fn window_at(&self, p: Point) -> Option<&CouplingWindow> {
        self.index.get(&p).map(|&i| &self.windows[i])
    }

    /// `#Z_n` (0 beyond `N*`).
    pub fn layer_size(&self, n: usize) -> usize {
        self.layers.get(n).map_or(0, Vec::len)
    }

    /// Every ambiguous event, ascending.
    pub fn events(&self) -> Vec<EventKey> {
        let set: BTreeSet<EventKey> = self
            .windows
            .iter()
            .flat_map(|w| w.h.iter().copied())
            .collect();
        set.into_iter().collect()
    }
}

/// Per-field cache of coupling windows keyed by anchor.
pub type WindowCache = HashMap<Point, CouplingWindow>;

fn cached_window(
    f: &StreamField,
    spec: &CouplingSpec,
    p: Point,
    lookback: Option<f64>,
    cache: &mut WindowCache,
) -> Result<CouplingWindow> {
    if let Some(w) = cache.get(&p) {
        return Ok(w.clone());
    }
    let w = find_coupling_window(f, spec, p, lookback)?;
    cache.insert(p, w.clone());
    Ok(w)
}

/// Closes the ambiguity process of site `x` anchored at time 0.
pub fn ambiguity_closure(
    f: &StreamField,
    spec: &CouplingSpec,
    x: i64,
    opts: &CouplingOptions,
) -> Result<AmbiguityGraph> {
    ambiguity_closure_cached(f, spec, x, opts, &mut WindowCache::new())
}

pub fn ambiguity_closure_cached(
    f: &StreamField,
    spec: &CouplingSpec,
    x: i64,
    opts: &CouplingOptions,
    cache: &mut WindowCache,
) -> Result<AmbiguityGraph> {
    let rs = f.rules().clone();
    let root = Point::new(0.0, x);
    let mut points = vec![root];
    let mut min_layer = vec![0];
    let mut windows = vec![cached_window(f, spec, root, opts.lookback, cache)?];
    let mut index = HashMap::from([(root, 0usize)]);
    let mut layers = vec![vec![0usize]];
    let mut edges = Vec::new();
    loop {
        let n = layers.len();
        let mut next: BTreeSet<usize> = BTreeSet::new();
        for &p in &layers[n - 1] {
            let h = windows[p].h.clone();
            for e in &h {
                for q in influ(e, &rs) {
                    let qi = match index.get(&q) {
                        Some(&qi) => qi,
                        None => {
                            if points.len() >= opts.budget {
                                return Err(Error::ClosureBudgetExceeded {
                                    budget: opts.budget,
                                });
                            }
                            let w = cached_window(f, spec, q, opts.lookback, cache)?;
                            points.push(q);
                            min_layer.push(n);
                            windows.push(w);
                            index.insert(q, points.len() - 1);
                            points.len() - 1
                        }
                    };
                    edges.push((p, qi));
                    next.insert(qi);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layers.push(next.into_iter().collect());
    }
    let t_star = windows.iter().map(|w| w.t).fold(f64::INFINITY, f64::min);
    Ok(AmbiguityGraph {
        root,
        points,
        min_layer,
        n_star: layers.len(),
        layers,
        edges,
        windows,
        t_star,
        index,
    })
}

/// Output of [`resolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub value: State,
    /// Resolved performance bits in increasing event order.
    pub bits: Vec<(EventKey, bool)>,
}

fn state_before(
    f: &StreamField,
    g: &AmbiguityGraph,
    p: Point,
    fill: State,
    bits: &PerfOverrides,
) -> Result<State> {
    let w = g
        .window_at(p)
        .ok_or_else(|| Error::InvalidArgument(format!("no window anchored at {p:?}")))?;
    let xi = Uniform(fill);
    Flow::new(f, &xi, w.t.next_down(), bits).before(p.t, p.x)
}

fn label(s: State) -> String {
    format!("{}", s.0)
}

/// Resolves the ambiguities of `g` in increasing event order and returns
/// the state at `(0⁻, x)`.
pub fn resolve(
    f: &StreamField,
    spec: &CouplingSpec,
    g: &AmbiguityGraph,
    opts: &CouplingOptions,
) -> Result<Resolution> {
    let rs = f.rules().clone();
    let mut bits = PerfOverrides::new();
    let mut ordered = Vec::new();
    let mut reads = Vec::new();
    for e in g.events() {
        let rule = rs.rule(e.rule);
        reads.clear();
        for a in rule.offsets() {
            let p = Point::new(e.t, e.x + a);
            let s = state_before(f, g, p, opts.fill, &bits)?;
            if opts.assertion {
                let s2 = state_before(f, g, p, opts.alt_fill, &bits)?;
                if s != s2 {
                    return Err(Error::DualStartMismatch {
                        context: format!("state before event {e:?} at site {}", p.x),
                        left: label(s),
                        right: label(s2),
                    });
                }
            }
            reads.push(s);
        }
        let bit = rule.matches(&reads);
        bits.insert(e, bit);
        ordered.push((e, bit));
    }
    let value = state_before(f, g, g.root, opts.fill, &bits)?;
    if opts.assertion {
        let alt = state_before(f, g, g.root, opts.alt_fill, &bits)?;
        if value != alt {
            return Err(Error::DualStartMismatch {
                context: format!("final state at site {}", g.root.x),
                left: label(value),
                right: label(alt),
            });
        }
        for w in &g.windows {
            w.check_width(&rs)?;
            if spec.nucleotide() {
                check_fused(f, w, opts, &bits)?;
            }
        }
    }
    Ok(Resolution {
        value,
        bits: ordered,
    })
}

fn check_fused(
    f: &StreamField,
    w: &CouplingWindow,
    opts: &CouplingOptions,
    bits: &PerfOverrides,
) -> Result<()> {
    let y = w.anchor.x;
    let fused = |fill: State| -> Result<[ypr::Label; 3]> {
        let xi = Uniform(fill);
        let mut flow = Flow::new(f, &xi, w.t.next_down(), bits);
        Ok(fuse_states([
            flow.at(w.t0, y - 1)?,
            flow.at(w.t0, y)?,
            flow.at(w.t0, y + 1)?,
        ]))
    };
    let a = fused(opts.fill)?;
    let b = fused(opts.alt_fill)?;
    if a != b {
        return Err(Error::DualStartMismatch {
            context: format!("fused triple at t0 = {} for anchor site {y}", w.t0),
            left: format!("{a:?}"),
            right: format!("{b:?}"),
        });
    }
    Ok(())
}

/// Growth parameter used by the subcriticality gate: the closed form when
/// the rates allow it, otherwise a Monte Carlo estimate plus three standard
/// errors.
pub fn gate_growth(rs: &Arc<RuleSet>, spec: &CouplingSpec, opts: &CouplingOptions, seed: u64) -> Result<f64> {
    match analytic::growth_closed_form(rs, spec) {
        Ok(m) => Ok(m),
        Err(Error::DegenerateRates(_)) => {
            let (m, se) = estimate_growth(rs, spec, opts.gate_samples.max(1), seed)?;
            Ok(m + 3.0 * se)
        }
        Err(e) => Err(e),
    }
}

fn gate(rs: &Arc<RuleSet>, spec: &CouplingSpec, opts: &CouplingOptions, seed: u64) -> Result<()> {
    if opts.force {
        return Ok(());
    }
    let m = gate_growth(rs, spec, opts, seed)?;
    if m < 1.0 {
        Ok(())
    } else {
        Err(Error::SubcriticalityGateFailed { m })
    }
}

/// Exact draws on one stream field; windows are shared across sites.
pub struct Sampler<'a> {
    field: StreamField,
    spec: &'a CouplingSpec,
    opts: &'a CouplingOptions,
    cache: WindowCache,
}

impl<'a> Sampler<'a> {
    pub fn new(rs: Arc<RuleSet>, spec: &'a CouplingSpec, seed: u64, opts: &'a CouplingOptions) -> Self {
        Self {
            field: StreamField::new(rs, seed),
            spec,
            opts,
            cache: WindowCache::new(),
        }
    }

    pub fn field(&self) -> &StreamField {
        &self.field
    }

    pub fn closure(&mut self, x: i64) -> Result<AmbiguityGraph> {
        ambiguity_closure_cached(&self.field, self.spec, x, self.opts, &mut self.cache)
    }

    pub fn sample_site(&mut self, x: i64) -> Result<State> {
        let g = self.closure(x)?;
        Ok(resolve(&self.field, self.spec, &g, self.opts)?.value)
    }
}

/// One exact draw of the stationary law projected on `sites`.
pub fn perfect_sample(
    rs: &Arc<RuleSet>,
    spec: &CouplingSpec,
    sites: &[i64],
    master_seed: u64,
    opts: &CouplingOptions,
) -> Result<Vec<(i64, State)>> {
    gate(rs, spec, opts, master_seed)?;
    sample_unchecked(rs, spec, sites, master_seed, opts)
}

fn sample_unchecked(
    rs: &Arc<RuleSet>,
    spec: &CouplingSpec,
    sites: &[i64],
    seed: u64,
    opts: &CouplingOptions,
) -> Result<Vec<(i64, State)>> {
    let mut sampler = Sampler::new(rs.clone(), spec, seed, opts);
    sites
        .iter()
        .map(|&x| Ok((x, sampler.sample_site(x)?)))
        .collect()
}

/// `n` independent draws; replica `i` uses `replica_seed(master_seed, i)`.
///
/// Rows are returned in replica order regardless of scheduling.
pub fn sample_batch(
    rs: &Arc<RuleSet>,
    spec: &CouplingSpec,
    sites: &[i64],
    n: usize,
    master_seed: u64,
    opts: &CouplingOptions,
) -> Result<Vec<Vec<State>>> {
    gate(rs, spec, opts, master_seed)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let draw = sample_unchecked(rs, spec, sites, replica_seed(master_seed, i), opts)?;
            Ok(draw.into_iter().map(|(_, s)| s).collect())
        })
        .collect()
}

/// Coupling windows anchored at `(0, 0)` of `n` independent replicas.
pub fn sample_windows(
    rs: &Arc<RuleSet>,
    spec: &CouplingSpec,
    n: usize,
    seed: u64,
    lookback: Option<f64>,
) -> Result<Vec<CouplingWindow>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let f = StreamField::new(rs.clone(), replica_seed(seed, i));
            find_coupling_window(&f, spec, Point::new(0.0, 0), lookback)
        })
        .collect()
}

/// Monte Carlo `m̂` and its standard error.
pub fn estimate_growth(rs: &Arc<RuleSet>, spec: &CouplingSpec, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let values: Vec<f64> = sample_windows(rs, spec, n_samples, seed, None)?
        .iter()
        .map(|w| w.influence_count(rs) as f64)
        .collect();
    Ok(stats::mean_se(&values))
}

/// Monte Carlo Laplace transforms at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub lambda_t: f64,
    pub lambda_t_se: f64,
    pub lambda_h: f64,
    pub lambda_h_se: f64,
}

/// `Λ̂_T(λ)` and `Λ̂_H(λ)` for every `λ` in `lambdas`, from one set of windows.
pub fn estimate_laplace(
    rs: &Arc<RuleSet>,
    spec: &CouplingSpec,
    lambdas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<LaplaceEstimate>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    if let Some(&l) = lambdas.iter().find(|&&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {l}")));
    }
    let windows = sample_windows(rs, spec, n_samples, seed, None)?;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let lt: Vec<f64> = windows.iter().map(|w| (-lambda * w.t).exp()).collect();
            let lh: Vec<f64> = windows
                .iter()
                .map(|w| {
                    w.h.iter()
                        .map(|e| rs.rule(e.rule).arity() as f64 * (-lambda * e.t).exp())
                        .sum()
                })
                .collect();
            let (lambda_t, lambda_t_se) = stats::mean_se(&lt);
            let (lambda_h, lambda_h_se) = stats::mean_se(&lh);
            LaplaceEstimate {
                lambda,
                lambda_t,
                lambda_t_se,
                lambda_h,
                lambda_h_se,
            }
        })
        .collect())
}
