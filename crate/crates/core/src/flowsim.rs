//! Graphical construction on `ℤ × ℝ₋`.
//!
//! Every `(site, rule)` pair carries a homogeneous Poisson stream generated
//! backward from time 0. The flow `Φ(ξ, u, t, x)` is evaluated lazily by
//! walking back through the events that can influence `(t, x)`.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::rulesys::{compatible, Configuration, RuleSet, State, WindowConfig};

/// Default node budget of a single flow evaluation.
pub const FLOW_NODE_LIMIT: usize = 1_000_000;

/// SplitMix64 output function.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Zig-zag encoding of a signed site (0, -1, 1, -2, ... ↦ 0, 1, 2, 3, ...).
pub fn zigzag(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

/// Seed of stream `(site, rule)`.
pub fn stream_seed(master: u64, site: i64, rule: usize) -> u64 {
    mix64(mix64(mix64(master) ^ zigzag(site)) ^ rule as u64)
}

/// Master seed of replica `index` of a batch.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// The `k`-th most recent event of stream `(x, rule)`, at time `t < 0`.
#[derive(Debug, Clone, Copy)]
pub struct EventKey {
    pub t: f64,
    pub x: i64,
    pub rule: usize,
    pub k: usize,
}

impl EventKey {
    /// Smallest key at time `t`.
    pub fn before(t: f64) -> Self {
        Self {
            t,
            x: i64::MIN,
            rule: 0,
            k: 0,
        }
    }

    /// Largest key at time `t`.
    pub fn after(t: f64) -> Self {
        Self {
            t,
            x: i64::MAX,
            rule: usize::MAX,
            k: usize::MAX,
        }
    }
}

impl PartialEq for EventKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for EventKey {}

impl Ord for EventKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.x.cmp(&other.x))
            .then(self.rule.cmp(&other.rule))
            .then(self.k.cmp(&other.k))
    }
}

impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for EventKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.t.to_bits().hash(state);
        self.x.hash(state);
        self.rule.hash(state);
        self.k.hash(state);
    }
}

/// One event in the merged list of a site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteEvent {
    pub t: f64,
    pub rule: usize,
    pub k: usize,
}

impl SiteEvent {
    pub fn key(&self, x: i64) -> EventKey {
        EventKey {
            t: self.t,
            x,
            rule: self.rule,
            k: self.k,
        }
    }
}

/// Forced performance bits, keyed by event.
pub type PerfOverrides = HashMap<EventKey, bool>;

/// A space-time point `(t, x)`.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub t: f64,
    pub x: i64,
}

impl Point {
    pub fn new(t: f64, x: i64) -> Self {
        Self { t, x }
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Point {}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t.total_cmp(&other.t).then(self.x.cmp(&other.x))
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for Point {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.t.to_bits().hash(state);
        self.x.hash(state);
    }
}

struct StreamState {
    rng: ChaCha8Rng,
    rate: f64,
    /// Next event of the stream not yet merged into its site list.
    next_t: f64,
    next_k: usize,
}

impl StreamState {
    fn new(seed: u64, rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gap: f64 = rng.sample(Exp1);
        Self {
            rng,
            rate,
            next_t: -gap / rate,
            next_k: 1,
        }
    }

    fn advance(&mut self) {
        let gap: f64 = self.rng.sample(Exp1);
        self.next_t -= gap / self.rate;
        self.next_k += 1;
    }
}

#[derive(Default)]
struct SiteEvents {
    /// Every event in `[horizon, 0)` is present.
    horizon: f64,
    /// Sorted by decreasing time.
    events: Vec<SiteEvent>,
}

enum Source {
    Seeded {
        master: u64,
        streams: HashMap<(i64, usize), StreamState>,
    },
    Scripted,
}

struct FieldInner {
    source: Source,
    sites: HashMap<i64, SiteEvents>,
}

/// Lazily generated backward Poisson streams for every `(site, rule)`.
///
/// Extending a stream never changes events already generated, and two fields
/// with the same master seed agree on every stream.
pub struct StreamField {
    rules: Arc<RuleSet>,
    active: Vec<usize>,
    inner: RefCell<FieldInner>,
}

impl StreamField {
    pub fn new(rules: Arc<RuleSet>, master_seed: u64) -> Self {
        let active = (0..rules.len()).filter(|&i| rules.rate(i) > 0.0).collect();
        Self {
            rules,
            active,
            inner: RefCell::new(FieldInner {
                source: Source::Seeded {
                    master: master_seed,
                    streams: HashMap::new(),
                },
                sites: HashMap::new(),
            }),
        }
    }

    /// A field whose only events are `(site, rule, time)` triples given here.
    pub fn scripted(rules: Arc<RuleSet>, events: &[(i64, usize, f64)]) -> Result<Self> {
        let mut by_stream: HashMap<(i64, usize), Vec<f64>> = HashMap::new();
        for &(x, i, t) in events {
            if i >= rules.len() {
                return Err(Error::InvalidArgument(format!("rule index {i} out of range")));
            }
            if !(t < 0.0) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "event time {t} must be finite and negative"
                )));
            }
            by_stream.entry((x, i)).or_default().push(t);
        }
        let mut sites: HashMap<i64, SiteEvents> = HashMap::new();
        for ((x, i), mut times) in by_stream {
            times.sort_by(|a, b| b.total_cmp(a));
            times.dedup();
            let site = sites.entry(x).or_default();
            for (k, t) in times.into_iter().enumerate() {
                site.events.push(SiteEvent { t, rule: i, k: k + 1 });
            }
        }
        for site in sites.values_mut() {
            site.horizon = f64::NEG_INFINITY;
            site.events.sort_by(|a, b| {
                b.t.total_cmp(&a.t)
                    .then(b.rule.cmp(&a.rule))
                    .then(b.k.cmp(&a.k))
            });
        }
        Ok(Self {
            active: Vec::new(),
            rules,
            inner: RefCell::new(FieldInner {
                source: Source::Scripted,
                sites,
            }),
        })
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    /// Master seed, or `None` for scripted fields.
    pub fn master_seed(&self) -> Option<u64> {
        match &self.inner.borrow().source {
            Source::Seeded { master, .. } => Some(*master),
            Source::Scripted => None,
        }
    }

    /// Generates every event of site `x` in `[h, 0)`.
    pub fn ensure_site(&self, x: i64, h: f64) {
        let mut inner = self.inner.borrow_mut();
        let FieldInner { source, sites } = &mut *inner;
        let site = sites.entry(x).or_insert_with(|| SiteEvents {
            horizon: 0.0,
            events: Vec::new(),
        });
        if site.horizon <= h {
            return;
        }
        let Source::Seeded { master, streams } = source else {
            site.horizon = f64::NEG_INFINITY;
            return;
        };
        let start = site.events.len();
        for &i in &self.active {
            let stream = streams
                .entry((x, i))
                .or_insert_with(|| StreamState::new(stream_seed(*master, x, i), self.rules.rate(i)));
            while stream.next_t >= h {
                site.events.push(SiteEvent {
                    t: stream.next_t,
                    rule: i,
                    k: stream.next_k,
                });
                stream.advance();
            }
        }
        site.events[start..].sort_by(|a, b| {
            b.t.total_cmp(&a.t)
                .then(b.rule.cmp(&a.rule))
                .then(b.k.cmp(&a.k))
        });
        site.horizon = h;
    }

    /// Current horizon of site `x` (0 when untouched).
    pub fn horizon(&self, x: i64) -> f64 {
        self.inner
            .borrow()
            .sites
            .get(&x)
            .map_or(0.0, |s| s.horizon)
    }

    /// Events of site `x` in `[h, 0)`, most recent first.
    pub fn site_events(&self, x: i64, h: f64) -> Vec<SiteEvent> {
        self.ensure_site(x, h);
        let inner = self.inner.borrow();
        let events = &inner.sites[&x].events;
        let end = events.partition_point(|e| e.t >= h);
        events[..end].to_vec()
    }

    /// Event times of stream `(x, i)` in `[horizon, 0)`, most recent first.
    pub fn stream_extend(&self, x: i64, i: usize, horizon: f64) -> Vec<f64> {
        assert!(horizon < 0.0, "horizon must be negative");
        self.site_events(x, horizon)
            .into_iter()
            .filter(|e| e.rule == i)
            .map(|e| e.t)
            .collect()
    }

    /// `K_t(x, i)`: number of events of stream `(x, i)` in `[t, 0)`.
    pub fn count_after(&self, x: i64, i: usize, t: f64) -> usize {
        self.stream_extend(x, i, t.min(-f64::MIN_POSITIVE)).len()
    }

    /// Index and value of the latest event of site `x` strictly inside `(u, t)`.
    pub fn preced_event(&self, u: f64, t: f64, x: i64) -> Option<(usize, SiteEvent)> {
        self.ensure_site(x, u);
        let inner = self.inner.borrow();
        let events = &inner.sites[&x].events;
        let idx = events.partition_point(|e| e.t >= t);
        match events.get(idx) {
            Some(e) if e.t > u => Some((idx, *e)),
            _ => None,
        }
    }

    /// `Preced_u(t, x)`.
    pub fn preced(&self, u: f64, t: f64, x: i64) -> Point {
        assert!(u < t && t <= 0.0, "preced requires u < t <= 0");
        match self.preced_event(u, t, x) {
            Some((_, e)) => Point::new(e.t, x),
            None => Point::new(u, x),
        }
    }

    /// Site-list index of the event at site `x` exactly at time `t`.
    pub fn event_at(&self, t: f64, x: i64) -> Option<(usize, SiteEvent)> {
        if !(t < 0.0) {
            return None;
        }
        self.ensure_site(x, t);
        let inner = self.inner.borrow();
        let events = &inner.sites[&x].events;
        let idx = events.partition_point(|e| e.t > t);
        match events.get(idx) {
            Some(e) if e.t == t => Some((idx, *e)),
            _ => None,
        }
    }

    /// Site event stored at `idx` (the site must have been generated that far).
    pub fn site_event(&self, x: i64, idx: usize) -> SiteEvent {
        self.inner.borrow().sites[&x].events[idx]
    }

    /// Latest event of site `x` strictly before `s` and not before `floor`
    /// whose rule satisfies `accept`.
    pub fn latest_before(
        &self,
        x: i64,
        s: f64,
        floor: f64,
        accept: impl Fn(usize) -> bool,
    ) -> Option<SiteEvent> {
        let mut scanned = 0usize;
        loop {
            let horizon = {
                let inner = self.inner.borrow();
                match inner.sites.get(&x) {
                    Some(site) => {
                        let start = scanned.max(site.events.partition_point(|e| e.t >= s));
                        for e in &site.events[start.min(site.events.len())..] {
                            if e.t < floor {
                                return None;
                            }
                            if accept(e.rule) {
                                return Some(*e);
                            }
                        }
                        scanned = site.events.len();
                        site.horizon
                    }
                    None => 0.0,
                }
            };
            if horizon <= floor {
                return None;
            }
            let target = (2.0 * horizon - 1.0).min(s - 1.0).max(floor);
            self.ensure_site(x, target);
        }
    }
}

/// `Influ` of an event: `{t} × (x + A_i)`.
pub fn influ(e: &EventKey, rs: &RuleSet) -> Vec<Point> {
    rs.rule(e.rule)
        .offsets()
        .iter()
        .map(|a| Point::new(e.t, e.x + a))
        .collect()
}

/// `Influ` of a point: the event's influence if one sits there, else the point.
fn influ_point(f: &StreamField, p: Point) -> Vec<Point> {
    match f.event_at(p.t, p.x) {
        Some((_, e)) => influ(&e.key(p.x), f.rules()),
        None => vec![p],
    }
}

/// Complete influence `Influ_∞(u, t, x)`.
pub fn influence_closure(f: &StreamField, u: f64, t: f64, x: i64) -> Vec<Point> {
    assert!(u < t && t <= 0.0, "closure requires u < t <= 0");
    let mut seen: HashSet<Point> = HashSet::new();
    let mut out = Vec::new();
    let mut frontier: Vec<Point> = influ_point(f, Point::new(t, x));
    while let Some(p) = frontier.pop() {
        if !seen.insert(p) {
            continue;
        }
        out.push(p);
        if p.t > u {
            let q = f.preced(u, p.t, p.x);
            frontier.extend(influ_point(f, q));
        }
    }
    out.sort();
    out
}

#[derive(Clone, Copy)]
enum Dep {
    Init(State),
    Node(i64, usize),
}

/// One evaluation context of the flow started from `ξ` at time `u`.
///
/// Results are memoized per event, so repeated queries against the same
/// context share work.
pub struct Flow<'a, C: Configuration + ?Sized> {
    field: &'a StreamField,
    rules: Arc<RuleSet>,
    xi: &'a C,
    u: f64,
    forced: &'a PerfOverrides,
    memo: HashMap<(i64, usize), State>,
    bits: HashMap<(i64, usize), bool>,
    nodes: usize,
    limit: usize,
}

impl<'a, C: Configuration + ?Sized> Flow<'a, C> {
    pub fn new(field: &'a StreamField, xi: &'a C, u: f64, forced: &'a PerfOverrides) -> Self {
        assert!(u.is_finite(), "flow start time must be finite");
        Self {
            field,
            rules: field.rules().clone(),
            xi,
            u,
            forced,
            memo: HashMap::new(),
            bits: HashMap::new(),
            nodes: 0,
            limit: FLOW_NODE_LIMIT,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn start(&self) -> f64 {
        self.u
    }

    fn locate_before(&self, t: f64, x: i64) -> Dep {
        match self.field.preced_event(self.u, t, x) {
            Some((idx, _)) => Dep::Node(x, idx),
            None => Dep::Init(self.xi.state(x)),
        }
    }

    fn resolve_dep(&mut self, dep: Dep) -> Result<State> {
        match dep {
            Dep::Init(s) => Ok(s),
            Dep::Node(x, idx) => self.value_after(x, idx),
        }
    }

    /// State at `(t⁻, x)`.
    pub fn before(&mut self, t: f64, x: i64) -> Result<State> {
        if t <= self.u {
            return Ok(self.xi.state(x));
        }
        let dep = self.locate_before(t, x);
        self.resolve_dep(dep)
    }

    /// `Φ(ξ, u, t, x)`: includes an event at exactly `(t, x)`.
    pub fn at(&mut self, t: f64, x: i64) -> Result<State> {
        if t <= self.u {
            return Ok(self.xi.state(x));
        }
        match self.field.event_at(t, x) {
            Some((idx, _)) => self.value_after(x, idx),
            None => self.before(t, x),
        }
    }

    /// Whether event `key` is performed in this context.
    pub fn performed(&mut self, key: &EventKey) -> Result<bool> {
        assert!(key.t > self.u, "event must lie after the start time");
        let (idx, _) = self
            .field
            .event_at(key.t, key.x)
            .filter(|(_, e)| e.rule == key.rule && e.k == key.k)
            .ok_or_else(|| Error::InvalidArgument(format!("no event {key:?} in the field")))?;
        self.value_after(key.x, idx)?;
        Ok(self.bits[&(key.x, idx)])
    }

    /// Bits decided so far, keyed by event.
    pub fn decided(&self) -> Vec<(EventKey, bool)> {
        let mut out: Vec<_> = self
            .bits
            .iter()
            .map(|(&(x, idx), &b)| (self.field.site_event(x, idx).key(x), b))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn value_after(&mut self, x0: i64, idx0: usize) -> Result<State> {
        if let Some(&s) = self.memo.get(&(x0, idx0)) {
            return Ok(s);
        }
        let rules = self.rules.clone();
        let mut stack: Vec<(i64, usize)> = vec![(x0, idx0)];
        let mut reads: Vec<State> = Vec::with_capacity(4);
        while let Some(&(x, idx)) = stack.last() {
            if self.memo.contains_key(&(x, idx)) {
                stack.pop();
                continue;
            }
            let ev = self.field.site_event(x, idx);
            let rule = rules.rule(ev.rule);
            let bit = match self.bits.get(&(x, idx)) {
                Some(&b) => b,
                None => {
                    let forced = if self.forced.is_empty() {
                        None
                    } else {
                        self.forced.get(&ev.key(x)).copied()
                    };
                    match forced {
                        Some(b) => b,
                        None => {
                            reads.clear();
                            let mut pending = None;
                            for a in rule.offsets() {
                                match self.locate_before(ev.t, x + a) {
                                    Dep::Init(s) => reads.push(s),
                                    Dep::Node(y, j) => match self.memo.get(&(y, j)) {
                                        Some(&s) => reads.push(s),
                                        None => {
                                            pending = Some((y, j));
                                            break;
                                        }
                                    },
                                }
                            }
                            if let Some(node) = pending {
                                self.push(&mut stack, node)?;
                                continue;
                            }
                            rule.matches(&reads)
                        }
                    }
                }
            };
            self.bits.insert((x, idx), bit);
            if bit {
                self.memo.insert((x, idx), rule.target());
                stack.pop();
                continue;
            }
            match self.locate_before(ev.t, x) {
                Dep::Init(s) => {
                    self.memo.insert((x, idx), s);
                    stack.pop();
                }
                Dep::Node(y, j) => match self.memo.get(&(y, j)) {
                    Some(&s) => {
                        self.memo.insert((x, idx), s);
                        stack.pop();
                    }
                    None => self.push(&mut stack, (y, j))?,
                },
            }
        }
        Ok(self.memo[&(x0, idx0)])
    }

    fn push(&mut self, stack: &mut Vec<(i64, usize)>, node: (i64, usize)) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::HorizonExceeded { nodes: self.limit });
        }
        stack.push(node);
        Ok(())
    }
}

/// `Φ(ξ, u, t, x)`.
pub fn flow<C: Configuration + ?Sized>(
    f: &StreamField,
    xi: &C,
    u: f64,
    t: f64,
    x: i64,
    forced: &PerfOverrides,
) -> Result<State> {
    assert!(u <= t && t <= 0.0, "flow requires u <= t <= 0");
    Flow::new(f, xi, u, forced).at(t, x)
}

/// `Φ(ξ, u, t⁻, x)`.
pub fn flow_before<C: Configuration + ?Sized>(
    f: &StreamField,
    xi: &C,
    u: f64,
    t: f64,
    x: i64,
    forced: &PerfOverrides,
) -> Result<State> {
    assert!(u <= t && t <= 0.0, "flow requires u <= t <= 0");
    Flow::new(f, xi, u, forced).before(t, x)
}

/// `Perf(ξ, u, x, i, k)`, or the forced bit when one is given.
pub fn perf<C: Configuration + ?Sized>(
    f: &StreamField,
    xi: &C,
    u: f64,
    e: &EventKey,
    forced: &PerfOverrides,
) -> Result<bool> {
    if let Some(&b) = forced.get(e) {
        return Ok(b);
    }
    Flow::new(f, xi, u, forced).performed(e)
}

/// Event-driven forward simulation over a finite window.
///
/// Events arrive at total rate `len · Σ r_i`; each picks a site uniformly and
/// a rule proportionally to its rate and is applied if compatible.
pub fn simulate_forward<R: Rng + ?Sized>(
    rs: &RuleSet,
    cfg: &WindowConfig,
    duration: f64,
    rng: &mut R,
) -> WindowConfig {
    let mut out = cfg.clone();
    let active: Vec<usize> = (0..rs.len()).filter(|&i| rs.rate(i) > 0.0).collect();
    let mut cumulative = Vec::with_capacity(active.len());
    let mut acc = 0.0;
    for &i in &active {
        acc += rs.rate(i);
        cumulative.push(acc);
    }
    if acc <= 0.0 || duration <= 0.0 {
        return out;
    }
    let n = out.len();
    let total = acc * n as f64;
    let start = out.start();
    let mut clock = 0.0;
    loop {
        let gap: f64 = rng.sample(Exp1);
        clock += gap / total;
        if clock > duration {
            break;
        }
        let site = start + rng.random_range(0..n) as i64;
        let pick = rng.random::<f64>() * acc;
        let j = cumulative.partition_point(|&c| c <= pick).min(active.len() - 1);
        let rule = rs.rule(active[j]);
        if rule.target() == out.state(site) {
            continue;
        }
        if compatible(rule, &out, site) {
            out.set(site, rule.target());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rulesys::{Alphabet, Boundary, Rule, RuleClass, Uniform};

    fn two_rule_set() -> Arc<RuleSet> {
        let mut rs = RuleSet::new(Alphabet::nucleotides());
        rs.push(Rule::unconditional(State(2), 1.5), RuleClass::NonPerturbative, "U_C");
        rs.push(
            Rule::new(vec![0, 1], vec![vec![State(2), State(3)]], State(1), 2.0),
            RuleClass::NonPerturbative,
            "CG>TG",
        );
        rs.push(Rule::unconditional(State(0), 0.0), RuleClass::NonPerturbative, "zero");
        Arc::new(rs)
    }

    #[test]
    fn mixing_is_stable() {
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
        assert_eq!(zigzag(-2), 3);
        assert_ne!(stream_seed(7, 1, 0), stream_seed(7, -1, 0));
        assert_ne!(stream_seed(7, 0, 1), stream_seed(7, 1, 0));
    }

    #[test]
    fn zero_rate_stream_is_empty() {
        let f = StreamField::new(two_rule_set(), 11);
        assert!(f.stream_extend(0, 2, -100.0).is_empty());
    }

    #[test]
    fn same_seed_same_events() {
        let a = StreamField::new(two_rule_set(), 42);
        let b = StreamField::new(two_rule_set(), 42);
        assert_eq!(a.stream_extend(3, 1, -20.0), b.stream_extend(3, 1, -20.0));
        let c = StreamField::new(two_rule_set(), 43);
        assert_ne!(a.stream_extend(3, 1, -20.0), c.stream_extend(3, 1, -20.0));
    }

    #[test]
    fn prefix_stability() {
        let f = StreamField::new(two_rule_set(), 5);
        let short = f.stream_extend(-4, 0, -3.0);
        let long = f.stream_extend(-4, 0, -50.0);
        assert_eq!(&long[..short.len()], &short[..]);
        assert!(long[short.len()..].iter().all(|&t| t < -3.0));
        // generation order does not matter
        let g = StreamField::new(two_rule_set(), 5);
        let direct = g.stream_extend(-4, 0, -50.0);
        assert_eq!(direct, long);
    }

    #[test]
    fn ranks_decrease_in_time() {
        let f = StreamField::new(two_rule_set(), 9);
        let events: Vec<_> = f
            .site_events(0, -30.0)
            .into_iter()
            .filter(|e| e.rule == 0)
            .collect();
        for (j, e) in events.iter().enumerate() {
            assert_eq!(e.k, j + 1);
            assert!(e.t < 0.0);
        }
        assert_eq!(f.count_after(0, 0, -30.0), events.len());
    }

    #[test]
    fn preced_semantics() {
        let rs = two_rule_set();
        let f = StreamField::scripted(rs, &[(0, 0, -3.0), (0, 0, -1.0)]).unwrap();
        assert_eq!(f.preced(-5.0, 0.0, 0), Point::new(-1.0, 0));
        assert_eq!(f.preced(-5.0, -1.0, 0), Point::new(-3.0, 0));
        assert_eq!(f.preced(-2.0, -1.0, 0), Point::new(-2.0, 0));
        assert_eq!(f.preced(-5.0, 0.0, 4), Point::new(-5.0, 4));
    }

    #[test]
    fn influ_offsets() {
        let rs = two_rule_set();
        let e = EventKey { t: -1.0, x: 5, rule: 1, k: 1 };
        assert_eq!(influ(&e, &rs), vec![Point::new(-1.0, 5), Point::new(-1.0, 6)]);
        let e = EventKey { t: -1.0, x: 5, rule: 0, k: 1 };
        assert!(influ(&e, &rs).is_empty());
    }

    #[test]
    fn closure_base_case() {
        let f = StreamField::scripted(two_rule_set(), &[]).unwrap();
        let c = influence_closure(&f, -4.0, -1.0, 2);
        assert_eq!(c, vec![Point::new(-4.0, 2), Point::new(-1.0, 2)]);
    }

    #[test]
    fn closure_of_empty_context_event_does_not_spread() {
        let f = StreamField::scripted(two_rule_set(), &[(0, 0, -2.0)]).unwrap();
        let c = influence_closure(&f, -4.0, -1.0, 0);
        assert!(c.iter().all(|p| p.x == 0));
    }

    #[test]
    fn closure_of_dinucleotide_chain_spans_three_sites() {
        let f = StreamField::scripted(two_rule_set(), &[(0, 1, -1.0), (1, 1, -2.0)]).unwrap();
        let c = influence_closure(&f, -4.0, -0.5, 0);
        let sites: HashSet<i64> = c.iter().map(|p| p.x).collect();
        assert_eq!(sites, HashSet::from([0, 1, 2]));
    }

    #[test]
    fn flow_base_cases() {
        let f = StreamField::scripted(two_rule_set(), &[(0, 0, -2.0)]).unwrap();
        let none = PerfOverrides::new();
        let xi = Uniform(State(3));
        assert_eq!(flow(&f, &xi, -1.0, -1.0, 0, &none).unwrap(), State(3));
        for fill in 0..4 {
            let xi = Uniform(State(fill));
            assert_eq!(flow(&f, &xi, -5.0, 0.0, 0, &none).unwrap(), State(2));
        }
    }

    #[test]
    fn flow_dinucleotide_and_forcing() {
        let rs = two_rule_set();
        // C at site 0 from the U_C event, then CG -> TG needs G at site 1
        let f = StreamField::scripted(rs, &[(0, 0, -3.0), (0, 1, -1.0)]).unwrap();
        let none = PerfOverrides::new();
        let g = Uniform(State(3));
        assert_eq!(flow(&f, &g, -5.0, 0.0, 0, &none).unwrap(), State(1));
        let a = Uniform(State(0));
        assert_eq!(flow(&f, &a, -5.0, 0.0, 0, &none).unwrap(), State(2));
        let e = EventKey { t: -1.0, x: 0, rule: 1, k: 1 };
        assert!(perf(&f, &g, -5.0, &e, &none).unwrap());
        assert!(!perf(&f, &a, -5.0, &e, &none).unwrap());
        let mut forced = PerfOverrides::new();
        forced.insert(e, false);
        assert!(!perf(&f, &g, -5.0, &e, &forced).unwrap());
        assert_eq!(flow(&f, &g, -5.0, 0.0, 0, &forced).unwrap(), State(2));
    }

    #[test]
    fn horizon_guard() {
        let f = StreamField::new(two_rule_set(), 3);
        let none = PerfOverrides::new();
        let xi = Uniform(State(3));
        let err = Flow::new(&f, &xi, -500.0, &none)
            .with_limit(10)
            .before(0.0, 0)
            .unwrap_err();
        assert_eq!(err, Error::HorizonExceeded { nodes: 10 });
    }

    #[test]
    fn forward_zero_duration_is_identity() {
        let rs = two_rule_set();
        let cfg = WindowConfig::filled(
            0,
            5,
            State(3),
            Boundary::Frozen { left: State(0), right: State(1) },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(simulate_forward(&rs, &cfg, 0.0, &mut rng), cfg);
        let out = simulate_forward(&rs, &cfg, 10.0, &mut rng);
        assert_eq!(out.state(-1), State(0));
        assert_eq!(out.state(5), State(1));
    }

    #[test]
    fn event_key_order() {
        let a = EventKey { t: -2.0, x: 0, rule: 0, k: 1 };
        let b = EventKey { t: -1.0, x: -9, rule: 0, k: 1 };
        assert!(a < b);
        assert!(EventKey::before(-1.0) < b && b < EventKey::after(-1.0));
    }
}
