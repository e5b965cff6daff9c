//! Alphabets, transition rules, finite configuration windows and the
//! exact finite-window generator used as a desk-scale oracle.
//!
//! A rule `(A, ℓ, s, r)` fires at site `x` at rate `r` and sets `x` to `s`
//! whenever the states read at `x + A` form a tuple in `ℓ`. An empty offset
//! set is always compatible.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

/// Index of a state in its [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct State(pub u8);

impl State {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered finite list of distinct state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidArgument(
                "an alphabet needs at least two states".into(),
            ));
        }
        if labels.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument("alphabet too large".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidArgument("empty state label".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidArgument(format!("duplicate state label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// The nucleotide alphabet in the order `A, T, C, G`.
    pub fn nucleotides() -> Self {
        Self {
            labels: ["A", "T", "C", "G"].iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, s: State) -> &str {
        &self.labels[s.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn state(&self, label: &str) -> Option<State> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| State(i as u8))
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.labels.len()).map(|i| State(i as u8))
    }
}

/// Non-perturbative or perturbative membership of a rule index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleClass {
    NonPerturbative,
    Perturbative,
}

/// A transition rule: context `(offsets, patterns, target)` and a rate.
///
/// Construction does not validate; use [`RuleSet::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    offsets: Vec<i64>,
    patterns: Vec<Vec<State>>,
    target: State,
    rate: f64,
}

impl Rule {
    pub fn new(offsets: Vec<i64>, patterns: Vec<Vec<State>>, target: State, rate: f64) -> Self {
        let mut patterns = patterns;
        patterns.sort();
        patterns.dedup();
        Self {
            offsets,
            patterns,
            target,
            rate,
        }
    }

    /// A rule with empty context: always performed.
    pub fn unconditional(target: State, rate: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), target, rate)
    }

    /// Single-site rule `{0}` with one-letter patterns.
    pub fn single_site(from: impl IntoIterator<Item = State>, target: State, rate: f64) -> Self {
        Self::new(vec![0], from.into_iter().map(|s| vec![s]).collect(), target, rate)
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn patterns(&self) -> &[Vec<State>] {
        &self.patterns
    }

    pub fn target(&self) -> State {
        self.target
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `#A`, the number of sites read by the rule.
    pub fn arity(&self) -> usize {
        self.offsets.len()
    }

    /// Whether the tuple read at the offsets belongs to the pattern set.
    pub fn matches(&self, read: &[State]) -> bool {
        self.offsets.is_empty() || self.patterns.iter().any(|p| p.as_slice() == read)
    }
}

/// Indexed list of rules with a perturbative/non-perturbative partition.
///
/// Duplicate rules at distinct indices act additively.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    alphabet: Alphabet,
    rules: Vec<Rule>,
    classes: Vec<RuleClass>,
    labels: Vec<String>,
}

impl RuleSet {
    pub fn new(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            rules: Vec::new(),
            classes: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Appends a rule and returns its index.
    pub fn push(&mut self, rule: Rule, class: RuleClass, label: impl Into<String>) -> usize {
        self.rules.push(rule);
        self.classes.push(class);
        self.labels.push(label.into());
        self.rules.len() - 1
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule(&self, i: usize) -> &Rule {
        &self.rules[i]
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn class(&self, i: usize) -> RuleClass {
        self.classes[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rules[i].rate
    }

    pub fn perturbative(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.classes[i] == RuleClass::Perturbative)
    }

    /// Largest `|a|` over all offsets of all rules.
    pub fn max_reach(&self) -> i64 {
        self.rules
            .iter()
            .flat_map(|r| r.offsets.iter().map(|a| a.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n_states = self.alphabet.len();
        if self.classes.len() != self.rules.len() {
            violations.push(Violation {
                rule: None,
                kind: ViolationKind::Partition,
                message: "partition flags do not cover every rule index".into(),
            });
        }
        for (i, rule) in self.rules.iter().enumerate() {
            let mut report = |kind, message: String| {
                violations.push(Violation {
                    rule: Some(i),
                    kind,
                    message,
                })
            };
            if !(rule.rate >= 0.0) || !rule.rate.is_finite() {
                report(
                    ViolationKind::NegativeRate,
                    format!("negative rate {} (must be a finite value >= 0)", rule.rate),
                );
            }
            if rule.target.index() >= n_states {
                report(
                    ViolationKind::UnknownState,
                    format!("target state index {} outside alphabet", rule.target.0),
                );
            }
            let mut sorted = rule.offsets.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != rule.offsets.len() {
                report(
                    ViolationKind::DuplicateOffset,
                    "offsets must be distinct".into(),
                );
            }
            if rule.offsets.is_empty() && !rule.patterns.is_empty() {
                report(
                    ViolationKind::PatternArity,
                    "empty context must have an empty pattern set".into(),
                );
            }
            for p in &rule.patterns {
                if !rule.offsets.is_empty() && p.len() != rule.offsets.len() {
                    report(
                        ViolationKind::PatternArity,
                        format!(
                            "pattern arity {} does not match {} offsets",
                            p.len(),
                            rule.offsets.len()
                        ),
                    );
                }
                if p.iter().any(|s| s.index() >= n_states) {
                    report(
                        ViolationKind::UnknownState,
                        "pattern uses a state outside the alphabet".into(),
                    );
                }
            }
        }
        ValidationReport { violations }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NegativeRate,
    PatternArity,
    UnknownState,
    DuplicateOffset,
    Partition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "valid: 0 violations");
        }
        writeln!(f, "invalid: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            match v.rule {
                Some(i) => writeln!(f, "  rule {i}: {}", v.message)?,
                None => writeln!(f, "  {}", v.message)?,
            }
        }
        Ok(())
    }
}

/// Assignment of a state to every site of the line.
pub trait Configuration {
    fn state(&self, x: i64) -> State;
}

/// The constant configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Uniform(pub State);

impl Configuration for Uniform {
    fn state(&self, _x: i64) -> State {
        self.0
    }
}

/// Explicit states on some sites, a fill state elsewhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseConfig {
    pub states: HashMap<i64, State>,
    pub fill: State,
}

impl SparseConfig {
    pub fn new(fill: State) -> Self {
        Self {
            states: HashMap::new(),
            fill,
        }
    }
}

impl Configuration for SparseConfig {
    fn state(&self, x: i64) -> State {
        self.states.get(&x).copied().unwrap_or(self.fill)
    }
}

impl<C: Configuration + ?Sized> Configuration for &C {
    fn state(&self, x: i64) -> State {
        (**self).state(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Sites left of the window read `left`, sites right of it read `right`.
    Frozen { left: State, right: State },
    Periodic,
}

/// States on a contiguous interval of sites plus a boundary rule.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    start: i64,
    states: Vec<State>,
    boundary: Boundary,
}

impl WindowConfig {
    pub fn new(start: i64, states: Vec<State>, boundary: Boundary) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("empty window".into()));
        }
        Ok(Self {
            start,
            states,
            boundary,
        })
    }

    pub fn filled(start: i64, len: usize, fill: State, boundary: Boundary) -> Result<Self> {
        Self::new(start, vec![fill; len], boundary)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last site.
    pub fn end(&self) -> i64 {
        self.start + self.states.len() as i64
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.start && x < self.end()
    }

    /// Sets an interior site. Panics outside the window.
    pub fn set(&mut self, x: i64, s: State) {
        let i = (x - self.start) as usize;
        self.states[i] = s;
    }
}

impl Configuration for WindowConfig {
    fn state(&self, x: i64) -> State {
        if self.contains(x) {
            return self.states[(x - self.start) as usize];
        }
        match self.boundary {
            Boundary::Frozen { left, right } => {
                if x < self.start {
                    left
                } else {
                    right
                }
            }
            Boundary::Periodic => {
                let n = self.states.len() as i64;
                self.states[(x - self.start).rem_euclid(n) as usize]
            }
        }
    }
}

/// Whether `rule` is compatible with `cfg` at site `x`.
pub fn compatible<C: Configuration + ?Sized>(rule: &Rule, cfg: &C, x: i64) -> bool {
    if rule.offsets.is_empty() {
        return true;
    }
    let mut read = [State(0); 8];
    if rule.offsets.len() <= read.len() {
        for (slot, a) in read.iter_mut().zip(&rule.offsets) {
            *slot = cfg.state(x + a);
        }
        rule.matches(&read[..rule.offsets.len()])
    } else {
        let read: Vec<State> = rule.offsets.iter().map(|a| cfg.state(x + a)).collect();
        rule.matches(&read)
    }
}

/// Largest configuration space accepted by [`exact_stationary`].
pub const MAX_EXACT_STATES: usize = 4096;

/// Stationary law of the chain restricted to `n_sites` sites `0..n_sites`.
///
/// Configurations are indexed with site `j` as the `j`-th base-`|S|` digit
/// (site 0 least significant).
pub fn exact_stationary(rs: &RuleSet, n_sites: usize, boundary: Boundary) -> Result<Vec<f64>> {
    let q = rs.alphabet().len();
    let n_states = q
        .checked_pow(n_sites as u32)
        .filter(|&n| n <= MAX_EXACT_STATES && n_sites > 0)
        .ok_or(Error::StateSpaceTooLarge {
            states: q.saturating_pow(n_sites as u32),
            limit: MAX_EXACT_STATES,
        })?;

    let generator = generator_matrix(rs, n_sites, boundary);

    let mut graph = DiGraph::<(), ()>::with_capacity(n_states, 0);
    let nodes: Vec<_> = (0..n_states).map(|_| graph.add_node(())).collect();
    for i in 0..n_states {
        for j in 0..n_states {
            if i != j && generator[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; n_states];
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            component[n.index()] = c;
        }
    }
    let mut closed = vec![true; sccs.len()];
    for e in graph.raw_edges() {
        let (a, b) = (component[e.source().index()], component[e.target().index()]);
        if a != b {
            closed[a] = false;
        }
    }
    let classes = closed.iter().filter(|&&c| c).count();
    if classes != 1 {
        return Err(Error::DegenerateChain { classes });
    }

    // pi Q = 0 with one balance equation replaced by normalization.
    let mut system = generator.transpose();
    for j in 0..n_states {
        system[(n_states - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n_states);
    rhs[n_states - 1] = 1.0;
    let pi = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateChain { classes })?;
    let mut pi: Vec<f64> = pi.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

/// Dense generator on `|S|^n_sites` configurations (rows sum to zero).
pub fn generator_matrix(rs: &RuleSet, n_sites: usize, boundary: Boundary) -> DMatrix<f64> {
    let q = rs.alphabet().len();
    let n_states = q.pow(n_sites as u32);
    let mut generator = DMatrix::<f64>::zeros(n_states, n_states);
    let mut digits = vec![State(0); n_sites];
    for idx in 0..n_states {
        decode_config(idx, q, &mut digits);
        let cfg = WindowConfig {
            start: 0,
            states: digits.clone(),
            boundary,
        };
        for x in 0..n_sites {
            for rule in rs.rules() {
                if rule.rate <= 0.0 || rule.target == digits[x] {
                    continue;
                }
                if compatible(rule, &cfg, x as i64) {
                    let shift = q.pow(x as u32);
                    let to = idx - digits[x].index() * shift + rule.target.index() * shift;
                    generator[(idx, to)] += rule.rate;
                    generator[(idx, idx)] -= rule.rate;
                }
            }
        }
    }
    generator
}

/// Writes the site states of configuration `idx` into `out`.
pub fn decode_config(idx: usize, q: usize, out: &mut [State]) {
    let mut rest = idx;
    for slot in out.iter_mut() {
        *slot = State((rest % q) as u8);
        rest /= q;
    }
}

/// Marginal law of one site from a joint vector produced by [`exact_stationary`].
pub fn site_marginal(joint: &[f64], q: usize, n_sites: usize, site: usize) -> Vec<f64> {
    let mut out = vec![0.0; q];
    let mut digits = vec![State(0); n_sites];
    for (idx, p) in joint.iter().enumerate() {
        decode_config(idx, q, &mut digits);
        out[digits[site].index()] += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jc_rules(rate: f64) -> RuleSet {
        let mut rs = RuleSet::new(Alphabet::nucleotides());
        for s in 0..4 {
            rs.push(
                Rule::unconditional(State(s), rate),
                RuleClass::NonPerturbative,
                format!("U{s}"),
            );
        }
        rs
    }

    #[test]
    fn empty_context_is_always_compatible() {
        let rule = Rule::unconditional(State(2), 1.0);
        for fill in 0..4 {
            assert!(compatible(&rule, &Uniform(State(fill)), -7));
        }
    }

    #[test]
    fn dinucleotide_pattern() {
        let (c, g, a) = (State(2), State(3), State(0));
        let rule = Rule::new(vec![0, 1], vec![vec![c, g]], State(1), 1.0);
        let cfg = WindowConfig::new(
            0,
            vec![c, g, c, a],
            Boundary::Frozen { left: a, right: a },
        )
        .unwrap();
        assert!(compatible(&rule, &cfg, 0));
        assert!(!compatible(&rule, &cfg, 2));
        // frozen boundary supplies the right neighbour of the last site
        assert!(!compatible(&rule, &cfg, 3));
    }

    #[test]
    fn periodic_wraps() {
        let (c, g) = (State(2), State(3));
        let rule = Rule::new(vec![0, 1], vec![vec![g, c]], State(1), 1.0);
        let cfg = WindowConfig::new(0, vec![c, State(0), g], Boundary::Periodic).unwrap();
        assert!(compatible(&rule, &cfg, 2));
        assert_eq!(cfg.state(-1), g);
        assert_eq!(cfg.state(5), g);
    }

    #[test]
    fn validation_flags_bad_rules() {
        let mut rs = jc_rules(1.0);
        assert!(rs.validate().is_valid());
        rs.push(
            Rule::unconditional(State(0), -1.0),
            RuleClass::NonPerturbative,
            "neg",
        );
        rs.push(
            Rule::new(vec![0, 1], vec![vec![State(0)]], State(1), 1.0),
            RuleClass::Perturbative,
            "arity",
        );
        let report = rs.validate();
        let kinds: Vec<_> = report.violations.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![ViolationKind::NegativeRate, ViolationKind::PatternArity]
        );
        assert!(report.violations[0].message.contains("negative rate"));
        assert!(report.violations[1].message.contains("pattern arity"));
    }

    #[test]
    fn jukes_cantor_single_site_is_uniform() {
        let pi = exact_stationary(&jc_rules(1.0), 1, Boundary::Periodic).unwrap();
        for p in pi {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rates_are_degenerate() {
        let err = exact_stationary(&jc_rules(0.0), 1, Boundary::Periodic).unwrap_err();
        assert_eq!(err, Error::DegenerateChain { classes: 4 });
    }

    #[test]
    fn oversized_state_space_is_rejected() {
        let err = exact_stationary(&jc_rules(1.0), 7, Boundary::Periodic).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { .. }));
    }

    #[test]
    fn stationary_vector_annihilates_generator() {
        let mut rs = jc_rules(0.7);
        let (c, g) = (State(2), State(3));
        rs.push(
            Rule::new(vec![0, 1], vec![vec![c, g]], State(1), 3.0),
            RuleClass::NonPerturbative,
            "CpG",
        );
        for boundary in [Boundary::Periodic, Boundary::Frozen { left: c, right: g }] {
            let pi = exact_stationary(&rs, 3, boundary).unwrap();
            let q = generator_matrix(&rs, 3, boundary);
            let row = DVector::from_vec(pi.clone()).transpose() * q;
            assert!(row.amax() <= 1e-10);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(pi.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn duplicated_rules_add() {
        let mut base = jc_rules(1.0);
        let (c, g) = (State(2), State(3));
        base.push(
            Rule::new(vec![0, 1], vec![vec![c, g]], State(1), 2.0),
            RuleClass::NonPerturbative,
            "CpG",
        );
        let mut split = jc_rules(1.0);
        for _ in 0..2 {
            split.push(
                Rule::new(vec![0, 1], vec![vec![c, g]], State(1), 1.0),
                RuleClass::NonPerturbative,
                "CpG/2",
            );
        }
        let a = exact_stationary(&base, 2, Boundary::Periodic).unwrap();
        let b = exact_stationary(&split, 2, Boundary::Periodic).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
}
