//! RN+YpR nucleotide substitution models and their perturbations.
//!
//! States are indexed in the order `A, T, C, G`. Purines are `R = {A, G}` and
//! pyrimidines `Y = {C, T}`; `x*` is the other member of the class of `x`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::rulesys::{Alphabet, Rule, RuleClass, RuleSet, State};

pub const A: State = State(0);
pub const T: State = State(1);
pub const C: State = State(2);
pub const G: State = State(3);

pub const NUCLEOTIDES: [State; 4] = [A, T, C, G];
pub const PURINES: [State; 2] = [A, G];
pub const PYRIMIDINES: [State; 2] = [T, C];

pub fn is_purine(s: State) -> bool {
    s == A || s == G
}

/// Transition partner: `A ↔ G`, `C ↔ T`.
pub fn star(s: State) -> State {
    match s {
        A => G,
        G => A,
        C => T,
        T => C,
        _ => panic!("not a nucleotide: {s:?}"),
    }
}

/// `𝓘_x`: the class opposite to that of `x`.
pub fn opposite_class(s: State) -> [State; 2] {
    if is_purine(s) {
        PYRIMIDINES
    } else {
        PURINES
    }
}

/// Same-class states `𝓐 ∖ 𝓘_x`.
pub fn same_class(s: State) -> [State; 2] {
    if is_purine(s) {
        PURINES
    } else {
        PYRIMIDINES
    }
}

pub fn nucleotide_label(s: State) -> &'static str {
    ["A", "T", "C", "G"][s.index()]
}

/// RN part: cross-class jumps into `y` at rate `v_y`, the transition
/// `y* → y` at rate `w_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RNMatrix {
    pub v: [f64; 4],
    pub w: [f64; 4],
}

impl RNMatrix {
    pub fn uniform(rate: f64) -> Self {
        Self {
            v: [rate; 4],
            w: [rate; 4],
        }
    }

    /// Off-diagonal entry `s_{x,y}`.
    pub fn entry(&self, x: State, y: State) -> f64 {
        if x == y {
            0.0
        } else if x == star(y) {
            self.w[y.index()]
        } else {
            self.v[y.index()]
        }
    }

    /// The 4×4 matrix with a zero diagonal.
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for x in NUCLEOTIDES {
            for y in NUCLEOTIDES {
                m[x.index()][y.index()] = self.entry(x, y);
            }
        }
        m
    }

    /// (ND): every `v_x` and `w_x` positive.
    pub fn non_degenerate(&self) -> bool {
        self.v.iter().chain(&self.w).all(|&r| r > 0.0)
    }
}

/// The eight neighbour-dependent transition rates `r_x^y`.
///
/// For a purine `x`, `y ∈ Y` is the left neighbour; for a pyrimidine `x`,
/// `y ∈ R` is the right neighbour. The transition goes to `x*`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YpRRates {
    rates: [f64; 8],
}

impl YpRRates {
    /// Legal `(source, neighbour)` pairs in storage order.
    pub const PAIRS: [(State, State); 8] = [
        (A, C),
        (T, G),
        (C, A),
        (G, T),
        (G, C),
        (T, A),
        (C, G),
        (A, T),
    ];

    pub fn zero() -> Self {
        Self::default()
    }

    fn slot(x: State, y: State) -> Option<usize> {
        Self::PAIRS.iter().position(|&p| p == (x, y))
    }

    pub fn get(&self, x: State, y: State) -> Option<f64> {
        Self::slot(x, y).map(|i| self.rates[i])
    }

    pub fn set(&mut self, x: State, y: State, rate: f64) -> Result<()> {
        let i = Self::slot(x, y).ok_or_else(|| Error::InvalidModel {
            field: format!("ypr.{}.{}", nucleotide_label(x), nucleotide_label(y)),
            message: "source and neighbour must lie in opposite classes".into(),
        })?;
        self.rates[i] = rate;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = ((State, State), f64)> + '_ {
        Self::PAIRS.iter().copied().zip(self.rates.iter().copied())
    }
}

/// Perturbative rates, all sparse and nonnegative.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationSpec {
    /// `ε(x, y)`: single-site `x → y`.
    pub single: BTreeMap<(State, State), f64>,
    /// `ε(zx, zy)` keyed `(z, x, y)`: `x → y` with left neighbour `z`.
    pub left: BTreeMap<(State, State, State), f64>,
    /// `ε(xz, yz)` keyed `(x, z, y)`: `x → y` with right neighbour `z`.
    pub right: BTreeMap<(State, State, State), f64>,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_single(mut self, x: State, y: State, rate: f64) -> Self {
        self.single.insert((x, y), rate);
        self
    }

    /// `|ε|`, the sum of every perturbation rate.
    pub fn total(&self) -> f64 {
        self.single.values().chain(self.left.values()).chain(self.right.values()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: String, message: &str| Error::InvalidModel {
            field,
            message: message.into(),
        };
        for (&(x, y), &r) in &self.single {
            let field = format!("eps.{}>{}", nucleotide_label(x), nucleotide_label(y));
            if x == y {
                return Err(bad(field, "source and target must differ"));
            }
            if !(r >= 0.0) || !r.is_finite() {
                return Err(bad(field, "rate must be a finite value >= 0"));
            }
        }
        for (&(z, x, y), &r) in &self.left {
            let field = format!(
                "eps.{z}{x}>{z}{y}",
                z = nucleotide_label(z),
                x = nucleotide_label(x),
                y = nucleotide_label(y)
            );
            if x == y {
                return Err(bad(field, "source and target must differ"));
            }
            if !(r >= 0.0) || !r.is_finite() {
                return Err(bad(field, "rate must be a finite value >= 0"));
            }
        }
        for (&(x, z, y), &r) in &self.right {
            let field = format!(
                "eps.{x}{z}>{y}{z}",
                z = nucleotide_label(z),
                x = nucleotide_label(x),
                y = nucleotide_label(y)
            );
            if x == y {
                return Err(bad(field, "source and target must differ"));
            }
            if !(r >= 0.0) || !r.is_finite() {
                return Err(bad(field, "rate must be a finite value >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YpRModel {
    pub rn: RNMatrix,
    pub ypr: YpRRates,
    pub pert: PerturbationSpec,
}

/// Which family a compiled rule belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTag {
    U(State),
    V(State),
    W(State),
    /// `𝓡ʸ_{xz,yz}`: pyrimidine `x → y` reading the right neighbour `z`.
    Y { x: State, y: State, z: State },
    /// `𝓡ᴿ_{zx,zy}`: purine `x → y` reading the left neighbour `z`.
    R { z: State, x: State, y: State },
    EpsSingle { x: State, y: State },
    EpsLeft { z: State, x: State, y: State },
    EpsRight { x: State, z: State, y: State },
}

impl RuleTag {
    pub fn target(&self) -> State {
        match *self {
            RuleTag::U(s) | RuleTag::V(s) | RuleTag::W(s) => s,
            RuleTag::Y { y, .. }
            | RuleTag::R { y, .. }
            | RuleTag::EpsSingle { y, .. }
            | RuleTag::EpsLeft { y, .. }
            | RuleTag::EpsRight { y, .. } => y,
        }
    }

    pub fn is_perturbative(&self) -> bool {
        matches!(
            self,
            RuleTag::EpsSingle { .. } | RuleTag::EpsLeft { .. } | RuleTag::EpsRight { .. }
        )
    }
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = nucleotide_label;
        match *self {
            RuleTag::U(s) => write!(f, "U_{}", l(s)),
            RuleTag::V(s) => write!(f, "V_{}", l(s)),
            RuleTag::W(s) => write!(f, "W_{}", l(s)),
            RuleTag::Y { x, y, z } => write!(f, "Y_{}{},{}{}", l(x), l(z), l(y), l(z)),
            RuleTag::R { z, x, y } => write!(f, "R_{}{},{}{}", l(z), l(x), l(z), l(y)),
            RuleTag::EpsSingle { x, y } => write!(f, "eps_{},{}", l(x), l(y)),
            RuleTag::EpsLeft { z, x, y } => write!(f, "eps_{}{},{}{}", l(z), l(x), l(z), l(y)),
            RuleTag::EpsRight { x, z, y } => {
                write!(f, "eps_{}{},{}{}", l(x), l(z), l(y), l(z))
            }
        }
    }
}

/// A compiled model: the rule set plus the family of every rule index.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    pub rules: RuleSet,
    pub tags: Vec<RuleTag>,
}

impl CompiledModel {
    pub fn indices(&self, pred: impl Fn(&RuleTag) -> bool) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| pred(&self.tags[i])).collect()
    }
}

impl YpRModel {
    pub fn validate(&self) -> Result<()> {
        for s in NUCLEOTIDES {
            for (name, r) in [("v", self.rn.v[s.index()]), ("w", self.rn.w[s.index()])] {
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::InvalidModel {
                        field: format!("{name}.{}", nucleotide_label(s)),
                        message: "rate must be a finite value >= 0".into(),
                    });
                }
            }
        }
        for ((x, y), r) in self.ypr.iter() {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::InvalidModel {
                    field: format!("ypr.{}.{}", nucleotide_label(x), nucleotide_label(y)),
                    message: "rate must be a finite value >= 0".into(),
                });
            }
        }
        self.pert.validate()
    }

    /// Emits 4 U, 4 V, 4 W, 4 Y and 4 R rules (each group in `A, T, C, G`
    /// target order), then every nonzero perturbative rule: single-site by
    /// `(x, y)`, left-dinucleotide by `(z, x, y)`, right-dinucleotide by
    /// `(x, z, y)`.
    pub fn compile(&self) -> CompiledModel {
        let mut rules = RuleSet::new(Alphabet::nucleotides());
        let mut tags = Vec::new();
        let mut push = |rule: Rule, tag: RuleTag| {
            let class = if tag.is_perturbative() {
                RuleClass::Perturbative
            } else {
                RuleClass::NonPerturbative
            };
            rules.push(rule, class, tag.to_string());
            tags.push(tag);
        };
        let (v, w) = (self.rn.v, self.rn.w);
        for x in NUCLEOTIDES {
            let i = x.index();
            push(Rule::unconditional(x, v[i].min(w[i])), RuleTag::U(x));
        }
        for x in NUCLEOTIDES {
            let i = x.index();
            push(
                Rule::single_site(opposite_class(x), x, (v[i] - w[i]).max(0.0)),
                RuleTag::V(x),
            );
        }
        for x in NUCLEOTIDES {
            let i = x.index();
            push(
                Rule::single_site(same_class(x), x, (w[i] - v[i]).max(0.0)),
                RuleTag::W(x),
            );
        }
        for x in [C, T] {
            let y = star(x);
            for z in PURINES {
                let rate = self.ypr.get(x, z).unwrap_or(0.0);
                push(
                    Rule::new(vec![0, 1], vec![vec![x, z]], y, rate),
                    RuleTag::Y { x, y, z },
                );
            }
        }
        for x in PURINES {
            let y = star(x);
            for z in [C, T] {
                let rate = self.ypr.get(x, z).unwrap_or(0.0);
                push(
                    Rule::new(vec![-1, 0], vec![vec![z, x]], y, rate),
                    RuleTag::R { z, x, y },
                );
            }
        }
        for (&(x, y), &r) in &self.pert.single {
            if r > 0.0 {
                push(Rule::single_site([x], y, r), RuleTag::EpsSingle { x, y });
            }
        }
        for (&(z, x, y), &r) in &self.pert.left {
            if r > 0.0 {
                push(
                    Rule::new(vec![-1, 0], vec![vec![z, x]], y, r),
                    RuleTag::EpsLeft { z, x, y },
                );
            }
        }
        for (&(x, z, y), &r) in &self.pert.right {
            if r > 0.0 {
                push(
                    Rule::new(vec![0, 1], vec![vec![x, z]], y, r),
                    RuleTag::EpsRight { x, z, y },
                );
            }
        }
        CompiledModel { rules, tags }
    }
}

/// Compiles a model to its canonical rule list.
pub fn compile_rules(model: &YpRModel) -> RuleSet {
    model.compile().rules
}

/// Projects a generic single-site rate matrix onto RN form.
///
/// `w_y := s_{y*,y}`, `v_y` is the smaller cross-class entry of column `y`,
/// and the leftover cross-class rate becomes a single-site perturbation.
pub fn decompose_general_rates(s: &[[f64; 4]; 4]) -> Result<(RNMatrix, PerturbationSpec)> {
    let mut rn = RNMatrix {
        v: [0.0; 4],
        w: [0.0; 4],
    };
    let mut pert = PerturbationSpec::none();
    for x in NUCLEOTIDES {
        for y in NUCLEOTIDES {
            let r = s[x.index()][y.index()];
            if x != y && (!(r >= 0.0) || !r.is_finite()) {
                return Err(Error::InvalidModel {
                    field: format!("s.{}.{}", nucleotide_label(x), nucleotide_label(y)),
                    message: "off-diagonal rates must be finite and >= 0".into(),
                });
            }
        }
    }
    for y in NUCLEOTIDES {
        let j = y.index();
        rn.w[j] = s[star(y).index()][j];
        let cross = opposite_class(y);
        let v = cross
            .iter()
            .map(|x| s[x.index()][j])
            .fold(f64::INFINITY, f64::min);
        rn.v[j] = v;
        for x in cross {
            let residual = s[x.index()][j] - v;
            if residual > 0.0 {
                pert.single.insert((x, y), residual);
            }
        }
    }
    Ok((rn, pert))
}

/// Jukes–Cantor with CpG influence `δ` (CpG → CpA and CpG → TpG at rate `δ`).
pub fn jukes_cantor_cpg(delta: f64, pert: PerturbationSpec) -> Result<YpRModel> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidModel {
            field: "delta".into(),
            message: format!("must be a finite value >= 0, got {delta}"),
        });
    }
    let mut ypr = YpRRates::zero();
    ypr.set(G, C, delta)?;
    ypr.set(C, G, delta)?;
    let model = YpRModel {
        rn: RNMatrix::uniform(1.0),
        ypr,
        pert,
    };
    model.validate()?;
    Ok(model)
}

/// Extended labels used by the purine/pyrimidine fusing maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    A,
    T,
    C,
    G,
    R,
    Y,
}

impl Label {
    pub fn of(s: State) -> Self {
        match s {
            A => Label::A,
            T => Label::T,
            C => Label::C,
            G => Label::G,
            _ => panic!("not a nucleotide: {s:?}"),
        }
    }
}

/// `ϱ`: fuses the purines.
pub fn rho(l: Label) -> Label {
    match l {
        Label::A | Label::G | Label::R => Label::R,
        other => other,
    }
}

/// `η`: fuses the pyrimidines.
pub fn eta(l: Label) -> Label {
    match l {
        Label::C | Label::T | Label::Y => Label::Y,
        other => other,
    }
}

/// `(ϱ(left), center, η(right))`.
pub fn fuse_triple(t: [Label; 3]) -> [Label; 3] {
    [rho(t[0]), t[1], eta(t[2])]
}

pub fn fuse_states(s: [State; 3]) -> [Label; 3] {
    fuse_triple([Label::of(s[0]), Label::of(s[1]), Label::of(s[2])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rulesys::{compatible, WindowConfig, Boundary};

    #[test]
    fn jukes_cantor_compiles_to_unit_u_rules() {
        let m = jukes_cantor_cpg(0.0, PerturbationSpec::none()).unwrap().compile();
        assert_eq!(m.rules.len(), 20);
        assert!(m.rules.validate().is_valid());
        for i in 0..4 {
            assert_eq!(m.rules.rate(i), 1.0);
        }
        for i in 4..20 {
            assert_eq!(m.rules.rate(i), 0.0);
        }
    }

    #[test]
    fn cpg_rules() {
        let m = jukes_cantor_cpg(2.5, PerturbationSpec::none()).unwrap().compile();
        let g_to_a = m
            .indices(|t| *t == RuleTag::R { z: C, x: G, y: A })
            .pop()
            .unwrap();
        let r = m.rules.rule(g_to_a);
        assert_eq!(r.offsets(), &[-1, 0]);
        assert_eq!(r.patterns(), &[vec![C, G]]);
        assert_eq!(r.rate(), 2.5);
        let c_to_t = m
            .indices(|t| *t == RuleTag::Y { x: C, y: T, z: G })
            .pop()
            .unwrap();
        let r = m.rules.rule(c_to_t);
        assert_eq!(r.offsets(), &[0, 1]);
        assert_eq!(r.patterns(), &[vec![C, G]]);
        assert_eq!(r.target(), T);
        assert_eq!(r.rate(), 2.5);
        let cfg = WindowConfig::new(0, vec![C, G], Boundary::Periodic).unwrap();
        assert!(compatible(r, &cfg, 0));
        let cfg = WindowConfig::new(0, vec![C, A], Boundary::Periodic).unwrap();
        assert!(!compatible(r, &cfg, 0));
    }

    #[test]
    fn v_rule_reads_opposite_class() {
        let model = YpRModel {
            rn: RNMatrix {
                v: [2.0, 1.0, 1.0, 1.0],
                w: [1.0; 4],
            },
            ypr: YpRRates::zero(),
            pert: PerturbationSpec::none(),
        };
        let m = model.compile();
        let va = m.rules.rule(4);
        assert_eq!(m.tags[4], RuleTag::V(A));
        assert_eq!(va.offsets(), &[0]);
        assert_eq!(va.patterns(), &[vec![T], vec![C]]);
        assert_eq!(va.rate(), 1.0);
    }

    #[test]
    fn single_site_totals_match_rn_matrix() {
        let rn = RNMatrix {
            v: [0.3, 1.1, 0.7, 2.0],
            w: [1.5, 0.2, 0.7, 0.9],
        };
        let model = YpRModel {
            rn,
            ypr: YpRRates::zero(),
            pert: PerturbationSpec::none(),
        };
        let m = model.compile();
        for x in NUCLEOTIDES {
            for y in NUCLEOTIDES {
                if x == y {
                    continue;
                }
                let total: f64 = (0..20)
                    .filter(|&i| m.rules.rule(i).target() == y)
                    .filter(|&i| m.rules.rule(i).matches(&[x]))
                    .map(|i| m.rules.rate(i))
                    .sum();
                assert!((total - rn.entry(x, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn decomposition() {
        let jc = [[0.0, 1.0, 1.0, 1.0], [1.0, 0.0, 1.0, 1.0], [1.0, 1.0, 0.0, 1.0], [1.0, 1.0, 1.0, 0.0]];
        let (rn, pert) = decompose_general_rates(&jc).unwrap();
        assert_eq!(rn, RNMatrix::uniform(1.0));
        assert!(pert.single.is_empty());

        let mut s = jc;
        // column A: cross-class rows T and C
        s[T.index()][A.index()] = 1.0;
        s[C.index()][A.index()] = 1.2;
        let (rn, pert) = decompose_general_rates(&s).unwrap();
        assert_eq!(rn.v[A.index()], 1.0);
        assert_eq!(pert.single.len(), 1);
        assert!((pert.single[&(C, A)] - 0.2).abs() < 1e-15);
        for x in NUCLEOTIDES {
            for y in NUCLEOTIDES {
                if x != y {
                    let back = rn.entry(x, y) + pert.single.get(&(x, y)).copied().unwrap_or(0.0);
                    assert!((back - s[x.index()][y.index()]).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn epsilon_total() {
        let p = PerturbationSpec::none().with_single(A, C, 0.05).with_single(G, T, 0.05);
        assert!((p.total() - 0.1).abs() < 1e-15);
        let m = jukes_cantor_cpg(0.0, p).unwrap().compile();
        assert_eq!(m.rules.len(), 22);
        assert_eq!(m.rules.perturbative().count(), 2);
    }

    #[test]
    fn negative_delta_is_rejected() {
        let err = jukes_cantor_cpg(-1.0, PerturbationSpec::none()).unwrap_err();
        assert!(matches!(err, Error::InvalidModel { ref field, .. } if field == "delta"));
    }

    #[test]
    fn fusing() {
        assert_eq!(fuse_states([A, C, T]), [Label::R, Label::C, Label::Y]);
        assert_eq!(fuse_states([G, G, G]), [Label::R, Label::G, Label::G]);
        for a in NUCLEOTIDES {
            for b in NUCLEOTIDES {
                for c in NUCLEOTIDES {
                    let once = fuse_states([a, b, c]);
                    assert_eq!(fuse_triple(once), once);
                }
            }
        }
    }
}
