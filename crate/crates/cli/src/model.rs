//! Plain-text model files: named sections of `key = value` lines.
//!
//! ```text
//! [model]
//! kind = jc_cpg
//! delta = 2
//! eps.A>C = 0.1
//!
//! [coupling]
//! spec = sensitive
//!
//! [run]
//! seed = 7
//! sites = 0..4
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use ipscftp_core::coupling::{make_insensitive_spec, make_sensitive_spec, CouplingSpec, SpecSet};
use ipscftp_core::rulesys::{Alphabet, Rule, RuleClass, RuleSet, State};
use ipscftp_core::ypr::{
    jukes_cantor_cpg, nucleotide_label, CompiledModel, PerturbationSpec, RNMatrix, YpRModel, YpRRates,
    NUCLEOTIDES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn perr<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        column,
        message: message.into(),
    })
}

/// One explicit rule: `rule.NAME = offsets=.. patterns=.. target=.. rate=.. class=..`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleDecl {
    pub name: String,
    pub offsets: Vec<i64>,
    /// Each pattern lists one label per offset.
    pub patterns: Vec<Vec<String>>,
    pub target: String,
    pub rate: f64,
    pub perturbative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSection {
    /// Jukes–Cantor with CpG rate `delta` plus perturbations.
    JcCpg { delta: f64, pert: PerturbationSpec },
    Ypr(YpRModel),
    Rules(Vec<RuleDecl>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingChoice {
    Sensitive,
    Insensitive,
    /// Rule names per set, in [`SpecSet::ALL`] order.
    Explicit(Vec<(SpecSet, Vec<String>)>),
}

/// Inclusive site range `a..b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteRange {
    pub start: i64,
    pub end: i64,
}

impl SiteRange {
    pub fn sites(&self) -> Vec<i64> {
        (self.start..=self.end).collect()
    }
}

impl fmt::Display for SiteRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl std::str::FromStr for SiteRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (a, b),
            None => (s, s),
        };
        let parse = |v: &str| {
            v.trim()
                .parse::<i64>()
                .map_err(|_| format!("expected a site or a range `a..b`, got `{s}`"))
        };
        let (start, end) = (parse(a)?, parse(b)?);
        if end < start {
            return Err(format!("empty site range `{s}`"));
        }
        Ok(Self { start, end })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub sites: Option<SiteRange>,
    pub duration: Option<f64>,
    pub budget: Option<usize>,
    pub lookback: Option<f64>,
    pub gate_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub alphabet: Option<Vec<String>>,
    pub model: ModelSection,
    pub coupling: CouplingChoice,
    pub run: RunSection,
}

struct Entry {
    line: usize,
    key: String,
    key_col: usize,
    value: String,
    value_col: usize,
}

fn split_sections(text: &str) -> Result<Vec<(String, usize, Vec<Entry>)>, ParseError> {
    let mut sections: Vec<(String, usize, Vec<Entry>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_start();
        let indent = raw.len() - trimmed.len();
        let body = trimmed.trim_end();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return perr(line, indent + body.len(), "section header is missing `]`");
            };
            let name = name.trim();
            if !matches!(name, "alphabet" | "model" | "coupling" | "run") {
                return perr(
                    line,
                    indent + 2,
                    format!("unknown section `{name}` (expected alphabet, model, coupling or run)"),
                );
            }
            if sections.iter().any(|s| s.0 == name) {
                return perr(line, indent + 1, format!("section `{name}` appears twice"));
            }
            sections.push((name.to_string(), line, Vec::new()));
            continue;
        }
        let Some(eq) = body.find('=') else {
            return perr(line, indent + 1, "expected `key = value` or a `[section]` header");
        };
        let Some(current) = sections.last_mut() else {
            return perr(line, indent + 1, "entry before any `[section]` header");
        };
        let key = body[..eq].trim_end();
        if key.is_empty() {
            return perr(line, indent + 1, "missing key before `=`");
        }
        let after = &body[eq + 1..];
        let value = after.trim_start();
        let value_col = indent + eq + 2 + (after.len() - value.len());
        if current.2.iter().any(|e| e.key == key) {
            return perr(line, indent + 1, format!("duplicate key `{key}`"));
        }
        current.2.push(Entry {
            line,
            key: key.to_string(),
            key_col: indent + 1,
            value: value.to_string(),
            value_col,
        });
    }
    Ok(sections)
}

fn num<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, ParseError> {
    e.value
        .parse::<T>()
        .or_else(|_| perr(e.line, e.value_col, format!("`{}` expects {what}, got `{}`", e.key, e.value)))
}

fn nucleotide(e: &Entry, col: usize, c: char) -> Result<State, ParseError> {
    NUCLEOTIDES
        .iter()
        .copied()
        .find(|&s| nucleotide_label(s).starts_with(c))
        .map_or_else(
            || perr(e.line, col, format!("`{c}` is not a nucleotide (A, T, C or G)")),
            Ok,
        )
}

fn parse_eps(e: &Entry, spec: &str, pert: &mut PerturbationSpec) -> Result<(), ParseError> {
    let rate: f64 = num(e, "a rate")?;
    let col = e.key_col + 4;
    let Some((from, to)) = spec.split_once('>') else {
        return perr(e.line, col, format!("perturbation `{spec}` must look like `X>Y`, `ZX>ZY` or `XZ>YZ`"));
    };
    let a: Vec<char> = from.chars().collect();
    let b: Vec<char> = to.chars().collect();
    match (a.as_slice(), b.as_slice()) {
        ([x], [y]) => {
            let (x, y) = (nucleotide(e, col, *x)?, nucleotide(e, col + 2, *y)?);
            pert.single.insert((x, y), rate);
        }
        ([a1, a2], [b1, b2]) if a1 == b1 && a2 != b2 => {
            let z = nucleotide(e, col, *a1)?;
            let x = nucleotide(e, col + 1, *a2)?;
            let y = nucleotide(e, col + 4, *b2)?;
            pert.left.insert((z, x, y), rate);
        }
        ([a1, a2], [b1, b2]) if a2 == b2 && a1 != b1 => {
            let x = nucleotide(e, col, *a1)?;
            let z = nucleotide(e, col + 1, *a2)?;
            let y = nucleotide(e, col + 3, *b1)?;
            pert.right.insert((x, z, y), rate);
        }
        _ => {
            return perr(
                e.line,
                col,
                format!("perturbation `{spec}` must change exactly one site (`X>Y`, `ZX>ZY` or `XZ>YZ`)"),
            )
        }
    }
    Ok(())
}

fn parse_four(e: &Entry) -> Result<[f64; 4], ParseError> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return perr(e.line, e.value_col, format!("`{}` expects four comma-separated rates (A,T,C,G)", e.key));
    }
    let mut out = [0.0; 4];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse()
            .or_else(|_| perr(e.line, e.value_col, format!("`{p}` is not a number")))?;
    }
    Ok(out)
}

fn parse_rule(e: &Entry, name: &str) -> Result<RuleDecl, ParseError> {
    let mut decl = RuleDecl {
        name: name.to_string(),
        offsets: Vec::new(),
        patterns: Vec::new(),
        target: String::new(),
        rate: f64::NAN,
        perturbative: false,
    };
    let mut seen = Vec::new();
    let mut col = e.value_col;
    for field in e.value.split_whitespace() {
        let off = e.value[col - e.value_col..].find(field).unwrap_or(0);
        let fcol = col + off;
        col = fcol + field.len();
        let Some((k, v)) = field.split_once('=') else {
            return perr(e.line, fcol, format!("rule field `{field}` must be `name=value`"));
        };
        if seen.contains(&k) {
            return perr(e.line, fcol, format!("rule field `{k}` given twice"));
        }
        seen.push(k);
        match k {
            "offsets" => {
                decl.offsets = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<i64>())
                    .collect::<Result<_, _>>()
                    .or_else(|_| perr(e.line, fcol, format!("bad offsets `{v}`")))?;
            }
            "patterns" => {
                decl.patterns = v
                    .split('|')
                    .filter(|s| !s.is_empty())
                    .map(|p| p.split('.').map(str::to_string).collect())
                    .collect();
            }
            "target" => decl.target = v.to_string(),
            "rate" => {
                decl.rate = v
                    .parse()
                    .or_else(|_| perr(e.line, fcol, format!("bad rate `{v}`")))?;
            }
            "class" => {
                decl.perturbative = match v {
                    "perturbative" => true,
                    "nonperturbative" => false,
                    _ => return perr(e.line, fcol, "class must be `perturbative` or `nonperturbative`"),
                }
            }
            _ => return perr(e.line, fcol, format!("unknown rule field `{k}`")),
        }
    }
    for required in ["target", "rate"] {
        if !seen.contains(&required) {
            return perr(e.line, e.value_col, format!("rule `{name}` is missing `{required}=`"));
        }
    }
    Ok(decl)
}

fn parse_model(header: usize, entries: &[Entry]) -> Result<ModelSection, ParseError> {
    let Some(kind) = entries.iter().find(|e| e.key == "kind") else {
        return perr(header, 1, "[model] needs `kind = jc_cpg | ypr | rules`");
    };
    match kind.value.as_str() {
        "jc_cpg" => {
            let mut delta = None;
            let mut pert = PerturbationSpec::none();
            for e in entries {
                match e.key.as_str() {
                    "kind" => {}
                    "delta" => delta = Some(num::<f64>(e, "a number")?),
                    k if k.starts_with("eps.") => parse_eps(e, &k[4..], &mut pert)?,
                    k => return perr(e.line, e.key_col, format!("unknown key `{k}` for kind jc_cpg")),
                }
            }
            let Some(delta) = delta else {
                return perr(kind.line, kind.value_col, "kind jc_cpg needs `delta`");
            };
            Ok(ModelSection::JcCpg { delta, pert })
        }
        "ypr" => {
            let mut v = None;
            let mut w = None;
            let mut ypr = YpRRates::zero();
            let mut pert = PerturbationSpec::none();
            for e in entries {
                match e.key.as_str() {
                    "kind" => {}
                    "rn.v" => v = Some(parse_four(e)?),
                    "rn.w" => w = Some(parse_four(e)?),
                    k if k.starts_with("ypr.") => {
                        let pair: Vec<char> = k[4..].chars().collect();
                        if pair.len() != 2 {
                            return perr(e.line, e.key_col + 4, "YpR keys look like `ypr.CG`");
                        }
                        let x = nucleotide(e, e.key_col + 4, pair[0])?;
                        let y = nucleotide(e, e.key_col + 5, pair[1])?;
                        let r = num::<f64>(e, "a rate")?;
                        ypr.set(x, y, r)
                            .or_else(|err| perr(e.line, e.key_col, err.to_string()))?;
                    }
                    k if k.starts_with("eps.") => parse_eps(e, &k[4..], &mut pert)?,
                    k => return perr(e.line, e.key_col, format!("unknown key `{k}` for kind ypr")),
                }
            }
            let (Some(v), Some(w)) = (v, w) else {
                return perr(kind.line, kind.value_col, "kind ypr needs `rn.v` and `rn.w`");
            };
            Ok(ModelSection::Ypr(YpRModel {
                rn: RNMatrix { v, w },
                ypr,
                pert,
            }))
        }
        "rules" => {
            let mut rules = Vec::new();
            for e in entries {
                match e.key.as_str() {
                    "kind" => {}
                    k if k.starts_with("rule.") && k.len() > 5 => rules.push(parse_rule(e, &k[5..])?),
                    k => return perr(e.line, e.key_col, format!("unknown key `{k}` for kind rules")),
                }
            }
            if rules.is_empty() {
                return perr(kind.line, kind.value_col, "kind rules needs at least one `rule.NAME = ...`");
            }
            Ok(ModelSection::Rules(rules))
        }
        other => perr(
            kind.line,
            kind.value_col,
            format!("unknown model kind `{other}` (expected jc_cpg, ypr or rules)"),
        ),
    }
}

fn parse_coupling(header: usize, entries: &[Entry]) -> Result<CouplingChoice, ParseError> {
    let Some(spec) = entries.iter().find(|e| e.key == "spec") else {
        return perr(header, 1, "[coupling] needs `spec = sensitive | insensitive | explicit`");
    };
    match spec.value.as_str() {
        "sensitive" | "insensitive" => {
            if let Some(e) = entries.iter().find(|e| e.key != "spec") {
                return perr(e.line, e.key_col, format!("`{}` is only allowed with spec = explicit", e.key));
            }
            Ok(if spec.value == "sensitive" {
                CouplingChoice::Sensitive
            } else {
                CouplingChoice::Insensitive
            })
        }
        "explicit" => {
            let mut sets: Vec<(SpecSet, Vec<String>)> = SpecSet::ALL.iter().map(|&s| (s, Vec::new())).collect();
            for e in entries {
                if e.key == "spec" {
                    continue;
                }
                let Some(slot) = sets.iter_mut().find(|(s, _)| s.name() == e.key) else {
                    return perr(
                        e.line,
                        e.key_col,
                        format!("unknown coupling set `{}` (expected z0, z_plus, z_minus, zp_plus, zp_minus or p)", e.key),
                    );
                };
                slot.1 = e
                    .value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
            }
            Ok(CouplingChoice::Explicit(sets))
        }
        other => perr(
            spec.line,
            spec.value_col,
            format!("unknown coupling spec `{other}` (expected sensitive, insensitive or explicit)"),
        ),
    }
}

fn parse_run(entries: &[Entry]) -> Result<RunSection, ParseError> {
    let mut run = RunSection::default();
    for e in entries {
        match e.key.as_str() {
            "seed" => run.seed = Some(num(e, "an unsigned integer")?),
            "n" => run.n = Some(num(e, "an unsigned integer")?),
            "sites" => {
                run.sites = Some(
                    e.value
                        .parse()
                        .or_else(|m: String| perr(e.line, e.value_col, m))?,
                )
            }
            "duration" => run.duration = Some(num(e, "a number")?),
            "budget" => run.budget = Some(num(e, "an unsigned integer")?),
            "lookback" => run.lookback = Some(num(e, "a number")?),
            "gate_samples" => run.gate_samples = Some(num(e, "an unsigned integer")?),
            k => return perr(e.line, e.key_col, format!("unknown run key `{k}`")),
        }
    }
    Ok(run)
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let sections = split_sections(text)?;
        let get = |name: &str| sections.iter().find(|s| s.0 == name);
        let alphabet = match get("alphabet") {
            None => None,
            Some((_, header, entries)) => {
                let Some(e) = entries.iter().find(|e| e.key == "labels") else {
                    return perr(*header, 1, "[alphabet] needs `labels = a,b,...`");
                };
                if let Some(extra) = entries.iter().find(|e| e.key != "labels") {
                    return perr(extra.line, extra.key_col, format!("unknown alphabet key `{}`", extra.key));
                }
                Some(e.value.split(',').map(|s| s.trim().to_string()).collect())
            }
        };
        let Some((_, mh, me)) = get("model") else {
            return perr(1, 1, "missing [model] section");
        };
        let model = parse_model(*mh, me)?;
        let coupling = match get("coupling") {
            Some((_, ch, ce)) => parse_coupling(*ch, ce)?,
            None => CouplingChoice::Sensitive,
        };
        let run = match get("run") {
            Some((_, _, re)) => parse_run(re)?,
            None => RunSection::default(),
        };
        Ok(Self {
            alphabet,
            model,
            coupling,
            run,
        })
    }

    /// Canonical text; parsing it gives back `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        if let Some(labels) = &self.alphabet {
            let _ = writeln!(out, "[alphabet]\nlabels = {}\n", labels.join(","));
        }
        out.push_str("[model]\n");
        let eps = |out: &mut String, pert: &PerturbationSpec| {
            let l = nucleotide_label;
            for (&(x, y), r) in &pert.single {
                let _ = writeln!(out, "eps.{}>{} = {r}", l(x), l(y));
            }
            for (&(z, x, y), r) in &pert.left {
                let _ = writeln!(out, "eps.{z}{x}>{z}{y} = {r}", z = l(z), x = l(x), y = l(y));
            }
            for (&(x, z, y), r) in &pert.right {
                let _ = writeln!(out, "eps.{x}{z}>{y}{z} = {r}", z = l(z), x = l(x), y = l(y));
            }
        };
        match &self.model {
            ModelSection::JcCpg { delta, pert } => {
                let _ = writeln!(out, "kind = jc_cpg\ndelta = {delta}");
                eps(&mut out, pert);
            }
            ModelSection::Ypr(m) => {
                let four = |v: &[f64; 4]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
                let _ = writeln!(out, "kind = ypr\nrn.v = {}\nrn.w = {}", four(&m.rn.v), four(&m.rn.w));
                for ((x, y), r) in m.ypr.iter() {
                    if r != 0.0 {
                        let _ = writeln!(out, "ypr.{}{} = {r}", nucleotide_label(x), nucleotide_label(y));
                    }
                }
                eps(&mut out, &m.pert);
            }
            ModelSection::Rules(rules) => {
                out.push_str("kind = rules\n");
                for r in rules {
                    let offsets: Vec<String> = r.offsets.iter().map(i64::to_string).collect();
                    let patterns: Vec<String> = r.patterns.iter().map(|p| p.join(".")).collect();
                    let _ = writeln!(
                        out,
                        "rule.{} = offsets={} patterns={} target={} rate={} class={}",
                        r.name,
                        offsets.join(","),
                        patterns.join("|"),
                        r.target,
                        r.rate,
                        if r.perturbative { "perturbative" } else { "nonperturbative" }
                    );
                }
            }
        }
        out.push_str("\n[coupling]\n");
        match &self.coupling {
            CouplingChoice::Sensitive => out.push_str("spec = sensitive\n"),
            CouplingChoice::Insensitive => out.push_str("spec = insensitive\n"),
            CouplingChoice::Explicit(sets) => {
                out.push_str("spec = explicit\n");
                for (s, names) in sets {
                    let _ = writeln!(out, "{} = {}", s.name(), names.join(","));
                }
            }
        }
        let r = &self.run;
        let mut run = String::new();
        if let Some(v) = r.seed {
            let _ = writeln!(run, "seed = {v}");
        }
        if let Some(v) = r.n {
            let _ = writeln!(run, "n = {v}");
        }
        if let Some(v) = r.sites {
            let _ = writeln!(run, "sites = {v}");
        }
        if let Some(v) = r.duration {
            let _ = writeln!(run, "duration = {v}");
        }
        if let Some(v) = r.budget {
            let _ = writeln!(run, "budget = {v}");
        }
        if let Some(v) = r.lookback {
            let _ = writeln!(run, "lookback = {v}");
        }
        if let Some(v) = r.gate_samples {
            let _ = writeln!(run, "gate_samples = {v}");
        }
        if !run.is_empty() {
            let _ = write!(out, "\n[run]\n{run}");
        }
        out
    }

    /// Compiles the rule set and coupling spec.
    pub fn build(&self) -> ipscftp_core::Result<BuiltModel> {
        use ipscftp_core::Error;
        let ypr_model = match &self.model {
            ModelSection::JcCpg { delta, pert } => Some(jukes_cantor_cpg(*delta, pert.clone())?),
            ModelSection::Ypr(m) => Some(m.clone()),
            ModelSection::Rules(_) => None,
        };
        if let (Some(_), Some(labels)) = (&ypr_model, &self.alphabet) {
            if labels != &["A", "T", "C", "G"] {
                return Err(Error::InvalidModel {
                    field: "alphabet.labels".into(),
                    message: "nucleotide models use the alphabet A,T,C,G".into(),
                });
            }
        }
        let (rules, compiled) = match (&self.model, &ypr_model) {
            (_, Some(m)) => {
                m.validate()?;
                let c = m.compile();
                (c.rules.clone(), Some(c))
            }
            (ModelSection::Rules(decls), None) => (self.compile_rules(decls)?, None),
            _ => unreachable!(),
        };
        let spec = match (&self.coupling, &compiled) {
            (CouplingChoice::Sensitive, Some(c)) => make_sensitive_spec(c)?,
            (CouplingChoice::Insensitive, Some(c)) => make_insensitive_spec(c)?,
            (CouplingChoice::Sensitive | CouplingChoice::Insensitive, None) => {
                return Err(Error::InvalidModel {
                    field: "coupling.spec".into(),
                    message: "sensitive and insensitive specs need a nucleotide model; use spec = explicit".into(),
                })
            }
            (CouplingChoice::Explicit(sets), _) => {
                let mut indexed = Vec::new();
                for (s, names) in sets {
                    let mut idx = Vec::new();
                    for name in names {
                        let i = (0..rules.len()).find(|&i| rules.label(i) == name).ok_or_else(|| {
                            Error::InvalidModel {
                                field: format!("coupling.{}", s.name()),
                                message: format!("no rule named `{name}`"),
                            }
                        })?;
                        idx.push(i);
                    }
                    indexed.push((*s, idx));
                }
                let spec = CouplingSpec::from_sets(rules.len(), &indexed)?;
                spec.check_rates(&rules)?;
                spec
            }
        };
        let jc = match &self.model {
            ModelSection::JcCpg { delta, pert } => Some((*delta, pert.total())),
            _ => None,
        };
        Ok(BuiltModel {
            rules: Arc::new(rules),
            spec,
            compiled,
            jc,
        })
    }

    fn compile_rules(&self, decls: &[RuleDecl]) -> ipscftp_core::Result<RuleSet> {
        use ipscftp_core::Error;
        let alphabet = match &self.alphabet {
            Some(labels) => Alphabet::new(labels.iter().cloned())?,
            None => Alphabet::nucleotides(),
        };
        let state = |name: &str, label: &str| {
            alphabet.state(label).ok_or_else(|| Error::InvalidModel {
                field: format!("model.rule.{name}"),
                message: format!("unknown state `{label}`"),
            })
        };
        let mut rs = RuleSet::new(alphabet.clone());
        let mut names = BTreeMap::new();
        for d in decls {
            if names.insert(d.name.clone(), ()).is_some() {
                return Err(Error::InvalidModel {
                    field: format!("model.rule.{}", d.name),
                    message: "rule name used twice".into(),
                });
            }
            let patterns = d
                .patterns
                .iter()
                .map(|p| p.iter().map(|l| state(&d.name, l)).collect::<ipscftp_core::Result<Vec<_>>>())
                .collect::<ipscftp_core::Result<Vec<_>>>()?;
            let rule = Rule::new(d.offsets.clone(), patterns, state(&d.name, &d.target)?, d.rate);
            let class = if d.perturbative {
                RuleClass::Perturbative
            } else {
                RuleClass::NonPerturbative
            };
            rs.push(rule, class, d.name.clone());
        }
        Ok(rs)
    }
}

/// A compiled model ready for the commands.
pub struct BuiltModel {
    pub rules: Arc<RuleSet>,
    pub spec: CouplingSpec,
    pub compiled: Option<CompiledModel>,
    /// `(δ, |ε|)` for Jukes–Cantor with CpG files.
    pub jc: Option<(f64, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const JC: &str = "# JC + CpG\n[model]\nkind = jc_cpg\ndelta = 2\neps.A>C = 0.1\neps.CG>CA = 0.05\neps.TG>CG = 0.02\n\n[coupling]\nspec = sensitive\n\n[run]\nseed = 7\nsites = 0..3\n";

    #[test]
    fn parses_jc_file() {
        let m = ModelFile::parse(JC).unwrap();
        let ModelSection::JcCpg { delta, pert } = &m.model else {
            panic!("wrong kind")
        };
        assert_eq!(*delta, 2.0);
        assert_eq!(pert.single.len(), 1);
        assert_eq!(pert.left.len(), 1);
        assert_eq!(pert.right.len(), 1);
        assert_eq!(m.run.sites, Some(SiteRange { start: 0, end: 3 }));
        let built = m.build().unwrap();
        assert_eq!(built.jc, Some((2.0, 0.17)));
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let m = ModelFile::parse(JC).unwrap();
        let text = m.serialize();
        let again = ModelFile::parse(&text).unwrap();
        assert_eq!(m, again);
        assert_eq!(again.serialize(), text);
    }

    #[test]
    fn errors_carry_positions() {
        let e = ModelFile::parse("[model]\nkind = jc_cpg\ndelta = two\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 9));
        let e = ModelFile::parse("[model\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = ModelFile::parse("[model]\nkind = jc_cpg\ndelta = 1\nwhat\n").unwrap_err();
        assert_eq!((e.line, e.column), (4, 1));
        let e = ModelFile::parse("[model]\nkind = jc_cpg\n  colour = 1\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
    }

    #[test]
    fn explicit_rules() {
        let text = "[alphabet]\nlabels = up,down\n[model]\nkind = rules\nrule.a = offsets= patterns= target=up rate=1 class=nonperturbative\nrule.b = offsets= patterns= target=down rate=1 class=nonperturbative\nrule.c = offsets=-1,0 patterns=up.down target=up rate=0.1 class=perturbative\n[coupling]\nspec = explicit\nz0 = a,b\nz_plus = a,b\nz_minus = a,b\np = c\n";
        let m = ModelFile::parse(text).unwrap();
        assert_eq!(ModelFile::parse(&m.serialize()).unwrap(), m);
        let built = m.build().unwrap();
        assert_eq!(built.rules.len(), 3);
        assert_eq!(built.spec.members(SpecSet::P), vec![2]);
    }
}
