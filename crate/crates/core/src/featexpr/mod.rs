//! Feature expressions: propositional formulas over boolean features.
//!
//! Every annotation in the engine (attribute, relation and tuple presence
//! conditions, feature models, choice dimensions) is a [`FeatureExpr`].
//! Satisfiability and tautology are decided over the features that occur in
//! the formula; see [`solver`] for the decision procedures.

mod parse;
pub mod simplify;
pub mod solver;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse_fexp, parse_fexp_from};
pub use simplify::{canonical, simplify, simplify_with_care};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FexpError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(FeatureName),
    #[error("invalid feature name `{0}`")]
    InvalidName(String),
    #[error("too many features ({count}); at most {limit} can be enumerated")]
    TooManyFeatures { count: usize, limit: usize },
}

/// Name of a boolean feature.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureName(Arc<str>);

impl FeatureName {
    pub fn new(name: &str) -> Result<Self, FexpError> {
        let mut chars = name.chars();
        let valid = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
            && name != "true"
            && name != "false";
        if valid {
            Ok(Self(Arc::from(name)))
        } else {
            Err(FexpError::InvalidName(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A propositional formula over features.
///
/// Negation is allowed on arbitrary subformulas.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureExpr {
    Lit(bool),
    Feature(FeatureName),
    Not(Box<FeatureExpr>),
    And(Box<FeatureExpr>, Box<FeatureExpr>),
    Or(Box<FeatureExpr>, Box<FeatureExpr>),
}

impl Default for FeatureExpr {
    fn default() -> Self {
        FeatureExpr::Lit(true)
    }
}

impl FeatureExpr {
    pub const TRUE: FeatureExpr = FeatureExpr::Lit(true);
    pub const FALSE: FeatureExpr = FeatureExpr::Lit(false);

    /// Feature leaf. Panics on an invalid name; use [`FeatureName::new`] for
    /// untrusted input.
    pub fn var(name: &str) -> Self {
        FeatureExpr::Feature(FeatureName::new(name).expect("valid feature name"))
    }

    /// Negation node (no folding).
    #[allow(clippy::should_implement_trait)]
    pub fn not(e: FeatureExpr) -> Self {
        FeatureExpr::Not(Box::new(e))
    }

    /// Conjunction node (no folding).
    pub fn and(a: FeatureExpr, b: FeatureExpr) -> Self {
        FeatureExpr::And(Box::new(a), Box::new(b))
    }

    /// Disjunction node (no folding).
    pub fn or(a: FeatureExpr, b: FeatureExpr) -> Self {
        FeatureExpr::Or(Box::new(a), Box::new(b))
    }

    /// Conjunction that folds boolean literals and identical operands.
    pub fn conj(a: FeatureExpr, b: FeatureExpr) -> Self {
        match (a, b) {
            (FeatureExpr::Lit(true), x) | (x, FeatureExpr::Lit(true)) => x,
            (FeatureExpr::Lit(false), _) | (_, FeatureExpr::Lit(false)) => FeatureExpr::FALSE,
            (a, b) if a == b => a,
            (a, b) => FeatureExpr::and(a, b),
        }
    }

    /// Disjunction that folds boolean literals and identical operands.
    pub fn disj(a: FeatureExpr, b: FeatureExpr) -> Self {
        match (a, b) {
            (FeatureExpr::Lit(false), x) | (x, FeatureExpr::Lit(false)) => x,
            (FeatureExpr::Lit(true), _) | (_, FeatureExpr::Lit(true)) => FeatureExpr::TRUE,
            (a, b) if a == b => a,
            (a, b) => FeatureExpr::or(a, b),
        }
    }

    /// Negation that folds literals and double negation.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: FeatureExpr) -> Self {
        match e {
            FeatureExpr::Lit(b) => FeatureExpr::Lit(!b),
            FeatureExpr::Not(x) => *x,
            e => FeatureExpr::not(e),
        }
    }

    pub fn conj_all(items: impl IntoIterator<Item = FeatureExpr>) -> Self {
        items.into_iter().fold(FeatureExpr::TRUE, FeatureExpr::conj)
    }

    pub fn disj_all(items: impl IntoIterator<Item = FeatureExpr>) -> Self {
        items
            .into_iter()
            .fold(FeatureExpr::FALSE, FeatureExpr::disj)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, FeatureExpr::Lit(true))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, FeatureExpr::Lit(false))
    }

    /// Features occurring in the formula, in name order.
    pub fn features(&self) -> BTreeSet<FeatureName> {
        let mut out = BTreeSet::new();
        self.collect_features(&mut out);
        out
    }

    pub fn collect_features(&self, out: &mut BTreeSet<FeatureName>) {
        match self {
            FeatureExpr::Lit(_) => {}
            FeatureExpr::Feature(f) => {
                out.insert(f.clone());
            }
            FeatureExpr::Not(e) => e.collect_features(out),
            FeatureExpr::And(a, b) | FeatureExpr::Or(a, b) => {
                a.collect_features(out);
                b.collect_features(out);
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            FeatureExpr::Lit(_) | FeatureExpr::Feature(_) => 1,
            FeatureExpr::Not(e) => 1 + e.size(),
            FeatureExpr::And(a, b) | FeatureExpr::Or(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn eval(&self, c: &Configuration) -> Result<bool, FexpError> {
        Ok(match self {
            FeatureExpr::Lit(b) => *b,
            FeatureExpr::Feature(f) => c.value(f)?,
            FeatureExpr::Not(e) => !e.eval(c)?,
            FeatureExpr::And(a, b) => a.eval(c)? && b.eval(c)?,
            FeatureExpr::Or(a, b) => a.eval(c)? || b.eval(c)?,
        })
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        parse::write_fexp(f, self, 0)
    }
}

/// Evaluates `e` under `c`.
pub fn eval(e: &FeatureExpr, c: &Configuration) -> Result<bool, FexpError> {
    e.eval(c)
}

pub fn sat(e: &FeatureExpr) -> bool {
    solver::is_satisfiable(e)
}

pub fn taut(e: &FeatureExpr) -> bool {
    !solver::is_satisfiable(&FeatureExpr::neg(e.clone()))
}

pub fn equiv(a: &FeatureExpr, b: &FeatureExpr) -> bool {
    if a == b {
        return true;
    }
    // (a & b) | (!a & !b)
    taut(&FeatureExpr::or(
        FeatureExpr::and(a.clone(), b.clone()),
        FeatureExpr::and(FeatureExpr::not(a.clone()), FeatureExpr::not(b.clone())),
    ))
}

/// `taut(!a | b)`.
pub fn implies(a: &FeatureExpr, b: &FeatureExpr) -> bool {
    if a == b || b.is_true() || a.is_false() {
        return true;
    }
    taut(&FeatureExpr::or(FeatureExpr::not(a.clone()), b.clone()))
}

/// A satisfying configuration of `e` over its own features, or `None` if
/// `e` is unsatisfiable. Features are fixed greedily in name order, false
/// first, so the witness is the smallest in that order.
pub fn find_model(e: &FeatureExpr) -> Option<Configuration> {
    if !sat(e) {
        return None;
    }
    let features = e.features();
    let mut fixed = e.clone();
    let mut enabled = Vec::new();
    for f in &features {
        let off = FeatureExpr::and(
            fixed.clone(),
            FeatureExpr::not(FeatureExpr::Feature(f.clone())),
        );
        if sat(&off) {
            fixed = off;
        } else {
            fixed = FeatureExpr::and(fixed, FeatureExpr::Feature(f.clone()));
            enabled.push(f.clone());
        }
    }
    Configuration::new(features, enabled).ok()
}

/// A total assignment of booleans to a declared universe of features,
/// stored as the set of enabled features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    universe: Arc<BTreeSet<FeatureName>>,
    enabled: BTreeSet<FeatureName>,
}

impl Configuration {
    pub fn new(
        universe: impl IntoIterator<Item = FeatureName>,
        enabled: impl IntoIterator<Item = FeatureName>,
    ) -> Result<Self, FexpError> {
        Self::with_universe(Arc::new(universe.into_iter().collect()), enabled)
    }

    pub fn with_universe(
        universe: Arc<BTreeSet<FeatureName>>,
        enabled: impl IntoIterator<Item = FeatureName>,
    ) -> Result<Self, FexpError> {
        let enabled: BTreeSet<FeatureName> = enabled.into_iter().collect();
        if let Some(f) = enabled.iter().find(|f| !universe.contains(*f)) {
            return Err(FexpError::UnknownFeature(f.clone()));
        }
        Ok(Self { universe, enabled })
    }

    /// Parses the comma-separated list of enabled features; every other
    /// feature of `universe` is disabled.
    pub fn parse_literal(
        text: &str,
        universe: impl IntoIterator<Item = FeatureName>,
    ) -> Result<Self, FexpError> {
        let enabled = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(FeatureName::new)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(universe, enabled)
    }

    pub fn universe(&self) -> &BTreeSet<FeatureName> {
        &self.universe
    }

    pub fn enabled(&self) -> &BTreeSet<FeatureName> {
        &self.enabled
    }

    pub fn value(&self, f: &FeatureName) -> Result<bool, FexpError> {
        if self.enabled.contains(f) {
            Ok(true)
        } else if self.universe.contains(f) {
            Ok(false)
        } else {
            Err(FexpError::UnknownFeature(f.clone()))
        }
    }

    /// Conjunction of one literal per universe feature.
    pub fn minterm(&self) -> FeatureExpr {
        FeatureExpr::conj_all(self.universe.iter().map(|f| {
            let v = FeatureExpr::Feature(f.clone());
            if self.enabled.contains(f) {
                v
            } else {
                FeatureExpr::not(v)
            }
        }))
    }

    /// Comma-separated enabled features; the inverse of [`Self::parse_literal`].
    pub fn literal(&self) -> String {
        self.enabled
            .iter()
            .map(FeatureName::as_str)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// All `2^n` configurations of `universe`, in binary counting order over
    /// the name-sorted features.
    pub fn enumerate(
        universe: impl IntoIterator<Item = FeatureName>,
        limit: usize,
    ) -> Result<impl Iterator<Item = Configuration>, FexpError> {
        let universe: Arc<BTreeSet<FeatureName>> = Arc::new(universe.into_iter().collect());
        let n = universe.len();
        if n > limit {
            return Err(FexpError::TooManyFeatures { count: n, limit });
        }
        let names: Vec<FeatureName> = universe.iter().cloned().collect();
        Ok((0u64..(1u64 << n)).map(move |mask| {
            let enabled = names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, f)| f.clone())
                .collect();
            Configuration {
                universe: Arc::clone(&universe),
                enabled,
            }
        }))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.literal().replace(',', ", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fx(s: &str) -> FeatureExpr {
        parse_fexp(s).unwrap()
    }

    fn cfg(universe: &[&str], on: &[&str]) -> Configuration {
        Configuration::new(
            universe.iter().map(|f| FeatureName::new(f).unwrap()),
            on.iter().map(|f| FeatureName::new(f).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn find_model_picks_smallest_witness() {
        assert_eq!(find_model(&fx("a | b")).unwrap().literal(), "b");
        assert_eq!(find_model(&fx("a & !b")).unwrap().literal(), "a");
        assert!(find_model(&fx("a & !a")).is_none());
        assert_eq!(find_model(&FeatureExpr::TRUE).unwrap().literal(), "");
    }

    #[test]
    fn eval_examples() {
        assert!(fx("A | B").eval(&cfg(&["A", "B"], &["A"])).unwrap());
        assert!(FeatureExpr::TRUE.eval(&cfg(&[], &[])).unwrap());
        assert!(fx("f1 & !f2").eval(&cfg(&["f1", "f2"], &["f1"])).unwrap());
    }

    #[test]
    fn eval_rejects_features_outside_universe() {
        let err = fx("A & Z").eval(&cfg(&["A"], &["A"])).unwrap_err();
        assert_eq!(
            err,
            FexpError::UnknownFeature(FeatureName::new("Z").unwrap())
        );
    }

    #[test]
    fn sat_examples() {
        assert!(!sat(&fx("f & !f")));
        assert!(!sat(&fx("!f2 & (f1 & f2)")));
        assert!(sat(&fx("f1 | f2")));
    }

    #[test]
    fn taut_examples() {
        assert!(taut(&fx("f | !f")));
        assert!(!taut(&fx("f1")));
        assert!(taut(&fx("!(A & B) | A")));
    }

    #[test]
    fn equiv_examples() {
        assert!(equiv(&fx("e1 | !e1"), &FeatureExpr::TRUE));
        assert!(equiv(&fx("A & B"), &fx("B & A")));
        assert!(!equiv(&fx("A"), &fx("A & B")));
    }

    #[test]
    fn implies_examples() {
        assert!(implies(&fx("A & B"), &fx("A")));
        assert!(implies(&fx("A"), &fx("A | B")));
        assert!(!implies(&fx("A | B"), &fx("A")));
    }

    #[test]
    fn feature_names_are_validated() {
        assert!(FeatureName::new("V4").is_ok());
        assert!(FeatureName::new("f_1").is_ok());
        assert!(FeatureName::new("1f").is_err());
        assert!(FeatureName::new("").is_err());
        assert!(FeatureName::new("true").is_err());
    }

    #[test]
    fn configuration_literal_round_trip() {
        let universe: Vec<FeatureName> = ["V4", "V5", "edu"]
            .iter()
            .map(|f| FeatureName::new(f).unwrap())
            .collect();
        let c = Configuration::parse_literal("V5, edu", universe.clone()).unwrap();
        assert_eq!(c.literal(), "V5,edu");
        assert!(!c.value(&universe[0]).unwrap());
        assert!(Configuration::parse_literal("V9", universe).is_err());
    }

    #[test]
    fn minterm_holds_only_for_its_configuration() {
        let all: Vec<_> = Configuration::enumerate(
            ["a", "b", "c"].iter().map(|f| FeatureName::new(f).unwrap()),
            10,
        )
        .unwrap()
        .collect();
        assert_eq!(all.len(), 8);
        for c in &all {
            for d in &all {
                assert_eq!(c.minterm().eval(d).unwrap(), c == d);
            }
        }
    }
}
