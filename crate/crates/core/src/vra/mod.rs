//! Variational relational algebra: query and condition syntax trees, their
//! variation-free counterparts, and the textual grammar.
//!
//! ```text
//! q ::= rel r | r | sel (θ) q | proj [a # e, ...] q | choice e { q } { q }
//!     | join (θ) q q | prod q q | union q q | diff q q | empty | ( q )
//! θ ::= true | false | a op k | a op a | !θ | θ & θ | θ | θ | CHC e (θ) (θ) | ( θ )
//! ```

mod parse;
mod print;

use std::collections::BTreeSet;
use std::fmt;

use crate::featexpr::{FeatureExpr, FeatureName};
use crate::storage::Value;
use crate::vset::{Keyed, VSet};

pub use parse::{parse_condition, parse_query, KEYWORDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

/// An attribute reference, optionally qualified by a relation name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttrRef {
    pub qualifier: Option<String>,
    pub name: String,
}

impl AttrRef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            qualifier: None,
            name: name.into(),
        }
    }

    pub fn qualified(rel: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            qualifier: Some(rel.into()),
            name: name.into(),
        }
    }
}

impl Keyed for AttrRef {
    type Key = AttrRef;

    fn key(&self) -> AttrRef {
        self.clone()
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{q}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetOpKind {
    Union,
    Difference,
}

impl SetOpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOpKind::Union => "union",
            SetOpKind::Difference => "diff",
        }
    }
}

/// A variational selection or join condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VCondition {
    Lit(bool),
    CmpConst(AttrRef, CmpOp, Value),
    CmpAttr(AttrRef, CmpOp, AttrRef),
    Not(Box<VCondition>),
    And(Box<VCondition>, Box<VCondition>),
    Or(Box<VCondition>, Box<VCondition>),
    Choice(FeatureExpr, Box<VCondition>, Box<VCondition>),
}

impl VCondition {
    pub fn cmp_const(attr: &str, op: CmpOp, v: Value) -> Self {
        VCondition::CmpConst(AttrRef::new(attr), op, v)
    }

    pub fn cmp_attr(a: &str, op: CmpOp, b: &str) -> Self {
        VCondition::CmpAttr(AttrRef::new(a), op, AttrRef::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: VCondition) -> Self {
        VCondition::Not(Box::new(c))
    }

    pub fn and(a: VCondition, b: VCondition) -> Self {
        VCondition::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: VCondition, b: VCondition) -> Self {
        VCondition::Or(Box::new(a), Box::new(b))
    }

    pub fn choice(e: FeatureExpr, a: VCondition, b: VCondition) -> Self {
        VCondition::Choice(e, Box::new(a), Box::new(b))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            VCondition::Lit(_) | VCondition::CmpConst(..) | VCondition::CmpAttr(..) => 1,
            VCondition::Not(c) => 1 + c.size(),
            VCondition::And(a, b) | VCondition::Or(a, b) | VCondition::Choice(_, a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    pub fn collect_features(&self, out: &mut BTreeSet<FeatureName>) {
        match self {
            VCondition::Lit(_) | VCondition::CmpConst(..) | VCondition::CmpAttr(..) => {}
            VCondition::Not(c) => c.collect_features(out),
            VCondition::And(a, b) | VCondition::Or(a, b) => {
                a.collect_features(out);
                b.collect_features(out);
            }
            VCondition::Choice(e, a, b) => {
                e.collect_features(out);
                a.collect_features(out);
                b.collect_features(out);
            }
        }
    }

    pub fn free_features(&self) -> BTreeSet<FeatureName> {
        let mut out = BTreeSet::new();
        self.collect_features(&mut out);
        out
    }

    /// Attribute references in evaluation order.
    pub fn attr_refs(&self) -> Vec<&AttrRef> {
        let mut out = Vec::new();
        self.collect_attr_refs(&mut out);
        out
    }

    fn collect_attr_refs<'a>(&'a self, out: &mut Vec<&'a AttrRef>) {
        match self {
            VCondition::Lit(_) => {}
            VCondition::CmpConst(a, _, _) => out.push(a),
            VCondition::CmpAttr(a, _, b) => {
                out.push(a);
                out.push(b);
            }
            VCondition::Not(c) => c.collect_attr_refs(out),
            VCondition::And(a, b) | VCondition::Or(a, b) | VCondition::Choice(_, a, b) => {
                a.collect_attr_refs(out);
                b.collect_attr_refs(out);
            }
        }
    }
}

/// A variational query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VQuery {
    Relation(String),
    Select(VCondition, Box<VQuery>),
    Project(VSet<AttrRef>, Box<VQuery>),
    Choice(FeatureExpr, Box<VQuery>, Box<VQuery>),
    Join(VCondition, Box<VQuery>, Box<VQuery>),
    Product(Box<VQuery>, Box<VQuery>),
    SetOp(SetOpKind, Box<VQuery>, Box<VQuery>),
    Empty,
}

impl VQuery {
    pub fn rel(name: &str) -> Self {
        VQuery::Relation(name.to_string())
    }

    pub fn select(c: VCondition, q: VQuery) -> Self {
        VQuery::Select(c, Box::new(q))
    }

    pub fn project(attrs: VSet<AttrRef>, q: VQuery) -> Self {
        VQuery::Project(attrs, Box::new(q))
    }

    /// Projection onto unannotated attribute names.
    pub fn project_names(names: &[&str], q: VQuery) -> Self {
        VQuery::project(VSet::plain(names.iter().map(|n| AttrRef::new(*n))), q)
    }

    pub fn choice(e: FeatureExpr, a: VQuery, b: VQuery) -> Self {
        VQuery::Choice(e, Box::new(a), Box::new(b))
    }

    pub fn join(c: VCondition, a: VQuery, b: VQuery) -> Self {
        VQuery::Join(c, Box::new(a), Box::new(b))
    }

    pub fn product(a: VQuery, b: VQuery) -> Self {
        VQuery::Product(Box::new(a), Box::new(b))
    }

    pub fn union(a: VQuery, b: VQuery) -> Self {
        VQuery::SetOp(SetOpKind::Union, Box::new(a), Box::new(b))
    }

    pub fn diff(a: VQuery, b: VQuery) -> Self {
        VQuery::SetOp(SetOpKind::Difference, Box::new(a), Box::new(b))
    }

    pub fn collect_features(&self, out: &mut BTreeSet<FeatureName>) {
        match self {
            VQuery::Relation(_) | VQuery::Empty => {}
            VQuery::Select(c, q) => {
                c.collect_features(out);
                q.collect_features(out);
            }
            VQuery::Project(attrs, q) => {
                out.extend(attrs.features());
                q.collect_features(out);
            }
            VQuery::Choice(e, a, b) => {
                e.collect_features(out);
                a.collect_features(out);
                b.collect_features(out);
            }
            VQuery::Join(c, a, b) => {
                c.collect_features(out);
                a.collect_features(out);
                b.collect_features(out);
            }
            VQuery::Product(a, b) | VQuery::SetOp(_, a, b) => {
                a.collect_features(out);
                b.collect_features(out);
            }
        }
    }

    /// Every feature named by an annotation or choice dimension.
    pub fn free_features(&self) -> BTreeSet<FeatureName> {
        let mut out = BTreeSet::new();
        self.collect_features(&mut out);
        out
    }

    /// Relation names referenced, in first-occurrence order.
    pub fn relations(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.visit(&mut |q| {
            if let VQuery::Relation(r) = q {
                if !out.contains(&r.as_str()) {
                    out.push(r.as_str());
                }
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a VQuery)) {
        f(self);
        match self {
            VQuery::Relation(_) | VQuery::Empty => {}
            VQuery::Select(_, q) | VQuery::Project(_, q) => q.visit(f),
            VQuery::Choice(_, a, b)
            | VQuery::Join(_, a, b)
            | VQuery::Product(a, b)
            | VQuery::SetOp(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Number of query and condition nodes.
    pub fn size(&self) -> usize {
        match self {
            VQuery::Relation(_) | VQuery::Empty => 1,
            VQuery::Select(c, q) => 1 + c.size() + q.size(),
            VQuery::Project(_, q) => 1 + q.size(),
            VQuery::Choice(_, a, b) | VQuery::Product(a, b) | VQuery::SetOp(_, a, b) => {
                1 + a.size() + b.size()
            }
            VQuery::Join(c, a, b) => 1 + c.size() + a.size() + b.size(),
        }
    }
}

/// A variation-free condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlainCond {
    Lit(bool),
    CmpConst(AttrRef, CmpOp, Value),
    CmpAttr(AttrRef, CmpOp, AttrRef),
    Not(Box<PlainCond>),
    And(Box<PlainCond>, Box<PlainCond>),
    Or(Box<PlainCond>, Box<PlainCond>),
}

/// A classical relational-algebra query. Projection lists are kept sorted
/// by attribute so that structurally equal queries compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlainQuery {
    Relation(String),
    Select(PlainCond, Box<PlainQuery>),
    Project(Vec<AttrRef>, Box<PlainQuery>),
    Join(PlainCond, Box<PlainQuery>, Box<PlainQuery>),
    Product(Box<PlainQuery>, Box<PlainQuery>),
    SetOp(SetOpKind, Box<PlainQuery>, Box<PlainQuery>),
    Empty,
}

impl PlainCond {
    pub fn to_vcondition(&self) -> VCondition {
        match self {
            PlainCond::Lit(b) => VCondition::Lit(*b),
            PlainCond::CmpConst(a, op, v) => VCondition::CmpConst(a.clone(), *op, v.clone()),
            PlainCond::CmpAttr(a, op, b) => VCondition::CmpAttr(a.clone(), *op, b.clone()),
            PlainCond::Not(c) => VCondition::not(c.to_vcondition()),
            PlainCond::And(a, b) => VCondition::and(a.to_vcondition(), b.to_vcondition()),
            PlainCond::Or(a, b) => VCondition::or(a.to_vcondition(), b.to_vcondition()),
        }
    }

    /// `None` if the condition contains a choice.
    pub fn from_vcondition(c: &VCondition) -> Option<Self> {
        Some(match c {
            VCondition::Lit(b) => PlainCond::Lit(*b),
            VCondition::CmpConst(a, op, v) => PlainCond::CmpConst(a.clone(), *op, v.clone()),
            VCondition::CmpAttr(a, op, b) => PlainCond::CmpAttr(a.clone(), *op, b.clone()),
            VCondition::Not(c) => PlainCond::Not(Box::new(Self::from_vcondition(c)?)),
            VCondition::And(a, b) => PlainCond::And(
                Box::new(Self::from_vcondition(a)?),
                Box::new(Self::from_vcondition(b)?),
            ),
            VCondition::Or(a, b) => PlainCond::Or(
                Box::new(Self::from_vcondition(a)?),
                Box::new(Self::from_vcondition(b)?),
            ),
            VCondition::Choice(..) => return None,
        })
    }
}

impl PlainQuery {
    pub fn rel(name: &str) -> Self {
        PlainQuery::Relation(name.to_string())
    }

    /// Projection with the attribute list put in canonical order.
    pub fn project(mut attrs: Vec<AttrRef>, q: PlainQuery) -> Self {
        attrs.sort_by(|a, b| (&a.name, &a.qualifier).cmp(&(&b.name, &b.qualifier)));
        attrs.dedup();
        PlainQuery::Project(attrs, Box::new(q))
    }

    pub fn to_vquery(&self) -> VQuery {
        match self {
            PlainQuery::Relation(r) => VQuery::Relation(r.clone()),
            PlainQuery::Select(c, q) => VQuery::select(c.to_vcondition(), q.to_vquery()),
            PlainQuery::Project(attrs, q) => {
                VQuery::project(VSet::plain(attrs.iter().cloned()), q.to_vquery())
            }
            PlainQuery::Join(c, a, b) => {
                VQuery::join(c.to_vcondition(), a.to_vquery(), b.to_vquery())
            }
            PlainQuery::Product(a, b) => VQuery::product(a.to_vquery(), b.to_vquery()),
            PlainQuery::SetOp(k, a, b) => {
                VQuery::SetOp(*k, Box::new(a.to_vquery()), Box::new(b.to_vquery()))
            }
            PlainQuery::Empty => VQuery::Empty,
        }
    }

    /// `None` if the query has a choice or a non-trivial annotation.
    pub fn from_vquery(q: &VQuery) -> Option<Self> {
        Some(match q {
            VQuery::Relation(r) => PlainQuery::Relation(r.clone()),
            VQuery::Select(c, q) => PlainQuery::Select(
                PlainCond::from_vcondition(c)?,
                Box::new(Self::from_vquery(q)?),
            ),
            VQuery::Project(attrs, q) => {
                if !attrs.annotation().is_true() || attrs.iter().any(|e| !e.pc.is_true()) {
                    return None;
                }
                PlainQuery::project(attrs.values().cloned().collect(), Self::from_vquery(q)?)
            }
            VQuery::Choice(..) => return None,
            VQuery::Join(c, a, b) => PlainQuery::Join(
                PlainCond::from_vcondition(c)?,
                Box::new(Self::from_vquery(a)?),
                Box::new(Self::from_vquery(b)?),
            ),
            VQuery::Product(a, b) => PlainQuery::Product(
                Box::new(Self::from_vquery(a)?),
                Box::new(Self::from_vquery(b)?),
            ),
            VQuery::SetOp(k, a, b) => PlainQuery::SetOp(
                *k,
                Box::new(Self::from_vquery(a)?),
                Box::new(Self::from_vquery(b)?),
            ),
            VQuery::Empty => PlainQuery::Empty,
        })
    }
}

impl fmt::Display for PlainQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_vquery())
    }
}

impl fmt::Display for PlainCond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_vcondition())
    }
}
