//! From variational queries to plain ones: schema push-down, configuration
//! and grouping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::catalog::VSchema;
use crate::featexpr::{self, simplify, Configuration, FeatureExpr, FeatureName, FexpError};
use crate::typecheck::{check_query, resolve, type_of, TypeError, TypeOptions};
use crate::vra::{PlainCond, PlainQuery, VCondition, VQuery};
use crate::vset::{Keyed, VSet};

/// Largest universe [`group_generic`] will enumerate.
pub const GROUP_GENERIC_LIMIT: usize = 20;

/// Conjoins every projected attribute condition with the condition under
/// which the subquery provides that attribute, so that configuring the
/// result never projects a missing attribute. The query is type-checked
/// first.
pub fn push_schema(q: &VQuery, s: &VSchema) -> Result<VQuery, TypeError> {
    check_query(q, s, TypeOptions::default())?;
    push(q, s.feature_model(), s)
}

fn push(q: &VQuery, ctx: &FeatureExpr, s: &VSchema) -> Result<VQuery, TypeError> {
    Ok(match q {
        VQuery::Relation(_) | VQuery::Empty => q.clone(),
        VQuery::Select(c, sub) => VQuery::select(c.clone(), push(sub, ctx, s)?),
        VQuery::Project(attrs, sub) => {
            let provided = type_of(sub, ctx, s)?.push_annotation();
            let mut out = VSet::with_annotation(attrs.annotation().clone());
            for e in attrs.iter() {
                if let Some(found) = resolve(&provided, &e.value) {
                    let pc = simplify(&FeatureExpr::and(e.pc.clone(), found.pc.clone()));
                    out.insert_or_drop(e.value.clone(), pc);
                }
            }
            VQuery::project(out, push(sub, ctx, s)?)
        }
        VQuery::Choice(e, a, b) => VQuery::choice(
            e.clone(),
            push(a, &FeatureExpr::conj(ctx.clone(), e.clone()), s)?,
            push(
                b,
                &FeatureExpr::conj(ctx.clone(), FeatureExpr::neg(e.clone())),
                s,
            )?,
        ),
        VQuery::Join(c, a, b) => VQuery::join(c.clone(), push(a, ctx, s)?, push(b, ctx, s)?),
        VQuery::Product(a, b) => VQuery::product(push(a, ctx, s)?, push(b, ctx, s)?),
        VQuery::SetOp(k, a, b) => {
            VQuery::SetOp(*k, Box::new(push(a, ctx, s)?), Box::new(push(b, ctx, s)?))
        }
    })
}

/// The plain query selected by `c`.
pub fn configure_query(q: &VQuery, c: &Configuration) -> Result<PlainQuery, FexpError> {
    Ok(match q {
        VQuery::Relation(r) => PlainQuery::Relation(r.clone()),
        VQuery::Select(cond, sub) => {
            PlainQuery::Select(configure_cond(cond, c)?, Box::new(configure_query(sub, c)?))
        }
        VQuery::Project(attrs, sub) => {
            PlainQuery::project(attrs.configure(c)?, configure_query(sub, c)?)
        }
        VQuery::Choice(e, a, b) => {
            if e.eval(c)? {
                configure_query(a, c)?
            } else {
                configure_query(b, c)?
            }
        }
        VQuery::Join(cond, a, b) => PlainQuery::Join(
            configure_cond(cond, c)?,
            Box::new(configure_query(a, c)?),
            Box::new(configure_query(b, c)?),
        ),
        VQuery::Product(a, b) => PlainQuery::Product(
            Box::new(configure_query(a, c)?),
            Box::new(configure_query(b, c)?),
        ),
        VQuery::SetOp(k, a, b) => PlainQuery::SetOp(
            *k,
            Box::new(configure_query(a, c)?),
            Box::new(configure_query(b, c)?),
        ),
        VQuery::Empty => PlainQuery::Empty,
    })
}

pub fn configure_cond(cond: &VCondition, c: &Configuration) -> Result<PlainCond, FexpError> {
    Ok(match cond {
        VCondition::Lit(b) => PlainCond::Lit(*b),
        VCondition::CmpConst(a, op, v) => PlainCond::CmpConst(a.clone(), *op, v.clone()),
        VCondition::CmpAttr(a, op, b) => PlainCond::CmpAttr(a.clone(), *op, b.clone()),
        VCondition::Not(x) => PlainCond::Not(Box::new(configure_cond(x, c)?)),
        VCondition::And(x, y) => PlainCond::And(
            Box::new(configure_cond(x, c)?),
            Box::new(configure_cond(y, c)?),
        ),
        VCondition::Or(x, y) => PlainCond::Or(
            Box::new(configure_cond(x, c)?),
            Box::new(configure_cond(y, c)?),
        ),
        VCondition::Choice(e, x, y) => {
            if e.eval(c)? {
                configure_cond(x, c)?
            } else {
                configure_cond(y, c)?
            }
        }
    })
}

/// Distinct plain queries, each with the condition under which it is the
/// configuration of the grouped query. Conditions are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryGroup {
    pub entries: Vec<(PlainQuery, FeatureExpr)>,
}

impl QueryGroup {
    /// Merges identical queries by disjunction, simplifies conditions, drops
    /// unsatisfiable entries and sorts by printed query.
    pub fn normalized(entries: impl IntoIterator<Item = (PlainQuery, FeatureExpr)>) -> Self {
        QueryGroup {
            entries: normalize(entries),
        }
    }

    /// Restricts every entry to `e`, dropping entries that vanish.
    pub fn restricted(&self, e: &FeatureExpr) -> Self {
        Self::normalized(
            self.entries
                .iter()
                .map(|(q, pc)| (q.clone(), FeatureExpr::and(pc.clone(), e.clone()))),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(PlainQuery, FeatureExpr)> {
        self.entries.iter()
    }
}

impl fmt::Display for QueryGroup {
    /// One `query # fexp` line per entry.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, e) in &self.entries {
            writeln!(f, "{q} # {e}")?;
        }
        Ok(())
    }
}

fn normalize<T: Ord + fmt::Display>(
    entries: impl IntoIterator<Item = (T, FeatureExpr)>,
) -> Vec<(T, FeatureExpr)> {
    let mut merged: BTreeMap<T, Vec<FeatureExpr>> = BTreeMap::new();
    for (x, e) in entries {
        merged.entry(x).or_default().push(e);
    }
    let mut out: Vec<(T, FeatureExpr)> = merged
        .into_iter()
        .map(|(x, es)| (x, simplify(&FeatureExpr::disj_all(es))))
        .filter(|(_, e)| !e.is_false())
        .collect();
    out.sort_by_cached_key(|(x, _)| x.to_string());
    out
}

fn cross<A: Clone, B: Clone, C>(
    xs: &[(A, FeatureExpr)],
    ys: &[(B, FeatureExpr)],
    mut build: impl FnMut(A, B) -> C,
) -> Vec<(C, FeatureExpr)> {
    let mut out = Vec::new();
    for (x, ex) in xs {
        for (y, ey) in ys {
            let e = FeatureExpr::conj(ex.clone(), ey.clone());
            if featexpr::sat(&e) {
                out.push((build(x.clone(), y.clone()), e));
            }
        }
    }
    out
}

/// Groups `q` compositionally: operands are grouped recursively and
/// combined, conditions and attribute lists are grouped by enumeration over
/// their own features.
pub fn group_query(q: &VQuery) -> Result<QueryGroup, FexpError> {
    Ok(QueryGroup::normalized(group_rec(q)?))
}

fn group_rec(q: &VQuery) -> Result<Vec<(PlainQuery, FeatureExpr)>, FexpError> {
    let out = match q {
        VQuery::Relation(r) => vec![(PlainQuery::Relation(r.clone()), FeatureExpr::TRUE)],
        VQuery::Empty => vec![(PlainQuery::Empty, FeatureExpr::TRUE)],
        VQuery::Select(c, sub) => {
            let conds = group_generic(c, &c.free_features())?;
            cross(&conds, &group_rec(sub)?, |c, q| {
                PlainQuery::Select(c, Box::new(q))
            })
        }
        VQuery::Project(attrs, sub) => {
            let lists = group_generic(attrs, &attrs.features())?;
            cross(&lists, &group_rec(sub)?, |l, q| PlainQuery::project(l.0, q))
        }
        VQuery::Choice(e, a, b) => {
            let mut out = Vec::new();
            let not_e = FeatureExpr::neg(e.clone());
            for (side, dim) in [(a, e), (b, &not_e)] {
                for (x, ex) in group_rec(side)? {
                    let pc = FeatureExpr::conj(ex, dim.clone());
                    if featexpr::sat(&pc) {
                        out.push((x, pc));
                    }
                }
            }
            out
        }
        VQuery::Join(c, a, b) => {
            let conds = group_generic(c, &c.free_features())?;
            let operands = cross(&group_rec(a)?, &group_rec(b)?, |x, y| (x, y));
            cross(&conds, &operands, |c, (x, y)| {
                PlainQuery::Join(c, Box::new(x), Box::new(y))
            })
        }
        VQuery::Product(a, b) => cross(&group_rec(a)?, &group_rec(b)?, |x, y| {
            PlainQuery::Product(Box::new(x), Box::new(y))
        }),
        VQuery::SetOp(k, a, b) => cross(&group_rec(a)?, &group_rec(b)?, |x, y| {
            PlainQuery::SetOp(*k, Box::new(x), Box::new(y))
        }),
    };
    Ok(normalize(out))
}

/// Something that configures to a plain value.
pub trait Configurable {
    type Plain: Ord + Clone + fmt::Display;

    fn configure(&self, c: &Configuration) -> Result<Self::Plain, FexpError>;
}

impl Configurable for VQuery {
    type Plain = PlainQuery;

    fn configure(&self, c: &Configuration) -> Result<PlainQuery, FexpError> {
        configure_query(self, c)
    }
}

impl Configurable for VCondition {
    type Plain = PlainCond;

    fn configure(&self, c: &Configuration) -> Result<PlainCond, FexpError> {
        configure_cond(self, c)
    }
}

/// A configured attribute list, in key order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlainList<T>(pub Vec<T>);

impl<T: fmt::Display> fmt::Display for PlainList<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(T::to_string).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

impl<T> Configurable for VSet<T>
where
    T: Keyed + Ord + fmt::Display,
{
    type Plain = PlainList<T>;

    fn configure(&self, c: &Configuration) -> Result<PlainList<T>, FexpError> {
        let mut items = VSet::configure(self, c)?;
        items.sort_by_key(|x| x.key());
        Ok(PlainList(items))
    }
}

/// Groups `x` by enumerating every configuration of `features`: one entry
/// per distinct configured value, annotated with the simplified disjunction
/// of the configurations producing it.
pub fn group_generic<X: Configurable + ?Sized>(
    x: &X,
    features: &BTreeSet<FeatureName>,
) -> Result<Vec<(X::Plain, FeatureExpr)>, FexpError> {
    let mut buckets: Vec<(X::Plain, FeatureExpr)> = Vec::new();
    for c in Configuration::enumerate(features.iter().cloned(), GROUP_GENERIC_LIMIT)? {
        buckets.push((x.configure(&c)?, c.minterm()));
    }
    Ok(normalize(buckets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_schema;
    use crate::featexpr::{equiv, parse_fexp};
    use crate::vra::parse_query;

    const Q5_SCHEMA: &str = "features f1, f2\nrelation r (a1 int # f1, a2 int, a3 int) # f1 | f2\n";
    const Q5: &str = "proj [a1, a2 # f1 & f2, a3 # f2] r";

    fn fx(s: &str) -> FeatureExpr {
        parse_fexp(s).unwrap()
    }

    fn cfg(s: &VSchema, on: &[&str]) -> Configuration {
        s.configuration(on.iter().copied()).unwrap()
    }

    fn plain(text: &str) -> PlainQuery {
        PlainQuery::from_vquery(&parse_query(text).unwrap()).unwrap()
    }

    #[test]
    fn configures_q5() {
        let s = parse_schema(Q5_SCHEMA).unwrap();
        let q5 = parse_query(Q5).unwrap();
        let conf = |on: &[&str]| configure_query(&q5, &cfg(&s, on)).unwrap();
        assert_eq!(conf(&["f1", "f2"]), plain("proj [a1, a2, a3] r"));
        assert_eq!(conf(&["f2"]), plain("proj [a1, a3] r"));
        assert_eq!(conf(&["f1"]), plain("proj [a1] r"));
        assert_eq!(conf(&[]), plain("proj [a1] r"));
    }

    #[test]
    fn configures_choices() {
        let s = parse_schema("features A\nrelation r1 (a int)\nrelation r2 (a int)\n").unwrap();
        let q = parse_query("choice A { r1 } { r2 }").unwrap();
        assert_eq!(configure_query(&q, &cfg(&s, &["A"])).unwrap(), plain("r1"));
        let c = crate::vra::parse_condition("CHC A (a = 1) (a = 2)").unwrap();
        assert_eq!(
            configure_cond(&c, &cfg(&s, &[])).unwrap().to_string(),
            "a = 2"
        );
    }

    #[test]
    fn pushes_schema_onto_q5() {
        let s = parse_schema(Q5_SCHEMA).unwrap();
        let pushed = push_schema(&parse_query(Q5).unwrap(), &s).unwrap();
        let VQuery::Project(attrs, _) = &pushed else {
            panic!("expected projection")
        };
        let expect = [("a1", "f1"), ("a2", "f1 & f2"), ("a3", "f2")];
        for (e, (name, pc)) in attrs.iter().zip(expect) {
            assert_eq!(e.value.name, name);
            assert!(equiv(&e.pc, &fx(pc)), "{name}: {}", e.pc);
        }
        assert_eq!(push_schema(&pushed, &s).unwrap(), pushed);
    }

    #[test]
    fn push_schema_conjoins_attribute_presence() {
        let s = parse_schema("features A, B\nrelation r (x int # B)\n").unwrap();
        let pushed = push_schema(&parse_query("proj [x # A] r").unwrap(), &s).unwrap();
        assert_eq!(pushed.to_string(), "proj [x # A & B] r");
        let plain_s = parse_schema("features\nrelation r (x int)\n").unwrap();
        let q = parse_query("proj [x] r").unwrap();
        assert_eq!(push_schema(&q, &plain_s).unwrap(), q);
    }

    #[test]
    fn groups_q5() {
        let g = group_query(&parse_query(Q5).unwrap()).unwrap();
        let expect = [
            ("proj [a1, a2, a3] r", "f1 & f2"),
            ("proj [a1, a3] r", "!f1 & f2"),
            ("proj [a1] r", "!f2"),
        ];
        assert_eq!(g.len(), 3);
        for ((q, e), (pq, pe)) in g.iter().zip(expect) {
            assert_eq!(q, &plain(pq));
            assert!(equiv(e, &fx(pe)), "{q}: {e}");
        }
    }

    #[test]
    fn groups_choices_and_constants() {
        let g = group_query(&parse_query("choice A { r1 } { r2 }").unwrap()).unwrap();
        assert_eq!(g.to_string(), "r1 # A\nr2 # !A\n");
        let g = group_query(&parse_query("sel (a = 1) r").unwrap()).unwrap();
        assert_eq!(g.to_string(), "sel (a = 1) r # true\n");
    }

    #[test]
    fn group_generic_buckets_vsets() {
        let x: VSet<String> = VSet::from_elems([("x".to_string(), fx("A"))]).unwrap();
        let groups = group_generic(&x, &x.features()).unwrap();
        let shown: Vec<String> = groups.iter().map(|(l, e)| format!("{l} # {e}")).collect();
        assert_eq!(shown, ["{x} # A", "{} # !A"]);
    }

    #[test]
    fn group_generic_agrees_on_q5() {
        let q5 = parse_query(Q5).unwrap();
        let generic = group_generic(&q5, &q5.free_features()).unwrap();
        let grouped = group_query(&q5).unwrap();
        assert_eq!(generic.len(), grouped.len());
        for ((a, ea), (b, eb)) in generic.iter().zip(grouped.iter()) {
            assert_eq!(a, b);
            assert!(equiv(ea, eb));
        }
    }
}
