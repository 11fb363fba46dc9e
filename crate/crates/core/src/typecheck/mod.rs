//! Static typing of variational queries.
//!
//! A query type is an annotated v-set of attributes: each attribute carries
//! the condition under which it is present in the result, and the set
//! annotation says when the result exists at all. Typing runs under a
//! variation context, starting from the feature model, which choices refine
//! branch by branch.
//!
//! Conditions are checked in the direction that guarantees the configured
//! query is well-formed: the context under which a comparison is evaluated
//! must imply the presence of every attribute it mentions.

mod plain;
mod preserve;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::catalog::{AttrType, VSchema};
use crate::featexpr::{self, find_model, simplify, simplify_with_care, FeatureExpr};
use crate::vra::{AttrRef, VCondition, VQuery};
use crate::vset::{Keyed, VElem, VSet};

pub use plain::{plain_type, PlainType, PlainTypeError, PlainTypedAttr};
pub use preserve::{check_variation_preservation, PreservationError, Violation};

/// An attribute of a query type. `origins` records the relations the
/// attribute may come from, for resolving qualified references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedAttr {
    pub name: String,
    pub atype: AttrType,
    pub origins: BTreeSet<String>,
}

impl TypedAttr {
    pub fn new(name: impl Into<String>, atype: AttrType, origin: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            atype,
            origins: BTreeSet::from([origin.into()]),
        }
    }
}

impl Keyed for TypedAttr {
    type Key = String;

    fn key(&self) -> String {
        self.name.clone()
    }

    fn absorb(&mut self, other: &Self) {
        self.origins.extend(other.origins.iter().cloned());
    }
}

impl fmt::Display for TypedAttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The type `A^e` of a query.
pub type QueryType = VSet<TypedAttr>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeErrorKind {
    UnknownRelation,
    UnsatContext,
    NotSubsumed,
    AttrNotInType,
    ContextNotImplied,
    TypeMismatch,
    NotDisjoint,
    NotEquivalent,
    DomainViolation,
    UndeclaredFeature,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A rejected query. `path` locates the offending node from the root, e.g.
/// `choice[then]/proj/rel empbio`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {path}: {detail}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub path: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TypeOptions {
    /// Reject relations reached under an unsatisfiable context instead of
    /// giving them the empty type.
    pub strict_context: bool,
}

/// Types `q` under the feature model of `s` after checking that every
/// feature it mentions is declared.
pub fn check_query(q: &VQuery, s: &VSchema, opts: TypeOptions) -> Result<QueryType, TypeError> {
    if let Some(f) = q
        .free_features()
        .into_iter()
        .find(|f| !s.universe().contains(f))
    {
        return Err(TypeError {
            kind: TypeErrorKind::UndeclaredFeature,
            path: "root".into(),
            detail: format!("feature `{f}` is not declared by the schema"),
        });
    }
    type_of_with(q, s.feature_model(), s, opts)
}

pub fn type_of(q: &VQuery, ctx: &FeatureExpr, s: &VSchema) -> Result<QueryType, TypeError> {
    type_of_with(q, ctx, s, TypeOptions::default())
}

pub fn type_of_with(
    q: &VQuery,
    ctx: &FeatureExpr,
    s: &VSchema,
    opts: TypeOptions,
) -> Result<QueryType, TypeError> {
    Checker::new(Some(s), opts).query(q, ctx)
}

/// Checks `cond` under `ctx` against `attrs`, whose annotation is expected
/// to be pushed into its elements already.
pub fn type_cond(cond: &VCondition, ctx: &FeatureExpr, attrs: &QueryType) -> Result<(), TypeError> {
    Checker::new(None, TypeOptions::default()).cond(cond, ctx, attrs)
}

/// The empty type `{}^false`.
pub fn empty_type() -> QueryType {
    VSet::with_annotation(FeatureExpr::FALSE)
}

/// A copy of `t` with conditions simplified for display: the annotation on
/// its own, element conditions relative to the annotation.
pub fn simplified_type(t: &QueryType) -> QueryType {
    let ann = simplify(t.annotation());
    let mut out = VSet::with_annotation(ann.clone());
    for e in t.iter() {
        out.insert_or_drop(e.value.clone(), simplify_with_care(&e.pc, &ann));
    }
    out
}

/// Renders `t` in v-set text form with simplified conditions.
pub fn render_type(t: &QueryType) -> String {
    simplified_type(t).to_string()
}

/// One satisfying configuration of `e`, for error messages.
fn witness(e: &FeatureExpr) -> String {
    match find_model(e) {
        Some(c) => c.to_string(),
        None => "none".into(),
    }
}

fn show(e: &FeatureExpr) -> String {
    simplify(e).to_string()
}

struct Checker<'s> {
    schema: Option<&'s VSchema>,
    opts: TypeOptions,
    path: Vec<String>,
}

fn label(q: &VQuery) -> String {
    match q {
        VQuery::Relation(r) => format!("rel {r}"),
        VQuery::Select(..) => "sel".into(),
        VQuery::Project(..) => "proj".into(),
        VQuery::Choice(..) => "choice".into(),
        VQuery::Join(..) => "join".into(),
        VQuery::Product(..) => "prod".into(),
        VQuery::SetOp(k, ..) => k.keyword().into(),
        VQuery::Empty => "empty".into(),
    }
}

impl<'s> Checker<'s> {
    fn new(schema: Option<&'s VSchema>, opts: TypeOptions) -> Self {
        Self {
            schema,
            opts,
            path: Vec::new(),
        }
    }

    fn error(&self, kind: TypeErrorKind, here: &str, detail: String) -> TypeError {
        let mut segs = self.path.clone();
        if !here.is_empty() {
            segs.push(here.to_string());
        }
        let path = if segs.is_empty() {
            "root".into()
        } else {
            segs.join("/")
        };
        TypeError { kind, path, detail }
    }

    fn child(
        &mut self,
        seg: String,
        q: &VQuery,
        ctx: &FeatureExpr,
    ) -> Result<QueryType, TypeError> {
        self.path.push(seg);
        let out = self.query(q, ctx);
        self.path.pop();
        out
    }

    fn query(&mut self, q: &VQuery, ctx: &FeatureExpr) -> Result<QueryType, TypeError> {
        let here = label(q);
        match q {
            VQuery::Empty => Ok(empty_type()),
            VQuery::Relation(r) => self.relation(r, ctx, &here),
            VQuery::Select(c, sub) => {
                let t = self.child(here.clone(), sub, ctx)?;
                self.path.push(here);
                let res = self.cond_in(c, ctx, &t);
                self.path.pop();
                res.map(|_| t)
            }
            VQuery::Project(attrs, sub) => {
                let t = self.child(here.clone(), sub, ctx)?;
                self.project(attrs, &t, ctx, &here)
            }
            VQuery::Choice(e, a, b) => {
                let ta = self.child(
                    format!("{here}[then]"),
                    a,
                    &FeatureExpr::conj(ctx.clone(), e.clone()),
                )?;
                let tb = self.child(
                    format!("{here}[else]"),
                    b,
                    &FeatureExpr::conj(ctx.clone(), FeatureExpr::neg(e.clone())),
                )?;
                self.check_same_types(&ta, &tb, &here)?;
                let ann = simplify(&FeatureExpr::disj(
                    ta.annotation().clone(),
                    tb.annotation().clone(),
                ));
                Ok(simplify_pcs(ta.union(&tb)).annotated(ann))
            }
            VQuery::Product(a, b) => {
                let ta = self.child(format!("{here}[left]"), a, ctx)?;
                let tb = self.child(format!("{here}[right]"), b, ctx)?;
                self.combine(&ta, &tb, &here)
            }
            VQuery::Join(c, a, b) => {
                let ta = self.child(format!("{here}[left]"), a, ctx)?;
                let tb = self.child(format!("{here}[right]"), b, ctx)?;
                let t = self.combine(&ta, &tb, &here)?;
                self.path.push(here);
                let res = self.cond_in(c, ctx, &t);
                self.path.pop();
                res.map(|_| t)
            }
            VQuery::SetOp(_, a, b) => {
                let ta = self.child(format!("{here}[left]"), a, ctx)?;
                let tb = self.child(format!("{here}[right]"), b, ctx)?;
                self.check_same_types(&ta, &tb, &here)?;
                if !ta.equiv(&tb) {
                    let (l, r) = (ta.push_annotation(), tb.push_annotation());
                    let detail = match first_difference(&l, &r) {
                        Some((name, pl, pr)) => format!(
                            "operand types differ on `{name}`: {} versus {}; witness {}",
                            show(&pl),
                            show(&pr),
                            witness(&FeatureExpr::or(
                                FeatureExpr::and(pl.clone(), FeatureExpr::not(pr.clone())),
                                FeatureExpr::and(pr, FeatureExpr::not(pl)),
                            ))
                        ),
                        None => "operand types differ".into(),
                    };
                    return Err(self.error(TypeErrorKind::NotEquivalent, &here, detail));
                }
                Ok(ta)
            }
        }
    }

    fn relation(&mut self, r: &str, ctx: &FeatureExpr, here: &str) -> Result<QueryType, TypeError> {
        if !featexpr::sat(ctx) {
            if self.opts.strict_context {
                return Err(self.error(
                    TypeErrorKind::UnsatContext,
                    here,
                    format!("relation `{r}` is reached under unsatisfiable context {ctx}"),
                ));
            }
            return Ok(empty_type());
        }
        let Some(rel) = self.schema.and_then(|s| s.relation(r)) else {
            return Err(self.error(
                TypeErrorKind::UnknownRelation,
                here,
                format!("relation `{r}` is not in the schema"),
            ));
        };
        let ann = FeatureExpr::conj(ctx.clone(), rel.pc.clone());
        if !featexpr::sat(&ann) {
            return Err(self.error(
                TypeErrorKind::UnsatContext,
                here,
                format!(
                    "relation `{r}` has presence {} which never holds in context {}",
                    show(&rel.pc),
                    show(ctx)
                ),
            ));
        }
        let mut t = VSet::new();
        for e in rel.attrs.iter() {
            t.insert_or_drop(
                TypedAttr::new(&e.value.name, e.value.atype, r),
                e.pc.clone(),
            );
        }
        Ok(t.annotated(simplify(&ann)))
    }

    fn project(
        &mut self,
        attrs: &VSet<AttrRef>,
        sub: &QueryType,
        ctx: &FeatureExpr,
        here: &str,
    ) -> Result<QueryType, TypeError> {
        let pushed = sub.push_annotation();
        let mut out: QueryType = VSet::new();
        for e in attrs.push_annotation().iter() {
            let pc = FeatureExpr::conj(e.pc.clone(), ctx.clone());
            let Some(found) = resolve(&pushed, &e.value) else {
                return Err(self.error(
                    TypeErrorKind::NotSubsumed,
                    here,
                    format!(
                        "projected attribute `{}` is not in the subquery type",
                        e.value
                    ),
                ));
            };
            let both = FeatureExpr::and(pc.clone(), found.pc.clone());
            if !featexpr::sat(&both) {
                return Err(self.error(
                    TypeErrorKind::NotSubsumed,
                    here,
                    format!(
                        "projected attribute `{}` is present under {} but the subquery provides it only under {}",
                        e.value,
                        show(&pc),
                        show(&found.pc)
                    ),
                ));
            }
            out.insert_or_drop(found.value.clone(), simplify(&both));
        }
        Ok(out.annotated(sub.annotation().clone()))
    }

    /// Product typing: operands may not share an attribute under any common
    /// configuration.
    fn combine(&self, a: &QueryType, b: &QueryType, here: &str) -> Result<QueryType, TypeError> {
        let (pa, pb) = (a.push_annotation(), b.push_annotation());
        for e in pa.iter() {
            if let Some(o) = pb.get(&e.value.name) {
                let both = FeatureExpr::and(e.pc.clone(), o.pc.clone());
                if featexpr::sat(&both) {
                    return Err(self.error(
                        TypeErrorKind::NotDisjoint,
                        here,
                        format!(
                            "attribute `{}` appears on both sides under {}; witness {}",
                            e.value.name,
                            show(&both),
                            witness(&both)
                        ),
                    ));
                }
            }
        }
        let ann = simplify(&FeatureExpr::conj(
            a.annotation().clone(),
            b.annotation().clone(),
        ));
        Ok(simplify_pcs(a.union(b)).annotated(ann))
    }

    fn check_same_types(&self, a: &QueryType, b: &QueryType, here: &str) -> Result<(), TypeError> {
        for e in a.iter() {
            if let Some(o) = b.get(&e.value.name) {
                if o.value.atype != e.value.atype {
                    return Err(self.error(
                        TypeErrorKind::TypeMismatch,
                        here,
                        format!(
                            "attribute `{}` is {} on one side and {} on the other",
                            e.value.name, e.value.atype, o.value.atype
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Condition of a selection or join over a subquery of type `t`.
    fn cond_in(&self, c: &VCondition, ctx: &FeatureExpr, t: &QueryType) -> Result<(), TypeError> {
        let cctx = FeatureExpr::conj(ctx.clone(), t.annotation().clone());
        self.cond(c, &cctx, &t.push_annotation())
    }

    fn cond(&self, c: &VCondition, ctx: &FeatureExpr, attrs: &QueryType) -> Result<(), TypeError> {
        if !featexpr::sat(ctx) {
            return Ok(());
        }
        match c {
            VCondition::Lit(_) => Ok(()),
            VCondition::CmpConst(a, _, v) => {
                let found = self.attr(a, ctx, attrs)?;
                match v.atype() {
                    Some(t) if t != found.value.atype => Err(self.error(
                        TypeErrorKind::DomainViolation,
                        "cond",
                        format!(
                            "constant {v} is not in the domain of `{a}` ({})",
                            found.value.atype
                        ),
                    )),
                    _ => Ok(()),
                }
            }
            VCondition::CmpAttr(a, _, b) => {
                let fa = self.attr(a, ctx, attrs)?;
                let fb = self.attr(b, ctx, attrs)?;
                if fa.value.atype != fb.value.atype {
                    return Err(self.error(
                        TypeErrorKind::TypeMismatch,
                        "cond",
                        format!(
                            "`{a}` is {} but `{b}` is {}",
                            fa.value.atype, fb.value.atype
                        ),
                    ));
                }
                Ok(())
            }
            VCondition::Not(x) => self.cond(x, ctx, attrs),
            VCondition::And(x, y) | VCondition::Or(x, y) => {
                self.cond(x, ctx, attrs)?;
                self.cond(y, ctx, attrs)
            }
            VCondition::Choice(e, x, y) => {
                self.cond(x, &FeatureExpr::conj(ctx.clone(), e.clone()), attrs)?;
                self.cond(
                    y,
                    &FeatureExpr::conj(ctx.clone(), FeatureExpr::neg(e.clone())),
                    attrs,
                )
            }
        }
    }

    fn attr<'a>(
        &self,
        a: &AttrRef,
        ctx: &FeatureExpr,
        attrs: &'a QueryType,
    ) -> Result<&'a VElem<TypedAttr>, TypeError> {
        let Some(found) = resolve(attrs, a) else {
            return Err(self.error(
                TypeErrorKind::AttrNotInType,
                "cond",
                format!("attribute `{a}` is not in the type"),
            ));
        };
        if !featexpr::implies(ctx, &found.pc) {
            let gap = FeatureExpr::and(ctx.clone(), FeatureExpr::not(found.pc.clone()));
            return Err(self.error(
                TypeErrorKind::ContextNotImplied,
                "cond",
                format!(
                    "context {} does not imply presence {} of `{a}`; witness {}",
                    show(ctx),
                    show(&found.pc),
                    witness(&gap)
                ),
            ));
        }
        Ok(found)
    }
}

fn simplify_pcs(t: QueryType) -> QueryType {
    t.map_pcs(simplify)
}

/// Looks up `a` by name; a qualifier must be among the attribute's origins.
pub(crate) fn resolve<'a>(t: &'a QueryType, a: &AttrRef) -> Option<&'a VElem<TypedAttr>> {
    let found = t.get(&a.name)?;
    match &a.qualifier {
        Some(q) if !found.value.origins.contains(q) => None,
        _ => Some(found),
    }
}

/// First attribute on which two pushed types disagree, with both conditions.
fn first_difference(a: &QueryType, b: &QueryType) -> Option<(String, FeatureExpr, FeatureExpr)> {
    let pc_of = |t: &QueryType, k: &String| t.get(k).map_or(FeatureExpr::FALSE, |e| e.pc.clone());
    let names: Vec<String> = a
        .values()
        .chain(b.values())
        .map(|v| v.name.clone())
        .collect();
    names.into_iter().find_map(|n| {
        let (pa, pb) = (pc_of(a, &n), pc_of(b, &n));
        (!featexpr::equiv(&pa, &pb)).then_some((n, pa, pb))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_schema;
    use crate::featexpr::{equiv, parse_fexp};
    use crate::vra::{parse_condition, parse_query};

    const S2: &str = "\
features V3, V4, V5
featuremodel V3 | V4 | V5
relation empbio (empno int, sex text, birthdate text,
                 name text # V4, firstname text # V5, lastname text # V5) # V3 | V4 | V5
";

    fn fx(s: &str) -> FeatureExpr {
        parse_fexp(s).unwrap()
    }

    fn check(schema: &str, query: &str) -> Result<QueryType, TypeError> {
        let s = parse_schema(schema).unwrap();
        check_query(&parse_query(query).unwrap(), &s, TypeOptions::default())
    }

    fn kind(schema: &str, query: &str) -> TypeErrorKind {
        check(schema, query).unwrap_err().kind
    }

    #[test]
    fn relation_type_carries_context() {
        let t = check(S2, "empbio").unwrap();
        assert!(equiv(t.annotation(), &fx("V3 | V4 | V5")));
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn projection_intersects_with_subquery() {
        let t = check(S2, "proj [empno # !V3, name] empbio").unwrap();
        assert_eq!(render_type(&t), "{ empno # !V3, name # V4 } # V3 | V4 | V5");
    }

    #[test]
    fn specific_and_relaxed_projections_share_a_type() {
        let q1 = "proj [empno # !V3, name # V4, firstname # V5, lastname # V5] empbio";
        let q2 = "proj [empno # !V3, name, firstname, lastname] empbio";
        let t1 = check(S2, q1).unwrap();
        let t2 = check(S2, q2).unwrap();
        assert!(t1.equiv(&t2));
        let expect = "{ empno # !V3, name # V4, firstname # V5, lastname # V5 } # V3 | V4 | V5";
        assert_eq!(render_type(&t1), expect);
        assert_eq!(render_type(&t2), expect);
    }

    #[test]
    fn errors_name_their_kind() {
        let s = "features A\nrelation r (a int, b text # A, c text)\nrelation s (d int)\n";
        assert_eq!(kind(s, "t"), TypeErrorKind::UnknownRelation);
        assert_eq!(kind(s, "prod r r"), TypeErrorKind::NotDisjoint);
        assert_eq!(kind(s, "proj [z] r"), TypeErrorKind::NotSubsumed);
        assert_eq!(kind(s, "proj [b # !A] r"), TypeErrorKind::NotSubsumed);
        assert_eq!(kind(s, "sel (z = 1) r"), TypeErrorKind::AttrNotInType);
        assert_eq!(kind(s, "sel (b = 'x') r"), TypeErrorKind::ContextNotImplied);
        assert_eq!(kind(s, "sel (a = 'x') r"), TypeErrorKind::DomainViolation);
        assert_eq!(kind(s, "sel (a = c) r"), TypeErrorKind::TypeMismatch);
        assert_eq!(kind(s, "union r s"), TypeErrorKind::NotEquivalent);
        assert_eq!(
            kind(s, "choice B { r } { r }"),
            TypeErrorKind::UndeclaredFeature
        );
    }

    #[test]
    fn condition_choice_refines_context() {
        let s = "features A\nrelation r (a int, b text # A)\n";
        assert!(check(s, "sel (CHC A (b = 'x') (a = 1)) r").is_ok());
        assert!(check(s, "choice A { sel (b = 'x') r } { r }").is_ok());
    }

    #[test]
    fn qualified_references_resolve_by_origin() {
        let s = "features\nrelation r (a int)\nrelation s (b int)\n";
        assert!(check(s, "join (r.a = s.b) r s").is_ok());
        assert_eq!(
            kind(s, "join (s.a = r.b) r s"),
            TypeErrorKind::AttrNotInType
        );
    }

    #[test]
    fn dead_branches_type_empty_unless_strict() {
        let s = parse_schema("features A\nrelation r (a int)\n").unwrap();
        let q = parse_query("choice A { choice A { r } { r } } { r }").unwrap();
        assert!(check_query(&q, &s, TypeOptions::default()).is_ok());
        let strict = TypeOptions {
            strict_context: true,
        };
        let err = check_query(&q, &s, strict).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::UnsatContext);
        assert_eq!(err.path, "choice[then]/choice[else]/rel r");
    }

    #[test]
    fn type_cond_checks_standalone() {
        let mut attrs: QueryType = VSet::new();
        attrs
            .insert(TypedAttr::new("a1", AttrType::Int, "r"), FeatureExpr::TRUE)
            .unwrap();
        attrs
            .insert(TypedAttr::new("a2", AttrType::Int, "r"), FeatureExpr::TRUE)
            .unwrap();
        let c = parse_condition("a1 = a2").unwrap();
        assert!(type_cond(&c, &FeatureExpr::TRUE, &attrs).is_ok());
    }

    #[test]
    fn error_detail_has_witness() {
        let s = "features A\nrelation r (a int, b text # A)\n";
        let err = check(s, "sel (b = 'x') r").unwrap_err();
        assert_eq!(err.path, "sel/cond");
        assert!(err.detail.contains("witness {}"), "{}", err.detail);
    }
}
