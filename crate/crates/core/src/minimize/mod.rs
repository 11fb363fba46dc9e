//! Variation minimization: rewriting a query so that choices sit as deep in
//! the tree as possible, which shrinks the part of the query that is
//! duplicated across variants.
//!
//! [`minimize`] applies the rules bottom-up until none fires. Every
//! distributive or factoring step strictly decreases [`weight`], the summed
//! size of all choice subtrees, so the process terminates.

use std::fmt;

use crate::featexpr::{self, simplify, simplify_with_care, FeatureExpr};
use crate::vra::{AttrRef, VCondition, VQuery};
use crate::vset::VSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `choice e {proj A1 q1} {proj A2 q2}` to `proj (A1^e ∪ A2^¬e) choice e {q1} {q2}`.
    ChoiceProject,
    /// `choice e {sel θ1 q1} {sel θ2 q2}` to `sel (CHC e θ1 θ2) choice e {q1} {q2}`.
    ChoiceSelect,
    ChoiceProduct,
    ChoiceJoin,
    ChoiceSetOp,
    /// Selections sharing a leading conjunct under a choice.
    FactorSelect,
    /// A selection over a choice of selections.
    FactorNestedSelect,
    /// Joins sharing a leading conjunct under a choice.
    FactorJoin,
    /// `choice true` and `choice false`.
    ChoiceLiteral,
    /// `choice e {q} {q}`.
    ChoiceIdem,
    /// A choice whose dimension is decided by the context.
    ChoiceContext,
}

impl Rule {
    pub const ALL: [Rule; 11] = [
        Rule::ChoiceLiteral,
        Rule::ChoiceContext,
        Rule::ChoiceIdem,
        Rule::FactorSelect,
        Rule::FactorJoin,
        Rule::FactorNestedSelect,
        Rule::ChoiceProject,
        Rule::ChoiceSelect,
        Rule::ChoiceProduct,
        Rule::ChoiceJoin,
        Rule::ChoiceSetOp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::ChoiceProject => "choice-proj",
            Rule::ChoiceSelect => "choice-sel",
            Rule::ChoiceProduct => "choice-prod",
            Rule::ChoiceJoin => "choice-join",
            Rule::ChoiceSetOp => "choice-setop",
            Rule::FactorSelect => "factor-sel",
            Rule::FactorNestedSelect => "factor-nested-sel",
            Rule::FactorJoin => "factor-join",
            Rule::ChoiceLiteral => "choice-literal",
            Rule::ChoiceIdem => "choice-idem",
            Rule::ChoiceContext => "choice-context",
        }
    }

    /// Rules that move a choice down past an operator.
    pub fn is_distributive(self) -> bool {
        !matches!(
            self,
            Rule::ChoiceLiteral | Rule::ChoiceIdem | Rule::ChoiceContext
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One rewrite performed by [`minimize_traced`], with the weight of the
/// rewritten subtree before and after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub rule: Rule,
    pub before: usize,
    pub after: usize,
}

/// Sum over choice nodes of the size of their subtrees.
pub fn weight(q: &VQuery) -> usize {
    let mut total = 0;
    q.visit(&mut |n| {
        if let VQuery::Choice(..) = n {
            total += n.size();
        }
    });
    total
}

/// A condition choice, collapsed when both alternatives are identical.
fn chc(e: &FeatureExpr, a: &VCondition, b: &VCondition) -> VCondition {
    if a == b {
        a.clone()
    } else {
        VCondition::choice(e.clone(), a.clone(), b.clone())
    }
}

fn choice(e: &FeatureExpr, a: &VQuery, b: &VQuery) -> VQuery {
    VQuery::choice(e.clone(), a.clone(), b.clone())
}

/// `A1^e ∪ A2^¬e` with simplified conditions.
fn merge_attrs(e: &FeatureExpr, a1: &VSet<AttrRef>, a2: &VSet<AttrRef>) -> VSet<AttrRef> {
    let mut out = VSet::new();
    let not_e = FeatureExpr::neg(e.clone());
    for (set, dim) in [(a1, e), (a2, &not_e)] {
        for x in set.push_annotation().iter() {
            out.insert_or_drop(
                x.value.clone(),
                FeatureExpr::conj(x.pc.clone(), dim.clone()),
            );
        }
    }
    out.map_pcs(simplify)
}

/// Applies `rule` at the root of `q` under context `ctx`.
fn apply_at(rule: Rule, q: &VQuery, ctx: &FeatureExpr) -> Option<VQuery> {
    use VQuery as Q;
    if let (Rule::FactorNestedSelect, Q::Select(t1, inner)) = (rule, q) {
        let Q::Choice(e, a, b) = &**inner else {
            return None;
        };
        let (Q::Select(t2, q1), Q::Select(t3, q2)) = (&**a, &**b) else {
            return None;
        };
        return Some(Q::select(
            VCondition::and(t1.clone(), chc(e, t2, t3)),
            choice(e, q1, q2),
        ));
    }
    let Q::Choice(e, a, b) = q else { return None };
    match (rule, &**a, &**b) {
        (Rule::ChoiceLiteral, _, _) if e.is_true() => Some((**a).clone()),
        (Rule::ChoiceLiteral, _, _) if e.is_false() => Some((**b).clone()),
        (Rule::ChoiceIdem, x, y) if x == y => Some(x.clone()),
        (Rule::ChoiceContext, x, y) => {
            if !featexpr::sat(&FeatureExpr::and(ctx.clone(), e.clone())) {
                Some(y.clone())
            } else if !featexpr::sat(&FeatureExpr::and(ctx.clone(), FeatureExpr::not(e.clone()))) {
                Some(x.clone())
            } else {
                None
            }
        }
        (Rule::ChoiceProject, Q::Project(a1, q1), Q::Project(a2, q2)) => {
            Some(Q::project(merge_attrs(e, a1, a2), choice(e, q1, q2)))
        }
        (Rule::ChoiceSelect, Q::Select(t1, q1), Q::Select(t2, q2)) => {
            Some(Q::select(chc(e, t1, t2), choice(e, q1, q2)))
        }
        (Rule::ChoiceProduct, Q::Product(q1, q2), Q::Product(q3, q4)) => {
            Some(Q::product(choice(e, q1, q3), choice(e, q2, q4)))
        }
        (Rule::ChoiceJoin, Q::Join(t1, q1, q2), Q::Join(t2, q3, q4)) => Some(Q::join(
            chc(e, t1, t2),
            choice(e, q1, q3),
            choice(e, q2, q4),
        )),
        (Rule::ChoiceSetOp, Q::SetOp(k1, q1, q2), Q::SetOp(k2, q3, q4)) if k1 == k2 => {
            Some(Q::SetOp(
                *k1,
                Box::new(choice(e, q1, q3)),
                Box::new(choice(e, q2, q4)),
            ))
        }
        (Rule::FactorSelect, Q::Select(t, q1), Q::Select(u, q2)) => {
            let (VCondition::And(t1, t2), VCondition::And(u1, t3)) = (t, u) else {
                return None;
            };
            (t1 == u1).then(|| {
                Q::select(
                    VCondition::and((**t1).clone(), chc(e, t2, t3)),
                    choice(e, q1, q2),
                )
            })
        }
        (Rule::FactorJoin, Q::Join(t, q1, q2), Q::Join(u, q3, q4)) => {
            let (VCondition::And(t1, t2), VCondition::And(u1, t3)) = (t, u) else {
                return None;
            };
            (t1 == u1).then(|| {
                Q::select(
                    chc(e, t2, t3),
                    Q::join((**t1).clone(), choice(e, q1, q3), choice(e, q2, q4)),
                )
            })
        }
        _ => None,
    }
}

fn first_at(q: &VQuery, ctx: &FeatureExpr) -> Option<(Rule, VQuery)> {
    Rule::ALL
        .iter()
        .find_map(|&r| apply_at(r, q, ctx).map(|out| (r, out)))
}

/// One application of `rule` at the outermost, leftmost matching node.
/// Context-dependent rules see the context `true`.
pub fn apply_rule(rule: Rule, q: &VQuery) -> Option<VQuery> {
    if let Some(out) = apply_at(rule, q, &FeatureExpr::TRUE) {
        return Some(out);
    }
    let mut children = children(q);
    for i in 0..children.len() {
        if let Some(out) = apply_rule(rule, &children[i]) {
            children[i] = out;
            return Some(rebuild(q, children));
        }
    }
    None
}

fn children(q: &VQuery) -> Vec<VQuery> {
    match q {
        VQuery::Relation(_) | VQuery::Empty => Vec::new(),
        VQuery::Select(_, x) | VQuery::Project(_, x) => vec![(**x).clone()],
        VQuery::Choice(_, a, b)
        | VQuery::Join(_, a, b)
        | VQuery::Product(a, b)
        | VQuery::SetOp(_, a, b) => vec![(**a).clone(), (**b).clone()],
    }
}

fn rebuild(q: &VQuery, mut kids: Vec<VQuery>) -> VQuery {
    let mut next = || Box::new(kids.remove(0));
    match q {
        VQuery::Relation(_) | VQuery::Empty => q.clone(),
        VQuery::Select(c, _) => VQuery::Select(c.clone(), next()),
        VQuery::Project(a, _) => VQuery::Project(a.clone(), next()),
        VQuery::Choice(e, _, _) => {
            let a = next();
            VQuery::Choice(e.clone(), a, next())
        }
        VQuery::Join(c, _, _) => {
            let a = next();
            VQuery::Join(c.clone(), a, next())
        }
        VQuery::Product(..) => {
            let a = next();
            VQuery::Product(a, next())
        }
        VQuery::SetOp(k, _, _) => {
            let a = next();
            VQuery::SetOp(*k, a, next())
        }
    }
}

/// Minimizes under the context `true`.
pub fn minimize(q: &VQuery) -> VQuery {
    minimize_in(q, &FeatureExpr::TRUE)
}

/// Minimizes under `ctx`, typically the feature model.
pub fn minimize_in(q: &VQuery, ctx: &FeatureExpr) -> VQuery {
    minimize_traced(q, ctx).0
}

/// Minimizes under `ctx` and records every rewrite.
pub fn minimize_traced(q: &VQuery, ctx: &FeatureExpr) -> (VQuery, Vec<Step>) {
    let mut m = Minimizer { steps: Vec::new() };
    let out = m.run(q, ctx);
    (out, m.steps)
}

struct Minimizer {
    steps: Vec<Step>,
}

impl Minimizer {
    fn run(&mut self, q: &VQuery, ctx: &FeatureExpr) -> VQuery {
        let kids = match q {
            VQuery::Choice(e, a, b) => vec![
                self.run(a, &FeatureExpr::conj(ctx.clone(), e.clone())),
                self.run(
                    b,
                    &FeatureExpr::conj(ctx.clone(), FeatureExpr::neg(e.clone())),
                ),
            ],
            _ => children(q).iter().map(|k| self.run(k, ctx)).collect(),
        };
        let q = rebuild(q, kids);
        match first_at(&q, ctx) {
            None => q,
            Some((rule, out)) => {
                let (before, after) = (weight(&q), weight(&out));
                debug_assert!(after < before, "{rule} did not decrease the weight");
                self.steps.push(Step {
                    rule,
                    before,
                    after,
                });
                self.run(&out, ctx)
            }
        }
    }
}

/// Moves choices up by one top-down pass of the reversed distributive
/// rules. The result is larger but names each variant's query in full.
pub fn lift(q: &VQuery) -> VQuery {
    let q = lift_at(q).unwrap_or_else(|| q.clone());
    let kids = children(&q).iter().map(lift).collect();
    rebuild(&q, kids)
}

/// `A` restricted to the side of a choice on `dim`.
fn restrict_attrs(a: &VSet<AttrRef>, dim: &FeatureExpr) -> VSet<AttrRef> {
    let mut out = VSet::new();
    for x in a.push_annotation().iter() {
        if featexpr::sat(&FeatureExpr::and(x.pc.clone(), dim.clone())) {
            out.insert_or_drop(x.value.clone(), simplify_with_care(&x.pc, dim));
        }
    }
    out
}

fn lift_at(q: &VQuery) -> Option<VQuery> {
    use VQuery as Q;
    let split = |c: &VCondition, e: &FeatureExpr| match c {
        VCondition::Choice(d, t1, t2) if d == e => Some(((**t1).clone(), (**t2).clone())),
        _ => None,
    };
    match q {
        Q::Project(a, sub) => {
            let Q::Choice(e, q1, q2) = &**sub else {
                return None;
            };
            let not_e = FeatureExpr::neg(e.clone());
            Some(Q::choice(
                e.clone(),
                Q::project(restrict_attrs(a, e), (**q1).clone()),
                Q::project(restrict_attrs(a, &not_e), (**q2).clone()),
            ))
        }
        Q::Select(c, sub) => {
            let Q::Choice(e, q1, q2) = &**sub else {
                return None;
            };
            let (t1, t2) = split(c, e)?;
            Some(Q::choice(
                e.clone(),
                Q::select(t1, (**q1).clone()),
                Q::select(t2, (**q2).clone()),
            ))
        }
        Q::Product(x, y) => {
            let (Q::Choice(e, q1, q2), Q::Choice(d, q3, q4)) = (&**x, &**y) else {
                return None;
            };
            (e == d).then(|| {
                Q::choice(
                    e.clone(),
                    Q::product((**q1).clone(), (**q3).clone()),
                    Q::product((**q2).clone(), (**q4).clone()),
                )
            })
        }
        Q::Join(c, x, y) => {
            let (Q::Choice(e, q1, q2), Q::Choice(d, q3, q4)) = (&**x, &**y) else {
                return None;
            };
            if e != d {
                return None;
            }
            let (t1, t2) = split(c, e).unwrap_or_else(|| (c.clone(), c.clone()));
            Some(Q::choice(
                e.clone(),
                Q::join(t1, (**q1).clone(), (**q3).clone()),
                Q::join(t2, (**q2).clone(), (**q4).clone()),
            ))
        }
        Q::SetOp(k, x, y) => {
            let (Q::Choice(e, q1, q2), Q::Choice(d, q3, q4)) = (&**x, &**y) else {
                return None;
            };
            (e == d).then(|| {
                Q::choice(
                    e.clone(),
                    Q::SetOp(*k, Box::new((**q1).clone()), Box::new((**q3).clone())),
                    Q::SetOp(*k, Box::new((**q2).clone()), Box::new((**q4).clone())),
                )
            })
        }
        _ => None,
    }
}
