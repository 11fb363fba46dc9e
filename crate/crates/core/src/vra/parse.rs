use super::{AttrRef, CmpOp, SetOpKind, VCondition, VQuery};
use crate::featexpr::{parse_fexp_from, FeatureExpr};
use crate::lexer::{Cursor, SyntaxError, Tok};
use crate::storage::Value;
use crate::vset::VSet;

/// Reserved words of the query grammar. A relation whose name is one of
/// these must be written `rel name`.
pub const KEYWORDS: &[&str] = &[
    "rel", "sel", "proj", "choice", "join", "prod", "union", "diff", "empty", "CHC", "true",
    "false",
];

pub fn parse_query(text: &str) -> Result<VQuery, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let q = query(&mut cur)?;
    cur.expect_end()?;
    Ok(q)
}

pub fn parse_condition(text: &str) -> Result<VCondition, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let c = cond(&mut cur)?;
    cur.expect_end()?;
    Ok(c)
}

fn query(cur: &mut Cursor) -> Result<VQuery, SyntaxError> {
    let Some(tok) = cur.peek().cloned() else {
        return Err(cur.unexpected("a query"));
    };
    match tok {
        Tok::LParen => {
            cur.bump();
            let q = query(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(q)
        }
        Tok::Ident(word) => {
            cur.bump();
            match word.as_str() {
                "rel" => Ok(VQuery::Relation(cur.expect_ident()?)),
                "empty" => Ok(VQuery::Empty),
                "sel" => {
                    let c = paren_cond(cur)?;
                    Ok(VQuery::select(c, query(cur)?))
                }
                "proj" => {
                    let attrs = attr_list(cur)?;
                    Ok(VQuery::project(attrs, query(cur)?))
                }
                "choice" => {
                    let e = parse_fexp_from(cur)?;
                    let a = braced_query(cur)?;
                    let b = braced_query(cur)?;
                    Ok(VQuery::choice(e, a, b))
                }
                "join" => {
                    let c = paren_cond(cur)?;
                    let a = query(cur)?;
                    Ok(VQuery::join(c, a, query(cur)?))
                }
                "prod" => {
                    let a = query(cur)?;
                    Ok(VQuery::product(a, query(cur)?))
                }
                "union" | "diff" => {
                    let kind = if word == "union" {
                        SetOpKind::Union
                    } else {
                        SetOpKind::Difference
                    };
                    let a = query(cur)?;
                    let b = query(cur)?;
                    Ok(VQuery::SetOp(kind, Box::new(a), Box::new(b)))
                }
                w if KEYWORDS.contains(&w) => Err(SyntaxError::new(
                    cur.offset(),
                    format!("keyword `{w}` cannot start a query"),
                )),
                _ => Ok(VQuery::Relation(word)),
            }
        }
        _ => Err(cur.unexpected("a query")),
    }
}

fn braced_query(cur: &mut Cursor) -> Result<VQuery, SyntaxError> {
    cur.expect(&Tok::LBrace)?;
    let q = query(cur)?;
    cur.expect(&Tok::RBrace)?;
    Ok(q)
}

fn paren_cond(cur: &mut Cursor) -> Result<VCondition, SyntaxError> {
    cur.expect(&Tok::LParen)?;
    let c = cond(cur)?;
    cur.expect(&Tok::RParen)?;
    Ok(c)
}

fn attr_ref(cur: &mut Cursor) -> Result<AttrRef, SyntaxError> {
    let first = cur.expect_ident()?;
    if cur.eat(&Tok::Dot) {
        Ok(AttrRef::qualified(first, cur.expect_ident()?))
    } else {
        Ok(AttrRef::new(first))
    }
}

fn attr_list(cur: &mut Cursor) -> Result<VSet<AttrRef>, SyntaxError> {
    cur.expect(&Tok::LBracket)?;
    let mut set = VSet::new();
    if cur.eat(&Tok::RBracket) {
        return Ok(set);
    }
    loop {
        let offset = cur.offset();
        let attr = attr_ref(cur)?;
        let pc = if cur.eat(&Tok::Hash) {
            parse_fexp_from(cur)?
        } else {
            FeatureExpr::TRUE
        };
        if set.contains_key(&attr) {
            return Err(SyntaxError::new(
                offset,
                format!("attribute `{attr}` listed twice"),
            ));
        }
        set.insert(attr, pc.clone())
            .map_err(|_| SyntaxError::new(offset, format!("annotation `{pc}` is unsatisfiable")))?;
        if cur.eat(&Tok::RBracket) {
            return Ok(set);
        }
        cur.expect(&Tok::Comma)?;
    }
}

fn cond(cur: &mut Cursor) -> Result<VCondition, SyntaxError> {
    let mut lhs = cond_and(cur)?;
    while cur.eat(&Tok::Pipe) {
        lhs = VCondition::or(lhs, cond_and(cur)?);
    }
    Ok(lhs)
}

fn cond_and(cur: &mut Cursor) -> Result<VCondition, SyntaxError> {
    let mut lhs = cond_unary(cur)?;
    while cur.eat(&Tok::Amp) {
        lhs = VCondition::and(lhs, cond_unary(cur)?);
    }
    Ok(lhs)
}

fn cond_unary(cur: &mut Cursor) -> Result<VCondition, SyntaxError> {
    match cur.peek() {
        Some(Tok::Bang) => {
            cur.bump();
            Ok(VCondition::not(cond_unary(cur)?))
        }
        Some(Tok::LParen) => paren_cond(cur),
        Some(Tok::Ident(w)) if w == "true" || w == "false" => {
            let b = w == "true";
            cur.bump();
            Ok(VCondition::Lit(b))
        }
        Some(Tok::Ident(w)) if w == "CHC" => {
            cur.bump();
            let e = parse_fexp_from(cur)?;
            let a = paren_cond(cur)?;
            let b = paren_cond(cur)?;
            Ok(VCondition::choice(e, a, b))
        }
        Some(Tok::Ident(_)) => comparison(cur),
        _ => Err(cur.unexpected("a condition")),
    }
}

fn comparison(cur: &mut Cursor) -> Result<VCondition, SyntaxError> {
    let lhs = attr_ref(cur)?;
    let op = match cur.peek() {
        Some(Tok::Eq) => CmpOp::Eq,
        Some(Tok::Ne) => CmpOp::Ne,
        Some(Tok::Lt) => CmpOp::Lt,
        Some(Tok::Le) => CmpOp::Le,
        Some(Tok::Gt) => CmpOp::Gt,
        Some(Tok::Ge) => CmpOp::Ge,
        _ => return Err(cur.unexpected("a comparison operator")),
    };
    cur.bump();
    let value = match cur.peek() {
        Some(Tok::Int(i)) => Value::Int(*i),
        Some(Tok::Str(s)) => Value::Text(s.clone()),
        Some(Tok::Ident(w)) if w == "true" => Value::Bool(true),
        Some(Tok::Ident(w)) if w == "false" => Value::Bool(false),
        Some(Tok::Ident(_)) => return Ok(VCondition::CmpAttr(lhs, op, attr_ref(cur)?)),
        _ => return Err(cur.unexpected("an attribute or constant")),
    };
    cur.bump();
    Ok(VCondition::CmpConst(lhs, op, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_annotated_projection() {
        let q = parse_query("proj [empno # !V3, name] empbio").unwrap();
        let VQuery::Project(attrs, sub) = &q else {
            panic!("expected projection")
        };
        assert_eq!(**sub, VQuery::rel("empbio"));
        let elems: Vec<_> = attrs
            .iter()
            .map(|e| (e.value.to_string(), e.pc.to_string()))
            .collect();
        assert_eq!(
            elems,
            [
                ("empno".to_string(), "!V3".to_string()),
                ("name".to_string(), "true".to_string())
            ]
        );
    }

    #[test]
    fn parses_choice_with_empty_branch() {
        let q = parse_query("choice V4 { proj [empno, name] empbio } { empty }").unwrap();
        assert!(matches!(q, VQuery::Choice(_, _, ref b) if **b == VQuery::Empty));
    }

    #[test]
    fn rejects_malformed_queries() {
        assert!(parse_query("sel (a1 = a2) CHC A (r1) (r2)").is_err());
        assert!(parse_query("choice A { r } r").is_err());
        assert!(parse_query("proj [a, a] r").is_err());
        assert!(parse_query("prod r").is_err());
        assert!(parse_query("sel (a =) r").is_err());
    }

    #[test]
    fn parses_conditions() {
        let c = parse_condition("CHC edu (std = true) (true) & !(a <> 'x') | r.b >= c").unwrap();
        let VCondition::Or(lhs, rhs) = c else {
            panic!("expected disjunction")
        };
        assert!(matches!(*lhs, VCondition::And(..)));
        assert_eq!(
            *rhs,
            VCondition::CmpAttr(AttrRef::qualified("r", "b"), CmpOp::Ge, AttrRef::new("c"))
        );
    }

    #[test]
    fn keyword_relations_need_rel() {
        assert_eq!(parse_query("rel union").unwrap(), VQuery::rel("union"));
        assert!(parse_query("CHC").is_err());
    }
}
