use std::fmt;

use super::{FeatureExpr, FeatureName};
use crate::lexer::{Cursor, SyntaxError, Tok};

/// Parses `true | false | IDENT | ! e | e & e | e "|" e | ( e )` with
/// precedence `!` > `&` > `|`, both binary operators left-associative.
pub fn parse_fexp(text: &str) -> Result<FeatureExpr, SyntaxError> {
    let mut cur = Cursor::new(text)?;
    let e = parse_fexp_from(&mut cur)?;
    cur.expect_end()?;
    Ok(e)
}

/// Parses one feature expression from the cursor, stopping at the first
/// token that cannot continue it.
pub fn parse_fexp_from(cur: &mut Cursor) -> Result<FeatureExpr, SyntaxError> {
    let mut lhs = parse_and(cur)?;
    while cur.eat(&Tok::Pipe) {
        let rhs = parse_and(cur)?;
        lhs = FeatureExpr::or(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_and(cur: &mut Cursor) -> Result<FeatureExpr, SyntaxError> {
    let mut lhs = parse_unary(cur)?;
    while cur.eat(&Tok::Amp) {
        let rhs = parse_unary(cur)?;
        lhs = FeatureExpr::and(lhs, rhs);
    }
    Ok(lhs)
}

fn parse_unary(cur: &mut Cursor) -> Result<FeatureExpr, SyntaxError> {
    let offset = cur.offset();
    match cur.peek() {
        Some(Tok::Bang) => {
            cur.bump();
            Ok(FeatureExpr::not(parse_unary(cur)?))
        }
        Some(Tok::LParen) => {
            cur.bump();
            let e = parse_fexp_from(cur)?;
            cur.expect(&Tok::RParen)?;
            Ok(e)
        }
        Some(Tok::Ident(name)) => {
            let e = match name.as_str() {
                "true" => FeatureExpr::TRUE,
                "false" => FeatureExpr::FALSE,
                other => FeatureExpr::Feature(FeatureName::new(other).map_err(|_| {
                    SyntaxError::new(offset, format!("invalid feature name `{other}`"))
                })?),
            };
            cur.bump();
            Ok(e)
        }
        _ => Err(cur.unexpected("a feature expression")),
    }
}

fn level(e: &FeatureExpr) -> u8 {
    match e {
        FeatureExpr::Or(..) => 0,
        FeatureExpr::And(..) => 1,
        _ => 2,
    }
}

pub(super) fn write_fexp(f: &mut fmt::Formatter<'_>, e: &FeatureExpr, required: u8) -> fmt::Result {
    let paren = level(e) < required;
    if paren {
        f.write_str("(")?;
    }
    match e {
        FeatureExpr::Lit(b) => write!(f, "{b}")?,
        FeatureExpr::Feature(name) => write!(f, "{name}")?,
        FeatureExpr::Not(x) => {
            f.write_str("!")?;
            write_fexp(f, x, 2)?;
        }
        FeatureExpr::And(a, b) => {
            write_fexp(f, a, 1)?;
            f.write_str(" & ")?;
            write_fexp(f, b, 2)?;
        }
        FeatureExpr::Or(a, b) => {
            write_fexp(f, a, 0)?;
            f.write_str(" | ")?;
            write_fexp(f, b, 1)?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}
