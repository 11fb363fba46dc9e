use super::{AttrType, CatalogError, VAttr, VRelSchema, VSchema};
use crate::featexpr::{parse_fexp_from, FeatureExpr, FeatureName};
use crate::lexer::{Cursor, SyntaxError, Tok};

/// Parses a `.vschema` document:
///
/// ```text
/// features V4, V5
/// featuremodel V4 | V5
/// relation r (a int, b text # V5) # V4 | V5
/// ```
///
/// The `featuremodel` line is optional and defaults to `true`.
pub fn parse_schema(text: &str) -> Result<VSchema, CatalogError> {
    let mut cur = Cursor::new(text)?;
    cur.expect_keyword("features")?;
    let mut features = Vec::new();
    if matches!(cur.peek(), Some(Tok::Ident(s)) if !is_keyword(s)) {
        loop {
            let offset = cur.offset();
            let name = cur.expect_ident()?;
            let f = FeatureName::new(&name)
                .map_err(|_| SyntaxError::new(offset, format!("invalid feature name `{name}`")))?;
            features.push(f);
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
    }
    let model = if cur.eat_keyword("featuremodel") {
        parse_fexp_from(&mut cur)?
    } else {
        FeatureExpr::TRUE
    };
    let mut schema = VSchema::new(features, model)?;
    while !cur.at_end() {
        cur.expect_keyword("relation")?;
        let rel = parse_relation(&mut cur)?;
        schema.add_relation(rel)?;
    }
    Ok(schema)
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "features" | "featuremodel" | "relation")
}

pub(crate) fn parse_relation(cur: &mut Cursor) -> Result<VRelSchema, CatalogError> {
    let name = cur.expect_ident()?;
    cur.expect(&Tok::LParen)?;
    let mut attrs = Vec::new();
    if !cur.eat(&Tok::RParen) {
        loop {
            let attr = cur.expect_ident()?;
            let offset = cur.offset();
            let ty = cur.expect_ident()?;
            let atype: AttrType = ty
                .parse()
                .map_err(|m: String| SyntaxError::new(offset, m))?;
            let pc = parse_annotation(cur)?;
            attrs.push((VAttr::new(attr, atype), pc));
            if cur.eat(&Tok::RParen) {
                break;
            }
            cur.expect(&Tok::Comma)?;
        }
    }
    let pc = parse_annotation(cur)?;
    let mut rel = VRelSchema::new(name, pc);
    for (attr, pc) in attrs {
        rel.add_attr(attr, pc)?;
    }
    Ok(rel)
}

fn parse_annotation(cur: &mut Cursor) -> Result<FeatureExpr, SyntaxError> {
    if cur.eat(&Tok::Hash) {
        parse_fexp_from(cur)
    } else {
        Ok(FeatureExpr::TRUE)
    }
}
