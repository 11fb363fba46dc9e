//! Typing of plain queries against a configured schema.
//!
//! A relation that the configuration removed is `Absent`, as is `empty`.
//! Selection and projection keep absence, product and join are absent when
//! either operand is, and set operations treat an absent operand as the
//! empty attribute list.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::catalog::{AttrType, PlainSchema};
use crate::vra::{AttrRef, PlainCond, PlainQuery};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct PlainTypeError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainTypedAttr {
    pub name: String,
    pub atype: AttrType,
    pub origins: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlainType {
    Absent,
    Attrs(Vec<PlainTypedAttr>),
}

impl PlainType {
    /// Attribute names and types in name order; absent is the empty list.
    pub fn signature(&self) -> Vec<(String, AttrType)> {
        let mut out: Vec<(String, AttrType)> = match self {
            PlainType::Absent => Vec::new(),
            PlainType::Attrs(a) => a.iter().map(|x| (x.name.clone(), x.atype)).collect(),
        };
        out.sort();
        out
    }

    fn attrs(&self) -> &[PlainTypedAttr] {
        match self {
            PlainType::Absent => &[],
            PlainType::Attrs(a) => a,
        }
    }
}

/// Types `q` against `schema`; relations in `absent` exist in the variational
/// schema but not in this configuration.
pub fn plain_type(
    q: &PlainQuery,
    schema: &PlainSchema,
    absent: &BTreeSet<String>,
) -> Result<PlainType, PlainTypeError> {
    let err = |m: String| Err(PlainTypeError(m));
    match q {
        PlainQuery::Empty => Ok(PlainType::Absent),
        PlainQuery::Relation(r) => match schema.relation(r) {
            Some(rel) => Ok(PlainType::Attrs(
                rel.attrs
                    .iter()
                    .map(|a| PlainTypedAttr {
                        name: a.name.clone(),
                        atype: a.atype,
                        origins: BTreeSet::from([r.clone()]),
                    })
                    .collect(),
            )),
            None if absent.contains(r) => Ok(PlainType::Absent),
            None => err(format!("unknown relation `{r}`")),
        },
        PlainQuery::Select(c, sub) => {
            let t = plain_type(sub, schema, absent)?;
            if let PlainType::Attrs(a) = &t {
                plain_cond(c, a)?;
            }
            Ok(t)
        }
        PlainQuery::Project(list, sub) => match plain_type(sub, schema, absent)? {
            PlainType::Absent if list.is_empty() => Ok(PlainType::Absent),
            PlainType::Absent => err(format!(
                "projection of `{}` from an absent relation",
                list[0]
            )),
            PlainType::Attrs(a) => {
                let mut out: Vec<PlainTypedAttr> = Vec::new();
                for r in list {
                    let found = lookup(&a, r)?;
                    if !out.iter().any(|x| x.name == found.name) {
                        out.push(found.clone());
                    }
                }
                Ok(PlainType::Attrs(out))
            }
        },
        PlainQuery::Product(x, y) => product(
            plain_type(x, schema, absent)?,
            plain_type(y, schema, absent)?,
        ),
        PlainQuery::Join(c, x, y) => {
            let t = product(
                plain_type(x, schema, absent)?,
                plain_type(y, schema, absent)?,
            )?;
            if let PlainType::Attrs(a) = &t {
                plain_cond(c, a)?;
            }
            Ok(t)
        }
        PlainQuery::SetOp(k, x, y) => {
            let tx = plain_type(x, schema, absent)?;
            let ty = plain_type(y, schema, absent)?;
            if tx.signature() != ty.signature() {
                return err(format!(
                    "operands of {} have different attributes",
                    k.keyword()
                ));
            }
            Ok(tx)
        }
    }
}

fn product(a: PlainType, b: PlainType) -> Result<PlainType, PlainTypeError> {
    let (PlainType::Attrs(mut a), PlainType::Attrs(b)) = (a, b) else {
        return Ok(PlainType::Absent);
    };
    if let Some(x) = a.iter().find(|x| b.iter().any(|y| y.name == x.name)) {
        return Err(PlainTypeError(format!(
            "attribute `{}` on both sides of a product",
            x.name
        )));
    }
    a.extend(b);
    Ok(PlainType::Attrs(a))
}

fn lookup<'a>(
    attrs: &'a [PlainTypedAttr],
    r: &AttrRef,
) -> Result<&'a PlainTypedAttr, PlainTypeError> {
    attrs
        .iter()
        .find(|a| a.name == r.name && r.qualifier.as_ref().is_none_or(|q| a.origins.contains(q)))
        .ok_or_else(|| PlainTypeError(format!("no attribute `{r}`")))
}

fn plain_cond(c: &PlainCond, attrs: &[PlainTypedAttr]) -> Result<(), PlainTypeError> {
    match c {
        PlainCond::Lit(_) => Ok(()),
        PlainCond::CmpConst(a, _, v) => {
            let found = lookup(attrs, a)?;
            match v.atype() {
                Some(t) if t != found.atype => Err(PlainTypeError(format!(
                    "constant {v} compared with {} `{a}`",
                    found.atype
                ))),
                _ => Ok(()),
            }
        }
        PlainCond::CmpAttr(a, _, b) => {
            if lookup(attrs, a)?.atype != lookup(attrs, b)?.atype {
                return Err(PlainTypeError(format!(
                    "`{a}` and `{b}` have different types"
                )));
            }
            Ok(())
        }
        PlainCond::Not(x) => plain_cond(x, attrs),
        PlainCond::And(x, y) | PlainCond::Or(x, y) => {
            plain_cond(x, attrs)?;
            plain_cond(y, attrs)
        }
    }
}

impl PlainType {
    pub fn names(&self) -> Vec<&str> {
        self.attrs().iter().map(|a| a.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{configure_schema, parse_schema};
    use crate::vra::parse_query;

    fn plain(text: &str) -> PlainQuery {
        PlainQuery::from_vquery(&parse_query(text).unwrap()).unwrap()
    }

    #[test]
    fn absence_propagates() {
        let s = parse_schema("features A\nrelation r (a int) # A\nrelation s (b int)\n").unwrap();
        let c = s.configuration(Vec::<&str>::new()).unwrap();
        let schema = configure_schema(&s, &c).unwrap();
        let absent = BTreeSet::from(["r".to_string()]);
        let ty = |q: &str| plain_type(&plain(q), &schema, &absent);
        assert_eq!(ty("prod r s").unwrap(), PlainType::Absent);
        assert_eq!(ty("proj [] r").unwrap(), PlainType::Absent);
        assert!(ty("proj [a] r").is_err());
        assert_eq!(ty("sel (b = 1) s").unwrap().names(), ["b"]);
        assert!(ty("union r s").is_err());
        assert!(ty("t").is_err());
    }

    #[test]
    fn standard_rules() {
        let s = parse_schema("features\nrelation r (a int, b text)\nrelation s (c int)\n").unwrap();
        let c = s.configuration(Vec::<&str>::new()).unwrap();
        let schema = configure_schema(&s, &c).unwrap();
        let none = BTreeSet::new();
        let ty = |q: &str| plain_type(&plain(q), &schema, &none);
        assert!(ty("prod r r").is_err());
        assert!(ty("sel (a = b) r").is_err());
        assert!(ty("sel (a = 'x') r").is_err());
        assert_eq!(ty("join (r.a = s.c) r s").unwrap().names(), ["a", "b", "c"]);
        assert!(ty("diff (proj [a] r) (proj [c] s)").is_err());
    }
}
