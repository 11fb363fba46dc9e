//! SQL text generation.
//!
//! [`sql_of_plain`] is a direct translation of one plain query: every
//! operator becomes a `SELECT`, and any operand that is not a base relation
//! becomes a derived table with a generated alias (`d0`, `d1`, ...).
//! [`sql_union`] renders a whole query group as one statement: each member
//! selects the unified attribute list, padding missing attributes with
//! `NULL` and adding its presence condition as a text column `presCond`.
//! Members are combined with `UNION ALL`, and derived tables used by more
//! than one member are hoisted into common table expressions.
//!
//! Statements target the stored layout of a VDB: one table per relation
//! holding every attribute of the variational schema.

mod grammar;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use grammar::{check_sql, SqlSyntaxError};

use crate::catalog::VSchema;
use crate::featexpr::{simplify, FeatureExpr};
use crate::storage::Value;
use crate::translate::QueryGroup;
use crate::vra::{AttrRef, CmpOp, PlainCond, PlainQuery, SetOpKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("cannot render an empty query group")]
    EmptyGroup,
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dialect {
    #[default]
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlStatement {
    pub text: String,
    pub dialect: Dialect,
    pub provenance: FeatureExpr,
}

impl fmt::Display for SqlStatement {
    /// The statement preceded by a `-- presCond:` comment and terminated by `;`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "-- presCond: {}", self.provenance)?;
        writeln!(f, "{};", self.text)
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn literal(v: &Value) -> String {
    match v {
        Value::Bool(true) => "TRUE".into(),
        Value::Bool(false) => "FALSE".into(),
        other => other.to_string(),
    }
}

fn op(o: CmpOp) -> &'static str {
    match o {
        CmpOp::Ne => "<>",
        other => other.symbol(),
    }
}

/// Renders with an alias counter shared by a whole statement, and the set of
/// derived tables already bound to CTE names.
struct Renderer<'a> {
    next_alias: usize,
    ctes: &'a BTreeMap<PlainQuery, String>,
}

impl Renderer<'_> {
    /// An attribute reference; the qualifier survives only when it names a
    /// base relation of the current `FROM` clause.
    fn attr(r: &AttrRef, visible: &[&str]) -> String {
        match &r.qualifier {
            Some(q) if visible.contains(&q.as_str()) => format!("{q}.{}", r.name),
            _ => r.name.clone(),
        }
    }

    fn cond(c: &PlainCond, visible: &[&str]) -> String {
        Self::cond_at(c, visible, 0)
    }

    fn cond_at(c: &PlainCond, visible: &[&str], required: u8) -> String {
        let (level, text) = match c {
            PlainCond::Lit(b) => (2, if *b { "TRUE" } else { "FALSE" }.to_string()),
            PlainCond::CmpConst(a, o, v) => (
                2,
                format!("{} {} {}", Self::attr(a, visible), op(*o), literal(v)),
            ),
            PlainCond::CmpAttr(a, o, b) => (
                2,
                format!(
                    "{} {} {}",
                    Self::attr(a, visible),
                    op(*o),
                    Self::attr(b, visible)
                ),
            ),
            PlainCond::Not(x) => (2, format!("NOT ({})", Self::cond_at(x, visible, 0))),
            PlainCond::And(x, y) => (
                1,
                format!(
                    "{} AND {}",
                    Self::cond_at(x, visible, 1),
                    Self::cond_at(y, visible, 2)
                ),
            ),
            PlainCond::Or(x, y) => (
                0,
                format!(
                    "{} OR {}",
                    Self::cond_at(x, visible, 0),
                    Self::cond_at(y, visible, 1)
                ),
            ),
        };
        if level < required {
            format!("({text})")
        } else {
            text
        }
    }

    /// A `FROM` item for `q` and, for a base relation, its name.
    fn source<'q>(&mut self, q: &'q PlainQuery) -> (String, Option<&'q str>) {
        match q {
            PlainQuery::Relation(r) => (r.clone(), Some(r.as_str())),
            _ => match self.ctes.get(q) {
                Some(name) => (name.clone(), None),
                None => {
                    let alias = format!("d{}", self.next_alias);
                    self.next_alias += 1;
                    (format!("({}) AS {alias}", self.query(q)), None)
                }
            },
        }
    }

    fn query(&mut self, q: &PlainQuery) -> String {
        match q {
            PlainQuery::Empty => "SELECT NULL AS empty WHERE FALSE".into(),
            PlainQuery::Relation(r) => format!("SELECT * FROM {r}"),
            PlainQuery::Select(c, sub) => {
                let (from, name) = self.source(sub);
                format!(
                    "SELECT * FROM {from} WHERE {}",
                    Self::cond(c, name.as_slice())
                )
            }
            PlainQuery::Project(list, sub) => {
                let (from, name) = self.source(sub);
                if list.is_empty() {
                    return format!("SELECT DISTINCT NULL AS empty FROM {from} WHERE FALSE");
                }
                let cols: Vec<String> = list
                    .iter()
                    .map(|a| Self::attr(a, name.as_slice()))
                    .collect();
                format!("SELECT DISTINCT {} FROM {from}", cols.join(", "))
            }
            PlainQuery::Product(x, y) => {
                let (fx, _) = self.source(x);
                let (fy, _) = self.source(y);
                format!("SELECT * FROM {fx} CROSS JOIN {fy}")
            }
            PlainQuery::Join(c, x, y) => {
                let (fx, nx) = self.source(x);
                let (fy, ny) = self.source(y);
                let visible: Vec<&str> = nx.into_iter().chain(ny).collect();
                format!(
                    "SELECT * FROM {fx} JOIN {fy} ON {}",
                    Self::cond(c, &visible)
                )
            }
            PlainQuery::SetOp(k, x, y) => {
                let left = self.query(x);
                let right = match **y {
                    PlainQuery::SetOp(..) => {
                        let (from, _) = self.source(y);
                        format!("SELECT * FROM {from}")
                    }
                    _ => self.query(y),
                };
                let kw = match k {
                    SetOpKind::Union => "UNION",
                    SetOpKind::Difference => "EXCEPT",
                };
                format!("{left} {kw} {right}")
            }
        }
    }
}

/// Translates one plain query into one statement with provenance `true`.
pub fn sql_of_plain(q: &PlainQuery) -> SqlStatement {
    sql_of_plain_under(q, FeatureExpr::TRUE)
}

/// Removes `empty` operands under the absorbing reading of `empty`, so that
/// set operations never combine a result with the column-less `empty` select.
pub fn prune_empty(q: &PlainQuery) -> PlainQuery {
    use PlainQuery::*;
    let boxed = |x: PlainQuery| Box::new(x);
    match q {
        Empty | Relation(_) => q.clone(),
        Select(c, sub) => match prune_empty(sub) {
            Empty => Empty,
            sub => Select(c.clone(), boxed(sub)),
        },
        Project(list, sub) => match prune_empty(sub) {
            Empty => Empty,
            sub => Project(list.clone(), boxed(sub)),
        },
        Product(x, y) => match (prune_empty(x), prune_empty(y)) {
            (Empty, _) | (_, Empty) => Empty,
            (x, y) => Product(boxed(x), boxed(y)),
        },
        Join(c, x, y) => match (prune_empty(x), prune_empty(y)) {
            (Empty, _) | (_, Empty) => Empty,
            (x, y) => Join(c.clone(), boxed(x), boxed(y)),
        },
        SetOp(k, x, y) => match (prune_empty(x), prune_empty(y)) {
            (x, Empty) => x,
            (Empty, y) if *k == SetOpKind::Union => y,
            (Empty, _) => Empty,
            (x, y) => SetOp(*k, boxed(x), boxed(y)),
        },
    }
}

pub fn sql_of_plain_under(q: &PlainQuery, provenance: FeatureExpr) -> SqlStatement {
    let ctes = BTreeMap::new();
    let mut r = Renderer {
        next_alias: 0,
        ctes: &ctes,
    };
    SqlStatement {
        text: r.query(&prune_empty(q)),
        dialect: Dialect::Generic,
        provenance,
    }
}

/// Output attribute names of `q` over the stored layout of `s`.
fn output_columns(q: &PlainQuery, s: &VSchema) -> Result<Vec<String>, SqlError> {
    Ok(match q {
        PlainQuery::Empty => Vec::new(),
        PlainQuery::Relation(r) => s
            .relation(r)
            .ok_or_else(|| SqlError::UnknownRelation(r.clone()))?
            .attr_names()
            .map(str::to_string)
            .collect(),
        PlainQuery::Select(_, sub) => output_columns(sub, s)?,
        PlainQuery::Project(list, _) => {
            let mut out: Vec<String> = Vec::new();
            for a in list {
                if !out.contains(&a.name) {
                    out.push(a.name.clone());
                }
            }
            out
        }
        PlainQuery::Product(x, y) | PlainQuery::Join(_, x, y) => {
            let mut out = output_columns(x, s)?;
            out.extend(output_columns(y, s)?);
            out
        }
        PlainQuery::SetOp(_, x, y) => {
            let left = output_columns(x, s)?;
            if left.is_empty() {
                output_columns(y, s)?
            } else {
                left
            }
        }
    })
}

/// The `FROM` source and select list of a union member.
fn member_shape(q: &PlainQuery, s: &VSchema) -> Result<(PlainQuery, Vec<String>), SqlError> {
    Ok(match q {
        PlainQuery::Project(_, sub) => ((**sub).clone(), output_columns(q, s)?),
        _ => (q.clone(), output_columns(q, s)?),
    })
}

/// Renders a query group as one statement over `unified`. Members without
/// output attributes carry no data and are left out; if none remain the
/// statement selects nothing. Provenance is the disjunction of all member
/// conditions.
pub fn sql_union(
    group: &QueryGroup,
    unified: &[String],
    s: &VSchema,
) -> Result<SqlStatement, SqlError> {
    if group.entries.is_empty() {
        return Err(SqlError::EmptyGroup);
    }
    let provenance = simplify(&FeatureExpr::disj_all(
        group.entries.iter().map(|(_, e)| e.clone()),
    ));
    let mut members = Vec::new();
    for (q, e) in &group.entries {
        let (source, cols) = member_shape(&prune_empty(q), s)?;
        if !cols.is_empty() {
            members.push((source, cols, e));
        }
    }
    let mut uses: BTreeMap<&PlainQuery, usize> = BTreeMap::new();
    for (source, _, _) in &members {
        if !matches!(source, PlainQuery::Relation(_)) {
            *uses.entry(source).or_default() += 1;
        }
    }
    let mut ctes: BTreeMap<PlainQuery, String> = BTreeMap::new();
    let mut cte_defs = Vec::new();
    let mut next_alias = 0;
    for (source, _, _) in &members {
        if uses.get(source).copied().unwrap_or(0) >= 2 && !ctes.contains_key(source) {
            let name = format!("c{}", ctes.len());
            let empty = BTreeMap::new();
            let mut r = Renderer {
                next_alias,
                ctes: &empty,
            };
            cte_defs.push(format!("{name} AS ({})", r.query(source)));
            next_alias = r.next_alias;
            ctes.insert(source.clone(), name);
        }
    }
    let mut r = Renderer {
        next_alias,
        ctes: &ctes,
    };
    let mut branches = Vec::new();
    for (source, cols, e) in &members {
        let mut items: Vec<String> = unified
            .iter()
            .map(|u| {
                if cols.contains(u) {
                    u.clone()
                } else {
                    format!("NULL AS {u}")
                }
            })
            .collect();
        items.push(format!("{} AS presCond", quote(&e.to_string())));
        let body = match source {
            PlainQuery::Select(c, sub)
                if matches!(**sub, PlainQuery::Relation(_)) && !ctes.contains_key(source) =>
            {
                let (from, name) = r.source(sub);
                format!("FROM {from} WHERE {}", Renderer::cond(c, name.as_slice()))
            }
            _ => format!("FROM {}", r.source(source).0),
        };
        branches.push(format!("SELECT DISTINCT {} {body}", items.join(", ")));
    }
    let mut text = String::new();
    if !cte_defs.is_empty() {
        text.push_str(&format!("WITH {}\n", cte_defs.join(",\n")));
    }
    if branches.is_empty() {
        let mut items: Vec<String> = unified.iter().map(|u| format!("NULL AS {u}")).collect();
        items.push("NULL AS presCond".into());
        text.push_str(&format!("SELECT {} WHERE FALSE", items.join(", ")));
    } else {
        text.push_str(&branches.join("\nUNION ALL\n"));
    }
    Ok(SqlStatement {
        text,
        dialect: Dialect::Generic,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_schema;
    use crate::featexpr::parse_fexp;
    use crate::translate::group_query;
    use crate::vra::parse_query;

    fn plain(text: &str) -> PlainQuery {
        PlainQuery::from_vquery(&parse_query(text).unwrap()).unwrap()
    }

    fn sql(text: &str) -> String {
        sql_of_plain(&plain(text)).text
    }

    #[test]
    fn direct_translation() {
        assert_eq!(sql("r"), "SELECT * FROM r");
        assert_eq!(
            sql("proj [a1] sel (a1 = a2) r"),
            "SELECT DISTINCT a1 FROM (SELECT * FROM r WHERE a1 = a2) AS d0"
        );
        assert_eq!(sql("diff r s"), "SELECT * FROM r EXCEPT SELECT * FROM s");
        assert_eq!(
            sql("join (r.a != s.b) r (sel (!(c = 'x')) s)"),
            "SELECT * FROM r JOIN (SELECT * FROM s WHERE NOT (c = 'x')) AS d0 ON r.a <> b"
        );
        assert_eq!(
            sql("union r (union s t)"),
            "SELECT * FROM r UNION SELECT * FROM (SELECT * FROM s UNION SELECT * FROM t) AS d0"
        );
        assert_eq!(sql("empty"), "SELECT NULL AS empty WHERE FALSE");
        assert_eq!(
            sql("union (prod r empty) (diff s empty)"),
            "SELECT * FROM s"
        );
        for q in [
            "r",
            "proj [a1] sel (a1 = a2 | a1 < 3 & a2 >= 1) r",
            "prod r s",
            "union r (diff s t)",
            "empty",
        ] {
            check_sql(&sql(q)).unwrap();
        }
    }

    #[test]
    fn statement_display_carries_provenance() {
        let st = sql_of_plain_under(&plain("r"), parse_fexp("A & !B").unwrap());
        assert_eq!(st.to_string(), "-- presCond: A & !B\nSELECT * FROM r;\n");
        check_sql(&st.to_string()).unwrap();
    }

    #[test]
    fn singleton_group_has_no_union() {
        let s = parse_schema("features A\nrelation r (a int, b int # A)\n").unwrap();
        let g = QueryGroup {
            entries: vec![(plain("proj [a] r"), FeatureExpr::TRUE)],
        };
        let st = sql_union(&g, &["a".into(), "b".into()], &s).unwrap();
        assert_eq!(
            st.text,
            "SELECT DISTINCT a, NULL AS b, 'true' AS presCond FROM r"
        );
        assert_eq!(check_sql(&st.text).unwrap(), [Some(3)]);
        assert_eq!(
            sql_union(&QueryGroup::default(), &[], &s),
            Err(SqlError::EmptyGroup)
        );
    }

    #[test]
    fn shared_derived_sources_become_ctes() {
        let s = parse_schema("features A\nrelation r (a int, b int # A)\nrelation s (c int)\n")
            .unwrap();
        let q = parse_query("choice A { proj [a, b] prod r s } { proj [a] prod r s }").unwrap();
        let g = group_query(&q).unwrap();
        let st = sql_union(&g, &["a".into(), "b".into()], &s).unwrap();
        assert_eq!(
            st.text,
            "WITH c0 AS (SELECT * FROM r CROSS JOIN s)\n\
             SELECT DISTINCT a, b, 'A' AS presCond FROM c0\n\
             UNION ALL\n\
             SELECT DISTINCT a, NULL AS b, '!A' AS presCond FROM c0"
        );
        assert_eq!(check_sql(&st.text).unwrap(), [Some(3), Some(3)]);
        assert_eq!(st.provenance, FeatureExpr::TRUE);
    }

    #[test]
    fn members_without_attributes_are_left_out() {
        let s = parse_schema("features A\nrelation r (a int # A) # A\n").unwrap();
        let q = parse_query("proj [a # A] r").unwrap();
        let st = sql_union(&group_query(&q).unwrap(), &["a".into()], &s).unwrap();
        assert_eq!(st.text, "SELECT DISTINCT a, 'A' AS presCond FROM r");
        let none = QueryGroup {
            entries: vec![(PlainQuery::Empty, FeatureExpr::TRUE)],
        };
        let st = sql_union(&none, &["a".into()], &s).unwrap();
        assert_eq!(st.text, "SELECT NULL AS a, NULL AS presCond WHERE FALSE");
        assert_eq!(check_sql(&st.text).unwrap(), [Some(2)]);
    }
}
