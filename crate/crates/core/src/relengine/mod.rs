//! Execution: a set-semantics evaluator for plain queries, and the two
//! strategies that run a variational query over a VDB instance.
//!
//! The configure strategy evaluates one plain query per valid configuration.
//! The group strategy evaluates each distinct plain query once per schema
//! variant, over rows annotated with presence conditions, so that a single
//! evaluation covers every configuration of its group. Both feed the v-table
//! builder, which merges identical rows by disjoining their conditions.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::catalog::{
    configure_relation, AttrType, CatalogError, PlainAttr, PlainSchema, VAttr, VRelSchema, VSchema,
};
use crate::featexpr::{
    self, canonical, simplify, Configuration, FeatureExpr, FeatureName, FexpError,
};
use crate::storage::{
    build_vtable, configure_vdb, PlainDatabase, PlainTable, StorageError, VTable, VTuple, Value,
};
use crate::translate::{configure_query, group_query};
use crate::typecheck::{check_query, simplified_type, QueryType, TypeError, TypeOptions};
use crate::vra::{AttrRef, PlainCond, PlainQuery, SetOpKind, VQuery};

/// Largest universe the strategies will enumerate.
pub const ENGINE_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Fexp(#[from] FexpError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("plain query is ill-typed: {0}")]
    PlainType(String),
}

fn ill_typed<T>(msg: impl Into<String>) -> Result<T, EngineError> {
    Err(EngineError::PlainType(msg.into()))
}

/// Row annotations the evaluator is generic over: `bool` for plain
/// evaluation, feature expressions for annotated evaluation.
trait Annot: Clone + Send + Sync {
    fn and(&self, other: &Self) -> Self;
    fn or(&self, other: &Self) -> Self;
    fn and_not(&self, other: &Self) -> Self;
    fn is_zero(&self) -> bool;
}

impl Annot for bool {
    fn and(&self, other: &Self) -> Self {
        *self && *other
    }
    fn or(&self, other: &Self) -> Self {
        *self || *other
    }
    fn and_not(&self, other: &Self) -> Self {
        *self && !*other
    }
    fn is_zero(&self) -> bool {
        !*self
    }
}

impl Annot for FeatureExpr {
    fn and(&self, other: &Self) -> Self {
        FeatureExpr::conj(self.clone(), other.clone())
    }
    fn or(&self, other: &Self) -> Self {
        simplify(&FeatureExpr::disj(self.clone(), other.clone()))
    }
    fn and_not(&self, other: &Self) -> Self {
        simplify(&FeatureExpr::conj(
            self.clone(),
            FeatureExpr::neg(other.clone()),
        ))
    }
    fn is_zero(&self) -> bool {
        !featexpr::sat(self)
    }
}

#[derive(Debug, Clone)]
struct Col {
    name: String,
    atype: AttrType,
    origins: BTreeSet<String>,
}

/// An intermediate result. `None` in place of a `Rel` means the relation
/// does not exist in the variant being evaluated.
#[derive(Debug, Clone)]
struct Rel<A> {
    cols: Vec<Col>,
    rows: BTreeMap<Vec<Value>, A>,
}

impl<A: Annot> Rel<A> {
    fn insert(&mut self, row: Vec<Value>, a: A) {
        if a.is_zero() {
            return;
        }
        match self.rows.get_mut(&row) {
            Some(old) => *old = old.or(&a),
            None => {
                self.rows.insert(row, a);
            }
        }
    }

    fn position(&self, r: &AttrRef) -> Result<usize, EngineError> {
        self.cols
            .iter()
            .position(|c| {
                c.name == r.name && r.qualifier.as_ref().is_none_or(|q| c.origins.contains(q))
            })
            .map_or_else(|| ill_typed(format!("no attribute `{r}`")), Ok)
    }
}

fn cmp_values(x: &Value, y: &Value, op: crate::vra::CmpOp) -> bool {
    if x.is_null() || y.is_null() || x.atype() != y.atype() {
        return false;
    }
    op.holds(x.cmp(y))
}

/// Evaluates `c` on one row. A comparison involving `NULL` is false.
fn eval_cond<A: Annot>(c: &PlainCond, rel: &Rel<A>, row: &[Value]) -> Result<bool, EngineError> {
    Ok(match c {
        PlainCond::Lit(b) => *b,
        PlainCond::CmpConst(a, op, v) => cmp_values(&row[rel.position(a)?], v, *op),
        PlainCond::CmpAttr(a, op, b) => {
            cmp_values(&row[rel.position(a)?], &row[rel.position(b)?], *op)
        }
        PlainCond::Not(x) => !eval_cond(x, rel, row)?,
        PlainCond::And(x, y) => eval_cond(x, rel, row)? && eval_cond(y, rel, row)?,
        PlainCond::Or(x, y) => eval_cond(x, rel, row)? || eval_cond(y, rel, row)?,
    })
}

fn select<A: Annot>(c: &PlainCond, rel: Rel<A>) -> Result<Rel<A>, EngineError> {
    let mut out = Rel {
        cols: rel.cols.clone(),
        rows: BTreeMap::new(),
    };
    for (row, a) in &rel.rows {
        if eval_cond(c, &rel, row)? {
            out.rows.insert(row.clone(), a.clone());
        }
    }
    Ok(out)
}

fn product<A: Annot>(x: Rel<A>, y: Rel<A>) -> Result<Rel<A>, EngineError> {
    if let Some(c) = x
        .cols
        .iter()
        .find(|c| y.cols.iter().any(|d| d.name == c.name))
    {
        return ill_typed(format!("attribute `{}` on both sides of a product", c.name));
    }
    let mut cols = x.cols.clone();
    cols.extend(y.cols.iter().cloned());
    let mut out = Rel {
        cols,
        rows: BTreeMap::new(),
    };
    for (rx, ax) in &x.rows {
        for (ry, ay) in &y.rows {
            let mut row = rx.clone();
            row.extend(ry.iter().cloned());
            out.insert(row, ax.and(ay));
        }
    }
    Ok(out)
}

/// `y`'s rows reordered to `x`'s column order.
fn aligned<A: Annot>(x: &Rel<A>, y: Rel<A>) -> Result<Rel<A>, EngineError> {
    let names = |r: &Rel<A>| {
        r.cols
            .iter()
            .map(|c| c.name.clone())
            .collect::<BTreeSet<_>>()
    };
    if names(x) != names(&y) || x.cols.len() != y.cols.len() {
        return ill_typed("set operation over different attributes");
    }
    let perm: Vec<usize> = x
        .cols
        .iter()
        .map(|c| {
            y.cols
                .iter()
                .position(|d| d.name == c.name)
                .expect("same names")
        })
        .collect();
    let rows = y
        .rows
        .into_iter()
        .map(|(row, a)| (perm.iter().map(|&i| row[i].clone()).collect(), a))
        .collect();
    Ok(Rel {
        cols: x.cols.clone(),
        rows,
    })
}

type Lookup<'a, A> = &'a dyn Fn(&str) -> Result<Option<Rel<A>>, EngineError>;

fn eval<A: Annot>(q: &PlainQuery, base: Lookup<'_, A>) -> Result<Option<Rel<A>>, EngineError> {
    Ok(match q {
        PlainQuery::Empty => None,
        PlainQuery::Relation(r) => base(r)?,
        PlainQuery::Select(c, sub) => match eval(sub, base)? {
            Some(rel) => Some(select(c, rel)?),
            None => None,
        },
        PlainQuery::Project(list, sub) => match eval(sub, base)? {
            None if list.is_empty() => None,
            None => {
                return ill_typed(format!(
                    "projection of `{}` from an absent relation",
                    list[0]
                ))
            }
            Some(rel) => {
                let mut idx: Vec<usize> = Vec::new();
                for r in list {
                    let i = rel.position(r)?;
                    if !idx.contains(&i) {
                        idx.push(i);
                    }
                }
                let mut out = Rel {
                    cols: idx.iter().map(|&i| rel.cols[i].clone()).collect(),
                    rows: BTreeMap::new(),
                };
                for (row, a) in rel.rows {
                    out.insert(idx.iter().map(|&i| row[i].clone()).collect(), a);
                }
                Some(out)
            }
        },
        PlainQuery::Product(x, y) => match (eval(x, base)?, eval(y, base)?) {
            (Some(x), Some(y)) => Some(product(x, y)?),
            _ => None,
        },
        PlainQuery::Join(c, x, y) => match (eval(x, base)?, eval(y, base)?) {
            (Some(x), Some(y)) => Some(select(c, product(x, y)?)?),
            _ => None,
        },
        PlainQuery::SetOp(k, x, y) => match (eval(x, base)?, eval(y, base)?) {
            (None, None) => None,
            (Some(x), None) => Some(x),
            (None, Some(y)) => match k {
                SetOpKind::Union => Some(y),
                SetOpKind::Difference => None,
            },
            (Some(mut x), Some(y)) => {
                let y = aligned(&x, y)?;
                match k {
                    SetOpKind::Union => {
                        for (row, a) in y.rows {
                            x.insert(row, a);
                        }
                    }
                    SetOpKind::Difference => {
                        let rows = std::mem::take(&mut x.rows);
                        for (row, a) in rows {
                            let kept = match y.rows.get(&row) {
                                Some(b) => a.and_not(b),
                                None => a,
                            };
                            x.insert(row, kept);
                        }
                    }
                }
                Some(x)
            }
        },
    })
}

fn to_plain_table(rel: Option<Rel<bool>>) -> PlainTable {
    match rel {
        None => PlainTable::new(Vec::new()),
        Some(rel) => PlainTable {
            columns: plain_columns(&rel.cols),
            rows: rel.rows.into_keys().collect(),
        },
    }
}

fn plain_columns(cols: &[Col]) -> Vec<PlainAttr> {
    cols.iter()
        .map(|c| PlainAttr {
            name: c.name.clone(),
            atype: c.atype,
        })
        .collect()
}

/// Evaluates `q` over `db` with set semantics. A query over relations the
/// configuration removed yields a table with no columns and no rows.
pub fn eval_plain(q: &PlainQuery, db: &PlainDatabase) -> Result<PlainTable, EngineError> {
    let base = |r: &str| -> Result<Option<Rel<bool>>, EngineError> {
        match db.tables.get(r) {
            Some(t) => Ok(Some(Rel {
                cols: t
                    .columns
                    .iter()
                    .map(|c| Col {
                        name: c.name.clone(),
                        atype: c.atype,
                        origins: BTreeSet::from([r.to_string()]),
                    })
                    .collect(),
                rows: t.rows.iter().map(|row| (row.clone(), true)).collect(),
            })),
            None if db.absent.contains(r) => Ok(None),
            None => ill_typed(format!("unknown relation `{r}`")),
        }
    };
    Ok(to_plain_table(eval(q, &base)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Configure,
    Group,
}

/// One evaluation: a plain query, the condition under which it is the
/// configured query, and the valid configurations it covers. Under the group
/// strategy every configuration of a unit has the same plain schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub query: PlainQuery,
    pub pc: FeatureExpr,
    pub configs: Vec<Configuration>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionPlan {
    pub strategy: Strategy,
    pub units: Vec<Unit>,
}

/// The result of one unit: rows annotated with the configurations where they
/// appear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub query: PlainQuery,
    pub pc: FeatureExpr,
    pub columns: Vec<PlainAttr>,
    pub rows: Vec<(Vec<Value>, FeatureExpr)>,
}

/// Valid configurations bucketed by the plain schema they produce, each
/// with the disjunction of its configurations.
fn schema_classes(s: &VSchema) -> Result<Vec<(FeatureExpr, Vec<Configuration>)>, EngineError> {
    let mut classes: BTreeMap<PlainSchema, Vec<Configuration>> = BTreeMap::new();
    for c in s.valid_configurations(ENGINE_LIMIT)? {
        let ps = crate::catalog::configure_schema(s, &c)?;
        classes.entry(ps).or_default().push(c);
    }
    Ok(classes
        .into_values()
        .map(|cs| {
            (
                simplify(&FeatureExpr::disj_all(
                    cs.iter().map(Configuration::minterm),
                )),
                cs,
            )
        })
        .collect())
}

pub fn plan(q: &VQuery, s: &VSchema, strategy: Strategy) -> Result<ExecutionPlan, EngineError> {
    let mut units = Vec::new();
    match strategy {
        Strategy::Configure => {
            for c in s.valid_configurations(ENGINE_LIMIT)? {
                units.push(Unit {
                    query: configure_query(q, &c)?,
                    pc: c.minterm(),
                    configs: vec![c],
                });
            }
        }
        Strategy::Group => {
            let classes = schema_classes(s)?;
            for (query, e) in group_query(q)?.entries {
                for (class_pc, configs) in &classes {
                    let mut covered = Vec::new();
                    for c in configs {
                        if e.eval(c)? {
                            covered.push(c.clone());
                        }
                    }
                    if covered.is_empty() {
                        continue;
                    }
                    units.push(Unit {
                        query: query.clone(),
                        pc: simplify(&FeatureExpr::and(e.clone(), class_pc.clone())),
                        configs: covered,
                    });
                }
            }
        }
    }
    Ok(ExecutionPlan { strategy, units })
}

fn run_unit(
    unit: &Unit,
    strategy: Strategy,
    db: &crate::storage::VdbInstance,
) -> Result<Part, EngineError> {
    let rep = &unit.configs[0];
    let (columns, rows) = match strategy {
        Strategy::Configure => {
            let t = eval_plain(&unit.query, &configure_vdb(db, rep)?)?;
            let rows = t.rows.into_iter().map(|r| (r, unit.pc.clone())).collect();
            (t.columns, rows)
        }
        Strategy::Group => {
            let m = db.schema.feature_model();
            let base = |r: &str| -> Result<Option<Rel<FeatureExpr>>, EngineError> {
                let Some(table) = db.table(r) else {
                    return ill_typed(format!("unknown relation `{r}`"));
                };
                if !m.eval(rep)? || configure_relation(&table.schema, rep)?.is_none() {
                    return Ok(None);
                }
                let mut present = Vec::new();
                let mut cols = Vec::new();
                for (i, a) in table.schema.attrs.iter().enumerate() {
                    if a.pc.eval(rep)? {
                        present.push(i);
                        cols.push(Col {
                            name: a.value.name.clone(),
                            atype: a.value.atype,
                            origins: BTreeSet::from([r.to_string()]),
                        });
                    }
                }
                let mut rel = Rel {
                    cols,
                    rows: BTreeMap::new(),
                };
                for row in &table.rows {
                    let pc = FeatureExpr::conj(row.pc.clone(), unit.pc.clone());
                    let values = present.iter().map(|&i| row.values[i].clone()).collect();
                    rel.insert(values, pc);
                }
                Ok(Some(rel))
            };
            match eval(&unit.query, &base)? {
                None => (Vec::new(), Vec::new()),
                Some(rel) => {
                    let columns = plain_columns(&rel.cols);
                    let rows = rel
                        .rows
                        .into_iter()
                        .map(|(r, pc)| (r, simplify(&pc)))
                        .filter(|(_, pc)| !pc.is_false())
                        .collect();
                    (columns, rows)
                }
            }
        }
    };
    Ok(Part {
        query: unit.query.clone(),
        pc: unit.pc.clone(),
        columns,
        rows,
    })
}

/// Runs every unit of `plan`, in parallel, returning parts in plan order.
pub fn execute(
    plan: &ExecutionPlan,
    db: &crate::storage::VdbInstance,
) -> Result<Vec<Part>, EngineError> {
    plan.units
        .par_iter()
        .map(|u| run_unit(u, plan.strategy, db))
        .collect()
}

/// The v-table schema of a query result: the query type with simplified
/// conditions.
pub fn result_schema(t: &QueryType, name: &str) -> VRelSchema {
    let t = simplified_type(t);
    let mut out = VRelSchema::new(name, t.annotation().clone());
    for e in t.iter() {
        out.add_attr(VAttr::new(&e.value.name, e.value.atype), e.pc.clone())
            .expect("type attributes are distinct and satisfiable");
    }
    out
}

/// Merges parts into one v-table over `schema`. A part without columns
/// has no cells to contribute, so its (at most one, empty) row is dropped.
pub fn merge_parts(parts: &[Part], schema: VRelSchema) -> Result<VTable, EngineError> {
    let mut tables: BTreeMap<(usize, FeatureExpr), PlainTable> = BTreeMap::new();
    for (i, p) in parts
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.columns.is_empty())
    {
        for (row, pc) in &p.rows {
            tables
                .entry((i, pc.clone()))
                .or_insert_with(|| PlainTable::new(p.columns.clone()))
                .rows
                .insert(row.clone());
        }
    }
    let parts = tables.into_iter().map(|((_, pc), t)| (t, pc));
    Ok(build_vtable(parts, schema)?)
}

/// Rewrites every row condition into the normal form of [`canonical`] over
/// the schema's features under its feature model, dropping rows that no
/// valid configuration keeps. Tables with equal configured slices then
/// print identically.
pub fn canonicalize(t: &VTable, s: &VSchema) -> VTable {
    let universe: BTreeSet<FeatureName> = s.features().iter().cloned().collect();
    let m = s.feature_model();
    let mut out = VTable::new(t.schema.clone());
    for row in &t.rows {
        let pc = canonical(&row.pc, m, &universe);
        if !pc.is_false() {
            out.rows.push(VTuple {
                values: row.values.clone(),
                pc,
            });
        }
    }
    out
}

/// Type-checks `q` against the instance schema, runs it with `strategy`
/// and merges the result into one canonical v-table named `result`.
pub fn run(
    q: &VQuery,
    db: &crate::storage::VdbInstance,
    strategy: Strategy,
) -> Result<VTable, EngineError> {
    let t = check_query(q, &db.schema, TypeOptions::default())?;
    let p = plan(q, &db.schema, strategy)?;
    let parts = execute(&p, db)?;
    Ok(canonicalize(
        &merge_parts(&parts, result_schema(&t, "result"))?,
        &db.schema,
    ))
}

pub fn run_configure(q: &VQuery, db: &crate::storage::VdbInstance) -> Result<VTable, EngineError> {
    run(q, db, Strategy::Configure)
}

pub fn run_group(q: &VQuery, db: &crate::storage::VdbInstance) -> Result<VTable, EngineError> {
    run(q, db, Strategy::Group)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_schema;
    use crate::featexpr::{equiv, parse_fexp};
    use crate::storage::{configure_table, VdbInstance};
    use crate::vra::parse_query;

    fn plain(text: &str) -> PlainQuery {
        PlainQuery::from_vquery(&parse_query(text).unwrap()).unwrap()
    }

    fn int_db(rows: &[&[i64]]) -> PlainDatabase {
        let s =
            parse_schema("features\nrelation r (a1 int, a2 int)\nrelation s (a1 int, a2 int)\n")
                .unwrap();
        let mut db = VdbInstance::empty(s);
        for row in rows {
            db.insert(
                "r",
                row.iter().map(|v| Value::Int(*v)).collect(),
                FeatureExpr::TRUE,
            )
            .unwrap();
        }
        let c = db.schema.configuration(Vec::<&str>::new()).unwrap();
        configure_vdb(&db, &c).unwrap()
    }

    fn ints(t: &PlainTable) -> Vec<Vec<i64>> {
        t.rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| if let Value::Int(i) = v { *i } else { -1 })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn projection_deduplicates() {
        let db = int_db(&[&[1, 2], &[1, 3]]);
        let t = eval_plain(&plain("proj [a1] r"), &db).unwrap();
        assert_eq!(ints(&t), [[1]]);
    }

    #[test]
    fn selection_filters() {
        let db = int_db(&[&[1, 1], &[1, 2]]);
        assert_eq!(
            ints(&eval_plain(&plain("sel (a1 = a2) r"), &db).unwrap()),
            [[1, 1]]
        );
    }

    #[test]
    fn difference_of_equal_tables_is_empty() {
        let db = int_db(&[&[1, 1], &[1, 2]]);
        assert!(eval_plain(&plain("diff r r"), &db).unwrap().rows.is_empty());
        assert_eq!(eval_plain(&plain("union r s"), &db).unwrap().rows.len(), 2);
    }

    fn one_tuple_db() -> VdbInstance {
        let s = parse_schema("features e, e1\nrelation r (a1 int, a2 int)\n").unwrap();
        let mut db = VdbInstance::empty(s);
        db.insert(
            "r",
            vec![Value::Int(1), Value::Int(2)],
            parse_fexp("e1").unwrap(),
        )
        .unwrap();
        db
    }

    #[test]
    fn tuple_condition_meets_query_condition() {
        let db = one_tuple_db();
        let q = parse_query("proj [a1 # e] r").unwrap();
        for t in [run_configure(&q, &db).unwrap(), run_group(&q, &db).unwrap()] {
            assert_eq!(t.rows.len(), 1);
            assert_eq!(t.rows[0].values, [Value::Int(1)]);
            assert!(
                equiv(&t.rows[0].pc, &parse_fexp("e1 & e").unwrap()),
                "{}",
                t.rows[0].pc
            );
        }
    }

    #[test]
    fn strategies_agree_per_configuration() {
        let s =
            parse_schema("features f1, f2\nrelation r (a1 int # f1, a2 int, a3 int) # f1 | f2\n")
                .unwrap();
        let mut db = VdbInstance::empty(s);
        db.insert(
            "r",
            vec![Value::Int(1), Value::Int(2), Value::Int(3)],
            parse_fexp("f1").unwrap(),
        )
        .unwrap();
        db.insert(
            "r",
            vec![Value::Null, Value::Int(5), Value::Int(6)],
            FeatureExpr::TRUE,
        )
        .unwrap();
        db.insert(
            "r",
            vec![Value::Int(7), Value::Int(5), Value::Int(9)],
            parse_fexp("f2").unwrap(),
        )
        .unwrap();
        let q = parse_query("proj [a1 # f1, a2 # f1 & f2, a3 # f2] r").unwrap();
        let a = run_configure(&q, &db).unwrap();
        let b = run_group(&q, &db).unwrap();
        let m = db.schema.feature_model().clone();
        for c in db.schema.valid_configurations(4).unwrap() {
            let direct = eval_plain(
                &configure_query(&q, &c).unwrap(),
                &configure_vdb(&db, &c).unwrap(),
            )
            .unwrap();
            let ta = configure_table(&a, &m, &c)
                .unwrap()
                .map(|t| t.rows)
                .unwrap_or_default();
            let tb = configure_table(&b, &m, &c)
                .unwrap()
                .map(|t| t.rows)
                .unwrap_or_default();
            assert_eq!(ta, tb, "{c}");
            assert_eq!(
                crate::storage::print_vtable(&a),
                crate::storage::print_vtable(&b)
            );
            let expected = if direct.columns.is_empty() {
                Default::default()
            } else {
                direct.rows
            };
            assert_eq!(ta, expected, "{c}");
        }
    }

    #[test]
    fn empty_database_gives_empty_result() {
        let s = parse_schema("features A\nrelation r (a int # A)\n").unwrap();
        let db = VdbInstance::empty(s);
        let q = parse_query("r").unwrap();
        assert!(run_configure(&q, &db).unwrap().rows.is_empty());
        assert!(run_group(&q, &db).unwrap().rows.is_empty());
    }

    #[test]
    fn plain_instances_annotate_rows_true() {
        let s = parse_schema("features A, B\nrelation r (a int)\n").unwrap();
        let mut db = VdbInstance::empty(s);
        db.insert("r", vec![Value::Int(4)], FeatureExpr::TRUE)
            .unwrap();
        let t = run_configure(&parse_query("r").unwrap(), &db).unwrap();
        assert_eq!(t.rows[0].pc, FeatureExpr::TRUE);
    }
}
