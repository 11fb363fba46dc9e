//! Variational content: v-tuples, v-tables and VDB instances, their
//! configuration to plain tables, and the v-table builder that merges
//! per-variant results into one v-table.

mod csv;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use indexmap::IndexMap;
use thiserror::Error;

use crate::catalog::{
    configure_relation, AttrType, CatalogError, PlainAttr, PlainRelSchema, PlainSchema, VRelSchema,
    VSchema,
};
use crate::featexpr::{self, simplify, Configuration, FeatureExpr, FexpError};
use crate::lexer::SyntaxError;

pub use self::csv::{load_vdb, read_table_csv, save_vdb, write_table_csv, SCHEMA_FILE};
pub use self::text::{parse_vtable, print_vtable};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Fexp(#[from] FexpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{table}, line {line}: expected {expected} fields, found {found}")]
    ArityMismatch {
        table: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{table}, line {line}: {message}")]
    Csv {
        table: String,
        line: usize,
        message: String,
    },
    #[error("invalid cell {table}.{attr} in row {row}: {reason}")]
    InvalidCell {
        table: String,
        attr: String,
        row: usize,
        reason: String,
    },
    #[error("row {row} of {table} can never be present: {pc}")]
    UnsatisfiableRow {
        table: String,
        row: usize,
        pc: FeatureExpr,
    },
    #[error("column `{column}` is not an attribute of `{table}`")]
    ColumnMismatch { table: String, column: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

impl Value {
    pub fn atype(&self) -> Option<AttrType> {
        match self {
            Value::Int(_) => Some(AttrType::Int),
            Value::Text(_) => Some(AttrType::Text),
            Value::Bool(_) => Some(AttrType::Bool),
            Value::Null => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => f.write_str("NULL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VTuple {
    pub values: Vec<Value>,
    pub pc: FeatureExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VTable {
    pub schema: VRelSchema,
    pub rows: Vec<VTuple>,
}

impl VTable {
    pub fn new(schema: VRelSchema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.schema.attrs.len()
    }
}

/// A variation-free table with set semantics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainTable {
    pub columns: Vec<PlainAttr>,
    pub rows: BTreeSet<Vec<Value>>,
}

impl PlainTable {
    pub fn new(columns: Vec<PlainAttr>) -> Self {
        Self {
            columns,
            rows: BTreeSet::new(),
        }
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// A configured database. Relations of the schema that vanished under the
/// configuration are listed in `absent`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlainDatabase {
    pub schema: PlainSchema,
    pub tables: BTreeMap<String, PlainTable>,
    pub absent: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VdbInstance {
    pub schema: VSchema,
    pub tables: IndexMap<String, VTable>,
}

impl VdbInstance {
    /// An instance with one empty table per relation.
    pub fn empty(schema: VSchema) -> Self {
        let tables = schema
            .relations()
            .map(|r| (r.name.clone(), VTable::new(r.clone())))
            .collect();
        Self { schema, tables }
    }

    pub fn table(&self, name: &str) -> Option<&VTable> {
        self.tables.get(name)
    }

    /// Appends a row to `rel` after checking arity, cell types and cell
    /// validity.
    pub fn insert(
        &mut self,
        rel: &str,
        values: Vec<Value>,
        pc: FeatureExpr,
    ) -> Result<(), StorageError> {
        let row = self.tables.get(rel).map_or(0, |t| t.rows.len()) + 1;
        let tuple = VTuple { values, pc };
        validate_row(&self.schema, rel, &tuple, row)?;
        self.tables
            .get_mut(rel)
            .ok_or_else(|| CatalogError::UnknownRelation(rel.to_string()))?
            .rows
            .push(tuple);
        Ok(())
    }
}

fn validate_row(s: &VSchema, rel: &str, row: &VTuple, index: usize) -> Result<(), StorageError> {
    let schema = s.get_relation(rel)?;
    let expected = schema.attrs.len();
    if row.values.len() != expected {
        return Err(StorageError::ArityMismatch {
            table: rel.to_string(),
            line: index,
            expected,
            found: row.values.len(),
        });
    }
    let row_ctx = FeatureExpr::and(
        row.pc.clone(),
        FeatureExpr::and(schema.pc.clone(), s.feature_model().clone()),
    );
    if !featexpr::sat(&row_ctx) {
        return Err(StorageError::UnsatisfiableRow {
            table: rel.to_string(),
            row: index,
            pc: row.pc.clone(),
        });
    }
    for (attr, value) in schema.attrs.iter().zip(&row.values) {
        if value.is_null() {
            continue;
        }
        let invalid = |reason: String| StorageError::InvalidCell {
            table: rel.to_string(),
            attr: attr.value.name.clone(),
            row: index,
            reason,
        };
        if value.atype() != Some(attr.value.atype) {
            return Err(invalid(format!(
                "value {value} is not of type {}",
                attr.value.atype
            )));
        }
        if !featexpr::sat(&FeatureExpr::and(attr.pc.clone(), row_ctx.clone())) {
            return Err(invalid(format!(
                "attribute presence {} contradicts row presence {}",
                attr.pc, row.pc
            )));
        }
    }
    Ok(())
}

/// `sat(pc_attr ∧ pc_row ∧ pc_rel ∧ m)`.
pub fn cell_valid(
    db: &VdbInstance,
    rel: &str,
    attr: &str,
    row: &VTuple,
) -> Result<bool, CatalogError> {
    let presence = crate::catalog::attr_presence(&db.schema, rel, attr)?;
    Ok(featexpr::sat(&FeatureExpr::and(presence, row.pc.clone())))
}

/// Configures one tuple: `None` when the row is absent, otherwise the cells
/// of the attributes present under `c`, in schema order.
pub fn configure_tuple(
    u: &VTuple,
    rel: &VRelSchema,
    c: &Configuration,
) -> Result<Option<Vec<Value>>, FexpError> {
    if !u.pc.eval(c)? {
        return Ok(None);
    }
    let mut out = Vec::new();
    for (attr, value) in rel.attrs.iter().zip(&u.values) {
        if attr.pc.eval(c)? {
            out.push(value.clone());
        }
    }
    Ok(Some(out))
}

/// Configures a v-table; `None` when the relation vanishes under `c`.
pub fn configure_table(
    t: &VTable,
    m: &FeatureExpr,
    c: &Configuration,
) -> Result<Option<PlainTable>, FexpError> {
    if !m.eval(c)? {
        return Ok(None);
    }
    let Some(schema) = configure_relation(&t.schema, c)? else {
        return Ok(None);
    };
    let mut out = PlainTable::new(schema.attrs);
    for row in &t.rows {
        if let Some(values) = configure_tuple(row, &t.schema, c)? {
            out.rows.insert(values);
        }
    }
    Ok(Some(out))
}

pub fn configure_vdb(db: &VdbInstance, c: &Configuration) -> Result<PlainDatabase, FexpError> {
    let m = db.schema.feature_model();
    let mut out = PlainDatabase::default();
    for (name, table) in &db.tables {
        match configure_table(table, m, c)? {
            Some(plain) => {
                out.schema.relations.insert(
                    name.clone(),
                    PlainRelSchema {
                        name: name.clone(),
                        attrs: plain.columns.clone(),
                    },
                );
                out.tables.insert(name.clone(), plain);
            }
            None => {
                out.absent.insert(name.clone());
            }
        }
    }
    Ok(out)
}

/// Merges annotated plain tables into one v-table over `schema`.
///
/// Columns missing from a part are padded with `Null`; rows with identical
/// values are merged by disjoining their conditions; unsatisfiable rows are
/// dropped; rows are sorted by value.
pub fn build_vtable(
    parts: impl IntoIterator<Item = (PlainTable, FeatureExpr)>,
    schema: VRelSchema,
) -> Result<VTable, StorageError> {
    let names: Vec<String> = schema.attr_names().map(str::to_string).collect();
    let mut merged: BTreeMap<Vec<Value>, Vec<FeatureExpr>> = BTreeMap::new();
    for (table, pc) in parts {
        let mut mapping = Vec::with_capacity(table.columns.len());
        for col in &table.columns {
            let pos = names.iter().position(|n| *n == col.name).ok_or_else(|| {
                StorageError::ColumnMismatch {
                    table: schema.name.clone(),
                    column: col.name.clone(),
                }
            })?;
            mapping.push(pos);
        }
        for row in table.rows {
            let mut values = vec![Value::Null; names.len()];
            for (v, &pos) in row.into_iter().zip(&mapping) {
                values[pos] = v;
            }
            merged.entry(values).or_default().push(pc.clone());
        }
    }
    let mut out = VTable::new(schema);
    for (values, pcs) in merged {
        let pc = simplify(&FeatureExpr::disj_all(pcs));
        if !pc.is_false() {
            out.rows.push(VTuple { values, pc });
        }
    }
    Ok(out)
}
