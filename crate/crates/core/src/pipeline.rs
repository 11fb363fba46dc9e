//! The query pipeline: type check, push the schema onto the query,
//! minimize, then hand the result to a strategy.

use thiserror::Error;

use crate::catalog::{CatalogError, VSchema};
use crate::featexpr::FexpError;
use crate::minimize::{minimize_traced, Step};
use crate::sqlgen::{sql_of_plain_under, sql_union, SqlError, SqlStatement};
use crate::translate::{configure_query, group_query, push_schema, QueryGroup};
use crate::typecheck::{check_query, simplified_type, QueryType, TypeError, TypeOptions};
use crate::vra::VQuery;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Fexp(#[from] FexpError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Sql(#[from] SqlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub minimize: bool,
    pub strict_context: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            minimize: true,
            strict_context: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub query: VQuery,
    pub qtype: QueryType,
    pub trace: Vec<Step>,
}

impl Prepared {
    /// Result attribute names in type order.
    pub fn unified(&self) -> Vec<String> {
        simplified_type(&self.qtype)
            .iter()
            .map(|e| e.value.name.clone())
            .collect()
    }
}

pub fn prepare(q: &VQuery, s: &VSchema, opts: PipelineOptions) -> Result<Prepared, TypeError> {
    let topts = TypeOptions {
        strict_context: opts.strict_context,
    };
    check_query(q, s, topts)?;
    let pushed = push_schema(q, s)?;
    let (query, trace) = if opts.minimize {
        minimize_traced(&pushed, s.feature_model())
    } else {
        (pushed, Vec::new())
    };
    let qtype = check_query(&query, s, topts)?;
    Ok(Prepared {
        query,
        qtype,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlMode {
    /// One statement per valid configuration.
    PerVariant,
    /// One statement per distinct plain query.
    PerGroup,
    /// The distinct plain queries unioned into one statement.
    Union,
    /// Every configuration's query unioned into one statement.
    UnionVariants,
}

/// One entry per valid configuration, unmerged.
pub fn variant_group(q: &VQuery, s: &VSchema) -> Result<QueryGroup, PipelineError> {
    let mut entries = Vec::new();
    for c in s.valid_configurations(crate::relengine::ENGINE_LIMIT)? {
        entries.push((configure_query(q, &c)?, c.minterm()));
    }
    Ok(QueryGroup { entries })
}

/// The distinct plain queries of `q` restricted to the feature model.
pub fn model_group(q: &VQuery, s: &VSchema) -> Result<QueryGroup, PipelineError> {
    Ok(group_query(q)?.restricted(s.feature_model()))
}

pub fn generate_sql(
    p: &Prepared,
    s: &VSchema,
    mode: SqlMode,
) -> Result<Vec<SqlStatement>, PipelineError> {
    let q = &p.query;
    Ok(match mode {
        SqlMode::PerVariant => variant_group(q, s)?
            .entries
            .into_iter()
            .map(|(pq, e)| sql_of_plain_under(&pq, e))
            .collect(),
        SqlMode::PerGroup => model_group(q, s)?
            .entries
            .into_iter()
            .map(|(pq, e)| sql_of_plain_under(&pq, e))
            .collect(),
        SqlMode::Union => vec![sql_union(&model_group(q, s)?, &p.unified(), s)?],
        SqlMode::UnionVariants => vec![sql_union(&variant_group(q, s)?, &p.unified(), s)?],
    })
}
