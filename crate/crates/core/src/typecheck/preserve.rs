use std::collections::BTreeSet;

use thiserror::Error;

use super::{check_query, plain_type, TypeError, TypeOptions};
use crate::catalog::{configure_schema, CatalogError, VSchema};
use crate::featexpr::{Configuration, FexpError};
use crate::translate::configure_query;
use crate::vra::VQuery;

/// Largest universe enumerated by [`check_variation_preservation`].
pub const PRESERVATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreservationError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Fexp(#[from] FexpError),
}

/// A configuration under which the configured variational type differs from
/// the plain type of the configured query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub config: Configuration,
    pub expected: Vec<String>,
    pub found: String,
}

/// Compares, for every configuration satisfying the feature model, the
/// configured type of `q` with the plain type of the configured query.
/// Returns the configurations where they differ.
pub fn check_variation_preservation(
    q: &VQuery,
    s: &VSchema,
) -> Result<Vec<Violation>, PreservationError> {
    let t = check_query(q, s, TypeOptions::default())?.push_annotation();
    let mut out = Vec::new();
    for c in s.valid_configurations(PRESERVATION_LIMIT)? {
        let mut expected: Vec<(String, _)> = t
            .configure(&c)?
            .into_iter()
            .map(|a| (a.name, a.atype))
            .collect();
        expected.sort();
        let schema = configure_schema(s, &c)?;
        let absent: BTreeSet<String> = s
            .relations()
            .map(|r| r.name.clone())
            .filter(|r| schema.relation(r).is_none())
            .collect();
        let found = match plain_type(&configure_query(q, &c)?, &schema, &absent) {
            Ok(p) if p.signature() == expected => continue,
            Ok(p) => p
                .signature()
                .iter()
                .map(|(n, _)| n.as_str())
                .collect::<Vec<_>>()
                .join(", "),
            Err(e) => format!("ill-typed: {e}"),
        };
        out.push(Violation {
            config: c,
            expected: expected.into_iter().map(|(n, _)| n).collect(),
            found,
        });
    }
    Ok(out)
}
