//! Variational schemas.
//!
//! A [`VSchema`] declares a feature universe, a feature model and a set of
//! relation schemas whose attributes and relations carry presence
//! conditions. The effective presence of an attribute is the conjunction of
//! its own condition, its relation's condition and the feature model.

mod parse;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::featexpr::{self, Configuration, FeatureExpr, FeatureName, FexpError};
use crate::lexer::SyntaxError;
use crate::vset::{Keyed, VElem, VSet};

pub(crate) use parse::parse_relation;
pub use parse::parse_schema;

/// Largest universe [`count_schema_variants`] will enumerate.
pub const VARIANT_COUNT_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("feature `{feature}` used in {context} is not declared")]
    UndeclaredFeature {
        feature: FeatureName,
        context: String,
    },
    #[error("presence condition of {context} is unsatisfiable: {pc}")]
    UnsatisfiablePresence { context: String, pc: FeatureExpr },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{rel}` has no attribute `{attr}`")]
    UnknownAttribute { rel: String, attr: String },
    #[error(transparent)]
    Fexp(#[from] FexpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrType {
    Int,
    Text,
    Bool,
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrType::Int => "int",
            AttrType::Text => "text",
            AttrType::Bool => "bool",
        })
    }
}

impl FromStr for AttrType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "int" | "integer" => Ok(AttrType::Int),
            "text" => Ok(AttrType::Text),
            "bool" | "boolean" => Ok(AttrType::Bool),
            other => Err(format!("unknown attribute type `{other}`")),
        }
    }
}

/// An attribute of a relation schema; its presence condition lives in the
/// enclosing v-set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VAttr {
    pub name: String,
    pub atype: AttrType,
}

impl VAttr {
    pub fn new(name: impl Into<String>, atype: AttrType) -> Self {
        Self {
            name: name.into(),
            atype,
        }
    }
}

impl Keyed for VAttr {
    type Key = String;

    fn key(&self) -> String {
        self.name.clone()
    }
}

impl fmt::Display for VAttr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name, self.atype)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VRelSchema {
    pub name: String,
    pub attrs: VSet<VAttr>,
    pub pc: FeatureExpr,
}

impl VRelSchema {
    pub fn new(name: impl Into<String>, pc: FeatureExpr) -> Self {
        Self {
            name: name.into(),
            attrs: VSet::new(),
            pc,
        }
    }

    /// Appends an attribute; duplicate names and unsatisfiable conditions
    /// are rejected.
    pub fn add_attr(&mut self, attr: VAttr, pc: FeatureExpr) -> Result<(), CatalogError> {
        if self.attrs.contains_key(&attr.name) {
            return Err(CatalogError::DuplicateName(format!(
                "{}.{}",
                self.name, attr.name
            )));
        }
        let context = format!("attribute `{}.{}`", self.name, attr.name);
        self.attrs
            .insert(attr, pc.clone())
            .map_err(|_| CatalogError::UnsatisfiablePresence { context, pc })
    }

    pub fn with_attrs<'a>(
        mut self,
        attrs: impl IntoIterator<Item = (&'a str, AttrType, FeatureExpr)>,
    ) -> Result<Self, CatalogError> {
        for (name, atype, pc) in attrs {
            self.add_attr(VAttr::new(name, atype), pc)?;
        }
        Ok(self)
    }

    pub fn attr(&self, name: &str) -> Option<&VElem<VAttr>> {
        self.attrs.get(&name.to_string())
    }

    pub fn attr_names(&self) -> impl Iterator<Item = &str> {
        self.attrs.values().map(|a| a.name.as_str())
    }
}

impl fmt::Display for VRelSchema {
    /// `name (a int, b text # pc) # pc`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (", self.name)?;
        for (i, a) in self.attrs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", a.value)?;
            if !a.pc.is_true() {
                write!(f, " # {}", a.pc)?;
            }
        }
        f.write_str(")")?;
        if !self.pc.is_true() {
            write!(f, " # {}", self.pc)?;
        }
        Ok(())
    }
}

/// A plain attribute in a configured schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainAttr {
    pub name: String,
    pub atype: AttrType,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainRelSchema {
    pub name: String,
    pub attrs: Vec<PlainAttr>,
}

impl PlainRelSchema {
    pub fn position(&self, attr: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == attr)
    }
}

/// A configured (variation-free) schema.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlainSchema {
    pub relations: BTreeMap<String, PlainRelSchema>,
}

impl PlainSchema {
    pub fn relation(&self, name: &str) -> Option<&PlainRelSchema> {
        self.relations.get(name)
    }
}

impl fmt::Display for PlainSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rel in self.relations.values() {
            let attrs: Vec<String> = rel
                .attrs
                .iter()
                .map(|a| format!("{} {}", a.name, a.atype))
                .collect();
            writeln!(f, "relation {} ({})", rel.name, attrs.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VSchema {
    features: Vec<FeatureName>,
    universe: Arc<BTreeSet<FeatureName>>,
    feature_model: FeatureExpr,
    relations: IndexMap<String, VRelSchema>,
}

impl VSchema {
    pub fn new(
        features: impl IntoIterator<Item = FeatureName>,
        feature_model: FeatureExpr,
    ) -> Result<Self, CatalogError> {
        let mut declared = Vec::new();
        let mut seen = HashSet::new();
        for f in features {
            if !seen.insert(f.clone()) {
                return Err(CatalogError::DuplicateName(f.to_string()));
            }
            declared.push(f);
        }
        let universe = Arc::new(declared.iter().cloned().collect::<BTreeSet<_>>());
        check_declared(&universe, &feature_model, "the feature model")?;
        Ok(Self {
            features: declared,
            universe,
            feature_model,
            relations: IndexMap::new(),
        })
    }

    /// Adds a relation after validating feature declarations and the
    /// hierarchical satisfiability of its presence conditions.
    pub fn add_relation(&mut self, rel: VRelSchema) -> Result<(), CatalogError> {
        if self.relations.contains_key(&rel.name) {
            return Err(CatalogError::DuplicateName(rel.name));
        }
        let ctx = format!("relation `{}`", rel.name);
        check_declared(&self.universe, &rel.pc, &ctx)?;
        let rel_pc = FeatureExpr::and(rel.pc.clone(), self.feature_model.clone());
        if !featexpr::sat(&rel_pc) {
            return Err(CatalogError::UnsatisfiablePresence {
                context: ctx,
                pc: rel.pc,
            });
        }
        for a in rel.attrs.iter() {
            let ctx = format!("attribute `{}.{}`", rel.name, a.value.name);
            check_declared(&self.universe, &a.pc, &ctx)?;
            if !featexpr::sat(&FeatureExpr::and(a.pc.clone(), rel_pc.clone())) {
                return Err(CatalogError::UnsatisfiablePresence {
                    context: ctx,
                    pc: a.pc.clone(),
                });
            }
        }
        self.relations.insert(rel.name.clone(), rel);
        Ok(())
    }

    pub fn with_relation(mut self, rel: VRelSchema) -> Result<Self, CatalogError> {
        self.add_relation(rel)?;
        Ok(self)
    }

    /// Declared features in declaration order.
    pub fn features(&self) -> &[FeatureName] {
        &self.features
    }

    pub fn universe(&self) -> &Arc<BTreeSet<FeatureName>> {
        &self.universe
    }

    pub fn feature_model(&self) -> &FeatureExpr {
        &self.feature_model
    }

    pub fn relations(&self) -> impl Iterator<Item = &VRelSchema> {
        self.relations.values()
    }

    pub fn relation(&self, name: &str) -> Option<&VRelSchema> {
        self.relations.get(name)
    }

    pub fn get_relation(&self, name: &str) -> Result<&VRelSchema, CatalogError> {
        self.relation(name)
            .ok_or_else(|| CatalogError::UnknownRelation(name.to_string()))
    }

    /// A configuration of this schema's universe with the given features on.
    pub fn configuration<'a>(
        &self,
        enabled: impl IntoIterator<Item = &'a str>,
    ) -> Result<Configuration, CatalogError> {
        let enabled = enabled
            .into_iter()
            .map(FeatureName::new)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Configuration::with_universe(
            Arc::clone(&self.universe),
            enabled,
        )?)
    }

    pub fn parse_configuration(&self, literal: &str) -> Result<Configuration, CatalogError> {
        Ok(Configuration::parse_literal(
            literal,
            self.universe.iter().cloned(),
        )?)
    }

    /// Every configuration of the universe, in binary counting order.
    pub fn all_configurations(
        &self,
        limit: usize,
    ) -> Result<impl Iterator<Item = Configuration>, CatalogError> {
        Ok(Configuration::enumerate(
            self.universe.iter().cloned().collect::<Vec<_>>(),
            limit,
        )?)
    }

    /// Configurations satisfying the feature model.
    pub fn valid_configurations(&self, limit: usize) -> Result<Vec<Configuration>, CatalogError> {
        let m = self.feature_model.clone();
        Ok(self
            .all_configurations(limit)?
            .filter(|c| m.eval(c).unwrap_or(false))
            .collect())
    }
}

fn check_declared(
    universe: &BTreeSet<FeatureName>,
    e: &FeatureExpr,
    context: &str,
) -> Result<(), CatalogError> {
    match e.features().into_iter().find(|f| !universe.contains(f)) {
        Some(feature) => Err(CatalogError::UndeclaredFeature {
            feature,
            context: context.to_string(),
        }),
        None => Ok(()),
    }
}

/// `pc_a ∧ pc_r ∧ m`.
pub fn attr_presence(s: &VSchema, rel: &str, attr: &str) -> Result<FeatureExpr, CatalogError> {
    let r = s.get_relation(rel)?;
    let a = r.attr(attr).ok_or_else(|| CatalogError::UnknownAttribute {
        rel: rel.to_string(),
        attr: attr.to_string(),
    })?;
    Ok(FeatureExpr::and(
        FeatureExpr::and(a.pc.clone(), r.pc.clone()),
        s.feature_model.clone(),
    ))
}

/// `pc_r ∧ m`.
pub fn relation_presence(s: &VSchema, rel: &str) -> Result<FeatureExpr, CatalogError> {
    let r = s.get_relation(rel)?;
    Ok(FeatureExpr::and(r.pc.clone(), s.feature_model.clone()))
}

/// Configures a relation schema; `None` when the relation vanishes.
pub fn configure_relation(
    rel: &VRelSchema,
    c: &Configuration,
) -> Result<Option<PlainRelSchema>, FexpError> {
    if !rel.pc.eval(c)? {
        return Ok(None);
    }
    let attrs = rel
        .attrs
        .configure(c)?
        .into_iter()
        .map(|a| PlainAttr {
            name: a.name,
            atype: a.atype,
        })
        .collect();
    Ok(Some(PlainRelSchema {
        name: rel.name.clone(),
        attrs,
    }))
}

pub fn configure_schema(s: &VSchema, c: &Configuration) -> Result<PlainSchema, FexpError> {
    let mut out = PlainSchema::default();
    if !s.feature_model.eval(c)? {
        return Ok(out);
    }
    for rel in s.relations() {
        if let Some(plain) = configure_relation(rel, c)? {
            out.relations.insert(plain.name.clone(), plain);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantCount {
    pub satisfying_configs: usize,
    pub distinct_schemas: usize,
}

/// Enumerates the universe and counts configurations that satisfy the
/// feature model and the distinct plain schemas they produce.
pub fn count_schema_variants(s: &VSchema) -> Result<VariantCount, CatalogError> {
    let mut satisfying = 0;
    let mut schemas = HashSet::new();
    for c in s.all_configurations(VARIANT_COUNT_LIMIT)? {
        if s.feature_model.eval(&c)? {
            satisfying += 1;
            schemas.insert(configure_schema(s, &c)?);
        }
    }
    Ok(VariantCount {
        satisfying_configs: satisfying,
        distinct_schemas: schemas.len(),
    })
}

impl fmt::Display for VSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.features.iter().map(FeatureName::as_str).collect();
        if names.is_empty() {
            writeln!(f, "features")?;
        } else {
            writeln!(f, "features {}", names.join(", "))?;
        }
        writeln!(f, "featuremodel {}", self.feature_model)?;
        for rel in self.relations() {
            writeln!(f, "relation {rel}")?;
        }
        Ok(())
    }
}
