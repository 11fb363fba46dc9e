//! Variational sets: elements annotated with presence conditions, plus an
//! optional annotation on the set as a whole.
//!
//! Elements are identified by a key (see [`Keyed`]); inserting a value whose
//! key is already present disjoins the presence conditions. Iteration
//! follows insertion order.

use std::fmt;
use std::hash::Hash;

use indexmap::IndexMap;
use thiserror::Error;

use crate::featexpr::{self, Configuration, FeatureExpr, FexpError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VSetError {
    #[error("presence condition `{0}` is unsatisfiable")]
    Unsatisfiable(FeatureExpr),
}

/// Identity of a v-set element.
pub trait Keyed: Clone {
    type Key: Clone + Eq + Hash + Ord + fmt::Debug;

    fn key(&self) -> Self::Key;

    /// Combines the payload of two values sharing a key. Defaults to keeping
    /// `self`.
    fn absorb(&mut self, _other: &Self) {}
}

macro_rules! keyed_by_self {
    ($($t:ty),*) => {$(
        impl Keyed for $t {
            type Key = $t;
            fn key(&self) -> $t {
                self.clone()
            }
        }
    )*};
}

keyed_by_self!(i64, i32, u32, u64, String, &'static str, char);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VElem<T> {
    pub value: T,
    pub pc: FeatureExpr,
}

#[derive(Debug, Clone)]
pub struct VSet<T: Keyed> {
    elems: IndexMap<T::Key, VElem<T>>,
    annotation: FeatureExpr,
}

impl<T: Keyed> Default for VSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Keyed + PartialEq> PartialEq for VSet<T> {
    /// Structural equality (same elements in the same order, identical
    /// formulas). Use [`VSet::equiv`] for semantic comparison.
    fn eq(&self, other: &Self) -> bool {
        self.annotation == other.annotation
            && self.elems.len() == other.elems.len()
            && self
                .elems
                .values()
                .zip(other.elems.values())
                .all(|(a, b)| a == b)
    }
}

impl<T: Keyed + Eq> Eq for VSet<T> {}

impl<T: Keyed> VSet<T> {
    pub fn new() -> Self {
        Self {
            elems: IndexMap::new(),
            annotation: FeatureExpr::TRUE,
        }
    }

    pub fn with_annotation(annotation: FeatureExpr) -> Self {
        Self {
            elems: IndexMap::new(),
            annotation,
        }
    }

    /// Builds a set from annotated values; an unsatisfiable presence
    /// condition is an error.
    pub fn from_elems(
        items: impl IntoIterator<Item = (T, FeatureExpr)>,
    ) -> Result<Self, VSetError> {
        let mut s = Self::new();
        for (v, pc) in items {
            s.insert(v, pc)?;
        }
        Ok(s)
    }

    /// Builds an unannotated set whose elements all have presence `true`.
    pub fn plain(items: impl IntoIterator<Item = T>) -> Self {
        let mut s = Self::new();
        for v in items {
            s.insert_or_drop(v, FeatureExpr::TRUE);
        }
        s
    }

    pub fn annotation(&self) -> &FeatureExpr {
        &self.annotation
    }

    /// Replaces the set annotation, dropping elements that can no longer be
    /// present.
    pub fn annotated(mut self, annotation: FeatureExpr) -> Self {
        self.annotation = annotation;
        let ann = self.annotation.clone();
        self.elems
            .retain(|_, e| featexpr::sat(&FeatureExpr::and(e.pc.clone(), ann.clone())));
        self
    }

    /// Inserts `value` with presence `pc`. When the key is already present
    /// the conditions are disjoined.
    pub fn insert(&mut self, value: T, pc: FeatureExpr) -> Result<(), VSetError> {
        if !featexpr::sat(&FeatureExpr::and(pc.clone(), self.annotation.clone())) {
            return Err(VSetError::Unsatisfiable(pc));
        }
        self.merge_in(value, pc);
        Ok(())
    }

    /// Like [`Self::insert`] but silently skips unsatisfiable elements.
    /// Returns whether the element was kept.
    pub fn insert_or_drop(&mut self, value: T, pc: FeatureExpr) -> bool {
        self.insert(value, pc).is_ok()
    }

    fn merge_in(&mut self, value: T, pc: FeatureExpr) {
        match self.elems.get_mut(&value.key()) {
            Some(existing) => {
                existing.value.absorb(&value);
                existing.pc = FeatureExpr::disj(existing.pc.clone(), pc);
            }
            None => {
                self.elems.insert(value.key(), VElem { value, pc });
            }
        }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VElem<T>> {
        self.elems.values()
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.elems.values().map(|e| &e.value)
    }

    pub fn get(&self, key: &T::Key) -> Option<&VElem<T>> {
        self.elems.get(key)
    }

    pub fn contains_key(&self, key: &T::Key) -> bool {
        self.elems.contains_key(key)
    }

    /// Rewrites every element presence condition with `f`, dropping elements
    /// whose new condition is unsatisfiable under the annotation.
    pub fn map_pcs(&self, mut f: impl FnMut(&FeatureExpr) -> FeatureExpr) -> Self {
        let mut out = Self::with_annotation(self.annotation.clone());
        for e in self.iter() {
            out.insert_or_drop(e.value.clone(), f(&e.pc));
        }
        out
    }

    /// Pushes the set annotation into every element: `{x^(pc ∧ ann)}` with
    /// annotation `true`, dropping elements that become unsatisfiable.
    pub fn push_annotation(&self) -> Self {
        let mut out = Self::new();
        for e in self.iter() {
            let pc = FeatureExpr::conj(e.pc.clone(), self.annotation.clone());
            out.insert_or_drop(e.value.clone(), pc);
        }
        out
    }

    /// Replaces by `true` every element condition implied by the annotation.
    pub fn relax_implied(&self) -> Self {
        let mut out = Self::with_annotation(self.annotation.clone());
        for e in self.iter() {
            let pc = if featexpr::implies(&self.annotation, &e.pc) {
                FeatureExpr::TRUE
            } else {
                e.pc.clone()
            };
            out.merge_in(e.value.clone(), pc);
        }
        out
    }

    /// Union of two sets; annotations are pushed first.
    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.push_annotation();
        for e in other.push_annotation().elems.into_values() {
            out.merge_in(e.value, e.pc);
        }
        out
    }

    /// Elements present in both sets, with conjoined conditions.
    pub fn intersect(&self, other: &Self) -> Self {
        let left = self.push_annotation();
        let right = other.push_annotation();
        let mut out = Self::new();
        for (k, e) in left.elems {
            if let Some(o) = right.elems.get(&k) {
                let mut value = e.value;
                value.absorb(&o.value);
                out.insert_or_drop(value, FeatureExpr::conj(e.pc, o.pc.clone()));
            }
        }
        out
    }

    /// Both sets denote the same plain set under every configuration.
    pub fn equiv(&self, other: &Self) -> bool {
        let left = self.push_annotation();
        let right = other.push_annotation();
        left.len() == right.len()
            && left.elems.iter().all(|(k, e)| {
                right
                    .elems
                    .get(k)
                    .is_some_and(|o| featexpr::equiv(&e.pc, &o.pc))
            })
    }

    /// `self ⊑ other`: every element of `self` exists in `other` under some
    /// configuration where both are present.
    pub fn subsumed_by(&self, other: &Self) -> bool {
        self.first_unsubsumed(other).is_none()
    }

    /// The first element of `self` without a compatible counterpart in
    /// `other` (both sides pushed).
    pub fn first_unsubsumed(&self, other: &Self) -> Option<VElem<T>> {
        let right = other.push_annotation();
        self.push_annotation().elems.into_iter().find_map(|(k, e)| {
            let ok = right
                .elems
                .get(&k)
                .is_some_and(|o| featexpr::sat(&FeatureExpr::and(e.pc.clone(), o.pc.clone())));
            (!ok).then_some(e)
        })
    }

    /// The plain set selected by `c`, in insertion order.
    pub fn configure(&self, c: &Configuration) -> Result<Vec<T>, FexpError> {
        if !self.annotation.eval(c)? {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for e in self.iter() {
            if e.pc.eval(c)? {
                out.push(e.value.clone());
            }
        }
        Ok(out)
    }

    /// Features mentioned by the annotation or any element.
    pub fn features(&self) -> std::collections::BTreeSet<featexpr::FeatureName> {
        let mut out = self.annotation.features();
        for e in self.iter() {
            e.pc.collect_features(&mut out);
        }
        out
    }
}

/// `subsumes(x2, x1)`: `x2 ⊑ x1`.
pub fn subsumes<T: Keyed>(x2: &VSet<T>, x1: &VSet<T>) -> bool {
    x2.subsumed_by(x1)
}

impl<T: Keyed> FromIterator<(T, FeatureExpr)> for VSet<T> {
    /// Collects annotated values, skipping unsatisfiable ones.
    fn from_iter<I: IntoIterator<Item = (T, FeatureExpr)>>(iter: I) -> Self {
        let mut s = Self::new();
        for (v, pc) in iter {
            s.insert_or_drop(v, pc);
        }
        s
    }
}

impl<T: Keyed + fmt::Display> fmt::Display for VSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.elems.is_empty() {
            f.write_str("{}")?;
        } else {
            f.write_str("{ ")?;
            for (i, e) in self.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", e.value)?;
                if !e.pc.is_true() {
                    write!(f, " # {}", e.pc)?;
                }
            }
            f.write_str(" }")?;
        }
        if !self.annotation.is_true() {
            write!(f, " # {}", self.annotation)?;
        }
        Ok(())
    }
}
