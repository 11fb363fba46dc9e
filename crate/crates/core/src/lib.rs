//! Variational database engine.
//!
//! Stores many relational database variants as one annotated database,
//! type-checks variational relational algebra queries against a variational
//! schema, translates them into plain relational queries, evaluates them and
//! reassembles one variational result table.

pub mod catalog;
pub mod featexpr;
pub mod lexer;
pub mod minimize;
pub mod pipeline;
pub mod relengine;
pub mod sqlgen;
pub mod storage;
pub mod translate;
pub mod typecheck;
pub mod vra;
pub mod vset;
