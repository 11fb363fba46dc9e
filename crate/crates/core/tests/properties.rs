//! Execution-level properties over seeded random schemas, queries and instances.

mod common;

use common::{corpus, named_rows, slice};
use vdb_core::minimize::minimize_in;
use vdb_core::relengine::{eval_plain, run_configure, run_group};
use vdb_core::storage::{configure_vdb, print_vtable};
use vdb_core::translate::{configure_query, push_schema};

#[test]
fn corpus_is_large_and_varied() {
    let c = corpus(11, 60, 6);
    assert_eq!(c.len(), 60);
    let sizes: Vec<usize> = c.iter().map(|(_, q)| q.size()).collect();
    assert!(sizes.iter().any(|&s| s >= 6), "{sizes:?}");
}

#[test]
fn execution_commutes_with_configuration() {
    for (i, (s, q)) in corpus(21, 80, 5).into_iter().enumerate() {
        let mut r = common::rng(1000 + i as u64);
        let db = s.instance(&mut r, 30);
        let q = push_schema(&q, &s.schema).unwrap();
        let m = s.schema.feature_model().clone();
        let a = run_configure(&q, &db).unwrap();
        let b = run_group(&q, &db).unwrap();
        assert_eq!(print_vtable(&a), print_vtable(&b), "{q}");
        for c in s.schema.valid_configurations(16).unwrap() {
            let direct = eval_plain(
                &configure_query(&q, &c).unwrap(),
                &configure_vdb(&db, &c).unwrap(),
            )
            .unwrap();
            assert_eq!(slice(&a, &m, &c), named_rows(&direct), "{q} at {c}");
        }
    }
}

#[test]
fn minimization_preserves_results() {
    for (i, (s, q)) in corpus(31, 60, 5).into_iter().enumerate() {
        let mut r = common::rng(2000 + i as u64);
        let db = s.instance(&mut r, 30);
        let pushed = push_schema(&q, &s.schema).unwrap();
        let m = s.schema.feature_model().clone();
        let small = minimize_in(&pushed, &m);
        let a = run_configure(&pushed, &db).unwrap();
        let b = run_configure(&small, &db).unwrap();
        for c in s.schema.valid_configurations(16).unwrap() {
            assert_eq!(
                slice(&a, &m, &c),
                slice(&b, &m, &c),
                "{pushed} vs {small} at {c}"
            );
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let db = common::employee();
    let q = common::q("proj [empno, salary # V5, std # edu] empacct");
    let first = print_vtable(&run_group(&q, &db).unwrap());
    for _ in 0..3 {
        assert_eq!(print_vtable(&run_group(&q, &db).unwrap()), first);
    }
}
