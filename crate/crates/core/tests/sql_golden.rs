//! Golden SQL for the q5 example. Set `VDB_BLESS=1` to rewrite the files.

mod common;

use common::{fixture, q, read_fixture};
use vdb_core::catalog::parse_schema;
use vdb_core::pipeline::variant_group;
use vdb_core::sqlgen::{check_sql, sql_of_plain_under, sql_union};
use vdb_core::translate::group_query;

fn compare(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("VDB_BLESS").is_some() || !path.exists() {
        std::fs::write(&path, actual).unwrap();
    }
    assert_eq!(std::fs::read_to_string(&path).unwrap(), actual, "{name}");
}

#[test]
fn q5_per_variant_matches_golden() {
    let s = parse_schema(&read_fixture("q5/schema.vschema")).unwrap();
    let q5 = q(read_fixture("q5/q5.vra").trim());
    let text: String = variant_group(&q5, &s)
        .unwrap()
        .entries
        .iter()
        .map(|(pq, e)| sql_of_plain_under(pq, e.clone()).to_string())
        .collect();
    compare("golden/q5_per_variant.sql", &text);
    for chunk in text.split_inclusive(";\n") {
        check_sql(chunk).unwrap();
    }
}

#[test]
fn q5_union_matches_golden() {
    let s = parse_schema(&read_fixture("q5/schema.vschema")).unwrap();
    let q5 = q(read_fixture("q5/q5.vra").trim());
    let unified = ["a1", "a2", "a3"].map(String::from);
    let st = sql_union(&group_query(&q5).unwrap(), &unified, &s).unwrap();
    compare("golden/q5_union.sql", &st.to_string());
    assert_eq!(check_sql(&st.to_string()).unwrap(), [Some(4); 3]);
}
