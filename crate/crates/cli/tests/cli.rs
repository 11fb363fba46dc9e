use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn vdbms(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_vdbms"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.unwrap_or("").as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn path(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_prints_the_shared_type() {
    let o = vdbms(
        &["--schema", &path("s2.vschema"), "check"],
        Some("proj [empno # !V3, name # V4, firstname # V5, lastname # V5] empbio"),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "OK: { empno # !V3, name # V4, firstname # V5, lastname # V5 } # V3 | V4 | V5\n"
    );
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let ill = vdbms(
        &[
            "--vdb",
            &path("q5"),
            "run",
            "--strategy",
            "configure",
            "-e",
            "proj [zz] r",
        ],
        None,
    );
    assert_eq!(ill.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&ill.stderr).starts_with("ERROR "));
    let syntax = vdbms(&["--vdb", &path("q5"), "check", "-e", "proj [a1 r"], None);
    assert_eq!(syntax.status.code(), Some(3));
    let missing = vdbms(&["--vdb", "/nonexistent/vdb", "check", "-e", "r"], None);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn strategies_print_identical_tables() {
    let q5 = path("q5/q5.vra");
    let a = vdbms(
        &["--vdb", &path("q5"), "run", "--strategy", "configure", &q5],
        None,
    );
    let b = vdbms(
        &["--vdb", &path("q5"), "run", "--strategy", "group", &q5],
        None,
    );
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a)
        .starts_with("relation result (a1 int # f1, a2 int # f1 & f2, a3 int # f2) # f1 | f2\n"));
    for q in [
        "empacct",
        "proj [empno, name, firstname, lastname] empbio",
        "choice V5 { sel (salary > 45000) empacct } { empacct }",
    ] {
        let a = vdbms(
            &[
                "--vdb",
                &path("employee"),
                "run",
                "--strategy",
                "configure",
                "-e",
                q,
            ],
            None,
        );
        let b = vdbms(
            &[
                "--vdb",
                &path("employee"),
                "run",
                "--strategy",
                "group",
                "-e",
                q,
            ],
            None,
        );
        assert_eq!(a.status.code(), Some(0), "{q}");
        assert_eq!(stdout(&a), stdout(&b), "{q}");
    }
}

#[test]
fn configure_and_group_print_reparsable_queries() {
    let q5 = path("q5/q5.vra");
    let schema = path("q5/schema.vschema");
    let c = vdbms(
        &["--schema", &schema, "configure", "--config", "f1,f2", &q5],
        None,
    );
    assert_eq!(stdout(&c), "proj [a1, a2, a3] r\n");
    let g = vdbms(&["--schema", &schema, "group", &q5], None);
    let text = stdout(&g);
    assert_eq!(text.lines().count(), 4);
    for line in text.lines() {
        let (query, pc) = line.rsplit_once(" # ").unwrap();
        vdb_core::vra::parse_query(query).unwrap();
        vdb_core::featexpr::parse_fexp(pc).unwrap();
    }
    let bad = vdbms(
        &["--schema", &schema, "configure", "--config", "f9", &q5],
        None,
    );
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn minimize_traces_rules() {
    let o = vdbms(
        &[
            "--schema",
            &path("q5/schema.vschema"),
            "minimize",
            "--trace",
        ],
        Some("choice f2 { proj [a2] r } { proj [a2] r }"),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    vdb_core::vra::parse_query(lines.next().unwrap()).unwrap();
    assert!(lines.all(|l| l.starts_with("-- ")));
    let lifted = vdbms(
        &[
            "--schema",
            &path("q5/schema.vschema"),
            "--no-minimize",
            "minimize",
            "--lift",
            "-e",
            "r",
        ],
        None,
    );
    assert_eq!(stdout(&lifted), "r\n");
}

#[test]
fn variants_reports_counts() {
    let o = vdbms(&["--schema", &path("example1.vschema"), "variants"], None);
    assert_eq!(
        stdout(&o),
        "satisfying configurations: 21\ndistinct schemas: 10\n"
    );
}

#[test]
fn sql_out_writes_one_file_per_statement() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sql");
    let o = vdbms(
        &[
            "--schema",
            &path("q5/schema.vschema"),
            "sql",
            "--mode",
            "per-variant",
            "--out",
            out.to_str().unwrap(),
            &path("q5/q5.vra"),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 4);
    assert_eq!(stdout(&o).lines().count(), 4);
    let union = vdbms(
        &[
            "--schema",
            &path("q5/schema.vschema"),
            "sql",
            &path("q5/q5.vra"),
        ],
        None,
    );
    assert!(stdout(&union).contains("UNION ALL"));
}

#[test]
fn configure_db_writes_a_loadable_plain_database() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deployed");
    let o = vdbms(
        &[
            "--vdb",
            &path("employee"),
            "configure-db",
            "--config",
            "V4",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let db = vdb_core::storage::load_vdb(&out).unwrap();
    assert!(db.schema.features().is_empty());
    assert!(db.tables.contains_key("job"));
    assert!(!db.tables.contains_key("ecourse"));
    let r = vdbms(
        &[
            "--vdb",
            out.to_str().unwrap(),
            "run",
            "-e",
            "proj [title] job",
        ],
        None,
    );
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).lines().skip(1).all(|l| l.ends_with(" # true")));
}
