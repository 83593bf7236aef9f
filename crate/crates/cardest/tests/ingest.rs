use std::fs;
use std::path::Path;

use cardest::ingest::{ingest_dir, ingest_table, parse_schema};
use cardest::CliError;
use cardest_core::exec::execute_count;
use cardest_core::sql::parse_query;
use cardest_core::{Column, ColumnType, Value};

fn cols() -> Vec<Column> {
    vec![
        Column::new("id", ColumnType::Int64),
        Column::new("x", ColumnType::Float64),
        Column::new("s", ColumnType::Text),
    ]
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn three_rows_with_nulls() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "t.csv", "id,x,s\n1,0.5,a\n2,,b\nabc,inf,\n");
    let t = ingest_table(&p, "t", cols()).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.rows[0], vec![Value::Int(1), Value::Float(0.5), Value::Text("a".into())]);
    assert_eq!(t.rows[1][1], Value::Null);
    // unparseable int, non-finite float and empty text all load as NULL
    assert_eq!(t.rows[2], vec![Value::Null, Value::Null, Value::Null]);
}

#[test]
fn header_must_match_in_order() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "t.csv", "id,s,x\n1,a,0.5\n");
    assert!(matches!(ingest_table(&p, "t", cols()), Err(CliError::Format { .. })));
    let p = write(d.path(), "u.csv", "a,b\n1,2\n");
    let two = vec![Column::new("a", ColumnType::Int64), Column::new("c", ColumnType::Int64)];
    assert!(matches!(ingest_table(&p, "u", two), Err(CliError::Format { .. })));
}

#[test]
fn ragged_rows_are_format_errors() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "t.csv", "id,x,s\n1,0.5\n");
    let e = ingest_table(&p, "t", cols()).unwrap_err();
    assert_eq!(e.exit_code(), 5);
}

#[test]
fn duplicate_column_and_missing_file() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "t.csv", "a,a\n1,2\n");
    let dup = vec![Column::new("a", ColumnType::Int64), Column::new("a", ColumnType::Int64)];
    assert!(matches!(ingest_table(&p, "t", dup), Err(CliError::Core(_))));
    let e = ingest_table(&d.path().join("missing.csv"), "t", cols()).unwrap_err();
    assert!(matches!(e, CliError::Io { .. }), "{e:?}");
}

#[test]
fn schema_directory_with_join() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "p.csv", "id,kind\n1,x\n2,y\n3,x\n");
    write(d.path(), "c.csv", "pid,v\n1,10\n1,11\n2,12\n,13\n");
    let schema = write(
        d.path(),
        "schema.toml",
        r#"
[[table]]
name = "p"
file = "p.csv"
columns = [{ name = "id", type = "int64" }, { name = "kind", type = "text" }]

[[table]]
name = "c"
file = "c.csv"
columns = [{ name = "pid", type = "int" }, { name = "v", type = "float" }]

[[join]]
left = "p.id"
right = "c.pid"
"#,
    );
    let db = ingest_dir(d.path(), &schema, 10, 5).unwrap();
    assert_eq!(db.tables.len(), 2);
    assert_eq!(db.column_stats("c", "pid").unwrap().null_count, 1);
    let q = parse_query("SELECT COUNT(*) FROM p, c WHERE p.id = c.pid AND p.kind = 'x'", &db).unwrap();
    // p.id = 1 matches two rows of c; p.id = 3 matches none
    assert_eq!(execute_count(&db, &q).unwrap(), 2);
}

#[test]
fn schema_rejects_unknown_keys_and_types() {
    assert!(parse_schema("[[table]]\nname = \"t\"\nfile = \"t.csv\"\ncolumns = []\nextra = 1\n").is_err());
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "t.csv", "a\n1\n");
    let schema = write(d.path(), "s.toml", "[[table]]\nname = \"t\"\nfile = \"t.csv\"\ncolumns = [{ name = \"a\", type = \"blob\" }]\n");
    assert!(matches!(ingest_dir(d.path(), &schema, 10, 5), Err(CliError::Format { .. })));
    let schema = write(
        d.path(),
        "s2.toml",
        "[[table]]\nname = \"t\"\nfile = \"t.csv\"\ncolumns = [{ name = \"a\", type = \"int\" }]\n[[join]]\nleft = \"t\"\nright = \"t.a\"\n",
    );
    assert!(ingest_dir(d.path(), &schema, 10, 5).is_err());
}
