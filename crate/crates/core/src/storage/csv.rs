//! CSV encoding of v-tables and the on-disk VDB layout.
//!
//! A VDB directory holds `schema.vschema` and one `<relation>.csv` per
//! relation. The header row lists the attributes followed by `presCond`.
//! Text cells are always quoted, so an unquoted empty field is `Null` while
//! `""` is the empty string.

use std::fs;
use std::path::Path;

use super::{validate_row, StorageError, VTable, VTuple, Value, VdbInstance};
use crate::catalog::{parse_schema, AttrType, VRelSchema};
use crate::featexpr::{parse_fexp, FeatureExpr};

pub const PC_COLUMN: &str = "presCond";
pub const SCHEMA_FILE: &str = "schema.vschema";

struct Field {
    text: String,
    quoted: bool,
}

/// Splits CSV text into records. Quoted fields may contain commas, doubled
/// quotes and newlines.
fn records(text: &str, table: &str) -> Result<Vec<(usize, Vec<Field>)>, StorageError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while chars.peek().is_some() {
        let start_line = line;
        let mut fields = Vec::new();
        loop {
            let mut field = Field {
                text: String::new(),
                quoted: false,
            };
            if chars.peek() == Some(&'"') {
                chars.next();
                field.quoted = true;
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            field.text.push('"');
                        }
                        Some('"') => break,
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            field.text.push(c);
                        }
                        None => {
                            return Err(StorageError::Csv {
                                table: table.to_string(),
                                line: start_line,
                                message: "unterminated quoted field".into(),
                            })
                        }
                    }
                }
            }
            while let Some(&c) = chars.peek() {
                if c == ',' || c == '\n' || c == '\r' {
                    break;
                }
                if field.quoted {
                    return Err(StorageError::Csv {
                        table: table.to_string(),
                        line,
                        message: "text after closing quote".into(),
                    });
                }
                field.text.push(c);
                chars.next();
            }
            fields.push(field);
            match chars.next() {
                Some(',') => continue,
                Some('\r') => {
                    if chars.peek() == Some(&'\n') {
                        chars.next();
                    }
                    line += 1;
                    break;
                }
                Some('\n') => {
                    line += 1;
                    break;
                }
                _ => break,
            }
        }
        let blank = fields.len() == 1 && !fields[0].quoted && fields[0].text.trim().is_empty();
        if !blank {
            out.push((start_line, fields));
        }
    }
    Ok(out)
}

fn parse_cell(field: &Field, atype: AttrType) -> Result<Value, String> {
    if !field.quoted && field.text.is_empty() {
        return Ok(Value::Null);
    }
    let raw = field.text.as_str();
    match atype {
        AttrType::Text => Ok(Value::Text(raw.to_string())),
        _ if field.quoted => Err(format!("quoted value \"{raw}\" in a {atype} column")),
        AttrType::Int => raw
            .trim()
            .parse()
            .map(Value::Int)
            .map_err(|_| format!("`{raw}` is not an int")),
        AttrType::Bool => match raw.trim() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("`{raw}` is not a bool")),
        },
    }
}

/// Parses the CSV content of one relation. Cells are typed but not yet
/// checked for validity against the schema's presence conditions.
pub fn read_table_csv(text: &str, rel: &VRelSchema) -> Result<Vec<VTuple>, StorageError> {
    let table = rel.name.as_str();
    let mut recs = records(text, table)?.into_iter();
    let Some((line, header)) = recs.next() else {
        return Ok(Vec::new());
    };
    let expected: Vec<&str> = rel.attr_names().chain([PC_COLUMN]).collect();
    let found: Vec<&str> = header.iter().map(|f| f.text.trim()).collect();
    if found != expected {
        return Err(StorageError::Csv {
            table: table.to_string(),
            line,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }
    let types: Vec<AttrType> = rel.attrs.values().map(|a| a.atype).collect();
    let mut rows = Vec::new();
    for (line, fields) in recs {
        if fields.len() != expected.len() {
            return Err(StorageError::ArityMismatch {
                table: table.to_string(),
                line,
                expected: expected.len(),
                found: fields.len(),
            });
        }
        let csv_err = |message: String| StorageError::Csv {
            table: table.to_string(),
            line,
            message,
        };
        let mut values = Vec::with_capacity(types.len());
        for (field, &atype) in fields.iter().zip(&types) {
            values.push(parse_cell(field, atype).map_err(csv_err)?);
        }
        let pc_text = fields.last().expect("non-empty record").text.trim();
        let pc = if pc_text.is_empty() {
            FeatureExpr::TRUE
        } else {
            parse_fexp(pc_text).map_err(|e| csv_err(format!("presence condition: {e}")))?
        };
        rows.push(VTuple { values, pc });
    }
    Ok(rows)
}

fn write_cell(out: &mut String, v: &Value) {
    match v {
        Value::Null => {}
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Bool(b) => out.push_str(&b.to_string()),
        Value::Text(s) => {
            out.push('"');
            out.push_str(&s.replace('"', "\"\""));
            out.push('"');
        }
    }
}

pub fn write_table_csv(t: &VTable) -> String {
    let mut out = String::new();
    let header: Vec<&str> = t.schema.attr_names().chain([PC_COLUMN]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &t.rows {
        for v in &row.values {
            write_cell(&mut out, v);
            out.push(',');
        }
        out.push_str(&row.pc.to_string());
        out.push('\n');
    }
    out
}

fn read_file(path: &Path) -> Result<String, StorageError> {
    fs::read_to_string(path).map_err(|source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a VDB directory, validating every row.
pub fn load_vdb(dir: &Path) -> Result<VdbInstance, StorageError> {
    let schema = parse_schema(&read_file(&dir.join(SCHEMA_FILE))?)?;
    let mut db = VdbInstance::empty(schema);
    let rels: Vec<VRelSchema> = db.schema.relations().cloned().collect();
    for rel in rels {
        let text = read_file(&dir.join(format!("{}.csv", rel.name)))?;
        let rows = read_table_csv(&text, &rel)?;
        for (i, row) in rows.iter().enumerate() {
            validate_row(&db.schema, &rel.name, row, i + 1)?;
        }
        db.tables
            .get_mut(&rel.name)
            .expect("table per relation")
            .rows = rows;
    }
    Ok(db)
}

pub fn save_vdb(db: &VdbInstance, dir: &Path) -> Result<(), StorageError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StorageError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let schema_path = dir.join(SCHEMA_FILE);
    fs::write(&schema_path, db.schema.to_string()).map_err(io(&schema_path))?;
    for (name, table) in &db.tables {
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, write_table_csv(table)).map_err(io(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel() -> VRelSchema {
        let s = parse_schema("features A\nrelation r (a int, b text, c bool # A)\n").unwrap();
        s.relation("r").unwrap().clone()
    }

    #[test]
    fn distinguishes_null_from_empty_text() {
        let rows = read_table_csv("a,b,c,presCond\n1,\"\",,A\n2,,true,\n", &rel()).unwrap();
        assert_eq!(rows[0].values[1], Value::Text(String::new()));
        assert_eq!(rows[1].values[1], Value::Null);
        assert_eq!(rows[0].values[2], Value::Null);
        assert_eq!(rows[1].pc, FeatureExpr::TRUE);
    }

    #[test]
    fn quoted_fields_with_commas_and_quotes() {
        let rows =
            read_table_csv("a,b,c,presCond\n1,\"x, \"\"y\"\"\",false,true\n", &rel()).unwrap();
        assert_eq!(rows[0].values[1], Value::Text("x, \"y\"".into()));
    }

    #[test]
    fn arity_and_header_errors() {
        let err = read_table_csv("a,b,c,presCond\n1,\"x\",true\n", &rel()).unwrap_err();
        assert!(matches!(err, StorageError::ArityMismatch { line: 2, .. }));
        let err = read_table_csv("a,c,b,presCond\n", &rel()).unwrap_err();
        assert!(matches!(err, StorageError::Csv { .. }));
        let err = read_table_csv("a,b,c,presCond\nx,\"x\",true,A\n", &rel()).unwrap_err();
        assert!(matches!(err, StorageError::Csv { .. }));
        assert!(read_table_csv("", &rel()).unwrap().is_empty());
    }

    #[test]
    fn write_then_read() {
        let r = rel();
        let mut t = VTable::new(r.clone());
        t.rows.push(VTuple {
            values: vec![
                Value::Int(-4),
                Value::Text("it's \"q\"".into()),
                Value::Null,
            ],
            pc: parse_fexp("A | !A & A").unwrap(),
        });
        let text = write_table_csv(&t);
        let back = read_table_csv(&text, &r).unwrap();
        assert_eq!(back, t.rows);
    }
}
