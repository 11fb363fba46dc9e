//! Line-oriented text form of a v-table:
//!
//! ```text
//! relation result (a1 int, a2 int # f1 & f2) # f1 | f2
//! 1, NULL # !f1 & f2
//! 2, 5 # f1 & f2
//! ```

use std::fmt::Write as _;

use super::{StorageError, VTable, VTuple, Value};
use crate::catalog::parse_relation;
use crate::featexpr::parse_fexp_from;
use crate::lexer::{Cursor, SyntaxError, Tok};

pub fn print_vtable(t: &VTable) -> String {
    let mut out = String::new();
    writeln!(out, "relation {}", t.schema).expect("write to string");
    for row in &t.rows {
        let cells: Vec<String> = row.values.iter().map(Value::to_string).collect();
        if cells.is_empty() {
            writeln!(out, "# {}", row.pc)
        } else {
            writeln!(out, "{} # {}", cells.join(", "), row.pc)
        }
        .expect("write to string");
    }
    out
}

fn parse_value(cur: &mut Cursor) -> Result<Value, SyntaxError> {
    let v = match cur.peek() {
        Some(Tok::Int(i)) => Value::Int(*i),
        Some(Tok::Str(s)) => Value::Text(s.clone()),
        Some(Tok::Ident(s)) if s == "true" => Value::Bool(true),
        Some(Tok::Ident(s)) if s == "false" => Value::Bool(false),
        Some(Tok::Ident(s)) if s == "NULL" => Value::Null,
        _ => return Err(cur.unexpected("a value")),
    };
    cur.bump();
    Ok(v)
}

/// Parses the output of [`print_vtable`]. Cell types are checked against the
/// header.
pub fn parse_vtable(text: &str) -> Result<VTable, StorageError> {
    let mut cur = Cursor::new(text)?;
    cur.expect_keyword("relation")?;
    let schema = parse_relation(&mut cur)?;
    let types: Vec<_> = schema.attrs.values().map(|a| a.atype).collect();
    let mut table = VTable::new(schema);
    while !cur.at_end() {
        let offset = cur.offset();
        let mut values = Vec::new();
        if cur.peek() != Some(&Tok::Hash) {
            loop {
                values.push(parse_value(&mut cur)?);
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        cur.expect(&Tok::Hash)?;
        let pc = parse_fexp_from(&mut cur)?;
        if values.len() != types.len() {
            return Err(SyntaxError::new(
                offset,
                format!("expected {} values, found {}", types.len(), values.len()),
            )
            .into());
        }
        for (v, t) in values.iter().zip(&types) {
            if v.atype().is_some_and(|vt| vt != *t) {
                return Err(
                    SyntaxError::new(offset, format!("value {v} is not of type {t}")).into(),
                );
            }
        }
        table.rows.push(VTuple { values, pc });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featexpr::parse_fexp;

    #[test]
    fn round_trips() {
        let text = "relation result (a1 int, a2 text # f1 & f2, a3 bool # f2) # f1 | f2\n\
                    1, NULL, true # !f1 & f2\n\
                    2, 'it''s', NULL # f1 & f2\n";
        let t = parse_vtable(text).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].values[1], Value::Text("it's".into()));
        assert_eq!(t.rows[0].pc, parse_fexp("!f1 & f2").unwrap());
        assert_eq!(print_vtable(&t), text);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_vtable("relation r (a int)\n1, 2 # true\n").is_err());
        assert!(parse_vtable("relation r (a int)\n'x' # true\n").is_err());
        assert!(parse_vtable("relation r (a int)\n1\n").is_err());
    }
}
