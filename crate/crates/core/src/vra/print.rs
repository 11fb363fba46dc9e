use std::fmt;

use super::{VCondition, VQuery, KEYWORDS};

fn level(c: &VCondition) -> u8 {
    match c {
        VCondition::Or(..) => 0,
        VCondition::And(..) => 1,
        _ => 2,
    }
}

fn write_cond(f: &mut fmt::Formatter<'_>, c: &VCondition, required: u8) -> fmt::Result {
    let paren = level(c) < required;
    if paren {
        f.write_str("(")?;
    }
    match c {
        VCondition::Lit(b) => write!(f, "{b}")?,
        VCondition::CmpConst(a, op, v) => write!(f, "{a} {} {v}", op.symbol())?,
        VCondition::CmpAttr(a, op, b) => write!(f, "{a} {} {b}", op.symbol())?,
        VCondition::Not(x) => {
            f.write_str("!")?;
            if matches!(**x, VCondition::CmpConst(..) | VCondition::CmpAttr(..)) {
                write!(f, "({x})")?;
            } else {
                write_cond(f, x, 2)?;
            }
        }
        VCondition::And(a, b) => {
            write_cond(f, a, 1)?;
            f.write_str(" & ")?;
            write_cond(f, b, 2)?;
        }
        VCondition::Or(a, b) => {
            write_cond(f, a, 0)?;
            f.write_str(" | ")?;
            write_cond(f, b, 1)?;
        }
        VCondition::Choice(e, a, b) => write!(f, "CHC {e} ({a}) ({b})")?,
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for VCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_cond(f, self, 0)
    }
}

impl fmt::Display for VQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VQuery::Relation(r) if KEYWORDS.contains(&r.as_str()) => write!(f, "rel {r}"),
            VQuery::Relation(r) => f.write_str(r),
            VQuery::Select(c, q) => write!(f, "sel ({c}) {q}"),
            VQuery::Project(attrs, q) => {
                f.write_str("proj [")?;
                for (i, e) in attrs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", e.value)?;
                    if !e.pc.is_true() {
                        write!(f, " # {}", e.pc)?;
                    }
                }
                write!(f, "] {q}")
            }
            VQuery::Choice(e, a, b) => write!(f, "choice {e} {{ {a} }} {{ {b} }}"),
            VQuery::Join(c, a, b) => write!(f, "join ({c}) {a} {b}"),
            VQuery::Product(a, b) => write!(f, "prod {a} {b}"),
            VQuery::SetOp(k, a, b) => write!(f, "{} {a} {b}", k.keyword()),
            VQuery::Empty => f.write_str("empty"),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::vra::{parse_condition, parse_query};

    #[test]
    fn prints_canonical_text() {
        for text in [
            "proj [a1, a2 # f1 & f2, a3 # f2] r",
            "choice V4 { proj [empno, name] empbio } { empty }",
            "sel (CHC edu (std = true) (true) & !(a != 'x')) empacct",
            "join (r.a = s.b | a < 3) r s",
            "diff (union r s) t",
            "rel union",
        ] {
            let q = parse_query(text).unwrap();
            let printed = q.to_string();
            assert_eq!(parse_query(&printed).unwrap(), q, "{printed}");
        }
        assert_eq!(
            parse_query("diff (union r s) t").unwrap().to_string(),
            "diff union r s t"
        );
        let c = parse_condition("(a = 1 | b = 2) & !!c = 3").unwrap();
        assert_eq!(c.to_string(), "(a = 1 | b = 2) & !!(c = 3)");
    }
}
