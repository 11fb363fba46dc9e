//! A recognizer for the SELECT subset the generator emits.
//!
//! ```text
//! statement := [WITH cte {, cte}] query [;]
//! cte       := ident AS ( query )
//! query     := select {(UNION [ALL] | EXCEPT) select}
//! select    := SELECT [DISTINCT] items [FROM from] [WHERE cond]
//! items     := * | item {, item}
//! item      := operand [AS ident]
//! from      := source {CROSS JOIN source | JOIN source ON cond}
//! source    := ident | ( query ) AS ident
//! cond      := conj {OR conj} ; conj := neg {AND neg}
//! neg       := NOT neg | ( cond ) | TRUE | FALSE | operand cmp operand
//! operand   := ident [. ident] | number | string | NULL | TRUE | FALSE
//! ```
//!
//! Comment lines starting with `--` are skipped.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("SQL syntax error at token {pos}: {msg}")]
pub struct SqlSyntaxError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 12] = [
    "<>", "<=", ">=", "(", ")", ",", ";", "*", ".", "=", "<", ">",
];

const RESERVED: [&str; 20] = [
    "SELECT",
    "DISTINCT",
    "FROM",
    "WHERE",
    "AS",
    "UNION",
    "ALL",
    "EXCEPT",
    "WITH",
    "JOIN",
    "CROSS",
    "ON",
    "AND",
    "OR",
    "NOT",
    "TRUE",
    "FALSE",
    "NULL",
    "INTERSECT",
    "ORDER",
];

fn tokenize(text: &str) -> Result<Vec<Tok>, SqlSyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let err = |msg: String, pos| Err(SqlSyntaxError { pos, msg });
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Word(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit))
        {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Tok::Number(chars[start..i].iter().collect()));
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return err("unterminated string".into(), out.len()),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Tok::Str(s));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    out.push(Tok::Sym(s));
                    i += s.len();
                }
                None => return err(format!("unexpected character `{c}`"), out.len()),
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, SqlSyntaxError> {
        Err(SqlSyntaxError {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.toks.get(self.pos), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.peek_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn kw(&mut self, kw: &str) -> Result<(), SqlSyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(format!("expected {kw}"))
        }
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.toks.get(self.pos), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.peek_sym(s);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn sym(&mut self, s: &str) -> Result<(), SqlSyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.fail(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlSyntaxError> {
        match self.toks.get(self.pos) {
            Some(Tok::Word(w)) if !RESERVED.iter().any(|r| w.eq_ignore_ascii_case(r)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            _ => self.fail("expected identifier"),
        }
    }

    fn statement(&mut self) -> Result<Vec<Option<usize>>, SqlSyntaxError> {
        if self.eat_kw("WITH") {
            loop {
                self.ident()?;
                self.kw("AS")?;
                self.sym("(")?;
                self.query()?;
                self.sym(")")?;
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let widths = self.query()?;
        self.eat_sym(";");
        if self.pos != self.toks.len() {
            return self.fail("trailing input");
        }
        Ok(widths)
    }

    fn query(&mut self) -> Result<Vec<Option<usize>>, SqlSyntaxError> {
        let mut widths = vec![self.select()?];
        loop {
            if self.eat_kw("UNION") {
                self.eat_kw("ALL");
            } else if !self.eat_kw("EXCEPT") {
                break;
            }
            widths.push(self.select()?);
        }
        Ok(widths)
    }

    fn select(&mut self) -> Result<Option<usize>, SqlSyntaxError> {
        self.kw("SELECT")?;
        self.eat_kw("DISTINCT");
        let width = if self.eat_sym("*") {
            None
        } else {
            let mut n = 0;
            loop {
                self.operand()?;
                if self.eat_kw("AS") {
                    self.ident()?;
                }
                n += 1;
                if !self.eat_sym(",") {
                    break;
                }
            }
            Some(n)
        };
        if self.eat_kw("FROM") {
            self.source()?;
            loop {
                if self.eat_kw("CROSS") {
                    self.kw("JOIN")?;
                    self.source()?;
                } else if self.eat_kw("JOIN") {
                    self.source()?;
                    self.kw("ON")?;
                    self.cond()?;
                } else {
                    break;
                }
            }
        }
        if self.eat_kw("WHERE") {
            self.cond()?;
        }
        Ok(width)
    }

    fn source(&mut self) -> Result<(), SqlSyntaxError> {
        if self.eat_sym("(") {
            self.query()?;
            self.sym(")")?;
            self.kw("AS")?;
        }
        self.ident().map(drop)
    }

    fn cond(&mut self) -> Result<(), SqlSyntaxError> {
        self.conj()?;
        while self.eat_kw("OR") {
            self.conj()?;
        }
        Ok(())
    }

    fn conj(&mut self) -> Result<(), SqlSyntaxError> {
        self.neg()?;
        while self.eat_kw("AND") {
            self.neg()?;
        }
        Ok(())
    }

    fn neg(&mut self) -> Result<(), SqlSyntaxError> {
        if self.eat_kw("NOT") {
            return self.neg();
        }
        if self.eat_sym("(") {
            self.cond()?;
            return self.sym(")");
        }
        if (self.peek_kw("TRUE") || self.peek_kw("FALSE")) && !self.next_is_cmp(1) {
            self.pos += 1;
            return Ok(());
        }
        self.operand()?;
        match self.toks.get(self.pos) {
            Some(Tok::Sym("=" | "<>" | "<" | "<=" | ">" | ">=")) => self.pos += 1,
            _ => return self.fail("expected comparison"),
        }
        self.operand()
    }

    fn next_is_cmp(&self, ahead: usize) -> bool {
        matches!(
            self.toks.get(self.pos + ahead),
            Some(Tok::Sym("=" | "<>" | "<" | "<=" | ">" | ">="))
        )
    }

    fn operand(&mut self) -> Result<(), SqlSyntaxError> {
        if matches!(self.toks.get(self.pos), Some(Tok::Number(_) | Tok::Str(_))) {
            self.pos += 1;
            return Ok(());
        }
        match () {
            _ if self.eat_kw("NULL") || self.eat_kw("TRUE") || self.eat_kw("FALSE") => Ok(()),
            _ => {
                self.ident()?;
                if self.eat_sym(".") {
                    self.ident()?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `text` as one statement of the emitted subset. On success returns
/// the select-list width of each top-level set-operation branch (`None` for
/// `SELECT *`).
pub fn check_sql(text: &str) -> Result<Vec<Option<usize>>, SqlSyntaxError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    p.statement()
}
