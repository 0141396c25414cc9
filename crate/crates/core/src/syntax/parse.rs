//! Concrete syntax.
//!
//! ```text
//! formula := "tt" | "ff" | ident | "!" ident
//!          | ("and" | "or" | "nab") "{" [formula ("," formula)*] "}"
//!          | ("mu" | "nu") ident "." formula
//!          | ("box" | "dia") formula
//!          | "(" formula ")"
//! ```
//!
//! An identifier is a variable when bound by an enclosing `mu`/`nu` or
//! declared by the surrounding equation system, and a proposition otherwise.
//!
//! System files (`.mes`):
//!
//! ```text
//! system
//! init: x
//! x = or{p, nab{x}}
//! ```

use std::collections::BTreeSet;

use thiserror::Error;

use super::{EquationSystem, EquationalFormula, Formula, FormulaSet, SystemError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unbound variable `{name}`")]
    UnboundVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: negation applied to variable `{name}`")]
    NegatedVariable { line: usize, col: usize, name: String },
    #[error("line {line}: {source}")]
    System { line: usize, source: SystemError },
}

const KEYWORDS: &[&str] = &["tt", "ff", "and", "or", "nab", "mu", "nu", "box", "dia", "system", "init"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Dot,
    Bang,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize, col: usize) -> Self {
        Lexer { src, pos: 0, line, col }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    /// Next token with the position of its first character.
    fn next(&mut self) -> Result<(Tok, usize, usize), ParseError> {
        while let Some(c) = self.peek_char() {
            if c == '#' {
                while let Some(c) = self.peek_char() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
        let (line, col) = (self.line, self.col);
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, line, col));
        };
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '!' => Tok::Bang,
            c if is_ident_start(c) => {
                let mut s = String::from(c);
                while let Some(c) = self.peek_char().filter(|c| is_ident_char(*c)) {
                    s.push(c);
                    self.bump();
                }
                Tok::Ident(s)
            }
            c => return Err(ParseError::Syntax { line, col, msg: format!("unexpected character `{c}`") }),
        };
        Ok((tok, line, col))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    line: usize,
    col: usize,
    scope: Vec<String>,
    declared: &'a BTreeSet<String>,
}

impl<'a> Parser<'a> {
    fn new(
        src: &'a str,
        declared: &'a BTreeSet<String>,
        line: usize,
        col: usize,
    ) -> Result<Self, ParseError> {
        let mut lex = Lexer::new(src, line, col);
        let (tok, line, col) = lex.next()?;
        Ok(Parser { lex, tok, line, col, scope: Vec::new(), declared })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, line, col) = self.lex.next()?;
        self.tok = tok;
        self.line = line;
        self.col = col;
        Ok(())
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line: self.line, col: self.col, msg: msg.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == tok {
            self.advance()
        } else {
            self.error(format!("expected {what}, found {}", describe(&self.tok)))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance()?;
                Ok(s)
            }
            t => self.error(format!("expected identifier, found {}", describe(t))),
        }
    }

    fn is_var(&self, name: &str) -> bool {
        self.scope.iter().any(|s| s == name) || self.declared.contains(name)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let (line, col) = (self.line, self.col);
        match self.tok.clone() {
            Tok::Bang => {
                self.advance()?;
                let name = self.ident()?;
                if self.is_var(&name) {
                    return Err(ParseError::NegatedVariable { line, col, name });
                }
                Ok(Formula::NegProp(name))
            }
            Tok::LParen => {
                self.advance()?;
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "tt" => {
                    self.advance()?;
                    Ok(Formula::tt())
                }
                "ff" => {
                    self.advance()?;
                    Ok(Formula::ff())
                }
                "and" | "or" | "nab" => {
                    self.advance()?;
                    let members = self.set()?;
                    Ok(match kw.as_str() {
                        "and" => Formula::And(members),
                        "or" => Formula::Or(members),
                        _ => Formula::Nabla(members),
                    })
                }
                "mu" | "nu" => {
                    self.advance()?;
                    let x = self.ident()?;
                    self.expect(Tok::Dot, "`.` after bound variable")?;
                    self.scope.push(x.clone());
                    let body = self.formula();
                    self.scope.pop();
                    let body = Box::new(body?);
                    Ok(if kw == "mu" { Formula::Mu(x, body) } else { Formula::Nu(x, body) })
                }
                "box" | "dia" => {
                    self.advance()?;
                    let body = Box::new(self.formula()?);
                    Ok(if kw == "box" { Formula::Square(body) } else { Formula::Diamond(body) })
                }
                _ => {
                    let name = self.ident()?;
                    Ok(if self.is_var(&name) { Formula::Var(name) } else { Formula::Prop(name) })
                }
            },
            t => self.error(format!("expected formula, found {}", describe(&t))),
        }
    }

    fn set(&mut self) -> Result<FormulaSet, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = FormulaSet::new();
        if self.tok == Tok::RBrace {
            self.advance()?;
            return Ok(out);
        }
        loop {
            out.insert(self.formula()?);
            match self.tok {
                Tok::Comma => self.advance()?,
                Tok::RBrace => {
                    self.advance()?;
                    return Ok(out);
                }
                _ => return self.error(format!("expected `,` or `}}`, found {}", describe(&self.tok))),
            }
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.tok == Tok::Eof {
            Ok(())
        } else {
            self.error(format!("unexpected {} after formula", describe(&self.tok)))
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn parse_at(text: &str, declared: &BTreeSet<String>, line: usize, col: usize) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text, declared, line, col)?;
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

/// Parses a formula keeping `box`/`dia` nodes.
pub fn parse_formula_sugared(text: &str) -> Result<Formula, ParseError> {
    parse_at(text, &BTreeSet::new(), 1, 1)
}

/// Parses a formula and desugars `box`/`dia`.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    Ok(parse_formula_sugared(text)?.desugar())
}

/// Parses a formula in which the identifiers in `vars` denote variables.
pub fn parse_formula_in(text: &str, vars: &BTreeSet<String>) -> Result<Formula, ParseError> {
    Ok(parse_at(text, vars, 1, 1)?.desugar())
}

pub(crate) fn parse_formula_at(
    text: &str,
    vars: &BTreeSet<String>,
    line: usize,
    col: usize,
) -> Result<Formula, ParseError> {
    Ok(parse_at(text, vars, line, col)?.desugar())
}

/// Parses a `.mes` file.
pub fn parse_system(text: &str) -> Result<EquationalFormula, ParseError> {
    struct Eq<'a> {
        line: usize,
        col: usize,
        lhs: String,
        rhs: &'a str,
    }
    let mut saw_header = false;
    let mut init: Option<(usize, usize, String)> = None;
    let mut eqs: Vec<Eq> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if !saw_header {
            if trimmed != "system" {
                return Err(ParseError::Syntax {
                    line,
                    col: indent + 1,
                    msg: "expected `system` header".into(),
                });
            }
            saw_header = true;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("init") {
            if let Some(v) = rest.trim_start().strip_prefix(':') {
                if init.is_some() {
                    return Err(ParseError::Syntax {
                        line,
                        col: indent + 1,
                        msg: "duplicate `init` line".into(),
                    });
                }
                let v = v.trim();
                if v.is_empty() || !v.starts_with(is_ident_start) || !v.chars().all(is_ident_char) {
                    return Err(ParseError::Syntax {
                        line,
                        col: indent + 1,
                        msg: "expected `init: <var>`".into(),
                    });
                }
                init = Some((line, indent + 1, v.to_string()));
                continue;
            }
        }
        let Some(eq_pos) = content.find('=') else {
            return Err(ParseError::Syntax { line, col: indent + 1, msg: "expected `var = formula`".into() });
        };
        let lhs = content[..eq_pos].trim();
        if lhs.is_empty()
            || !lhs.starts_with(is_ident_start)
            || !lhs.chars().all(is_ident_char)
            || KEYWORDS.contains(&lhs)
        {
            return Err(ParseError::Syntax {
                line,
                col: indent + 1,
                msg: format!("invalid variable name `{lhs}`"),
            });
        }
        eqs.push(Eq { line, col: eq_pos + 2, lhs: lhs.to_string(), rhs: &content[eq_pos + 1..] });
    }
    if !saw_header {
        return Err(ParseError::Syntax { line: 1, col: 1, msg: "expected `system` header".into() });
    }
    let declared: BTreeSet<String> = eqs.iter().map(|e| e.lhs.clone()).collect();
    let mut bodies = Vec::with_capacity(eqs.len());
    for e in &eqs {
        let f = parse_formula_at(e.rhs, &declared, e.line, e.col)?;
        bodies.push((e.lhs.clone(), f, e.line));
    }
    let Some((iline, icol, init)) = init else {
        return Err(ParseError::Syntax { line: 1, col: 1, msg: "missing `init: <var>` line".into() });
    };
    if !declared.contains(&init) {
        return Err(ParseError::UnboundVariable { line: iline, col: icol, name: init });
    }
    let lines: Vec<(String, usize)> = bodies.iter().map(|(x, _, l)| (x.clone(), *l)).collect();
    let system =
        EquationSystem::new(bodies.into_iter().map(|(x, f, _)| (x, f)).collect()).map_err(|source| {
            let line = source
                .variable()
                .and_then(|v| lines.iter().find(|(x, _)| x == v).map(|(_, l)| *l))
                .unwrap_or(1);
            ParseError::System { line, source }
        })?;
    Ok(EquationalFormula::new(system, &init).expect("init checked above"))
}
