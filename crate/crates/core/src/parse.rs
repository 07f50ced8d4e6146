//! Parser for programs, queries, and single terms.
//!
//! Grammar (UTF-8 text, `%` starts a line comment):
//!
//! ```text
//! program  := (clause '.')*
//! clause   := term ( ':-' term (',' term)* )?
//! term     := atom | variable | integer | atom '(' term (',' term)* ')'
//! atom     := lowercase identifier
//! variable := uppercase or underscore identifier
//! ```
//!
//! Identifiers starting with an uppercase letter or underscore are
//! variables; everything else alphabetic is an atom. A bare `_` is an
//! anonymous variable: every occurrence is a distinct fresh variable.

use std::collections::HashMap;
use std::fmt;

use crate::term::{Clause, Program, Term, Var, VarGen};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    Turnstile,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Atom(a) => write!(f, "atom '{}'", a),
            Tok::Var(v) => write!(f, "variable '{}'", v),
            Tok::Int(n) => write!(f, "integer {}", n),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Comma => write!(f, "','"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Turnstile => write!(f, "':-'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek_byte()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek_byte() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(b) = self.peek_byte() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, usize, usize), ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let b = match self.peek_byte() {
            None => return Ok((Tok::Eof, line, col)),
            Some(b) => b,
        };
        match b {
            b'(' => {
                self.bump();
                Ok((Tok::LParen, line, col))
            }
            b')' => {
                self.bump();
                Ok((Tok::RParen, line, col))
            }
            b',' => {
                self.bump();
                Ok((Tok::Comma, line, col))
            }
            b'.' => {
                self.bump();
                Ok((Tok::Dot, line, col))
            }
            b':' => {
                self.bump();
                if self.peek_byte() == Some(b'-') {
                    self.bump();
                    Ok((Tok::Turnstile, line, col))
                } else {
                    Err(ParseError::new(line, col, "expected ':-'"))
                }
            }
            b'-' => {
                self.bump();
                match self.peek_byte() {
                    Some(d) if d.is_ascii_digit() => {
                        let n = self.lex_digits(line, col)?;
                        Ok((Tok::Int(-n), line, col))
                    }
                    _ => Err(ParseError::new(
                        line,
                        col,
                        "'-' is only allowed as an integer sign",
                    )),
                }
            }
            d if d.is_ascii_digit() => {
                let n = self.lex_digits(line, col)?;
                Ok((Tok::Int(n), line, col))
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while let Some(b) = self.peek_byte() {
                    if b.is_ascii_alphanumeric() || b == b'_' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let word = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("identifier bytes are ASCII")
                    .to_string();
                let first = word.as_bytes()[0];
                if first.is_ascii_uppercase() || first == b'_' {
                    Ok((Tok::Var(word), line, col))
                } else {
                    Ok((Tok::Atom(word), line, col))
                }
            }
            other => Err(ParseError::new(
                line,
                col,
                format!("unexpected character '{}'", other as char),
            )),
        }
    }

    fn lex_digits(&mut self, line: usize, col: usize) -> Result<i64, ParseError> {
        let start = self.pos;
        while let Some(b) = self.peek_byte() {
            if b.is_ascii_digit() {
                self.bump();
            } else {
                break;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("digit bytes are ASCII")
            .parse::<i64>()
            .map_err(|_| ParseError::new(line, col, "integer literal out of range"))
    }
}

struct Parser<'a, 'g> {
    lexer: Lexer<'a>,
    tok: Tok,
    line: usize,
    col: usize,
    gen: &'g mut VarGen,
    /// Maps source variable names to variables within the current scope
    /// (one clause, or one whole query / guess).
    scope: HashMap<String, Var>,
}

impl<'a, 'g> Parser<'a, 'g> {
    fn new(src: &'a str, gen: &'g mut VarGen) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (tok, line, col) = lexer.next_token()?;
        Ok(Parser { lexer, tok, line, col, gen, scope: HashMap::new() })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, line, col) = self.lexer.next_token()?;
        self.tok = tok;
        self.line = line;
        self.col = col;
        Ok(())
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.col, message)
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.tok == want {
            self.advance()
        } else {
            Err(self.error(format!("expected {}, found {}", want, self.tok)))
        }
    }

    fn var_for(&mut self, name: String) -> Var {
        if name == "_" {
            return self.gen.fresh("_");
        }
        if let Some(v) = self.scope.get(&name) {
            return v.clone();
        }
        let v = self.gen.fresh(&name);
        self.scope.insert(name, v.clone());
        v
    }

    fn parse_term(&mut self) -> Result<Term, ParseError> {
        match self.tok.clone() {
            Tok::Int(n) => {
                self.advance()?;
                Ok(Term::Int(n))
            }
            Tok::Var(name) => {
                self.advance()?;
                Ok(Term::Var(self.var_for(name)))
            }
            Tok::Atom(name) => {
                self.advance()?;
                if self.tok == Tok::LParen {
                    self.advance()?;
                    let mut args = vec![self.parse_term()?];
                    while self.tok == Tok::Comma {
                        self.advance()?;
                        args.push(self.parse_term()?);
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::Atom(name))
                }
            }
            other => Err(self.error(format!("expected a term, found {}", other))),
        }
    }

    fn check_callable(&self, t: &Term, role: &str) -> Result<(), ParseError> {
        match t {
            Term::Atom(_) | Term::Compound(_, _) => Ok(()),
            Term::Var(_) => Err(self.error(format!("{} cannot be a variable", role))),
            Term::Int(_) => Err(self.error(format!("{} cannot be an integer", role))),
        }
    }

    fn parse_clause(&mut self) -> Result<Clause, ParseError> {
        self.scope.clear();
        let head = self.parse_term()?;
        self.check_callable(&head, "clause head")?;
        let mut body = Vec::new();
        if self.tok == Tok::Turnstile {
            self.advance()?;
            if self.tok == Tok::Turnstile {
                return Err(self.error("duplicate ':-' operator in clause"));
            }
            loop {
                let g = self.parse_term()?;
                self.check_callable(&g, "body goal")?;
                body.push(g);
                if self.tok == Tok::Comma {
                    self.advance()?;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Clause::new(head, body))
    }

    fn parse_program(&mut self) -> Result<Vec<Clause>, ParseError> {
        let mut clauses = Vec::new();
        while self.tok != Tok::Eof {
            clauses.push(self.parse_clause()?);
        }
        Ok(clauses)
    }

    fn parse_goals(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut goals = Vec::new();
        loop {
            let g = self.parse_term()?;
            self.check_callable(&g, "query goal")?;
            goals.push(g);
            if self.tok == Tok::Comma {
                self.advance()?;
            } else {
                break;
            }
        }
        if self.tok == Tok::Dot {
            self.advance()?;
        }
        if self.tok != Tok::Eof {
            return Err(self.error(format!("expected end of query, found {}", self.tok)));
        }
        Ok(goals)
    }
}

/// Parses a program. Variable ids are drawn from `gen`; each clause gets its
/// own variable scope.
pub fn parse_program_with(text: &str, gen: &mut VarGen) -> Result<Program, ParseError> {
    let mut p = Parser::new(text, gen)?;
    Ok(Program::from_clauses(p.parse_program()?))
}

/// Parses a program with a private id generator. Fine for programs, whose
/// clauses are always renamed apart before use.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with(text, &mut VarGen::new())
}

/// Parses a comma-separated goal list (an optional trailing '.' is allowed).
/// Returns the goals plus the named query variables in first-occurrence
/// order; anonymous `_` variables are not reported.
pub fn parse_query(text: &str, gen: &mut VarGen) -> Result<(Vec<Term>, Vec<Var>), ParseError> {
    let mut p = Parser::new(text, gen)?;
    let goals = p.parse_goals()?;
    let mut vars = Vec::new();
    for g in &goals {
        for v in g.vars() {
            if v.name != "_" && !vars.iter().any(|u: &Var| u.id == v.id) {
                vars.push(v);
            }
        }
    }
    Ok((goals, vars))
}

/// Parses one term inside an existing variable scope, so that successive
/// calls (e.g. the goals of a serialized derivation) share variables by
/// name. Unknown names allocate fresh ids from `gen`.
pub fn parse_term_in_scope(
    text: &str,
    scope: &mut HashMap<String, Var>,
    gen: &mut VarGen,
) -> Result<Term, ParseError> {
    let mut p = Parser::new(text, gen)?;
    p.scope = std::mem::take(scope);
    let t = p.parse_term()?;
    if p.tok != Tok::Eof {
        return Err(p.error(format!("expected end of term, found {}", p.tok)));
    }
    *scope = std::mem::take(&mut p.scope);
    Ok(t)
}

impl Program {
    /// Convenience wrapper around [`parse_program`].
    pub fn parse(text: &str) -> Result<Program, ParseError> {
        parse_program(text)
    }
}
