//! Text formats for databases, queries, DED programs and bound functions.
//!
//! Facts: `R(a, b).` one per statement. Queries:
//! `exists X,Y: R(X,Y) | exists W: S(W)` with `,` for conjunction and `|`
//! for disjunction. Rules: `P(X) -> Q(X) | S(X).` with `false` for an
//! empty head and `=` allowed in heads only. Identifiers starting with a
//! lowercase letter are constants, uppercase are variables, and a leading
//! underscore marks a labelled null. `#` comments to end of line.

use std::fmt::Write as _;

use itertools::Itertools;
use thiserror::Error;

use crate::core::{
    Atom, BoundFunction, CoreError, Cq, Database, Ded, HeadAtom, HeadDisjunct, Instance, Name,
    Term, Ucq,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceLocation {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{at}: syntax error: {message}")]
    Syntax { at: SourceLocation, message: String },
    #[error("{at}: variable {name} in a fact")]
    VariableInFact { at: SourceLocation, name: Name },
    #[error("{at}: null {name} not allowed in a database")]
    NullInDatabase { at: SourceLocation, name: Name },
    #[error("{at}: relation {relation} used with arity {found}, expected {expected}")]
    ArityMismatch {
        at: SourceLocation,
        relation: Name,
        expected: usize,
        found: usize,
    },
    #[error("{at}: free variable {name} (boolean queries only)")]
    FreeVariable { at: SourceLocation, name: Name },
    #[error("{at}: empty conjunct")]
    EmptyConjunct { at: SourceLocation },
    #[error("{at}: equality not allowed in a rule body")]
    EqualityInBody { at: SourceLocation },
    #[error("{at}: declared existential {name} also occurs in the rule body")]
    FrontierViolation { at: SourceLocation, name: Name },
    #[error("{at}: invalid bound function: {source}")]
    BadBound {
        at: SourceLocation,
        source: CoreError,
    },
    #[error("invalid value: {0}")]
    Invalid(#[from] CoreError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Pipe,
    Colon,
    Arrow,
    Equals,
    Semicolon,
    Number(usize),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    at: SourceLocation,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        while let Some(&c) = self.chars.peek() {
            let at = SourceLocation {
                line: self.line,
                column: self.column,
            };
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '#' => {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '(' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::LParen, at });
                }
                ')' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::RParen, at });
                }
                ',' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Comma, at });
                }
                '.' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Dot, at });
                }
                '|' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Pipe, at });
                }
                ':' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Colon, at });
                }
                ';' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Semicolon, at });
                }
                '=' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Equals, at });
                }
                '-' => {
                    self.bump();
                    match self.chars.peek() {
                        Some('>') => {
                            self.bump();
                            out.push(Spanned { tok: Tok::Arrow, at });
                        }
                        _ => {
                            return Err(ParseError::Syntax {
                                at,
                                message: "expected '->'".into(),
                            })
                        }
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut n = 0usize;
                    while let Some(&c) = self.chars.peek() {
                        if let Some(d) = c.to_digit(10) {
                            n = n * 10 + d as usize;
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    out.push(Spanned { tok: Tok::Number(n), at });
                }
                c if c.is_alphanumeric() || c == '_' || c == '\'' || c == '?' => {
                    let mut s = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_alphanumeric() || c == '_' || c == '\'' || c == '?' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    out.push(Spanned { tok: Tok::Ident(s), at });
                }
                other => {
                    return Err(ParseError::Syntax {
                        at,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: Lexer::new(text).tokens()?,
            pos: 0,
        })
    }

    fn at(&self) -> SourceLocation {
        self.toks
            .get(self.pos)
            .map(|s| s.at)
            .or_else(|| self.toks.last().map(|s| s.at))
            .unwrap_or(SourceLocation { line: 1, column: 1 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let at = self.at();
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                at,
                message: format!("expected {what}"),
            })
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, SourceLocation), ParseError> {
        let at = self.at();
        match self.next() {
            Some(Tok::Ident(s)) => Ok((s, at)),
            _ => Err(ParseError::Syntax {
                at,
                message: format!("expected {what}"),
            }),
        }
    }

    fn term(&mut self) -> Result<(Term, SourceLocation), ParseError> {
        let (name, at) = self.ident("a term")?;
        Ok((classify(&name), at))
    }

    /// `R(t1, ..., tk)`
    fn atom(&mut self) -> Result<(Atom, SourceLocation), ParseError> {
        let (symbol, at) = self.ident("a relation name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        loop {
            let (t, _) = self.term()?;
            args.push(t);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen, "')'")?;
        Ok((Atom::new(symbol, args), at))
    }
}

fn classify(name: &str) -> Term {
    let mut chars = name.chars();
    match chars.next() {
        Some('_') => Term::Null(name.trim_start_matches('_').to_string()),
        Some(c) if c.is_uppercase() => Term::Var(name.to_string()),
        _ => Term::Const(name.to_string()),
    }
}

/// Parse an instance: facts terminated by `.`, nulls permitted,
/// duplicates deduplicated.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut p = Parser::new(text)?;
    let mut instance = Instance::new();
    let mut arities: std::collections::BTreeMap<Name, usize> = Default::default();
    while p.peek().is_some() {
        let (fact, at) = p.atom()?;
        p.expect(Tok::Dot, "'.' after fact")?;
        if let Some(Term::Var(name)) = fact.args.iter().find(|t| t.is_var()) {
            return Err(ParseError::VariableInFact {
                at,
                name: name.clone(),
            });
        }
        if let Some(&expected) = arities.get(&fact.symbol) {
            if expected != fact.args.len() {
                return Err(ParseError::ArityMismatch {
                    at,
                    relation: fact.symbol.clone(),
                    expected,
                    found: fact.args.len(),
                });
            }
        } else {
            arities.insert(fact.symbol.clone(), fact.args.len());
        }
        instance.insert(fact)?;
    }
    Ok(instance)
}

/// Parse a database: like an instance but nulls are rejected.
pub fn parse_database(text: &str) -> Result<Database, ParseError> {
    let mut p = Parser::new(text)?;
    let mut instance = Instance::new();
    let mut arities: std::collections::BTreeMap<Name, usize> = Default::default();
    while p.peek().is_some() {
        let (fact, at) = p.atom()?;
        p.expect(Tok::Dot, "'.' after fact")?;
        for t in &fact.args {
            match t {
                Term::Var(name) => {
                    return Err(ParseError::VariableInFact {
                        at,
                        name: name.clone(),
                    })
                }
                Term::Null(name) => {
                    return Err(ParseError::NullInDatabase {
                        at,
                        name: name.clone(),
                    })
                }
                Term::Const(_) => {}
            }
        }
        if let Some(&expected) = arities.get(&fact.symbol) {
            if expected != fact.args.len() {
                return Err(ParseError::ArityMismatch {
                    at,
                    relation: fact.symbol.clone(),
                    expected,
                    found: fact.args.len(),
                });
            }
        } else {
            arities.insert(fact.symbol.clone(), fact.args.len());
        }
        instance.insert(fact)?;
    }
    Ok(Database::new(instance)?)
}

/// Parse a boolean UCQ in disjunction-of-CQs form.
pub fn parse_query(text: &str) -> Result<Ucq, ParseError> {
    let mut p = Parser::new(text)?;
    let mut disjuncts = Vec::new();
    loop {
        disjuncts.push(parse_cq(&mut p)?);
        if !p.eat(&Tok::Pipe) {
            break;
        }
    }
    if let Some(_) = p.peek() {
        return Err(ParseError::Syntax {
            at: p.at(),
            message: "trailing input after query".into(),
        });
    }
    Ok(Ucq::new(disjuncts)?)
}

fn parse_cq(p: &mut Parser) -> Result<Cq, ParseError> {
    let start = p.at();
    let mut declared: Vec<Name> = Vec::new();
    if let Some(Tok::Ident(s)) = p.peek() {
        if s == "exists" {
            p.next();
            loop {
                let (name, _) = p.ident("a variable")?;
                declared.push(name);
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
            p.expect(Tok::Colon, "':' after exists list")?;
        }
    }
    let mut atoms = Vec::new();
    loop {
        if matches!(p.peek(), None | Some(Tok::Pipe)) {
            break;
        }
        let (atom, at) = p.atom()?;
        // Declared names are variables regardless of capitalization.
        let atom = Atom::new(
            atom.symbol,
            atom.args
                .into_iter()
                .map(|t| match t {
                    Term::Const(n) if declared.contains(&n) => Term::Var(n),
                    other => other,
                })
                .collect(),
        );
        for t in &atom.args {
            if let Term::Var(name) = t {
                if !declared.contains(name) {
                    return Err(ParseError::FreeVariable {
                        at,
                        name: name.clone(),
                    });
                }
            }
        }
        atoms.push(atom);
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    if atoms.is_empty() {
        return Err(ParseError::EmptyConjunct { at: start });
    }
    Ok(Cq::new(atoms)?)
}

/// Parse a DED program: one rule per `.`-terminated statement.
pub fn parse_program(text: &str) -> Result<Vec<Ded>, ParseError> {
    let mut p = Parser::new(text)?;
    let mut rules = Vec::new();
    while p.peek().is_some() {
        rules.push(parse_rule(&mut p)?);
    }
    Ok(rules)
}

fn parse_rule(p: &mut Parser) -> Result<Ded, ParseError> {
    let mut body = Vec::new();
    loop {
        let at = p.at();
        let save = p.pos;
        if p.ident("an atom").is_ok() && matches!(p.peek(), Some(Tok::Equals)) {
            return Err(ParseError::EqualityInBody { at });
        }
        p.pos = save;
        let (atom, _) = p.atom()?;
        body.push(atom);
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.expect(Tok::Arrow, "'->'")?;
    let body_vars: std::collections::BTreeSet<&Name> =
        body.iter().flat_map(|a| a.vars()).collect();
    let mut heads = Vec::new();
    if let Some(Tok::Ident(s)) = p.peek() {
        if s == "false" {
            p.next();
            p.expect(Tok::Dot, "'.' after rule")?;
            return Ok(Ded { body, heads });
        }
    }
    loop {
        heads.push(parse_head_disjunct(p, &body_vars)?);
        if !p.eat(&Tok::Pipe) {
            break;
        }
    }
    p.expect(Tok::Dot, "'.' after rule")?;
    Ok(Ded { body, heads })
}

fn parse_head_disjunct(
    p: &mut Parser,
    body_vars: &std::collections::BTreeSet<&Name>,
) -> Result<HeadDisjunct, ParseError> {
    // Optional explicit `exists Z1,Z2:` prefix; any declared variable
    // occurring in the body is a frontier violation.
    let mut declared: Vec<Name> = Vec::new();
    if let Some(Tok::Ident(s)) = p.peek() {
        if s == "exists" {
            p.next();
            loop {
                let (name, at) = p.ident("a variable")?;
                if body_vars.contains(&name) {
                    return Err(ParseError::FrontierViolation { at, name });
                }
                declared.push(name);
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
            p.expect(Tok::Colon, "':' after exists list")?;
        }
    }
    let promote = |t: Term| match t {
        Term::Const(n) if declared.contains(&n) => Term::Var(n),
        other => other,
    };
    let mut atoms = Vec::new();
    loop {
        // Either `t1 = t2` or a relational atom.
        let save = p.pos;
        let (first, _) = p.ident("an atom or term")?;
        if p.eat(&Tok::Equals) {
            let (rhs, _) = p.term()?;
            atoms.push(HeadAtom::Eq(promote(classify(&first)), promote(rhs)));
        } else {
            p.pos = save;
            let (atom, _) = p.atom()?;
            atoms.push(HeadAtom::Rel(Atom::new(
                atom.symbol,
                atom.args.into_iter().map(&promote).collect(),
            )));
        }
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    Ok(HeadDisjunct { atoms })
}

/// Parse a bound function: `affine a b` or `table n0 n1 ... ; affine a b`.
pub fn parse_bound(text: &str) -> Result<BoundFunction, ParseError> {
    let mut p = Parser::new(text)?;
    let at = p.at();
    let (kw, _) = p.ident("'affine' or 'table'")?;
    let build = |table: Vec<usize>, a: usize, b: usize| {
        BoundFunction::with_table(table, a, b)
            .map_err(|source| ParseError::BadBound { at, source })
    };
    match kw.as_str() {
        "affine" => {
            let a = number(&mut p)?;
            let b = number(&mut p)?;
            end(&mut p)?;
            build(Vec::new(), a, b)
        }
        "table" => {
            let mut table = Vec::new();
            while let Some(Tok::Number(_)) = p.peek() {
                table.push(number(&mut p)?);
            }
            p.expect(Tok::Semicolon, "';' before affine tail")?;
            let (kw2, _) = p.ident("'affine'")?;
            if kw2 != "affine" {
                return Err(ParseError::Syntax {
                    at: p.at(),
                    message: "expected 'affine'".into(),
                });
            }
            let a = number(&mut p)?;
            let b = number(&mut p)?;
            end(&mut p)?;
            build(table, a, b)
        }
        other => Err(ParseError::Syntax {
            at,
            message: format!("expected 'affine' or 'table', found {other:?}"),
        }),
    }
}

fn number(p: &mut Parser) -> Result<usize, ParseError> {
    let at = p.at();
    match p.next() {
        Some(Tok::Number(n)) => Ok(n),
        _ => Err(ParseError::Syntax {
            at,
            message: "expected a number".into(),
        }),
    }
}

fn end(p: &mut Parser) -> Result<(), ParseError> {
    if p.peek().is_some() {
        return Err(ParseError::Syntax {
            at: p.at(),
            message: "trailing input".into(),
        });
    }
    Ok(())
}

/// Canonical serialization of a UCQ: variables as v0, v1, ... in
/// first-occurrence order, disjuncts and atoms sorted.
pub fn serialize_query(q: &Ucq) -> String {
    let canonical = q.canonical();
    canonical
        .disjuncts()
        .iter()
        .map(|d| {
            let vars = d.vars();
            let mut s = String::new();
            if !vars.is_empty() {
                let _ = write!(s, "exists {}: ", vars.iter().join(","));
            }
            let _ = write!(s, "{}", d.atoms().iter().join(", "));
            s
        })
        .join(" | ")
}

pub fn serialize_instance(i: &Instance) -> String {
    i.to_string()
}

pub fn serialize_database(d: &Database) -> String {
    d.to_string()
}

pub fn serialize_program(rules: &[Ded]) -> String {
    let mut out = String::new();
    for r in rules {
        let _ = writeln!(out, "{r}");
    }
    out
}

pub fn serialize_bound(b: &BoundFunction) -> String {
    b.to_string()
}

/// Multi-instance bundle with `--- instance k ---` separators.
pub fn serialize_bundle(instances: &[Instance]) -> String {
    let mut out = String::new();
    for (k, i) in instances.iter().enumerate() {
        let _ = writeln!(out, "--- instance {k} ---");
        out.push_str(&i.to_string());
    }
    out
}

pub fn parse_bundle(text: &str) -> Result<Vec<Instance>, ParseError> {
    let mut sections: Vec<String> = Vec::new();
    for line in text.lines() {
        if line.trim_start().starts_with("---") {
            sections.push(String::new());
        } else if let Some(cur) = sections.last_mut() {
            cur.push_str(line);
            cur.push('\n');
        } else if !line.trim().is_empty() {
            sections.push(line.to_string() + "\n");
        }
    }
    sections.iter().map(|s| parse_instance(s)).collect()
}
