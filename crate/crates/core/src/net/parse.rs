//! Line-oriented net files.
//!
//! ```text
//! # comment
//! places: p q r                      # optional; else order of first use
//! init: p=2                          # unlisted places hold 0 tokens
//! kinetics: mass-action              # or `constant` (the default)
//! t1: 2p -> p + q + r @ 1/2
//! p <-> 2*q @ 1, 0.25                # forward and backward rates
//! 0 -> p @ 3                         # `0` is the empty complex
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use num::Signed;
use thiserror::Error;

use super::{Bag, Count, Kinetics, Marking, NetError, Normalized, PetriNet, Transition};
use crate::rational::{parse_rational, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    NonPositiveRate(String),
    UnknownPlace(String),
    DuplicateTransitionId(String),
    DuplicatePlace(String),
    Invalid(NetError),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::NonPositiveRate(r) => write!(f, "rate {r} must be positive"),
            ParseErrorKind::UnknownPlace(p) => write!(f, "unknown place `{p}`"),
            ParseErrorKind::DuplicateTransitionId(t) => write!(f, "duplicate transition id `{t}`"),
            ParseErrorKind::DuplicatePlace(p) => write!(f, "place `{p}` listed twice"),
            ParseErrorKind::Invalid(e) => write!(f, "{e}"),
        }
    }
}

/// Parses a net file into a normalized net plus normalization warnings.
pub fn parse_net(text: &str) -> Result<Normalized, ParseError> {
    Parser::default().run(text)
}

struct Term {
    items: Vec<(Count, String, usize)>,
}

struct Reaction {
    line: usize,
    id: Option<(String, usize)>,
    lhs: Term,
    rhs: Term,
    rates: Vec<Rational>,
}

#[derive(Default)]
struct Parser {
    declared: Option<Vec<String>>,
    init: Vec<(String, Count, usize, usize)>,
    kinetics: Option<Kinetics>,
    reactions: Vec<Reaction>,
}

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    err(line, col, ParseErrorKind::Syntax(msg.into()))
}

/// Character cursor over one line; columns are 1-based char positions.
struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(syntax(self.line, self.col(), format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> Option<(String, usize)> {
        self.skip_ws();
        let start = self.pos;
        let first = *self.chars.get(self.pos)?;
        if !(first.is_ascii_alphabetic() || first == '_') {
            return None;
        }
        self.pos += 1;
        while self
            .chars
            .get(self.pos)
            .is_some_and(|&c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '\''))
        {
            self.pos += 1;
        }
        Some((self.chars[start..self.pos].iter().collect(), start + 1))
    }

    fn integer(&mut self) -> Option<(Count, usize)> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().ok().map(|n| (n, start + 1))
    }

    /// Consumes up to (not including) the next `,` or end of line.
    fn word_until_comma(&mut self) -> (String, usize) {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|&c| c != ',') {
            self.pos += 1;
        }
        let w: String = self.chars[start..self.pos].iter().collect();
        (w.trim().to_string(), start + 1)
    }
}

impl Parser {
    fn run(mut self, text: &str) -> Result<Normalized, ParseError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            if body.trim().is_empty() {
                continue;
            }
            self.line(body, line)?;
        }
        self.build()
    }

    fn line(&mut self, body: &str, line: usize) -> Result<(), ParseError> {
        let mut c = Cursor::new(body, line);
        let save = c.pos;
        if let Some((word, col)) = c.ident() {
            if c.eat(":") {
                match word.as_str() {
                    "places" => return self.places_line(&mut c, col),
                    "init" => return self.init_line(&mut c),
                    "kinetics" => return self.kinetics_line(&mut c, col),
                    _ => return self.reaction(&mut c, Some((word, col))),
                }
            }
        }
        c.pos = save;
        self.reaction(&mut c, None)
    }

    fn places_line(&mut self, c: &mut Cursor, col: usize) -> Result<(), ParseError> {
        if self.declared.is_some() {
            return Err(syntax(c.line, col, "`places:` given twice"));
        }
        let mut names: Vec<String> = Vec::new();
        loop {
            c.eat(",");
            if c.at_end() {
                break;
            }
            let (name, at) = c
                .ident()
                .ok_or_else(|| syntax(c.line, c.col(), "expected a place name"))?;
            if names.contains(&name) {
                return Err(err(c.line, at, ParseErrorKind::DuplicatePlace(name)));
            }
            names.push(name);
        }
        self.declared = Some(names);
        Ok(())
    }

    fn init_line(&mut self, c: &mut Cursor) -> Result<(), ParseError> {
        loop {
            c.eat(",");
            if c.at_end() {
                return Ok(());
            }
            let (name, at) = c
                .ident()
                .ok_or_else(|| syntax(c.line, c.col(), "expected `place=count`"))?;
            c.expect("=")?;
            let (n, _) = c
                .integer()
                .ok_or_else(|| syntax(c.line, c.col(), "expected a non-negative integer"))?;
            if self.init.iter().any(|(p, ..)| *p == name) {
                return Err(syntax(c.line, at, format!("initial tokens of `{name}` given twice")));
            }
            self.init.push((name, n, c.line, at));
        }
    }

    fn kinetics_line(&mut self, c: &mut Cursor, col: usize) -> Result<(), ParseError> {
        if self.kinetics.is_some() {
            return Err(syntax(c.line, col, "`kinetics:` given twice"));
        }
        let at = c.col();
        let k = if c.eat("constant") {
            Kinetics::Constant
        } else if c.eat("mass-action") {
            Kinetics::MassAction
        } else {
            return Err(syntax(c.line, at, "expected `constant` or `mass-action`"));
        };
        if !c.at_end() {
            return Err(syntax(c.line, c.col(), "unexpected trailing input"));
        }
        self.kinetics = Some(k);
        Ok(())
    }

    /// `0`, or a sum of places with optional coefficients (`2p` or `2*p`).
    fn term(c: &mut Cursor) -> Result<Term, ParseError> {
        let mut items = Vec::new();
        loop {
            c.skip_ws();
            let at = c.col();
            let coeff = c.integer();
            let name = c.ident();
            match (coeff, name) {
                (Some((0, _)), None) if items.is_empty() => return Ok(Term { items }),
                (_, Some((name, col))) => {
                    let k = match coeff {
                        Some((0, kc)) => return Err(syntax(c.line, kc, "coefficients must be positive")),
                        Some((k, _)) => k,
                        None => 1,
                    };
                    items.push((k, name, col));
                }
                (Some((k, kc)), None) => {
                    if !c.eat("*") {
                        return Err(syntax(c.line, kc, format!("expected a place after {k}")));
                    }
                    let (name, col) = c
                        .ident()
                        .ok_or_else(|| syntax(c.line, c.col(), "expected a place name"))?;
                    if k == 0 {
                        return Err(syntax(c.line, kc, "coefficients must be positive"));
                    }
                    items.push((k, name, col));
                }
                (None, None) => return Err(syntax(c.line, at, "expected `0` or a place")),
            }
            if !c.eat("+") {
                return Ok(Term { items });
            }
        }
    }

    fn reaction(&mut self, c: &mut Cursor, id: Option<(String, usize)>) -> Result<(), ParseError> {
        let lhs = Self::term(c)?;
        let reversible = if c.eat("<->") {
            true
        } else if c.eat("->") {
            false
        } else {
            return Err(syntax(c.line, c.col(), "expected `->` or `<->`"));
        };
        let rhs = Self::term(c)?;
        c.expect("@")?;
        let mut rates = Vec::new();
        loop {
            let (word, at) = c.word_until_comma();
            if word.is_empty() {
                return Err(syntax(c.line, at, "expected a rate"));
            }
            let r = parse_rational(&word).ok_or_else(|| syntax(c.line, at, format!("`{word}` is not a rate")))?;
            if !r.is_positive() {
                return Err(err(c.line, at, ParseErrorKind::NonPositiveRate(word)));
            }
            rates.push(r);
            if !c.eat(",") {
                break;
            }
        }
        let wanted = if reversible { 2 } else { 1 };
        if rates.len() != wanted {
            return Err(syntax(
                c.line,
                c.col(),
                format!("expected {wanted} rate(s), found {}", rates.len()),
            ));
        }
        self.reactions.push(Reaction {
            line: c.line,
            id,
            lhs,
            rhs,
            rates,
        });
        Ok(())
    }

    fn build(self) -> Result<Normalized, ParseError> {
        // Place order: declared, else first use in reactions, then init-only places.
        let fixed = self.declared.is_some();
        let mut places = self.declared.clone().unwrap_or_default();
        let mut index: HashMap<String, usize> = places.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        for r in &self.reactions {
            for (_, name, col) in r.lhs.items.iter().chain(&r.rhs.items) {
                if !index.contains_key(name) {
                    if fixed {
                        return Err(err(r.line, *col, ParseErrorKind::UnknownPlace(name.clone())));
                    }
                    index.insert(name.clone(), places.len());
                    places.push(name.clone());
                }
            }
        }
        for (name, _, line, col) in &self.init {
            if !index.contains_key(name) {
                if fixed {
                    return Err(err(*line, *col, ParseErrorKind::UnknownPlace(name.clone())));
                }
                index.insert(name.clone(), places.len());
                places.push(name.clone());
            }
        }

        let n = places.len();
        let mut initial = vec![0; n];
        for (name, k, ..) in &self.init {
            initial[index[name]] = *k;
        }
        let bag = |t: &Term| {
            let mut w = vec![0; n];
            for (k, name, _) in &t.items {
                w[index[name]] += k;
            }
            Bag::new(w)
        };

        // Explicit ids are reserved before auto ids are handed out.
        let mut taken: HashSet<String> = HashSet::new();
        for r in &self.reactions {
            if let Some((id, col)) = &r.id {
                let mut names = vec![id.clone()];
                if r.rates.len() == 2 {
                    names.push(format!("{id}_rev"));
                }
                for name in names {
                    if !taken.insert(name.clone()) {
                        return Err(err(r.line, *col, ParseErrorKind::DuplicateTransitionId(name)));
                    }
                }
            }
        }
        let mut next_auto = 1usize;
        let mut auto = |taken: &HashSet<String>| loop {
            let name = format!("t{next_auto}");
            next_auto += 1;
            if !taken.contains(&name) {
                return name;
            }
        };

        let mut transitions = Vec::new();
        for r in &self.reactions {
            let (input, output) = (bag(&r.lhs), bag(&r.rhs));
            let (fwd, bwd) = match &r.id {
                Some((id, _)) => (id.clone(), format!("{id}_rev")),
                None => {
                    let a = auto(&taken);
                    let b = if r.rates.len() == 2 { auto(&taken) } else { String::new() };
                    (a, b)
                }
            };
            transitions.push(Transition {
                id: fwd,
                input: input.clone(),
                output: output.clone(),
                rate: r.rates[0].clone(),
            });
            if r.rates.len() == 2 {
                transitions.push(Transition {
                    id: bwd,
                    input: output,
                    output: input,
                    rate: r.rates[1].clone(),
                });
            }
        }

        let kinetics = self.kinetics.unwrap_or_default();
        PetriNet::normalized(places, transitions, Marking::new(initial), kinetics).map_err(|e| {
            let line = self.reactions.first().map_or(1, |r| r.line);
            err(line, 1, ParseErrorKind::Invalid(e))
        })
    }
}
