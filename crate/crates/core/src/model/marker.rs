//! Environment-marker subset: the variables `extra`, `python_version`,
//! `sys_platform`, `os_name` with `==`, `!=`, `in`, `not in`, combined by
//! `and`/`or`. Anything outside the subset is a malformed requirement.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerVar {
    Extra,
    PythonVersion,
    SysPlatform,
    OsName,
}

impl MarkerVar {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "extra" => Some(MarkerVar::Extra),
            "python_version" => Some(MarkerVar::PythonVersion),
            "sys_platform" => Some(MarkerVar::SysPlatform),
            "os_name" => Some(MarkerVar::OsName),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            MarkerVar::Extra => "extra",
            MarkerVar::PythonVersion => "python_version",
            MarkerVar::SysPlatform => "sys_platform",
            MarkerVar::OsName => "os_name",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerOp {
    Eq,
    Ne,
    In,
    NotIn,
}

impl MarkerOp {
    fn as_str(self) -> &'static str {
        match self {
            MarkerOp::Eq => "==",
            MarkerOp::Ne => "!=",
            MarkerOp::In => "in",
            MarkerOp::NotIn => "not in",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerOperand {
    Var(MarkerVar),
    Literal(String),
}

impl fmt::Display for MarkerOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkerOperand::Var(v) => f.write_str(v.as_str()),
            MarkerOperand::Literal(s) => write!(f, "'{s}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerExpr {
    Or(Box<MarkerExpr>, Box<MarkerExpr>),
    And(Box<MarkerExpr>, Box<MarkerExpr>),
    Cmp { lhs: MarkerOperand, op: MarkerOp, rhs: MarkerOperand },
}

/// Values the marker variables take during evaluation. The extras set holds
/// the extras activated for the release whose requirement is being examined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerEnv {
    pub extras: BTreeSet<String>,
    pub python_version: String,
    pub sys_platform: String,
    pub os_name: String,
}

impl Default for MarkerEnv {
    fn default() -> Self {
        MarkerEnv {
            extras: BTreeSet::new(),
            python_version: "3.10".to_string(),
            sys_platform: "linux".to_string(),
            os_name: "posix".to_string(),
        }
    }
}

impl MarkerEnv {
    pub fn with_extras<I: IntoIterator<Item = String>>(mut self, extras: I) -> Self {
        self.extras = extras.into_iter().collect();
        self
    }
}

impl MarkerExpr {
    /// Evaluate under `env`; `extra == 'x'` holds iff `x` is an activated extra.
    pub fn eval(&self, env: &MarkerEnv) -> bool {
        match self {
            MarkerExpr::Or(a, b) => a.eval(env) || b.eval(env),
            MarkerExpr::And(a, b) => a.eval(env) && b.eval(env),
            MarkerExpr::Cmp { lhs, op, rhs } => {
                if let Some(res) = eval_extra(lhs, *op, rhs, env) {
                    return res;
                }
                let l = resolve(lhs, env);
                let r = resolve(rhs, env);
                match op {
                    MarkerOp::Eq => l == r,
                    MarkerOp::Ne => l != r,
                    MarkerOp::In => r.contains(&l),
                    MarkerOp::NotIn => !r.contains(&l),
                }
            }
        }
    }

    /// Whether the expression tests `extra` against the given name anywhere.
    pub fn mentions_extra(&self, name: &str) -> bool {
        match self {
            MarkerExpr::Or(a, b) | MarkerExpr::And(a, b) => {
                a.mentions_extra(name) || b.mentions_extra(name)
            }
            MarkerExpr::Cmp { lhs, rhs, .. } => {
                let one_is_extra = matches!(lhs, MarkerOperand::Var(MarkerVar::Extra))
                    || matches!(rhs, MarkerOperand::Var(MarkerVar::Extra));
                let lit = match (lhs, rhs) {
                    (MarkerOperand::Literal(s), _) | (_, MarkerOperand::Literal(s)) => s.as_str(),
                    _ => return false,
                };
                one_is_extra && lit == name
            }
        }
    }
}

fn eval_extra(lhs: &MarkerOperand, op: MarkerOp, rhs: &MarkerOperand, env: &MarkerEnv) -> Option<bool> {
    let lit = match (lhs, rhs) {
        (MarkerOperand::Var(MarkerVar::Extra), MarkerOperand::Literal(s)) => s,
        (MarkerOperand::Literal(s), MarkerOperand::Var(MarkerVar::Extra)) => s,
        _ => return None,
    };
    let member = env.extras.contains(lit.as_str());
    match op {
        MarkerOp::Eq | MarkerOp::In => Some(member),
        MarkerOp::Ne | MarkerOp::NotIn => Some(!member),
    }
}

fn resolve(operand: &MarkerOperand, env: &MarkerEnv) -> String {
    match operand {
        MarkerOperand::Literal(s) => s.clone(),
        MarkerOperand::Var(MarkerVar::PythonVersion) => env.python_version.clone(),
        MarkerOperand::Var(MarkerVar::SysPlatform) => env.sys_platform.clone(),
        MarkerOperand::Var(MarkerVar::OsName) => env.os_name.clone(),
        // `extra` compared against another variable; nothing sensible to say.
        MarkerOperand::Var(MarkerVar::Extra) => String::new(),
    }
}

impl fmt::Display for MarkerExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkerExpr::Or(a, b) => write!(f, "{a} or {b}"),
            MarkerExpr::And(a, b) => {
                let wrap = |e: &MarkerExpr| matches!(e, MarkerExpr::Or(..));
                if wrap(a) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " and ")?;
                if wrap(b) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            MarkerExpr::Cmp { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.as_str()),
        }
    }
}

struct Tokens<'a> {
    src: &'a str,
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Op(String),
    LParen,
    RParen,
}

impl<'a> Tokens<'a> {
    fn next_tok(&mut self) -> Option<Result<Tok, String>> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let c = bytes[self.pos];
        Some(match c {
            b'(' => {
                self.pos += 1;
                Ok(Tok::LParen)
            }
            b')' => {
                self.pos += 1;
                Ok(Tok::RParen)
            }
            b'\'' | b'"' => {
                let quote = c;
                let start = self.pos + 1;
                let mut end = start;
                while end < bytes.len() && bytes[end] != quote {
                    end += 1;
                }
                if end >= bytes.len() {
                    return Some(Err("unterminated string literal".to_string()));
                }
                self.pos = end + 1;
                Ok(Tok::Str(self.src[start..end].to_string()))
            }
            b'=' | b'!' | b'<' | b'>' | b'~' => {
                let start = self.pos;
                while self.pos < bytes.len() && matches!(bytes[self.pos], b'=' | b'!' | b'<' | b'>' | b'~') {
                    self.pos += 1;
                }
                Ok(Tok::Op(self.src[start..self.pos].to_string()))
            }
            _ => {
                let start = self.pos;
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_' || bytes[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Some(Err(format!("unexpected character {:?}", c as char)));
                }
                Ok(Tok::Word(self.src[start..self.pos].to_string()))
            }
        })
    }
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    raw: String,
}

impl Parser {
    fn err(&self, msg: &str) -> ModelError {
        ModelError::MalformedRequirement(self.raw.clone(), format!("marker: {msg}"))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn or_expr(&mut self) -> Result<MarkerExpr, ModelError> {
        let mut lhs = self.and_expr()?;
        while matches!(self.peek(), Some(Tok::Word(w)) if w == "or") {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = MarkerExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<MarkerExpr, ModelError> {
        let mut lhs = self.atom()?;
        while matches!(self.peek(), Some(Tok::Word(w)) if w == "and") {
            self.bump();
            let rhs = self.atom()?;
            lhs = MarkerExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<MarkerExpr, ModelError> {
        if matches!(self.peek(), Some(Tok::LParen)) {
            self.bump();
            let inner = self.or_expr()?;
            match self.bump() {
                Some(Tok::RParen) => return Ok(inner),
                _ => return Err(self.err("expected ')'")),
            }
        }
        let lhs = self.operand()?;
        let op = match self.bump() {
            Some(Tok::Op(o)) if o == "==" => MarkerOp::Eq,
            Some(Tok::Op(o)) if o == "!=" => MarkerOp::Ne,
            Some(Tok::Word(w)) if w == "in" => MarkerOp::In,
            Some(Tok::Word(w)) if w == "not" => match self.bump() {
                Some(Tok::Word(w2)) if w2 == "in" => MarkerOp::NotIn,
                _ => return Err(self.err("expected 'in' after 'not'")),
            },
            Some(Tok::Op(o)) => return Err(self.err(&format!("unsupported operator {o:?}"))),
            _ => return Err(self.err("expected comparison operator")),
        };
        let rhs = self.operand()?;
        Ok(MarkerExpr::Cmp { lhs, op, rhs })
    }

    fn operand(&mut self) -> Result<MarkerOperand, ModelError> {
        match self.bump() {
            Some(Tok::Str(s)) => Ok(MarkerOperand::Literal(s)),
            Some(Tok::Word(w)) => MarkerVar::from_name(&w)
                .map(MarkerOperand::Var)
                .ok_or_else(|| self.err(&format!("unsupported marker variable {w:?}"))),
            _ => Err(self.err("expected operand")),
        }
    }
}

pub(super) fn parse_marker(text: &str, raw_line: &str) -> Result<MarkerExpr, ModelError> {
    let mut lexer = Tokens { src: text, pos: 0 };
    let mut toks = Vec::new();
    while let Some(t) = lexer.next_tok() {
        toks.push(t.map_err(|m| {
            ModelError::MalformedRequirement(raw_line.to_string(), format!("marker: {m}"))
        })?);
    }
    let mut parser = Parser { toks, pos: 0, raw: raw_line.to_string() };
    let expr = parser.or_expr()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.err("trailing tokens"));
    }
    Ok(expr)
}
