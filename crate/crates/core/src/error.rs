use std::fmt;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("type error: {msg}")]
pub struct TypeError {
    pub msg: String,
}

impl TypeError {
    pub fn new(msg: impl Into<String>) -> Self {
        TypeError { msg: msg.into() }
    }
}

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

/// Positions never take part in AST equality.
impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A located message; rendered as `line:col: message` (the caller prefixes the file).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {msg}")]
pub struct ParseError {
    pub pos: Pos,
    pub msg: String,
}

impl ParseError {
    pub fn new(pos: Pos, msg: impl Into<String>) -> Self {
        ParseError { pos, msg: msg.into() }
    }
}

/// One validation finding.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: [{rule}] {msg}")]
pub struct Diagnostic {
    pub rule: &'static str,
    pub pos: Pos,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("unresolved reference `{0}`")]
    Unresolved(String),
    #[error("reference cycle through `{0}`")]
    Cycle(String),
    #[error("valuation does not assign variable `{0}`")]
    Unassigned(String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TranslateError {
    #[error("{pos}: {msg}")]
    At { pos: Pos, msg: String },
    #[error("missing dataset binding: {0}")]
    Binding(String),
    #[error("internal label collision on `{0}`")]
    LabelCollision(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GroundError {
    #[error("`{0}` declared twice (single-assignment violation)")]
    Duplicate(String),
    #[error("unresolved reference `{name}` in declaration of `{decl}`")]
    Unresolved { name: String, decl: String },
    #[error("in `{decl}`: {err}")]
    Type { decl: String, err: TypeError },
    #[error("index error in `{decl}`: {msg}")]
    Index { decl: String, msg: String },
    #[error("target pattern `{0}` matches no declaration")]
    NoTarget(String),
    #[error("target `{0}` is not an event")]
    NonBoolTarget(String),
    #[error("bad target pattern `{0}`")]
    Pattern(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum NetworkError {
    #[error("cannot fold: {0}")]
    Fold(String),
    #[error("unsupported node: {0}")]
    Unsupported(String),
    #[error("network dump line {line}: {msg}")]
    Dump { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CompileError {
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error("{vars} variables exceed the enumeration cap of {cap}")]
    CapExceeded { vars: usize, cap: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset: {0}")]
    Invalid(String),
    #[error("event of point `{point}`: {err}")]
    Event { point: String, err: ParseError },
}

/// Pipeline error tagged with the stage that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error("validate: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Validate(Vec<Diagnostic>),
    #[error("translate: {0}")]
    Translate(#[from] TranslateError),
    #[error("ground: {0}")]
    Ground(#[from] GroundError),
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
