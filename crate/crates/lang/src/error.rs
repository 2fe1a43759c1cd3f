use std::fmt;

use thiserror::Error;

/// A location in the source text. `line` and `column` are 1-based and count
/// characters; `offset` is a byte offset and may equal the text length (end of
/// input).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Position {
    pub offset: usize,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: unexpected character {found:?}")]
pub struct LexError {
    pub pos: Position,
    pub found: char,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{pos}: expected {expected}, found {found}")]
    Unexpected {
        pos: Position,
        expected: String,
        found: String,
    },
    #[error("{pos}: {message}")]
    Invalid { pos: Position, message: String },
}

impl ParseError {
    pub fn position(&self) -> Position {
        match self {
            ParseError::Lex(e) => e.pos,
            ParseError::Unexpected { pos, .. } | ParseError::Invalid { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("type mismatch in {context}: expected {expected}, found {found}")]
    Mismatch {
        context: String,
        expected: String,
        found: String,
    },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid with-clause on `{var}`: {reason}")]
    InvalidWithClause { var: String, reason: String },
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("program has no `main` task")]
    NoMain,
    #[error("task `main` must not take parameters")]
    MainHasParams,
    #[error("recursive task calls: {}", .0.join(" -> "))]
    Recursion(Vec<String>),
    #[error("event `{name}` used with conflicting parameter lists")]
    EventSignature { name: String },
}

/// Anything that stops a submission from compiling.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

impl From<LexError> for CompileError {
    fn from(e: LexError) -> Self {
        CompileError::Parse(ParseError::Lex(e))
    }
}

impl CompileError {
    pub fn position(&self) -> Option<Position> {
        match self {
            CompileError::Parse(p) => Some(p.position()),
            CompileError::Type(_) => None,
        }
    }

    pub fn is_recursion(&self) -> bool {
        matches!(self, CompileError::Type(TypeError::Recursion(_)))
    }
}
