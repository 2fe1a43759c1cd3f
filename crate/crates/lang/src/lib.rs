//! Front end for the Resh robot-orchestration language.
//!
//! The pipeline is `tokenize` -> `parse` -> `check`. `check` runs the
//! recursion ban and macro-expands task calls, so its output is a closed
//! [`TypedProgram`] whose entry body contains no `Call` nodes.

pub mod ast;
pub mod error;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod types;

pub use ast::{
    ActionDecl, AssignMode, Declaration, Expr, Param, ParamType, Program, PropSpec, Target,
    TaskDecl, TemporalOp, Term, VarDecl,
};
pub use error::{CompileError, LexError, ParseError, Position, TypeError};
pub use lexer::{tokenize, SourceProgram, Token, TokenKind};
pub use parser::{parse, parse_source, parse_term};
pub use pretty::{insert_required_groups, pretty_print, pretty_term};
pub use types::{
    check, detect_recursion, expand, expand_program, ActionSig, RequirementSet, RobotRef,
    RobotRequirements, TypedProgram,
};

/// Parse and check in one go.
pub fn compile(src: &SourceProgram) -> Result<TypedProgram, CompileError> {
    let program = parse_source(src)?;
    Ok(check(&program)?)
}
