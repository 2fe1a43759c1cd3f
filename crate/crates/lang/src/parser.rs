//! Recursive-descent parser.
//!
//! Declarations:
//!
//! ```text
//! program  := decl*
//! decl     := "action" sig ("," sig)*
//!           | "var" var
//!           | "task" IDENT "(" params? ")" "{" ("var" var)* term "}"
//! sig      := IDENT "(" (type ("," type)*)? ")"
//! var      := IDENT ("," IDENT)* type ("with" prop ("and" prop)*)?
//! params   := IDENT ("," IDENT)* type ("," params)?
//! ```
//!
//! Expressions, loosest to tightest: `=>`, `+=>`, the `&` family, the `+`
//! family, `|`, then postfix `@` / `->` / `<->`. Binary levels are
//! left-associative.

use crate::ast::{
    ActionDecl, AssignMode, Declaration, Expr, Param, ParamType, Program, PropSpec, Target,
    TaskDecl, TemporalOp, Term, VarDecl,
};
use crate::error::{ParseError, Position};
use crate::lexer::{tokenize, SourceProgram, Token, TokenKind};

const MAX_PRECEDENCE: u8 = 4;

/// Tokenize and parse a whole program.
pub fn parse_source(src: &SourceProgram) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    parse(&tokens, src.text.len())
}

/// Parse a token stream produced by [`tokenize`]. `text_len` is used to
/// position end-of-input errors.
pub fn parse(tokens: &[Token], text_len: usize) -> Result<Program, ParseError> {
    let mut p = Parser::new(tokens, text_len);
    let mut program = p.program()?;
    resolve_calls(&mut program);
    Ok(program)
}

/// Parse a single expression (no declarations). Bare names stay `Action`s.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let src = SourceProgram::inline(text);
    let tokens = tokenize(&src)?;
    let mut p = Parser::new(&tokens, text.len());
    let t = p.term(0)?;
    p.expect_end()?;
    Ok(t)
}

struct Parser<'a> {
    tokens: &'a [Token],
    idx: usize,
    end: Position,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token], text_len: usize) -> Self {
        let end = tokens
            .last()
            .map(|t| Position {
                offset: text_len,
                line: t.pos.line,
                column: t.pos.column + 1,
            })
            .unwrap_or(Position {
                offset: text_len,
                line: 1,
                column: 1,
            });
        Parser {
            tokens,
            idx: 0,
            end,
        }
    }

    fn peek(&self) -> Option<&'a TokenKind> {
        self.tokens.get(self.idx).map(|t| &t.kind)
    }

    fn peek_at(&self, n: usize) -> Option<&'a TokenKind> {
        self.tokens.get(self.idx + n).map(|t| &t.kind)
    }

    fn pos(&self) -> Position {
        self.tokens.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    fn found(&self) -> String {
        self.peek()
            .map(|k| k.to_string())
            .unwrap_or_else(|| "end of input".to_string())
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Unexpected {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.found(),
        })
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: &TokenKind) -> Result<(), ParseError> {
        if self.eat(kind) {
            Ok(())
        } else {
            self.unexpected(&kind.to_string())
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => self.unexpected("end of input"),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                self.idx += 1;
                Ok(s.clone())
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn param_type(&mut self) -> Result<ParamType, ParseError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => match ParamType::from_keyword(s) {
                Some(t) => {
                    self.idx += 1;
                    Ok(t)
                }
                None => self.unexpected("type"),
            },
            _ => self.unexpected("type"),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        while let Some(tok) = self.peek() {
            match tok {
                TokenKind::Action => {
                    self.idx += 1;
                    loop {
                        decls.push(Declaration::Action(self.action_sig()?));
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                }
                TokenKind::Var => {
                    self.idx += 1;
                    decls.extend(self.var_decl()?.into_iter().map(Declaration::Var));
                }
                TokenKind::Task => {
                    self.idx += 1;
                    decls.push(Declaration::Task(self.task_decl()?));
                }
                _ => return self.unexpected("`action`, `var` or `task`"),
            }
        }
        Ok(Program { decls })
    }

    fn action_sig(&mut self) -> Result<ActionDecl, ParseError> {
        let name = self.ident()?;
        self.expect(&TokenKind::LParen)?;
        let mut signature = Vec::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                signature.push(self.param_type()?);
                if self.eat(&TokenKind::RParen) {
                    break;
                }
                self.expect(&TokenKind::Comma)?;
            }
        }
        Ok(ActionDecl { name, signature })
    }

    fn var_decl(&mut self) -> Result<Vec<VarDecl>, ParseError> {
        let mut names = vec![self.ident()?];
        while self.eat(&TokenKind::Comma) {
            names.push(self.ident()?);
        }
        let ty = self.param_type()?;
        let mut with = Vec::new();
        if self.eat(&TokenKind::With) {
            loop {
                with.push(self.prop_spec()?);
                if !self.eat(&TokenKind::And) {
                    break;
                }
            }
        }
        Ok(names
            .into_iter()
            .map(|name| VarDecl {
                name,
                ty,
                with: with.clone(),
            })
            .collect())
    }

    /// `A, B loc, n int` style grouped parameters, up to (not including) `)`.
    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        let mut out = Vec::new();
        if self.peek() == Some(&TokenKind::RParen) {
            return Ok(out);
        }
        let mut pending = Vec::new();
        loop {
            pending.push(self.ident()?);
            match self.peek() {
                Some(TokenKind::Comma) => {
                    self.idx += 1;
                }
                Some(TokenKind::Ident(_)) => {
                    let ty = self.param_type()?;
                    out.extend(pending.drain(..).map(|n| Param::new(n, ty)));
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
                _ => return self.unexpected("`,` or type"),
            }
        }
        if !pending.is_empty() {
            return self.unexpected("type");
        }
        Ok(out)
    }

    fn task_decl(&mut self) -> Result<TaskDecl, ParseError> {
        let name = self.ident()?;
        self.expect(&TokenKind::LParen)?;
        let params = self.params()?;
        self.expect(&TokenKind::RParen)?;
        self.expect(&TokenKind::LBrace)?;
        let mut vars = Vec::new();
        while self.eat(&TokenKind::Var) {
            vars.extend(self.var_decl()?);
        }
        let body = self.term(0)?;
        self.expect(&TokenKind::RBrace)?;
        Ok(TaskDecl {
            name,
            params,
            vars,
            body,
        })
    }

    fn prop_spec(&mut self) -> Result<PropSpec, ParseError> {
        let negated = self.eat(&TokenKind::Bang);
        let first = self.ident()?;
        if self.eat(&TokenKind::Dot) {
            let prop = self.ident()?;
            Ok(PropSpec {
                prop,
                negated,
                owner: Some(first),
            })
        } else {
            Ok(PropSpec {
                prop: first,
                negated,
                owner: None,
            })
        }
    }

    fn peek_op(&self) -> Option<TemporalOp> {
        match self.peek() {
            Some(TokenKind::Op(op)) => Some(*op),
            _ => None,
        }
    }

    fn term(&mut self, min_prec: u8) -> Result<Term, ParseError> {
        if min_prec > MAX_PRECEDENCE {
            return self.postfix();
        }
        let mut lhs = self.term(min_prec + 1)?;
        while let Some(op) = self.peek_op() {
            if op.precedence() != min_prec {
                break;
            }
            self.idx += 1;
            let rhs = self.term(min_prec + 1)?;
            lhs = Term::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn target(&mut self) -> Result<Target, ParseError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                self.idx += 1;
                Ok(Target::Var(s.clone()))
            }
            Some(TokenKind::Str(s)) => {
                self.idx += 1;
                Ok(Target::Name(s.clone()))
            }
            _ => self.unexpected("identifier or string"),
        }
    }

    fn postfix(&mut self) -> Result<Term, ParseError> {
        let mut t = self.primary()?;
        loop {
            match self.peek() {
                Some(TokenKind::At) => {
                    self.idx += 1;
                    t = Term::located(t, self.target()?);
                }
                Some(TokenKind::Arrow) => {
                    self.idx += 1;
                    t = Term::assigned(t, AssignMode::Shared, self.target()?);
                }
                Some(TokenKind::BiArrow) => {
                    self.idx += 1;
                    t = Term::assigned(t, AssignMode::Exclusive, self.target()?);
                }
                _ => return Ok(t),
            }
        }
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(TokenKind::LParen) => {
                self.idx += 1;
                let inner = self.term(0)?;
                self.expect(&TokenKind::RParen)?;
                Ok(Term::group(inner))
            }
            Some(TokenKind::WaitEvent) => {
                self.idx += 1;
                let name = self.ident()?;
                self.expect(&TokenKind::LParen)?;
                let params = self.params()?;
                self.expect(&TokenKind::RParen)?;
                Ok(Term::WaitEvent { name, params })
            }
            Some(TokenKind::WaitProp) => {
                self.idx += 1;
                Ok(Term::WaitProp(self.prop_spec()?))
            }
            Some(TokenKind::Pause) => {
                self.idx += 1;
                match self.peek() {
                    Some(TokenKind::Duration(ms)) => {
                        self.idx += 1;
                        Ok(Term::Pause(*ms))
                    }
                    _ => self.unexpected("duration such as `5s` or `250ms`"),
                }
            }
            Some(TokenKind::Repeat) => {
                self.idx += 1;
                let body = self.postfix()?;
                self.expect(&TokenKind::UntilProp)?;
                let until = self.prop_spec()?;
                Ok(Term::Repeat {
                    body: Box::new(body),
                    until,
                })
            }
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.idx += 1;
                let args = if self.peek() == Some(&TokenKind::LParen) {
                    self.idx += 1;
                    self.args()?
                } else {
                    Vec::new()
                };
                Ok(Term::Action { name, args })
            }
            _ => self.unexpected("expression"),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            let e = match self.peek() {
                Some(TokenKind::Str(s)) => Expr::Str(s.clone()),
                Some(TokenKind::Int(i)) => Expr::Int(*i),
                Some(TokenKind::Duration(ms)) => Expr::Duration(*ms),
                Some(TokenKind::True) => Expr::Bool(true),
                Some(TokenKind::False) => Expr::Bool(false),
                Some(TokenKind::Ident(s)) => Expr::Var(s.clone()),
                _ => return self.unexpected("argument"),
            };
            self.idx += 1;
            args.push(e);
            if self.eat(&TokenKind::RParen) {
                return Ok(args);
            }
            if self.peek_at(0) != Some(&TokenKind::Comma) {
                return self.unexpected("`,` or `)`");
            }
            self.idx += 1;
        }
    }
}

/// Rewrites `Action` nodes that name a declared task into `Call` nodes.
fn resolve_calls(program: &mut Program) {
    let tasks: Vec<String> = program.tasks().map(|t| t.name.clone()).collect();
    for decl in &mut program.decls {
        if let Declaration::Task(t) = decl {
            resolve_in(&mut t.body, &tasks);
        }
    }
}

fn resolve_in(term: &mut Term, tasks: &[String]) {
    match term {
        Term::Action { name, args } if tasks.contains(name) => {
            *term = Term::Call {
                task: std::mem::take(name),
                args: std::mem::take(args),
            };
        }
        Term::Group(inner)
        | Term::Assigned { inner, .. }
        | Term::Located { inner, .. }
        | Term::Repeat { body: inner, .. } => resolve_in(inner, tasks),
        Term::Binary { lhs, rhs, .. } => {
            resolve_in(lhs, tasks);
            resolve_in(rhs, tasks);
        }
        _ => {}
    }
}
