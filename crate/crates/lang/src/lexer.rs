use std::fmt;

use crate::ast::TemporalOp;
use crate::error::{LexError, Position};

/// Source text plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        let origin = origin.into();
        SourceProgram {
            text: text.into(),
            origin: if origin.is_empty() {
                "<inline>".to_string()
            } else {
                origin
            },
        }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        SourceProgram::new(text, "<inline>")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    Int(i64),
    /// Milliseconds, from `5s` / `250ms`.
    Duration(u64),
    // keywords
    Action,
    Task,
    Var,
    With,
    And,
    WaitEvent,
    WaitProp,
    Pause,
    Repeat,
    UntilProp,
    True,
    False,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Bang,
    At,
    Arrow,
    BiArrow,
    Op(TemporalOp),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Str(s) => write!(f, "string {s:?}"),
            TokenKind::Int(i) => write!(f, "integer {i}"),
            TokenKind::Duration(ms) => write!(f, "duration {ms}ms"),
            TokenKind::Action => f.write_str("`action`"),
            TokenKind::Task => f.write_str("`task`"),
            TokenKind::Var => f.write_str("`var`"),
            TokenKind::With => f.write_str("`with`"),
            TokenKind::And => f.write_str("`and`"),
            TokenKind::WaitEvent => f.write_str("`waitevent`"),
            TokenKind::WaitProp => f.write_str("`waitprop`"),
            TokenKind::Pause => f.write_str("`pause`"),
            TokenKind::Repeat => f.write_str("`repeat`"),
            TokenKind::UntilProp => f.write_str("`untilprop`"),
            TokenKind::True => f.write_str("`true`"),
            TokenKind::False => f.write_str("`false`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::Bang => f.write_str("`!`"),
            TokenKind::At => f.write_str("`@`"),
            TokenKind::Arrow => f.write_str("`->`"),
            TokenKind::BiArrow => f.write_str("`<->`"),
            TokenKind::Op(op) => write!(f, "`{op}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Position,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "action" => TokenKind::Action,
        "task" => TokenKind::Task,
        "var" => TokenKind::Var,
        "with" => TokenKind::With,
        "and" => TokenKind::And,
        "waitevent" => TokenKind::WaitEvent,
        "waitprop" => TokenKind::WaitProp,
        "pause" => TokenKind::Pause,
        "repeat" => TokenKind::Repeat,
        "untilprop" => TokenKind::UntilProp,
        "true" => TokenKind::True,
        "false" => TokenKind::False,
        _ => return None,
    })
}

/// Punctuation table, longest spellings first so a linear scan is maximal munch.
const PUNCT: &[(&str, TokenKind)] = &[
    ("<->", TokenKind::BiArrow),
    ("!&!", TokenKind::Op(TemporalOp::BAnd)),
    ("!+!", TokenKind::Op(TemporalOp::BPar)),
    ("+=>", TokenKind::Op(TemporalOp::ParSeq)),
    ("+\u{21d2}", TokenKind::Op(TemporalOp::ParSeq)),
    ("!&", TokenKind::Op(TemporalOp::LAnd)),
    ("&!", TokenKind::Op(TemporalOp::RAnd)),
    ("!+", TokenKind::Op(TemporalOp::LPar)),
    ("+!", TokenKind::Op(TemporalOp::RPar)),
    ("=>", TokenKind::Op(TemporalOp::Seq)),
    ("->", TokenKind::Arrow),
    ("\u{21d2}", TokenKind::Op(TemporalOp::Seq)),
    ("\u{2192}", TokenKind::Arrow),
    ("\u{2194}", TokenKind::BiArrow),
    ("&", TokenKind::Op(TemporalOp::And)),
    ("+", TokenKind::Op(TemporalOp::Par)),
    ("|", TokenKind::Op(TemporalOp::Choice)),
    ("!", TokenKind::Bang),
    ("@", TokenKind::At),
    ("(", TokenKind::LParen),
    (")", TokenKind::RParen),
    ("{", TokenKind::LBrace),
    ("}", TokenKind::RBrace),
    (",", TokenKind::Comma),
    (".", TokenKind::Dot),
];

struct Cursor<'a> {
    text: &'a str,
    offset: usize,
    line: u32,
    column: u32,
}

impl<'a> Cursor<'a> {
    fn pos(&self) -> Position {
        Position {
            offset: self.offset,
            line: self.line,
            column: self.column,
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.offset..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_str(&mut self, s: &str) {
        for _ in s.chars() {
            self.bump();
        }
    }
}

/// Splits source text into tokens. Whitespace and `//` comments are skipped.
pub fn tokenize(src: &SourceProgram) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        text: &src.text,
        offset: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.rest().starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        let pos = cur.pos();
        let kind = if c.is_alphabetic() || c == '_' {
            let start = cur.offset;
            while let Some(c) = cur.peek() {
                if c.is_alphanumeric() || c == '_' {
                    cur.bump();
                } else {
                    break;
                }
            }
            let word = &src.text[start..cur.offset];
            keyword(word).unwrap_or_else(|| TokenKind::Ident(word.to_string()))
        } else if c.is_ascii_digit() || (c == '-' && next_is_digit(cur.rest())) {
            lex_number(&mut cur, pos)?
        } else if c == '"' {
            lex_string(&mut cur, pos)?
        } else if let Some((spelling, kind)) =
            PUNCT.iter().find(|(s, _)| cur.rest().starts_with(s))
        {
            cur.bump_str(spelling);
            kind.clone()
        } else {
            return Err(LexError { pos, found: c });
        };
        out.push(Token { kind, pos });
    }
    Ok(out)
}

fn next_is_digit(rest: &str) -> bool {
    rest.chars().nth(1).is_some_and(|c| c.is_ascii_digit())
}

fn lex_number(cur: &mut Cursor<'_>, pos: Position) -> Result<TokenKind, LexError> {
    let start = cur.offset;
    if cur.peek() == Some('-') {
        cur.bump();
    }
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    let digits = &cur.text[start..cur.offset];
    let value: i64 = digits.parse().map_err(|_| LexError {
        pos,
        found: digits.chars().next().unwrap_or('0'),
    })?;
    let rest = cur.rest();
    let unit_end = |s: &str| {
        !rest[s.len()..]
            .chars()
            .next()
            .is_some_and(|c| c.is_alphanumeric() || c == '_')
    };
    let scale = if rest.starts_with("ms") && unit_end("ms") {
        cur.bump_str("ms");
        Some(1)
    } else if rest.starts_with('s') && unit_end("s") {
        cur.bump_str("s");
        Some(1000)
    } else {
        None
    };
    match scale {
        Some(_) if value < 0 => Err(LexError { pos, found: '-' }),
        Some(scale) => Ok(TokenKind::Duration(value as u64 * scale)),
        None => Ok(TokenKind::Int(value)),
    }
}

fn lex_string(cur: &mut Cursor<'_>, pos: Position) -> Result<TokenKind, LexError> {
    cur.bump();
    let mut s = String::new();
    loop {
        let here = cur.pos();
        match cur.bump() {
            None => {
                return Err(LexError {
                    pos: here,
                    found: '"',
                })
            }
            Some('"') => break,
            Some('\\') => match cur.bump() {
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some('"') => s.push('"'),
                Some('\\') => s.push('\\'),
                Some(other) => return Err(LexError { pos: here, found: other }),
                None => return Err(LexError { pos, found: '\\' }),
            },
            Some(c) => s.push(c),
        }
    }
    Ok(TokenKind::Str(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(&SourceProgram::inline(text))
            .unwrap()
            .into_iter()
            .map(|t| t.kind)
            .collect()
    }

    #[test]
    fn say_at_lobby() {
        assert_eq!(
            kinds(r#"say("hi") @ "lobby""#),
            vec![
                TokenKind::Ident("say".into()),
                TokenKind::LParen,
                TokenKind::Str("hi".into()),
                TokenKind::RParen,
                TokenKind::At,
                TokenKind::Str("lobby".into()),
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(kinds("").is_empty());
        assert!(kinds("  // only a comment\n").is_empty());
    }

    #[test]
    fn maximal_munch_matches_hand_table() {
        // Every operator spelling, alone, must come out as exactly one token.
        let table = [
            ("&", TokenKind::Op(TemporalOp::And)),
            ("=>", TokenKind::Op(TemporalOp::Seq)),
            ("+", TokenKind::Op(TemporalOp::Par)),
            ("+=>", TokenKind::Op(TemporalOp::ParSeq)),
            ("|", TokenKind::Op(TemporalOp::Choice)),
            ("!&", TokenKind::Op(TemporalOp::LAnd)),
            ("&!", TokenKind::Op(TemporalOp::RAnd)),
            ("!&!", TokenKind::Op(TemporalOp::BAnd)),
            ("!+", TokenKind::Op(TemporalOp::LPar)),
            ("+!", TokenKind::Op(TemporalOp::RPar)),
            ("!+!", TokenKind::Op(TemporalOp::BPar)),
            ("->", TokenKind::Arrow),
            ("<->", TokenKind::BiArrow),
            ("@", TokenKind::At),
        ];
        for (text, want) in table {
            assert_eq!(kinds(text), vec![want], "spelling {text}");
        }
        assert_eq!(kinds("!&!").len(), 1);
    }

    #[test]
    fn durations_and_ints() {
        assert_eq!(kinds("5s"), vec![TokenKind::Duration(5000)]);
        assert_eq!(kinds("250ms"), vec![TokenKind::Duration(250)]);
        assert_eq!(kinds("42"), vec![TokenKind::Int(42)]);
        assert_eq!(kinds("-3"), vec![TokenKind::Int(-3)]);
        assert_eq!(
            kinds("5 s"),
            vec![TokenKind::Int(5), TokenKind::Ident("s".into())]
        );
    }

    #[test]
    fn bad_character_is_reported_in_bounds() {
        let src = SourceProgram::inline("say(\"x\") # oops");
        let err = tokenize(&src).unwrap_err();
        assert_eq!(err.found, '#');
        assert_eq!(err.pos.column, 10);
        assert!(err.pos.offset <= src.text.len());
    }

    #[test]
    fn unterminated_string() {
        let src = SourceProgram::inline("say(\"x");
        let err = tokenize(&src).unwrap_err();
        assert!(err.pos.offset <= src.text.len());
    }

    #[test]
    fn unicode_aliases() {
        assert_eq!(
            kinds("a \u{21d2} b \u{2192} r"),
            kinds("a => b -> r")
        );
    }
}
