//! Tokenizer for the supported SQL subset.
//!
//! Keywords are not distinguished from identifiers here; the parser classifies
//! words case-insensitively. Byte offsets are preserved for error reporting.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Bare identifier or keyword.
    Word,
    /// Identifier quoted with `"`, `` ` `` or `[...]`; `text` holds the inner name.
    QuotedIdent,
    /// Numeric literal.
    Number,
    /// String literal; `text` holds the raw token including quotes.
    String,
    /// Operator or punctuation.
    Symbol,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
}

impl Token {
    /// Case-insensitive keyword match for `Word` tokens.
    pub fn is_word(&self, kw: &str) -> bool {
        self.kind == TokenKind::Word && self.text.eq_ignore_ascii_case(kw)
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        self.kind == TokenKind::Symbol && self.text == sym
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Eof => write!(f, "end of input"),
            _ => write!(f, "`{}`", self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

/// Tokenize `sql`, returning the token list terminated by an `Eof` token.
pub fn tokenize(sql: &str) -> Result<Vec<Token>, LexError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                // line comment
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\'' => {
                let start = i;
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(LexError {
                                offset: start,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some(b'\'') if bytes.get(i + 1) == Some(&b'\'') => i += 2,
                        Some(b'\'') => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::String,
                    text: sql[start..i].to_string(),
                    offset: start,
                });
            }
            b'"' | b'`' => {
                let close = c;
                let start = i;
                i += 1;
                let inner_start = i;
                while i < bytes.len() && bytes[i] != close {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(LexError {
                        offset: start,
                        message: "unterminated quoted identifier".into(),
                    });
                }
                tokens.push(Token {
                    kind: TokenKind::QuotedIdent,
                    text: sql[inner_start..i].to_string(),
                    offset: start,
                });
                i += 1;
            }
            b'[' => {
                let start = i;
                i += 1;
                let inner_start = i;
                while i < bytes.len() && bytes[i] != b']' {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(LexError {
                        offset: start,
                        message: "unterminated quoted identifier".into(),
                    });
                }
                tokens.push(Token {
                    kind: TokenKind::QuotedIdent,
                    text: sql[inner_start..i].to_string(),
                    offset: start,
                });
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if bytes.get(i) == Some(&b'.') {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if matches!(bytes.get(i), Some(b'e') | Some(b'E')) {
                    let mut j = i + 1;
                    if matches!(bytes.get(j), Some(b'+') | Some(b'-')) {
                        j += 1;
                    }
                    if bytes.get(j).is_some_and(u8::is_ascii_digit) {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Number,
                    text: sql[start..i].to_string(),
                    offset: start,
                });
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Number,
                    text: sql[start..i].to_string(),
                    offset: start,
                });
            }
            _ if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => {
                let start = i;
                while i < bytes.len() {
                    let b = bytes[i];
                    if b == b'_' || b.is_ascii_alphanumeric() || b >= 0x80 {
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Word,
                    text: sql[start..i].to_string(),
                    offset: start,
                });
            }
            _ => {
                let start = i;
                let two = sql.get(i..i + 2).unwrap_or("");
                let text = match two {
                    "<=" | ">=" | "<>" | "!=" | "==" | "||" => {
                        i += 2;
                        two.to_string()
                    }
                    _ => match c {
                        b'(' | b')' | b',' | b'.' | b';' | b'*' | b'+' | b'-' | b'/' | b'%'
                        | b'=' | b'<' | b'>' => {
                            i += 1;
                            (c as char).to_string()
                        }
                        _ => {
                            return Err(LexError {
                                offset: start,
                                message: format!("unexpected character `{}`", sql[i..].chars().next().unwrap_or('?')),
                            })
                        }
                    },
                };
                tokens.push(Token {
                    kind: TokenKind::Symbol,
                    text,
                    offset: start,
                });
            }
        }
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        text: String::new(),
        offset: sql.len(),
    });
    Ok(tokens)
}
