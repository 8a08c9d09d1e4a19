//! Rule-based tokenizer and sentence splitter.
//!
//! Tokenization rules, applied left to right over the raw text:
//!
//! 1. Whitespace separates tokens and is never part of one.
//! 2. A maximal run of alphanumeric characters forms one token.
//! 3. Inside such a run, `.` or `,` directly between two digits stays in the
//!    token, so `3.5` and `1,000` are single tokens.
//! 4. Every other character is a token on its own (`49-15` is `49`, `-`, `15`).
//!
//! Surfaces are lowercased; offsets are half-open and count Unicode scalar
//! values (not bytes) into the original text.
//!
//! Sentence boundaries fall after a `.`, `!` or `?` token when the next token
//! is separated by whitespace and starts with an uppercase letter or a digit.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            i += 1;
            while i < chars.len() {
                let ch = chars[i];
                if ch.is_alphanumeric() {
                    i += 1;
                } else if (ch == '.' || ch == ',')
                    && chars[i - 1].is_ascii_digit()
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
                {
                    i += 2;
                } else {
                    break;
                }
            }
        } else {
            i += 1;
        }
        let surface: String = chars[start..i].iter().collect::<String>().to_lowercase();
        tokens.push(Token {
            surface,
            char_start: start,
            char_end: i,
        });
    }
    tokens
}

/// Group tokens into sentences.
pub fn split_sentences(text: &str, tokens: Vec<Token>) -> Vec<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let n = tokens.len();
    let mut iter = tokens.into_iter().peekable();
    let mut idx = 0;
    while let Some(tok) = iter.next() {
        idx += 1;
        let terminal = matches!(tok.surface.as_str(), "." | "!" | "?");
        let end = tok.char_end;
        current.push(tok);
        if terminal && idx < n {
            if let Some(next) = iter.peek() {
                let gap = next.char_start > end;
                let first = chars[next.char_start];
                if gap && (first.is_uppercase() || first.is_ascii_digit()) {
                    sentences.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Substring by char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}
