use alloc::string::String;
use alloc::vec::Vec;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i32),
    Float(f64),
    Char(u16),
    Kw(Kw),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Int,
    Float,
    Char,
    Boolean,
    Void,
    Object,
    Class,
    Extern,
    If,
    Else,
    For,
    While,
    Switch,
    Case,
    Default,
    Return,
    Break,
    Continue,
    True,
    False,
    Null,
    New,
}

fn keyword(word: &str) -> Option<Kw> {
    Some(match word {
        "int" => Kw::Int,
        "float" => Kw::Float,
        "char" => Kw::Char,
        "boolean" => Kw::Boolean,
        "void" => Kw::Void,
        "Object" => Kw::Object,
        "class" => Kw::Class,
        "extern" => Kw::Extern,
        "if" => Kw::If,
        "else" => Kw::Else,
        "for" => Kw::For,
        "while" => Kw::While,
        "switch" => Kw::Switch,
        "case" => Kw::Case,
        "default" => Kw::Default,
        "return" => Kw::Return,
        "break" => Kw::Break,
        "continue" => Kw::Continue,
        "true" => Kw::True,
        "false" => Kw::False,
        "null" => Kw::Null,
        "new" => Kw::New,
        _ => return None,
    })
}

// Longest first so that maximal munch works with a linear scan.
const PUNCT: &[&str] = &[
    "->", "+=", "-=", "*=", "/=", "++", "--", "&&", "||", "<=", ">=", "==", "!=", "<<", ">>", "(", ")", "{", "}", "[", "]", ";", ",", ".",
    ":", "=", "+", "-", "*", "/", "%", "!", "&", "|", "<", ">",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            bump!(1);
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                bump!(1);
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let start = Span::new(line, col);
            bump!(2);
            loop {
                if i >= bytes.len() {
                    return Err(FrontendError::syntax(start, "unterminated block comment"));
                }
                if src[i..].starts_with("*/") {
                    bump!(2);
                    break;
                }
                bump!(1);
            }
            continue;
        }
        let span = Span::new(line, col);
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                bump!(1);
            }
            let word = &src[start..i];
            let tok = match keyword(word) {
                Some(kw) => Tok::Kw(kw),
                None => Tok::Ident(word.into()),
            };
            out.push(Token { tok, span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                bump!(1);
            }
            let mut is_float = false;
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                is_float = true;
                bump!(1);
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    bump!(1);
                }
            }
            let text = &src[start..i];
            if i < bytes.len() && (bytes[i] == b'f' || bytes[i] == b'F') {
                is_float = true;
                bump!(1);
            }
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| FrontendError::syntax(span, "malformed float literal"))?)
            } else {
                Tok::Int(text.parse().map_err(|_| FrontendError::syntax(span, "integer literal out of range"))?)
            };
            out.push(Token { tok, span });
            continue;
        }
        if c == b'\'' {
            bump!(1);
            let value = match bytes.get(i) {
                Some(b'\\') => {
                    bump!(1);
                    let v = match bytes.get(i) {
                        Some(b'n') => b'\n',
                        Some(b't') => b'\t',
                        Some(b'r') => b'\r',
                        Some(b'0') => 0,
                        Some(b'\\') => b'\\',
                        Some(b'\'') => b'\'',
                        _ => return Err(FrontendError::syntax(span, "unknown escape in char literal")),
                    };
                    bump!(1);
                    v as u16
                }
                Some(&b) if b.is_ascii() && b != b'\'' && b != b'\n' => {
                    bump!(1);
                    b as u16
                }
                _ => return Err(FrontendError::syntax(span, "malformed char literal")),
            };
            if bytes.get(i) != Some(&b'\'') {
                return Err(FrontendError::syntax(span, "unterminated char literal"));
            }
            bump!(1);
            out.push(Token { tok: Tok::Char(value), span });
            continue;
        }
        match PUNCT.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                bump!(p.len());
                out.push(Token { tok: Tok::Punct(p), span });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(FrontendError::syntax(span, alloc::format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn munches_longest_operator() {
        let toks = tokenize("a<<=b >> c->d").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[1], Tok::Punct("<<"));
        assert_eq!(kinds[2], Tok::Punct("="));
        assert_eq!(kinds[4], Tok::Punct(">>"));
        assert_eq!(kinds[6], Tok::Punct("->"));
    }

    #[test]
    fn literals_and_spans() {
        let toks = tokenize("x = 2.5f;\n  'a' 7 3f").unwrap();
        assert_eq!(toks[2].tok, Tok::Float(2.5));
        assert_eq!(toks[4].tok, Tok::Char(97));
        assert_eq!(toks[4].span, Span::new(2, 3));
        assert_eq!(toks[5].tok, Tok::Int(7));
        assert_eq!(toks[6].tok, Tok::Float(3.0));
    }

    #[test]
    fn comments_are_skipped() {
        let toks = tokenize("// hi\n/* a\n b */ y").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("y".into()));
        assert_eq!(toks[0].span.line, 3);
    }

    #[test]
    fn bad_character_reports_position() {
        let err = tokenize("int x = #;").unwrap_err();
        assert_eq!(err.span, Span::new(1, 9));
    }
}
