use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Pipe,
    Amp,
    Bang,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// `</`
    LtSlash,
    Star,
    Plus,
    Question,
    Comma,
    Colon,
    Dot,
    Semi,
    Str(String),
    Int(i64),
    Ident(String),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Eof => "end of query".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Pipe => "|",
            Tok::Amp => "&",
            Tok::Bang => "!",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::LtSlash => "</",
            Tok::Star => "*",
            Tok::Plus => "+",
            Tok::Question => "?",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Semi => ";",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Span {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(input: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<(usize, char)> = input.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0usize; // char index of the current line's start

    let span_at = |i: usize, line: usize, line_start: usize| Span {
        offset: chars.get(i).map(|&(o, _)| o).unwrap_or(input.len()),
        line,
        column: i - line_start + 1,
    };

    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let span = span_at(i, line, line_start);
        let next = chars.get(i + 1).map(|&(_, c)| c);
        let (tok, len) = match (c, next) {
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('|', _) => (Tok::Pipe, 1),
            ('&', _) => (Tok::Amp, 1),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('!', _) => (Tok::Bang, 1),
            ('=', _) => (Tok::Eq, 1),
            ('<', Some('=')) => (Tok::Le, 2),
            ('<', Some('/')) => (Tok::LtSlash, 2),
            ('<', _) => (Tok::Lt, 1),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('>', _) => (Tok::Gt, 1),
            ('*', _) => (Tok::Star, 1),
            ('+', _) => (Tok::Plus, 1),
            ('?', _) => (Tok::Question, 1),
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            ('.', _) => (Tok::Dot, 1),
            (';', _) => (Tok::Semi, 1),
            ('"', _) => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j).map(|&(_, c)| c) {
                        None => {
                            return Err(ParseError::new(
                                "unterminated string literal",
                                span,
                                vec!["`\"`".into()],
                            ))
                        }
                        Some('"') => break,
                        Some('\\') => match chars.get(j + 1).map(|&(_, c)| c) {
                            Some('"') => {
                                s.push('"');
                                j += 2;
                            }
                            Some(e) => {
                                s.push('\\');
                                s.push(e);
                                j += 2;
                            }
                            None => j += 1,
                        },
                        Some('\n') => {
                            return Err(ParseError::new(
                                "newline in string literal",
                                span,
                                vec!["`\"`".into()],
                            ))
                        }
                        Some(c) => {
                            s.push(c);
                            j += 1;
                        }
                    }
                }
                (Tok::Str(s), j + 1 - i)
            }
            (c, n) if c.is_ascii_digit() || (c == '-' && n.is_some_and(|n| n.is_ascii_digit())) => {
                let mut j = i + 1;
                while chars.get(j).is_some_and(|&(_, c)| c.is_ascii_digit()) {
                    j += 1;
                }
                let start = chars[i].0;
                let end = chars.get(j).map(|&(o, _)| o).unwrap_or(input.len());
                let value = input[start..end].parse::<i64>().map_err(|_| {
                    ParseError::new("integer literal out of range", span, Vec::new())
                })?;
                (Tok::Int(value), j - i)
            }
            (c, _) if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while chars
                    .get(j)
                    .is_some_and(|&(_, c)| c.is_ascii_alphanumeric() || c == '_')
                {
                    j += 1;
                }
                let start = chars[i].0;
                let end = chars.get(j).map(|&(o, _)| o).unwrap_or(input.len());
                (Tok::Ident(input[start..end].to_owned()), j - i)
            }
            (c, _) => {
                return Err(ParseError::new(
                    format!("unexpected character {c:?}"),
                    span,
                    Vec::new(),
                ))
            }
        };
        out.push((tok, span));
        i += len;
    }
    out.push((Tok::Eof, span_at(chars.len(), line, line_start)));
    Ok(out)
}
