use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Run of `[A-Za-z0-9_]`.
    Word(String),
    /// A run of two or more dashes, as in `------ IMark(...) ------`.
    Dashes,
    Punct(char),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn snippet(src: &str, line: usize) -> String {
    src.lines().nth(line.saturating_sub(1)).unwrap_or("").to_string()
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = src.chars().peekable();

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                col += 1;
            }
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let mut w = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    w.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Word(w),
                line: tl,
                column: tc,
            });
        } else if c == '-' {
            let mut n = 0;
            while chars.peek() == Some(&'-') {
                chars.next();
                col += 1;
                n += 1;
            }
            if n < 2 {
                return Err(ParseError {
                    line: tl,
                    column: tc,
                    message: "unexpected '-'".into(),
                    snippet: snippet(src, tl),
                });
            }
            out.push(Token {
                tok: Tok::Dashes,
                line: tl,
                column: tc,
            });
        } else if "(){},:;=|@".contains(c) {
            chars.next();
            col += 1;
            out.push(Token {
                tok: Tok::Punct(c),
                line: tl,
                column: tc,
            });
        } else {
            return Err(ParseError {
                line: tl,
                column: tc,
                message: format!("unexpected character {c:?}"),
                snippet: snippet(src, tl),
            });
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}
