use super::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum SExpr {
    Token(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Token(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            SExpr::Token(t, _) => Some(t),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Token(..) => None,
        }
    }

    /// The head token of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_token()
    }
}

pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

/// Character-level reader over a text slice with 1-based line/column tracking.
pub(crate) struct Reader<'a> {
    text: &'a str,
    offset: usize,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    pub fn new(text: &'a str, first_line: usize) -> Self {
        Reader {
            text,
            offset: 0,
            line: first_line,
            col: 1,
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    pub fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Next significant character after whitespace and comments.
    pub fn peek_significant(&mut self) -> Option<char> {
        self.skip_trivia();
        self.peek()
    }

    pub fn parse_one(&mut self) -> Result<SExpr, FormatError> {
        self.skip_trivia();
        let start = self.pos();
        match self.peek() {
            None => Err(syntax(start, "unexpected end of input")),
            Some(')') => Err(syntax(start, "unbalanced `)`")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(syntax(start, "unclosed `(`")),
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr::List(items, start));
                        }
                        Some(_) => items.push(self.parse_one()?),
                    }
                }
            }
            Some(_) => {
                let begin = self.offset;
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    self.bump();
                }
                Ok(SExpr::Token(self.text[begin..self.offset].to_string(), start))
            }
        }
    }

    pub fn parse_all(&mut self) -> Result<Vec<SExpr>, FormatError> {
        let mut out = Vec::new();
        while self.peek_significant().is_some() {
            out.push(self.parse_one()?);
        }
        Ok(out)
    }
}

pub(crate) fn parse_all(text: &str, first_line: usize) -> Result<Vec<SExpr>, FormatError> {
    Reader::new(text, first_line).parse_all()
}
