//! Turtle tokenizer. Lexical problems become issues plus an `Invalid` token so the
//! parser can resynchronise without reporting the same problem twice.

use super::parser::{IssueCategory, SyntaxIssue};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Iri(String),
    PName { prefix: String, local: String },
    Blank(String),
    LangTag(String),
    Str(String),
    Integer(String),
    Decimal(String),
    Double(String),
    True,
    False,
    A,
    AtPrefix,
    AtBase,
    SparqlPrefix,
    SparqlBase,
    Dot,
    Semi,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Carets,
    Invalid,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

pub(crate) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line_starts: Vec<usize>,
    pub issues: Vec<SyntaxIssue>,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Lexer<'a> {
        let mut line_starts = vec![0];
        for (i, b) in src.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        Lexer {
            src,
            pos: 0,
            line_starts,
            issues: Vec::new(),
        }
    }

    /// 1-based (line, column) of a byte offset; column counts characters.
    pub fn line_col(&self, offset: usize) -> (usize, usize) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let start = self.line_starts[line];
        let col = self.src[start..offset.min(self.src.len())].chars().count() + 1;
        (line + 1, col)
    }

    fn issue(&mut self, category: IssueCategory, at: usize, message: impl Into<String>, token: &str) {
        let (line, column) = self.line_col(at);
        self.issues.push(SyntaxIssue {
            category,
            line,
            column,
            message: message.into(),
            offending_token: token.to_string(),
        });
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    pub fn tokenize(mut self) -> (Vec<Token>, Vec<SyntaxIssue>, Vec<usize>) {
        let mut out: Vec<Token> = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.pos;
            let Some(c) = self.peek() else { break };
            let prev_is_string = matches!(out.last().map(|t| &t.tok), Some(Tok::Str(_)));
            let tok = self.next_tok(c, prev_is_string);
            let end = self.pos;
            out.push(Token {
                tok,
                start,
                end,
                text: self.src[start..end].to_string(),
            });
        }
        (out, self.issues, self.line_starts)
    }

    fn next_tok(&mut self, c: char, prev_is_string: bool) -> Tok {
        let start = self.pos;
        match c {
            '<' => self.iri(),
            '"' | '\'' => self.string(c),
            '@' => {
                self.bump();
                let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                if word.is_empty() {
                    self.issue(IssueCategory::Other, start, "stray '@'", "@");
                    return Tok::Invalid;
                }
                if !prev_is_string && word == "prefix" {
                    Tok::AtPrefix
                } else if !prev_is_string && word == "base" {
                    Tok::AtBase
                } else if valid_lang_tag(&word) {
                    Tok::LangTag(word)
                } else {
                    self.issue(IssueCategory::BadLiteral, start, "malformed language tag", &format!("@{word}"));
                    Tok::Invalid
                }
            }
            '_' if self.peek_at(1) == Some(':') => {
                self.bump();
                self.bump();
                let label = self.take_name_chars(true);
                if label.is_empty() {
                    self.issue(IssueCategory::Other, start, "empty blank node label", "_:");
                    return Tok::Invalid;
                }
                Tok::Blank(label)
            }
            '0'..='9' | '+' | '-' => self.number(),
            '.' => {
                if matches!(self.peek_at(1), Some('0'..='9')) {
                    self.number()
                } else {
                    self.bump();
                    Tok::Dot
                }
            }
            ';' => {
                self.bump();
                Tok::Semi
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '[' => {
                self.bump();
                Tok::LBracket
            }
            ']' => {
                self.bump();
                Tok::RBracket
            }
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            '^' => {
                self.bump();
                if self.peek() == Some('^') {
                    self.bump();
                    Tok::Carets
                } else {
                    self.issue(IssueCategory::BadLiteral, start, "expected '^^'", "^");
                    Tok::Invalid
                }
            }
            ':' => {
                self.bump();
                let local = self.local_part(start);
                match local {
                    Some(local) => Tok::PName {
                        prefix: String::new(),
                        local,
                    },
                    None => Tok::Invalid,
                }
            }
            c if is_pn_chars_base(c) => {
                let word = self.take_name_chars(false);
                if self.peek() == Some(':') {
                    self.bump();
                    match self.local_part(start) {
                        Some(local) => Tok::PName { prefix: word, local },
                        None => Tok::Invalid,
                    }
                } else {
                    match word.as_str() {
                        "a" => Tok::A,
                        "true" => Tok::True,
                        "false" => Tok::False,
                        w if w.eq_ignore_ascii_case("prefix") => Tok::SparqlPrefix,
                        w if w.eq_ignore_ascii_case("base") => Tok::SparqlBase,
                        _ => {
                            self.issue(IssueCategory::MalformedStatement, start, "unexpected bare word", &word);
                            Tok::Invalid
                        }
                    }
                }
            }
            other => {
                self.bump();
                self.issue(
                    IssueCategory::Other,
                    start,
                    format!("unexpected character {other:?}"),
                    &other.to_string(),
                );
                Tok::Invalid
            }
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    /// Prefix labels and blank node labels: name chars with '.' allowed inside but not last.
    fn take_name_chars(&mut self, allow_digit_start: bool) -> String {
        let start = self.pos;
        let mut first = true;
        while let Some(c) = self.peek() {
            let ok = if first {
                is_pn_chars_u(c) || (allow_digit_start && c.is_ascii_digit())
            } else {
                is_pn_chars(c) || (c == '.' && self.peek_at(1).is_some_and(|n| is_pn_chars(n) || n == '.'))
            };
            if !ok {
                break;
            }
            first = false;
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    /// Local part of a prefixed name, with escapes and percent codes; cursor is after ':'.
    fn local_part(&mut self, start: usize) -> Option<String> {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c == '\\' {
                match self.peek_at(1) {
                    Some(e) if "_~.-!$&'()*+,;=/?#@%".contains(e) => {
                        self.bump();
                        self.bump();
                        out.push(e);
                        continue;
                    }
                    _ => {
                        self.bump();
                        let text = self.src[start..self.pos].to_string();
                        self.issue(IssueCategory::Other, start, "bad escape in prefixed name", &text);
                        return None;
                    }
                }
            }
            if c == '%' {
                let h1 = self.peek_at(1);
                let h2 = self.peek_at(2);
                if h1.is_some_and(|h| h.is_ascii_hexdigit()) && h2.is_some_and(|h| h.is_ascii_hexdigit()) {
                    out.push('%');
                    out.push(h1.unwrap());
                    out.push(h2.unwrap());
                    self.bump();
                    self.bump();
                    self.bump();
                    continue;
                }
                break;
            }
            let ok = if out.is_empty() {
                is_pn_chars_u(c) || c == ':' || c.is_ascii_digit()
            } else if c == '.' {
                // a trailing '.' ends the statement instead
                self.peek_at(1)
                    .is_some_and(|n| is_pn_chars(n) || n == ':' || n == '.' || n == '%' || n == '\\')
            } else {
                is_pn_chars(c) || c == ':'
            };
            if !ok {
                break;
            }
            out.push(c);
            self.bump();
        }
        Some(out)
    }

    fn iri(&mut self) -> Tok {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.peek() {
                None | Some('\n') | Some('\r') => {
                    let text = self.src[start..self.pos].to_string();
                    self.issue(IssueCategory::BadIri, start, "unterminated IRI", &text);
                    return Tok::Invalid;
                }
                Some('>') => {
                    self.bump();
                    return Tok::Iri(out);
                }
                Some('\\') => {
                    self.bump();
                    match self.unicode_escape() {
                        Some(ch) => out.push(ch),
                        None => {
                            self.skip_iri_rest();
                            let text = self.src[start..self.pos].to_string();
                            self.issue(IssueCategory::BadIri, start, "bad escape in IRI", &text);
                            return Tok::Invalid;
                        }
                    }
                }
                Some(c) if c <= ' ' || "<\"{}|^`".contains(c) => {
                    self.skip_iri_rest();
                    let text = self.src[start..self.pos].to_string();
                    self.issue(
                        IssueCategory::BadIri,
                        start,
                        format!("character {c:?} not allowed in IRI"),
                        &text,
                    );
                    return Tok::Invalid;
                }
                Some(c) => {
                    out.push(c);
                    self.bump();
                }
            }
        }
    }

    fn skip_iri_rest(&mut self) {
        let rest = &self.src[self.pos..];
        let line_end = rest.find('\n').unwrap_or(rest.len());
        match rest[..line_end].find('>') {
            Some(i) => self.pos += i + 1,
            None => self.pos += line_end,
        }
    }

    fn unicode_escape(&mut self) -> Option<char> {
        let n = match self.peek()? {
            'u' => 4,
            'U' => 8,
            _ => return None,
        };
        self.bump();
        let start = self.pos;
        for _ in 0..n {
            match self.peek() {
                Some(h) if h.is_ascii_hexdigit() => {
                    self.bump();
                }
                _ => return None,
            }
        }
        u32::from_str_radix(&self.src[start..self.pos], 16)
            .ok()
            .and_then(char::from_u32)
    }

    fn string(&mut self, quote: char) -> Tok {
        let start = self.pos;
        let long = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        if long {
            self.bump();
            self.bump();
            self.bump();
        } else {
            self.bump();
            if self.peek() == Some(quote) {
                self.bump();
                return Tok::Str(String::new());
            }
        }
        let mut out = String::new();
        let mut bad_escape = false;
        loop {
            let Some(c) = self.peek() else {
                let text: String = self.src[start..].chars().take(40).collect();
                self.issue(IssueCategory::BadLiteral, start, "unterminated string literal", &text);
                return Tok::Invalid;
            };
            if c == quote {
                if !long {
                    self.bump();
                    break;
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    // a long string may end with up to two extra quotes
                    if self.peek_at(3) == Some(quote) {
                        out.push(c);
                        self.bump();
                        continue;
                    }
                    self.bump();
                    self.bump();
                    self.bump();
                    break;
                }
                out.push(c);
                self.bump();
                continue;
            }
            if !long && (c == '\n' || c == '\r') {
                let text = self.src[start..self.pos].to_string();
                self.issue(IssueCategory::BadLiteral, start, "line break in short string literal", &text);
                return Tok::Invalid;
            }
            if c == '\\' {
                self.bump();
                let e = self.peek();
                match e {
                    Some('t') => out.push('\t'),
                    Some('b') => out.push('\u{8}'),
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('f') => out.push('\u{c}'),
                    Some('"') => out.push('"'),
                    Some('\'') => out.push('\''),
                    Some('\\') => out.push('\\'),
                    Some('u') | Some('U') => {
                        match self.unicode_escape() {
                            Some(ch) => out.push(ch),
                            None => bad_escape = true,
                        }
                        continue;
                    }
                    _ => bad_escape = true,
                }
                if e.is_some() {
                    self.bump();
                }
                continue;
            }
            out.push(c);
            self.bump();
        }
        if bad_escape {
            let text = self.src[start..self.pos].to_string();
            self.issue(IssueCategory::BadLiteral, start, "invalid escape sequence in string", &text);
            return Tok::Invalid;
        }
        Tok::Str(out)
    }

    fn number(&mut self) -> Tok {
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.bump();
        }
        let int_part = self.take_while(|c| c.is_ascii_digit());
        let mut frac = String::new();
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some('0'..='9')) {
            self.bump();
            frac = self.take_while(|c| c.is_ascii_digit());
        }
        let mut exp = false;
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            if self.take_while(|c| c.is_ascii_digit()).is_empty() {
                self.pos = save;
            } else {
                exp = true;
            }
        }
        let text = self.src[start..self.pos].to_string();
        if int_part.is_empty() && frac.is_empty() {
            self.issue(IssueCategory::BadLiteral, start, "malformed number", &text);
            return Tok::Invalid;
        }
        if exp {
            Tok::Double(text)
        } else if !frac.is_empty() {
            Tok::Decimal(text)
        } else {
            Tok::Integer(text)
        }
    }
}

fn valid_lang_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let first = parts.next().unwrap_or("");
    !first.is_empty()
        && first.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

pub(crate) fn is_pn_chars_base(c: char) -> bool {
    c.is_ascii_alphabetic()
        || matches!(c,
            '\u{C0}'..='\u{D6}' | '\u{D8}'..='\u{F6}' | '\u{F8}'..='\u{2FF}' | '\u{370}'..='\u{37D}'
            | '\u{37F}'..='\u{1FFF}' | '\u{200C}'..='\u{200D}' | '\u{2070}'..='\u{218F}'
            | '\u{2C00}'..='\u{2FEF}' | '\u{3001}'..='\u{D7FF}' | '\u{F900}'..='\u{FDCF}'
            | '\u{FDF0}'..='\u{FFFD}' | '\u{10000}'..='\u{EFFFF}')
}

pub(crate) fn is_pn_chars_u(c: char) -> bool {
    is_pn_chars_base(c) || c == '_'
}

pub(crate) fn is_pn_chars(c: char) -> bool {
    is_pn_chars_u(c)
        || c == '-'
        || c.is_ascii_digit()
        || c == '\u{B7}'
        || matches!(c, '\u{300}'..='\u{36F}' | '\u{203F}'..='\u{2040}')
}
