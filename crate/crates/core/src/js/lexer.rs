//! Tokenizer for the JavaScript subset. Handles comments, strings, template
//! literals (substitutions are tokenized recursively), regex literals and
//! the full punctuator set; everything else is an identifier or number.

use super::JsParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number,
    Str(String),
    /// Substitution token streams of a template literal.
    Template(Vec<Vec<Token>>),
    Regex,
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub column: u32,
    /// A line terminator precedes this token.
    pub newline_before: bool,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.kind, TokenKind::Punct(q) if q == p)
    }

    pub fn is_ident(&self, name: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(n) if n == name)
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::Ident(n) => Some(n),
            _ => None,
        }
    }
}

const PUNCTUATORS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==", "!=",
    "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "**", "<<", ">>", "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%",
    "&", "|", "^", "!", "~", "?", ":", "=", ".", "@", "#",
];

/// Keywords after which a `/` starts a regular expression.
const REGEX_PREFIX_KEYWORDS: &[&str] = &[
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void", "throw", "case", "do",
    "else", "yield", "await",
];

pub fn tokenize(source: &str) -> Result<Vec<Token>, JsParseError> {
    let mut lexer = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
    };
    lexer.skip_shebang();
    lexer.tokens(false)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || c == '\u{200c}' || c == '\u{200d}'
}

impl Lexer {
    fn peek(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: u32, column: u32, message: impl Into<String>) -> JsParseError {
        JsParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_shebang(&mut self) {
        if self.peek(0) == Some('#') && self.peek(1) == Some('!') {
            while let Some(c) = self.peek(0) {
                if c == '\n' {
                    break;
                }
                self.bump();
            }
        }
    }

    /// Skips whitespace and comments; reports whether a newline was crossed.
    fn skip_trivia(&mut self) -> Result<bool, JsParseError> {
        let mut newline = false;
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some('\n'), _) => {
                    newline = true;
                    self.bump();
                }
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while let Some(c) = self.peek(0) {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(c), _) => {
                                newline |= c == '\n';
                                self.bump();
                            }
                            (None, _) => {
                                return Err(self.error(line, column, "unterminated comment"))
                            }
                        }
                    }
                }
                _ => return Ok(newline),
            }
        }
    }

    /// Lexes until end of input, or, inside a template substitution, until
    /// the `}` that closes it (which is consumed).
    fn tokens(&mut self, in_substitution: bool) -> Result<Vec<Token>, JsParseError> {
        let mut out: Vec<Token> = Vec::new();
        let mut depth = 0usize;
        loop {
            let newline_before = self.skip_trivia()?;
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek(0) else {
                if in_substitution {
                    return Err(self.error(line, column, "unterminated template substitution"));
                }
                return Ok(out);
            };
            let kind = if is_ident_start(c) || c == '\\' {
                let mut name = String::new();
                while let Some(c) = self.peek(0) {
                    if is_ident_part(c) || c == '\\' {
                        name.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(name)
            } else if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) {
                self.number();
                TokenKind::Number
            } else if c == '"' || c == '\'' {
                TokenKind::Str(self.string(c)?)
            } else if c == '`' {
                TokenKind::Template(self.template()?)
            } else if c == '/' && regex_allowed(out.last()) {
                self.regex()?;
                TokenKind::Regex
            } else {
                if in_substitution {
                    if c == '{' {
                        depth += 1;
                    } else if c == '}' {
                        if depth == 0 {
                            self.bump();
                            return Ok(out);
                        }
                        depth -= 1;
                    }
                }
                let punct = PUNCTUATORS
                    .iter()
                    .find(|p| p.chars().enumerate().all(|(i, pc)| self.peek(i) == Some(pc)))
                    .copied();
                match punct {
                    Some(p) => {
                        for _ in 0..p.chars().count() {
                            self.bump();
                        }
                        TokenKind::Punct(p)
                    }
                    None => {
                        return Err(self.error(line, column, format!("unexpected character `{c}`")))
                    }
                }
            };
            out.push(Token {
                kind,
                line,
                column,
                newline_before,
            });
        }
    }

    fn number(&mut self) {
        while let Some(c) = self.peek(0) {
            let exponent_sign = (c == '+' || c == '-')
                && matches!(self.chars.get(self.pos.wrapping_sub(1)), Some('e' | 'E'))
                && !self.number_is_hex();
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || exponent_sign {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn number_is_hex(&self) -> bool {
        let mut i = self.pos;
        while i > 0 && (self.chars[i - 1].is_ascii_alphanumeric() || self.chars[i - 1] == '.') {
            i -= 1;
        }
        matches!(
            (self.chars.get(i), self.chars.get(i + 1)),
            (Some('0'), Some('x' | 'X'))
        )
    }

    fn string(&mut self, quote: char) -> Result<String, JsParseError> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                Some('\\') => {
                    if let Some(escaped) = self.bump() {
                        if escaped != '\n' {
                            value.push(escaped);
                        }
                    }
                }
                Some(c) if c == quote => return Ok(value),
                Some('\n') | None => return Err(self.error(line, column, "unterminated string")),
                Some(c) => value.push(c),
            }
        }
    }

    fn template(&mut self) -> Result<Vec<Vec<Token>>, JsParseError> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut substitutions = Vec::new();
        loop {
            match self.peek(0) {
                Some('\\') => {
                    self.bump();
                    self.bump();
                }
                Some('`') => {
                    self.bump();
                    return Ok(substitutions);
                }
                Some('$') if self.peek(1) == Some('{') => {
                    self.bump();
                    self.bump();
                    substitutions.push(self.tokens(true)?);
                }
                Some(_) => {
                    self.bump();
                }
                None => return Err(self.error(line, column, "unterminated template literal")),
            }
        }
    }

    fn regex(&mut self) -> Result<(), JsParseError> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut in_class = false;
        loop {
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some('[') => in_class = true,
                Some(']') => in_class = false,
                Some('/') if !in_class => break,
                Some('\n') | None => return Err(self.error(line, column, "unterminated regex")),
                Some(_) => {}
            }
        }
        while self.peek(0).is_some_and(is_ident_part) {
            self.bump();
        }
        Ok(())
    }
}

fn regex_allowed(prev: Option<&Token>) -> bool {
    match prev.map(|t| &t.kind) {
        None => true,
        Some(TokenKind::Punct(p)) => !matches!(*p, ")" | "]" | "}"),
        Some(TokenKind::Ident(name)) => REGEX_PREFIX_KEYWORDS.contains(&name.as_str()),
        Some(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("a\n  bc").unwrap();
        assert_eq!((toks[0].line, toks[0].column), (1, 1));
        assert_eq!((toks[1].line, toks[1].column), (2, 3));
        assert!(toks[1].newline_before);
    }

    #[test]
    fn longest_punctuator_wins() {
        assert_eq!(
            kinds("a >>>= b => c"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct(">>>="),
                TokenKind::Ident("b".into()),
                TokenKind::Punct("=>"),
                TokenKind::Ident("c".into()),
            ]
        );
    }

    #[test]
    fn regex_versus_division() {
        assert_eq!(kinds("x = /a\\/b[/]/g")[2], TokenKind::Regex);
        assert_eq!(kinds("a / b / c")[1], TokenKind::Punct("/"));
        assert_eq!(kinds("return /x/.test(s)")[1], TokenKind::Regex);
    }

    #[test]
    fn comments_and_strings() {
        let k = kinds("// hi\n/* multi\nline */ 'it\\'s' \"x\"");
        assert_eq!(k, vec![TokenKind::Str("it's".into()), TokenKind::Str("x".into())]);
    }

    #[test]
    fn template_substitutions_are_tokenized() {
        let k = kinds("`a ${f({b: 1})} c ${g()}`");
        match &k[0] {
            TokenKind::Template(subs) => {
                assert_eq!(subs.len(), 2);
                assert!(subs[0][0].is_ident("f"));
                assert_eq!(subs[0].len(), 8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1e-3 0x1F .5 10n").len(), 4);
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let err = tokenize("\n  'abc").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
    }
}
