//! Recursive-descent parser.
//!
//! ```text
//! expr      := term (("+" | "-") term)*
//! term      := unary (("*" | "/") unary)*
//! unary     := "-" unary | primary
//! primary   := number | ident | call | piecewise | "(" expr ")"
//! call      := ("abs" | "min" | "max") "(" expr ("," expr)* ")"
//! piecewise := "piecewise" "(" (cond ":" expr ",")* "else" ":" expr ")"
//! cond      := expr ("<" | "<=" | ">" | ">=") expr
//! ```

use super::{BinOp, CmpOp, Condition, Expr, ExprError, Func, Node};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Colon,
    Cmp(CmpOp),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::End => "end of input".to_string(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| syntax(start, format!("malformed number `{lit}`")))?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let (tok, len) = match c {
            b'+' => (Tok::Plus, 1),
            b'-' => (Tok::Minus, 1),
            b'*' => (Tok::Star, 1),
            b'/' => (Tok::Slash, 1),
            b'(' => (Tok::LParen, 1),
            b')' => (Tok::RParen, 1),
            b',' => (Tok::Comma, 1),
            b':' => (Tok::Colon, 1),
            b'<' if bytes.get(i + 1) == Some(&b'=') => (Tok::Cmp(CmpOp::Le), 2),
            b'>' if bytes.get(i + 1) == Some(&b'=') => (Tok::Cmp(CmpOp::Ge), 2),
            b'<' => (Tok::Cmp(CmpOp::Lt), 1),
            b'>' => (Tok::Cmp(CmpOp::Gt), 1),
            _ => {
                if text[i..].starts_with('≤') {
                    (Tok::Cmp(CmpOp::Le), '≤'.len_utf8())
                } else if text[i..].starts_with('≥') {
                    (Tok::Cmp(CmpOp::Ge), '≥'.len_utf8())
                } else {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err(syntax(i, format!("unexpected character `{ch}`")));
                }
            }
        };
        out.push((tok, start));
        i += len;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    if name == "piecewise" {
                        return self.piecewise();
                    }
                    self.call(name, at)
                } else if name == "piecewise" || name == "else" {
                    Err(syntax(at, format!("`{name}` is reserved")))
                } else if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(i))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset: at })
                }
            }
            other => Err(syntax(at, format!("expected an operand, found {}", other.describe()))),
        }
    }

    fn call(&mut self, name: String, at: usize) -> Result<Node, ExprError> {
        let func = Func::lookup(&name).ok_or_else(|| ExprError::UnknownFunction {
            name: name.clone(),
            offset: at,
        })?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        let (ok, expected) = match func {
            Func::Abs => (args.len() == 1, "1"),
            Func::Min | Func::Max => (args.len() >= 2, "at least 2"),
        };
        if !ok {
            return Err(ExprError::Arity {
                name,
                expected,
                found: args.len(),
                offset: at,
            });
        }
        Ok(Node::Call(func, args))
    }

    fn piecewise(&mut self) -> Result<Node, ExprError> {
        let mut branches = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Ident(s) if s == "else") {
                self.bump();
                self.expect(Tok::Colon)?;
                let default = self.expr()?;
                if *self.peek() == Tok::Comma {
                    return Err(syntax(self.offset(), "`else` must be the last piecewise branch"));
                }
                self.expect(Tok::RParen)?;
                return Ok(Node::Piecewise {
                    branches,
                    default: Box::new(default),
                });
            }
            if *self.peek() == Tok::RParen || *self.peek() == Tok::End {
                return Err(syntax(self.offset(), "piecewise requires a final `else` branch"));
            }
            let lhs = self.expr()?;
            let op = match self.bump() {
                Tok::Cmp(op) => op,
                other => {
                    let at = self.toks[self.pos.saturating_sub(1)].1;
                    return Err(syntax(at, format!("expected a comparison, found {}", other.describe())));
                }
            };
            let rhs = self.expr()?;
            self.expect(Tok::Colon)?;
            let body = self.expr()?;
            if *self.peek() == Tok::RParen {
                return Err(syntax(self.offset(), "piecewise requires a final `else` branch"));
            }
            self.expect(Tok::Comma)?;
            branches.push((Condition { lhs, op, rhs }, body));
        }
    }
}

/// Parses `text` with the given variable names in scope.
pub fn parse(text: &str, vars: &[&str]) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        vars,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), format!("unexpected {}", p.peek().describe())));
    }
    Ok(Expr::from_node(root, vars))
}
