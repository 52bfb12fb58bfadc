use super::expr::{BinaryOp, Expr, UnaryOp};
use super::lexer::{tokenize, Tok, Token};
use super::{Assignment, JdlError, JdlFile};

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, JdlError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, message: impl Into<String>) -> JdlError {
        JdlError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, JdlError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(self.error_at(&t, format!("expected {what}, found {}", describe(&t.tok))))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if &self.peek().tok == want {
            self.next();
            true
        } else {
            false
        }
    }

    fn file(&mut self) -> Result<JdlFile, JdlError> {
        let bracketed = self.eat(&Tok::LBracket);
        let mut assignments = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof if !bracketed => break,
                Tok::RBracket if bracketed => {
                    self.next();
                    let end = self.next();
                    if end.tok != Tok::Eof {
                        return Err(self.error_at(&end, "trailing input after `]`"));
                    }
                    break;
                }
                Tok::Ident(name) => {
                    self.next();
                    self.expect(Tok::Assign, "`=`")?;
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    assignments.push(Assignment {
                        name: name.clone(),
                        value,
                        line: t.line,
                    });
                }
                other => {
                    return Err(self.error_at(
                        &t,
                        format!("expected attribute name, found {}", describe(other)),
                    ))
                }
            }
        }
        Ok(JdlFile { assignments })
    }

    fn expr(&mut self) -> Result<Expr, JdlError> {
        self.binary(1)
    }

    fn binary_op(tok: &Tok) -> Option<BinaryOp> {
        Some(match tok {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            _ => return None,
        })
    }

    // Precedence climbing; every level is left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, JdlError> {
        if min_prec > 4 {
            return self.unary();
        }
        let mut lhs = self.binary(min_prec + 1)?;
        while let Some(op) = Self::binary_op(&self.peek().tok) {
            if op.precedence() != min_prec {
                break;
            }
            self.next();
            let rhs = self.binary(min_prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, JdlError> {
        if self.eat(&Tok::Bang) {
            return Ok(Expr::unary(UnaryOp::Not, self.unary()?));
        }
        if self.eat(&Tok::Minus) {
            return Ok(Expr::unary(UnaryOp::Neg, self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, JdlError> {
        let t = self.next();
        match t.tok {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBrace => {
                let mut items = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        items.push(self.expr()?);
                        if self.eat(&Tok::Comma) {
                            continue;
                        }
                        self.expect(Tok::RBrace, "`,` or `}`")?;
                        break;
                    }
                }
                Ok(Expr::List(items))
            }
            Tok::Ident(ref name) => match name.to_ascii_lowercase().as_str() {
                "true" => Ok(Expr::Bool(true)),
                "false" => Ok(Expr::Bool(false)),
                "other" => {
                    self.expect(Tok::Dot, "`.` after `other`")?;
                    let n = self.next();
                    match &n.tok {
                        Tok::Ident(attr) => Ok(Expr::Attr(attr.clone())),
                        other => Err(self.error_at(
                            &n,
                            format!("expected attribute name, found {}", describe(other)),
                        )),
                    }
                }
                "member" => {
                    self.expect(Tok::LParen, "`(` after `Member`")?;
                    let v = self.expr()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let l = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Expr::member(v, l))
                }
                _ => Err(self.error_at(
                    &t,
                    format!("unexpected identifier `{name}` (attribute references need `other.`)"),
                )),
            },
            ref other => Err(self.error_at(&t, format!("expected expression, found {}", describe(other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Num(n) => format!("number `{n}`"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Eof => "end of input".into(),
        other => format!("`{}`", match other {
            Tok::Assign => "=",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Bang => "!",
            Tok::Minus => "-",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            _ => "?",
        }),
    }
}

pub fn parse_file(src: &str) -> Result<JdlFile, JdlError> {
    Parser::new(src)?.file()
}

pub fn parse_expr(src: &str) -> Result<Expr, JdlError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    let t = p.next();
    if t.tok != Tok::Eof {
        return Err(p.error_at(&t, format!("unexpected {} after expression", describe(&t.tok))));
    }
    Ok(e)
}
