//! Arithmetic expressions over `x`, `y` used in configuration files.
//!
//! Grammar (standard precedence, `^` right-associative, no implicit
//! multiplication):
//!
//! ```text
//! expr   = term { ("+" | "-") term }
//! term   = unary { ("*" | "/") unary }
//! unary  = "-" unary | "+" unary | power
//! power  = atom [ "^" unary ]
//! atom   = number | "x" | "y" | "pi" | "e" | func "(" expr ")" | "(" expr ")"
//! func   = sin | cos | exp | sinh | cosh | sqrt
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("position {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sinh,
    Cosh,
    Sqrt,
}

impl Func {
    const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Sinh,
        Func::Cosh,
        Func::Sqrt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(&self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Expression tree. Literals are non-negative; signs are `Neg` nodes, and
/// `Neg(Neg(e))` never occurs in trees built by [`parse_expression`] or
/// [`Expr::neg`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Pi,
    E,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

const UNARY_PRECEDENCE: u8 = 3;

impl Expr {
    /// Negation that cancels an existing sign.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Expr {
        match self {
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Pi => std::f64::consts::PI,
            Expr::E => std::f64::consts::E,
            Expr::Neg(e) => -e.eval(x, y)?,
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(x, y)?, r.eval(x, y)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Domain(format!("division by zero in {self}")));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, arg) => {
                let a = arg.eval(x, y)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sinh => a.sinh(),
                    Func::Cosh => a.cosh(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(ExprError::Domain(format!(
                "non-finite value of {self} at x={x}, y={y}"
            )));
        }
        Ok(v)
    }

    /// Evaluates an expression that must not depend on `x` or `y`.
    pub fn eval_constant(&self) -> Result<f64, ExprError> {
        if self.uses_variables() {
            return Err(ExprError::Domain(format!("{self} is not a constant")));
        }
        self.eval(0.0, 0.0)
    }

    pub fn uses_variables(&self) -> bool {
        match self {
            Expr::X | Expr::Y => true,
            Expr::Num(_) | Expr::Pi | Expr::E => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_variables(),
            Expr::Bin(_, l, r) => l.uses_variables() || r.uses_variables(),
        }
    }

    /// Substitutes `x -> -x`. Applying it twice returns the original tree.
    pub fn reflect_x(&self) -> Expr {
        match self {
            Expr::X => Expr::X.neg(),
            Expr::Neg(e) => e.reflect_x().neg(),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(l.reflect_x()), Box::new(r.reflect_x())),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.reflect_x())),
            other => other.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Neg(_) => UNARY_PRECEDENCE,
            Expr::Bin(op, ..) => op.precedence(),
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    /// Prints with the minimal parentheses needed to parse back to the same
    /// tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => f.write_str("x"),
            Expr::Y => f.write_str("y"),
            Expr::Pi => f.write_str("pi"),
            Expr::E => f.write_str("e"),
            Expr::Neg(e) => {
                // Operands of unary minus parse at power level or as another
                // unary; binary sums and products need parentheses.
                if matches!(**e, Expr::Bin(op, ..) if op != BinOp::Pow) {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                let left_paren = if *op == BinOp::Pow {
                    // The base is an atom.
                    l.precedence() <= p
                } else {
                    l.precedence() < p
                };
                let right_paren = if *op == BinOp::Pow {
                    matches!(**r, Expr::Bin(o, ..) if o != BinOp::Pow)
                } else {
                    r.precedence() <= p
                };
                let wrap = |e: &Expr, paren: bool| {
                    if paren {
                        format!("({e})")
                    } else {
                        e.to_string()
                    }
                };
                write!(
                    f,
                    "{} {} {}",
                    wrap(l, left_paren),
                    op.symbol(),
                    wrap(r, right_paren)
                )
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| ExprError::Parse {
                pos: start,
                message: format!("malformed number '{s}'"),
            })?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(text[start..i].to_string())));
        } else if "+-*/^".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Token::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Token::RParen));
            i += 1;
        } else {
            return Err(ExprError::Parse {
                pos: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Parse {
            pos: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of expression");
        };
        let atom = match tok {
            Token::Num(v) => {
                self.pos += 1;
                Expr::Num(v)
            }
            Token::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                e
            }
            Token::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Expr::X,
                    "y" => Expr::Y,
                    "pi" => Expr::Pi,
                    "e" => Expr::E,
                    _ => {
                        let Some(func) = Func::ALL.into_iter().find(|f| f.name() == name) else {
                            self.pos -= 1;
                            return self.error(format!("unknown identifier '{name}'"));
                        };
                        if self.peek() != Some(&Token::LParen) {
                            return self.error(format!("expected '(' after {name}"));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        Expr::Call(func, Box::new(arg))
                    }
                }
            }
            Token::Op(c) => return self.error(format!("unexpected operator '{c}'")),
            Token::RParen => return self.error("unexpected ')'"),
        };
        match self.peek() {
            Some(Token::Num(_) | Token::Ident(_) | Token::LParen) => {
                self.error("implicit multiplication is not allowed")
            }
            _ => Ok(atom),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.error("expected ')'")
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn eval(text: &str, x: f64, y: f64) -> Result<f64, ExprError> {
        parse_expression(text)?.eval(x, y)
    }

    #[test]
    fn examples() {
        assert_eq!(eval("x^2 + y", 2.0, 3.0).unwrap(), 7.0);
        for x in [-3.0, 0.1, 1.7, 12.0] {
            assert!((eval("sin(x)*sin(x)+cos(x)*cos(x)", x, 0.0).unwrap() - 1.0).abs() <= 1e-15);
        }
        assert!(matches!(
            eval("sqrt(-1)", 0.0, 0.0),
            Err(ExprError::Domain(_))
        ));
        assert!(parse_expression("sin(pi*y/3.14159) * exp(-x)").is_ok());
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("2^3^2", 0.0, 0.0).unwrap(), 512.0);
        assert_eq!(eval("-2^2", 0.0, 0.0).unwrap(), -4.0);
        assert_eq!(eval("2^-1", 0.0, 0.0).unwrap(), 0.5);
        assert_eq!(eval("8/4/2", 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(eval("1-2-3", 0.0, 0.0).unwrap(), -4.0);
        assert_eq!(eval("1.5e-3*2E2", 0.0, 0.0).unwrap(), 0.3);
    }

    #[test]
    fn errors_have_positions() {
        match parse_expression("2 x") {
            Err(ExprError::Parse { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("{other:?}"),
        }
        match parse_expression("sin(x") {
            Err(ExprError::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_expression("foo(x)").is_err());
        assert!(parse_expression("x $ y").is_err());
        assert!(parse_expression("").is_err());
        assert!(parse_expression("(x").is_err());
        assert!(eval("1/(x-x)", 1.0, 0.0).is_err());
    }

    /// Independent evaluator: a shunting-yard pass over the token stream.
    fn reference_eval(text: &str, x: f64, y: f64) -> f64 {
        let toks = tokenize(text).unwrap();
        let mut out: Vec<f64> = Vec::new();
        let mut ops: Vec<String> = Vec::new();
        let prec = |o: &str| match o {
            "+" | "-" => 1,
            "*" | "/" => 2,
            "neg" => 3,
            "^" => 4,
            _ => 0,
        };
        let apply = |o: &str, out: &mut Vec<f64>| match o {
            "neg" => {
                let a = out.pop().unwrap();
                out.push(-a)
            }
            "sin" | "cos" | "exp" | "sinh" | "cosh" | "sqrt" => {
                let a = out.pop().unwrap();
                out.push(match o {
                    "sin" => a.sin(),
                    "cos" => a.cos(),
                    "exp" => a.exp(),
                    "sinh" => a.sinh(),
                    "cosh" => a.cosh(),
                    _ => a.sqrt(),
                })
            }
            _ => {
                let b = out.pop().unwrap();
                let a = out.pop().unwrap();
                out.push(match o {
                    "+" => a + b,
                    "-" => a - b,
                    "*" => a * b,
                    "/" => a / b,
                    _ => a.powf(b),
                })
            }
        };
        let mut prev_operand = false;
        for (_, t) in toks {
            match t {
                Token::Num(v) => {
                    out.push(v);
                    prev_operand = true;
                }
                Token::Ident(s) => match s.as_str() {
                    "x" => {
                        out.push(x);
                        prev_operand = true
                    }
                    "y" => {
                        out.push(y);
                        prev_operand = true
                    }
                    "pi" => {
                        out.push(std::f64::consts::PI);
                        prev_operand = true
                    }
                    "e" => {
                        out.push(std::f64::consts::E);
                        prev_operand = true
                    }
                    f => ops.push(f.to_string()),
                },
                Token::LParen => {
                    ops.push("(".into());
                    prev_operand = false;
                }
                Token::RParen => {
                    while ops.last().unwrap() != "(" {
                        let o = ops.pop().unwrap();
                        apply(&o, &mut out);
                    }
                    ops.pop();
                    if let Some(f) = ops.last() {
                        if f.chars().all(|c| c.is_ascii_alphabetic()) && f != "neg" {
                            let f = ops.pop().unwrap();
                            apply(&f, &mut out);
                        }
                    }
                    prev_operand = true;
                }
                Token::Op(c) => {
                    let o = if c == '-' && !prev_operand {
                        "neg".to_string()
                    } else {
                        c.to_string()
                    };
                    let right = o == "^" || o == "neg";
                    while let Some(top) = ops.last() {
                        let tp = prec(top);
                        if top != "(" && tp > 0 && (tp > prec(&o) || (tp == prec(&o) && !right)) {
                            let t = ops.pop().unwrap();
                            apply(&t, &mut out);
                        } else {
                            break;
                        }
                    }
                    ops.push(o);
                    prev_operand = false;
                }
            }
        }
        while let Some(o) = ops.pop() {
            apply(&o, &mut out);
        }
        out[0]
    }

    #[test]
    fn agrees_with_reference_evaluator() {
        let texts = [
            "x^2 + y",
            "sin(pi*y/3.14159) * exp(-x)",
            "-x^2 + 3*y - 2/(1+x*x)",
            "cosh(x)/sinh(1+y) - sqrt(1+x*x)*cos(y)^2",
            "2^x^0.5 - -y",
            "exp(-(x-1)^2/0.3) * (1 - y/2)",
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for t in texts {
            let e = parse_expression(t).unwrap();
            for _ in 0..100 {
                let (x, y) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..3.0));
                let a = e.eval(x, y).unwrap();
                let b = reference_eval(t, x, y);
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn display_round_trips() {
        for t in [
            "x^2 + y",
            "-(x + 1) * 2",
            "2^3^2",
            "(2^3)^2",
            "1 - (2 - 3)",
            "1 / (2 * x)",
            "-x^2",
            "(-x)^2",
            "--x",
            "sin(-x) + 1e-7 * y",
            "2^-x",
            "2^(x + 1)",
            "-(-x * y)",
        ] {
            let e = parse_expression(t).unwrap();
            let back = parse_expression(&e.to_string()).unwrap();
            assert_eq!(e, back, "{t} -> {e}");
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        for t in [
            "x",
            "-x",
            "--x",
            "sin(x) * exp(-(x - 1)^2) + y",
            "-(x*y)",
            "2^-x",
        ] {
            let e = parse_expression(t).unwrap();
            assert_eq!(e.reflect_x().reflect_x(), e, "{t}");
            let (x, y) = (0.37, 1.1);
            assert_eq!(e.reflect_x().eval(-x, y).unwrap(), e.eval(x, y).unwrap());
        }
    }
}
