//! Infix text form: `x1..xd` (1-based), `+ - * /`, unary minus, function
//! calls `sqrt log exp sin cos`, decimal literals and `pi`.
//!
//! As an input convenience, `a^k` with an integer literal `k` expands to
//! repeated multiplication (or its reciprocal for negative `k`), and `c<k>`
//! names constant placeholder `k`. The printer never emits either `^` or
//! the `neg`/`inv`/`square` node names.

use super::dag::{BinaryOp, DagBuilder, ExprDag, Node, NodeId, UnaryOp};
use super::ExprError;
use crate::prelude::*;

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// If set, the name `y` parses as this variable index.
    pub y_index: Option<usize>,
}

/// Parses an expression with variables `x1..xd`.
pub fn parse(src: &str) -> Result<ExprDag, ExprError> {
    parse_with(src, &ParseOptions::default())
}

pub fn parse_with(src: &str, opts: &ParseOptions) -> Result<ExprDag, ExprError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, b: DagBuilder::new(), opts };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(p.b.finish(root))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    b: DagBuilder,
    opts: &'a ParseOptions,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> ExprError {
        ExprError::Parse { position: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<NodeId, ExprError> {
        let mut acc = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(acc),
            };
            self.pos += 1;
            let rhs = self.term()?;
            acc = self.b.binary(op, acc, rhs);
        }
    }

    fn term(&mut self) -> Result<NodeId, ExprError> {
        let mut acc = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(acc),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            acc = self.b.binary(op, acc, rhs);
        }
    }

    fn unary(&mut self) -> Result<NodeId, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            // A minus directly in front of a literal is part of the literal.
            if let Some(c) = self.src.get(self.pos) {
                if c.is_ascii_digit() || *c == b'.' {
                    let v = self.number()?;
                    let lit = self.b.constant(-v);
                    return self.power_suffix(lit);
                }
            }
            let a = self.unary()?;
            return Ok(self.b.unary(UnaryOp::Neg, a));
        }
        let a = self.atom()?;
        self.power_suffix(a)
    }

    fn power_suffix(&mut self, base: NodeId) -> Result<NodeId, ExprError> {
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let neg = if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let k: usize = core::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&k| k >= 1 && k <= 64)
            .ok_or_else(|| self.err("exponent must be an integer literal between 1 and 64"))?;
        let mut acc = base;
        for _ in 1..k {
            acc = self.b.binary(BinaryOp::Mul, acc, base);
        }
        if neg {
            let one = self.b.constant(1.0);
            acc = self.b.binary(BinaryOp::Div, one, acc);
        }
        Ok(acc)
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        core::str::from_utf8(&s[start..i])
            .ok()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| {
                ExprError::Parse { position: start, message: "malformed number".to_string() }
            })
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn atom(&mut self) -> Result<NodeId, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok(self.b.constant(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let name = self.ident().to_string();
                if let Some(op) = function_name(&name) {
                    if self.peek() != Some(b'(') {
                        return Err(self.err("expected '(' after function name"));
                    }
                    self.pos += 1;
                    let a = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected ')'"));
                    }
                    self.pos += 1;
                    return Ok(self.b.unary(op, a));
                }
                if name == "pi" {
                    return Ok(self.b.constant(core::f64::consts::PI));
                }
                if name == "y" {
                    if let Some(i) = self.opts.y_index {
                        return Ok(self.b.var(i));
                    }
                }
                let indexed = |prefix: &str| -> Option<usize> {
                    let rest = name.strip_prefix(prefix)?;
                    if rest.is_empty() || !rest.bytes().all(|c| c.is_ascii_digit()) {
                        return None;
                    }
                    rest.parse().ok()
                };
                if let Some(k) = indexed("x") {
                    if k == 0 {
                        return Err(ExprError::Parse {
                            position: start,
                            message: "variables are numbered from x1".to_string(),
                        });
                    }
                    return Ok(self.b.var(k - 1));
                }
                if let Some(k) = indexed("c") {
                    return Ok(self.b.param(k));
                }
                Err(ExprError::Parse { position: start, message: format!("unknown name '{name}'") })
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }
}

fn function_name(s: &str) -> Option<UnaryOp> {
    match s {
        "sqrt" => Some(UnaryOp::Sqrt),
        "log" => Some(UnaryOp::Log),
        "exp" => Some(UnaryOp::Exp),
        "sin" => Some(UnaryOp::Sin),
        "cos" => Some(UnaryOp::Cos),
        _ => None,
    }
}

// Binding strength used for parenthesization.
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_NEG: u8 = 3;
const P_ATOM: u8 = 4;

pub(crate) fn print(dag: &ExprDag, name: &dyn Fn(usize) -> String) -> String {
    let nodes = dag.nodes();
    // (text, precedence) per node; shared nodes are printed once and reused.
    let mut out: Vec<(String, u8)> = Vec::with_capacity(nodes.len());
    for n in nodes {
        let item = match *n {
            Node::Var(i) => (name(i), P_ATOM),
            Node::Param(k) => (format!("c{k}"), P_ATOM),
            Node::Const(c) => {
                let v = c.get();
                if v < 0.0 {
                    (format_number(v), P_NEG)
                } else {
                    (format_number(v), P_ATOM)
                }
            }
            Node::Unary(op, a) => {
                let (ref s, p) = out[a];
                match op {
                    UnaryOp::Neg => {
                        // `-2` would read back as a literal, `--x` is fine
                        // but hard to read.
                        let bare = p == P_ATOM && !matches!(nodes[a], Node::Const(_));
                        if bare {
                            (format!("-{s}"), P_NEG)
                        } else {
                            (format!("-({s})"), P_NEG)
                        }
                    }
                    UnaryOp::Inv => {
                        if p == P_ATOM {
                            (format!("1/{s}"), P_MUL)
                        } else {
                            (format!("1/({s})"), P_MUL)
                        }
                    }
                    UnaryOp::Square => {
                        if p == P_ATOM {
                            (format!("{s}*{s}"), P_MUL)
                        } else {
                            (format!("({s})*({s})"), P_MUL)
                        }
                    }
                    _ => (format!("{}({s})", op.name()), P_ATOM),
                }
            }
            Node::Binary(op, l, r) => {
                let prec = match op {
                    BinaryOp::Add | BinaryOp::Sub => P_ADD,
                    BinaryOp::Mul | BinaryOp::Div => P_MUL,
                };
                let (ref ls, lp) = out[l];
                let (ref rs, rp) = out[r];
                let lt = if lp < prec { format!("({ls})") } else { ls.clone() };
                // Squares print as products, so on the right of `*` or `/`
                // they need parentheses like any other product.
                let rt = if rp <= prec { format!("({rs})") } else { rs.clone() };
                let sep = match op {
                    BinaryOp::Add | BinaryOp::Sub => format!(" {} ", op.symbol()),
                    _ => op.symbol().to_string(),
                };
                (format!("{lt}{sep}{rt}"), prec)
            }
        };
        out.push(item);
    }
    out.pop().map(|(s, _)| s).unwrap_or_default()
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(s: &str) -> String {
        parse(s).unwrap().to_text()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(rt("x1 - (x2 - x3)"), "x1 - (x2 - x3)");
        assert_eq!(rt("x1 - x2 - x3"), "x1 - x2 - x3");
        assert_eq!(rt("x1/(x2*x3)"), "x1/(x2*x3)");
        assert_eq!(rt("(x1+x2)*x3"), "(x1 + x2)*x3");
        assert_eq!(rt("sqrt(x1*x2)"), "sqrt(x1*x2)");
    }

    #[test]
    fn unary_minus_and_literals() {
        let e = parse("-2*x1").unwrap();
        assert!(matches!(e.nodes()[0], Node::Const(c) if c.get() == -2.0));
        let n = parse("-x1*x2").unwrap();
        assert!(matches!(n.root_node(), Node::Binary(BinaryOp::Mul, _, _)));
        assert_eq!(parse(&n.to_text()).unwrap(), n);
        let m = parse("-(x1*x2)").unwrap();
        assert_eq!(parse(&m.to_text()).unwrap(), m);
        let k = parse("-(2)").unwrap();
        assert!(matches!(k.root_node(), Node::Unary(UnaryOp::Neg, _)));
        assert_eq!(parse(&k.to_text()).unwrap(), k);
        assert_eq!(parse("x1 - -3").unwrap().eval_point(&[1.0]), 4.0);
    }

    #[test]
    fn names_and_errors() {
        let e = parse_with("y/sqrt(x1)", &ParseOptions { y_index: Some(3) }).unwrap();
        assert_eq!(e.variables(), vec![0, 3]);
        assert!(parse("y").is_err());
        assert!(parse("x0").is_err());
        assert!(parse("foo(x1)").is_err());
        assert!(parse("x1 +").is_err());
        assert!(parse("(x1").is_err());
        assert!((parse("pi").unwrap().eval_point(&[]) - core::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse("x1^3").unwrap().eval_point(&[2.0]), 8.0);
        assert_eq!(parse("x1^-2").unwrap().eval_point(&[2.0]), 0.25);
        assert_eq!(parse("1.5e3").unwrap().eval_point(&[]), 1500.0);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0, 0.5, 1e-20, 6.02214076e23, 1.0 / 3.0, 12345.678] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
