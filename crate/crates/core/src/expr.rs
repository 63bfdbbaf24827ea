//! Restricted expression language over chart coordinates `x0..` and vector
//! components `v0..`.
//!
//! Scenario files may give an expression either as a string
//! (`"0.5*(v0^2 + v1^2)"`) or as a tree
//! (`{"op": "mul", "args": [{"const": 0.5}, ...]}`).

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply<S: Real>(self, a: S) -> S {
        match self {
            Func::Sqrt => a.sqrt(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Tanh => a.tanh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    X(usize),
    V(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval<S: Real>(&self, x: &[S], v: &[S]) -> S {
        match self {
            Expr::Const(c) => S::from_f64(*c),
            Expr::X(i) => x[*i],
            Expr::V(i) => v[*i],
            Expr::Neg(a) => -a.eval(x, v),
            Expr::Add(a, b) => a.eval(x, v) + b.eval(x, v),
            Expr::Sub(a, b) => a.eval(x, v) - b.eval(x, v),
            Expr::Mul(a, b) => a.eval(x, v) * b.eval(x, v),
            Expr::Div(a, b) => a.eval(x, v) / b.eval(x, v),
            Expr::Pow(a, b) => {
                let base = a.eval(x, v);
                match **b {
                    Expr::Const(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(p as i32),
                    Expr::Const(p) => base.powf_const(p),
                    _ => (b.eval(x, v) * base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, v)),
        }
    }

    /// Evaluates a point field (no vector argument).
    pub fn eval_point<S: Real>(&self, x: &[S]) -> S {
        self.eval(x, &[])
    }

    /// Largest `(x index, v index)` referenced, each `None` if unused.
    pub fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        fn merge(a: Option<usize>, b: Option<usize>) -> Option<usize> {
            match (a, b) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            }
        }
        match self {
            Expr::Const(_) => (None, None),
            Expr::X(i) => (Some(*i), None),
            Expr::V(i) => (None, Some(*i)),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_indices(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                let (ax, av) = a.max_indices();
                let (bx, bv) = b.max_indices();
                (merge(ax, bx), merge(av, bv))
            }
        }
    }

    /// Checks that coordinates stay below `dim` and, if `point_only`, that
    /// no vector component is referenced.
    pub fn validate(&self, dim: usize, point_only: bool, what: &str) -> Result<()> {
        let (mx, mv) = self.max_indices();
        if let Some(i) = mx.filter(|i| *i >= dim) {
            return Err(Error::Scenario { field: what.into(), message: format!("x{i} exceeds dimension {dim}") });
        }
        if let Some(i) = mv {
            if point_only {
                return Err(Error::Scenario { field: what.into(), message: format!("point field may not use v{i}") });
            }
            if i >= dim {
                return Err(Error::Scenario { field: what.into(), message: format!("v{i} exceeds dimension {dim}") });
            }
        }
        Ok(())
    }

    fn from_json(value: &serde_json::Value) -> std::result::Result<Expr, String> {
        use serde_json::Value;
        match value {
            Value::Number(n) => n.as_f64().map(Expr::Const).ok_or_else(|| "bad number".to_string()),
            Value::String(s) => Expr::parse(s).map_err(|e| e.to_string()),
            Value::Object(map) => {
                if let Some(c) = map.get("const") {
                    return c.as_f64().map(Expr::Const).ok_or_else(|| "const must be a number".into());
                }
                if let Some(name) = map.get("var") {
                    let name = name.as_str().ok_or("var must be a string")?;
                    return match Expr::parse(name).map_err(|e| e.to_string())? {
                        e @ (Expr::X(_) | Expr::V(_)) => Ok(e),
                        _ => Err(format!("unknown variable {name:?}")),
                    };
                }
                let op = map.get("op").and_then(Value::as_str).ok_or("expression object needs op, var or const")?;
                let args = map.get("args").and_then(Value::as_array).ok_or("op needs an args array")?;
                let args: Vec<Expr> = args.iter().map(Expr::from_json).collect::<std::result::Result<_, _>>()?;
                let arity = |k: usize| {
                    if args.len() == k {
                        Ok(())
                    } else {
                        Err(format!("{op} takes {k} argument(s), got {}", args.len()))
                    }
                };
                let mut it = args.clone().into_iter().map(Box::new);
                let mut two = |f: fn(Box<Expr>, Box<Expr>) -> Expr| -> std::result::Result<Expr, String> {
                    arity(2)?;
                    Ok(f(it.next().unwrap(), it.next().unwrap()))
                };
                match op {
                    "add" => two(Expr::Add),
                    "sub" => two(Expr::Sub),
                    "mul" => two(Expr::Mul),
                    "div" => two(Expr::Div),
                    "pow" => two(Expr::Pow),
                    "neg" => {
                        arity(1)?;
                        Ok(Expr::Neg(Box::new(args[0].clone())))
                    }
                    other => {
                        let f = Func::from_name(other).ok_or_else(|| format!("unknown op {other:?}"))?;
                        arity(1)?;
                        Ok(Expr::Call(f, Box::new(args[0].clone())))
                    }
                }
            }
            _ => Err("expression must be a string, number or object".into()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::X(i) => write!(f, "x{i}"),
            Expr::V(i) => write!(f, "v{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Serialize for Expr {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        Expr::from_json(&value).map_err(de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse { position: self.pos, message: format!("{msg} in expression {:?}", self.src) }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat('^') {
            // right associative, binds tighter than unary minus on the left
            let exp = self.unary()?;
            // fold constant powers so that `2^3^2` stays an integer power
            let exp = match exp {
                Expr::Pow(ref a, ref b) => match (&**a, &**b) {
                    (Expr::Const(a), Expr::Const(b)) => Expr::Const(a.powf(*b)),
                    _ => exp,
                },
                Expr::Neg(ref a) => match **a {
                    Expr::Const(a) => Expr::Const(-a),
                    _ => exp,
                },
                _ => exp,
            };
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.eat('(') {
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(e);
        }
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' => {
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                if self.peek().is_some_and(|c| c == 'e' || c == 'E') {
                    let save = self.pos;
                    self.pos += 1;
                    if self.peek().is_some_and(|c| c == '+' || c == '-') {
                        self.pos += 1;
                    }
                    if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                            self.pos += 1;
                        }
                    } else {
                        self.pos = save;
                    }
                }
                let text = &self.src[start..self.pos];
                text.parse::<f64>().map(Expr::Const).map_err(|_| self.error("malformed number"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if let Some(f) = Func::from_name(name) {
                    if !self.eat('(') {
                        return Err(self.error("expected '(' after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("expected ')'"));
                    }
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name {
                    "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Const(std::f64::consts::E)),
                    _ => {}
                }
                let (kind, idx) = name.split_at(1);
                match (kind, idx.parse::<usize>()) {
                    ("x", Ok(i)) => Ok(Expr::X(i)),
                    ("v", Ok(i)) => Ok(Expr::V(i)),
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier {name:?}")))
                    }
                }
            }
            _ => Err(self.error("expected a number, variable, function or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;

    #[test]
    fn parses_and_evaluates_precedence() {
        let e = Expr::parse("1 + 2*x0^2 - v1/4").unwrap();
        assert_eq!(e.eval(&[3.0], &[0.0, 8.0]), 1.0 + 18.0 - 2.0);
        let e = Expr::parse("-x0^2").unwrap();
        assert_eq!(e.eval(&[3.0], &[]), -9.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval::<f64>(&[], &[]), 512.0);
        let e = Expr::parse("cos(pi) + exp(0) + 1.5e1").unwrap();
        assert!((e.eval::<f64>(&[], &[]) - 15.0).abs() < 1e-15);
    }

    #[test]
    fn tree_and_string_forms_agree() {
        let tree: Expr = serde_json::from_str(
            r#"{"op":"mul","args":[{"const":0.5},{"op":"add","args":[{"op":"pow","args":[{"var":"v0"},2]},"v1^2"]}]}"#,
        )
        .unwrap();
        let s: Expr = serde_json::from_str(r#""0.5*(v0^2+v1^2)""#).unwrap();
        let (x, v) = ([0.0, 0.0], [0.3, -1.2]);
        assert_eq!(tree.eval(&x, &v), s.eval(&x, &v));
        let back: Expr = serde_json::from_str(&serde_json::to_string(&tree).unwrap()).unwrap();
        assert_eq!(back.eval(&x, &v), tree.eval(&x, &v));
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("x0 + foo") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(x0").is_err());
        assert!(serde_json::from_str::<Expr>(r#"{"op":"sin","args":[1,2]}"#).is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_indices() {
        let e = Expr::parse("x2 + v0").unwrap();
        assert!(e.validate(2, false, "f").is_err());
        assert!(e.validate(3, true, "f").is_err());
        assert!(e.validate(3, false, "f").is_ok());
    }

    #[test]
    fn derivative_through_general_power() {
        let e = Expr::parse("x0^x0").unwrap();
        let d = e.eval(&[Dual::new(2.0_f64, 1.0)], &[]);
        assert!((d.du - 4.0 * (2.0_f64.ln() + 1.0)).abs() < 1e-13);
    }
}
