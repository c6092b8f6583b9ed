//! Scalar coefficient expressions over the variables `t`, `x`, `y`, `z`.
//!
//! Every user-facing coefficient (drift, volatility, generator, payoff,
//! intermediate drift) is written in this small language. The grammar is
//! documented in `docs/expr-grammar.md`:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, which in turn
//! binds tighter than `*` and `/`. Evaluation is plain IEEE double arithmetic
//! and fails on any non-finite intermediate value.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// One of the four coefficient variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    T,
    X,
    Y,
    Z,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::T, Var::X, Var::Y, Var::Z];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "t" => Some(Var::T),
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "z" => Some(Var::Z),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Set of variables, stored as a bit mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct VarSet(u8);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn contains(self, v: Var) -> bool {
        self.0 & (1 << v.index()) != 0
    }

    pub fn insert(&mut self, v: Var) {
        self.0 |= 1 << v.index();
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Var> {
        Var::ALL.into_iter().filter(move |v| self.contains(*v))
    }

    pub fn of(vars: &[Var]) -> VarSet {
        let mut s = VarSet::EMPTY;
        for v in vars {
            s.insert(*v);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
    Pos,
    Neg,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "abs" => Func::Abs,
            "pos" => Func::Pos,
            "neg" => Func::Neg,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Pos => "pos",
            Func::Neg => "neg",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree node.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed, immutable expression together with its free variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    free_vars: VarSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{offset}:{message}")]
    Syntax { offset: usize, message: String },
    #[error("{offset}:unknown identifier '{name}'")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => *offset,
        }
    }

    fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("missing binding for variable '{0}'")]
    MissingBinding(&'static str),
    #[error("non-finite value in sub-expression `{expr}`")]
    NonFinite { expr: String },
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
}

/// Variable bindings for evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    vals: [Option<f64>; 4],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// All four variables bound.
    pub fn txyz(t: f64, x: f64, y: f64, z: f64) -> Self {
        Bindings {
            vals: [Some(t), Some(x), Some(y), Some(z)],
        }
    }

    pub fn with(mut self, v: Var, value: f64) -> Self {
        self.vals[v.index()] = Some(value);
        self
    }

    pub fn set(&mut self, v: Var, value: f64) {
        self.vals[v.index()] = Some(value);
    }

    pub fn get(&self, v: Var) -> Option<f64> {
        self.vals[v.index()]
    }

    /// Builds bindings from `(name, value)` pairs, rejecting unknown names.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut b = Bindings::new();
        for (name, value) in pairs {
            let v = Var::from_name(name).ok_or_else(|| EvalError::UnknownVariable(name.into()))?;
            b.set(v, value);
        }
        Ok(b)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        let tok = p.peek();
        if tok.kind != TokKind::End {
            return Err(ParseError::syntax(tok.offset, "unexpected trailing input"));
        }
        Ok(Expr::from_node(root))
    }

    pub fn from_node(root: Node) -> Expr {
        let mut free_vars = VarSet::EMPTY;
        collect_vars(&root, &mut free_vars);
        Expr { root, free_vars }
    }

    pub fn constant(c: f64) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn var(v: Var) -> Expr {
        Expr::from_node(Node::Var(v))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn free_vars(&self) -> VarSet {
        self.free_vars
    }

    /// Returns the constant value if the tree is a bare literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        eval_node(&self.root, bindings)
    }

    /// Evaluates with all four variables bound.
    #[inline]
    pub fn eval_at(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64, EvalError> {
        eval_node(&self.root, &Bindings::txyz(t, x, y, z))
    }

    /// Replaces every occurrence of `var` with `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        Expr::from_node(subst_node(&self.root, var, &with.root))
    }

    /// Substitutes several variables simultaneously.
    pub fn substitute_all(&self, subs: &[(Var, &Expr)]) -> Expr {
        Expr::from_node(subst_many(&self.root, subs))
    }

    pub fn neg(&self) -> Expr {
        Expr::from_node(Node::Neg(Box::new(self.root.clone())))
    }

    pub fn binary(op: BinOp, lhs: &Expr, rhs: &Expr) -> Expr {
        Expr::from_node(Node::Bin(op, Box::new(lhs.root.clone()), Box::new(rhs.root.clone())))
    }

    pub fn mul(&self, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Mul, self, rhs)
    }

    pub fn add(&self, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Add, self, rhs)
    }

    pub fn sub(&self, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Sub, self, rhs)
    }

    pub fn div(&self, rhs: &Expr) -> Expr {
        Expr::binary(BinOp::Div, self, rhs)
    }
}

/// Parses `text` into an [`Expr`].
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    Expr::parse(text)
}

/// Evaluates `e` under `bindings`.
pub fn eval(e: &Expr, bindings: &Bindings) -> Result<f64, EvalError> {
    e.eval(bindings)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root)
    }
}

impl core::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Expr::parse(&text).map_err(serde::de::Error::custom)
    }
}

fn collect_vars(node: &Node, set: &mut VarSet) {
    match node {
        Node::Const(_) => {}
        Node::Var(v) => set.insert(*v),
        Node::Neg(a) => collect_vars(a, set),
        Node::Bin(_, a, b) => {
            collect_vars(a, set);
            collect_vars(b, set);
        }
        Node::Call(_, args) => args.iter().for_each(|a| collect_vars(a, set)),
    }
}

fn subst_node(node: &Node, var: Var, with: &Node) -> Node {
    subst_many(node, &[(var, &Expr::from_node(with.clone()))])
}

fn subst_many(node: &Node, subs: &[(Var, &Expr)]) -> Node {
    match node {
        Node::Var(v) => match subs.iter().find(|(s, _)| s == v) {
            Some((_, e)) => e.root.clone(),
            None => Node::Var(*v),
        },
        Node::Const(c) => Node::Const(*c),
        Node::Neg(a) => Node::Neg(Box::new(subst_many(a, subs))),
        Node::Bin(op, a, b) => Node::Bin(*op, Box::new(subst_many(a, subs)), Box::new(subst_many(b, subs))),
        Node::Call(fun, args) => Node::Call(*fun, args.iter().map(|a| subst_many(a, subs)).collect()),
    }
}

fn finite(v: f64, node: &Node) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite {
            expr: Expr::from_node(node.clone()).to_string(),
        })
    }
}

fn eval_node(node: &Node, b: &Bindings) -> Result<f64, EvalError> {
    let v = match node {
        Node::Const(c) => return Ok(*c),
        Node::Var(v) => return b.get(*v).ok_or(EvalError::MissingBinding(v.name())),
        Node::Neg(a) => -eval_node(a, b)?,
        Node::Bin(op, l, r) => {
            let l = eval_node(l, b)?;
            let r = eval_node(r, b)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::Pow => libm::pow(l, r),
            }
        }
        Node::Call(fun, args) => {
            let a = eval_node(&args[0], b)?;
            match fun {
                Func::Min => libm::fmin(a, eval_node(&args[1], b)?),
                Func::Max => libm::fmax(a, eval_node(&args[1], b)?),
                Func::Abs => libm::fabs(a),
                Func::Pos => libm::fmax(a, 0.0),
                Func::Neg => libm::fmax(-a, 0.0),
                Func::Exp => libm::exp(a),
                Func::Log => {
                    if a <= 0.0 {
                        f64::NAN
                    } else {
                        libm::log(a)
                    }
                }
                Func::Sqrt => libm::sqrt(a),
                Func::Tanh => libm::tanh(a),
            }
        }
    };
    finite(v, node)
}

// Printing. Precedence levels: 1 additive, 2 multiplicative, 3 unary minus,
// 4 power, 5 atoms. Parentheses are emitted exactly where needed to rebuild
// the same tree, so printing never changes evaluation order.

fn node_precedence(node: &Node) -> u8 {
    match node {
        Node::Const(c) if c.is_sign_negative() => 5,
        Node::Const(_) | Node::Var(_) | Node::Call(..) => 5,
        Node::Neg(_) => 3,
        Node::Bin(op, ..) => op.precedence(),
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, node: &Node, wrap: bool) -> fmt::Result {
    if wrap {
        f.write_str("(")?;
        write_node(f, node)?;
        f.write_str(")")
    } else {
        write_node(f, node)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Const(c) => {
            if c.is_sign_negative() {
                write!(f, "({})", c)
            } else {
                write!(f, "{}", c)
            }
        }
        Node::Var(v) => f.write_str(v.name()),
        Node::Neg(a) => {
            f.write_str("-")?;
            write_wrapped(f, a, node_precedence(a) < 3)
        }
        Node::Bin(op, l, r) => {
            let p = op.precedence();
            let (wrap_l, wrap_r) = match op {
                BinOp::Pow => (node_precedence(l) < 5, node_precedence(r) < 3),
                _ => (node_precedence(l) < p, node_precedence(r) <= p),
            };
            write_wrapped(f, l, wrap_l)?;
            f.write_str(op.symbol())?;
            write_wrapped(f, r, wrap_r)
        }
        Node::Call(fun, args) => {
            f.write_str(fun.name())?;
            f.write_str("(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write_node(f, a)?;
            }
            f.write_str(")")
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            b'0'..=b'9' | b'.' => {
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
                    .map_err(|_| ParseError::syntax(start, format!("malformed number '{lit}'")))?;
                TokKind::Num(v)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokKind::Ident(text[start..i].to_string())
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                i += 1;
                TokKind::Op(c as char)
            }
            b'(' => {
                i += 1;
                TokKind::LParen
            }
            b')' => {
                i += 1;
                TokKind::RParen
            }
            b',' => {
                i += 1;
                TokKind::Comma
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(start, format!("unexpected character '{ch}'")));
            }
        };
        out.push(Token { kind, offset: start });
    }
    out.push(Token {
        kind: TokKind::End,
        offset: text.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != TokKind::End {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        if let TokKind::Op(c) = self.peek().kind {
            if ops.contains(&c) {
                self.pos += 1;
                return Some(c);
            }
        }
        None
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Node::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let tok = self.bump();
        match tok.kind {
            TokKind::Num(v) => Ok(Node::Const(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident(name) => {
                if let Some(v) = Var::from_name(&name) {
                    return Ok(Node::Var(v));
                }
                let Some(fun) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier {
                        offset: tok.offset,
                        name,
                    });
                };
                if self.peek().kind != TokKind::LParen {
                    return Err(ParseError::syntax(
                        self.peek().offset,
                        format!("expected '(' after function '{name}'"),
                    ));
                }
                self.bump();
                let mut args = alloc::vec![self.expr()?];
                while self.peek().kind == TokKind::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect_rparen()?;
                if args.len() != fun.arity() {
                    return Err(ParseError::syntax(
                        tok.offset,
                        format!(
                            "function '{name}' takes {} argument(s), got {}",
                            fun.arity(),
                            args.len()
                        ),
                    ));
                }
                Ok(Node::Call(fun, args))
            }
            TokKind::End => Err(ParseError::syntax(tok.offset, "unexpected end of input")),
            TokKind::RParen => Err(ParseError::syntax(tok.offset, "unexpected ')'")),
            TokKind::Comma => Err(ParseError::syntax(tok.offset, "unexpected ','")),
            TokKind::Op(c) => Err(ParseError::syntax(tok.offset, format!("unexpected operator '{c}'"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let tok = self.bump();
        if tok.kind == TokKind::RParen {
            Ok(())
        } else {
            Err(ParseError::syntax(tok.offset, "expected ')'"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, b: Bindings) -> f64 {
        parse(s).unwrap().eval(&b).unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        let b = Bindings::new().with(Var::Y, 2.0).with(Var::Z, 1.0);
        assert!((ev("z*0.3 - 0.05*y", b) - 0.2).abs() < 1e-15);
        let b = Bindings::new().with(Var::X, 2.0).with(Var::Y, 1.0).with(Var::Z, 3.0);
        assert_eq!(ev("neg(y - x*z)", b), 5.0);
        assert_eq!(ev("abs(z)", Bindings::new().with(Var::Z, -3.0)), 3.0);
        assert_eq!(ev("1.5", Bindings::new()), 1.5);
        assert_eq!(ev("exp(0)", Bindings::new()), 1.0);
        assert_eq!(ev("max(0, x-100)", Bindings::new().with(Var::X, 110.0)), 10.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2+3*4", Bindings::new()), 14.0);
        assert_eq!(ev("2^3^2", Bindings::new()), 512.0);
        assert_eq!(ev("-2^2", Bindings::new()), -4.0);
        assert_eq!(ev("-2*3", Bindings::new()), -6.0);
        assert_eq!(ev("2^-1", Bindings::new()), 0.5);
        assert_eq!(ev("8/2/2", Bindings::new()), 2.0);
        assert_eq!(ev("8-2-2", Bindings::new()), 4.0);
        assert_eq!(ev("1e-3*1E3", Bindings::new()), 1.0);
    }

    #[test]
    fn free_vars_match_tree() {
        let e = parse("x*exp(t) + max(y, 0)").unwrap();
        assert_eq!(e.free_vars(), VarSet::of(&[Var::T, Var::X, Var::Y]));
        assert!(parse("3").unwrap().free_vars().is_empty());
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse("1 + * 2").unwrap_err();
        assert_eq!(err.offset(), 4);
        assert_eq!(err.to_string(), "4:unexpected operator '*'");
        let err = parse("foo(x)").unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { offset: 0, ref name } if name == "foo"));
        assert_eq!(parse("(1+2").unwrap_err().offset(), 4);
        assert_eq!(parse("max(1)").unwrap_err().offset(), 0);
        assert_eq!(parse("1 $ 2").unwrap_err().offset(), 2);
        assert_eq!(parse("").unwrap_err().offset(), 0);
        assert_eq!(parse("1 2").unwrap_err().offset(), 2);
    }

    #[test]
    fn eval_errors() {
        let e = parse("x + y").unwrap();
        assert_eq!(
            e.eval(&Bindings::new().with(Var::X, 1.0)),
            Err(EvalError::MissingBinding("y"))
        );
        let e = parse("1 + log(x - 1)").unwrap();
        match e.eval(&Bindings::new().with(Var::X, 1.0)) {
            Err(EvalError::NonFinite { expr }) => assert_eq!(expr, "log(x-1)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("1/x").unwrap().eval(&Bindings::new().with(Var::X, 0.0)).is_err());
        assert!(parse("sqrt(x)")
            .unwrap()
            .eval(&Bindings::new().with(Var::X, -1.0))
            .is_err());
        assert!(Bindings::from_pairs([("w", 1.0)]).is_err());
    }

    #[test]
    fn printing_preserves_structure() {
        for s in [
            "a",
            "1-(2-3)",
            "(1-2)-3",
            "2^3^2",
            "(2^3)^2",
            "-x^2",
            "(-x)^2",
            "x*-y",
            "x/(y*z)",
            "--x",
            "neg(y-pos(z)/0.2+neg(z)/0.05)",
        ] {
            let Ok(e) = parse(s) else { continue };
            let printed = e.to_string();
            let again = parse(&printed).unwrap();
            assert_eq!(again.root(), e.root(), "{s} -> {printed}");
        }
    }

    #[test]
    fn substitution() {
        let e = parse("x*y").unwrap();
        let s = e.substitute(Var::X, &parse("x*exp(0.05*t)").unwrap());
        let v = s.eval_at(1.0, 2.0, 3.0, 0.0).unwrap();
        assert!((v - 2.0 * libm::exp(0.05) * 3.0).abs() < 1e-12);
        let c = e.substitute(Var::Y, &Expr::constant(-2.0));
        assert_eq!(c.to_string(), "x*(-2)");
        assert_eq!(c.eval_at(0.0, 3.0, 0.0, 0.0).unwrap(), -6.0);
    }
}
