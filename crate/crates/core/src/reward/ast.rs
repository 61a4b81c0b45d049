use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// `index` points into the catalog the program was bound to.
    Feature { name: String, index: usize },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Clip(Box<Expr>, Box<Expr>, Box<Expr>),
    /// 1 when the comparison holds, else 0.
    Indicator(CmpOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    /// Feature names referenced, in first-use order.
    pub fn identifiers(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Feature { name, .. } => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Unary(_, a) => a.identifiers(out),
            Expr::Binary(_, a, b) | Expr::Indicator(_, a, b) => {
                a.identifiers(out);
                b.identifiers(out);
            }
            Expr::Clip(x, lo, hi) => {
                x.identifiers(out);
                lo.identifiers(out);
                hi.identifiers(out);
            }
        }
    }
}

/// Fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Feature { name, .. } => f.write_str(name),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-({a}))"),
            Expr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Abs => "abs",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(op, a, b) => match op {
                BinaryOp::Min => write!(f, "min({a}, {b})"),
                BinaryOp::Max => write!(f, "max({a}, {b})"),
                _ => {
                    let s = match op {
                        BinaryOp::Add => "+",
                        BinaryOp::Sub => "-",
                        BinaryOp::Mul => "*",
                        BinaryOp::Div => "/",
                        BinaryOp::Pow => "^",
                        _ => unreachable!(),
                    };
                    write!(f, "({a} {s} {b})")
                }
            },
            Expr::Clip(x, lo, hi) => write!(f, "clip({x}, {lo}, {hi})"),
            Expr::Indicator(op, a, b) => write!(f, "indicator({a} {} {b})", op.symbol()),
        }
    }
}
