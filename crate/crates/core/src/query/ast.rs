/// A parsed query: a regular expression over conditions plus an optional
/// `within` constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub pattern: Node,
    pub within: Option<Within>,
}

/// `within [count] structure`: the match may span at most `count`
/// consecutive regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Within {
    pub count: u32,
    pub structure: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// `[expr]`, or a bare `"string"` meaning `[word="string"]`.
    Condition {
        label: Option<String>,
        expr: BoolExpr,
    },
    /// `[]`: any position.
    Wildcard { label: Option<String> },
    /// `<name>` (open) or `</name>` (close); zero width.
    StructTag { name: String, close: bool },
    Concat(Vec<Node>),
    Alternation(Vec<Node>),
    /// `max: None` is unbounded.
    Repeat {
        child: Box<Node>,
        min: u32,
        max: Option<u32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
    Compare {
        lhs: ValueExpr,
        op: CmpOp,
        rhs: ValueExpr,
    },
    /// A bare INT-valued call: true iff the value is non-zero.
    Truth(ValueExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueExpr {
    /// Value of a positional attribute at the current position.
    Attr(String),
    /// `label.attr`: value of `attr` at the position bound to `label`.
    LabelPath { label: String, attr: String },
    /// A string literal; a regular expression when compared with `=`/`!=`.
    Str(String),
    Int(i64),
    /// Dynamic attribute call.
    Call { name: String, args: Vec<ValueExpr> },
    /// Predefined `f(...)`: absolute corpus frequency.
    Freq(Box<ValueExpr>),
}

impl ValueExpr {
    /// Whether the expression is statically known to be string-valued.
    pub fn is_string(&self) -> bool {
        matches!(
            self,
            ValueExpr::Attr(_) | ValueExpr::LabelPath { .. } | ValueExpr::Str(_)
        )
    }

    pub fn is_int(&self) -> bool {
        matches!(self, ValueExpr::Int(_) | ValueExpr::Freq(_))
    }
}

impl Node {
    /// Sugar for `[word="value"]`.
    pub fn word(value: impl Into<String>) -> Node {
        Node::Condition {
            label: None,
            expr: BoolExpr::Compare {
                lhs: ValueExpr::Attr("word".into()),
                op: CmpOp::Eq,
                rhs: ValueExpr::Str(value.into()),
            },
        }
    }
}
