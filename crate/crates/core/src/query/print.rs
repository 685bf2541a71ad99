//! Canonical text form of a query; re-parses to an equal AST.

use std::fmt::{self, Display, Formatter};

use super::ast::{BoolExpr, Node, Query, ValueExpr};

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pattern)?;
        if let Some(w) = &self.within {
            if w.count == 1 {
                write!(f, " within {}", w.structure)?;
            } else {
                write!(f, " within {} {}", w.count, w.structure)?;
            }
        }
        Ok(())
    }
}

fn write_label(f: &mut Formatter<'_>, label: &Option<String>) -> fmt::Result {
    match label {
        Some(l) => write!(f, "{l}:"),
        None => Ok(()),
    }
}

fn write_grouped(f: &mut Formatter<'_>, node: &Node, group: bool) -> fmt::Result {
    if group {
        write!(f, "({node})")
    } else {
        write!(f, "{node}")
    }
}

impl Display for Node {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Node::Condition { label, expr } => {
                write_label(f, label)?;
                write!(f, "[{expr}]")
            }
            Node::Wildcard { label } => {
                write_label(f, label)?;
                f.write_str("[]")
            }
            Node::StructTag { name, close } => {
                write!(f, "{}{name}>", if *close { "</" } else { "<" })
            }
            Node::Concat(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    let group = matches!(item, Node::Concat(_) | Node::Alternation(_));
                    write_grouped(f, item, group)?;
                }
                Ok(())
            }
            Node::Alternation(alts) => {
                for (i, alt) in alts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write_grouped(f, alt, matches!(alt, Node::Alternation(_)))?;
                }
                Ok(())
            }
            Node::Repeat { child, min, max } => {
                let group = matches!(
                    child.as_ref(),
                    Node::Concat(_) | Node::Alternation(_) | Node::Repeat { .. }
                );
                write_grouped(f, child, group)?;
                match (min, max) {
                    (0, None) => f.write_str("*"),
                    (1, None) => f.write_str("+"),
                    (0, Some(1)) => f.write_str("?"),
                    (n, None) => write!(f, "{{{n},}}"),
                    (n, Some(m)) if n == m => write!(f, "{{{n}}}"),
                    (n, Some(m)) => write!(f, "{{{n},{m}}}"),
                }
            }
        }
    }
}

fn precedence(e: &BoolExpr) -> u8 {
    match e {
        BoolExpr::Or(..) => 1,
        BoolExpr::And(..) => 2,
        BoolExpr::Not(_) => 3,
        BoolExpr::Compare { .. } | BoolExpr::Truth(_) => 4,
    }
}

fn write_operand(f: &mut Formatter<'_>, e: &BoolExpr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl Display for BoolExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Or(l, r) => {
                write_operand(f, l, 1)?;
                f.write_str(" | ")?;
                write_operand(f, r, 2)
            }
            BoolExpr::And(l, r) => {
                write_operand(f, l, 2)?;
                f.write_str(" & ")?;
                write_operand(f, r, 3)
            }
            BoolExpr::Not(e) => {
                f.write_str("!")?;
                write_operand(f, e, 3)
            }
            BoolExpr::Compare { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            BoolExpr::Truth(v) => write!(f, "{v}"),
        }
    }
}

impl Display for ValueExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Attr(a) => f.write_str(a),
            ValueExpr::LabelPath { label, attr } => write!(f, "{label}.{attr}"),
            ValueExpr::Str(s) => write!(f, "\"{}\"", s.replace('"', "\\\"")),
            ValueExpr::Int(i) => write!(f, "{i}"),
            ValueExpr::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            ValueExpr::Freq(arg) => write!(f, "f({arg})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_query;

    #[test]
    fn canonical_forms() {
        for (input, printed) in [
            (r#""and|or""#, r#"[word = "and|or"]"#),
            (r#"a:[pos="N.*"] ([]* [word=a.word]){2} within s;"#, r#"a:[pos = "N.*"] ([]* [word = a.word]){2} within s"#),
            (r#"("a" "b")+ | <s> []{2,}"#, r#"([word = "a"] [word = "b"])+ | <s> []{2,}"#),
            (r#"[!(a="x" | b="y") & f(word) >= 2]"#, r#"[!(a = "x" | b = "y") & f(word) >= 2]"#),
            (r#""a" within 3 text"#, r#"[word = "a"] within 3 text"#),
        ] {
            let q = parse_query(input).unwrap();
            assert_eq!(q.to_string(), printed);
            assert_eq!(parse_query(printed).unwrap(), q);
        }
    }
}
