use std::collections::BTreeSet;

use super::ast::{BoolExpr, CmpOp, Node, Query, ValueExpr, Within};
use super::lexer::{tokenize, Span, Tok};
use super::ParseError;

type Labels = BTreeSet<String>;

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

/// Parses query text. Label paths are checked to refer to labels bound on
/// every path leading to their use.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    p.query()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError::new(
            format!("unexpected {}", self.peek().describe()),
            self.span(),
            expected.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn error_at(&self, span: Span, message: impl Into<String>) -> ParseError {
        ParseError::new(message, span, Vec::new())
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[what]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let (pattern, _) = self.alternation(&Labels::new())?;
        let within = if matches!(self.peek(), Tok::Ident(s) if s == "within") {
            self.bump();
            let count = match *self.peek() {
                Tok::Int(n) => {
                    let span = self.span();
                    self.bump();
                    if n < 1 || n > u32::MAX as i64 {
                        return Err(self.error_at(span, "within count must be at least 1"));
                    }
                    n as u32
                }
                _ => 1,
            };
            let structure = self.ident("structural attribute name")?;
            Some(Within { count, structure })
        } else {
            None
        };
        if *self.peek() == Tok::Semi {
            self.bump();
        }
        if *self.peek() != Tok::Eof {
            let mut expected = vec!["`;`", "end of query"];
            if within.is_none() {
                expected.insert(0, "`within`");
            }
            return Err(self.error(&expected));
        }
        Ok(Query { pattern, within })
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::LParen | Tok::LBracket | Tok::Str(_) | Tok::Lt | Tok::LtSlash => true,
            Tok::Ident(s) => s != "within",
            _ => false,
        }
    }

    fn alternation(&mut self, bound: &Labels) -> Result<(Node, Labels), ParseError> {
        let (first, mut out) = self.sequence(bound)?;
        if *self.peek() != Tok::Pipe {
            return Ok((first, out));
        }
        let mut alts = vec![first];
        while *self.peek() == Tok::Pipe {
            self.bump();
            let (alt, alt_out) = self.sequence(bound)?;
            out = out.intersection(&alt_out).cloned().collect();
            alts.push(alt);
        }
        Ok((Node::Alternation(alts), out))
    }

    fn sequence(&mut self, bound: &Labels) -> Result<(Node, Labels), ParseError> {
        if !self.starts_atom() {
            return Err(self.error(&["`[`", "string", "`(`", "`<`", "`</`", "label"]));
        }
        let mut items = Vec::new();
        let mut current = bound.clone();
        while self.starts_atom() {
            let (node, out) = self.repetition(&current)?;
            current = out;
            items.push(node);
        }
        let node = if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Node::Concat(items)
        };
        Ok((node, current))
    }

    fn repetition(&mut self, bound: &Labels) -> Result<(Node, Labels), ParseError> {
        let (atom, out) = self.atom(bound)?;
        let (min, max) = match self.peek() {
            Tok::Star => (0, None),
            Tok::Plus => (1, None),
            Tok::Question => (0, Some(1)),
            Tok::LBrace => {
                self.bump();
                let min = self.count()?;
                let max = if *self.peek() == Tok::Comma {
                    self.bump();
                    if *self.peek() == Tok::RBrace {
                        None
                    } else {
                        let span = self.span();
                        let m = self.count()?;
                        if m < min {
                            return Err(self.error_at(
                                span,
                                format!("repetition maximum {m} is below minimum {min}"),
                            ));
                        }
                        Some(m)
                    }
                } else {
                    Some(min)
                };
                if *self.peek() != Tok::RBrace {
                    return Err(self.error(&["`}`", "`,`"]));
                }
                (min, max)
            }
            _ => return Ok((atom, out)),
        };
        self.bump();
        let out = if min == 0 { bound.clone() } else { out };
        Ok((
            Node::Repeat {
                child: Box::new(atom),
                min,
                max,
            },
            out,
        ))
    }

    fn count(&mut self) -> Result<u32, ParseError> {
        match *self.peek() {
            Tok::Int(n) if (0..=u32::MAX as i64).contains(&n) => {
                self.bump();
                Ok(n as u32)
            }
            _ => Err(self.error(&["non-negative integer"])),
        }
    }

    fn atom(&mut self, bound: &Labels) -> Result<(Node, Labels), ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.alternation(bound)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Lt | Tok::LtSlash => {
                let close = *self.peek() == Tok::LtSlash;
                self.bump();
                let name = self.ident("structural attribute name")?;
                self.expect(Tok::Gt, "`>`")?;
                Ok((Node::StructTag { name, close }, bound.clone()))
            }
            Tok::Ident(label) => {
                if *self.peek_at(1) != Tok::Colon {
                    return Err(ParseError::new(
                        format!("unexpected `{label}` (labels are written `{label}:[...]`)"),
                        self.span(),
                        vec!["`[`".into(), "string".into(), "`(`".into(), "label".into()],
                    ));
                }
                self.bump();
                self.bump();
                let node = self.condition(Some(label.clone()), bound)?;
                let mut out = bound.clone();
                out.insert(label);
                Ok((node, out))
            }
            Tok::LBracket | Tok::Str(_) => Ok((self.condition(None, bound)?, bound.clone())),
            _ => Err(self.error(&["`[`", "string", "`(`", "`<`", "`</`", "label"])),
        }
    }

    fn condition(&mut self, label: Option<String>, bound: &Labels) -> Result<Node, ParseError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                let Node::Condition { expr, .. } = Node::word(s) else { unreachable!() };
                Ok(Node::Condition { label, expr })
            }
            Tok::LBracket => {
                self.bump();
                if *self.peek() == Tok::RBracket {
                    self.bump();
                    return Ok(Node::Wildcard { label });
                }
                let expr = self.or_expr(bound)?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Node::Condition { label, expr })
            }
            _ => Err(self.error(&["`[`", "string"])),
        }
    }

    fn or_expr(&mut self, bound: &Labels) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.and_expr(bound)?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and_expr(bound)?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self, bound: &Labels) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.not_expr(bound)?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.not_expr(bound)?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self, bound: &Labels) -> Result<BoolExpr, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(BoolExpr::Not(Box::new(self.not_expr(bound)?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.or_expr(bound)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.comparison(bound),
        }
    }

    fn comparison(&mut self, bound: &Labels) -> Result<BoolExpr, ParseError> {
        let lhs_span = self.span();
        let lhs = self.value(bound)?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => {
                return match lhs {
                    ValueExpr::Call { .. } | ValueExpr::Freq(_) => Ok(BoolExpr::Truth(lhs)),
                    _ => Err(self.error(&["`=`", "`!=`", "`<`", "`<=`", "`>`", "`>=`"])),
                };
            }
        };
        self.bump();
        let rhs_span = self.span();
        let rhs = self.value(bound)?;
        if op.is_order() {
            for (v, span) in [(&lhs, lhs_span), (&rhs, rhs_span)] {
                if v.is_string() {
                    return Err(self.error_at(
                        span,
                        format!("`{}` requires integer operands", op.symbol()),
                    ));
                }
            }
        }
        Ok(BoolExpr::Compare { lhs, op, rhs })
    }

    fn value(&mut self, bound: &Labels) -> Result<ValueExpr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(ValueExpr::Str(s))
            }
            Tok::Int(i) => {
                self.bump();
                Ok(ValueExpr::Int(i))
            }
            Tok::Ident(name) => {
                self.bump();
                match self.peek() {
                    Tok::Dot => {
                        self.bump();
                        let attr = self.ident("attribute name")?;
                        if !bound.contains(&name) {
                            return Err(self.error_at(
                                span,
                                format!("label `{name}` is not bound on every path before this use"),
                            ));
                        }
                        Ok(ValueExpr::LabelPath { label: name, attr })
                    }
                    Tok::LParen => {
                        self.bump();
                        let mut args = Vec::new();
                        if *self.peek() != Tok::RParen {
                            loop {
                                args.push(self.value(bound)?);
                                if *self.peek() == Tok::Comma {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        if name == "f" {
                            if args.len() != 1 {
                                return Err(self.error_at(
                                    span,
                                    format!("`f` takes exactly one argument, got {}", args.len()),
                                ));
                            }
                            let arg = args.pop().unwrap();
                            if arg.is_int() {
                                return Err(self.error_at(span, "`f` requires a string argument"));
                            }
                            return Ok(ValueExpr::Freq(Box::new(arg)));
                        }
                        Ok(ValueExpr::Call { name, args })
                    }
                    _ => Ok(ValueExpr::Attr(name)),
                }
            }
            _ => Err(self.error(&["attribute", "string", "integer", "label path", "function call"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmp(attr: &str, op: CmpOp, s: &str) -> BoolExpr {
        BoolExpr::Compare {
            lhs: ValueExpr::Attr(attr.into()),
            op,
            rhs: ValueExpr::Str(s.into()),
        }
    }

    #[test]
    fn condition_with_negation() {
        let q = parse_query(r#"[word="chair.*" & pos != "N.*"]"#).unwrap();
        assert_eq!(
            q.pattern,
            Node::Condition {
                label: None,
                expr: BoolExpr::And(
                    Box::new(cmp("word", CmpOp::Eq, "chair.*")),
                    Box::new(cmp("pos", CmpOp::Ne, "N.*"))
                ),
            }
        );
        assert!(q.within.is_none());
    }

    #[test]
    fn within_clause() {
        let q = parse_query(r#""president" []* "said" within s;"#).unwrap();
        assert_eq!(
            q.pattern,
            Node::Concat(vec![
                Node::word("president"),
                Node::Repeat {
                    child: Box::new(Node::Wildcard { label: None }),
                    min: 0,
                    max: None
                },
                Node::word("said"),
            ])
        );
        assert_eq!(
            q.within,
            Some(Within {
                count: 1,
                structure: "s".into()
            })
        );
        let q2 = parse_query(r#""a" within 2 s"#).unwrap();
        assert_eq!(q2.within.unwrap().count, 2);
    }

    #[test]
    fn labels_and_intervals() {
        let q = parse_query(r#"a:[pos="N.*"] ([]* [word=a.word]){2} within s"#).unwrap();
        let Node::Concat(items) = &q.pattern else { panic!() };
        assert!(matches!(&items[0], Node::Condition { label: Some(l), .. } if l == "a"));
        let Node::Repeat { child, min: 2, max: Some(2) } = &items[1] else { panic!() };
        let Node::Concat(inner) = child.as_ref() else { panic!() };
        assert_eq!(
            inner[1],
            Node::Condition {
                label: None,
                expr: BoolExpr::Compare {
                    lhs: ValueExpr::Attr("word".into()),
                    op: CmpOp::Eq,
                    rhs: ValueExpr::LabelPath {
                        label: "a".into(),
                        attr: "word".into()
                    },
                },
            }
        );
    }

    #[test]
    fn interval_forms() {
        let rep = |q: &str| match parse_query(q).unwrap().pattern {
            Node::Repeat { min, max, .. } => (min, max),
            other => panic!("{other:?}"),
        };
        assert_eq!(rep("[]*"), (0, None));
        assert_eq!(rep("[]+"), (1, None));
        assert_eq!(rep("[]?"), (0, Some(1)));
        assert_eq!(rep("[]{3}"), (3, Some(3)));
        assert_eq!(rep("[]{2,}"), (2, None));
        assert_eq!(rep("[]{2,5}"), (2, Some(5)));
        assert!(parse_query("[]{5,2}").is_err());
    }

    #[test]
    fn calls_and_truth() {
        let q = parse_query(r#""love.*" []? [pos="N.*" & f(word)>10 & ishuman(word)];"#).unwrap();
        let Node::Concat(items) = q.pattern else { panic!() };
        let Node::Condition { expr, .. } = &items[2] else { panic!() };
        let BoolExpr::And(lhs, truth) = expr else { panic!() };
        assert_eq!(
            **truth,
            BoolExpr::Truth(ValueExpr::Call {
                name: "ishuman".into(),
                args: vec![ValueExpr::Attr("word".into())]
            })
        );
        let BoolExpr::And(_, freq) = lhs.as_ref() else { panic!() };
        assert_eq!(
            **freq,
            BoolExpr::Compare {
                lhs: ValueExpr::Freq(Box::new(ValueExpr::Attr("word".into()))),
                op: CmpOp::Gt,
                rhs: ValueExpr::Int(10)
            }
        );
    }

    #[test]
    fn precedence() {
        let q = parse_query(r#"[!a="x" & b="y" | c="z"]"#).unwrap();
        let Node::Condition { expr, .. } = q.pattern else { panic!() };
        let BoolExpr::Or(l, _) = expr else { panic!("{expr:?}") };
        let BoolExpr::And(n, _) = *l else { panic!() };
        assert!(matches!(*n, BoolExpr::Not(_)));
    }

    #[test]
    fn struct_tags() {
        let q = parse_query(r#"[pos="N.*"] [] <s> "She""#).unwrap();
        let Node::Concat(items) = q.pattern else { panic!() };
        assert_eq!(items[2], Node::StructTag { name: "s".into(), close: false });
        let q = parse_query(r#""x" </s>"#).unwrap();
        let Node::Concat(items) = q.pattern else { panic!() };
        assert_eq!(items[1], Node::StructTag { name: "s".into(), close: true });
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_query("[word=]").unwrap_err();
        assert_eq!((err.line, err.column, err.offset), (1, 7, 6));
        assert!(!err.expected.is_empty());
        let err = parse_query("\n  [word=\"a\"] )").unwrap_err();
        assert_eq!((err.line, err.column), (2, 14));
        assert!(parse_query("").is_err());
        assert!(parse_query("[word]").is_err());
        assert!(parse_query("[word < \"x\"]").is_err());
        assert!(parse_query("[f(3) > 1]").is_err());
        assert!(parse_query("[f(word, pos) > 1]").is_err());
        assert!(parse_query("\"a\" within 0 s").is_err());
    }

    #[test]
    fn label_binding_rules() {
        assert!(parse_query("[word=a.word] a:[]").is_err());
        assert!(parse_query("a:[word=a.word]").is_err());
        assert!(parse_query("(a:[] | []) [word=a.word]").is_err());
        assert!(parse_query("a:[]? [word=a.word]").is_err());
        assert!(parse_query("(a:[] | a:[pos=\"x\"]) [word=a.word]").is_ok());
        assert!(parse_query("(a:[])+ [word=a.word]").is_ok());
        assert!(parse_query("a:[] [] [word=a.word]").is_ok());
    }
}
