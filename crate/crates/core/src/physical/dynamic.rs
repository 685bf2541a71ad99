//! Dynamic attributes: values computed by running an external command.

use std::fmt;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Str,
    Int,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Str => "STRING",
            ValueType::Int => "INT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Str(String),
    Int(i64),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Str(_) => ValueType::Str,
            Value::Int(_) => ValueType::Int,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Int(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicAttributeDecl {
    pub name: String,
    pub arg_types: Vec<ValueType>,
    pub return_type: ValueType,
    /// Shell command with `$1`..`$n` placeholders.
    pub command: String,
}

impl DynamicAttributeDecl {
    pub fn new(
        name: impl Into<String>,
        arg_types: Vec<ValueType>,
        return_type: ValueType,
        command: impl Into<String>,
    ) -> Result<Self> {
        let decl = DynamicAttributeDecl {
            name: name.into(),
            arg_types,
            return_type,
            command: command.into(),
        };
        decl.validate()?;
        Ok(decl)
    }

    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }

    /// Checks that every `$n` placeholder refers to a declared argument.
    pub fn validate(&self) -> Result<()> {
        for index in placeholders(&self.command) {
            if index == 0 || index > self.arity() {
                return Err(Error::Type(format!(
                    "command of `{}` refers to ${index} but the attribute takes {} argument(s)",
                    self.name,
                    self.arity()
                )));
            }
        }
        Ok(())
    }

    /// Substitutes the arguments into the command template, quoting each one
    /// for the shell context the placeholder appears in.
    pub fn instantiate(&self, args: &[Value]) -> Result<String> {
        self.check_args(args)?;
        let chars: Vec<char> = self.command.chars().collect();
        let mut out = String::with_capacity(self.command.len() + 16);
        let mut quote = Quote::None;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            match (quote, c) {
                (Quote::None | Quote::Double, '\\') if i + 1 < chars.len() => {
                    out.push(c);
                    out.push(chars[i + 1]);
                    i += 2;
                    continue;
                }
                (_, '$') if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                    let mut j = i + 1;
                    let mut index = 0usize;
                    while let Some(d) = chars.get(j).and_then(|d| d.to_digit(10)) {
                        index = index * 10 + d as usize;
                        j += 1;
                    }
                    let arg = args[index - 1].to_string();
                    out.push_str(&quote_for(quote, &arg));
                    i = j;
                    continue;
                }
                (Quote::None, '\'') => quote = Quote::Single,
                (Quote::Single, '\'') => quote = Quote::None,
                (Quote::None, '"') => quote = Quote::Double,
                (Quote::Double, '"') => quote = Quote::None,
                _ => {}
            }
            out.push(c);
            i += 1;
        }
        Ok(out)
    }

    fn check_args(&self, args: &[Value]) -> Result<()> {
        if args.len() != self.arity() {
            return Err(Error::ArityMismatch {
                name: self.name.clone(),
                expected: self.arity(),
                got: args.len(),
            });
        }
        for (i, (arg, ty)) in args.iter().zip(&self.arg_types).enumerate() {
            if arg.value_type() != *ty {
                return Err(Error::Type(format!(
                    "argument {} of `{}` must be {ty}, got {}",
                    i + 1,
                    self.name,
                    arg.value_type()
                )));
            }
        }
        Ok(())
    }

    /// Runs the command and returns the first line of its output, trimmed,
    /// parsed as an integer when the return type is INT.
    pub fn eval(&self, args: &[Value]) -> Result<Value> {
        let command = self.instantiate(args)?;
        let fail = |reason: String| Error::DynamicFailed {
            name: self.name.clone(),
            args: args.iter().map(|a| a.to_string()).collect(),
            reason,
        };
        let output = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::null())
            .stderr(Stdio::null())
            .output()
            .map_err(|e| fail(format!("cannot launch: {e}")))?;
        if !output.status.success() {
            return Err(fail(format!("command exited with {}", output.status)));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let line = stdout.lines().next().unwrap_or("").trim();
        match self.return_type {
            ValueType::Str => Ok(Value::Str(line.to_owned())),
            ValueType::Int => line
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| fail(format!("output {line:?} is not an integer"))),
        }
    }
}

/// Free-function form of [`DynamicAttributeDecl::eval`].
pub fn eval_dynamic(decl: &DynamicAttributeDecl, args: &[Value]) -> Result<Value> {
    decl.eval(args)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quote {
    None,
    Single,
    Double,
}

fn quote_for(context: Quote, arg: &str) -> String {
    match context {
        Quote::None => format!("'{}'", arg.replace('\'', r"'\''")),
        Quote::Single => arg.replace('\'', r"'\''"),
        Quote::Double => {
            let mut s = String::with_capacity(arg.len());
            for c in arg.chars() {
                if matches!(c, '\\' | '"' | '$' | '`') {
                    s.push('\\');
                }
                s.push(c);
            }
            s
        }
    }
}

fn placeholders(template: &str) -> Vec<usize> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if bytes[i] == b'$' {
            let mut j = i + 1;
            let mut n = 0usize;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                n = n.saturating_mul(10).saturating_add((bytes[j] - b'0') as usize);
                j += 1;
            }
            if j > i + 1 {
                out.push(n);
                i = j;
                continue;
            }
        }
        i += 1;
    }
    out
}
