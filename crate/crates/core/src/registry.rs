//! Registry files: per-corpus declarations of home directory and attributes.
//!
//! ```text
//! NAME "Hansard corpus (english part)"
//! ID      hansard-e
//! HOME /corpora/encoded/hansard-e
//! ATTRIBUTE word
//! ATTRIBUTE pos REMOTE corpora.example.org:4877
//! STRUCTURE s
//! DYNAMIC ishuman(String):INT "/corpora/utils/cmd/wn-hypen '$1' human"
//! ALIGNED hansard-f          # the french part
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use crate::binfmt::{self, FileKind};
use crate::error::{Error, Result};
use crate::physical::{
    AlignmentMap, BigramTable, Corpus, DynamicAttributeDecl, PositionalAttribute,
    StructuralRegions, ValueType,
};
use crate::remote::RemoteAttribute;

pub const REGISTRY_ENV: &str = "CQK_REGISTRY";
pub const AUTH_ENV: &str = "CQK_AUTH";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDecl {
    pub name: String,
    /// `host:port` of the server holding this attribute.
    pub remote: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryDecl {
    pub display_name: Option<String>,
    pub id: String,
    pub home: PathBuf,
    pub positional: Vec<AttributeDecl>,
    pub structural: Vec<String>,
    pub dynamic: Vec<DynamicAttributeDecl>,
    pub aligned: Option<String>,
}

impl RegistryDecl {
    pub fn new(id: impl Into<String>, home: impl Into<PathBuf>) -> Self {
        RegistryDecl {
            display_name: None,
            id: id.into(),
            home: home.into(),
            positional: Vec::new(),
            structural: Vec::new(),
            dynamic: Vec::new(),
            aligned: None,
        }
    }

    pub fn attribute(mut self, name: &str) -> Self {
        self.positional.push(AttributeDecl {
            name: name.to_owned(),
            remote: None,
        });
        self
    }

    pub fn structure(mut self, name: &str) -> Self {
        self.structural.push(name.to_owned());
        self
    }

    /// Structural attribute used for alignment: `s` when declared, else the
    /// first structural attribute.
    pub fn alignment_structure(&self) -> Option<&str> {
        self.structural
            .iter()
            .find(|s| *s == "s")
            .or_else(|| self.structural.first())
            .map(String::as_str)
    }

    fn all_names(&self) -> impl Iterator<Item = &str> {
        self.positional
            .iter()
            .map(|a| a.name.as_str())
            .chain(self.structural.iter().map(String::as_str))
            .chain(self.dynamic.iter().map(|d| d.name.as_str()))
    }
}

pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct LineScanner<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> LineScanner<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Registry {
            line: self.line,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.rest.is_empty()
    }

    fn word(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let end = self
            .rest
            .find(|c: char| c.is_whitespace())
            .unwrap_or(self.rest.len());
        if end == 0 {
            return Err(self.err("unexpected end of line"));
        }
        let (w, rest) = self.rest.split_at(end);
        self.rest = rest;
        Ok(w)
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let end = self
            .rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest.len());
        let (w, rest) = self.rest.split_at(end);
        if !is_valid_name(w) {
            return Err(self.err(format!("expected a name, found {:?}", self.rest)));
        }
        self.rest = rest;
        Ok(w)
    }

    fn punct(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        match self.rest.strip_prefix(c) {
            Some(rest) => {
                self.rest = rest;
                Ok(())
            }
            None => Err(self.err(format!("expected `{c}`"))),
        }
    }

    fn peek(&mut self, c: char) -> bool {
        self.skip_ws();
        self.rest.starts_with(c)
    }

    fn quoted(&mut self) -> Result<String> {
        self.skip_ws();
        let body = self
            .rest
            .strip_prefix('"')
            .ok_or_else(|| self.err("expected a quoted string"))?;
        let mut out = String::new();
        let mut chars = body.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.rest = &body[i + 1..];
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    Some((_, e)) => {
                        out.push('\\');
                        out.push(e);
                    }
                    None => break,
                },
                _ => out.push(c),
            }
        }
        Err(self.err("unterminated string"))
    }

    fn path(&mut self) -> Result<String> {
        if self.peek('"') {
            self.quoted()
        } else {
            self.word().map(str::to_owned)
        }
    }

    fn end(&mut self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!("unexpected trailing text {:?}", self.rest)))
        }
    }
}

/// Removes a `#` comment, ignoring `#` inside double-quoted strings.
fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quote => escaped = true,
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_type(s: &str) -> Option<ValueType> {
    match s.to_ascii_lowercase().as_str() {
        "string" => Some(ValueType::Str),
        "int" => Some(ValueType::Int),
        _ => None,
    }
}

pub fn parse_registry(text: &str) -> Result<RegistryDecl> {
    let mut display_name = None;
    let mut id: Option<String> = None;
    let mut home: Option<PathBuf> = None;
    let mut aligned = None;
    let mut positional = Vec::new();
    let mut structural = Vec::new();
    let mut dynamic = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let mut sc = LineScanner {
            rest: strip_comment(raw),
            line: idx + 1,
        };
        if sc.at_end() {
            continue;
        }
        let keyword = sc.word()?;
        match keyword {
            "NAME" => {
                if display_name.is_some() {
                    return Err(sc.err("duplicate NAME"));
                }
                display_name = Some(sc.quoted()?);
            }
            "ID" => {
                if id.is_some() {
                    return Err(sc.err("duplicate ID"));
                }
                let value = sc.word()?;
                if !is_valid_id(value) {
                    return Err(sc.err(format!(
                        "invalid corpus id {value:?} (lowercase letters, digits and `-` only)"
                    )));
                }
                id = Some(value.to_owned());
            }
            "HOME" => {
                if home.is_some() {
                    return Err(sc.err("duplicate HOME"));
                }
                home = Some(PathBuf::from(sc.path()?));
            }
            "ATTRIBUTE" => {
                let name = sc.ident()?.to_owned();
                let remote = if sc.at_end() {
                    None
                } else {
                    let kw = sc.word()?;
                    if kw != "REMOTE" {
                        return Err(sc.err(format!("expected REMOTE, found {kw:?}")));
                    }
                    let addr = sc.word()?;
                    match addr.rsplit_once(':') {
                        Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => {}
                        _ => return Err(sc.err(format!("expected host:port, found {addr:?}"))),
                    }
                    Some(addr.to_owned())
                };
                positional.push(AttributeDecl { name, remote });
            }
            "STRUCTURE" => structural.push(sc.ident()?.to_owned()),
            "DYNAMIC" => {
                let name = sc.ident()?.to_owned();
                if name == "f" {
                    return Err(sc.err("`f` is reserved for the frequency function"));
                }
                sc.punct('(')?;
                let mut args = Vec::new();
                if !sc.peek(')') {
                    loop {
                        let t = sc.ident()?;
                        args.push(
                            parse_type(t)
                                .ok_or_else(|| sc.err(format!("unknown argument type {t:?}")))?,
                        );
                        if sc.peek(',') {
                            sc.punct(',')?;
                        } else {
                            break;
                        }
                    }
                }
                sc.punct(')')?;
                sc.punct(':')?;
                let t = sc.ident()?;
                let ret = parse_type(t).ok_or_else(|| sc.err(format!("unknown return type {t:?}")))?;
                let command = sc.quoted()?;
                let decl = DynamicAttributeDecl::new(name, args, ret, command)
                    .map_err(|e| sc.err(e.to_string()))?;
                dynamic.push(decl);
            }
            "ALIGNED" => {
                if aligned.is_some() {
                    return Err(sc.err("duplicate ALIGNED"));
                }
                let target = sc.word()?;
                if !is_valid_id(target) {
                    return Err(sc.err(format!("invalid corpus id {target:?}")));
                }
                aligned = Some(target.to_owned());
            }
            other => return Err(sc.err(format!("unknown keyword {other:?}"))),
        }
        sc.end()?;
    }

    let missing = |what: &str| Error::Registry {
        line: 0,
        message: format!("missing {what}"),
    };
    let decl = RegistryDecl {
        display_name,
        id: id.ok_or_else(|| missing("ID"))?,
        home: home.ok_or_else(|| missing("HOME"))?,
        positional,
        structural,
        dynamic,
        aligned,
    };
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = decl.all_names().find(|n| !seen.insert(*n)) {
        return Err(Error::Registry {
            line: 0,
            message: format!("attribute `{dup}` declared twice"),
        });
    }
    Ok(decl)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

pub fn serialize_registry(decl: &RegistryDecl) -> String {
    let mut out = String::new();
    if let Some(name) = &decl.display_name {
        let _ = writeln!(out, "NAME {}", quote(name));
    }
    let _ = writeln!(out, "ID {}", decl.id);
    let home = decl.home.to_string_lossy();
    if home.is_empty() || home.contains(|c: char| c.is_whitespace() || c == '#' || c == '"') {
        let _ = writeln!(out, "HOME {}", quote(&home));
    } else {
        let _ = writeln!(out, "HOME {home}");
    }
    for a in &decl.positional {
        match &a.remote {
            Some(addr) => {
                let _ = writeln!(out, "ATTRIBUTE {} REMOTE {addr}", a.name);
            }
            None => {
                let _ = writeln!(out, "ATTRIBUTE {}", a.name);
            }
        }
    }
    for s in &decl.structural {
        let _ = writeln!(out, "STRUCTURE {s}");
    }
    for d in &decl.dynamic {
        let args: Vec<&str> = d
            .arg_types
            .iter()
            .map(|t| match t {
                ValueType::Str => "String",
                ValueType::Int => "Int",
            })
            .collect();
        let _ = writeln!(
            out,
            "DYNAMIC {}({}):{} {}",
            d.name,
            args.join(","),
            d.return_type,
            quote(&d.command)
        );
    }
    if let Some(target) = &decl.aligned {
        let _ = writeln!(out, "ALIGNED {target}");
    }
    out
}

/// Where to look for registry files and how to authenticate to remote
/// attribute servers.
#[derive(Debug, Clone, Default)]
pub struct ResolveOptions {
    pub search_path: Vec<PathBuf>,
    pub auth_token: String,
}

impl ResolveOptions {
    pub fn new(search_path: Vec<PathBuf>) -> Self {
        ResolveOptions {
            search_path,
            auth_token: String::new(),
        }
    }

    /// Reads `CQK_REGISTRY` (`:`-separated) and `CQK_AUTH`.
    pub fn from_env() -> Self {
        let search_path = std::env::var(REGISTRY_ENV)
            .map(|v| split_search_path(&v))
            .unwrap_or_default();
        ResolveOptions {
            search_path,
            auth_token: std::env::var(AUTH_ENV).unwrap_or_default(),
        }
    }
}

pub fn split_search_path(value: &str) -> Vec<PathBuf> {
    value
        .split(':')
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

/// Finds and parses the registry file named `id`. A relative HOME is taken
/// relative to the directory holding the registry file.
pub fn find_registry(id: &str, search_path: &[PathBuf]) -> Result<RegistryDecl> {
    for dir in search_path {
        let path = dir.join(id);
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut decl = parse_registry(&text)?;
        if decl.id != id {
            return Err(Error::Registry {
                line: 0,
                message: format!(
                    "{} declares ID `{}`, expected `{id}`",
                    path.display(),
                    decl.id
                ),
            });
        }
        if decl.home.is_relative() {
            decl.home = dir.join(&decl.home);
        }
        return Ok(decl);
    }
    Err(Error::CorpusNotFound {
        id: id.to_owned(),
        searched: search_path.to_vec(),
    })
}

/// Opens the corpus a declaration describes.
pub fn load_corpus(decl: &RegistryDecl, options: &ResolveOptions) -> Result<Corpus> {
    let home = &decl.home;
    let mut positional = Vec::with_capacity(decl.positional.len());
    for a in &decl.positional {
        let attr = match &a.remote {
            Some(addr) => PositionalAttribute::remote(
                a.name.clone(),
                RemoteAttribute::connect(addr, &options.auth_token, &decl.id, &a.name)?,
            ),
            None => PositionalAttribute::load(home, &a.name)?,
        };
        positional.push(attr);
    }
    let structural = decl
        .structural
        .iter()
        .map(|name| {
            let regions = binfmt::read_pairs(&binfmt::rng_path(home, name), FileKind::Regions)?;
            StructuralRegions::new(name.clone(), regions)
        })
        .collect::<Result<Vec<_>>>()?;
    let local: Vec<&str> = decl
        .positional
        .iter()
        .filter(|a| a.remote.is_none())
        .map(|a| a.name.as_str())
        .collect();
    let bigrams = BigramTable::discover(home, &local)?
        .into_iter()
        .map(|(attr, window)| BigramTable::load(home, &attr, window))
        .collect::<Result<Vec<_>>>()?;
    let mut corpus =
        Corpus::new(decl.id.clone(), positional, structural, decl.dynamic.clone())?
            .with_bigrams(bigrams)?;
    if let Some(target) = &decl.aligned {
        let structure = decl.alignment_structure().ok_or_else(|| {
            Error::InvalidCorpus(format!(
                "corpus `{}` is aligned but declares no structural attribute",
                decl.id
            ))
        })?;
        let pairs = AlignmentMap::read_pairs(home, target)?;
        let target_decl = find_registry(target, &options.search_path)?;
        let target_structure = if target_decl.structural.iter().any(|s| s == structure) {
            structure
        } else {
            target_decl.alignment_structure().ok_or_else(|| {
                Error::InvalidCorpus(format!("aligned corpus `{target}` has no regions"))
            })?
        };
        let target_regions = binfmt::read_pairs(
            &binfmt::rng_path(&target_decl.home, target_structure),
            FileKind::Regions,
        )?;
        corpus = corpus.with_alignment(AlignmentMap::new(
            target.clone(),
            structure,
            pairs,
            target_regions,
        )?)?;
    }
    Ok(corpus)
}

/// Locates corpus `id` on the search path and opens it.
pub fn resolve_corpus(id: &str, options: &ResolveOptions) -> Result<(RegistryDecl, Corpus)> {
    let decl = find_registry(id, &options.search_path)?;
    let corpus = load_corpus(&decl, options)?;
    Ok((decl, corpus))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIGURE3: &str = r#"
NAME "Hansard corpus (english part)"
ID      hansard-e
HOME /corpora/encoded/hansard-e

ATTRIBUTE word
ATTRIBUTE pos

DYNAMIC ishuman(String):INT "/corpora/utils/cmd/wn-hypen '$1' human"

ALIGNED hansard-f          # the french part
"#;

    #[test]
    fn sample_registry() {
        let d = parse_registry(FIGURE3).unwrap();
        assert_eq!(d.display_name.as_deref(), Some("Hansard corpus (english part)"));
        assert_eq!(d.id, "hansard-e");
        assert_eq!(d.home, PathBuf::from("/corpora/encoded/hansard-e"));
        let names: Vec<_> = d.positional.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["word", "pos"]);
        assert_eq!(d.dynamic.len(), 1);
        let ishuman = &d.dynamic[0];
        assert_eq!(ishuman.name, "ishuman");
        assert_eq!(ishuman.arg_types, [ValueType::Str]);
        assert_eq!(ishuman.return_type, ValueType::Int);
        assert_eq!(ishuman.command, "/corpora/utils/cmd/wn-hypen '$1' human");
        assert_eq!(d.aligned.as_deref(), Some("hansard-f"));
        assert_eq!(parse_registry(&serialize_registry(&d)).unwrap(), d);
    }

    #[test]
    fn minimal_and_whitespace() {
        let d = parse_registry("ID  t\nHOME\t/x\n  ATTRIBUTE   word  # default\n").unwrap();
        assert_eq!(d, RegistryDecl::new("t", "/x").attribute("word"));
        let spaced = parse_registry(
            "ID t\nHOME /x\nATTRIBUTE word\nDYNAMIC  g ( String , Int ) : STRING \"cmd $1 $2\"\n",
        )
        .unwrap();
        assert_eq!(spaced.dynamic[0].arg_types, [ValueType::Str, ValueType::Int]);
        assert_eq!(spaced.dynamic[0].return_type, ValueType::Str);
    }

    #[test]
    fn errors() {
        let dup_home = parse_registry("ID t\nHOME /a\nHOME /b\n").unwrap_err();
        assert!(matches!(dup_home, Error::Registry { line: 3, .. }), "{dup_home}");
        assert!(parse_registry("ID t\nID u\nHOME /a\n").is_err());
        assert!(parse_registry("ID t\nHOME /a\nFOO bar\n").is_err());
        assert!(parse_registry("ID t\nHOME /a\nDYNAMIC g(String:INT \"x\"\n").is_err());
        assert!(parse_registry("ID t\nHOME /a\nDYNAMIC g(Float):INT \"x\"\n").is_err());
        assert!(parse_registry("ID t\nHOME /a\nDYNAMIC g(String):INT \"x $2\"\n").is_err());
        assert!(parse_registry("ID T\nHOME /a\n").is_err());
        assert!(parse_registry("HOME /a\n").is_err());
        assert!(parse_registry("ID t\nHOME /a\nATTRIBUTE w\nSTRUCTURE w\n").is_err());
        assert!(parse_registry("ID t\nHOME /a\nATTRIBUTE w REMOTE nohost\n").is_err());
    }

    #[test]
    fn serializes_structure_and_remote() {
        let mut d = RegistryDecl::new("t", "/a b").attribute("word").structure("s");
        d.positional.push(AttributeDecl {
            name: "pos".into(),
            remote: Some("127.0.0.1:4000".into()),
        });
        let text = serialize_registry(&d);
        assert!(text.contains("STRUCTURE s\n"));
        assert!(text.contains("ATTRIBUTE pos REMOTE 127.0.0.1:4000\n"));
        assert!(text.contains("HOME \"/a b\"\n"));
        assert_eq!(parse_registry(&text).unwrap(), d);
    }

    #[test]
    fn comments_do_not_change_result() {
        let with = "ID t # id\nHOME /a#not-a-comment-inside?\nATTRIBUTE word\n";
        // `#` starts a comment even without preceding whitespace
        assert_eq!(parse_registry(with).unwrap().home, PathBuf::from("/a"));
        let cmd = "ID t\nHOME /a\nATTRIBUTE word\nDYNAMIC g(String):INT \"echo '#$1'\" # c\n";
        assert_eq!(parse_registry(cmd).unwrap().dynamic[0].command, "echo '#$1'");
    }

    #[test]
    fn not_found_lists_dirs() {
        let err = find_registry("nosuch", &[PathBuf::from("/nonexistent/a")]).unwrap_err();
        assert!(matches!(err, Error::CorpusNotFound { .. }));
        assert!(err.to_string().contains("/nonexistent/a"));
    }
}
