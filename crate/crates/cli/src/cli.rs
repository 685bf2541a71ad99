//! `cqk` subcommands.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use cqk_core::encoder::{self, VerticalDocument};
use cqk_core::kwic::{self, Context, SortKey};
use cqk_core::physical::{AlignmentMap, BigramTable};
use cqk_core::registry::{self, RegistryDecl};
use cqk_core::results::{self, SetOp};
use cqk_core::{compile, eval_query, parse_query, Corpus, MatchSet, NamedResult, ResolveOptions};

use crate::history::{Entry, History};
use crate::http;

#[derive(Debug, Parser)]
#[command(name = "cqk", version, about = "Corpus query workbench")]
pub struct Cli {
    /// Registry search path (colon-separated); overrides CQK_REGISTRY.
    #[arg(long, global = true, value_name = "PATHS")]
    registry: Option<String>,
    /// Query history file.
    #[arg(long, global = true, env = "CQK_HISTORY", value_name = "FILE")]
    history: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a vertical file into binary corpus files.
    Encode(EncodeArgs),
    /// Print a corpus's attributes and sizes.
    Describe { corpus: String },
    /// Evaluate a query and print the match count.
    Query(QueryArgs),
    /// Print concordance lines for a result file.
    Kwic(KwicArgs),
    /// Combine two result files: union, intersect(ion) or diff(erence).
    Setop {
        kind: String,
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Expand each match to the enclosing regions of a structure.
    Expand {
        corpus: String,
        result: PathBuf,
        structure: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print `value<TAB>freq` for every value of an attribute, most frequent first.
    Wordlist { corpus: String, attr: String },
    /// Print a bigram count, or the whole table.
    Bigram {
        corpus: String,
        attr: String,
        #[arg(long, default_value_t = 1)]
        window: u32,
        first: Option<String>,
        second: Option<String>,
    },
    /// Add a positional attribute (one value per line) to an encoded corpus.
    AddAttr {
        corpus: String,
        name: String,
        values: PathBuf,
    },
    /// Write an alignment from `source` regions to `target` regions.
    Align {
        source: String,
        target: String,
        /// Lines of `source-region<TAB>target-region`.
        pairs: PathBuf,
        #[arg(long)]
        structure: Option<String>,
    },
    /// List the query history, or rerun an entry.
    History {
        /// 1-based entry to rerun.
        #[arg(long)]
        rerun: Option<usize>,
        #[arg(short, long, requires = "rerun")]
        output: Option<PathBuf>,
    },
    /// Serve corpora over the binary protocol and/or the HTTP JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct EncodeArgs {
    vertical: PathBuf,
    /// Corpus id; with no --home, its registry entry supplies home and attributes.
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    home: Option<PathBuf>,
    /// Positional attribute names, in column order.
    #[arg(short = 'p', long = "positional", value_delimiter = ',')]
    positional: Vec<String>,
    /// Structural attribute names.
    #[arg(short = 's', long = "structural", value_delimiter = ',')]
    structural: Vec<String>,
    /// Write a registry file for the corpus into this directory.
    #[arg(long, value_name = "DIR")]
    registry_dir: Option<PathBuf>,
    /// Also write inverted index files.
    #[arg(long)]
    index: bool,
    /// Bigram window sizes to build for the first positional attribute.
    #[arg(long, value_delimiter = ',')]
    bigram: Vec<u32>,
    /// Replace an existing corpus directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct QueryArgs {
    corpus: String,
    query: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Restrict matches to the intervals of this result file.
    #[arg(long, value_name = "RESULT")]
    sub: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    max_len: Option<usize>,
}

#[derive(Debug, Args)]
struct KwicArgs {
    corpus: String,
    result: PathBuf,
    /// Tokens per side, or a structure name.
    #[arg(long, default_value = "5")]
    context: String,
    /// match, left, right or position.
    #[arg(long)]
    sort: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "word")]
    attrs: Vec<String>,
    /// Show the aligned corpus instead of context.
    #[arg(long)]
    aligned: bool,
    /// Also write the lines to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    corpora: Vec<String>,
    #[arg(long, value_name = "ADDR")]
    tcp: Option<String>,
    #[arg(long, value_name = "ADDR")]
    http: Option<String>,
    /// Token required by binary-protocol clients.
    #[arg(long, env = "CQK_AUTH", default_value = "")]
    token: String,
    #[arg(long, value_name = "N")]
    max_len: Option<usize>,
}

struct Env {
    options: ResolveOptions,
    history_path: Option<PathBuf>,
}

impl Env {
    fn resolve(&self, id: &str) -> Result<(RegistryDecl, Corpus)> {
        Ok(registry::resolve_corpus(id, &self.options)?)
    }

    fn corpus(&self, id: &str) -> Result<Corpus> {
        Ok(self.resolve(id)?.1)
    }

    fn history(&self) -> Result<History> {
        match &self.history_path {
            Some(p) => History::open(p),
            None => Ok(History::in_memory()),
        }
    }

    /// Path of the registry file for `id`, first match in the search path.
    fn registry_file(&self, id: &str) -> Option<PathBuf> {
        self.options
            .search_path
            .iter()
            .map(|d| d.join(id))
            .find(|p| p.is_file())
    }
}

fn default_history() -> Option<PathBuf> {
    std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cqk_history"))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut options = ResolveOptions::from_env();
    if let Some(paths) = &cli.registry {
        options.search_path = registry::split_search_path(paths);
    }
    let env = Env {
        options,
        history_path: cli.history.or_else(default_history),
    };
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Encode(args) => encode(&env, args, &mut out),
        Command::Describe { corpus } => describe(&env, &corpus, &mut out),
        Command::Query(args) => query(&env, args, &mut out),
        Command::Kwic(args) => kwic_cmd(&env, args, &mut out),
        Command::Setop { kind, a, b, output } => {
            let kind: SetOp = kind.parse()?;
            let (a, b) = (load(&a)?, load(&b)?);
            let combined = results::set_op(kind, &a.matchset, &b.matchset)?;
            emit(combined, None, output.as_deref(), &mut out)
        }
        Command::Expand {
            corpus,
            result,
            structure,
            output,
        } => {
            let corpus = env.corpus(&corpus)?;
            let r = load(&result)?;
            let expanded = results::as_subcorpus(&r.matchset, Some(&structure), &corpus)?;
            emit(expanded, None, output.as_deref(), &mut out)
        }
        Command::Wordlist { corpus, attr } => wordlist(&env, &corpus, &attr, &mut out),
        Command::Bigram {
            corpus,
            attr,
            window,
            first,
            second,
        } => bigram(&env, &corpus, &attr, window, first, second, &mut out),
        Command::AddAttr { corpus, name, values } => add_attr(&env, &corpus, &name, &values, &mut out),
        Command::Align {
            source,
            target,
            pairs,
            structure,
        } => align(&env, &source, &target, &pairs, structure, &mut out),
        Command::History { rerun, output } => history_cmd(&env, rerun, output, &mut out),
        Command::Serve(args) => serve(&env, args),
    }
}

fn load(path: &Path) -> Result<NamedResult> {
    results::load_result(path).with_context(|| format!("loading {}", path.display()))
}

/// Saves to `output`, or prints the result file text.
fn emit(matchset: MatchSet, query: Option<String>, output: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let name = output
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "result".into());
    let r = NamedResult::new(name, matchset, query);
    match output {
        Some(p) => {
            results::save_result(&r, p)?;
            writeln!(out, "{} written to {}", count(r.matchset.len()), p.display())?;
        }
        None => out.write_all(results::format_result(&r).as_bytes())?,
    }
    Ok(())
}

fn count(n: usize) -> String {
    if n == 1 {
        "1 match".into()
    } else {
        format!("{n} matches")
    }
}

/// Column count and structure names seen in a vertical file.
fn sniff(text: &str) -> (usize, Vec<String>) {
    let mut columns = 0;
    let mut structures: Vec<String> = Vec::new();
    for line in text.lines().map(|l| l.trim_end_matches('\r')) {
        if line.is_empty() {
            continue;
        }
        let tag = line
            .strip_prefix('<')
            .and_then(|l| l.strip_suffix('>'))
            .filter(|_| !line.contains('\t'))
            .map(|n| n.trim_start_matches('/'));
        match tag {
            Some(name) if !name.is_empty() => {
                if !structures.iter().any(|s| s == name) {
                    structures.push(name.to_owned());
                }
            }
            _ if columns == 0 => columns = line.split('\t').count(),
            _ => {}
        }
    }
    (columns, structures)
}

fn default_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match i {
            0 => "word".into(),
            1 => "pos".into(),
            2 => "lemma".into(),
            _ => format!("attr{}", i + 1),
        })
        .collect()
}

fn encode(env: &Env, args: EncodeArgs, out: &mut impl Write) -> Result<()> {
    let bytes = fs::read(&args.vertical).with_context(|| format!("reading {}", args.vertical.display()))?;
    let text = String::from_utf8_lossy(&bytes);
    let (columns, seen) = sniff(&text);

    let looked_up = match (&args.home, &args.id) {
        (None, Some(id)) => Some(registry::find_registry(id, &env.options.search_path)?),
        (None, None) => bail!("give --home, or --id of a registered corpus"),
        _ => None,
    };
    let id = args
        .id
        .clone()
        .or_else(|| args.vertical.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .context("cannot derive a corpus id; give --id")?;
    let home = match (&args.home, &looked_up) {
        (Some(h), _) => h.clone(),
        (None, Some(decl)) => decl.home.clone(),
        (None, None) => unreachable!(),
    };
    let positional = match (&looked_up, args.positional.is_empty()) {
        (_, false) => args.positional.clone(),
        (Some(decl), true) => decl.positional.iter().map(|a| a.name.clone()).collect(),
        (None, true) => default_names(columns.max(1)),
    };
    let structural = match (&looked_up, args.structural.is_empty()) {
        (_, false) => args.structural.clone(),
        (Some(decl), true) => decl.structural.clone(),
        (None, true) => seen,
    };

    let p: Vec<&str> = positional.iter().map(String::as_str).collect();
    let s: Vec<&str> = structural.iter().map(String::as_str).collect();
    let doc = VerticalDocument::parse_bytes(&bytes, &p, &s)
        .with_context(|| format!("{}", args.vertical.display()))?;

    let occupied = fs::read_dir(&home).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied {
        if !args.force {
            bail!(
                "{} already contains a corpus; use --force to replace it",
                home.display()
            );
        }
        fs::remove_dir_all(&home).with_context(|| format!("removing {}", home.display()))?;
    }
    let summary = encoder::encode(&doc, &home)?;
    if args.index {
        for name in &positional {
            encoder::build_inverted_index(&home, name)?;
        }
    }
    for &w in &args.bigram {
        encoder::build_bigram_table(&home, &positional[0], w)?;
    }
    if let Some(dir) = &args.registry_dir {
        let mut decl = looked_up.unwrap_or_else(|| RegistryDecl::new(&id, &home));
        decl.home = fs::canonicalize(&home)?;
        decl.positional = positional
            .iter()
            .map(|n| registry::AttributeDecl {
                name: n.clone(),
                remote: None,
            })
            .collect();
        decl.structural = structural.clone();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(&decl.id), registry::serialize_registry(&decl))?;
    }
    writeln!(out, "{summary}")?;
    Ok(())
}

fn describe(env: &Env, id: &str, out: &mut impl Write) -> Result<()> {
    let (decl, corpus) = env.resolve(id)?;
    writeln!(out, "id: {}", corpus.id())?;
    if let Some(name) = &decl.display_name {
        writeln!(out, "name: {name}")?;
    }
    writeln!(out, "home: {}", decl.home.display())?;
    writeln!(out, "size: {}", corpus.size())?;
    for a in &decl.positional {
        let len = corpus.attribute(&a.name)?.lexicon_len()?;
        match &a.remote {
            Some(addr) => writeln!(out, "attribute {} ({len} values) remote {addr}", a.name)?,
            None => writeln!(out, "attribute {} ({len} values)", a.name)?,
        }
    }
    for s in corpus.structural() {
        writeln!(out, "structure {} ({} regions)", s.name(), s.len())?;
    }
    for d in corpus.dynamic() {
        let args: Vec<&str> = d
            .arg_types
            .iter()
            .map(|t| match t {
                cqk_core::ValueType::Str => "String",
                cqk_core::ValueType::Int => "Int",
            })
            .collect();
        writeln!(out, "dynamic {}({}):{}", d.name, args.join(","), d.return_type)?;
    }
    for t in corpus.bigram_tables() {
        writeln!(out, "bigram {} window {}", t.attribute(), t.window())?;
    }
    if let Some(a) = corpus.alignment() {
        writeln!(out, "aligned {} by {}", a.target, a.structure)?;
    }
    Ok(())
}

fn evaluate(corpus: &Corpus, text: &str, sub: Option<&MatchSet>, max_len: Option<usize>) -> Result<MatchSet> {
    let q = parse_query(text).map_err(|e| {
        anyhow::anyhow!("{e}\n  {}\n  {}^", text.replace('\n', " "), " ".repeat(e.column.saturating_sub(1)))
    })?;
    let mut program = compile(&q, corpus)?;
    if let Some(n) = max_len {
        program = program.with_max_match_length(n);
    }
    Ok(eval_query(&program, corpus, sub)?)
}

fn query(env: &Env, args: QueryArgs, out: &mut impl Write) -> Result<()> {
    let corpus = env.corpus(&args.corpus)?;
    let sub = args.sub.as_deref().map(load).transpose()?;
    let matches = evaluate(&corpus, &args.query, sub.as_ref().map(|r| &r.matchset), args.max_len)?;
    env.history()?.append(Entry::now(&args.query, &args.corpus))?;
    finish_query(matches, args.query, args.output.as_deref(), out)
}

fn finish_query(matches: MatchSet, text: String, output: Option<&Path>, out: &mut impl Write) -> Result<()> {
    match output {
        Some(p) => emit(matches, Some(text), Some(p), out),
        None => {
            writeln!(out, "{}", count(matches.len()))?;
            Ok(())
        }
    }
}

fn kwic_cmd(env: &Env, args: KwicArgs, out: &mut impl Write) -> Result<()> {
    let corpus = env.corpus(&args.corpus)?;
    let result = load(&args.result)?;
    result.matchset.check_against(&corpus)?;
    if args.aligned {
        let target_id = corpus
            .alignment()
            .map(|a| a.target.clone())
            .ok_or_else(|| cqk_core::Error::NotAligned(corpus.id().to_owned()))?;
        let target = env.corpus(&target_id)?;
        let lines = kwic::aligned_lines(&result.matchset, &corpus, &target)?;
        let text = kwic::render_aligned(&lines, corpus.id(), target.id());
        if let Some(p) = &args.output {
            fs::write(p, &text)?;
        }
        out.write_all(text.as_bytes())?;
        return Ok(());
    }
    let context: Context = args.context.parse().unwrap();
    let attrs: Vec<&str> = args.attrs.iter().map(String::as_str).collect();
    let lines = kwic::kwic_lines(&result.matchset, &corpus, &context, &attrs)?;
    let ordered: Vec<kwic::KwicLine> = match &args.sort {
        Some(key) => {
            let key: SortKey = key.parse()?;
            kwic::sort_lines(&lines, key).into_iter().map(|i| lines[i].clone()).collect()
        }
        None => lines,
    };
    if let Some(p) = &args.output {
        kwic::export_text(&ordered, p)?;
    }
    out.write_all(kwic::render_lines(&ordered).as_bytes())?;
    Ok(())
}

fn wordlist(env: &Env, id: &str, attr: &str, out: &mut impl Write) -> Result<()> {
    let corpus = env.corpus(id)?;
    let a = corpus.attribute(attr)?;
    let lexicon = a.lexicon()?;
    let mut rows: Vec<(&str, usize)> = lexicon
        .iter()
        .enumerate()
        .map(|(id, v)| Ok((v.as_str(), a.freq(id as u32)?)))
        .collect::<Result<_, cqk_core::Error>>()?;
    // ties keep lexicon (first occurrence) order
    rows.sort_by_key(|r| std::cmp::Reverse(r.1));
    for (v, f) in rows {
        writeln!(out, "{v}\t{f}")?;
    }
    Ok(())
}

fn bigram(
    env: &Env,
    id: &str,
    attr: &str,
    window: u32,
    first: Option<String>,
    second: Option<String>,
    out: &mut impl Write,
) -> Result<()> {
    let corpus = env.corpus(id)?;
    let a = corpus.attribute(attr)?;
    let built;
    let table = match corpus.bigram_table(attr, window) {
        Ok(t) => t,
        Err(cqk_core::Error::NoBigramTable { .. }) => {
            built = BigramTable::build(attr, &a.ids(0, a.size())?, window)?;
            &built
        }
        Err(e) => return Err(e.into()),
    };
    match (first, second) {
        (Some(x), Some(y)) => {
            let n = match (a.str_to_id(&x)?, a.str_to_id(&y)?) {
                (Some(i), Some(j)) => table.count(i, j),
                _ => 0,
            };
            writeln!(out, "{n}")?;
        }
        (None, None) => {
            let mut rows: Vec<(String, String, u32)> = table
                .entries()
                .iter()
                .map(|&(i, j, n)| Ok((a.id_to_str(i)?.into_owned(), a.id_to_str(j)?.into_owned(), n)))
                .collect::<Result<_, cqk_core::Error>>()?;
            rows.sort_by(|x, y| y.2.cmp(&x.2).then_with(|| (&x.0, &x.1).cmp(&(&y.0, &y.1))));
            for (x, y, n) in rows {
                writeln!(out, "{x}\t{y}\t{n}")?;
            }
        }
        _ => bail!("give two values, or none to print the whole table"),
    }
    Ok(())
}

fn add_attr(env: &Env, id: &str, name: &str, values: &Path, out: &mut impl Write) -> Result<()> {
    let (decl, _) = env.resolve(id)?;
    let text = fs::read_to_string(values).with_context(|| format!("reading {}", values.display()))?;
    let column: Vec<&str> = text.lines().collect();
    encoder::add_positional_attribute(&decl.home, name, &column)?;
    if let Some(path) = env.registry_file(id) {
        let mut reg = fs::read_to_string(&path)?;
        if !reg.ends_with('\n') {
            reg.push('\n');
        }
        reg.push_str(&format!("ATTRIBUTE {name}\n"));
        fs::write(&path, reg)?;
    }
    writeln!(out, "added {name} ({} values)", column.len())?;
    Ok(())
}

fn align(
    env: &Env,
    source: &str,
    target: &str,
    pairs: &Path,
    structure: Option<String>,
    out: &mut impl Write,
) -> Result<()> {
    let (decl, corpus) = env.resolve(source)?;
    let target_corpus = env.corpus(target)?;
    let structure = match structure {
        Some(s) => s,
        None => decl
            .alignment_structure()
            .context("source corpus has no structural attribute to align")?
            .to_owned(),
    };
    corpus.structure(&structure)?;
    let text = fs::read_to_string(pairs).with_context(|| format!("reading {}", pairs.display()))?;
    let parsed = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut it = l.split('\t').map(|f| f.trim().parse::<u32>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => bail!("{}:{}: expected `source<TAB>target`", pairs.display(), i + 1),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let target_regions = target_corpus.structure(&structure)?.regions().to_vec();
    let n = parsed.len();
    AlignmentMap::new(target, &structure, parsed, target_regions)?.write(&decl.home)?;
    if decl.aligned.as_deref() != Some(target) {
        if let Some(path) = env.registry_file(source) {
            let mut updated = decl.clone();
            updated.aligned = Some(target.to_owned());
            fs::write(&path, registry::serialize_registry(&updated))?;
        }
    }
    writeln!(out, "{n} aligned regions")?;
    Ok(())
}

fn history_cmd(env: &Env, rerun: Option<usize>, output: Option<PathBuf>, out: &mut impl Write) -> Result<()> {
    let mut history = env.history()?;
    let Some(k) = rerun else {
        for (i, e) in history.entries().iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                i + 1,
                e.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                e.corpus,
                e.query
            )?;
        }
        return Ok(());
    };
    let entry = k
        .checked_sub(1)
        .and_then(|i| history.entries().get(i))
        .cloned()
        .with_context(|| format!("no history entry {k} ({} entries)", history.entries().len()))?;
    let corpus = env.corpus(&entry.corpus)?;
    let matches = evaluate(&corpus, &entry.query, None, None)?;
    history.append(Entry::now(&entry.query, &entry.corpus))?;
    finish_query(matches, entry.query, output.as_deref(), out)
}

fn serve(env: &Env, args: ServeArgs) -> Result<()> {
    if args.tcp.is_none() && args.http.is_none() {
        bail!("give --tcp ADDR and/or --http ADDR");
    }
    if args.corpora.is_empty() {
        bail!("no corpora to serve");
    }
    let tcp = match &args.tcp {
        Some(addr) => {
            let corpora = args.corpora.iter().map(|id| env.corpus(id)).collect::<Result<Vec<_>>>()?;
            let handle = cqk_core::remote::serve(corpora, addr, &args.token)?;
            eprintln!("tcp listening on {}", handle.local_addr());
            Some(handle)
        }
        None => None,
    };
    match &args.http {
        Some(addr) => {
            let loaded = args.corpora.iter().map(|id| env.resolve(id)).collect::<Result<Vec<_>>>()?;
            let mut state = http::AppState::new(loaded, env.history()?);
            if let Some(n) = args.max_len {
                state = state.with_max_match_length(n);
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(http::serve(Arc::new(state), addr))?;
        }
        None => {
            if let Some(handle) = tcp {
                handle.wait();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sniffs_columns_and_structures() {
        let (cols, s) = sniff("<text>\n<s>\nthe\tDT\n</s>\n<s>\ncat\tNN\n</s>\n</text>\n");
        assert_eq!(cols, 2);
        assert_eq!(s, ["text", "s"]);
        assert_eq!(default_names(4), ["word", "pos", "lemma", "attr4"]);
    }

    #[test]
    fn match_counts() {
        assert_eq!(count(0), "0 matches");
        assert_eq!(count(1), "1 match");
        assert_eq!(count(2), "2 matches");
    }
}
