#![allow(dead_code)]

pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};

use cqk_core::encoder::{self, VerticalDocument};
use cqk_core::physical::AlignmentMap;
use cqk_core::registry::{self, AttributeDecl, RegistryDecl};
use cqk_core::{Corpus, DynamicAttributeDecl, ResolveOptions, ValueType};

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn tiny_doc() -> VerticalDocument {
    VerticalDocument::parse(&fixture("tiny.vrt"), &["word", "pos"], &["s"]).unwrap()
}

pub fn tiny_f_doc() -> VerticalDocument {
    VerticalDocument::parse(&fixture("tiny-f.vrt"), &["word", "pos"], &["s"]).unwrap()
}

pub fn news_doc() -> VerticalDocument {
    VerticalDocument::parse(&fixture("news.vrt"), &["word", "pos", "num"], &["article", "s"]).unwrap()
}

/// Golden query suite: analogues of the paper's example queries plus a few
/// extra shapes, paired with the fixture they run on.
pub const NEWS_QUERIES: &[&str] = &[
    r#"[word="chair.*" & pos != "N.*"]"#,
    r#"[pos="JJ.*"] [pos="N.*"] "and|or" [pos="N.*"] [pos="IN" & word != "that"]"#,
    r#""kill.*" []? [pos="N.*" & ishuman(word)]"#,
    r#""love.*" []? [pos="N.*" & f(word)>1 & ishuman(word)]"#,
    r#"[pos="N.*"] [] <s> "She""#,
    r#""president" []* "said""#,
    r#""president" []* "said" within s"#,
    r#""president" []* "said" within 2 s"#,
    r#"a:[pos="N.*"] []* [pos="PRP" & num=a.num] within s"#,
    r#"a:[pos="N.*"] ([]* [word=a.word]){2} within s"#,
    r#"("and" | "or") [pos="N.*"]"#,
    r#"[pos="DT"] [pos="JJ"]? [pos="N.*"]"#,
    r#"<s> [pos="PRP"]"#,
    r#"[pos="SENT"] </s>"#,
    r#"[]{2,3} "said""#,
    r#"[pos="N.*" & isshort(word)]"#,
    r#"[!(pos="DT" | pos="SENT") & word="[a-z]+"]+ within s"#,
    r#"[word="N*"]"#,
    r#"[pos="N.*" & f(word) >= 2]"#,
    r#"a:[pos="NNS"] [] b:[] [pos=b.pos | word=a.word]"#,
];

pub const TINY_QUERIES: &[&str] = &[
    r#"[pos="NN.*"]"#,
    r#""the" []?"#,
    r#"[word="the"] [pos="N.*"] within s"#,
    r#"<s> "the""#,
    r#"[pos="N.*" & f(word)>1]"#,
    r#"[pos="N.*" & isshort(word)]"#,
    r#"[]* within s"#,
];

/// Encoded fixture corpora with registry files in a temporary directory.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub registry_dir: PathBuf,
    pub log: PathBuf,
}

fn dynamic_decls(log: &Path) -> Vec<DynamicAttributeDecl> {
    let script = |name: &str| {
        format!(
            "sh '{}' '$1' '{}'",
            fixture_path(name).display(),
            log.display()
        )
    };
    vec![
        DynamicAttributeDecl::new("isshort", vec![ValueType::Str], ValueType::Int, script("isshort.sh"))
            .unwrap(),
        DynamicAttributeDecl::new("ishuman", vec![ValueType::Str], ValueType::Int, script("ishuman.sh"))
            .unwrap(),
    ]
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let registry_dir = dir.path().join("registry");
        fs::create_dir_all(&registry_dir).unwrap();
        let log = dir.path().join("calls.log");
        let ws = Workspace {
            dir,
            registry_dir,
            log,
        };
        ws.add("tiny", &tiny_doc(), Some("tiny-f"));
        ws.add("tiny-f", &tiny_f_doc(), None);
        ws.add("news", &news_doc(), None);
        let tiny_home = ws.home("tiny");
        let target = tiny_f_doc();
        AlignmentMap::new("tiny-f", "s", vec![(0, 0), (1, 1)], target.regions[0].clone())
            .unwrap()
            .write(&tiny_home)
            .unwrap();
        ws
    }

    pub fn home(&self, id: &str) -> PathBuf {
        self.dir.path().join("data").join(id)
    }

    pub fn decl(&self, id: &str, doc: &VerticalDocument, aligned: Option<&str>) -> RegistryDecl {
        let mut decl = RegistryDecl::new(id, self.home(id));
        decl.positional = doc
            .positional
            .iter()
            .map(|name| AttributeDecl {
                name: name.clone(),
                remote: None,
            })
            .collect();
        decl.structural = doc.structural.clone();
        decl.dynamic = dynamic_decls(&self.log);
        decl.aligned = aligned.map(str::to_owned);
        decl
    }

    fn add(&self, id: &str, doc: &VerticalDocument, aligned: Option<&str>) {
        encoder::encode(doc, &self.home(id)).unwrap();
        let decl = self.decl(id, doc, aligned);
        self.write_registry(&decl);
    }

    pub fn write_registry(&self, decl: &RegistryDecl) {
        fs::write(self.registry_dir.join(&decl.id), registry::serialize_registry(decl)).unwrap();
    }

    pub fn options(&self) -> ResolveOptions {
        ResolveOptions::new(vec![self.registry_dir.clone()])
    }

    pub fn corpus(&self, id: &str) -> Corpus {
        registry::resolve_corpus(id, &self.options()).unwrap().1
    }

    /// Arguments logged by the stub commands since the last call.
    pub fn take_calls(&self) -> Vec<String> {
        let text = fs::read_to_string(&self.log).unwrap_or_default();
        let _ = fs::remove_file(&self.log);
        text.lines().map(str::to_owned).collect()
    }
}

pub fn oracle_for(doc: &VerticalDocument) -> oracle::Oracle<'_> {
    oracle::Oracle::new(doc)
        .with_dynamic("isshort", oracle::isshort)
        .with_dynamic("ishuman", oracle::ishuman)
}
