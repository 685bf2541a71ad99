#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

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
    r#"[]{2,3} "said""#,
    r#"[pos="N.*" & isshort(word)]"#,
];

/// A scratch directory with the fixture corpora encoded through the CLI.
pub struct Bench {
    pub dir: tempfile::TempDir,
}

impl Bench {
    pub fn new() -> Self {
        let bench = Bench {
            dir: tempfile::tempdir().unwrap(),
        };
        for (id, file, p, s) in [
            ("tiny", "tiny.vrt", "word,pos", "s"),
            ("tiny-f", "tiny-f.vrt", "word,pos", "s"),
            ("news", "news.vrt", "word,pos,num", "article,s"),
        ] {
            let out = bench.cqk(&[
                "encode",
                fixture(file).to_str().unwrap(),
                "--id",
                id,
                "--home",
                bench.path(&format!("data/{id}")).to_str().unwrap(),
                "-p",
                p,
                "-s",
                s,
                "--registry-dir",
                bench.path("reg").to_str().unwrap(),
            ]);
            assert!(out.status.success(), "{}", stderr(&out));
        }
        let dynamic = |name: &str| {
            format!(
                "DYNAMIC {name}(String):INT \"sh '{}' '$1'\"\n",
                fixture(&format!("{name}.sh")).display()
            )
        };
        let news = bench.path("reg/news");
        let mut text = fs::read_to_string(&news).unwrap();
        text.push_str(&dynamic("isshort"));
        text.push_str(&dynamic("ishuman"));
        fs::write(&news, text).unwrap();
        fs::write(bench.path("pairs.tsv"), "0\t0\n1\t1\n").unwrap();
        let out = bench.cqk(&["align", "tiny", "tiny-f", bench.path("pairs.tsv").to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        bench
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn command(&self) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cqk"));
        c.current_dir(self.dir.path())
            .env("CQK_REGISTRY", self.path("reg"))
            .env("CQK_HISTORY", self.path("history.jsonl"))
            .env_remove("CQK_AUTH");
        c
    }

    pub fn cqk(&self, args: &[&str]) -> Output {
        self.command().args(args).output().unwrap()
    }

    /// Runs and returns stdout, panicking on failure.
    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.cqk(args);
        assert!(out.status.success(), "cqk {args:?}: {}", stderr(&out));
        String::from_utf8(out.stdout).unwrap()
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
