//! JSONL corpus files.
//!
//! One record per line. Parallel records carry `id`, `source`, `target`,
//! `source_lang`, `target_lang`, `provenance` and (for synthetic pairs)
//! `generator`; monolingual records carry `id`, `text` and `lang`. Corpus
//! metadata (name, seed, transformation log) lives in a `<file>.meta.json`
//! sidecar.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{normalize, Corpus, CorpusError, CorpusMeta, MonoCorpus, Origin, ParallelCorpus, Record, Result, Sentence, SentencePair};
use crate::lang::{Direction, Lang};

pub trait JsonlRecord: Record + Sized {
    fn to_line(&self) -> String;
    fn from_line(line: &str, line_no: usize) -> Result<Self>;
}

#[derive(Serialize, Deserialize)]
struct PairLine {
    id: Option<String>,
    source: Option<String>,
    target: Option<String>,
    source_lang: Option<String>,
    target_lang: Option<String>,
    provenance: Option<String>,
    #[serde(default)]
    generator: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct MonoLine {
    id: Option<String>,
    text: Option<String>,
    lang: Option<String>,
}

fn require<T>(value: Option<T>, line: usize, field: &'static str) -> Result<T> {
    value.ok_or(CorpusError::MissingField { line, field })
}

fn parse_lang(s: &str, line: usize) -> Result<Lang> {
    s.parse().map_err(|e: crate::lang::UnknownLang| CorpusError::Parse {
        line,
        message: e.to_string(),
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(line: &str, line_no: usize) -> Result<T> {
    serde_json::from_str(line).map_err(|e| CorpusError::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

impl JsonlRecord for SentencePair {
    fn to_line(&self) -> String {
        let rec = PairLine {
            id: Some(self.id.clone()),
            source: Some(self.source.clone()),
            target: Some(self.target.clone()),
            source_lang: Some(self.direction.source.to_string()),
            target_lang: Some(self.direction.target.to_string()),
            provenance: Some(if self.origin.is_synthetic() { "synthetic" } else { "real" }.into()),
            generator: self.origin.generator().map(str::to_string),
        };
        serde_json::to_string(&rec).expect("plain record serializes")
    }

    fn from_line(line: &str, n: usize) -> Result<Self> {
        let rec: PairLine = parse_json(line, n)?;
        let id = require(rec.id, n, "id")?;
        let source = require(rec.source, n, "source")?;
        let target = require(rec.target, n, "target")?;
        let src = parse_lang(&require(rec.source_lang, n, "source_lang")?, n)?;
        let tgt = parse_lang(&require(rec.target_lang, n, "target_lang")?, n)?;
        let direction = Direction::new(src, tgt).ok_or_else(|| CorpusError::Parse {
            line: n,
            message: format!("source_lang and target_lang are both `{src}`"),
        })?;
        let origin = match (require(rec.provenance, n, "provenance")?.as_str(), rec.generator) {
            ("real", None) => Origin::Real,
            ("synthetic", Some(generator)) => Origin::Synthetic { generator },
            ("synthetic", None) => return Err(CorpusError::MissingField { line: n, field: "generator" }),
            ("real", Some(_)) => {
                return Err(CorpusError::Parse {
                    line: n,
                    message: "real pair must not carry a generator".into(),
                })
            }
            (other, _) => {
                return Err(CorpusError::Parse {
                    line: n,
                    message: format!("unknown provenance `{other}`"),
                })
            }
        };
        Ok(SentencePair {
            id,
            source: normalize(&source),
            target: normalize(&target),
            direction,
            origin,
        })
    }
}

impl JsonlRecord for Sentence {
    fn to_line(&self) -> String {
        let rec = MonoLine {
            id: Some(self.id.clone()),
            text: Some(self.text.clone()),
            lang: Some(self.lang.to_string()),
        };
        serde_json::to_string(&rec).expect("plain record serializes")
    }

    fn from_line(line: &str, n: usize) -> Result<Self> {
        let rec: MonoLine = parse_json(line, n)?;
        Ok(Sentence {
            id: require(rec.id, n, "id")?,
            text: normalize(&require(rec.text, n, "text")?),
            lang: parse_lang(&require(rec.lang, n, "lang")?, n)?,
        })
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the corpus as JSONL plus its metadata sidecar.
pub fn save<T: JsonlRecord>(corpus: &Corpus<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in corpus.items() {
        writeln!(w, "{}", item.to_line()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = meta_path(path);
    let json = serde_json::to_string_pretty(corpus.meta()).expect("metadata serializes");
    fs::write(&meta, json + "\n").map_err(io_err(&meta))
}

fn load<T: JsonlRecord>(path: &Path) -> Result<Corpus<T>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(T::from_line(&line, i + 1)?);
    }
    let meta = match fs::read_to_string(meta_path(path)) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
            line: e.line(),
            message: format!("{}: {e}", meta_path(path).display()),
        })?,
        Err(_) => CorpusMeta {
            name: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".into()),
            seed: None,
            log: Vec::new(),
        },
    };
    Corpus::with_meta(meta, items)
}

pub fn load_parallel(path: &Path) -> Result<ParallelCorpus> {
    load(path)
}

pub fn load_mono(path: &Path) -> Result<MonoCorpus> {
    load(path)
}

/// Reads a plain-text dump (one sentence per line) as a monolingual corpus
/// named after the file stem.
pub fn load_raw_lines(path: &Path, lang: Lang) -> Result<MonoCorpus> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "raw".into());
    let c = MonoCorpus::from_lines(&name, lang, text.lines());
    let detail = format!("{} lines from {}", c.len(), path.display());
    c.derive(name, None, "load-raw", detail, c.items().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParallelCorpus {
        let items = vec![
            SentencePair::real("a", "我哋今日去飲茶啦", "we go for dim sum today", Direction::YUE_EN),
            SentencePair::real("b", "好開心😀見到你", "so happy 😀 to see you", Direction::YUE_EN),
            SentencePair {
                id: "c".into(),
                source: "佢哋嘅車".into(),
                target: "their car".into(),
                direction: Direction::YUE_EN,
                origin: Origin::Synthetic { generator: "mbart/ft/yue-en".into() },
            },
        ];
        Corpus::new("sample", items).unwrap()
    }

    #[test]
    fn round_trip_three_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = sample();
        save(&c, &path).unwrap();
        assert_eq!(load_parallel(&path).unwrap(), c);
    }

    #[test]
    fn serialized_bytes_stable_across_saves() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.jsonl"), dir.path().join("2.jsonl"));
        // Decomposed "é" is normalized to NFC on load, so the second save
        // must reproduce the bytes of a save of the normalized corpus.
        let mut items = sample().into_items();
        items[0].target = "cafe\u{301} 😀".into();
        let raw = Corpus::new("sample", items).unwrap();
        save(&raw, &p1).unwrap();
        let loaded = load_parallel(&p1).unwrap();
        assert_eq!(loaded.items()[0].target, "café 😀");
        save(&loaded, &p2).unwrap();
        let again = load_parallel(&p2).unwrap();
        let p3 = dir.path().join("3.jsonl");
        save(&again, &p3).unwrap();
        assert_eq!(fs::read(&p2).unwrap(), fs::read(&p3).unwrap());
    }

    #[test]
    fn missing_field_names_field_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = sample().items()[0].to_line();
        fs::write(&path, format!("{good}\n{{\"id\":\"x\",\"source\":\"s\",\"source_lang\":\"yue\",\"target_lang\":\"en\",\"provenance\":\"real\"}}\n")).unwrap();
        let err = load_parallel(&path).unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { line: 2, field: "target" }), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(load_parallel(&path), Err(CorpusError::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicate_id_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        let line = sample().items()[0].to_line();
        fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        assert!(matches!(load_parallel(&path), Err(CorpusError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn synthetic_requires_generator() {
        let line = r#"{"id":"x","source":"s","target":"t","source_lang":"yue","target_lang":"en","provenance":"synthetic"}"#;
        assert!(matches!(
            SentencePair::from_line(line, 4),
            Err(CorpusError::MissingField { line: 4, field: "generator" })
        ));
    }

    #[test]
    fn mono_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let m = MonoCorpus::from_lines("m", Lang::Yue, ["一二三", "", "四五六"]);
        assert_eq!(m.len(), 2);
        save(&m, &path).unwrap();
        assert_eq!(load_mono(&path).unwrap(), m);
    }
}
