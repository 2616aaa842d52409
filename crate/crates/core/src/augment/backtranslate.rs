//! Batched translation of a monolingual corpus into synthetic pairs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{AugmentError, SyntheticCorpus};
use crate::backends::{BackendError, DecodingOptions, LoadedModel, TranslationRequest};
use crate::corpus::{normalize, Corpus, CorpusMeta, JsonlRecord, LogEntry, MonoCorpus, Origin, SentencePair};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BacktranslateOptions {
    pub batch_size: usize,
    pub decoding: DecodingOptions,
    /// Partial JSONL output. When set, finished batches are appended here and
    /// a resume token is kept next to it until the run completes.
    pub checkpoint: Option<PathBuf>,
}

impl Default for BacktranslateOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            decoding: DecodingOptions::default(),
            checkpoint: None,
        }
    }
}

/// Progress marker stored as `<partial>.resume.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeToken {
    pub schema_version: u32,
    pub source_mono: String,
    pub mono_len: usize,
    pub generator: String,
    pub batch_size: usize,
    pub next_batch: usize,
    pub completed: usize,
    pub partial: PathBuf,
}

impl ResumeToken {
    pub fn path_for(partial: &Path) -> PathBuf {
        let mut name = partial.file_name().unwrap_or_default().to_os_string();
        name.push(".resume.json");
        partial.with_file_name(name)
    }
}

fn ckpt_err(path: &Path, reason: impl ToString) -> AugmentError {
    AugmentError::Checkpoint {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

struct Checkpoint {
    token: ResumeToken,
    file: fs::File,
}

impl Checkpoint {
    /// Opens the partial output, returning it with the pairs already done.
    fn open(partial: &Path, fresh: ResumeToken, mono: &MonoCorpus) -> Result<(Self, Vec<SentencePair>), AugmentError> {
        if let Some(dir) = partial.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| ckpt_err(dir, e))?;
        }
        let token_path = ResumeToken::path_for(partial);
        let mut done = Vec::new();
        let mut token = fresh.clone();
        if let Ok(text) = fs::read_to_string(&token_path) {
            let saved: ResumeToken = serde_json::from_str(&text).map_err(|e| ckpt_err(&token_path, e))?;
            let same_run = (&saved.source_mono, saved.mono_len, &saved.generator, saved.batch_size)
                == (&fresh.source_mono, fresh.mono_len, &fresh.generator, fresh.batch_size);
            if !same_run {
                return Err(ckpt_err(&token_path, "resume token belongs to a different run; delete it to start over"));
            }
            let file = fs::File::open(partial).map_err(|e| ckpt_err(partial, e))?;
            for (i, line) in BufReader::new(file).lines().take(saved.completed).enumerate() {
                let line = line.map_err(|e| ckpt_err(partial, e))?;
                let pair = SentencePair::from_line(&line, i + 1).map_err(|e| ckpt_err(partial, e))?;
                if pair.id != mono.items()[i].id || pair.source != mono.items()[i].text {
                    return Err(ckpt_err(partial, format!("line {} does not match the monolingual input", i + 1)));
                }
                done.push(pair);
            }
            if done.len() != saved.completed {
                return Err(ckpt_err(partial, format!("expected {} saved pairs, found {}", saved.completed, done.len())));
            }
            token = saved;
        }
        // Rewrite so lines past the token's count (from an interrupted append) are dropped.
        let mut file = fs::File::create(partial).map_err(|e| ckpt_err(partial, e))?;
        for p in &done {
            writeln!(file, "{}", p.to_line()).map_err(|e| ckpt_err(partial, e))?;
        }
        token.partial = partial.to_path_buf();
        let ck = Self { token, file };
        ck.store()?;
        Ok((ck, done))
    }

    fn append(&mut self, pairs: &[SentencePair]) -> Result<(), AugmentError> {
        let partial = self.token.partial.clone();
        let mut buf = String::new();
        for p in pairs {
            buf.push_str(&p.to_line());
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes()).map_err(|e| ckpt_err(&partial, e))?;
        self.file.sync_data().map_err(|e| ckpt_err(&partial, e))?;
        self.token.next_batch += 1;
        self.token.completed += pairs.len();
        self.store()
    }

    fn store(&self) -> Result<(), AugmentError> {
        let path = ResumeToken::path_for(&self.token.partial);
        let tmp = path.with_extension("tmp");
        let json = serde_json::to_string_pretty(&self.token).expect("token serializes");
        fs::write(&tmp, json).map_err(|e| ckpt_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ckpt_err(&path, e))
    }

    fn finish(self) {
        let _ = fs::remove_file(ResumeToken::path_for(&self.token.partial));
        let _ = fs::remove_file(&self.token.partial);
    }
}

/// Translates every sentence of `mono` with the model loaded in `workers`
/// (several instances of the same model may share the batches). Pair `i`
/// keeps the id and text of sentence `i`; output order always follows the
/// input regardless of which worker handled a batch.
///
/// With a checkpoint configured, a failure leaves the completed prefix on
/// disk and a rerun with the same inputs continues from the first
/// unfinished batch. On success both checkpoint files are removed.
pub fn backtranslate(mono: &MonoCorpus, workers: &mut [LoadedModel], opts: &BacktranslateOptions) -> Result<SyntheticCorpus, AugmentError> {
    let Some(first) = workers.first() else {
        return Err(AugmentError::NoWorkers);
    };
    if opts.batch_size == 0 {
        return Err(AugmentError::NoWorkers);
    }
    let key = first.descriptor().key();
    if let Some(other) = workers.iter().map(|w| w.descriptor().key()).find(|k| *k != key) {
        return Err(AugmentError::MixedWorkers(key, other));
    }
    if let Some(lang) = mono.lang() {
        if lang != key.direction.source {
            return Err(AugmentError::LangMismatch {
                mono: lang,
                model: key.direction,
            });
        }
    }
    let generator = key.to_string();
    let batches: Vec<&[crate::corpus::Sentence]> = mono.items().chunks(opts.batch_size).collect();

    let (mut checkpoint, mut pairs) = match &opts.checkpoint {
        Some(path) => {
            let fresh = ResumeToken {
                schema_version: 1,
                source_mono: mono.name().to_string(),
                mono_len: mono.len(),
                generator: generator.clone(),
                batch_size: opts.batch_size,
                next_batch: 0,
                completed: 0,
                partial: path.clone(),
            };
            let (ck, done) = Checkpoint::open(path, fresh, mono)?;
            (Some(ck), done)
        }
        None => (None, Vec::new()),
    };
    let start = pairs.len() / opts.batch_size;
    if start > 0 {
        tracing::info!(batch = start, completed = pairs.len(), "resuming back-translation");
    }

    let next = AtomicUsize::new(start);
    let stop = AtomicBool::new(false);
    let mut failure: Option<(usize, BackendError)> = None;
    let mut write_error: Option<AugmentError> = None;
    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<Vec<String>, BackendError>)>();
        for worker in workers.iter_mut() {
            let tx = tx.clone();
            let (next, stop, batches) = (&next, &stop, &batches);
            scope.spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let b = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(b) else { break };
                    let req = TranslationRequest {
                        sentences: batch.iter().map(|s| s.text.clone()).collect(),
                        direction: key.direction,
                        options: opts.decoding,
                    };
                    let res = worker.translate_batch(&req).map(|r| r.sentences);
                    let failed = res.is_err();
                    if tx.send((b, res)).is_err() || failed {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut ready: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        let mut cursor = start;
        for (b, res) in rx {
            match res {
                Ok(out) => {
                    ready.insert(b, out);
                }
                Err(e) => {
                    stop.store(true, Ordering::SeqCst);
                    if failure.as_ref().is_none_or(|(fb, _)| b < *fb) {
                        failure = Some((b, e));
                    }
                }
            }
            while write_error.is_none() && failure.as_ref().is_none_or(|(fb, _)| cursor < *fb) {
                let Some(out) = ready.remove(&cursor) else { break };
                let batch: Vec<SentencePair> = batches[cursor]
                    .iter()
                    .zip(out)
                    .map(|(s, t)| SentencePair {
                        id: s.id.clone(),
                        source: s.text.clone(),
                        target: normalize(&t),
                        direction: key.direction,
                        origin: Origin::Synthetic {
                            generator: generator.clone(),
                        },
                    })
                    .collect();
                if let Some(ck) = checkpoint.as_mut() {
                    if let Err(e) = ck.append(&batch) {
                        stop.store(true, Ordering::SeqCst);
                        write_error = Some(e);
                        break;
                    }
                }
                pairs.extend(batch);
                cursor += 1;
            }
        }
    });

    if let Some(e) = write_error {
        return Err(e);
    }
    if let Some((batch, source)) = failure {
        tracing::warn!(batch, error = %source, "back-translation stopped");
        return Err(AugmentError::Backend {
            source,
            resume: checkpoint.map(|ck| Box::new(ck.token)),
        });
    }
    if let Some(ck) = checkpoint {
        ck.finish();
    }

    let name = format!("{}.syn", mono.name());
    let mut log = mono.log().to_vec();
    log.push(LogEntry {
        corpus: name.clone(),
        op: "backtranslate".into(),
        detail: format!(
            "generator={generator} source_mono={} sentences={} batch_size={} workers={} beam_size={} max_length={}",
            mono.name(),
            mono.len(),
            opts.batch_size,
            workers.len(),
            opts.decoding.beam_size,
            opts.decoding.max_length
        ),
    });
    let corpus = Corpus::with_meta(CorpusMeta { name, seed: None, log }, pairs)?;
    SyntheticCorpus::new(corpus, generator, mono.name())
}
