//! Line-oriented JSON exchange with external processes and services.
//!
//! Neural translation backends and embedding-based scorers run outside this
//! toolkit. Both speak the same transport: a batch of JSONL request records
//! goes in, a batch of JSONL response records comes out. Every record carries
//! `schema_version`.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("failed to run `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{program}` exited with {status}: {stderr}")]
    Exit { program: String, status: String, stderr: String },
    #[error("request to {url} failed: {message}")]
    Http { url: String, message: String },
    #[error("bad response record {index}: {message}")]
    Protocol { index: usize, message: String },
    #[error("schema version {found} not supported (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "lowercase", deny_unknown_fields)]
pub enum Transport {
    /// One process per batch: requests on stdin, responses on stdout.
    Command { program: String, #[serde(default)] args: Vec<String> },
    /// One POST per batch with an `application/x-ndjson` body.
    Http { url: String },
}

impl Transport {
    pub fn describe(&self) -> String {
        match self {
            Transport::Command { program, .. } => program.clone(),
            Transport::Http { url } => url.clone(),
        }
    }

    /// Sends request lines and returns the non-empty response lines.
    pub fn exchange(&self, lines: &[String]) -> Result<Vec<String>, AdapterError> {
        let mut body = String::new();
        for l in lines {
            body.push_str(l);
            body.push('\n');
        }
        let out = match self {
            Transport::Command { program, args } => run_command(program, args, body)?,
            Transport::Http { url } => post(url, body)?,
        };
        Ok(out.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
    }

    /// Serializes `requests`, exchanges them and parses the responses.
    pub fn call<Req: Serialize, Resp: DeserializeOwned + Versioned>(&self, requests: &[Req]) -> Result<Vec<Resp>, AdapterError> {
        let lines: Vec<String> = requests
            .iter()
            .map(|r| serde_json::to_string(r).expect("request serializes"))
            .collect();
        self.exchange(&lines)?
            .iter()
            .enumerate()
            .map(|(index, line)| {
                let resp: Resp = serde_json::from_str(line).map_err(|e| AdapterError::Protocol {
                    index,
                    message: e.to_string(),
                })?;
                match resp.schema_version() {
                    SCHEMA_VERSION => Ok(resp),
                    found => Err(AdapterError::Schema { found }),
                }
            })
            .collect()
    }
}

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

fn run_command(program: &str, args: &[String], input: String) -> Result<String, AdapterError> {
    let spawn_err = |source| AdapterError::Spawn {
        program: program.to_string(),
        source,
    };
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(spawn_err)?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    // Feed stdin from a separate thread so a chatty child cannot deadlock us.
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let mut stdout = String::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_string(&mut stdout)
        .map_err(spawn_err)?;
    let output = child.wait_with_output().map_err(spawn_err)?;
    // A child that exits without reading all input is reported via its status.
    let _ = writer.join();
    if !output.status.success() {
        return Err(AdapterError::Exit {
            program: program.to_string(),
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(stdout)
}

fn post(url: &str, body: String) -> Result<String, AdapterError> {
    let err = |message: String| AdapterError::Http {
        url: url.to_string(),
        message,
    };
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(300)).build();
    let resp = agent
        .post(url)
        .set("Content-Type", "application/x-ndjson")
        .send_string(&body)
        .map_err(|e| err(e.to_string()))?;
    resp.into_string().map_err(|e| err(e.to_string()))
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves a single HTTP request, answering with `respond(body)`.
    pub fn one_shot_server(respond: impl FnOnce(String) -> String + Send + 'static) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let reply = respond(String::from_utf8(body).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/x-ndjson\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
        });
        format!("http://{addr}/")
    }
}
