//! Child-process predictors speaking line-delimited JSON over stdin/stdout.
//!
//! The child must first print `{"ready": true, "n_features": k}`. Each batch is
//! then one request line `{"id": i, "rows": [[..], ..]}` answered by exactly one
//! line `{"id": i, "predictions": [..]}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::Value;

use super::{check_width, PredictionMode, Predictor};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

pub struct ExternalModel {
    n_features: usize,
    mode: PredictionMode,
    timeout: Duration,
    inner: Mutex<Session>,
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

#[derive(Deserialize)]
struct Handshake {
    ready: bool,
    n_features: usize,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    predictions: Vec<Value>,
}

impl ExternalModel {
    /// Starts `program args...` and waits for its handshake.
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ProcessExited(format!("cannot start '{program}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut session = Session {
            child,
            stdin,
            lines: rx,
            next_id: 0,
        };
        let first = session.read_line(timeout)?;
        let hs: Handshake = serde_json::from_str(&first)
            .map_err(|e| Error::Protocol(format!("bad handshake '{first}': {e}")))?;
        if !hs.ready {
            return Err(Error::Protocol("predictor reported ready = false".into()));
        }
        Ok(Self {
            n_features: hs.n_features,
            mode: PredictionMode::Regression,
            timeout,
            inner: Mutex::new(session),
        })
    }

    pub fn with_mode(mut self, mode: PredictionMode) -> Self {
        self.mode = mode;
        self
    }

    /// One request/response round trip.
    pub fn external_predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_width(rows, self.n_features)?;
        if rows.nrows() == 0 {
            return Ok(Vec::new());
        }
        let mut session = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        let id = session.next_id;
        session.next_id += 1;
        let body: Vec<Vec<f64>> = (0..rows.nrows())
            .map(|r| rows.row(r).iter().copied().collect())
            .collect();
        let request = serde_json::json!({ "id": id, "rows": body });
        writeln!(session.stdin, "{request}")
            .and_then(|_| session.stdin.flush())
            .map_err(|e| Error::ProcessExited(format!("write failed: {e}")))?;
        let line = session.read_line(self.timeout)?;
        let resp: Response =
            serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;
        if resp.id != id {
            return Err(Error::Protocol(format!("response id {} for request {id}", resp.id)));
        }
        if resp.predictions.len() != rows.nrows() {
            return Err(Error::Protocol(format!(
                "expected {} predictions, received {}",
                rows.nrows(),
                resp.predictions.len()
            )));
        }
        resp.predictions
            .iter()
            .enumerate()
            .map(|(k, v)| match v.as_f64() {
                Some(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Protocol(format!("prediction {k} is not a finite number: {v}"))),
            })
            .collect()
    }
}

impl Session {
    fn read_line(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::ProcessExited(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "stdout closed".into());
                Err(Error::ProcessExited(status))
            }
        }
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let session = self.inner.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = session.child.kill();
        let _ = session.child.wait();
    }
}

impl Predictor for ExternalModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn prediction_mode(&self) -> PredictionMode {
        self.mode
    }

    fn predict_batch(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.external_predict(rows)
    }
}
