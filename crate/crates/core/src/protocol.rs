//! Line-delimited JSON protocol for base classifiers running in a child
//! process.
//!
//! ```text
//! engine -> child  {"type":"hello","n":N,"labels":L}
//! child  -> engine {"type":"ready"}
//! engine -> child  {"type":"classify","id":7,"base":"0110…","flips":[3,9]}
//! child  -> engine {"type":"label","id":7,"label":1}
//! engine -> child  {"type":"bye"}
//! ```
//!
//! `base`, when present, replaces the child's cached vector; the vector to
//! classify is the cached vector with the listed bit positions flipped.
//! Responses may arrive in any order and are matched by `id`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitVector, Label, StructureVector};
use crate::error::Result;
use crate::smoothing::BaseClassifier;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello {
        n: usize,
        labels: usize,
    },
    Ready,
    Classify {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<String>,
        #[serde(default)]
        flips: Vec<usize>,
    },
    Label {
        id: u64,
        label: u32,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        msg: String,
    },
    Bye,
}

impl Message {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }

    pub fn parse(line: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("failed to start classifier `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("classifier pipe error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed response {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("response id {got} does not match any pending request")]
    IdMismatch { got: u64 },
    #[error("no response within {timeout:?} (last acknowledged id: {last_ack:?})")]
    Timeout { timeout: Duration, last_ack: Option<u64> },
    #[error("classifier exited ({status:?}) with requests pending (last acknowledged id: {last_ack:?})")]
    ChildExited { status: Option<ExitStatus>, last_ack: Option<u64> },
    #[error("classifier reported an error for request {id:?}: {msg}")]
    Remote { id: Option<u64>, msg: String },
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("classifier returned label {label} but only {labels} labels exist")]
    LabelOutOfRange { label: u32, labels: usize },
}

enum ReaderEvent {
    Line(String),
    Closed,
    Failed(std::io::Error),
}

struct Session {
    child: Child,
    /// `None` once closed, which signals end of input to the child.
    stdin: Option<BufWriter<ChildStdin>>,
    rx: Receiver<ReaderEvent>,
    next_id: u64,
    last_ack: Option<u64>,
    cached_base: Option<BitVector>,
    reference: Option<BitVector>,
    closed: bool,
}

impl Session {
    fn send(&mut self, msg: &Message) -> std::result::Result<(), ProtocolError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| std::io::Error::from(std::io::ErrorKind::BrokenPipe))?;
        writeln!(stdin, "{}", msg.to_line())?;
        Ok(())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self.stdin.as_mut() {
            Some(w) => w.flush(),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        }
    }

    /// Sends `bye` and closes the child's input.
    fn close(&mut self) {
        if self.stdin.is_some() {
            let _ = self.send(&Message::Bye);
            let _ = self.flush();
        }
        self.stdin = None;
        self.closed = true;
    }

    fn exited(&mut self) -> ProtocolError {
        self.closed = true;
        self.stdin = None;
        let status = self.child.wait().ok();
        ProtocolError::ChildExited { status, last_ack: self.last_ack }
    }

    fn recv(&mut self, timeout: Duration) -> std::result::Result<Message, ProtocolError> {
        loop {
            match self.rx.recv_timeout(timeout) {
                Ok(ReaderEvent::Line(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Message::parse(&line).map_err(|e| ProtocolError::Malformed {
                        line,
                        reason: e.to_string(),
                    });
                }
                Ok(ReaderEvent::Failed(e)) => return Err(ProtocolError::Io(e)),
                Ok(ReaderEvent::Closed) | Err(RecvTimeoutError::Disconnected) => return Err(self.exited()),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(ProtocolError::Timeout { timeout, last_ack: self.last_ack })
                }
            }
        }
    }
}

/// Number of characters a JSON list of these indices takes.
fn flips_cost(indices: &[usize]) -> usize {
    indices.iter().map(|i| i.checked_ilog10().unwrap_or(0) as usize + 2).sum()
}

/// A [`BaseClassifier`] served by a child process over the line protocol.
pub struct ProtocolClassifier {
    n: usize,
    labels: usize,
    timeout: Duration,
    session: Mutex<Session>,
}

impl ProtocolClassifier {
    /// Starts `command` through the shell and performs the handshake.
    pub fn spawn(command: &str, n: usize, labels: usize, timeout: Duration) -> std::result::Result<Self, ProtocolError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ProtocolError::Spawn { command: command.to_string(), source })?;
        let stdin = Some(BufWriter::new(child.stdin.take().expect("piped stdin")));
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let event = match line {
                    Ok(l) => ReaderEvent::Line(l),
                    Err(e) => {
                        let _ = tx.send(ReaderEvent::Failed(e));
                        return;
                    }
                };
                if tx.send(event).is_err() {
                    return;
                }
            }
            let _ = tx.send(ReaderEvent::Closed);
        });
        let mut session = Session {
            child,
            stdin,
            rx,
            next_id: 0,
            last_ack: None,
            cached_base: None,
            reference: None,
            closed: false,
        };
        session.send(&Message::Hello { n, labels })?;
        session.flush()?;
        match session.recv(timeout) {
            Ok(Message::Ready) => {}
            Ok(other) => return Err(ProtocolError::Handshake(format!("expected ready, got {other:?}"))),
            Err(e) => return Err(ProtocolError::Handshake(e.to_string())),
        }
        Ok(Self { n, labels, timeout, session: Mutex::new(session) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Classifies a batch given as flip masks relative to the current reference.
    pub fn classify_vectors(&self, batch: &[BitVector]) -> std::result::Result<Vec<Label>, ProtocolError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if session.closed {
            return Err(ProtocolError::ChildExited { status: None, last_ack: session.last_ack });
        }
        let mut pending: HashMap<u64, usize> = HashMap::with_capacity(batch.len());
        for (pos, v) in batch.iter().enumerate() {
            if v.len() != self.n {
                return Err(ProtocolError::Malformed {
                    line: String::new(),
                    reason: format!("vector of length {} sent to a session of dimension {}", v.len(), self.n),
                });
            }
            let id = session.next_id;
            session.next_id += 1;
            let msg = encode(&mut session, id, v);
            session.send(&msg)?;
            pending.insert(id, pos);
        }
        if let Err(e) = session.flush() {
            return Err(match e.kind() {
                std::io::ErrorKind::BrokenPipe => session.exited(),
                _ => ProtocolError::Io(e),
            });
        }

        let mut out = vec![Label(0); batch.len()];
        while !pending.is_empty() {
            match session.recv(self.timeout)? {
                Message::Label { id, label } => {
                    let pos = pending.remove(&id).ok_or(ProtocolError::IdMismatch { got: id })?;
                    if label as usize >= self.labels {
                        return Err(ProtocolError::LabelOutOfRange { label, labels: self.labels });
                    }
                    out[pos] = Label(label);
                    session.last_ack = Some(id);
                }
                Message::Error { id, msg } => return Err(ProtocolError::Remote { id, msg }),
                other => {
                    return Err(ProtocolError::Malformed {
                        line: other.to_line(),
                        reason: "expected a label record".into(),
                    })
                }
            }
        }
        Ok(out)
    }

    /// Sends `bye` and waits for the child.
    pub fn shutdown(&self) -> std::result::Result<Option<ExitStatus>, ProtocolError> {
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if session.closed {
            return Ok(None);
        }
        session.close();
        Ok(Some(session.child.wait()?))
    }

    /// Kills the child without a goodbye.
    pub fn kill(&self) -> std::io::Result<()> {
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        session.stdin = None;
        session.closed = true;
        session.child.kill()?;
        session.child.wait().map(|_| ())
    }
}

/// Chooses between a flip list against the reference and a full vector,
/// whichever is shorter on the wire.
fn encode(session: &mut Session, id: u64, v: &BitVector) -> Message {
    if let Some(reference) = session.reference.clone() {
        let flips: Vec<usize> = reference.xor(v).expect("dimension checked").ones().collect();
        if flips_cost(&flips) < v.len() {
            let base = if session.cached_base.as_ref() == Some(&reference) {
                None
            } else {
                session.cached_base = Some(reference.clone());
                Some(reference.to_string())
            };
            return Message::Classify { id, base, flips };
        }
    }
    if session.cached_base.as_ref() == Some(v) {
        return Message::Classify { id, base: None, flips: Vec::new() };
    }
    session.cached_base = Some(v.clone());
    Message::Classify { id, base: Some(v.to_string()), flips: Vec::new() }
}

impl BaseClassifier for ProtocolClassifier {
    fn num_labels(&self) -> usize {
        self.labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        let bits: Vec<BitVector> = batch.iter().map(|s| s.bits().clone()).collect();
        Ok(self.classify_vectors(&bits)?)
    }

    fn set_reference(&self, s: &StructureVector) -> Result<()> {
        let mut session = self.session.lock().unwrap_or_else(|p| p.into_inner());
        session.reference = Some(s.bits().clone());
        Ok(())
    }

    fn parallel(&self) -> bool {
        false
    }
}

impl Drop for ProtocolClassifier {
    fn drop(&mut self) {
        let session = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        if !session.closed {
            session.close();
            for _ in 0..50 {
                if let Ok(Some(_)) = session.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = session.child.kill();
            let _ = session.child.wait();
        }
    }
}

/// Child side of the protocol: answers requests with `classify` until `bye`
/// or end of input. Malformed or out-of-order requests get an error record
/// and the loop continues.
pub fn serve<R, W, F>(input: R, mut output: W, mut classify: F) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&BitVector, usize) -> u32,
{
    let mut session: Option<(usize, usize)> = None;
    let mut base: Option<BitVector> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::parse(&line) {
            Err(e) => Some(Message::Error { id: None, msg: format!("malformed request: {e}") }),
            Ok(Message::Hello { n, labels }) => {
                session = Some((n, labels));
                base = None;
                Some(Message::Ready)
            }
            Ok(Message::Bye) => break,
            Ok(Message::Classify { id, base: new_base, flips }) => {
                match (session, serve_one(session, &mut base, new_base, &flips)) {
                    (Some((_, labels)), Ok(v)) => Some(Message::Label { id, label: classify(&v, labels) }),
                    (_, Err(msg)) => Some(Message::Error { id: Some(id), msg }),
                    (None, Ok(_)) => unreachable!("serve_one rejects requests before hello"),
                }
            }
            Ok(other) => Some(Message::Error { id: None, msg: format!("unexpected message {other:?}") }),
        };
        if let Some(reply) = reply {
            writeln!(output, "{}", reply.to_line())?;
            output.flush()?;
        }
    }
    Ok(())
}

fn serve_one(
    session: Option<(usize, usize)>,
    base: &mut Option<BitVector>,
    new_base: Option<String>,
    flips: &[usize],
) -> std::result::Result<BitVector, String> {
    let (n, _) = session.ok_or_else(|| "classify before hello".to_string())?;
    if let Some(b) = new_base {
        let parsed: BitVector = b.parse().map_err(|e| format!("bad base: {e}"))?;
        if parsed.len() != n {
            return Err(format!("base has length {}, expected {n}", parsed.len()));
        }
        *base = Some(parsed);
    }
    let mut v = base.clone().ok_or_else(|| "no base vector cached".to_string())?;
    for &i in flips {
        if i >= n {
            return Err(format!("flip index {i} out of range"));
        }
        let cur = v.get(i);
        v.set(i, !cur);
    }
    Ok(v)
}
