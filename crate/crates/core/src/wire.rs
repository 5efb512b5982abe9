//! Newline-delimited JSON protocol for external (learned) backends.
//!
//! Every request is one JSON object on one line carrying a `task` name and a
//! numeric `id`; the backend answers with one line carrying the same `id`.
//! Answers may arrive out of order. A response with an `error` field, a
//! timeout, or a broken stream all surface as
//! [`BackendError::Unavailable`].
//!
//! ```text
//! > {"task":"dep_pair","former":["a","b"],"latter":["b"],"id":1}
//! < {"id":1,"y1":0.5,"y2":1.0}
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend input rejected: {0}")]
    InvalidInput(String),
}

/// Connection limits for an external backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WireOptions {
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for WireOptions {
    fn default() -> Self {
        WireOptions {
            timeout_ms: 10_000,
            max_in_flight: 4,
        }
    }
}

type Pending = Arc<Mutex<HashMap<u64, Sender<Value>>>>;

struct Slots {
    used: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

impl Slots {
    fn acquire(&self) {
        let mut used = self.used.lock().unwrap();
        while *used >= self.max {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
    }

    fn release(&self) {
        *self.used.lock().unwrap() -= 1;
        self.freed.notify_one();
    }
}

/// Multiplexing client: concurrent callers share one stream, responses are
/// routed back by `id`.
pub struct WireClient {
    writer: Mutex<Box<dyn Write + Send>>,
    pending: Pending,
    next_id: AtomicU64,
    slots: Slots,
    timeout: Duration,
    child: Mutex<Option<Child>>,
}

impl WireClient {
    /// Speaks the protocol over arbitrary streams.
    pub fn from_streams<R, W>(reader: R, writer: W, opts: &WireOptions) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let pending: Pending = Arc::default();
        let routes = Arc::clone(&pending);
        thread::spawn(move || {
            let reader = BufReader::new(reader);
            for line in reader.lines() {
                let Ok(line) = line else { break };
                let Ok(v) = serde_json::from_str::<Value>(&line) else {
                    tracing::warn!(line = %line, "unparseable backend response");
                    continue;
                };
                let Some(id) = v.get("id").and_then(Value::as_u64) else {
                    continue;
                };
                if let Some(tx) = routes.lock().unwrap().remove(&id) {
                    let _ = tx.send(v);
                }
            }
            // Stream closed: dropping the senders wakes every waiter.
            routes.lock().unwrap().clear();
        });
        WireClient {
            writer: Mutex::new(Box::new(writer)),
            pending,
            next_id: AtomicU64::new(1),
            slots: Slots {
                used: Mutex::new(0),
                freed: Condvar::new(),
                max: opts.max_in_flight.max(1),
            },
            timeout: Duration::from_millis(opts.timeout_ms),
            child: Mutex::new(None),
        }
    }

    /// Spawns `program args...` and talks to it over stdio.
    pub fn spawn(program: &str, args: &[String], opts: &WireOptions) -> Result<Self, BackendError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Unavailable(format!("spawn {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let client = WireClient::from_streams(stdout, stdin, opts);
        *client.child.lock().unwrap() = Some(child);
        Ok(client)
    }

    /// Connects to a backend listening on a local TCP socket.
    pub fn connect_tcp(addr: &str, opts: &WireOptions) -> Result<Self, BackendError> {
        let stream = TcpStream::connect(addr).map_err(|e| BackendError::Unavailable(format!("connect {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(WireClient::from_streams(reader, stream, opts))
    }

    /// Sends one request and waits for its response.
    pub fn call(&self, task: &str, mut payload: Map<String, Value>) -> Result<Value, BackendError> {
        self.slots.acquire();
        let result = self.call_inner(task, &mut payload);
        self.slots.release();
        result
    }

    fn call_inner(&self, task: &str, payload: &mut Map<String, Value>) -> Result<Value, BackendError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        payload.insert("task".into(), json!(task));
        payload.insert("id".into(), json!(id));
        let (tx, rx) = mpsc::channel();
        self.pending.lock().unwrap().insert(id, tx);
        let mut line = serde_json::to_string(payload).expect("json values serialize");
        line.push('\n');
        {
            let mut w = self.writer.lock().unwrap();
            if let Err(e) = w.write_all(line.as_bytes()).and_then(|_| w.flush()) {
                self.pending.lock().unwrap().remove(&id);
                return Err(BackendError::Unavailable(format!("write: {e}")));
            }
        }
        let resp = match rx.recv_timeout(self.timeout) {
            Ok(v) => v,
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.pending.lock().unwrap().remove(&id);
                return Err(BackendError::Unavailable(format!("{task} request {id} timed out")));
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(BackendError::Unavailable("backend stream closed".into()));
            }
        };
        if let Some(err) = resp.get("error") {
            return Err(BackendError::Unavailable(format!("{task}: {err}")));
        }
        Ok(resp)
    }
}

impl Drop for WireClient {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.lock().unwrap().take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Reads a float field of a response, checking it lies in `[0, 1]`.
pub(crate) fn unit_field(v: &Value, key: &str) -> Result<f64, BackendError> {
    let x = v
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| BackendError::Unavailable(format!("response missing {key}")))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(BackendError::Unavailable(format!("{key}={x} outside [0,1]")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    /// Echo server answering `dep_pair` with fixed scores, in reverse order of
    /// arrival for every pair of requests.
    fn serve_once(listener: TcpListener, reverse: bool) {
        thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut out = stream.try_clone().unwrap();
            let mut buf = Vec::new();
            for line in BufReader::new(stream).lines() {
                let v: Value = serde_json::from_str(&line.unwrap()).unwrap();
                let resp = if v["task"] == "dep_pair" {
                    json!({"id": v["id"], "y1": 0.25, "y2": 0.75})
                } else {
                    json!({"id": v["id"], "error": "unsupported"})
                };
                buf.push(resp);
                if !reverse || buf.len() == 2 {
                    for r in buf.drain(..).rev() {
                        writeln!(out, "{r}").unwrap();
                    }
                }
            }
        });
    }

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        serve_once(listener, false);
        let client = WireClient::connect_tcp(&addr, &WireOptions::default()).unwrap();
        let v = client.call("dep_pair", Map::new()).unwrap();
        assert_eq!(unit_field(&v, "y2").unwrap(), 0.75);
        assert!(matches!(
            client.call("bogus", Map::new()),
            Err(BackendError::Unavailable(_))
        ));
    }

    #[test]
    fn out_of_order_responses_are_routed() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        serve_once(listener, true);
        let client = Arc::new(WireClient::connect_tcp(&addr, &WireOptions::default()).unwrap());
        let handles: Vec<_> = (0..2)
            .map(|_| {
                let c = Arc::clone(&client);
                thread::spawn(move || c.call("dep_pair", Map::new()).unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap()["y1"], 0.25);
        }
    }

    #[test]
    fn silent_backend_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let _keep = thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            thread::sleep(Duration::from_millis(500));
            drop(s);
        });
        let opts = WireOptions {
            timeout_ms: 50,
            max_in_flight: 1,
        };
        let client = WireClient::connect_tcp(&addr, &opts).unwrap();
        let err = client.call("dep_pair", Map::new()).unwrap_err();
        assert!(err.to_string().contains("timed out"), "{err}");
    }

    #[test]
    fn missing_program_is_unavailable() {
        assert!(WireClient::spawn("/nonexistent/backend", &[], &WireOptions::default()).is_err());
    }
}
