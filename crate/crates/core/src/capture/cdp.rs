//! Live capture driver speaking the DevTools wire protocol over a
//! WebSocket to a headless browser.
//!
//! Each page load opens its own connection and browser target, so page
//! sessions share no state. The load window is a hard wall: when it
//! expires, whatever traffic was observed is kept and the result is marked
//! `Timeout`. Teardown (title read, cookie snapshot, target close) runs
//! under a fixed grace budget on top of the wall.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use serde_json::{json, Value};
use thiserror::Error;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};
use url::Url;

use super::{CaptureDriver, CookieRecord, LoadOptions, LoadStatus, PageLoadResult, RequestRecord};
use crate::seed::SeedUrl;

const TEARDOWN_GRACE: Duration = Duration::from_secs(5);
const POLL_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Error)]
pub enum CdpError {
    #[error("endpoint discovery failed: {0}")]
    Discovery(String),
    #[error("websocket error: {0}")]
    WebSocket(#[from] Box<tungstenite::Error>),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("deadline exceeded waiting for `{0}`")]
    Deadline(String),
}

/// Handle to a running browser. `endpoint` is either the devtools HTTP
/// address (`http://127.0.0.1:9222`, resolved via `/json/version`) or a
/// direct `ws://` debugger URL.
pub struct CdpDriver {
    ws_url: String,
}

impl CdpDriver {
    pub fn connect(endpoint: &str) -> Result<CdpDriver, CdpError> {
        let ws_url = if endpoint.starts_with("ws://") || endpoint.starts_with("wss://") {
            // Probe so a dead endpoint fails the run before any page starts.
            let (socket, _) = tungstenite::connect(endpoint).map_err(Box::new)?;
            drop(socket);
            endpoint.to_string()
        } else {
            discover_ws_url(endpoint)?
        };
        Ok(CdpDriver { ws_url })
    }

    fn try_load(&self, seed: &SeedUrl, options: &LoadOptions) -> Result<PageLoadResult, CdpError> {
        let captured_at = Utc::now();
        let deadline = Instant::now() + options.timeout;
        let mut session = CdpSession::connect(&self.ws_url)?;

        let target_id = session
            .command("Target.createTarget", json!({"url": "about:blank"}), None, deadline)?
            .get("targetId")
            .and_then(Value::as_str)
            .ok_or_else(|| CdpError::Protocol("createTarget returned no targetId".into()))?
            .to_string();
        let session_id = session
            .command(
                "Target.attachToTarget",
                json!({"targetId": target_id, "flatten": true}),
                None,
                deadline,
            )?
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| CdpError::Protocol("attachToTarget returned no sessionId".into()))?
            .to_string();
        let sid = Some(session_id.as_str());

        session.command("Network.enable", json!({}), sid, deadline)?;
        session.command("Page.enable", json!({}), sid, deadline)?;
        // Best-effort knobs: an endpoint that lacks them should not sink the load.
        let _ = session.command(
            "Network.setUserAgentOverride",
            json!({"userAgent": options.user_agent}),
            sid,
            deadline,
        );
        if options.dnt {
            let _ = session.command(
                "Network.setExtraHTTPHeaders",
                json!({"headers": {"DNT": "1"}}),
                sid,
                deadline,
            );
        }

        let mut capture = PageCapture::new(seed.normalized.clone());
        let navigate = session.command_capturing(
            "Page.navigate",
            json!({"url": seed.normalized}),
            sid,
            deadline,
            &mut capture,
        )?;
        let navigate_error = navigate
            .get("errorText")
            .and_then(Value::as_str)
            .filter(|e| !e.is_empty())
            .map(str::to_string);

        let timed_out = if navigate_error.is_none() {
            session.pump_until_load(&mut capture, deadline)
        } else {
            false
        };

        // Teardown under grace: partial captures still get their title,
        // cookie snapshot, and a closed target.
        let grace = Instant::now() + TEARDOWN_GRACE;
        let title = session
            .evaluate_string("document.title", sid, grace, &mut capture)
            .unwrap_or_default();
        let meta_description = session
            .evaluate_string(META_DESCRIPTION_JS, sid, grace, &mut capture)
            .unwrap_or_default();
        let cookies = session.read_cookies(sid, grace, &mut capture).unwrap_or_default();
        let _ = session.command("Target.closeTarget", json!({"targetId": target_id}), None, grace);

        let load_status = if navigate_error.is_some() {
            LoadStatus::Failed
        } else if timed_out {
            LoadStatus::Timeout
        } else {
            LoadStatus::Ok
        };
        Ok(PageLoadResult {
            seed: seed.clone(),
            final_url: capture.final_url,
            title,
            meta_description,
            requests: capture.requests,
            cookies,
            load_status,
            captured_at,
            diagnostic: navigate_error,
        })
    }
}

const META_DESCRIPTION_JS: &str =
    r##"(document.querySelector("meta[name='description']")||{}).content||"""##;

impl CaptureDriver for CdpDriver {
    /// Never panics and never aborts a corpus: any protocol or transport
    /// error becomes a `Failed` result with the error as diagnostic.
    fn load_page(&self, seed: &SeedUrl, options: &LoadOptions) -> PageLoadResult {
        match self.try_load(seed, options) {
            Ok(result) => result,
            Err(e) => PageLoadResult::failed(seed.clone(), Utc::now(), e.to_string()),
        }
    }
}

/// Fetch `/json/version` from the devtools HTTP endpoint and pull out the
/// browser-level webSocketDebuggerUrl.
fn discover_ws_url(endpoint: &str) -> Result<String, CdpError> {
    let parsed =
        Url::parse(endpoint).map_err(|e| CdpError::Discovery(format!("bad endpoint: {e}")))?;
    let host = parsed
        .host_str()
        .ok_or_else(|| CdpError::Discovery("endpoint has no host".into()))?;
    let port = parsed.port_or_known_default().unwrap_or(9222);

    let mut stream = TcpStream::connect((host, port))
        .map_err(|e| CdpError::Discovery(format!("connect {host}:{port}: {e}")))?;
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .map_err(|e| CdpError::Discovery(e.to_string()))?;
    let request = format!(
        "GET /json/version HTTP/1.1\r\nHost: {host}:{port}\r\nConnection: close\r\n\r\n"
    );
    stream
        .write_all(request.as_bytes())
        .map_err(|e| CdpError::Discovery(e.to_string()))?;
    let mut response = Vec::new();
    let _ = stream.read_to_end(&mut response);
    let text = String::from_utf8_lossy(&response);
    let body = text
        .split_once("\r\n\r\n")
        .map(|(_, b)| b)
        .ok_or_else(|| CdpError::Discovery("malformed HTTP response".into()))?;
    let parsed: Value = serde_json::from_str(body.trim())
        .map_err(|e| CdpError::Discovery(format!("bad /json/version body: {e}")))?;
    parsed
        .get("webSocketDebuggerUrl")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CdpError::Discovery("no webSocketDebuggerUrl in /json/version".into()))
}

/// Network traffic observed for one page.
struct PageCapture {
    requests: Vec<RequestRecord>,
    by_request_id: std::collections::HashMap<String, usize>,
    final_url: String,
    load_fired: bool,
}

impl PageCapture {
    fn new(initial_url: String) -> Self {
        PageCapture {
            requests: Vec::new(),
            by_request_id: std::collections::HashMap::new(),
            final_url: initial_url,
            load_fired: false,
        }
    }

    fn on_event(&mut self, method: &str, params: &Value) {
        match method {
            "Network.requestWillBeSent" => {
                let url = params["request"]["url"].as_str().unwrap_or_default();
                if url.is_empty() || url.starts_with("data:") {
                    return;
                }
                let request_id = params["requestId"].as_str().unwrap_or_default().to_string();
                // A repeated requestId with redirectResponse is the next hop
                // of a redirect; close out the prior hop first.
                if let Some(redirect) = params.get("redirectResponse") {
                    if let Some(&prev) = self.by_request_id.get(&request_id) {
                        let rec = &mut self.requests[prev];
                        rec.received = true;
                        rec.response_status = redirect["status"].as_i64().map(|s| s as u16);
                    }
                }
                let at = params["wallTime"]
                    .as_f64()
                    .and_then(wall_to_utc)
                    .unwrap_or_else(Utc::now);
                let method_s = params["request"]["method"].as_str().unwrap_or("GET");
                self.requests.push(RequestRecord::unanswered(
                    url.to_string(),
                    method_s.to_string(),
                    at,
                ));
                if !request_id.is_empty() {
                    self.by_request_id.insert(request_id, self.requests.len() - 1);
                }
            }
            "Network.responseReceived" => {
                let request_id = params["requestId"].as_str().unwrap_or_default();
                if let Some(&i) = self.by_request_id.get(request_id) {
                    let rec = &mut self.requests[i];
                    rec.received = true;
                    rec.response_status = params["response"]["status"].as_i64().map(|s| s as u16);
                    rec.content_type = params["response"]["mimeType"]
                        .as_str()
                        .filter(|m| !m.is_empty())
                        .map(str::to_string);
                }
            }
            "Page.frameNavigated" => {
                let frame = &params["frame"];
                if frame.get("parentId").is_none() {
                    if let Some(u) = frame["url"].as_str() {
                        if !u.is_empty() && u != "about:blank" {
                            self.final_url = u.to_string();
                        }
                    }
                }
            }
            "Page.loadEventFired" => self.load_fired = true,
            _ => {}
        }
    }
}

fn wall_to_utc(seconds: f64) -> Option<DateTime<Utc>> {
    if !seconds.is_finite() || seconds <= 0.0 {
        return None;
    }
    Utc.timestamp_opt(seconds.trunc() as i64, (seconds.fract() * 1e9) as u32)
        .single()
}

struct CdpSession {
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
    next_id: u64,
}

impl CdpSession {
    fn connect(ws_url: &str) -> Result<Self, CdpError> {
        let (socket, _) = tungstenite::connect(ws_url).map_err(Box::new)?;
        if let MaybeTlsStream::Plain(stream) = socket.get_ref() {
            let _ = stream.set_read_timeout(Some(POLL_INTERVAL));
        }
        Ok(CdpSession { socket, next_id: 0 })
    }

    fn command(
        &mut self,
        method: &str,
        params: Value,
        session_id: Option<&str>,
        until: Instant,
    ) -> Result<Value, CdpError> {
        let mut sink = PageCapture::new(String::new());
        self.command_capturing(method, params, session_id, until, &mut sink)
    }

    /// Send one command and wait for its response, feeding any events that
    /// arrive in between into `capture`.
    fn command_capturing(
        &mut self,
        method: &str,
        params: Value,
        session_id: Option<&str>,
        until: Instant,
        capture: &mut PageCapture,
    ) -> Result<Value, CdpError> {
        self.next_id += 1;
        let id = self.next_id;
        let mut message = json!({"id": id, "method": method, "params": params});
        if let Some(sid) = session_id {
            message["sessionId"] = Value::String(sid.to_string());
        }
        self.socket
            .send(Message::Text(message.to_string()))
            .map_err(Box::new)?;

        loop {
            if Instant::now() > until {
                return Err(CdpError::Deadline(method.to_string()));
            }
            let Some(value) = self.poll(capture)? else {
                continue;
            };
            if value.get("id").and_then(Value::as_u64) == Some(id) {
                if let Some(err) = value.get("error") {
                    return Err(CdpError::Protocol(format!("{method}: {err}")));
                }
                return Ok(value.get("result").cloned().unwrap_or(Value::Null));
            }
        }
    }

    /// Read one message if available within the poll interval. Events are
    /// dispatched to `capture`; command responses are returned.
    fn poll(&mut self, capture: &mut PageCapture) -> Result<Option<Value>, CdpError> {
        match self.socket.read() {
            Ok(Message::Text(text)) => {
                let value: Value = match serde_json::from_str(&text) {
                    Ok(v) => v,
                    Err(_) => return Ok(None),
                };
                if let Some(method) = value.get("method").and_then(Value::as_str) {
                    capture.on_event(method, value.get("params").unwrap_or(&Value::Null));
                    return Ok(None);
                }
                Ok(Some(value))
            }
            Ok(Message::Close(_)) => Err(CdpError::Protocol("endpoint closed connection".into())),
            Ok(_) => Ok(None),
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                ) =>
            {
                Ok(None)
            }
            Err(e) => Err(CdpError::WebSocket(Box::new(e))),
        }
    }

    /// Collect events until the load event fires or the wall expires.
    /// Returns true when the window timed out.
    fn pump_until_load(&mut self, capture: &mut PageCapture, deadline: Instant) -> bool {
        while !capture.load_fired {
            if Instant::now() > deadline {
                return true;
            }
            match self.poll(capture) {
                Ok(_) => {}
                Err(_) => return false, // transport gone; keep what we have
            }
        }
        false
    }

    fn evaluate_string(
        &mut self,
        expression: &str,
        session_id: Option<&str>,
        until: Instant,
        capture: &mut PageCapture,
    ) -> Option<String> {
        let result = self
            .command_capturing(
                "Runtime.evaluate",
                json!({"expression": expression, "returnByValue": true}),
                session_id,
                until,
                capture,
            )
            .ok()?;
        result
            .get("result")
            .and_then(|r| r.get("value"))
            .and_then(Value::as_str)
            .map(str::to_string)
    }

    fn read_cookies(
        &mut self,
        session_id: Option<&str>,
        until: Instant,
        capture: &mut PageCapture,
    ) -> Option<Vec<CookieRecord>> {
        let result = self
            .command_capturing("Network.getCookies", json!({}), session_id, until, capture)
            .ok()?;
        let cookies = result.get("cookies")?.as_array()?;
        Some(
            cookies
                .iter()
                .filter_map(|c| {
                    let name = c["name"].as_str()?.to_string();
                    if name.is_empty() {
                        return None;
                    }
                    let domain = c["domain"]
                        .as_str()?
                        .trim_start_matches('.')
                        .to_lowercase();
                    if domain.is_empty() {
                        return None;
                    }
                    let expiry = c["expires"]
                        .as_f64()
                        .filter(|e| *e > 0.0)
                        .and_then(wall_to_utc);
                    Some(CookieRecord {
                        name,
                        value: c["value"].as_str().unwrap_or_default().to_string(),
                        domain,
                        path: c["path"].as_str().unwrap_or("/").to_string(),
                        expiry,
                        secure: c["secure"].as_bool().unwrap_or(false),
                        http_only: c["httpOnly"].as_bool().unwrap_or(false),
                    })
                })
                .collect(),
        )
    }
}
