//! Minimal scripted chat-completion endpoint for exercising the annotation
//! client without a network.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

/// What the endpoint should do with one request.
#[derive(Debug, Clone)]
pub enum MockAction {
    /// Respond 200 with this completion content.
    Reply(String),
    /// Respond with a 500.
    ServerError,
    /// Close the connection without responding (transport failure).
    Hangup,
}

type Handler = dyn Fn(&str, usize) -> MockAction + Send + Sync;

/// Scripted endpoint. The handler receives the prompt text and how many
/// times that exact prompt has been seen before (0 on first sight).
pub struct MockEndpoint {
    pub url: String,
    state: Arc<State>,
}

struct State {
    requests: Mutex<Vec<RecordedRequest>>,
    per_prompt: Mutex<HashMap<String, usize>>,
    handler: Box<Handler>,
}

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub prompt: String,
    pub model: String,
    pub temperature: f64,
}

impl MockEndpoint {
    pub fn start(handler: impl Fn(&str, usize) -> MockAction + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock endpoint");
        let addr = listener.local_addr().unwrap();
        let state = Arc::new(State {
            requests: Mutex::new(Vec::new()),
            per_prompt: Mutex::new(HashMap::new()),
            handler: Box::new(handler),
        });
        let server_state = state.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let state = server_state.clone();
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, &state);
                });
            }
        });
        Self { url: format!("http://{addr}/v1/chat/completions"), state }
    }

    pub fn request_count(&self) -> usize {
        self.state.requests.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.state.requests.lock().unwrap().clone()
    }

    /// How many requests carried a prompt containing `needle`.
    pub fn count_containing(&self, needle: &str) -> usize {
        self.state
            .requests
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.prompt.contains(needle))
            .count()
    }
}

fn handle_connection(mut stream: TcpStream, state: &State) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some(value) = header.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let prompt = json["messages"][0]["content"].as_str().unwrap_or("").to_string();
    let recorded = RecordedRequest {
        prompt: prompt.clone(),
        model: json["model"].as_str().unwrap_or("").to_string(),
        temperature: json["temperature"].as_f64().unwrap_or(f64::NAN),
    };

    let seen_before = {
        let mut per_prompt = state.per_prompt.lock().unwrap();
        let counter = per_prompt.entry(prompt.clone()).or_insert(0);
        let seen = *counter;
        *counter += 1;
        seen
    };
    state.requests.lock().unwrap().push(recorded);

    match (state.handler)(&prompt, seen_before) {
        MockAction::Reply(content) => {
            let payload = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}]
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                payload.len()
            );
            stream.write_all(response.as_bytes())?;
        }
        MockAction::ServerError => {
            let response =
                "HTTP/1.1 500 Internal Server Error\r\ncontent-length: 0\r\nconnection: close\r\n\r\n";
            stream.write_all(response.as_bytes())?;
        }
        MockAction::Hangup => {
            // Drop without writing anything.
        }
    }
    Ok(())
}
