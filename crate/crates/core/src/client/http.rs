use std::time::Duration;

use serde_json::{json, Value};

use crate::prompts::{ContentPart, RenderedRequest};

/// Why a single attempt failed at the transport level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout(String),
    Status { code: u16, body: String },
    Network(String),
}

impl TransportFailure {
    /// Timeouts, 429 and 5xx are worth another attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportFailure::Timeout(_) => true,
            TransportFailure::Status { code, .. } => *code == 429 || (500..600).contains(code),
            TransportFailure::Network(_) => false,
        }
    }

    pub fn is_auth(&self) -> bool {
        matches!(self, TransportFailure::Status { code: 401 | 403, .. })
    }
}

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportFailure::Timeout(d) => write!(f, "timeout: {d}"),
            TransportFailure::Status { code, body } => {
                let excerpt: String = body.chars().take(200).collect();
                write!(f, "HTTP {code}: {excerpt}")
            }
            TransportFailure::Network(d) => write!(f, "network error: {d}"),
        }
    }
}

/// Sends one JSON body and returns the raw response body.
pub trait Transport: Send + Sync {
    fn post_json(&self, path: &str, body: &Value) -> Result<String, TransportFailure>;
}

/// Blocking HTTP transport with bearer auth.
pub struct HttpTransport {
    agent: ureq::Agent,
    base_url: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: &str, token: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, base_url: base_url.trim_end_matches('/').to_string(), token }
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, path: &str, body: &Value) -> Result<String, TransportFailure> {
        let url = format!("{}/{}", self.base_url, path.trim_start_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let classify = |e: ureq::Error| match e {
            ureq::Error::Timeout(t) => TransportFailure::Timeout(t.to_string()),
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                TransportFailure::Timeout(io.to_string())
            }
            other => TransportFailure::Network(other.to_string()),
        };
        let payload = serde_json::to_vec(body).expect("JSON value serializes");
        let mut resp = req.header("Content-Type", "application/json").send(&payload[..]).map_err(classify)?;
        let code = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        if (200..300).contains(&code) {
            Ok(text)
        } else {
            Err(TransportFailure::Status { code, body: text })
        }
    }
}

/// Maps rendered requests onto a vendor wire schema.
pub trait WireAdapter: Send + Sync {
    fn path(&self) -> &str;
    fn body(&self, req: &RenderedRequest, model_id: &str) -> Value;
    /// Pulls the model's text out of a response body.
    fn extract_text(&self, body: &str) -> Result<String, String>;
}

/// Generic chat-completions schema: one user message with text and
/// `data:` URL image parts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChatCompletions;

impl WireAdapter for ChatCompletions {
    fn path(&self) -> &str {
        "chat/completions"
    }

    fn body(&self, req: &RenderedRequest, model_id: &str) -> Value {
        let content: Vec<Value> = req
            .parts
            .iter()
            .map(|p| match p {
                ContentPart::Text { text } => json!({"type": "text", "text": text}),
                ContentPart::Image { media_type, data_base64 } => json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:{};base64,{data_base64}", media_type.mime())}
                }),
            })
            .collect();
        let mut body = json!({
            "model": model_id,
            "messages": [{"role": "user", "content": content}],
            "temperature": req.sampling.temperature,
            "max_tokens": req.sampling.max_output_tokens,
        });
        if let Some(seed) = req.sampling.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn extract_text(&self, body: &str) -> Result<String, String> {
        let v: Value = serde_json::from_str(body).map_err(|e| format!("reply is not JSON: {e}"))?;
        let content = v
            .pointer("/choices/0/message/content")
            .ok_or_else(|| "reply has no choices[0].message.content".to_string())?;
        match content {
            Value::String(s) => Ok(s.clone()),
            Value::Array(parts) => {
                let texts: Vec<&str> = parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect();
                if texts.is_empty() {
                    Err("reply content has no text parts".into())
                } else {
                    Ok(texts.concat())
                }
            }
            _ => Err("reply content is neither a string nor a part list".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MediaType, Protocol};
    use crate::prompts::SamplingConfig;

    fn request(seed: Option<u64>) -> RenderedRequest {
        RenderedRequest {
            protocol: Protocol::Diagnostic,
            prompt_digest: "d".into(),
            parts: vec![
                ContentPart::Text { text: "prompt".into() },
                ContentPart::Image { media_type: MediaType::Jpeg, data_base64: "QUJD".into() },
            ],
            sampling: SamplingConfig { seed, ..SamplingConfig::default() },
        }
    }

    #[test]
    fn chat_body_shape() {
        let body = ChatCompletions.body(&request(None), "m-1");
        assert_eq!(body["model"], "m-1");
        assert_eq!(body["temperature"], 0.1);
        assert_eq!(body["max_tokens"], 4096);
        assert!(body.get("seed").is_none());
        let content = &body["messages"][0]["content"];
        assert_eq!(content[0]["text"], "prompt");
        assert_eq!(content[1]["image_url"]["url"], "data:image/jpeg;base64,QUJD");
        assert_eq!(ChatCompletions.body(&request(Some(9)), "m")["seed"], 9);
    }

    #[test]
    fn reply_extraction_keeps_bytes() {
        let text = ChatCompletions
            .extract_text(r#"{"choices":[{"message":{"content":"  spaced \n"}}]}"#)
            .unwrap();
        assert_eq!(text, "  spaced \n");
        let parts = ChatCompletions
            .extract_text(r#"{"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]}"#)
            .unwrap();
        assert_eq!(parts, "ab");
        assert!(ChatCompletions.extract_text("{}").is_err());
        assert!(ChatCompletions.extract_text("<html>").is_err());
    }

    #[test]
    fn failure_classes() {
        assert!(TransportFailure::Status { code: 429, body: String::new() }.is_transient());
        assert!(TransportFailure::Status { code: 503, body: String::new() }.is_transient());
        assert!(!TransportFailure::Status { code: 400, body: String::new() }.is_transient());
        assert!(TransportFailure::Status { code: 401, body: String::new() }.is_auth());
        assert!(TransportFailure::Timeout("t".into()).is_transient());
    }
}
