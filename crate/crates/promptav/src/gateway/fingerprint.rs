//! Stable request fingerprints.
//!
//! The fingerprint keys both the response cache and cassette records, so it
//! must not change across runs, platforms, or refactors: it is the SHA-256 of
//! a canonical JSON form with a fixed field order.

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ChatRequest, Role};

#[derive(Serialize)]
struct CanonicalRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<CanonicalMessage<'a>>,
}

#[derive(Serialize)]
struct CanonicalMessage<'a> {
    role: &'static str,
    content: &'a str,
}

impl Role {
    pub(crate) fn wire_name(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// Hex SHA-256 over the request's canonical JSON form.
pub fn fingerprint(request: &ChatRequest) -> String {
    let canonical = CanonicalRequest {
        model: &request.model_id,
        temperature: request.temperature,
        messages: request
            .messages
            .iter()
            .map(|m| CanonicalMessage {
                role: m.role.wire_name(),
                content: &m.content,
            })
            .collect(),
    };
    let json = serde_json::to_string(&canonical).expect("canonical form serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(out, "{byte:02x}").expect("writing to String cannot fail");
    }
    out
}
