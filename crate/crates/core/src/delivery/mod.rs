//! Chat envelopes and the outbound side: transports, the media store and the
//! per-user ordered dispatcher.

mod dispatch;
mod media;
mod transport;

use serde::{Deserialize, Serialize};

pub use dispatch::{DispatchReport, Dispatcher};
pub use media::{MediaObject, MediaStore};
pub use transport::{LoopbackTransport, OutboxPage, Transport};

use crate::orchestrator::AgentOutput;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeliveryError {
    #[error("transport unavailable: {0}")]
    TransportUnavailable(String),
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error("media store: {0}")]
    Media(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Inbound,
    Outbound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Text,
    Audio,
    Button,
    Image,
}

/// One chat message in either direction. `body` is text for text/button
/// messages and a media id for audio/image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatEnvelope {
    #[serde(default)]
    pub id: String,
    pub direction: Direction,
    pub user_phone: String,
    pub ts: i64,
    pub kind: MessageKind,
    #[serde(default)]
    pub body: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub buttons: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<String>,
    /// Explanatory text sent with an image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

impl ChatEnvelope {
    pub fn inbound_text(phone: &str, ts: i64, body: &str) -> Self {
        Self::new(Direction::Inbound, phone, ts, MessageKind::Text, body)
    }

    pub fn outbound_text(phone: &str, ts: i64, body: &str) -> Self {
        Self::new(Direction::Outbound, phone, ts, MessageKind::Text, body)
    }

    pub fn new(direction: Direction, phone: &str, ts: i64, kind: MessageKind, body: &str) -> Self {
        ChatEnvelope {
            id: String::new(),
            direction,
            user_phone: phone.to_owned(),
            ts,
            kind,
            body: body.to_owned(),
            buttons: Vec::new(),
            reply_to: None,
            caption: None,
        }
    }

    pub fn validate(&self) -> Result<(), DeliveryError> {
        let bad = |m: &str| Err(DeliveryError::InvalidEnvelope(m.to_owned()));
        if self.user_phone.is_empty() {
            return bad("user_phone is empty");
        }
        match self.kind {
            MessageKind::Audio | MessageKind::Image if self.body.is_empty() => {
                bad("media message without a media reference")
            }
            MessageKind::Button if self.body.is_empty() => bad("button message without a label"),
            _ if self.direction == Direction::Inbound && !self.buttons.is_empty() => {
                bad("inbound messages cannot carry buttons")
            }
            _ => Ok(()),
        }
    }

    /// The text an inbound message contributes to the conversation. Button
    /// presses count as their label verbatim.
    pub fn text(&self) -> Option<&str> {
        match self.kind {
            MessageKind::Text | MessageKind::Button => Some(&self.body),
            _ => None,
        }
    }
}

/// Splits an agent reply into outbound envelopes: one text message per
/// response in order, then the image (if any), with the suggested questions
/// attached as buttons to the final envelope.
pub fn envelopes_for(
    output: &AgentOutput,
    phone: &str,
    ts: i64,
    image: Option<(&str, &str)>,
) -> Vec<ChatEnvelope> {
    let mut out: Vec<ChatEnvelope> = output
        .responses
        .iter()
        .map(|r| ChatEnvelope::outbound_text(phone, ts, r))
        .collect();
    if let Some((media_id, caption)) = image {
        let mut env = ChatEnvelope::new(Direction::Outbound, phone, ts, MessageKind::Image, media_id);
        env.caption = Some(caption.to_owned());
        out.push(env);
    }
    if let Some(last) = out.last_mut() {
        last.buttons = output.questions.clone();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{AgentOutput, Urgency};

    fn output(responses: &[&str], questions: &[&str]) -> AgentOutput {
        AgentOutput {
            personal: serde_json::Value::Bool(false),
            image: None,
            urgency: Urgency::NotUrgent,
            responses: responses.iter().map(|s| s.to_string()).collect(),
            questions: questions.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn responses_become_ordered_texts() {
        let envs = envelopes_for(&output(&["one", "two\nlines", "three"], &[]), "+15550001111", 5, None);
        let bodies: Vec<_> = envs.iter().map(|e| e.body.as_str()).collect();
        assert_eq!(bodies, ["one", "two\nlines", "three"]);
        assert!(envs.iter().all(|e| e.kind == MessageKind::Text && e.buttons.is_empty()));
    }

    #[test]
    fn questions_ride_on_last_envelope() {
        let envs = envelopes_for(&output(&["a", "b"], &["Why?", "Show chart"]), "+15550001111", 5, None);
        assert!(envs[0].buttons.is_empty());
        assert_eq!(envs[1].buttons, ["Why?", "Show chart"]);
    }

    #[test]
    fn image_goes_last_with_caption() {
        let envs = envelopes_for(&output(&["a"], &["q"]), "+15550001111", 5, Some(("abc", "HR today")));
        assert_eq!(envs.len(), 2);
        assert_eq!(envs[1].kind, MessageKind::Image);
        assert_eq!(envs[1].body, "abc");
        assert_eq!(envs[1].caption.as_deref(), Some("HR today"));
        assert_eq!(envs[1].buttons, ["q"]);
    }

    #[test]
    fn envelope_validation() {
        let mut e = ChatEnvelope::new(Direction::Inbound, "+15550001111", 0, MessageKind::Audio, "");
        assert!(e.validate().is_err());
        e.body = "media1".into();
        assert!(e.validate().is_ok());
        let b = ChatEnvelope::new(Direction::Inbound, "+15550001111", 0, MessageKind::Button, "");
        assert!(b.validate().is_err());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let raw = r#"{"direction":"inbound","user_phone":"+1","ts":0,"kind":"video","body":"x"}"#;
        assert!(serde_json::from_str::<ChatEnvelope>(raw).is_err());
    }
}
