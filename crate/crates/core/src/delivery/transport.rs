use std::sync::atomic::{AtomicBool, Ordering};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::{ChatEnvelope, DeliveryError};

/// Outbound message channel. Implementations must not alter envelope content.
pub trait Transport: Send + Sync {
    fn send(&self, envelope: &ChatEnvelope) -> Result<(), DeliveryError>;
}

/// Records sent envelopes in order; the chat client polls it by cursor.
/// Can be switched offline to exercise retry paths.
#[derive(Debug)]
pub struct LoopbackTransport {
    sent: RwLock<Vec<ChatEnvelope>>,
    available: AtomicBool,
}

impl Default for LoopbackTransport {
    fn default() -> Self {
        LoopbackTransport {
            sent: RwLock::new(Vec::new()),
            available: AtomicBool::new(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutboxPage {
    pub messages: Vec<ChatEnvelope>,
    /// Pass back as `cursor` to receive only newer messages.
    pub next_cursor: usize,
}

impl LoopbackTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_available(&self, up: bool) {
        self.available.store(up, Ordering::SeqCst);
    }

    pub fn sent(&self) -> Vec<ChatEnvelope> {
        self.sent.read().clone()
    }

    pub fn sent_to(&self, phone: &str) -> Vec<ChatEnvelope> {
        self.sent.read().iter().filter(|e| e.user_phone == phone).cloned().collect()
    }

    /// Messages at positions >= `cursor`, optionally for one user. The
    /// cursor indexes the global sequence, so it stays valid under filtering.
    pub fn outbox(&self, cursor: usize, phone: Option<&str>, limit: usize) -> OutboxPage {
        let sent = self.sent.read();
        let mut messages = Vec::new();
        let mut next = cursor.min(sent.len());
        for (i, e) in sent.iter().enumerate().skip(cursor) {
            if messages.len() == limit {
                break;
            }
            next = i + 1;
            if phone.is_none_or(|p| p == e.user_phone) {
                messages.push(e.clone());
            }
        }
        OutboxPage { messages, next_cursor: next }
    }
}

impl Transport for LoopbackTransport {
    fn send(&self, envelope: &ChatEnvelope) -> Result<(), DeliveryError> {
        if !self.available.load(Ordering::SeqCst) {
            return Err(DeliveryError::TransportUnavailable("loopback offline".into()));
        }
        self.sent.write().push(envelope.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_paging() {
        let t = LoopbackTransport::new();
        for (i, p) in ["+1555", "+1666", "+1555"].iter().enumerate() {
            t.send(&ChatEnvelope::outbound_text(p, i as i64, &i.to_string())).unwrap();
        }
        let all = t.outbox(0, None, 100);
        assert_eq!(all.messages.len(), 3);
        assert_eq!(all.next_cursor, 3);
        let mine = t.outbox(0, Some("+1555"), 100);
        assert_eq!(mine.messages.iter().map(|e| e.body.as_str()).collect::<Vec<_>>(), ["0", "2"]);
        let later = t.outbox(3, None, 100);
        assert!(later.messages.is_empty());
        assert_eq!(later.next_cursor, 3);
        let page = t.outbox(0, None, 1);
        assert_eq!(page.next_cursor, 1);
    }

    #[test]
    fn offline_rejects() {
        let t = LoopbackTransport::new();
        t.set_available(false);
        assert!(t.send(&ChatEnvelope::outbound_text("+1", 0, "x")).is_err());
        assert!(t.sent().is_empty());
    }
}
