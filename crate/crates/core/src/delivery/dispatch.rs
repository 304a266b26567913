use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;

use super::{ChatEnvelope, DeliveryError, Transport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DispatchReport {
    pub sent: usize,
    /// Still waiting for the transport, in order.
    pub queued: usize,
}

type Queue = Arc<Mutex<VecDeque<ChatEnvelope>>>;

/// Sends envelopes in order per user. When the transport fails, the failed
/// envelope and everything after it for that user wait in a queue; later
/// dispatches for the user go behind them, so ordering never breaks.
pub struct Dispatcher {
    transport: Arc<dyn Transport>,
    queues: Mutex<HashMap<String, Queue>>,
}

impl Dispatcher {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Dispatcher {
            transport,
            queues: Mutex::new(HashMap::new()),
        }
    }

    fn queue(&self, phone: &str) -> Queue {
        self.queues.lock().entry(phone.to_owned()).or_default().clone()
    }

    /// Assigns ids to envelopes lacking one and sends them. Envelopes for
    /// different users may be mixed; each user's subsequence keeps its order.
    pub fn dispatch(&self, envelopes: Vec<ChatEnvelope>) -> Result<DispatchReport, DeliveryError> {
        let mut by_user: Vec<(String, Vec<ChatEnvelope>)> = Vec::new();
        for mut env in envelopes {
            env.validate()?;
            if env.id.is_empty() {
                env.id = uuid::Uuid::new_v4().simple().to_string();
            }
            match by_user.iter_mut().find(|(p, _)| *p == env.user_phone) {
                Some((_, list)) => list.push(env),
                None => by_user.push((env.user_phone.clone(), vec![env])),
            }
        }
        let mut report = DispatchReport::default();
        for (phone, list) in by_user {
            let queue = self.queue(&phone);
            let mut q = queue.lock();
            q.extend(list);
            let (sent, left) = self.flush(&mut q);
            report.sent += sent;
            report.queued += left;
        }
        Ok(report)
    }

    fn flush(&self, q: &mut VecDeque<ChatEnvelope>) -> (usize, usize) {
        let mut sent = 0;
        while let Some(front) = q.front() {
            if self.transport.send(front).is_err() {
                break;
            }
            q.pop_front();
            sent += 1;
        }
        (sent, q.len())
    }

    /// Retries every user's backlog once. Meant for a periodic timer.
    pub fn retry_pending(&self) -> DispatchReport {
        let queues: Vec<Queue> = self.queues.lock().values().cloned().collect();
        let mut report = DispatchReport::default();
        for queue in queues {
            let mut q = queue.lock();
            let (sent, left) = self.flush(&mut q);
            report.sent += sent;
            report.queued += left;
        }
        report
    }

    pub fn pending(&self, phone: &str) -> usize {
        self.queues.lock().get(phone).map_or(0, |q| q.lock().len())
    }
}
