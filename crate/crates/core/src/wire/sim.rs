use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{encode, DeviceConfig, SignalSource, SAMPLES_PER_PACKET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceState {
    Reset,
    Scan,
    Collect,
    Transmit,
}

/// How the MCU streams a packet over the UART to the radio module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkFraming {
    /// Raw packet bytes.
    Binary,
    /// Uppercase ASCII hex followed by CRLF.
    HexText,
}

impl LinkFraming {
    pub fn frame(self, packet: &[u8]) -> Vec<u8> {
        match self {
            LinkFraming::Binary => packet.to_vec(),
            LinkFraming::HexText => {
                let mut out = Vec::with_capacity(packet.len() * 2 + 2);
                for b in packet {
                    out.extend_from_slice(format!("{b:02X}").as_bytes());
                }
                out.extend_from_slice(b"\r\n");
                out
            }
        }
    }

    pub fn wire_len(self, packet_len: usize) -> usize {
        match self {
            LinkFraming::Binary => packet_len,
            LinkFraming::HexText => packet_len * 2 + 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpan {
    pub state: DeviceState,
    pub start_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub cycle: usize,
    /// Timestamp stamped on the packet acquired this cycle.
    pub ts: u32,
    pub trace: Vec<StateSpan>,
    /// Packet acquired during this cycle's Collect phase.
    pub packet: Vec<u8>,
    pub uplink_available: bool,
    /// Packets handed to the uplink this cycle, oldest first.
    pub delivered: Vec<Vec<u8>>,
    pub buffered_after: usize,
    /// Connection window plus streaming time of everything delivered.
    pub transmit_time_s: f64,
}

impl CycleReport {
    pub fn states(&self) -> Vec<DeviceState> {
        self.trace.iter().map(|s| s.state).collect()
    }
}

/// Timing model of the band's Reset -> Scan -> Collect -> Transmit loop.
pub struct DeviceSimulator<S> {
    config: DeviceConfig,
    source: S,
    device_id: String,
    next_ts: u32,
    elapsed_s: f64,
    cycle: usize,
    fifo: VecDeque<Vec<u8>>,
}

impl<S: SignalSource> DeviceSimulator<S> {
    pub fn new(config: DeviceConfig, source: S, device_id: impl Into<String>, start_ts: u32) -> Self {
        DeviceSimulator {
            config,
            source,
            device_id: device_id.into(),
            next_ts: start_ts,
            elapsed_s: 0.0,
            cycle: 0,
            fifo: VecDeque::new(),
        }
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn buffered(&self) -> usize {
        self.fifo.len()
    }

    /// Streaming time of one packet at the configured baud, 10 bits per byte.
    pub fn packet_stream_time_s(&self, packet_len: usize) -> f64 {
        let bytes = self.config.framing.wire_len(packet_len) as f64;
        bytes * 10.0 / f64::from(self.config.baud)
            + SAMPLES_PER_PACKET as f64 * self.config.inter_sample_delay_ms / 1000.0
    }

    /// Runs one full cycle. When the uplink is absent the packet stays queued
    /// and the Transmit phase lasts the full connection window.
    pub fn run_cycle(&mut self, uplink_available: bool) -> CycleReport {
        let c = &self.config;
        let mut t = self.elapsed_s;
        let mut trace = Vec::with_capacity(4);
        let mut span = |state, duration_s: f64, t: &mut f64| {
            trace.push(StateSpan {
                state,
                start_s: *t,
                duration_s,
            });
            *t += duration_s;
        };
        span(DeviceState::Reset, c.reset_s, &mut t);
        span(DeviceState::Scan, c.scan_s, &mut t);
        let ts = self.next_ts;
        let burst = self.source.burst(ts, &self.device_id);
        let packet = encode(&burst).expect("signal source produced an invalid burst");
        span(DeviceState::Collect, c.window_s, &mut t);
        self.fifo.push_back(packet.clone());

        let mut delivered = Vec::new();
        let mut transmit = c.connection_window_s;
        if uplink_available {
            while let Some(p) = self.fifo.pop_front() {
                transmit += self.packet_stream_time_s(p.len());
                delivered.push(p);
            }
        }
        span(DeviceState::Transmit, transmit, &mut t);

        let cycle_len = t - self.elapsed_s;
        self.elapsed_s = t;
        self.next_ts = self.next_ts.saturating_add(cycle_len.ceil().max(1.0) as u32);
        self.cycle += 1;
        CycleReport {
            cycle: self.cycle,
            ts,
            trace,
            packet,
            uplink_available,
            delivered,
            buffered_after: self.fifo.len(),
            transmit_time_s: transmit,
        }
    }
}

/// Runs `n_cycles` with the uplink always present.
pub fn simulate_device<S: SignalSource>(
    config: DeviceConfig,
    source: S,
    n_cycles: usize,
) -> Vec<CycleReport> {
    let mut sim = DeviceSimulator::new(config, source, "sim-band", 0);
    (0..n_cycles).map(|_| sim.run_cycle(true)).collect()
}
