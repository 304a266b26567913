//! Core of the vitalchat backend.
//!
//! A wrist band streams 4-second multi-sensor bursts; this crate decodes them,
//! estimates vitals two ways (a quality-gated signal chain and a language-model
//! regressor), routes chat queries to model tiers priced per input token, and
//! orchestrates the conversational agent around a file-backed store.
//!
//! Module map:
//!
//! - [`wire`]: burst packet codec, CRC-16 and the four-state device simulator
//! - [`dsp`]: filter design, conventional HR/SpO2 estimator, activity baseline
//! - [`llm`]: model-client interface and deterministic stubs
//! - [`interpreter`]: prompt construction and strict reply parsing for the model path
//! - [`router`]: tier classification and input-token cost accounting
//! - [`tools`]: cron scheduler, SVG charts, lexical retrieval, data lookup
//! - [`store`]: persistence of users, vitals, messages, memory, tasks and costs
//! - [`delivery`]: chat envelopes, transports, media store, ordered dispatch
//! - [`orchestrator`]: sensor and user-message flows
//! - [`eval`]: dataset replay, metrics and the cost study harness

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod config;
pub mod delivery;
pub mod dsp;
pub mod eval;
pub mod exec;
pub mod interpreter;
pub mod llm;
pub mod orchestrator;
pub mod router;
pub mod store;
pub mod tools;
pub mod wire;

pub use exec::Execution;
