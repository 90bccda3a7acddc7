//! Test and demo support: a deterministic fixture corpus and a mock
//! chat-completions server.
//!
//! Fixture pages are synthetic PNGs where every layout box is filled with a
//! unique solid color. The mock server "reads" a crop by decoding the image
//! and looking its color up in the fixture's text table, so the whole
//! chunk → crop → convert → index → retrieve → answer loop runs end to end
//! with fully deterministic text, without any model.

pub mod fixture;
pub mod mock;

pub use fixture::{build_corpus, FixtureCorpus};
pub use mock::{Behavior, Latency, MockServer};
