//! Four-track song generation from language models, JSON and MIDI codecs,
//! piano-roll tensors, a CNN genre/style classifier, a transformer melody
//! completion model and their evaluation.

pub mod cli;
pub mod codec;
pub mod datastore;
pub mod llm;
pub mod metrics;
pub mod midi;
pub mod models;
pub mod music;
pub mod pianoroll;
