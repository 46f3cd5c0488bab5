//! Language-model backends, prompt construction, the dataset generation
//! sweep and zero-shot recognition.

mod generate;
mod mock;
mod prompt;
mod recognize;
mod remote;

pub use generate::{
    generate_dataset, generate_song, pick_mood, GenerateOptions, GenerationError, GenerationRecord,
    Outcome, SweepError, DEFAULT_MAX_ATTEMPTS, MANIFEST_FILE,
};
pub use mock::{decode_genre, decode_style, MockBackend};
pub use prompt::{
    build_generation_prompt, parse_generation_prompt, temperature_for_index, GenerationPrompt,
};
pub use recognize::{
    build_recognition_prompt, match_label, zero_shot_classify, Recognition, RECOGNITION_TEMPERATURE,
};
pub use remote::{RemoteHttp, RetryPolicy, ENV_API_BASE, ENV_API_KEY, ENV_MODEL};

use crate::music::SongSource;

/// Token budget for generation requests.
pub const MAX_TOKENS: u32 = 1200;

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Sampling seed forwarded to the backend; distinct songs with the same
    /// prompt and temperature differ only through it.
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn generation(prompt: String, temperature: f64, seed: u64) -> Self {
        Self {
            prompt,
            temperature,
            max_tokens: MAX_TOKENS,
            seed: Some(seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("rate limited, gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;

    /// Provenance recorded on generated songs.
    fn source(&self) -> SongSource {
        SongSource::LlmGenerated
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn source(&self) -> SongSource {
        (**self).source()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn source(&self) -> SongSource {
        (**self).source()
    }
}
