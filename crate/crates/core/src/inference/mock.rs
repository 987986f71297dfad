use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{
    approximate_token_count, ChatClient, GenerationParams, InferenceError, ModelResponse,
    UsageSource,
};
use crate::domain::AnswerLetter;
use crate::prompting::McqItem;

/// Content of a well-formed structured response choosing `letter`.
pub fn tagged_response(letter: AnswerLetter) -> String {
    format!("<thinking>\nReasoning through options A, B, and C.\n</thinking>\n<output>\n\"answer\": {letter}\n</output>")
}

fn approximate(system: &str, user: &str, content: String) -> ModelResponse {
    ModelResponse {
        input_tokens: approximate_token_count(system) + approximate_token_count(user),
        output_tokens: approximate_token_count(&content),
        content,
        usage_source: UsageSource::Approximate,
        latency_ms: 0,
    }
}

/// Answers every known question correctly, in the structured tag format.
#[derive(Debug, Clone, Default)]
pub struct AnswerKeyMock {
    answers: HashMap<String, AnswerLetter>,
}

impl AnswerKeyMock {
    pub fn new<'a>(items: impl IntoIterator<Item = &'a McqItem>) -> Self {
        AnswerKeyMock {
            answers: items
                .into_iter()
                .map(|i| (i.question.clone(), i.gold))
                .collect(),
        }
    }
}

impl ChatClient for AnswerKeyMock {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        params.validate()?;
        let content = match self.answers.get(user) {
            Some(&letter) => tagged_response(letter),
            None => "I cannot answer this question.".to_string(),
        };
        Ok(approximate(system, user, content))
    }
}

/// Returns the same content for every request.
#[derive(Debug, Clone)]
pub struct FixedResponseMock {
    pub content: String,
}

impl FixedResponseMock {
    pub fn new(content: impl Into<String>) -> Self {
        FixedResponseMock {
            content: content.into(),
        }
    }
}

impl ChatClient for FixedResponseMock {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        params.validate()?;
        Ok(approximate(system, user, self.content.clone()))
    }
}

/// Picks a letter uniformly at random, keyed by `(seed, system, user)`.
///
/// The same inputs always produce the same answer regardless of call order.
#[derive(Debug, Clone, Copy)]
pub struct SeededRandomMock {
    pub seed: u64,
}

impl SeededRandomMock {
    pub fn new(seed: u64) -> Self {
        SeededRandomMock { seed }
    }

    fn letter_for(&self, system: &str, user: &str) -> AnswerLetter {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((system.len() as u64).to_le_bytes());
        h.update(system.as_bytes());
        h.update(user.as_bytes());
        let digest = h.finalize();
        let word = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        AnswerLetter::from_index((word % 3) as usize).expect("index < 3")
    }
}

impl ChatClient for SeededRandomMock {
    fn complete(
        &self,
        system: &str,
        user: &str,
        params: &GenerationParams,
    ) -> Result<ModelResponse, InferenceError> {
        params.validate()?;
        Ok(approximate(
            system,
            user,
            tagged_response(self.letter_for(system, user)),
        ))
    }
}
