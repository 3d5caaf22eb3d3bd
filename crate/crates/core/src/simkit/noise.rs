use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::intention::tokenize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-token corruption probability.
    pub level: f64,
    /// Share of corrupted tokens dropped rather than substituted.
    pub deletion_share: f64,
    /// Half-width of the uniform confidence jitter.
    pub jitter: f64,
    pub vocabulary: Vec<String>,
}

impl NoiseConfig {
    pub fn check(&self) -> Result<(), String> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.level) || !unit(self.deletion_share) || !unit(self.jitter) {
            return Err("noise level, deletion share and jitter must lie in [0,1]".into());
        }
        if self.vocabulary.is_empty() {
            return Err("noise vocabulary is empty".into());
        }
        Ok(())
    }
}

/// What the simulated recognizer heard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub text: String,
    pub confidence: f64,
    pub corrupted: usize,
    pub tokens: usize,
}

/// Token-level substitution/deletion channel over ChaCha8.
///
/// Every call consumes one draw for the confidence jitter, then three per
/// token (corrupt?, delete?, substitute-with), whether or not they are used,
/// so the stream position depends only on token counts. A draw is
/// `(next_u64 >> 11) * 2^-53`.
#[derive(Clone, Debug)]
pub struct NoiseChannel {
    config: NoiseConfig,
    seed: u64,
    rng: ChaCha8Rng,
}

impl NoiseChannel {
    pub fn new(config: NoiseConfig, seed: u64) -> Self {
        Self { config, seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level(&self) -> f64 {
        self.config.level
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.config.vocabulary
    }

    fn draw(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn corrupt(&mut self, utterance: &str) -> Recognition {
        self.corrupt_at(self.config.level, utterance)
    }

    pub fn corrupt_at(&mut self, level: f64, utterance: &str) -> Recognition {
        let jitter = (2.0 * self.draw() - 1.0) * self.config.jitter;
        let tokens = tokenize(utterance);
        let mut out = Vec::with_capacity(tokens.len());
        let mut corrupted = 0;
        for t in &tokens {
            let (hit, drop, pick) = (self.draw(), self.draw(), self.draw());
            if hit < level {
                corrupted += 1;
                if drop >= self.config.deletion_share {
                    let vocab = &self.config.vocabulary;
                    let i = ((pick * vocab.len() as f64) as usize).min(vocab.len() - 1);
                    out.push(vocab[i].clone());
                }
            } else {
                out.push(t.clone());
            }
        }
        let confidence = if tokens.is_empty() {
            0.0
        } else {
            (1.0 - corrupted as f64 / tokens.len() as f64 + jitter).clamp(0.0, 1.0)
        };
        Recognition { text: out.join(" "), confidence, corrupted, tokens: tokens.len() }
    }
}

/// Recognized text and ASR confidence at the channel's own noise level.
pub fn corrupt(channel: &mut NoiseChannel, utterance: &str) -> (String, f64) {
    let r = channel.corrupt(utterance);
    (r.text, r.confidence)
}
