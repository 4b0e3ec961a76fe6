//! Sentence embeddings behind a provider interface, plus a deterministic
//! offline fallback provider.

use crate::error::{Error, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

const NORM_TOLERANCE: f64 = 1e-6;

/// A unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalise `values` to unit L2 norm. Fails on an all-zero or
    /// non-finite input.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Invalid(
                "cannot normalise a zero or non-finite vector".into(),
            ));
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Neg for EmbeddingVector {
    type Output = EmbeddingVector;

    fn neg(self) -> Self::Output {
        EmbeddingVector {
            values: self.values.into_iter().map(|v| -v).collect(),
        }
    }
}

pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Failure inside a provider, located at the index of the offending text.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderFailure {
    pub index: usize,
    pub message: String,
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Input window in whitespace tokens; longer texts are truncated.
    fn max_tokens(&self) -> usize;
    /// Raw (not necessarily normalised) vectors, one per input, in order.
    fn embed_raw(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, ProviderFailure>;
}

fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    let mut words = text.split_whitespace();
    let kept: Vec<&str> = words.by_ref().take(max_tokens).collect();
    kept.join(" ")
}

/// Embed `texts` in order, truncating each to the provider's window and
/// normalising every vector.
pub fn embed_batch<P>(provider: &P, texts: &[String]) -> Result<Vec<EmbeddingVector>>
where
    P: EmbeddingProvider + ?Sized,
{
    let fail = |index: usize, message: String| Error::Provider {
        provider: provider.name().to_string(),
        index,
        message,
    };
    let inputs: Vec<String> = texts
        .iter()
        .map(|t| truncate_tokens(t, provider.max_tokens()))
        .collect();
    let raw = provider
        .embed_raw(&inputs)
        .map_err(|f| fail(f.index, f.message))?;
    if raw.len() != texts.len() {
        return Err(fail(
            raw.len().min(texts.len()),
            format!("expected {} vectors, got {}", texts.len(), raw.len()),
        ));
    }
    raw.into_iter()
        .enumerate()
        .map(|(i, v)| {
            if v.len() != provider.dim() {
                return Err(fail(
                    i,
                    format!("vector has {} dims, expected {}", v.len(), provider.dim()),
                ));
            }
            let out = EmbeddingVector::normalized(v).map_err(|e| fail(i, e.to_string()))?;
            debug_assert!((out.norm() - 1.0).abs() < NORM_TOLERANCE);
            Ok(out)
        })
        .collect()
}

/// Offline provider: sublinear-tf character 3..5-gram features, hashed and
/// projected to a fixed dimension with seeded random signs.
///
/// Every n-gram's projection row is derived from its own hash, so no
/// projection matrix is stored and output depends only on the input text
/// and the seed.
#[derive(Debug, Clone)]
pub struct HashedNgramProvider {
    name: String,
    dim: usize,
    seed: u64,
    max_tokens: usize,
}

impl HashedNgramProvider {
    pub const DEFAULT_DIM: usize = 384;
    pub const DEFAULT_SEED: u64 = 0x5e_ed0f_57e9;
    pub const MAX_TOKENS: usize = 256;

    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedNgramProvider {
            name: format!("fallback-char-ngram-{dim}"),
            dim,
            seed,
            max_tokens: Self::MAX_TOKENS,
        }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
        let mut counts: std::collections::BTreeMap<u64, u32> = std::collections::BTreeMap::new();
        for n in 3..=5 {
            for gram in padded.windows(n) {
                *counts.entry(fnv1a(gram)).or_default() += 1;
            }
        }
        if counts.is_empty() {
            // Too short for any n-gram (empty text): the padded string
            // itself is the only feature, so the vector is never zero.
            counts.insert(fnv1a(&padded), 1);
        }
        let mut out = vec![0.0; self.dim];
        let words = self.dim.div_ceil(64);
        let mut signs = vec![0u64; words];
        for (hash, count) in counts {
            let weight = 1.0 + f64::from(count).ln();
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ hash);
            for w in signs.iter_mut() {
                *w = rng.next_u64();
            }
            for (j, slot) in out.iter_mut().enumerate() {
                let bit = (signs[j / 64] >> (j % 64)) & 1;
                *slot += if bit == 1 { weight } else { -weight };
            }
        }
        out
    }
}

impl Default for HashedNgramProvider {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM, Self::DEFAULT_SEED)
    }
}

fn fnv1a(chars: &[char]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for c in chars {
        for b in (*c as u32).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl EmbeddingProvider for HashedNgramProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed_raw(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, ProviderFailure> {
        use rayon::prelude::*;
        Ok(texts.par_iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Provider backed by an external command speaking the line protocol:
/// one text per stdin line in, one whitespace-separated vector per stdout
/// line out.
#[derive(Debug, Clone)]
pub struct CommandProvider {
    name: String,
    command: String,
    dim: usize,
    max_tokens: usize,
}

impl CommandProvider {
    pub fn new(
        name: impl Into<String>,
        command: impl Into<String>,
        dim: usize,
        max_tokens: usize,
    ) -> Self {
        CommandProvider {
            name: name.into(),
            command: command.into(),
            dim,
            max_tokens,
        }
    }

    pub fn command(&self) -> &str {
        &self.command
    }
}

fn protocol_line(text: &str) -> String {
    text.replace(['\n', '\r'], " ")
}

impl EmbeddingProvider for CommandProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed_raw(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, ProviderFailure> {
        let failure = |index: usize, message: String| ProviderFailure { index, message };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| failure(0, format!("cannot start `{}`: {e}", self.command)))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let payload: String = texts.iter().map(|t| protocol_line(t) + "\n").collect();
        let writer = std::thread::spawn(move || {
            // A provider that exits early closes the pipe; that is reported
            // through the vector count below.
            let _ = stdin.write_all(payload.as_bytes());
        });

        let stdout = child.stdout.take().expect("stdout is piped");
        let mut vectors = Vec::with_capacity(texts.len());
        let mut parse_error = None;
        for (index, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| failure(index, e.to_string()))?;
            if parse_error.is_some() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => vectors.push(v),
                Err(e) => parse_error = Some(failure(index, format!("unparseable vector: {e}"))),
            }
        }
        let _ = writer.join();
        let output = child
            .wait_with_output()
            .map_err(|e| failure(vectors.len(), e.to_string()))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(failure(
                vectors.len().min(texts.len().saturating_sub(1)),
                format!("provider exited with {}: {}", output.status, stderr.trim()),
            ));
        }
        if let Some(err) = parse_error {
            return Err(err);
        }
        if vectors.len() != texts.len() {
            return Err(failure(
                vectors.len().min(texts.len()),
                format!("expected {} vectors, got {}", texts.len(), vectors.len()),
            ));
        }
        Ok(vectors)
    }
}
