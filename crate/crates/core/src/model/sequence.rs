use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::params::MhlaParams;
use crate::error::{contract, input, Result};
use crate::numerics::Matrix;

/// Index of the largest coordinate, lowest index on ties. Empty input maps to 0.
pub fn round_token(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Standard basis vector `e_index` of length `dim`.
pub fn one_hot(dim: usize, index: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[index] = 1.0;
    e
}

/// Ordered list of distinct symbols, embedded as standard basis vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = crate::Error;

    fn try_from(symbols: Vec<String>) -> Result<Self> {
        Vocabulary::new(symbols)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.symbols
    }
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(contract("vocabulary must not be empty"));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(input(format!("duplicate vocabulary symbol {s:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn embed(&self, symbol: &str) -> Result<Vec<f64>> {
        let i = self.index_of(symbol).ok_or_else(|| input(format!("unknown symbol {symbol:?}")))?;
        Ok(one_hot(self.len(), i))
    }

    /// Rounds `v` to the nearest basis vector and returns its symbol.
    pub fn decode(&self, v: &[f64]) -> Result<&str> {
        if v.len() != self.len() {
            return Err(contract(format!("vector has length {}, vocabulary has {}", v.len(), self.len())));
        }
        Ok(&self.symbols[round_token(v)])
    }
}

/// Growing contexts `Z⁰ ⊂ Z¹ ⊂ … ⊂ Z^Φ` from an autoregressive rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationHistory {
    prompt_len: usize,
    tokens: Matrix,
}

impl ComputationHistory {
    pub fn new(prompt: Matrix) -> Self {
        Self { prompt_len: prompt.cols(), tokens: prompt }
    }

    pub fn horizon(&self) -> usize {
        self.tokens.cols() - self.prompt_len
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_len
    }

    /// Context after `t` appended tokens.
    pub fn step(&self, t: usize) -> Matrix {
        assert!(t <= self.horizon(), "step {t} beyond horizon {}", self.horizon());
        self.tokens.prefix_columns(self.prompt_len + t)
    }

    pub fn steps(&self) -> Vec<Matrix> {
        (0..=self.horizon()).map(|t| self.step(t)).collect()
    }

    pub fn last(&self) -> &Matrix {
        &self.tokens
    }

    /// Tokens appended by the rollout, in order.
    pub fn appended(&self) -> Vec<Vec<f64>> {
        (self.prompt_len..self.tokens.cols()).map(|j| self.tokens.column(j)).collect()
    }

    fn push(&mut self, token: &[f64]) -> Result<()> {
        self.tokens = self.tokens.with_column(token)?;
        Ok(())
    }
}

/// Runs `phi` autoregressive steps, appending `post(forward_last(Z^t))` each time.
pub fn rollout_with<F>(params: &MhlaParams, z0: &Matrix, phi: usize, mut post: F) -> Result<ComputationHistory>
where
    F: FnMut(Vec<f64>) -> Result<Vec<f64>>,
{
    if z0.rows() != params.d() {
        return Err(contract(format!("prompt has {} rows, params have d={}", z0.rows(), params.d())));
    }
    let mut history = ComputationHistory::new(z0.clone());
    for _ in 0..phi {
        let y = params.forward_last(history.last())?;
        let token = post(y)?;
        if token.len() != params.d() {
            return Err(contract("post-processed token has the wrong length"));
        }
        history.push(&token)?;
    }
    Ok(history)
}

/// Autoregressive rollout; with `round_tokens` each output is snapped to a vocabulary embedding.
pub fn rollout(
    params: &MhlaParams,
    z0: &Matrix,
    phi: usize,
    round_tokens: bool,
    vocab: Option<&Vocabulary>,
) -> Result<ComputationHistory> {
    if round_tokens {
        let vocab = vocab.ok_or_else(|| contract("rounding requires a vocabulary"))?;
        if vocab.len() != params.d() {
            return Err(contract(format!("vocabulary has {} symbols, params have d={}", vocab.len(), params.d())));
        }
        rollout_with(params, z0, phi, |y| Ok(one_hot(y.len(), round_token(&y))))
    } else {
        rollout_with(params, z0, phi, Ok)
    }
}
