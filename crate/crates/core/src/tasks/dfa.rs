use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SequenceSample};
use crate::error::{contract, input, Result};
use crate::model::{one_hot, round_token, MhlaParams, Vocabulary};
use crate::numerics::{Matrix, RngStream};

/// Deterministic finite automaton with start state 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct AutomatonSpec {
    states: usize,
    alphabet: usize,
    /// `delta[s][w]`.
    delta: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawSpec {
    states: usize,
    alphabet: usize,
    delta: Vec<Vec<usize>>,
}

impl TryFrom<RawSpec> for AutomatonSpec {
    type Error = crate::Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        AutomatonSpec::new(raw.states, raw.alphabet, raw.delta)
    }
}

impl AutomatonSpec {
    pub fn new(states: usize, alphabet: usize, delta: Vec<Vec<usize>>) -> Result<Self> {
        if states == 0 || alphabet == 0 {
            return Err(input("state and alphabet counts must be positive"));
        }
        if delta.len() != states || delta.iter().any(|r| r.len() != alphabet) {
            return Err(input(format!("transition table must be {states}x{alphabet}")));
        }
        if let Some(bad) = delta.iter().flatten().find(|&&s| s >= states) {
            return Err(input(format!("transition target {bad} is not a state")));
        }
        Ok(Self { states, alphabet, delta })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn delta(&self) -> &[Vec<usize>] {
        &self.delta
    }

    pub fn transition(&self, state: usize, letter: usize) -> usize {
        self.delta[state][letter]
    }
}

/// Uniformly random total transition table.
pub fn dfa_random(states: usize, alphabet: usize, seed: u64) -> Result<AutomatonSpec> {
    let mut rng = RngStream::new(seed);
    dfa_random_with(states, alphabet, &mut rng)
}

fn dfa_random_with(states: usize, alphabet: usize, rng: &mut RngStream) -> Result<AutomatonSpec> {
    if states == 0 || alphabet == 0 {
        return Err(input("state and alphabet counts must be positive"));
    }
    let delta = (0..states).map(|_| (0..alphabet).map(|_| rng.below(states)).collect()).collect();
    AutomatonSpec::new(states, alphabet, delta)
}

/// States `s⁰ … s^L` visited on `word`, starting from 0.
pub fn dfa_execute(spec: &AutomatonSpec, word: &[usize]) -> Result<Vec<usize>> {
    let mut states = Vec::with_capacity(word.len() + 1);
    states.push(0);
    for (i, &w) in word.iter().enumerate() {
        if w >= spec.alphabet {
            return Err(input(format!("letter {w} at position {i} is outside the alphabet")));
        }
        states.push(spec.transition(states[i], w));
    }
    Ok(states)
}

/// Token layout: state symbols, letter symbols, `(`, `)`, `|`, then `positions` position
/// symbols. A token at index `t < positions` is embedded as `e_symbol + e_position(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfaTokenSchema {
    pub states: usize,
    pub alphabet: usize,
    pub positions: usize,
}

impl DfaTokenSchema {
    pub fn symbol_count(&self) -> usize {
        self.states + self.alphabet + 3
    }

    pub fn dim(&self) -> usize {
        self.symbol_count() + self.positions
    }

    pub fn state(&self, s: usize) -> usize {
        s
    }

    pub fn letter(&self, w: usize) -> usize {
        self.states + w
    }

    pub fn open(&self) -> usize {
        self.states + self.alphabet
    }

    pub fn close(&self) -> usize {
        self.open() + 1
    }

    pub fn bar(&self) -> usize {
        self.open() + 2
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut symbols: Vec<String> = (0..self.states).map(|s| format!("s{s}")).collect();
        symbols.extend((0..self.alphabet).map(|w| format!("a{w}")));
        symbols.extend(["(", ")", "|"].map(String::from));
        symbols.extend((0..self.positions).map(|t| format!("p{t}")));
        Vocabulary::new(symbols).expect("distinct generated symbols")
    }

    /// Total tokens for a word of length `word_len`: table, separators, word and history.
    pub fn sequence_len(&self, word_len: usize) -> usize {
        5 * self.states * self.alphabet + 2 + word_len + 5 * word_len
    }

    pub fn embed(&self, tokens: &[usize]) -> Matrix {
        let mut z = Matrix::zeros(self.dim(), tokens.len());
        for (t, &tok) in tokens.iter().enumerate() {
            z[(tok, t)] = 1.0;
            if t < self.positions {
                z[(self.symbol_count() + t, t)] = 1.0;
            }
        }
        z
    }
}

/// A serialized table, word and computation history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfaSample {
    pub tokens: Vec<usize>,
    /// First history token.
    pub prompt_end: usize,
    pub history_end: usize,
    pub word_len: usize,
}

/// `(s w δ(s,w))…  | w₀ … w_{L−1} | (s⁰ w₀ s¹) …` with five tokens per triple.
pub fn dfa_sequence(schema: &DfaTokenSchema, spec: &AutomatonSpec, word: &[usize]) -> Result<DfaSample> {
    if spec.states != schema.states || spec.alphabet != schema.alphabet {
        return Err(contract("automaton does not match the token schema"));
    }
    let run = dfa_execute(spec, word)?;
    let mut tokens = Vec::with_capacity(schema.sequence_len(word.len()));
    let triple = |tokens: &mut Vec<usize>, s: usize, w: usize, t: usize| {
        tokens.extend([schema.open(), schema.state(s), schema.letter(w), schema.state(t), schema.close()]);
    };
    for s in 0..spec.states {
        for w in 0..spec.alphabet {
            triple(&mut tokens, s, w, spec.transition(s, w));
        }
    }
    tokens.push(schema.bar());
    tokens.extend(word.iter().map(|&w| schema.letter(w)));
    tokens.push(schema.bar());
    let prompt_end = tokens.len();
    for (i, &w) in word.iter().enumerate() {
        triple(&mut tokens, run[i], w, run[i + 1]);
    }
    let history_end = tokens.len();
    Ok(DfaSample { tokens, prompt_end, history_end, word_len: word.len() })
}

/// Recovers `s⁰ … s^L` from history tokens.
pub fn parse_history(schema: &DfaTokenSchema, history: &[usize]) -> Result<Vec<usize>> {
    if !history.len().is_multiple_of(5) {
        return Err(input(format!("history has {} tokens, not a multiple of 5", history.len())));
    }
    let as_state = |t: usize| (t < schema.states).then_some(t);
    let mut states = vec![0];
    for (i, group) in history.chunks(5).enumerate() {
        let bad = || input(format!("history triple {i} is malformed"));
        if group[0] != schema.open() || group[4] != schema.close() {
            return Err(bad());
        }
        let from = as_state(group[1]).ok_or_else(bad)?;
        let letter_ok = group[2] >= schema.states && group[2] < schema.states + schema.alphabet;
        let to = as_state(group[3]).ok_or_else(bad)?;
        if !letter_ok || from != states[i] {
            return Err(bad());
        }
        states.push(to);
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaDataOptions {
    pub states: usize,
    pub alphabet: usize,
    pub word_len: usize,
    pub sequences: usize,
    pub seed: u64,
    /// Upper bound on the number of position symbols.
    pub position_cap: usize,
}

pub const DEFAULT_POSITION_CAP: usize = 256;

impl DfaDataOptions {
    pub fn schema(&self) -> DfaTokenSchema {
        let base = DfaTokenSchema { states: self.states, alphabet: self.alphabet, positions: 0 };
        DfaTokenSchema { positions: base.sequence_len(self.word_len).min(self.position_cap), ..base }
    }
}

/// Random automata and uniform words, one pair per sequence.
pub fn gen_dfa_sequences(opts: &DfaDataOptions) -> Result<Vec<(AutomatonSpec, Vec<usize>)>> {
    let mut rng = RngStream::new(opts.seed);
    (0..opts.sequences)
        .map(|_| {
            let spec = dfa_random_with(opts.states, opts.alphabet, &mut rng)?;
            let word = (0..opts.word_len).map(|_| rng.below(opts.alphabet)).collect();
            Ok((spec, word))
        })
        .collect()
}

/// One sample per history token: the embedded prefix and the one-hot next symbol.
pub fn gen_dfa_dataset(opts: &DfaDataOptions) -> Result<(Dataset, Vocabulary)> {
    if opts.states == 0 || opts.alphabet == 0 || opts.word_len == 0 || opts.sequences == 0 {
        return Err(input("states, alphabet, word length and sequence count must be positive"));
    }
    let schema = opts.schema();
    let mut samples = Vec::new();
    for (spec, word) in gen_dfa_sequences(opts)? {
        let seq = dfa_sequence(&schema, &spec, &word)?;
        let z_full = schema.embed(&seq.tokens);
        for t in seq.prompt_end..seq.history_end {
            samples.push(SequenceSample::new(z_full.prefix_columns(t), one_hot(schema.dim(), seq.tokens[t]))?);
        }
    }
    Ok((Dataset::new(samples)?, schema.vocabulary()))
}

/// Fraction of samples whose rounded prediction hits the one-hot target.
pub fn next_token_accuracy(params: &MhlaParams, data: &Dataset) -> Result<f64> {
    let targets = data
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let ones = s.y.iter().filter(|&&v| v == 1.0).count();
            let zeros = s.y.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != s.y.len() {
                return Err(input(format!("target {i} is not one-hot")));
            }
            Ok(round_token(&s.y))
        })
        .collect::<Result<Vec<_>>>()?;
    if params.d() != data.d() {
        return Err(contract(format!("params have d={}, data has d={}", params.d(), data.d())));
    }
    let hits = crate::numerics::parallel::map_chunks(data.len(), 64, |r| {
        let mut hits = 0usize;
        for i in r {
            let f = params.forward_last(&data.samples()[i].z).expect("dimensions checked");
            hits += usize::from(round_token(&f) == targets[i]);
        }
        hits
    });
    Ok(hits.into_iter().sum::<usize>() as f64 / data.len() as f64)
}
