use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Deserialize;

/// Declares an option set usable both as clap flags and as a TOML table. Every field is
/// optional so that flags can be overlaid on the file.
macro_rules! option_set {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, Args, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $($(#[$fmeta])* #[arg(long)] pub $field: Option<$ty>,)*
        }

        impl $name {
            /// Fields set here win over `base`.
            pub fn overlay(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field),)* }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    RandomMhla,
    Assoc,
    Dfa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Regression,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationArg {
    Symmetric,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Mixture,
    Dfa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DfaParam {
    States,
    Alphabet,
    WordLen,
}

impl DfaParam {
    pub fn name(self) -> &'static str {
        match self {
            DfaParam::States => "states",
            DfaParam::Alphabet => "alphabet",
            DfaParam::WordLen => "word_len",
        }
    }
}

option_set! {
    GenOptions {
        #[arg(value_enum)]
        task: TaskKind,
        /// Embedding dimension (random-mhla, assoc).
        d: usize,
        /// Number of samples; DFA: number of sequences.
        n: usize,
        /// Longest context (random-mhla).
        n_max: usize,
        /// Ground-truth heads (random-mhla).
        heads: usize,
        /// Gaussian label noise (random-mhla).
        noise_std: f64,
        /// Share of unitary instances (assoc).
        unitary_fraction: f64,
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        zero_noise: bool,
        states: usize,
        alphabet: usize,
        word_len: usize,
        position_cap: usize,
        seed: u64,
        /// Writes dataset.jsonl and meta.json here.
        out_dir: PathBuf,
    }
}

option_set! {
    LearnOptions {
        /// JSON-lines dataset.
        data: PathBuf,
        #[arg(value_enum)]
        method: Method,
        /// Fixed ridge; the default scales with the Gram trace.
        ridge: f64,
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        exact_ols: bool,
        rank_tol: f64,
        #[arg(value_enum)]
        formulation: FormulationArg,
        /// Heads for gradient descent.
        heads: usize,
        lr: f64,
        epochs: usize,
        seed: u64,
        /// Also write residuals.csv.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        residuals: bool,
        /// Writes fit_report.json and params.json here.
        out_dir: PathBuf,
    }
}

option_set! {
    CertifyOptions {
        data: PathBuf,
        /// Second moment for the centered variant.
        centered_m2: f64,
        /// Writes certificate.json and spectrum.csv here.
        out_dir: PathBuf,
    }
}

option_set! {
    SweepOptions {
        #[arg(value_enum)]
        kind: SweepKind,
        /// Mixture: assoc dimension.
        d: usize,
        /// Mixture: samples per source dataset.
        n: usize,
        /// Mixture: unitary fractions.
        #[arg(value_delimiter = ',')]
        fractions: Vec<f64>,
        /// Mixture: seeds, one row per (fraction, seed).
        #[arg(value_delimiter = ',')]
        seeds: Vec<u64>,
        /// DFA: parameter varied over `values`.
        #[arg(value_enum)]
        param: DfaParam,
        #[arg(value_delimiter = ',')]
        values: Vec<usize>,
        /// DFA: training sequence counts.
        #[arg(value_delimiter = ',')]
        budgets: Vec<usize>,
        states: usize,
        alphabet: usize,
        word_len: usize,
        test_sequences: usize,
        seed: u64,
        /// Writes mixture.csv or dfa_sweep.csv here.
        out_dir: PathBuf,
    }
}

option_set! {
    RolloutOptions {
        /// Params JSON, rolled out from `prompt-matrix`.
        params: PathBuf,
        /// JSON array of rows, `d` x prompt length.
        prompt_matrix: PathBuf,
        /// Snap each output to a vocabulary symbol.
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        round: bool,
        /// JSON list of symbols for rounding.
        vocab: PathBuf,
        /// Program JSON, rolled out from `prompt`.
        program: PathBuf,
        /// JSON array of `{attribute: value}` tokens.
        prompt: PathBuf,
        /// Automaton spec JSON, executed on `word` by the compiled stepping program.
        dfa: PathBuf,
        #[arg(value_delimiter = ',')]
        word: Vec<usize>,
        steps: usize,
        /// Writes trace.json here.
        out_dir: PathBuf,
    }
}

option_set! {
    EvalOptions {
        params: PathBuf,
        data: PathBuf,
        /// Writes eval.json here.
        out_dir: PathBuf,
    }
}
