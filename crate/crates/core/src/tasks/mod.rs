//! Dataset generators and ground-truth oracles.

mod assoc;
mod dfa;
mod random;

pub use assoc::{assoc_ground_truth, gen_assoc, sample_assoc, AssocInstance, AssocKind};
pub use dfa::{
    dfa_execute, dfa_random, dfa_sequence, gen_dfa_dataset, gen_dfa_sequences, next_token_accuracy, parse_history,
    AutomatonSpec, DfaDataOptions, DfaSample, DfaTokenSchema, DEFAULT_POSITION_CAP,
};
pub use random::{add_label_noise, gen_inputs, gen_random_mhla};
