//! Lookup programs over one-hot attribute embeddings, compiled into attention heads.

mod compile;
mod interpret;
mod library;
mod schema;

pub use compile::{compile, decode_next, run_program, LookupInstruction, MhlaProgram, ProgramTrace};
pub use interpret::{interpret, interpret_raw};
pub use library::{assoc_program, copy_program, DfaStepLayout, IfThen};
pub use schema::{Attribute, AttributeSchema, Token};
