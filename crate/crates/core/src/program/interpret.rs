use std::collections::HashMap;

use super::compile::{decode_next, MhlaProgram};
use super::schema::Token;
use crate::error::{contract, Result};

/// Summed lookup results for the next token, before rounding.
///
/// For each instruction a dictionary maps every token's key to the sum of its mapped values;
/// the last token's source, mapped through `bq`, selects the entry.
pub fn interpret_raw(program: &MhlaProgram, tokens: &[Token]) -> Result<Vec<f64>> {
    let last = tokens.last().ok_or_else(|| contract("context must contain at least one token"))?;
    for t in tokens {
        program.schema.check(t)?;
    }
    let schema = &program.schema;
    let mut out = vec![0.0; schema.dim()];
    for ins in &program.instructions {
        let s = program.slots(ins)?;
        let mut dict: HashMap<usize, Vec<f64>> = HashMap::new();
        for t in tokens {
            if let Some(k) = t.get(s.key) {
                let entry = dict.entry(k).or_insert_with(|| vec![0.0; schema.size(s.dest)]);
                if let Some(dest) = t.get(s.value).and_then(|v| ins.bv[v]) {
                    entry[dest] += 1.0;
                }
            }
        }
        let query = last.get(s.source).and_then(|x| ins.bq[x]);
        if let Some(values) = query.and_then(|q| dict.get(&q)) {
            let base = schema.rows(s.dest).start;
            for (i, v) in values.iter().enumerate() {
                out[base + i] += v;
            }
        }
    }
    Ok(out)
}

/// Next token produced by the program on `tokens`.
pub fn interpret(program: &MhlaProgram, tokens: &[Token]) -> Result<Token> {
    let raw = interpret_raw(program, tokens)?;
    Ok(decode_next(program, &raw, tokens.last().expect("checked non-empty")))
}
