use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeSchema, Token};
use crate::error::{Error, Result};
use crate::model::{rollout_with, ComputationHistory, Head, MhlaParams};
use crate::numerics::Matrix;

/// `dest ← bv(value of every token whose key equals bq(source of the last token))`.
///
/// `bq` and `bv` may leave entries undefined (`null`), in which case that query or value
/// contributes nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LookupInstruction {
    pub key: String,
    pub value: String,
    pub source: String,
    pub dest: String,
    pub bq: Vec<Option<usize>>,
    pub bv: Vec<Option<usize>>,
    /// On a miss, the next token inherits the last token's `dest` value.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub copy_through: bool,
}

impl LookupInstruction {
    /// Identity maps, undefined where the target alphabet is smaller.
    pub fn identity(schema: &AttributeSchema, key: &str, value: &str, source: &str, dest: &str) -> Result<Self> {
        let size = |name: &str| schema.require(name).map(|a| schema.size(a));
        let (k, v, s, d) = (size(key)?, size(value)?, size(source)?, size(dest)?);
        Ok(Self {
            key: key.into(),
            value: value.into(),
            source: source.into(),
            dest: dest.into(),
            bq: (0..s).map(|i| (i < k).then_some(i)).collect(),
            bv: (0..v).map(|i| (i < d).then_some(i)).collect(),
            copy_through: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawProgram")]
pub struct MhlaProgram {
    pub schema: AttributeSchema,
    pub instructions: Vec<LookupInstruction>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProgram {
    schema: AttributeSchema,
    instructions: Vec<LookupInstruction>,
}

impl TryFrom<RawProgram> for MhlaProgram {
    type Error = Error;

    fn try_from(raw: RawProgram) -> Result<Self> {
        MhlaProgram::new(raw.schema, raw.instructions)
    }
}

/// Resolved attribute indices of an instruction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slots {
    pub key: usize,
    pub value: usize,
    pub source: usize,
    pub dest: usize,
}

impl MhlaProgram {
    pub fn new(schema: AttributeSchema, instructions: Vec<LookupInstruction>) -> Result<Self> {
        let p = Self { schema, instructions };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn slots(&self, ins: &LookupInstruction) -> Result<Slots> {
        Ok(Slots {
            key: self.schema.require(&ins.key)?,
            value: self.schema.require(&ins.value)?,
            source: self.schema.require(&ins.source)?,
            dest: self.schema.require(&ins.dest)?,
        })
    }

    fn validate(&self) -> Result<()> {
        for (i, ins) in self.instructions.iter().enumerate() {
            let s = self.slots(ins)?;
            let fail = |msg: String| Err(Error::Compile(format!("instruction {i}: {msg}")));
            if ins.bq.len() != self.schema.size(s.source) {
                return fail(format!("bq has {} entries, source alphabet has {}", ins.bq.len(), self.schema.size(s.source)));
            }
            if ins.bv.len() != self.schema.size(s.value) {
                return fail(format!("bv has {} entries, value alphabet has {}", ins.bv.len(), self.schema.size(s.value)));
            }
            if ins.bq.iter().flatten().any(|&k| k >= self.schema.size(s.key)) {
                return fail("bq maps outside the key alphabet".into());
            }
            if ins.bv.iter().flatten().any(|&k| k >= self.schema.size(s.dest)) {
                return fail("bv maps outside the dest alphabet".into());
            }
        }
        Ok(())
    }

    /// Instructions that may write the same dest rows for the same query token.
    fn check_clashes(&self) -> Result<()> {
        for (i, a) in self.instructions.iter().enumerate() {
            for (j, b) in self.instructions.iter().enumerate().skip(i + 1) {
                if a.dest != b.dest {
                    continue;
                }
                let image: HashSet<usize> = a.bv.iter().flatten().copied().collect();
                if !b.bv.iter().flatten().any(|x| image.contains(x)) {
                    continue;
                }
                let exclusive = a.source == b.source
                    && a.bq.iter().zip(&b.bq).all(|(x, y)| x.is_none() || y.is_none());
                if !exclusive {
                    return Err(Error::Compile(format!(
                        "instructions {i} and {j} both write attribute {:?}",
                        a.dest
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One head per instruction: `Q` embeds `bq` from source rows to key rows, `V` embeds `bv`
/// from value rows to dest rows.
pub fn compile(program: &MhlaProgram) -> Result<MhlaParams> {
    if program.instructions.is_empty() {
        return Err(Error::Compile("program has no instructions".into()));
    }
    program.check_clashes()?;
    let schema = &program.schema;
    let dim = schema.dim();
    let heads = program
        .instructions
        .iter()
        .map(|ins| {
            let s = program.slots(ins)?;
            let mut q = Matrix::zeros(dim, dim);
            let mut v = Matrix::zeros(dim, dim);
            for (x, target) in ins.bq.iter().enumerate() {
                if let Some(t) = target {
                    q[(schema.rows(s.key).start + t, schema.rows(s.source).start + x)] = 1.0;
                }
            }
            for (x, target) in ins.bv.iter().enumerate() {
                if let Some(t) = target {
                    v[(schema.rows(s.dest).start + t, schema.rows(s.value).start + x)] = 1.0;
                }
            }
            Ok(Head { v, q })
        })
        .collect::<Result<Vec<_>>>()?;
    MhlaParams::new(dim, heads)
}

/// Rounds a raw output to a token and applies copy-through for missed attributes.
pub fn decode_next(program: &MhlaProgram, raw: &[f64], last: &Token) -> Token {
    let mut token = program.schema.decode(raw);
    for ins in program.instructions.iter().filter(|i| i.copy_through) {
        if let Some(dest) = program.schema.position(&ins.dest) {
            if token.values[dest].is_none() {
                token.values[dest] = last.values[dest];
            }
        }
    }
    token
}

/// Decoded tokens and the underlying embedded history.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTrace {
    pub tokens: Vec<Token>,
    pub prompt_len: usize,
    pub history: ComputationHistory,
}

impl ProgramTrace {
    pub fn generated(&self) -> &[Token] {
        &self.tokens[self.prompt_len..]
    }
}

/// Compiles `program` and rolls it out for `steps` tokens, rounding per attribute block.
pub fn run_program(program: &MhlaProgram, prompt: &[Token], steps: usize) -> Result<ProgramTrace> {
    if prompt.is_empty() {
        return Err(crate::error::contract("prompt must contain at least one token"));
    }
    let params = compile(program)?;
    let columns = prompt.iter().map(|t| program.schema.embed(t)).collect::<Result<Vec<_>>>()?;
    let z0 = Matrix::from_columns(program.schema.dim(), &columns)?;
    let mut tokens = prompt.to_vec();
    let history = rollout_with(&params, &z0, steps, |raw| {
        let next = decode_next(program, &raw, tokens.last().expect("non-empty"));
        let emb = program.schema.embed(&next)?;
        tokens.push(next);
        Ok(emb)
    })?;
    Ok(ProgramTrace { tokens, prompt_len: prompt.len(), history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{interpret, interpret_raw};

    fn two_attr() -> AttributeSchema {
        AttributeSchema::from_pairs(&[("k", 3), ("v", 2)]).unwrap()
    }

    #[test]
    fn empty_program_is_rejected() {
        let p = MhlaProgram::new(two_attr(), vec![]).unwrap();
        assert!(matches!(compile(&p), Err(Error::Compile(_))));
    }

    #[test]
    fn clashing_writes_are_rejected() {
        let s = two_attr();
        let a = LookupInstruction::identity(&s, "k", "v", "k", "v").unwrap();
        let b = LookupInstruction { key: "k".into(), bq: vec![Some(1), Some(0), Some(2)], ..a.clone() };
        let p = MhlaProgram::new(s.clone(), vec![a.clone(), b]).unwrap();
        assert!(matches!(compile(&p), Err(Error::Compile(_))));
        // disjoint query domains on the same source are fine
        let c = LookupInstruction { bq: vec![Some(0), None, None], ..a.clone() };
        let d = LookupInstruction { bq: vec![None, Some(1), None], ..a };
        assert!(compile(&MhlaProgram::new(s, vec![c, d]).unwrap()).is_ok());
    }

    #[test]
    fn bad_maps_are_rejected() {
        let s = two_attr();
        let a = LookupInstruction::identity(&s, "k", "v", "k", "v").unwrap();
        let short = LookupInstruction { bq: vec![Some(0)], ..a.clone() };
        assert!(MhlaProgram::new(s.clone(), vec![short]).is_err());
        let outside = LookupInstruction { bv: vec![Some(0), Some(2)], ..a.clone() };
        assert!(MhlaProgram::new(s.clone(), vec![outside]).is_err());
        let unknown = LookupInstruction { dest: "w".into(), ..a };
        assert!(MhlaProgram::new(s, vec![unknown]).is_err());
    }

    #[test]
    fn duplicate_keys_sum_and_misses_are_zero() {
        let s = two_attr();
        let ins = LookupInstruction::identity(&s, "k", "v", "k", "v").unwrap();
        let p = MhlaProgram::new(s.clone(), vec![ins]).unwrap();
        let ctx = vec![
            s.token(&[("k", 1), ("v", 0)]).unwrap(),
            s.token(&[("k", 1), ("v", 1)]).unwrap(),
            s.token(&[("k", 1), ("v", 1)]).unwrap(),
            s.token(&[("k", 2)]).unwrap(),
            s.token(&[("k", 1)]).unwrap(),
        ];
        let raw = interpret_raw(&p, &ctx).unwrap();
        assert_eq!(raw, vec![0.0, 0.0, 0.0, 1.0, 2.0]);
        let params = compile(&p).unwrap();
        let cols: Vec<_> = ctx.iter().map(|t| s.embed(t).unwrap()).collect();
        let z = Matrix::from_columns(s.dim(), &cols).unwrap();
        assert_eq!(params.forward_last(&z).unwrap(), raw);

        let miss = vec![s.token(&[("k", 1), ("v", 0)]).unwrap(), s.token(&[("k", 0)]).unwrap()];
        assert_eq!(interpret_raw(&p, &miss).unwrap(), vec![0.0; 5]);
        assert_eq!(interpret(&p, &miss).unwrap(), s.empty_token());
    }

    #[test]
    fn copy_through_keeps_dest_on_miss() {
        let s = two_attr();
        let ins = LookupInstruction {
            copy_through: true,
            bq: vec![Some(0), Some(1), None],
            ..LookupInstruction::identity(&s, "k", "v", "k", "v").unwrap()
        };
        let p = MhlaProgram::new(s.clone(), vec![ins]).unwrap();
        let ctx = vec![s.token(&[("k", 0), ("v", 1)]).unwrap(), s.token(&[("k", 2), ("v", 0)]).unwrap()];
        assert_eq!(interpret(&p, &ctx).unwrap(), s.token(&[("v", 0)]).unwrap());
    }

    #[test]
    fn json_round_trip_validates() {
        let s = two_attr();
        let p = MhlaProgram::new(s.clone(), vec![LookupInstruction::identity(&s, "k", "v", "k", "v").unwrap()]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<MhlaProgram>(&text).unwrap(), p);
        let bad = text.replace("\"bq\":[0,1,2]", "\"bq\":[0,1,7]");
        assert!(serde_json::from_str::<MhlaProgram>(&bad).is_err());
    }
}
