//! Ready-made programs: copy, associative lookup, DFA stepping and the if-then macro.

use super::compile::{LookupInstruction, MhlaProgram};
use super::schema::{Attribute, AttributeSchema, Token};
use crate::error::{contract, Error, Result};
use crate::tasks::AutomatonSpec;

/// Tokens carry `pos` and `sym`; each step appends position `p+1` holding the symbol found at
/// position `p+1−k`.
pub fn copy_program(positions: usize, symbols: usize, k: usize) -> Result<MhlaProgram> {
    if k == 0 {
        return Err(contract("copy offset must be at least 1"));
    }
    let schema = AttributeSchema::from_pairs(&[("pos", positions), ("sym", symbols)])?;
    let fetch = LookupInstruction {
        key: "pos".into(),
        value: "sym".into(),
        source: "pos".into(),
        dest: "sym".into(),
        bq: (0..positions).map(|p| (p + 1).checked_sub(k)).collect(),
        bv: (0..symbols).map(Some).collect(),
        copy_through: false,
    };
    let advance = LookupInstruction {
        key: "pos".into(),
        value: "pos".into(),
        source: "pos".into(),
        dest: "pos".into(),
        bq: (0..positions).map(Some).collect(),
        bv: (0..positions).map(|p| (p + 1 < positions).then_some(p + 1)).collect(),
        copy_through: false,
    };
    MhlaProgram::new(schema, vec![fetch, advance])
}

/// Single identity lookup with key `k`, value `v`, each of size `d`.
pub fn assoc_program(d: usize) -> Result<MhlaProgram> {
    let schema = AttributeSchema::from_pairs(&[("k", d), ("v", d)])?;
    let ins = LookupInstruction::identity(&schema, "k", "v", "k", "v")?;
    MhlaProgram::new(schema, vec![ins])
}

/// Layout of the DFA stepping program.
///
/// Attributes: `sl` (table key `(s,w)`), `nxt` (table value), `wpos`, `letter`,
/// `cur` (`(s,w,i)` = state, letter read, step) and `si` (`(s,i)` = state before step `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DfaStepLayout {
    pub states: usize,
    pub alphabet: usize,
    pub word_len: usize,
}

impl DfaStepLayout {
    fn sl(&self, s: usize, w: usize) -> usize {
        s * self.alphabet + w
    }

    fn cur(&self, s: usize, w: usize, i: usize) -> usize {
        (s * self.alphabet + w) * self.word_len + i
    }

    fn si(&self, s: usize, i: usize) -> usize {
        s * (self.word_len + 1) + i
    }

    pub fn schema(&self) -> Result<AttributeSchema> {
        let (q, v, l) = (self.states, self.alphabet, self.word_len);
        AttributeSchema::from_pairs(&[
            ("sl", q * v),
            ("nxt", q),
            ("wpos", l),
            ("letter", v),
            ("cur", q * v * l),
            ("si", q * (l + 1)),
        ])
    }

    /// Table tokens, word tokens, then the start marker `si = (0, 0)`.
    pub fn prompt(&self, spec: &AutomatonSpec, word: &[usize]) -> Result<Vec<Token>> {
        if spec.states() != self.states || spec.alphabet() != self.alphabet || word.len() != self.word_len {
            return Err(contract("automaton or word does not match the program layout"));
        }
        let schema = self.schema()?;
        let mut tokens = Vec::new();
        for s in 0..self.states {
            for w in 0..self.alphabet {
                tokens.push(schema.token(&[("sl", self.sl(s, w)), ("nxt", spec.transition(s, w))])?);
            }
        }
        for (i, &w) in word.iter().enumerate() {
            tokens.push(schema.token(&[("wpos", i), ("letter", w)])?);
        }
        tokens.push(schema.token(&[("si", self.si(0, 0))])?);
        Ok(tokens)
    }

    /// Rollout length that visits every state.
    pub fn steps(&self) -> usize {
        2 * self.word_len
    }

    /// States read off the `si` tokens of a trace, starting with the prompt's marker.
    pub fn states_visited(&self, schema: &AttributeSchema, tokens: &[Token]) -> Result<Vec<usize>> {
        let si = schema.require("si")?;
        Ok(tokens.iter().filter_map(|t| t.get(si)).map(|x| x / (self.word_len + 1)).collect())
    }

    pub fn program(&self) -> Result<MhlaProgram> {
        let (q, v, l) = (self.states, self.alphabet, self.word_len);
        if q == 0 || v == 0 || l == 0 {
            return Err(contract("states, alphabet and word length must be positive"));
        }
        let schema = self.schema()?;
        let mut instructions = Vec::new();
        // Read letter i while in state s: si=(s,i) looks up wpos=i, writes cur=(s, letter, i).
        for s in 0..q {
            for i in 0..l {
                instructions.push(LookupInstruction {
                    key: "wpos".into(),
                    value: "letter".into(),
                    source: "si".into(),
                    dest: "cur".into(),
                    bq: (0..q * (l + 1)).map(|x| (x == self.si(s, i)).then_some(i)).collect(),
                    bv: (0..v).map(|w| Some(self.cur(s, w, i))).collect(),
                    copy_through: false,
                });
            }
        }
        // Transition at step i: cur=(s,w,i) looks up sl=(s,w), writes si=(δ(s,w), i+1).
        for i in 0..l {
            let mut bq = vec![None; q * v * l];
            for s in 0..q {
                for w in 0..v {
                    bq[self.cur(s, w, i)] = Some(self.sl(s, w));
                }
            }
            instructions.push(LookupInstruction {
                key: "sl".into(),
                value: "nxt".into(),
                source: "cur".into(),
                dest: "si".into(),
                bq,
                bv: (0..q).map(|t| Some(self.si(t, i + 1))).collect(),
                copy_through: false,
            });
        }
        MhlaProgram::new(schema, instructions)
    }
}

/// Sets `output` to the `b_i` of the case whose `a_i` equals `x`.
///
/// Expands into phase-gated lookups that write the pairs `(a_i, b_i)` into scratch
/// attributes over `k` tokens and then look `x` up in the resulting table, so the answer
/// appears on token `k + 1` after the prompt token. When several cases match, the most
/// frequent `b_i` wins, lowest value on ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfThen {
    pub x: String,
    pub output: String,
    /// `(a_i, b_i)` attribute names.
    pub cases: Vec<(String, String)>,
}

pub const PHASE: &str = "ifthen.phase";
pub const KEY: &str = "ifthen.s0";
pub const VALUE: &str = "ifthen.s1";
pub const QUERY: &str = "ifthen.query";

impl IfThen {
    /// Direct evaluation on a single token.
    pub fn evaluate(&self, schema: &AttributeSchema, token: &Token) -> Result<Option<usize>> {
        let Some(x) = token.get(schema.require(&self.x)?) else {
            return Ok(None);
        };
        let mut votes = vec![0usize; schema.size(schema.require(&self.output)?)];
        for (a, b) in &self.cases {
            if token.get(schema.require(a)?) == Some(x) {
                if let Some(y) = token.get(schema.require(b)?) {
                    votes[y] += 1;
                }
            }
        }
        Ok((0..votes.len()).rev().max_by_key(|&y| votes[y]).filter(|&y| votes[y] > 0))
    }

    pub fn steps(&self) -> usize {
        self.cases.len() + 1
    }

    /// Extends `schema` with the scratch attributes and emits the lookups.
    pub fn expand(&self, schema: &AttributeSchema) -> Result<MhlaProgram> {
        let k = self.cases.len();
        if k == 0 {
            return Err(Error::Compile("if-then needs at least one case".into()));
        }
        let size = |name: &str| schema.require(name).map(|a| schema.size(a));
        let (x_size, out_size) = (size(&self.x)?, size(&self.output)?);
        for (a, b) in &self.cases {
            if size(a)? != x_size || size(b)? != out_size {
                return Err(Error::Compile(format!("case ({a}, {b}) does not match the alphabets of x and output")));
            }
        }
        let mut attributes: Vec<Attribute> = schema.attributes().to_vec();
        for (name, n) in [(PHASE, k + 1), (KEY, x_size), (VALUE, out_size), (QUERY, x_size)] {
            attributes.push(Attribute { name: name.into(), size: n });
        }
        let full = AttributeSchema::new(attributes)?;

        let gated = |value: &str, dest: &str, phases: &dyn Fn(usize) -> bool, bv: Vec<Option<usize>>| LookupInstruction {
            key: PHASE.into(),
            value: value.into(),
            source: PHASE.into(),
            dest: dest.into(),
            bq: (0..=k).map(|p| phases(p).then_some(p)).collect(),
            bv,
            copy_through: false,
        };
        let ident = |n: usize| (0..n).map(Some).collect::<Vec<_>>();

        let mut instructions = vec![gated(PHASE, PHASE, &|p| p < k, (0..=k).map(|p| (p < k).then_some(p + 1)).collect())];
        let mut carried: Vec<&str> = vec![self.x.as_str()];
        for (a, b) in &self.cases {
            for name in [a.as_str(), b.as_str()] {
                if !carried.contains(&name) {
                    carried.push(name);
                }
            }
        }
        for name in carried {
            instructions.push(gated(name, name, &|p| p + 1 < k, ident(size(name)?)));
        }
        for (i, (a, b)) in self.cases.iter().enumerate() {
            instructions.push(gated(a, KEY, &|p| p == i, ident(x_size)));
            instructions.push(gated(b, VALUE, &|p| p == i, ident(out_size)));
        }
        instructions.push(gated(&self.x, QUERY, &|p| p + 1 == k, ident(x_size)));
        instructions.push(LookupInstruction {
            key: KEY.into(),
            value: VALUE.into(),
            source: QUERY.into(),
            dest: self.output.clone(),
            bq: ident(x_size),
            bv: ident(out_size),
            copy_through: false,
        });
        MhlaProgram::new(full, instructions)
    }

    /// Lifts a token of the original schema into the expanded one at phase 0.
    pub fn start_token(&self, expanded: &AttributeSchema, token: &Token) -> Result<Token> {
        let mut values = token.values.clone();
        values.resize(expanded.len(), None);
        values[expanded.require(PHASE)?] = Some(0);
        let t = Token { values };
        expanded.check(&t)?;
        Ok(t)
    }
}
