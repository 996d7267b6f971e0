use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    pub size: usize,
}

/// Attributes laid out as contiguous one-hot blocks, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    offsets: Vec<usize>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<Attribute>> for AttributeSchema {
    type Error = Error;

    fn try_from(attributes: Vec<Attribute>) -> Result<Self> {
        AttributeSchema::new(attributes)
    }
}

impl From<AttributeSchema> for Vec<Attribute> {
    fn from(s: AttributeSchema) -> Self {
        s.attributes
    }
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Compile("schema has no attributes".into()));
        }
        let mut index = HashMap::new();
        let mut offsets = Vec::with_capacity(attributes.len());
        let mut offset = 0;
        for (i, a) in attributes.iter().enumerate() {
            if a.size == 0 {
                return Err(Error::Compile(format!("attribute {:?} has an empty alphabet", a.name)));
            }
            if index.insert(a.name.clone(), i).is_some() {
                return Err(Error::Compile(format!("attribute {:?} is declared twice", a.name)));
            }
            offsets.push(offset);
            offset += a.size;
        }
        Ok(Self { attributes, offsets, index })
    }

    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(name, size)| Attribute { name: name.to_owned(), size }).collect())
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.attributes.iter().map(|a| a.size).sum()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.position(name).ok_or_else(|| Error::Compile(format!("unknown attribute {name:?}")))
    }

    pub fn size(&self, attr: usize) -> usize {
        self.attributes[attr].size
    }

    pub fn rows(&self, attr: usize) -> Range<usize> {
        self.offsets[attr]..self.offsets[attr] + self.attributes[attr].size
    }

    /// Sum of one-hot blocks of the assigned attributes.
    pub fn embed(&self, token: &Token) -> Result<Vec<f64>> {
        self.check(token)?;
        let mut v = vec![0.0; self.dim()];
        for (attr, value) in token.values.iter().enumerate() {
            if let Some(x) = value {
                v[self.offsets[attr] + x] = 1.0;
            }
        }
        Ok(v)
    }

    /// Per block: `None` when the block maximum is below 0.5, else its argmax (lowest on ties).
    pub fn decode(&self, v: &[f64]) -> Token {
        let values = (0..self.len())
            .map(|attr| {
                let block = &v[self.rows(attr)];
                let best = crate::model::round_token(block);
                (block[best] >= 0.5).then_some(best)
            })
            .collect();
        Token { values }
    }

    pub fn check(&self, token: &Token) -> Result<()> {
        if token.values.len() != self.len() {
            return Err(input(format!("token has {} slots, schema has {}", token.values.len(), self.len())));
        }
        for (attr, value) in token.values.iter().enumerate() {
            if let Some(x) = *value {
                if x >= self.size(attr) {
                    return Err(input(format!(
                        "value {x} is outside attribute {:?} of size {}",
                        self.attributes[attr].name,
                        self.size(attr)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn empty_token(&self) -> Token {
        Token { values: vec![None; self.len()] }
    }

    pub fn token(&self, pairs: &[(&str, usize)]) -> Result<Token> {
        let mut t = self.empty_token();
        for &(name, value) in pairs {
            let attr = self.position(name).ok_or_else(|| input(format!("unknown attribute {name:?}")))?;
            t.values[attr] = Some(value);
        }
        self.check(&t)?;
        Ok(t)
    }

    pub fn token_from_map(&self, map: &BTreeMap<String, usize>) -> Result<Token> {
        let pairs: Vec<(&str, usize)> = map.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        self.token(&pairs)
    }

    pub fn token_to_map(&self, token: &Token) -> BTreeMap<String, usize> {
        token
            .values
            .iter()
            .enumerate()
            .filter_map(|(attr, v)| v.map(|x| (self.attributes[attr].name.clone(), x)))
            .collect()
    }
}

/// Attribute assignment; unassigned attributes embed as zero blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub values: Vec<Option<usize>>,
}

impl Token {
    pub fn get(&self, attr: usize) -> Option<usize> {
        self.values[attr]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let s = AttributeSchema::from_pairs(&[("a", 2), ("b", 3)]).unwrap();
        assert_eq!(s.dim(), 5);
        assert_eq!(s.rows(1), 2..5);
        let t = s.token(&[("b", 2)]).unwrap();
        let v = s.embed(&t).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.decode(&v), t);
        assert!(s.token(&[("a", 2)]).is_err());
        assert!(AttributeSchema::from_pairs(&[("a", 2), ("a", 1)]).is_err());
    }
}
