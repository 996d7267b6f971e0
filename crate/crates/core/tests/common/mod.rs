#![allow(dead_code)]

use mhla_core::numerics::{Matrix, RngStream};
use mhla_core::program::{compile, AttributeSchema, LookupInstruction, MhlaProgram, Token};
use mhla_core::{Dataset, MhlaParams, SequenceSample};

pub fn random_params(d: usize, heads: usize, rng: &mut RngStream) -> MhlaParams {
    let heads = (0..heads)
        .map(|_| mhla_core::model::Head { v: rng.normal_matrix(d, d, 1.0), q: rng.normal_matrix(d, d, 1.0) })
        .collect();
    MhlaParams::new(d, heads).unwrap()
}

pub fn gaussian_dataset(d: usize, n: usize, samples: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed);
    Dataset::new(
        (0..samples).map(|_| SequenceSample::new(rng.normal_matrix(d, n, 1.0), vec![0.0; d]).unwrap()).collect(),
    )
    .unwrap()
}

pub fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(1.0_f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

/// A random program that compiles, plus a random context over its schema.
pub fn random_program(rng: &mut RngStream) -> (MhlaProgram, Vec<Token>) {
    loop {
        let attrs = rng.range_inclusive(2, 4);
        let pairs: Vec<(String, usize)> = (0..attrs).map(|i| (format!("a{i}"), rng.range_inclusive(1, 4))).collect();
        let refs: Vec<(&str, usize)> = pairs.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        let schema = AttributeSchema::from_pairs(&refs).unwrap();
        let pick = |rng: &mut RngStream| rng.below(attrs);
        let count = rng.range_inclusive(1, 3);
        let instructions: Vec<LookupInstruction> = (0..count)
            .map(|_| {
                let (key, value, source, dest) = (pick(rng), pick(rng), pick(rng), pick(rng));
                let size = |a: usize| schema.size(a);
                let bq = (0..size(source))
                    .map(|_| (!rng.bernoulli(0.2)).then(|| rng.below(size(key))))
                    .collect();
                let bv = (0..size(value))
                    .map(|_| (!rng.bernoulli(0.2)).then(|| rng.below(size(dest))))
                    .collect();
                LookupInstruction {
                    key: pairs[key].0.clone(),
                    value: pairs[value].0.clone(),
                    source: pairs[source].0.clone(),
                    dest: pairs[dest].0.clone(),
                    bq,
                    bv,
                    copy_through: rng.bernoulli(0.2),
                }
            })
            .collect();
        let program = MhlaProgram::new(schema.clone(), instructions).unwrap();
        if compile(&program).is_err() {
            continue;
        }
        let len = rng.range_inclusive(1, 6);
        let tokens = (0..len)
            .map(|_| Token {
                values: (0..attrs).map(|a| (!rng.bernoulli(0.3)).then(|| rng.below(schema.size(a)))).collect(),
            })
            .collect();
        return (program, tokens);
    }
}

pub fn embed_context(schema: &AttributeSchema, tokens: &[Token]) -> Matrix {
    let cols: Vec<Vec<f64>> = tokens.iter().map(|t| schema.embed(t).unwrap()).collect();
    Matrix::from_columns(schema.dim(), &cols).unwrap()
}
