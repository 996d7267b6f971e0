use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::options::{
    CertifyOptions, DfaParam, EvalOptions, FormulationArg, GenOptions, LearnOptions, Method, RolloutOptions,
    SweepKind, SweepOptions, TaskKind,
};
use super::{resolve_seed, usage, CliResult};
use crate::certificate::{certify as certify_data, mixture_sweep, CertificateReport};
use crate::dataset::Dataset;
use crate::io::{fmt_f64, read_dataset, read_json, to_json_string, write_csv, write_dataset, write_json};
use crate::learner::{fit_gd, fit_regression, mse, FitOptions, Formulation, GdOptions};
use crate::model::{rollout as model_rollout, MhlaParams, Vocabulary, DEFAULT_RANK_TOL};
use crate::numerics::{Matrix, Ridge};
use crate::program::{run_program, DfaStepLayout, MhlaProgram};
use crate::tasks::{
    add_label_noise, assoc_ground_truth, dfa_execute, gen_assoc, gen_dfa_dataset, gen_random_mhla, next_token_accuracy,
    AutomatonSpec, DfaDataOptions, DEFAULT_POSITION_CAP,
};

fn required<T: Clone>(value: &Option<T>, name: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| usage(format!("missing required option --{name}")))
}

fn out_dir(dir: &Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = required(dir, "out-dir")?;
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn load_dataset(path: &Option<PathBuf>) -> CliResult<Dataset> {
    let path = required(path, "data")?;
    if !path.is_file() {
        return Err(usage(format!("dataset {} does not exist", path.display())));
    }
    Ok(read_dataset(&path)?)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    if !path.is_file() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    Ok(read_json(path)?)
}

#[derive(Serialize)]
struct GenMeta {
    task: &'static str,
    seed: u64,
    d: usize,
    samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<MhlaParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vocabulary: Option<Vocabulary>,
}

pub fn gen(o: &GenOptions) -> CliResult<String> {
    let task = required(&o.task, "task")?;
    let seed = resolve_seed(o.seed)?;
    let n = o.n.unwrap_or(1000);
    let (data, meta) = match task {
        TaskKind::RandomMhla => {
            let d = o.d.unwrap_or(2);
            let (data, truth) = gen_random_mhla(d, o.n_max.unwrap_or(10), n, o.heads.unwrap_or(1), seed)?;
            let data = match o.noise_std {
                Some(s) if s != 0.0 => add_label_noise(&data, s, seed.wrapping_add(1))?,
                _ => data,
            };
            let meta = GenMeta { task: "random-mhla", seed, d, samples: n, truth: Some(truth), vocabulary: None };
            (data, meta)
        }
        TaskKind::Assoc => {
            let d = o.d.unwrap_or(4);
            let fraction = o.unitary_fraction.unwrap_or(0.0);
            if !(0.0..=1.0).contains(&fraction) {
                return Err(usage(format!("unitary-fraction must lie in [0, 1], got {fraction}")));
            }
            let data = gen_assoc(d, n, fraction, seed, o.zero_noise.unwrap_or(false))?;
            let truth = assoc_ground_truth(d)?;
            (data, GenMeta { task: "assoc", seed, d: 2 * d, samples: n, truth: Some(truth), vocabulary: None })
        }
        TaskKind::Dfa => {
            let opts = DfaDataOptions {
                states: o.states.unwrap_or(4),
                alphabet: o.alphabet.unwrap_or(4),
                word_len: o.word_len.unwrap_or(4),
                sequences: n,
                seed,
                position_cap: o.position_cap.unwrap_or(DEFAULT_POSITION_CAP),
            };
            let (data, vocab) = gen_dfa_dataset(&opts)?;
            let meta =
                GenMeta { task: "dfa", seed, d: data.d(), samples: data.len(), truth: None, vocabulary: Some(vocab) };
            (data, meta)
        }
    };
    let dir = out_dir(&o.out_dir)?;
    write_dataset(&dir.join("dataset.jsonl"), &data)?;
    write_json(&dir.join("meta.json"), &meta)?;
    eprintln!("wrote {} samples (d={}) to {}", data.len(), data.d(), dir.display());
    Ok(to_json_string(&meta)? + "\n")
}

pub fn learn(o: &LearnOptions) -> CliResult<String> {
    let data = load_dataset(&o.data)?;
    let report = match o.method.unwrap_or(Method::Regression) {
        Method::Regression => {
            let ridge = match (o.exact_ols.unwrap_or(false), o.ridge) {
                (true, Some(_)) => return Err(usage("--exact-ols and --ridge are mutually exclusive")),
                (true, None) => Ridge::Fixed(0.0),
                (false, Some(r)) if r.is_finite() && r >= 0.0 => Ridge::Fixed(r),
                (false, Some(r)) => return Err(usage(format!("ridge must be finite and non-negative, got {r}"))),
                (false, None) => Ridge::Auto,
            };
            let formulation = match o.formulation.unwrap_or(FormulationArg::Symmetric) {
                FormulationArg::Symmetric => Formulation::Symmetric,
                FormulationArg::Full => Formulation::Full,
            };
            let opts = FitOptions { ridge, rank_tol: o.rank_tol.unwrap_or(DEFAULT_RANK_TOL), formulation };
            fit_regression(&data, &opts)?
        }
        Method::Gd => {
            let opts = GdOptions {
                heads: o.heads.unwrap_or(1),
                lr: o.lr.unwrap_or(0.01),
                epochs: o.epochs.unwrap_or(1000),
                seed: resolve_seed(o.seed)?,
            };
            fit_gd(&data, &opts)?
        }
    };
    let dir = out_dir(&o.out_dir)?;
    write_json(&dir.join("fit_report.json"), &report)?;
    write_json(&dir.join("params.json"), &report.learned)?;
    if o.residuals.unwrap_or(false) {
        let rows = report.residual_per_sample.iter().enumerate().map(|(i, r)| vec![i.to_string(), fmt_f64(*r)]);
        write_csv(&dir.join("residuals.csv"), &["sample_index", "residual"], rows)?;
    }
    eprintln!(
        "{}: train_mse {:.3e}, {} heads, {:.2}s",
        report.method,
        report.train_mse,
        report.learned.head_count(),
        report.wall_time
    );
    Ok(to_json_string(&report)? + "\n")
}

pub fn certify(o: &CertifyOptions) -> CliResult<String> {
    let data = load_dataset(&o.data)?;
    let report: CertificateReport = certify_data(&data, o.centered_m2)?;
    let dir = out_dir(&o.out_dir)?;
    write_json(&dir.join("certificate.json"), &report)?;
    let rows = report.spectrum.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]);
    write_csv(&dir.join("spectrum.csv"), &["index", "eigenvalue"], rows)?;
    eprintln!("lambda_min {:.3e}, identifiable {}", report.lambda_min, report.identifiable);
    Ok(to_json_string(&report)? + "\n")
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut put = |r: &[String]| w.write_record(r).map_err(|e| usage(format!("csv: {e}")));
    put(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    for r in rows {
        put(r)?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep(o: &SweepOptions) -> CliResult<String> {
    let kind = required(&o.kind, "kind")?;
    let (file, header, rows) = match kind {
        SweepKind::Mixture => ("mixture.csv", MIXTURE_HEADER, mixture_rows(o)?),
        SweepKind::Dfa => ("dfa_sweep.csv", DFA_HEADER, dfa_rows(o)?),
    };
    let dir = out_dir(&o.out_dir)?;
    write_csv(&dir.join(file), header, rows.clone())?;
    csv_string(header, &rows)
}

const MIXTURE_HEADER: &[&str] = &["fraction", "seed", "lambda_min", "identifiable", "recovery_distance"];
const DFA_HEADER: &[&str] = &["param", "value", "tokens", "accuracy"];

fn mixture_rows(o: &SweepOptions) -> CliResult<Vec<Vec<String>>> {
    let fractions = o.fractions.clone().unwrap_or_else(|| vec![0.0, 0.95, 0.99, 1.0]);
    let seeds = match &o.seeds {
        Some(s) => s.clone(),
        None => vec![resolve_seed(o.seed)?],
    };
    if fractions.is_empty() || seeds.is_empty() {
        return Err(usage("sweep grid is empty"));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(usage(format!("fraction {f} is outside [0, 1]")));
    }
    let d = o.d.unwrap_or(4);
    let n = o.n.unwrap_or(4096);
    let truth = assoc_ground_truth(d)?;
    let mut rows = Vec::new();
    for &seed in &seeds {
        let ident = gen_assoc(d, n, 0.0, seed.wrapping_mul(2), false)?;
        let degen = gen_assoc(d, n, 1.0, seed.wrapping_mul(2).wrapping_add(1), false)?;
        for r in mixture_sweep(&ident, &degen, &truth, &fractions, seed, &FitOptions::default())? {
            eprintln!("fraction {} seed {}: lambda_min {:.3e}", r.fraction, r.seed, r.lambda_min);
            rows.push(vec![
                fmt_f64(r.fraction),
                r.seed.to_string(),
                fmt_f64(r.lambda_min),
                r.identifiable.to_string(),
                fmt_f64(r.recovery_distance),
            ]);
        }
    }
    Ok(rows)
}

fn dfa_rows(o: &SweepOptions) -> CliResult<Vec<Vec<String>>> {
    let param = o.param.unwrap_or(DfaParam::States);
    let values = o.values.clone().unwrap_or_else(|| vec![2]);
    let budgets = o.budgets.clone().unwrap_or_else(|| vec![10, 20, 40]);
    if values.is_empty() || budgets.is_empty() {
        return Err(usage("sweep grid is empty"));
    }
    let seed = resolve_seed(o.seed)?;
    let base = DfaDataOptions {
        states: o.states.unwrap_or(2),
        alphabet: o.alphabet.unwrap_or(2),
        word_len: o.word_len.unwrap_or(2),
        sequences: 1,
        seed,
        position_cap: DEFAULT_POSITION_CAP,
    };
    let test_sequences = o.test_sequences.unwrap_or(100);
    let mut rows = Vec::new();
    for &value in &values {
        let sized = match param {
            DfaParam::States => DfaDataOptions { states: value, ..base },
            DfaParam::Alphabet => DfaDataOptions { alphabet: value, ..base },
            DfaParam::WordLen => DfaDataOptions { word_len: value, ..base },
        };
        let seq_len = sized.schema().sequence_len(sized.word_len);
        let test = gen_dfa_dataset(&DfaDataOptions {
            sequences: test_sequences,
            seed: seed.wrapping_add(1_000_003),
            ..sized
        })?
        .0;
        for &budget in &budgets {
            let train = gen_dfa_dataset(&DfaDataOptions { sequences: budget, ..sized })?.0;
            let report = fit_regression(&train, &FitOptions::default())?;
            let acc = next_token_accuracy(&report.learned, &test)?;
            let tokens = budget * seq_len;
            eprintln!("{}={value} tokens={tokens}: accuracy {acc:.4}", param.name());
            rows.push(vec![param.name().to_string(), value.to_string(), tokens.to_string(), fmt_f64(acc)]);
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ParamsTrace {
    prompt_len: usize,
    /// Generated columns.
    outputs: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbols: Option<Vec<String>>,
}

#[derive(Serialize)]
struct ProgramTraceOut {
    prompt_len: usize,
    tokens: Vec<BTreeMap<String, usize>>,
}

#[derive(Serialize)]
struct DfaTraceOut {
    states: Vec<usize>,
    expected: Vec<usize>,
    matches: bool,
    tokens: Vec<BTreeMap<String, usize>>,
}

pub fn rollout(o: &RolloutOptions) -> CliResult<String> {
    let modes = [o.params.is_some(), o.program.is_some(), o.dfa.is_some()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(usage("rollout needs exactly one of --params, --program or --dfa"));
    }
    let text = if let Some(path) = &o.params {
        let params: MhlaParams = load_json(path)?;
        let z0: Matrix = load_json(&required(&o.prompt_matrix, "prompt-matrix")?)?;
        let round = o.round.unwrap_or(false);
        let vocab: Option<Vocabulary> = o.vocab.as_deref().map(load_json).transpose()?;
        if round && vocab.is_none() {
            return Err(usage("--round needs --vocab"));
        }
        let history = model_rollout(&params, &z0, o.steps.unwrap_or(0), round, vocab.as_ref())?;
        let outputs = history.appended();
        let symbols = match (&vocab, round) {
            (Some(v), true) => {
                Some(outputs.iter().map(|c| v.decode(c).map(str::to_string)).collect::<crate::Result<Vec<_>>>()?)
            }
            _ => None,
        };
        to_json_string(&ParamsTrace { prompt_len: z0.cols(), outputs, symbols })?
    } else if let Some(path) = &o.program {
        let program: MhlaProgram = load_json(path)?;
        let prompt: Vec<BTreeMap<String, usize>> = load_json(&required(&o.prompt, "prompt")?)?;
        let prompt =
            prompt.iter().map(|m| program.schema.token_from_map(m)).collect::<crate::Result<Vec<_>>>()?;
        let trace = run_program(&program, &prompt, o.steps.unwrap_or(0))?;
        let tokens = trace.tokens.iter().map(|t| program.schema.token_to_map(t)).collect();
        to_json_string(&ProgramTraceOut { prompt_len: trace.prompt_len, tokens })?
    } else {
        let spec: AutomatonSpec = load_json(o.dfa.as_deref().expect("checked"))?;
        let word = required(&o.word, "word")?;
        let layout = DfaStepLayout { states: spec.states(), alphabet: spec.alphabet(), word_len: word.len() };
        let program = layout.program()?;
        let prompt = layout.prompt(&spec, &word)?;
        let trace = run_program(&program, &prompt, o.steps.unwrap_or(layout.steps()))?;
        let states = layout.states_visited(&program.schema, &trace.tokens)?;
        let expected = dfa_execute(&spec, &word)?;
        let tokens = trace.generated().iter().map(|t| program.schema.token_to_map(t)).collect();
        to_json_string(&DfaTraceOut { matches: states == expected, states, expected, tokens })?
    };
    let dir = out_dir(&o.out_dir)?;
    std::fs::write(dir.join("trace.json"), format!("{text}\n")).map_err(crate::Error::from)?;
    Ok(text + "\n")
}

#[derive(Serialize)]
struct EvalReport {
    samples: usize,
    mse: f64,
    /// Present when every target is one-hot.
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

pub fn eval(o: &EvalOptions) -> CliResult<String> {
    let params: MhlaParams = load_json(&required(&o.params, "params")?)?;
    let data = load_dataset(&o.data)?;
    if params.d() != data.d() {
        return Err(usage(format!("params have d={}, data has d={}", params.d(), data.d())));
    }
    let one_hot = data.samples().iter().all(|s| {
        s.y.iter().all(|&v| v == 0.0 || v == 1.0) && s.y.iter().filter(|&&v| v == 1.0).count() == 1
    });
    let accuracy = if one_hot { Some(next_token_accuracy(&params, &data)?) } else { None };
    let report = EvalReport { samples: data.len(), mse: mse(&params, &data)?, accuracy };
    let dir = out_dir(&o.out_dir)?;
    write_json(&dir.join("eval.json"), &report)?;
    Ok(to_json_string(&report)? + "\n")
}
