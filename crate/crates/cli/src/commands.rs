use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use pqc_core::circuit::CircuitIR;
use pqc_core::experiments::bas::{run_bas_experiment, BasConfig};
use pqc_core::experiments::prior::{run_prior_experiment, ConditionalMode, PriorConfig, PriorExperimentSpec};
use pqc_core::experiments::toy::{run_thm3_toy, ToyConfig};
use pqc_core::iqp::{block_budget, compile_iqp, verify_schedule, IqpCircuit};
use pqc_core::mps::{run_circuit_mps, trace_csv, MpsOptions};
use pqc_core::qsim::Shots;
use pqc_core::train::TrainConfig;

use crate::config::{layer, read_config_file, take_key};
use crate::error::{CliError, CliResult};
use crate::output::{histogram_csv, resolve_out_dir, Artifacts};
use crate::selftest;
use crate::{Command, IoArgs, TrainArgs};

pub fn dispatch(command: Command, stdout: &mut dyn Write) -> CliResult<i32> {
    match command {
        Command::Simulate { circuit, params, shots, seed, io } => simulate(&circuit, params.as_deref(), shots, seed, &io, stdout),
        Command::CompileIqp { input, verify, io } => compile(&input, verify, &io, stdout),
        Command::EntropyAnalyze { circuit, params, max_bond, hard_cap, io } => {
            entropy(&circuit, params.as_deref(), max_bond, hard_cap, &io, stdout)
        }
        Command::TrainBas { size, common } => train_bas(size, &common, stdout),
        Command::TrainPrior { target, mode, common } => train_prior(target, mode, &common, stdout),
        Command::ToyThm3 { n, common } => toy(n, &common, stdout),
        Command::Selftest => {
            let checks = selftest::run_checks();
            write!(stdout, "{}", selftest::render_table(&checks))?;
            Ok(if checks.iter().all(|c| c.passed()) { 0 } else { 1 })
        }
    }
}

pub fn parse_shots(s: &str) -> CliResult<Shots> {
    s.parse().map_err(|e: pqc_core::Error| CliError::validation(e.to_string()))
}

/// `"3x3"` → `(3, 3)`.
pub fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::validation(format!("size must look like 2x2, got {s:?}"));
    let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    let rows = a.parse().map_err(|_| bad())?;
    let cols = b.parse().map_err(|_| bad())?;
    if rows == 0 || cols == 0 {
        return Err(bad());
    }
    Ok((rows, cols))
}

fn parse_mode(s: &str) -> CliResult<ConditionalMode> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "amplitude-encode" => Ok(ConditionalMode::AmplitudeEncode),
        "fitted-blocks" => Ok(ConditionalMode::FittedBlocks),
        _ => Err(CliError::validation(format!("mode must be amplitude-encode or fitted-blocks, got {s:?}"))),
    }
}

fn config_file(io: &IoArgs) -> CliResult<Option<Value>> {
    io.config.as_deref().map(read_config_file).transpose()
}

fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

/// A bare circuit, or an object with a `circuit` field and optional `params`.
fn load_circuit(path: &Path) -> CliResult<(CircuitIR, Option<Vec<f64>>)> {
    let text = read_input(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let (inner, params) = match value.get("circuit") {
        Some(c) => {
            let params = value
                .get("params")
                .map(|p| serde_json::from_value(p.clone()))
                .transpose()
                .map_err(|e| CliError::validation(format!("{}: bad `params`: {e}", path.display())))?;
            (c.clone(), params)
        }
        None => (value, None),
    };
    Ok((CircuitIR::from_json(&inner.to_string())?, params))
}

fn fill_params(params: &mut Vec<f64>, embedded: Option<Vec<f64>>) {
    if params.is_empty() {
        if let Some(p) = embedded {
            *params = p;
        }
    }
}

fn load_params(path: &Path) -> CliResult<Vec<f64>> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| CliError::validation(format!("{}: expected a JSON array of numbers: {e}", path.display())))
}

fn apply_train_flags(train: &mut TrainConfig, args: &TrainArgs) -> CliResult<()> {
    if let Some(s) = &args.shots {
        train.shots = parse_shots(s)?;
    }
    if let Some(seed) = args.seed {
        train.seed = seed;
    }
    if let Some(iters) = args.iters {
        train.iterations = iters;
    }
    if let Some(lr) = args.lr {
        train.learning_rate = lr;
    }
    Ok(train.validate()?)
}

fn finish(stdout: &mut dyn Write, out: &Artifacts) -> CliResult<i32> {
    for p in out.written() {
        writeln!(stdout, "wrote {}", p.display())?;
    }
    Ok(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub shots: Shots,
    pub seed: u64,
    pub params: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { shots: Shots::Exact, seed: 0, params: Vec::new() }
    }
}

pub fn resolve_simulate(
    file: Option<&Value>,
    params: Option<&Path>,
    shots: Option<&str>,
    seed: Option<u64>,
) -> CliResult<SimulateConfig> {
    let mut cfg = layer(&SimulateConfig::default(), file)?;
    if let Some(p) = params {
        cfg.params = load_params(p)?;
    }
    if let Some(s) = shots {
        cfg.shots = parse_shots(s)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn simulate(
    circuit: &Path,
    params: Option<&Path>,
    shots: Option<String>,
    seed: Option<u64>,
    io: &IoArgs,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let mut cfg = resolve_simulate(config_file(io)?.as_ref(), params, shots.as_deref(), seed)?;
    let (circuit, embedded) = load_circuit(circuit)?;
    fill_params(&mut cfg.params, embedded);
    let state = circuit.run(&cfg.params, None)?;
    let record = state.sample(cfg.shots, cfg.seed)?;
    let mut out = Artifacts::new(resolve_out_dir(io.out.as_deref()), "simulate", &cfg)?;
    out.csv("histogram.csv", &histogram_csv(&record.probabilities, circuit.num_qubits()))?;
    out.json(
        "summary.json",
        json!({ "num_qubits": circuit.num_qubits(), "param_count": circuit.param_count(), "measurement": record }),
    )?;
    finish(stdout, &out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompileConfig {
    pub verify: bool,
}

fn compile(input: &Path, verify: bool, io: &IoArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = layer(&CompileConfig::default(), config_file(io)?.as_ref())?;
    cfg.verify |= verify;
    let iqp: IqpCircuit = serde_json::from_str(&read_input(input)?)
        .map_err(|e| CliError::validation(format!("{}: not an IQP circuit: {e}", input.display())))?;
    iqp.validate()?;
    let schedule = compile_iqp(&iqp)?;
    let check = if cfg.verify { Some(verify_schedule(&iqp, &schedule)?) } else { None };
    let mpqc = schedule.circuit()?;
    let mut out = Artifacts::new(resolve_out_dir(io.out.as_deref()), "compile-iqp", &cfg)?;
    writeln!(stdout, "blocks {} (budget {})", schedule.len(), block_budget(&iqp))?;
    if let Some(c) = &check {
        writeln!(stdout, "fidelity {:.15} max_prob_diff {:.3e}", c.fidelity, c.max_prob_diff)?;
    }
    out.json(
        "schedule.json",
        json!({
            "input": iqp,
            "block_count": schedule.len(),
            "block_budget": block_budget(&iqp),
            "layout": schedule.describe(),
            "schedule": schedule,
            "check": check,
        }),
    )?;
    let circuit_value: Value = serde_json::from_str(&mpqc.to_json()?).map_err(|e| CliError::runtime(e.to_string()))?;
    out.json("mpqc_circuit.json", json!({ "circuit": circuit_value, "params": schedule.params() }))?;
    if let Some(c) = check {
        if c.fidelity < 1.0 - 1e-9 {
            return Err(CliError::runtime(format!("compiled schedule fidelity {} below 1 - 1e-9", c.fidelity)));
        }
    }
    finish(stdout, &out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub params: Vec<f64>,
    pub max_bond: Option<usize>,
    pub hard_cap: Option<usize>,
}

fn entropy(
    circuit: &Path,
    params: Option<&Path>,
    max_bond: Option<usize>,
    hard_cap: Option<usize>,
    io: &IoArgs,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let mut cfg = layer(&EntropyConfig::default(), config_file(io)?.as_ref())?;
    if let Some(p) = params {
        cfg.params = load_params(p)?;
    }
    cfg.max_bond = max_bond.or(cfg.max_bond);
    cfg.hard_cap = hard_cap.or(cfg.hard_cap);
    let (circuit, embedded) = load_circuit(circuit)?;
    fill_params(&mut cfg.params, embedded);
    let run = run_circuit_mps(&circuit, &cfg.params, MpsOptions { max_bond: cfg.max_bond, hard_cap: cfg.hard_cap })?;
    let n = circuit.num_qubits();
    let entropies = (0..n.saturating_sub(1)).map(|c| run.state.entanglement_entropy(c)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Artifacts::new(resolve_out_dir(io.out.as_deref()), "entropy-analyze", &cfg)?;
    out.csv("trace.csv", &trace_csv(&run.trace))?;
    out.json(
        "summary.json",
        json!({
            "num_qubits": n,
            "bond_dims": run.state.bond_dims(),
            "entropies": entropies,
            "crossings": run.crossings,
            "discarded_weight": run.state.discarded_weight(),
            "entropy_bound_violations": run.entropy_bound_violations(1e-9),
            "trace": run.trace,
        }),
    )?;
    writeln!(stdout, "max bond {}", run.state.bond_dims().into_iter().max().unwrap_or(1))?;
    finish(stdout, &out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasRunConfig {
    pub size: String,
    #[serde(flatten)]
    pub bas: BasConfig,
}

pub fn resolve_bas(mut file: Option<Value>, size: Option<&str>, args: &TrainArgs) -> CliResult<BasRunConfig> {
    let file_size = take_key(&mut file, "size");
    let size = match (size, &file_size) {
        (Some(s), _) => s.to_string(),
        (None, Some(Value::String(s))) => s.clone(),
        (None, Some(other)) => return Err(CliError::validation(format!("config `size` must be a string, got {other}"))),
        (None, None) => "2x2".to_string(),
    };
    let (rows, cols) = parse_size(&size)?;
    let mut bas = layer(&BasConfig::new(rows, cols), file.as_ref())?;
    if (bas.rows, bas.cols) != (rows, cols) {
        return Err(CliError::validation(format!(
            "config rows/cols {}x{} disagree with size {size}; set the grid with `size`",
            bas.rows, bas.cols
        )));
    }
    apply_train_flags(&mut bas.train, args)?;
    bas.validate()?;
    Ok(BasRunConfig { size: format!("{rows}x{cols}"), bas })
}

fn train_bas(size: Option<String>, args: &TrainArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let cfg = resolve_bas(config_file(&args.io)?, size.as_deref(), args)?;
    let result = run_bas_experiment(&cfg.bas)?;
    let mut out = Artifacts::new(resolve_out_dir(args.io.out.as_deref()), "train-bas", &cfg)?;
    out.json("train_run.json", json!({ "run": result.run }))?;
    out.csv("loss.csv", &result.run.loss_csv())?;
    out.csv("histogram.csv", &histogram_csv(&result.run.q, result.dataset.num_pixels()))?;
    out.json(
        "summary.json",
        json!({
            "accuracy": result.report,
            "final_loss": result.run.final_loss,
            "num_images": result.dataset.count(),
            "num_params": result.run.params.len(),
            "assignment": result.assignment(),
            "one_to_one": result.is_one_to_one(),
            "joint": result.joint,
        }),
    )?;
    writeln!(stdout, "accuracy {:.6} ({} shots), final MMD {:.3e}", result.report.accuracy, result.report.shots, result.run.final_loss)?;
    finish(stdout, &out)
}

pub fn resolve_prior(file: Option<Value>, target: Option<f64>, mode: Option<&str>, args: &TrainArgs) -> CliResult<PriorConfig> {
    let mut cfg = layer(&PriorConfig::default(), file.as_ref())?;
    if let Some(t) = target {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::validation(format!("target must be in [0, 1], got {t}")));
        }
        cfg.spec.target = [t, 1.0 - t];
    }
    if let Some(m) = mode {
        cfg.spec.mode = parse_mode(m)?;
    }
    apply_train_flags(&mut cfg.train, args)?;
    cfg.validate()?;
    Ok(cfg)
}

fn train_prior(target: Option<f64>, mode: Option<String>, args: &TrainArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let cfg = resolve_prior(config_file(&args.io)?, target, mode.as_deref(), args)?;
    let result = run_prior_experiment(&cfg)?;
    let spec: &PriorExperimentSpec = &cfg.spec;
    let mut out = Artifacts::new(resolve_out_dir(args.io.out.as_deref()), "train-prior", &cfg)?;
    out.json("train_runs.json", json!({ "restarts": result.restarts }))?;
    let mut loss = String::from("iteration");
    for r in 0..result.restarts.len() {
        loss.push_str(&format!(",restart{r}"));
    }
    loss.push('\n');
    for i in 0..cfg.train.iterations {
        loss.push_str(&i.to_string());
        for r in &result.restarts {
            loss.push_str(&format!(",{}", r.run.loss[i]));
        }
        loss.push('\n');
    }
    out.csv("loss.csv", &loss)?;
    let target_dist = spec.target_distribution();
    let mut hist = String::from("index,target,model\n");
    for (i, (p, q)) in target_dist.iter().zip(&result.restarts[0].run.q).enumerate() {
        hist.push_str(&format!("{i},{p},{q}\n"));
    }
    out.csv("histogram.csv", &hist)?;
    out.json(
        "summary.json",
        json!({
            "target": spec.target,
            "learned": result.restarts.iter().map(|r| r.learned).collect::<Vec<_>>(),
            "mean": result.mean,
            "variance": result.variance,
            "fit_loss": result.fit_loss,
        }),
    )?;
    writeln!(stdout, "learned p(lambda1) {:.6} (variance {:.3e})", result.mean[0], result.variance)?;
    finish(stdout, &out)
}

pub fn resolve_toy(file: Option<Value>, n: Option<usize>, args: &TrainArgs) -> CliResult<ToyConfig> {
    let mut file = file;
    let file_n = take_key(&mut file, "num_qubits");
    let n = match (n, file_n) {
        (Some(n), _) => n,
        (None, Some(v)) => v.as_u64().ok_or_else(|| CliError::validation("config `num_qubits` must be an integer"))? as usize,
        (None, None) => 4,
    };
    let mut cfg = layer(&ToyConfig::new(n), file.as_ref())?;
    apply_train_flags(&mut cfg.train, args)?;
    Ok(cfg)
}

fn toy(n: Option<usize>, args: &TrainArgs, stdout: &mut dyn Write) -> CliResult<i32> {
    let cfg = resolve_toy(config_file(&args.io)?, n, args)?;
    let report = run_thm3_toy(&cfg)?;
    let q = pqc_core::circuit::build_toy_thm3(cfg.num_qubits)?.run(&[], None)?.probabilities();
    let mut out = Artifacts::new(resolve_out_dir(args.io.out.as_deref()), "toy-thm3", &cfg)?;
    out.csv("histogram.csv", &histogram_csv(&q, cfg.num_qubits))?;
    out.json("summary.json", json!({ "report": report }))?;
    writeln!(stdout, "p({}) = {}; chain fit reached {:.6}", report.target, report.probability, report.chain_fit.probability)?;
    finish(stdout, &out)
}

/// Output directory chosen for `io`.
pub fn out_dir(io: &IoArgs) -> PathBuf {
    resolve_out_dir(io.out.as_deref())
}
