//! Command-line front end. Every command prints one flat JSON object that
//! echoes its inputs.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use shuffledp::amplification::{
    amplify, invert_amplification, optimal_dprime, peos_eps, peos_var, plan_parameters, var_grr,
    var_solh, var_ue,
};
use shuffledp::crypto::{paillier_keygen, Ahe, IdentityAhe, Ring};
use shuffledp::mechanisms::{
    AueConfig, FrequencyVector, GrrConfig, Mechanism, MechanismTag, SolhConfig, UeConfig,
};
use shuffledp::protocol::{
    bytes_by_party, extract_view, peos_run, sequential_run, shuffle_only, AdversaryModel,
    PeosConfig,
};
use shuffledp::rng::stream;
use shuffledp::shuffle::{write_jsonl, PartyId};
use shuffledp::treehist::{f1_score, treehist_run, TreeHistConfig, TreeHistMode};
use shuffledp::PlanTargets;

use crate::data::{gen_zipf, ingest_csv, planted_heavy, read_u64_lines, Dataset};
use crate::error::{CliError, Result};
use crate::experiment::{run_experiment, write_outputs, ExperimentSpec, DEFAULT_DELTA};
use crate::metrics::mse;
use crate::overhead::{simulate_overhead, sized_double};

#[derive(Debug, Parser)]
#[command(
    name = "shuffledp",
    version,
    about = "Shuffle-model frequency estimation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Perturb a dataset locally and aggregate the reports.
    Mechanism(MechanismArgs),
    /// Amplification bound, or the local budget reaching a central target.
    Amplify(AmplifyArgs),
    /// Choose mechanism, local budget, fake count and hash range.
    Plan(PlanArgs),
    /// Run a shuffle pipeline end to end.
    Simulate(SimulateArgs),
    /// Heavy-hitter discovery over a prefix tree.
    Treehist(TreehistArgs),
    /// Run an experiment grid from a TOML spec.
    Experiment(ExperimentArgs),
    /// Communication of one protocol run.
    Overhead(OverheadArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    Grr,
    Solh,
    Ue,
    Aue,
}

impl From<MechanismArg> for MechanismTag {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Grr => MechanismTag::Grr,
            MechanismArg::Solh => MechanismTag::Solh,
            MechanismArg::Ue => MechanismTag::Ue,
            MechanismArg::Aue => MechanismTag::Aue,
        }
    }
}

/// Dataset: a CSV file, or a Zipf sample when no file is given.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// One value token per line, optional `value` header.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 1.1)]
    pub zipf: f64,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Dataset> {
        match &self.input {
            Some(p) => ingest_csv(p),
            None => Ok(Dataset {
                values: gen_zipf(self.n, self.d, self.zipf, seed)?,
                labels: (0..self.d).map(|i| i.to_string()).collect(),
            }),
        }
    }

    fn echo(&self, out: &mut Map<String, Value>) {
        match &self.input {
            Some(p) => {
                out.insert("input".into(), json!(p));
            }
            None => {
                out.insert("zipf".into(), json!(self.zipf));
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MechanismArgs {
    #[arg(long, value_enum)]
    pub mechanism: MechanismArg,
    /// Local budget (GRR, SOLH, UE).
    #[arg(long)]
    pub eps_l: Option<f64>,
    /// Central budget (AUE).
    #[arg(long)]
    pub eps_c: Option<f64>,
    #[arg(long)]
    pub d_prime: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AmplifyArgs {
    #[arg(long, value_enum)]
    pub mechanism: MechanismArg,
    /// Local budget to amplify.
    #[arg(long, conflicts_with = "eps_c")]
    pub eps_l: Option<f64>,
    /// Central target to invert.
    #[arg(long)]
    pub eps_c: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// SOLH hash range; defaults to the variance-optimal one.
    #[arg(long)]
    pub d_prime: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Fake reports added by the shufflers.
    #[arg(long, default_value_t = 0)]
    pub n_r: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Target against the server.
    #[arg(long)]
    pub eps_c: f64,
    /// Target against the server colluding with other users.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub eps_users: f64,
    /// Target against the server colluding with a minority of shufflers.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub eps_aux: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    /// Secret-shared oblivious shuffle with fake reports.
    Peos,
    /// Sequential onion-encrypted shuffle.
    Ss,
    /// A single trusted shuffler.
    Os,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViewArg {
    Server,
    ServerPlusUsers,
    ServerPlusShufflers,
}

impl From<ViewArg> for AdversaryModel {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Server => AdversaryModel::Server,
            ViewArg::ServerPlusUsers => AdversaryModel::ServerPlusUsers,
            ViewArg::ServerPlusShufflers => AdversaryModel::ServerPlusShufflers,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "peos")]
    pub protocol: Protocol,
    #[arg(long, value_enum, default_value = "solh")]
    pub mechanism: MechanismArg,
    #[arg(long)]
    pub eps_l: f64,
    #[arg(long)]
    pub d_prime: Option<u32>,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub n_r: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Paillier modulus size; 0 uses the insecure encryption double.
    #[arg(long, default_value_t = 0)]
    pub paillier_bits: u64,
    /// Write the message transcript as JSON lines.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Write the view of this coalition as JSON lines.
    #[arg(long, value_enum, requires = "view_output")]
    pub view: Option<ViewArg>,
    #[arg(long)]
    pub view_output: Option<PathBuf>,
    /// Corrupted parties, e.g. `shuffler:1,user:4`.
    #[arg(long, value_delimiter = ',')]
    pub corrupt: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Shuffler,
    Ldp,
    NonInteractive,
}

#[derive(Debug, Clone, Args)]
pub struct TreehistArgs {
    /// One integer per line; without it a planted dataset is generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    #[arg(long, default_value_t = 8)]
    pub step: u32,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long)]
    pub eps_c: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "shuffler")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "solh")]
    pub mechanism: MechanismArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// TOML spec file.
    pub spec: PathBuf,
    /// Output directory; overrides the spec.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Repetitions; overrides the spec.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Seed; overrides the spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OverheadArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub n_r: usize,
    /// Paillier modulus size. The run itself uses real Paillier only with
    /// `--real-keys`; otherwise a double of the same ciphertext size.
    #[arg(long, default_value_t = 2048)]
    pub paillier_bits: u64,
    #[arg(long)]
    pub real_keys: bool,
    /// Report wall time (makes output vary between runs).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Executes a command and returns the JSON it prints.
pub fn execute(command: &Command) -> Result<Value> {
    match command {
        Command::Mechanism(a) => mechanism(a),
        Command::Amplify(a) => amplify_cmd(a),
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
        Command::Treehist(a) => treehist(a),
        Command::Experiment(a) => experiment(a),
        Command::Overhead(a) => overhead(a),
    }
}

/// Prints or writes the command's JSON.
pub fn emit(value: &Value, output: Option<&PathBuf>) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string(value)?);
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn output_of(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Mechanism(a) => a.output.as_ref(),
        Command::Amplify(a) => a.output.as_ref(),
        Command::Plan(a) => a.output.as_ref(),
        Command::Simulate(a) => a.output.as_ref(),
        Command::Treehist(a) => a.output.as_ref(),
        // the experiment writes its own files and prints a summary
        Command::Experiment(_) => None,
        Command::Overhead(a) => a.output.as_ref(),
    }
}

fn object(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn need(v: Option<f64>, flag: &str) -> Result<f64> {
    v.ok_or_else(|| CliError::spec(format!("--{flag} is required here")))
}

/// Builds a local randomizer from command-line choices.
fn build_mechanism(
    tag: MechanismArg,
    eps_l: f64,
    d: usize,
    d_prime: Option<u32>,
) -> Result<Mechanism> {
    Ok(match tag {
        MechanismArg::Grr => Mechanism::Grr(GrrConfig::new(eps_l, d)?),
        MechanismArg::Solh => {
            let k = d_prime
                .unwrap_or_else(|| (eps_l.exp() + 1.0).round().clamp(2.0, u32::MAX as f64) as u32);
            Mechanism::Solh(SolhConfig::new(eps_l, d, k)?)
        }
        MechanismArg::Ue => Mechanism::Ue(UeConfig::new(eps_l, d)?),
        MechanismArg::Aue => return Err(CliError::spec("AUE is configured from --eps-c")),
    })
}

fn mechanism(a: &MechanismArgs) -> Result<Value> {
    let data = a.data.load(a.seed)?;
    let (n, d) = (data.values.len(), data.d());
    let mech = match a.mechanism {
        MechanismArg::Aue => {
            Mechanism::Aue(AueConfig::new(need(a.eps_c, "eps-c")?, n, a.delta, d)?)
        }
        m => build_mechanism(m, need(a.eps_l, "eps-l")?, d, a.d_prime)?,
    };
    let mut rng = stream(a.seed, "mechanism");
    let estimate = shuffle_only(&data.values, &mech, &mut rng)?;
    let truth = FrequencyVector::histogram(&data.values, d);
    let mut out = object(json!({
        "command": "mechanism",
        "mechanism": mech.tag(),
        "eps_l": a.eps_l,
        "eps_c": a.eps_c,
        "d_prime": match &mech { Mechanism::Solh(c) => Some(c.d_prime()), _ => None },
        "delta": a.delta,
        "n": n,
        "d": d,
        "seed": a.seed,
        "mse": mse(&truth, &estimate)?,
        "labels": data.labels,
        "estimate": estimate.0,
    }));
    a.data.echo(&mut out);
    Ok(Value::Object(out))
}

fn amplify_cmd(a: &AmplifyArgs) -> Result<Value> {
    let tag: MechanismTag = a.mechanism.into();
    if tag == MechanismTag::Aue {
        return Err(CliError::spec("AUE has no local budget to amplify"));
    }
    let range = |eps_c: Option<f64>| -> Result<usize> {
        Ok(match tag {
            MechanismTag::Solh => match (a.d_prime, eps_c) {
                (Some(k), _) => k as usize,
                (None, Some(e)) => optimal_dprime(e, a.n, a.delta)? as usize,
                (None, None) => {
                    return Err(CliError::spec(
                        "SOLH needs --d-prime when amplifying a local budget",
                    ))
                }
            },
            _ => a.d,
        })
    };
    let mut out = object(json!({
        "command": "amplify",
        "mechanism": tag,
        "n": a.n,
        "d": a.d,
        "delta": a.delta,
        "n_r": a.n_r,
    }));
    let (eps_l, k) = match (a.eps_l, a.eps_c) {
        (Some(e), _) => {
            let k = range(None)?;
            let amp = amplify(tag, e, a.n, k, a.delta)?;
            out.insert("eps_l".into(), json!(e));
            out.insert("eps_c".into(), json!(amp.epsilon_c));
            out.insert("effective".into(), json!(amp.effective));
            out.insert("amplified".into(), json!(amp.amplified));
            (e, k)
        }
        (None, Some(c)) => {
            let k = range(Some(c))?;
            let e = invert_amplification(tag, c, a.n, k, a.delta)?;
            out.insert("eps_c".into(), json!(c));
            out.insert("eps_l".into(), json!(e));
            let v = match tag {
                MechanismTag::Grr => var_grr(c, a.n, a.d, a.delta)?,
                MechanismTag::Solh => var_solh(c, a.n, k as u32, a.delta)?,
                _ => var_ue(c, a.n, a.delta)?,
            };
            out.insert("variance".into(), json!(v.variance));
            (e, k)
        }
        (None, None) => return Err(CliError::spec("give --eps-l or --eps-c")),
    };
    if tag == MechanismTag::Solh {
        out.insert("d_prime".into(), json!(k));
    }
    if a.n_r > 0 && matches!(tag, MechanismTag::Grr | MechanismTag::Solh) {
        let p = peos_eps(tag, eps_l, a.n, a.n_r, k, a.delta)?;
        out.insert("peos_eps_c".into(), json!(p.epsilon_c));
        out.insert("peos_eps_s".into(), json!(p.epsilon_s));
        out.insert(
            "peos_variance".into(),
            json!(peos_var(tag, eps_l, a.n, a.n_r, k, a.delta)?.variance),
        );
    }
    Ok(Value::Object(out))
}

fn plan(a: &PlanArgs) -> Result<Value> {
    let targets = PlanTargets {
        eps_server: a.eps_c,
        eps_users: a.eps_users,
        eps_aux: a.eps_aux,
    };
    let p = plan_parameters(targets, a.n, a.d, a.delta)?;
    Ok(json!({
        "command": "plan",
        "eps_c": a.eps_c,
        "eps_users": a.eps_users.is_finite().then_some(a.eps_users),
        "eps_aux": a.eps_aux.is_finite().then_some(a.eps_aux),
        "n": a.n,
        "d": a.d,
        "delta": a.delta,
        "mechanism": p.mechanism,
        "eps_l": p.epsilon_l,
        "n_r": p.n_r,
        "d_prime": p.d_prime,
        "variance": p.variance,
        "achieved_eps_c": p.achieved.epsilon_c,
        "achieved_eps_s": p.achieved.epsilon_s,
        "achieved_eps_l": p.achieved.epsilon_l,
    }))
}

fn parse_parties(list: &[String]) -> Result<Vec<PartyId>> {
    list.iter()
        .map(|s| s.parse::<PartyId>().map_err(CliError::from))
        .collect()
}

fn simulate(a: &SimulateArgs) -> Result<Value> {
    let data = a.data.load(a.seed)?;
    let (n, d) = (data.values.len(), data.d());
    let mech = build_mechanism(a.mechanism, a.eps_l, d, a.d_prime)?;
    let truth = FrequencyVector::histogram(&data.values, d);
    let mut out = object(json!({
        "command": "simulate",
        "protocol": format!("{:?}", a.protocol).to_lowercase(),
        "mechanism": mech.tag(),
        "eps_l": a.eps_l,
        "d_prime": match &mech { Mechanism::Solh(c) => Some(c.d_prime()), _ => None },
        "r": a.r,
        "n_r": a.n_r,
        "n": n,
        "d": d,
        "seed": a.seed,
    }));
    a.data.echo(&mut out);
    let (estimate, records) = match a.protocol {
        Protocol::Os => (
            shuffle_only(&data.values, &mech, &mut stream(a.seed, "trusted-shuffler"))?,
            Vec::new(),
        ),
        Protocol::Ss => sequential_run(&data.values, &mech, a.r, a.n_r, a.seed)?,
        Protocol::Peos => {
            let cfg = PeosConfig::new(mech.clone(), a.r, a.n_r, a.seed)?;
            let run = if a.paillier_bits == 0 {
                peos_run(&data.values, &cfg, &IdentityAhe::new(cfg.ring), &())?
            } else {
                let (pk, sk) =
                    paillier_keygen(a.paillier_bits, cfg.ring, &mut stream(a.seed, "paillier"))?;
                peos_run(&data.values, &cfg, &pk, &sk)?
            };
            if let (Some(model), Some(path)) = (a.view, &a.view_output) {
                let view =
                    extract_view(&run.transcript, model.into(), &parse_parties(&a.corrupt)?)?;
                let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
                view.write_jsonl(std::io::BufWriter::new(file))
                    .map_err(|e| CliError::io(path, e))?;
                out.insert("view".into(), json!(AdversaryModel::from(model)));
                out.insert("degraded".into(), json!(view.degraded));
            }
            out.insert(
                "shuffle_rounds".into(),
                json!(run.transcript.shuffle_rounds()),
            );
            (run.estimate, run.transcript.records)
        }
    };
    if let Some(path) = &a.transcript {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_jsonl(&records, std::io::BufWriter::new(file)).map_err(|e| CliError::io(path, e))?;
    }
    let bytes: u64 = bytes_by_party(&records).values().sum();
    out.insert("total_bytes".into(), json!(bytes));
    out.insert("mse".into(), json!(mse(&truth, &estimate)?));
    out.insert("estimate".into(), json!(estimate.0));
    Ok(Value::Object(out))
}

fn treehist(a: &TreehistArgs) -> Result<Value> {
    let (values, truth) = match &a.input {
        Some(p) => (read_u64_lines(p)?, None),
        None => {
            let (v, h) = planted_heavy(a.n, a.bits, a.k, 0.8, 1.1, a.seed)?;
            (v, Some(h))
        }
    };
    let mut cfg = TreeHistConfig::new(a.bits, a.step, a.k, a.eps_c, a.delta)?;
    cfg.mode = match a.mode {
        ModeArg::Shuffler => TreeHistMode::Shuffler,
        ModeArg::Ldp => TreeHistMode::Ldp,
        ModeArg::NonInteractive => TreeHistMode::NonInteractive,
    };
    cfg.estimator = a.mechanism.into();
    let result = treehist_run(&values, &cfg, &mut stream(a.seed, "treehist"))?;
    let found: Vec<u64> = result.heavy_hitters.iter().map(|c| c.prefix).collect();
    let mut out = object(json!({
        "command": "treehist",
        "n": values.len(),
        "bits": a.bits,
        "step": a.step,
        "k": a.k,
        "eps_c": a.eps_c,
        "delta": a.delta,
        "mode": cfg.mode,
        "mechanism": cfg.estimator,
        "seed": a.seed,
        "short": result.short,
        "rounds": result.rounds.len(),
        "heavy_hitters": found,
        "estimates": result.heavy_hitters.iter().map(|c| c.estimate).collect::<Vec<_>>(),
    }));
    match (&a.input, truth) {
        (Some(p), _) => {
            out.insert("input".into(), json!(p));
        }
        (None, Some(h)) => {
            out.insert("f1".into(), json!(f1_score(&found, &h)));
        }
        _ => {}
    }
    Ok(Value::Object(out))
}

fn experiment(a: &ExperimentArgs) -> Result<Value> {
    let mut spec = ExperimentSpec::from_file(&a.spec)?;
    if let Some(o) = &a.output {
        spec.output = Some(o.clone());
    }
    if let Some(r) = a.reps {
        spec.repetitions = r;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let records = run_experiment(&spec)?;
    let dir = spec.output.clone().unwrap_or_else(|| PathBuf::from("."));
    write_outputs(&records, &dir)?;
    let skipped = records.iter().filter(|r| r.skipped.is_some()).count();
    Ok(json!({
        "command": "experiment",
        "spec": a.spec,
        "output": dir,
        "repetitions": spec.repetitions,
        "seed": spec.seed,
        "records": records.len(),
        "skipped": skipped,
    }))
}

fn overhead(a: &OverheadArgs) -> Result<Value> {
    let report = if a.real_keys {
        let ring = Ring::default();
        let (pk, sk) = paillier_keygen(a.paillier_bits, ring, &mut stream(a.seed, "paillier"))?;
        simulate_overhead(a.n, a.r, a.n_r, a.seed, &pk, &sk, a.timing)?
    } else {
        let double = sized_double(a.paillier_bits);
        debug_assert_eq!(double.ring(), Ring::default());
        simulate_overhead(a.n, a.r, a.n_r, a.seed, &double, &(), a.timing)?
    };
    let mut out = object(json!({
        "command": "overhead",
        "paillier_bits": a.paillier_bits,
        "real_keys": a.real_keys,
        "seed": a.seed,
    }));
    out.extend(object(serde_json::to_value(&report)?));
    Ok(Value::Object(out))
}
