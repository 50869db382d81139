//! Grid runner: every (method, eps_c, repetition) cell on one dataset.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shuffledp::amplification::{invert_amplification, optimal_dprime};
use shuffledp::mechanisms::{
    AueConfig, FrequencyVector, GrrConfig, Mechanism, MechanismTag, SolhConfig, UeConfig,
};
use shuffledp::rng::stream;

use crate::data::{gen_zipf, ingest_csv, Dataset};
use crate::error::{CliError, Result};
use crate::metrics::mse;

pub const DEFAULT_DELTA: f64 = 1e-9;

/// Estimation methods compared by the grid runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Always answers `1/d`.
    Base,
    /// GRR with shuffle amplification.
    Sh,
    /// SOLH with the variance-optimal hash range, capped at `d`.
    Solh,
    /// Local hashing without amplification, range `e^eps + 1` capped at `d`.
    Olh,
    /// Binary local hashing without amplification.
    Had,
    /// Unary encoding with shuffle amplification.
    Rap,
    /// Unary encoding under removal neighbours, equivalent to `Rap` at twice
    /// the budget.
    RapR,
    /// Appended unary encoding.
    Aue,
    /// Central Laplace noise on the exact histogram.
    Lap,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Base,
        Method::Sh,
        Method::Solh,
        Method::Olh,
        Method::Had,
        Method::Rap,
        Method::RapR,
        Method::Aue,
        Method::Lap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Base => "base",
            Method::Sh => "sh",
            Method::Solh => "solh",
            Method::Olh => "olh",
            Method::Had => "had",
            Method::Rap => "rap",
            Method::RapR => "rap_r",
            Method::Aue => "aue",
            Method::Lap => "lap",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        if key == "grr" {
            return Ok(Method::Sh);
        }
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| CliError::spec(format!("unknown method {s:?}")))
    }
}

/// Where the values come from. CSV paths are relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Zipf {
        n: usize,
        d: usize,
        exponent: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Zipf {
                n,
                d,
                exponent,
                seed,
            } => Ok(Dataset {
                values: gen_zipf(*n, *d, *exponent, *seed)?,
                labels: (0..*d).map(|i| i.to_string()).collect(),
            }),
            DatasetSpec::Csv { path } => ingest_csv(path),
        }
    }
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_reps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub methods: Vec<String>,
    pub eps_c: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    /// Fixed local budget for the local randomizers, bypassing amplification.
    #[serde(default)]
    pub eps_l: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory for `results.jsonl` and `summary.csv`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Wall times make outputs differ between runs, so they are opt-in.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| CliError::spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec file and resolves relative paths against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DatasetSpec::Csv { path: p } = &mut spec.dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut spec.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(CliError::spec("repetitions must be at least 1"));
        }
        if self.methods.is_empty() || self.eps_c.is_empty() {
            return Err(CliError::spec("need at least one method and one eps_c"));
        }
        self.parsed_methods()?;
        if let Some(e) = self.eps_c.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(CliError::spec(format!(
                "eps_c values must be positive, got {e}"
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::spec(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if matches!(self.eps_l, Some(e) if e.is_nan() || e <= 0.0) {
            return Err(CliError::spec("eps_l must be positive"));
        }
        Ok(())
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }
}

/// What a method runs at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Uniform,
    Local { mechanism: Mechanism, eps_l: f64 },
    Laplace { scale: f64 },
}

/// Local budget that amplifies to `target`, or `target` itself when shuffling
/// brings no gain.
fn amplified_local(tag: MechanismTag, target: f64, n: usize, k: usize, delta: f64) -> f64 {
    invert_amplification(tag, target, n, k, delta).map_or(target, |e| e.max(target))
}

/// Configures `method` at central budget `eps_c`. An `Err` is the reason the
/// cell is skipped.
pub fn resolve(
    method: Method,
    eps_c: f64,
    n: usize,
    d: usize,
    delta: f64,
    eps_l: Option<f64>,
) -> std::result::Result<Resolved, String> {
    let local = |m: std::result::Result<Mechanism, shuffledp::Error>, e: f64| {
        m.map(|mechanism| Resolved::Local {
            mechanism,
            eps_l: e,
        })
        .map_err(|e| e.to_string())
    };
    match method {
        Method::Base => Ok(Resolved::Uniform),
        Method::Lap => Ok(Resolved::Laplace {
            scale: 2.0 / (eps_c * n as f64),
        }),
        Method::Sh => {
            let e = eps_l.unwrap_or_else(|| amplified_local(MechanismTag::Grr, eps_c, n, d, delta));
            local(GrrConfig::new(e, d).map(Mechanism::Grr), e)
        }
        Method::Solh => {
            let k = optimal_dprime(eps_c, n, delta)
                .map_err(|e| e.to_string())?
                .min(d as u32);
            let e = match eps_l {
                Some(e) => e,
                None => invert_amplification(MechanismTag::Solh, eps_c, n, k as usize, delta)
                    .map_err(|e| e.to_string())?
                    .max(eps_c),
            };
            local(SolhConfig::new(e, d, k).map(Mechanism::Solh), e)
        }
        Method::Olh | Method::Had => {
            let e = eps_l.unwrap_or(eps_c);
            let k = match method {
                Method::Had => 2,
                _ => (e.exp() + 1.0).round().clamp(2.0, d as f64) as u32,
            };
            local(SolhConfig::new(e, d, k).map(Mechanism::Solh), e)
        }
        Method::Rap | Method::RapR => {
            let target = if method == Method::RapR {
                2.0 * eps_c
            } else {
                eps_c
            };
            let e = eps_l.unwrap_or_else(|| amplified_local(MechanismTag::Ue, target, n, d, delta));
            local(UeConfig::new(e, d).map(Mechanism::Ue), e)
        }
        Method::Aue => local(
            AueConfig::new(eps_c, n, delta, d).map(Mechanism::Aue),
            f64::INFINITY,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: Method,
    pub eps_c: f64,
    pub repetition: usize,
    /// `None` for skipped cells.
    pub mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    /// Mean encoded report size; absent for central methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes_per_user: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Seed label of one repetition.
pub fn cell_label(method: Method, eps_c: f64, rep: usize) -> String {
    format!("{method}/{eps_c}/{rep}")
}

pub fn estimate_digest(f: &FrequencyVector) -> String {
    let mut h = Sha256::new();
    for x in &f.0 {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

struct Run {
    estimate: FrequencyVector,
    bytes_per_user: Option<f64>,
}

fn execute<R: Rng>(
    resolved: &Resolved,
    values: &[usize],
    d: usize,
    rng: &mut R,
) -> shuffledp::Result<Run> {
    let n = values.len();
    match resolved {
        Resolved::Uniform => Ok(Run {
            estimate: FrequencyVector(vec![1.0 / d as f64; d]),
            bytes_per_user: None,
        }),
        Resolved::Laplace { scale } => {
            let mut f = FrequencyVector::histogram(values, d);
            for x in &mut f.0 {
                let noise: f64 = rng.sample::<f64, _>(Exp1) - rng.sample::<f64, _>(Exp1);
                *x += scale * noise;
            }
            Ok(Run {
                estimate: f,
                bytes_per_user: None,
            })
        }
        Resolved::Local { mechanism, .. } => {
            let mut reports = values
                .iter()
                .map(|&v| mechanism.perturb(v, rng))
                .collect::<shuffledp::Result<Vec<_>>>()?;
            let bytes = reports.iter().map(|r| r.encode().len() as f64).sum::<f64>() / n as f64;
            reports.shuffle(rng);
            Ok(Run {
                estimate: mechanism.aggregate(&reports)?,
                bytes_per_user: Some(bytes),
            })
        }
    }
}

/// Runs the full grid. Cells run in parallel; the returned order is
/// method, then eps_c, then repetition, as listed in the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let data = spec.dataset.load()?;
    run_on(spec, &data)
}

/// [`run_experiment`] on an already loaded dataset.
pub fn run_on(spec: &ExperimentSpec, data: &Dataset) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let (n, d) = (data.values.len(), data.d());
    if d < 2 {
        return Err(CliError::spec("dataset needs at least 2 distinct values"));
    }
    let truth = FrequencyVector::histogram(&data.values, d);
    let mut cells = Vec::new();
    for m in spec.parsed_methods()? {
        for &eps in &spec.eps_c {
            let resolved = resolve(m, eps, n, d, spec.delta, spec.eps_l);
            for rep in 0..spec.repetitions {
                cells.push((m, eps, rep, resolved.clone()));
            }
        }
    }
    cells
        .par_iter()
        .map(|(method, eps_c, rep, resolved)| {
            let skip = |reason: String| ResultRecord {
                method: *method,
                eps_c: *eps_c,
                repetition: *rep,
                mse: None,
                eps_l: None,
                estimate_digest: None,
                wall_time_ms: None,
                bytes_per_user: None,
                skipped: Some(reason),
            };
            let resolved = match resolved {
                Ok(r) => r,
                Err(reason) => return Ok(skip(reason.clone())),
            };
            let mut rng = stream(spec.seed, &cell_label(*method, *eps_c, *rep));
            let start = Instant::now();
            let run = match execute(resolved, &data.values, d, &mut rng) {
                Ok(run) => run,
                Err(e) => return Ok(skip(e.to_string())),
            };
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            Ok(ResultRecord {
                method: *method,
                eps_c: *eps_c,
                repetition: *rep,
                mse: Some(mse(&truth, &run.estimate)?),
                eps_l: match resolved {
                    Resolved::Local { eps_l, .. } if eps_l.is_finite() => Some(*eps_l),
                    _ => None,
                },
                estimate_digest: Some(estimate_digest(&run.estimate)),
                wall_time_ms: spec.record_timing.then_some(elapsed),
                bytes_per_user: run.bytes_per_user,
                skipped: None,
            })
        })
        .collect()
}

/// Mean and sample standard deviation of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub eps_c: f64,
    pub repetitions: usize,
    pub mse_mean: Option<f64>,
    pub mse_std: Option<f64>,
    pub skipped: Option<String>,
}

pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&ResultRecord>> = Vec::new();
    for r in records {
        match rows
            .iter()
            .position(|s| s.method == r.method && s.eps_c == r.eps_c)
        {
            Some(i) => groups[i].push(r),
            None => {
                rows.push(SummaryRow {
                    method: r.method,
                    eps_c: r.eps_c,
                    repetitions: 0,
                    mse_mean: None,
                    mse_std: None,
                    skipped: None,
                });
                groups.push(vec![r]);
            }
        }
    }
    for (row, group) in rows.iter_mut().zip(groups) {
        row.repetitions = group.len();
        let vals: Vec<f64> = group.iter().filter_map(|r| r.mse).collect();
        if vals.is_empty() {
            row.skipped = group.iter().find_map(|r| r.skipped.clone());
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        row.mse_mean = Some(mean);
        row.mse_std = Some(std);
    }
    rows
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_results(records: &[ResultRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_summary(rows: &[SummaryRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "method,eps_c,repetitions,mse_mean,mse_std,skipped")?;
    let num = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.eps_c,
            r.repetitions,
            num(r.mse_mean),
            num(r.mse_std),
            csv_field(r.skipped.as_deref().unwrap_or(""))
        )?;
    }
    Ok(())
}

/// Writes `results.jsonl` and `summary.csv` into `dir`.
pub fn write_outputs(records: &[ResultRecord], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let results = dir.join("results.jsonl");
    write_file(&results, |w| write_results(records, w))?;
    let summary = dir.join("summary.csv");
    write_file(&summary, |w| write_summary(&summarize(records), w))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}
