//! End-to-end protocol: local randomization, secret-shared upload with one
//! encrypted share, fake reports from the shufflers, the encrypted oblivious
//! shuffle, and debiased estimation at the server.

mod audit;
mod codec;
mod views;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use audit::{
    chi_square_uniform, multiset_distribution, poisoning_resistance_check, privacy_loss_oracle,
    PoisoningReport, ORACLE_LIMIT,
};
pub use codec::ReportCodec;
pub use views::{extract_view, AdversaryModel, AdversaryView};

use crate::crypto::{share, Ahe, Ring};
use crate::error::{Error, Result};
use crate::mechanisms::{FrequencyVector, Mechanism, Report};
use crate::rng::{derive_seed, stream};
use crate::shuffle::{
    deliver, run, Column, MessageKind, Network, PartyId, ShuffleConfig, ShuffleState, Tapes,
    TranscriptRecord,
};

/// How a shuffler produces its shares of the fake reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShufflerBehavior {
    Honest,
    /// Emits the same residue for every fake share.
    ConstantShare(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recording {
    Off,
    Digests,
    Payloads,
}

#[derive(Debug, Clone)]
pub struct PeosConfig {
    pub mechanism: Mechanism,
    pub r: usize,
    pub n_r: usize,
    pub ring: Ring,
    /// Master seed; every party's tape is derived from it.
    pub seed: u64,
    pub recording: Recording,
    /// One entry per shuffler; empty means all honest.
    pub behaviors: Vec<ShufflerBehavior>,
}

impl PeosConfig {
    pub fn new(mechanism: Mechanism, r: usize, n_r: usize, seed: u64) -> Result<Self> {
        let cfg = PeosConfig {
            mechanism,
            r,
            n_r,
            ring: Ring::default(),
            seed,
            recording: Recording::Digests,
            behaviors: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_ring(mut self, ring: Ring) -> Result<Self> {
        self.ring = ring;
        self.validate()?;
        Ok(self)
    }

    pub fn with_recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn with_behaviors(mut self, behaviors: Vec<ShufflerBehavior>) -> Result<Self> {
        self.behaviors = behaviors;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ShuffleConfig::new(self.r, self.ring)?;
        ReportCodec::new(&self.mechanism, self.ring)?;
        if !self.behaviors.is_empty() && self.behaviors.len() != self.r {
            return Err(Error::config("need one behavior per shuffler"));
        }
        Ok(())
    }

    pub fn codec(&self) -> Result<ReportCodec> {
        ReportCodec::new(&self.mechanism, self.ring)
    }

    fn behavior(&self, j: usize) -> ShufflerBehavior {
        self.behaviors
            .get(j)
            .copied()
            .unwrap_or(ShufflerBehavior::Honest)
    }
}

/// Labels of the per-party random tapes.
pub fn tape_label(party: PartyId, purpose: &str) -> String {
    format!("{party}/{purpose}")
}

fn tape(cfg: &PeosConfig, party: PartyId, purpose: &str) -> ChaCha20Rng {
    stream(cfg.seed, &tape_label(party, purpose))
}

/// A commitment to one party's random tape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapeDigest {
    pub party: PartyId,
    pub label: String,
    pub digest: String,
}

fn tape_digest(cfg: &PeosConfig, party: PartyId, purpose: &str) -> TapeDigest {
    let label = tape_label(party, purpose);
    TapeDigest {
        party,
        digest: hex::encode(Sha256::digest(derive_seed(cfg.seed, &label))),
        label,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub n: usize,
    pub r: usize,
    pub n_r: usize,
    pub records: Vec<TranscriptRecord>,
    pub tapes: Vec<TapeDigest>,
    /// Report indices the server decoded, in shuffled order.
    pub server_output: Vec<u64>,
}

impl Transcript {
    /// Number of distinct shuffle rounds (each carries permutation seeds).
    pub fn shuffle_rounds(&self) -> usize {
        let mut rounds: Vec<usize> = self
            .records
            .iter()
            .filter(|r| r.kind == MessageKind::PermutationSeed)
            .map(|r| r.round)
            .collect();
        rounds.dedup();
        rounds.len()
    }
}

#[derive(Debug, Clone)]
pub struct PeosOutput {
    /// Debiased estimate `f'`.
    pub estimate: FrequencyVector,
    /// Estimate over all `n + n_r` reports before debiasing.
    pub raw: FrequencyVector,
    pub reports: Vec<Report>,
    pub transcript: Transcript,
}

/// `f'_v = ((n+n_r)/n) f~_v - (n_r/n)(1/d)`.
pub fn debias(raw: &FrequencyVector, n: usize, n_r: usize, d: usize) -> FrequencyVector {
    debias_with_fake_mass(raw, n, n_r, 1.0 / d as f64)
}

/// Debiasing for an estimator in which one uniform fake report contributes
/// `mass` to every value's estimate in expectation.
pub fn debias_with_fake_mass(
    raw: &FrequencyVector,
    n: usize,
    n_r: usize,
    mass: f64,
) -> FrequencyVector {
    let (n, n_r) = (n as f64, n_r as f64);
    FrequencyVector(
        raw.0
            .iter()
            .map(|&f| (n + n_r) / n * f - n_r / n * mass)
            .collect(),
    )
}

/// Expected estimator contribution of one report drawn uniformly from the
/// output space. GRR maps a uniform report to `1/d`. A uniform SOLH report
/// supports each value with probability `1/d'`, which is worth nothing for a
/// universal family.
pub fn fake_mass(mechanism: &Mechanism) -> Result<f64> {
    match mechanism {
        Mechanism::Grr(g) => Ok(1.0 / g.d() as f64),
        Mechanism::Solh(s) => {
            Ok((1.0 / s.d_prime() as f64 - s.baseline()) / (s.p() - s.baseline()))
        }
        other => Err(Error::config(format!(
            "{} is not supported by the protocol",
            other.tag()
        ))),
    }
}

/// The report user `i` sends for `value`, replayed from its tape.
pub fn replay_user_report(cfg: &PeosConfig, i: usize, value: usize) -> Result<Report> {
    let mut rng = tape(cfg, PartyId::User(i), "report");
    cfg.mechanism.perturb(value, &mut rng)
}

/// Shuffler `j`'s shares of the fake reports.
pub fn replay_fake_shares(cfg: &PeosConfig, j: usize) -> Vec<u64> {
    let mut rng = tape(cfg, PartyId::Shuffler(j), "fakes");
    (0..cfg.n_r)
        .map(|_| match cfg.behavior(j) {
            ShufflerBehavior::Honest => cfg.ring.random(&mut rng),
            ShufflerBehavior::ConstantShare(c) => cfg.ring.reduce(c),
        })
        .collect()
}

/// Fake reports as the server will decode them, given every shuffler's tape.
pub fn replay_fake_reports(cfg: &PeosConfig) -> Result<Vec<u64>> {
    let codec = cfg.codec()?;
    let cols: Vec<Vec<u64>> = (0..cfg.r).map(|j| replay_fake_shares(cfg, j)).collect();
    Ok((0..cfg.n_r)
        .map(|k| codec.decode_index(cols.iter().fold(0, |acc, c| cfg.ring.add(acc, c[k]))))
        .collect())
}

fn network(recording: Recording) -> Network {
    match recording {
        Recording::Off => Network::disabled(),
        Recording::Digests => Network::new(),
        Recording::Payloads => Network::with_payloads(),
    }
}

fn residue_bytes(ring: Ring, v: u64) -> Vec<u8> {
    v.to_le_bytes()[..ring.byte_len()].to_vec()
}

/// Runs the protocol on `values` (one per user) and returns the server's
/// estimate with the full transcript.
pub fn peos_run<S: Ahe>(
    values: &[usize],
    cfg: &PeosConfig,
    scheme: &S,
    sk: &S::SecretKey,
) -> Result<PeosOutput> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::input("need at least one user"));
    }
    if scheme.ring() != cfg.ring {
        return Err(Error::config(
            "encryption scheme and protocol disagree on the ring width",
        ));
    }
    let d = cfg.mechanism.domain_size();
    if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v >= d) {
        return Err(Error::input(format!(
            "user {} holds value {v} outside domain of size {d}",
            i + 1
        )));
    }
    let (n, r, ring) = (values.len(), cfg.r, cfg.ring);
    let shuffle_cfg = ShuffleConfig::new(r, ring)?;
    let codec = cfg.codec()?;
    let mut net = network(cfg.recording);
    let mut tapes = Vec::new();

    // users: randomize, share, encrypt the last share
    let mut plain: Vec<Vec<u64>> = vec![Vec::with_capacity(n + cfg.n_r); r - 1];
    let mut cipher = Vec::with_capacity(n + cfg.n_r);
    for (i, &v) in values.iter().enumerate() {
        let me = PartyId::User(i);
        let mut rng = tape(cfg, me, "report");
        let report = cfg.mechanism.perturb(v, &mut rng)?;
        let residue = codec.encode(&report, &mut rng)?;
        let sv = share(residue, r, ring, &mut rng)?;
        for (j, &s) in sv.shares[..r - 1].iter().enumerate() {
            net.send(me, PartyId::Shuffler(j), MessageKind::UserShare, || {
                residue_bytes(ring, s)
            });
            plain[j].push(s);
        }
        let c = scheme
            .encrypt(sv.shares[r - 1], &mut tape(cfg, me, "encrypt"))
            .map_err(|e| Error::abort("upload", e))?;
        net.send(
            me,
            PartyId::Shuffler(r - 1),
            MessageKind::UserCiphertext,
            || scheme.encode(&c),
        );
        cipher.push(c);
        if net.is_enabled() {
            tapes.push(tape_digest(cfg, me, "report"));
        }
    }

    // shufflers: shares of the fake reports
    for (j, col) in plain.iter_mut().enumerate() {
        col.extend(replay_fake_shares(cfg, j));
    }
    let mut enc_rng = tape(cfg, PartyId::Shuffler(r - 1), "encrypt");
    for s in replay_fake_shares(cfg, r - 1) {
        cipher.push(
            scheme
                .encrypt(s, &mut enc_rng)
                .map_err(|e| Error::abort("fake reports", e))?,
        );
    }

    let mut columns: Vec<Column<S::Ciphertext>> = plain.into_iter().map(Column::Plain).collect();
    columns.push(Column::Cipher(cipher));
    let mut shuffle_tapes = Tapes {
        shufflers: (0..r)
            .map(|j| tape(cfg, PartyId::Shuffler(j), "shuffle"))
            .collect(),
        routing: (0..r)
            .map(|j| tape(cfg, PartyId::Shuffler(j), "route"))
            .collect(),
        encryption: stream(cfg.seed, "shuffle/encrypt"),
    };
    if net.is_enabled() {
        for j in 0..r {
            tapes.push(tape_digest(cfg, PartyId::Shuffler(j), "fakes"));
            tapes.push(tape_digest(cfg, PartyId::Shuffler(j), "shuffle"));
            tapes.push(tape_digest(cfg, PartyId::Shuffler(j), "route"));
        }
    }
    let (state, _) = run(
        ShuffleState { columns },
        &shuffle_cfg,
        scheme,
        &mut shuffle_tapes,
        &mut net,
    )
    .map_err(|e| wrap("eos", e))?;

    // server
    let residues =
        deliver(&state, scheme, Some(sk), &mut net).map_err(|e| wrap("reconstruct", e))?;
    let indices: Vec<u64> = residues.iter().map(|&z| codec.decode_index(z)).collect();
    let reports: Vec<Report> = indices.iter().map(|&i| codec.from_index(i)).collect();
    let raw = cfg
        .mechanism
        .aggregate(&reports)
        .map_err(|e| wrap("aggregate", e))?;
    let estimate = debias_with_fake_mass(&raw, n, cfg.n_r, fake_mass(&cfg.mechanism)?);

    Ok(PeosOutput {
        estimate,
        raw,
        reports,
        transcript: Transcript {
            n,
            r,
            n_r: cfg.n_r,
            records: net.into_records(),
            tapes,
            server_output: indices,
        },
    })
}

fn wrap(step: &str, e: Error) -> Error {
    match e {
        Error::Abort { .. } => e,
        other => Error::abort(step, other),
    }
}

/// The baseline without encryption or fakes: plain shuffling of reports,
/// equivalent to a trusted shuffler.
pub fn shuffle_only<R: Rng + ?Sized>(
    values: &[usize],
    mechanism: &Mechanism,
    rng: &mut R,
) -> Result<FrequencyVector> {
    use rand::seq::SliceRandom;
    let mut reports = values
        .iter()
        .map(|&v| mechanism.perturb(v, rng))
        .collect::<Result<Vec<_>>>()?;
    reports.shuffle(rng);
    mechanism.aggregate(&reports)
}

/// Sequential-shuffle pipeline: onion-encrypted reports pass through `r`
/// shufflers, each adding its share of `n_r` uniform fakes.
pub fn sequential_run(
    values: &[usize],
    mechanism: &Mechanism,
    r: usize,
    n_r: usize,
    seed: u64,
) -> Result<(FrequencyVector, Vec<TranscriptRecord>)> {
    use crate::crypto::{onion_encrypt, OnionKeyPair};
    use crate::shuffle::{layer_keys, sequential_shuffle};

    let codec = ReportCodec::new(mechanism, Ring::default())?;
    let mut keys_rng = stream(seed, "onion/keys");
    let shufflers: Vec<_> = (0..r)
        .map(|_| OnionKeyPair::generate(&mut keys_rng))
        .collect();
    let server = OnionKeyPair::generate(&mut keys_rng);
    let keys = layer_keys(&shufflers, &server);
    let mut user_rng = stream(seed, "users");
    let mut net = Network::new();
    let mut envelopes = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let report = mechanism.perturb(v, &mut user_rng)?;
        let idx = codec.index(&report)?;
        let env = onion_encrypt(&idx.to_le_bytes(), &keys, &mut user_rng)?;
        net.send(
            PartyId::User(i),
            PartyId::Shuffler(0),
            MessageKind::Onion,
            || env.bytes.clone(),
        );
        envelopes.push(env);
    }
    let space = codec.space();
    let mut mix_rng = stream(seed, "shufflers");
    let payloads = sequential_shuffle(
        envelopes,
        &shufflers,
        &server,
        n_r,
        |rng: &mut ChaCha20Rng| {
            ((rng.gen::<u64>() as u128 % space) as u64)
                .to_le_bytes()
                .to_vec()
        },
        &mut mix_rng,
        &mut net,
    )?;
    let reports = payloads
        .iter()
        .map(|p| {
            let bytes: [u8; 8] = p
                .as_slice()
                .try_into()
                .map_err(|_| Error::input("malformed payload"))?;
            Ok(codec.from_index(u64::from_le_bytes(bytes)))
        })
        .collect::<Result<Vec<_>>>()?;
    let raw = mechanism.aggregate(&reports)?;
    Ok((
        debias_with_fake_mass(&raw, values.len(), n_r, fake_mass(mechanism)?),
        net.into_records(),
    ))
}

/// Per-party byte totals.
pub fn bytes_by_party(records: &[TranscriptRecord]) -> std::collections::BTreeMap<PartyId, u64> {
    let mut out = std::collections::BTreeMap::new();
    for r in records {
        *out.entry(r.from).or_insert(0) += r.byte_length;
    }
    out
}
