//! Byte-accounted in-process message log.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A protocol participant. Indices are 0-based in code and 1-based on the wire
/// (`"user:1"`, `"shuffler:3"`, `"server"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PartyId {
    User(usize),
    Shuffler(usize),
    Server,
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::User(i) => write!(f, "user:{}", i + 1),
            PartyId::Shuffler(i) => write!(f, "shuffler:{}", i + 1),
            PartyId::Server => f.write_str("server"),
        }
    }
}

impl FromStr for PartyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "server" {
            return Ok(PartyId::Server);
        }
        let (kind, idx) = s
            .split_once(':')
            .ok_or_else(|| Error::input(format!("unknown party id {s:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::input(format!("unknown party id {s:?}")))?;
        if idx == 0 {
            return Err(Error::input(format!("party indices are 1-based: {s:?}")));
        }
        match kind {
            "user" => Ok(PartyId::User(idx - 1)),
            "shuffler" => Ok(PartyId::Shuffler(idx - 1)),
            _ => Err(Error::input(format!("unknown party id {s:?}"))),
        }
    }
}

impl From<PartyId> for String {
    fn from(p: PartyId) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PartyId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    UserShare,
    UserCiphertext,
    SeekerShare,
    SeekerCiphertext,
    PermutationSeed,
    Reshare,
    ReshareCiphertext,
    ToServer,
    ToServerCiphertext,
    Onion,
}

impl MessageKind {
    pub fn is_ciphertext(self) -> bool {
        matches!(
            self,
            MessageKind::UserCiphertext
                | MessageKind::SeekerCiphertext
                | MessageKind::ReshareCiphertext
                | MessageKind::ToServerCiphertext
                | MessageKind::Onion
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: usize,
    pub from: PartyId,
    pub to: PartyId,
    pub kind: MessageKind,
    pub byte_length: u64,
    pub payload_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    pub payload: Option<Vec<u8>>,
}

mod opt_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_str(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| hex::decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Collects every message the parties exchange. Recording can be switched off
/// for Monte Carlo loops where only the outputs matter.
#[derive(Debug, Clone, Default)]
pub struct Network {
    enabled: bool,
    keep_payloads: bool,
    round: usize,
    records: Vec<TranscriptRecord>,
}

impl Network {
    pub fn new() -> Self {
        Network {
            enabled: true,
            ..Default::default()
        }
    }

    /// Also retain payload bytes, needed for adversary-view algebra.
    pub fn with_payloads() -> Self {
        Network {
            enabled: true,
            keep_payloads: true,
            ..Default::default()
        }
    }

    pub fn disabled() -> Self {
        Network::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn next_round(&mut self) -> usize {
        self.round += 1;
        self.round
    }

    /// Records a message. `payload` is only built when recording is enabled.
    pub fn send(
        &mut self,
        from: PartyId,
        to: PartyId,
        kind: MessageKind,
        payload: impl FnOnce() -> Vec<u8>,
    ) {
        if !self.enabled || from == to {
            return;
        }
        let bytes = payload();
        self.records.push(TranscriptRecord {
            round: self.round,
            from,
            to,
            kind,
            byte_length: bytes.len() as u64,
            payload_digest: hex::encode(Sha256::digest(&bytes)),
            payload: self.keep_payloads.then_some(bytes),
        });
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TranscriptRecord> {
        self.records
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.byte_length).sum()
    }
}

/// Writes records as JSON lines.
pub fn write_jsonl<W: Write>(records: &[TranscriptRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<TranscriptRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::input(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn party_ids_round_trip() {
        for p in [PartyId::User(0), PartyId::Shuffler(6), PartyId::Server] {
            assert_eq!(p.to_string().parse::<PartyId>().unwrap(), p);
        }
        assert_eq!(PartyId::User(0).to_string(), "user:1");
        assert!("user:0".parse::<PartyId>().is_err());
        assert!("bogus:3".parse::<PartyId>().is_err());
    }

    #[test]
    fn records_serialize_as_json_lines() {
        let mut net = Network::with_payloads();
        net.send(
            PartyId::User(0),
            PartyId::Shuffler(1),
            MessageKind::UserShare,
            || vec![1, 2, 3],
        );
        net.send(
            PartyId::Server,
            PartyId::Server,
            MessageKind::ToServer,
            || vec![9],
        );
        assert_eq!(net.records().len(), 1, "self-messages are local");
        let mut buf = Vec::new();
        write_jsonl(net.records(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"from\":\"user:1\""));
        assert!(text.contains("\"kind\":\"user_share\""));
        assert_eq!(read_jsonl(&text).unwrap(), net.records());
    }

    #[test]
    fn disabled_network_records_nothing() {
        let mut net = Network::disabled();
        net.send(
            PartyId::User(0),
            PartyId::Server,
            MessageKind::Onion,
            || panic!("payload must not be built"),
        );
        assert!(net.records().is_empty());
    }
}
