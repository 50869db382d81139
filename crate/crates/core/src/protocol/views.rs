use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{TapeDigest, Transcript};
use crate::error::{Error, Result};
use crate::shuffle::{PartyId, TranscriptRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryModel {
    /// The server alone.
    Server,
    /// The server colluding with users other than the victim.
    ServerPlusUsers,
    /// The server colluding with some shufflers.
    ServerPlusShufflers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryView {
    pub model: AdversaryModel,
    pub corrupted: Vec<PartyId>,
    /// Set when a majority of shufflers is corrupted: the permutation and the
    /// fake reports are then known and only local privacy remains.
    pub degraded: bool,
    pub records: Vec<TranscriptRecord>,
    pub tapes: Vec<TapeDigest>,
    pub server_output: Vec<u64>,
}

impl AdversaryView {
    /// A header line with the model followed by the visible records.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = serde_json::json!({
            "model": self.model,
            "corrupted": self.corrupted,
            "degraded": self.degraded,
        });
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        crate::shuffle::write_jsonl(&self.records, out)
    }
}

/// Filters a transcript down to what the given coalition sees.
pub fn extract_view(
    t: &Transcript,
    model: AdversaryModel,
    corrupted: &[PartyId],
) -> Result<AdversaryView> {
    for p in corrupted {
        let known = match *p {
            PartyId::User(i) => i < t.n,
            PartyId::Shuffler(j) => j < t.r,
            PartyId::Server => true,
        };
        if !known {
            return Err(Error::input(format!("unknown party {p}")));
        }
        let allowed = match model {
            AdversaryModel::Server => *p == PartyId::Server,
            AdversaryModel::ServerPlusUsers => !matches!(p, PartyId::Shuffler(_)),
            AdversaryModel::ServerPlusShufflers => !matches!(p, PartyId::User(_)),
        };
        if !allowed {
            return Err(Error::input(format!(
                "party {p} cannot be corrupted under {model:?}"
            )));
        }
    }
    let mut members: Vec<PartyId> = corrupted.to_vec();
    members.push(PartyId::Server);
    members.sort();
    members.dedup();

    let sees = |p: &PartyId| members.contains(p);
    let records = t
        .records
        .iter()
        .filter(|r| sees(&r.from) || sees(&r.to))
        .cloned()
        .collect();
    let tapes = t.tapes.iter().filter(|d| sees(&d.party)).cloned().collect();
    let shufflers = members
        .iter()
        .filter(|p| matches!(p, PartyId::Shuffler(_)))
        .count();
    Ok(AdversaryView {
        model,
        corrupted: members,
        degraded: shufflers > t.r / 2,
        records,
        tapes,
        server_output: t.server_output.clone(),
    })
}
