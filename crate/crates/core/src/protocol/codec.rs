use rand::Rng;

use crate::crypto::Ring;
use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, Report};

/// Maps local-randomizer reports to ring residues and back.
///
/// A report index `y` in `[0, M)` is sent as `y + M*u` with `u` uniform in
/// `[0, 2^l / M)`, so real reports are (almost) uniform over the whole ring
/// just like fake reports, whose shares are uniform residues. The server
/// decodes a residue by reducing it mod `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportCodec {
    shape: Shape,
    space: u128,
    lift: u128,
    ring: Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Grr,
    /// SOLH packs `(seed, y)` as `seed * d' + y`.
    Solh {
        d_prime: u32,
    },
}

impl ReportCodec {
    pub fn new(mechanism: &Mechanism, ring: Ring) -> Result<Self> {
        let (shape, space) = match mechanism {
            Mechanism::Grr(g) => (Shape::Grr, g.d() as u128),
            Mechanism::Solh(s) => (
                Shape::Solh {
                    d_prime: s.d_prime(),
                },
                s.hash_family().seed_space() as u128 * s.d_prime() as u128,
            ),
            other => {
                return Err(Error::config(format!(
                    "{} reports cannot be secret-shared as one residue",
                    other.tag()
                )))
            }
        };
        if space > ring.size() {
            return Err(Error::config(format!(
                "report space of size {space} does not fit a {}-bit ring",
                ring.bits()
            )));
        }
        Ok(ReportCodec {
            shape,
            space,
            lift: ring.size() / space,
            ring,
        })
    }

    /// Number of distinct reports.
    pub fn space(&self) -> u128 {
        self.space
    }

    pub fn index(&self, report: &Report) -> Result<u64> {
        match (self.shape, report) {
            (Shape::Grr, Report::Grr(y)) => Ok(*y),
            (Shape::Solh { d_prime }, Report::Solh { seed, y }) => {
                Ok(*seed as u64 * d_prime as u64 + *y as u64)
            }
            _ => Err(Error::input(
                "report does not match the configured mechanism",
            )),
        }
    }

    pub fn from_index(&self, idx: u64) -> Report {
        match self.shape {
            Shape::Grr => Report::Grr(idx),
            Shape::Solh { d_prime } => Report::Solh {
                seed: (idx / d_prime as u64) as u32,
                y: (idx % d_prime as u64) as u32,
            },
        }
    }

    pub fn encode<R: Rng + ?Sized>(&self, report: &Report, rng: &mut R) -> Result<u64> {
        let idx = self.index(report)? as u128;
        let u = if self.lift > 1 {
            rng.gen_range(0..self.lift)
        } else {
            0
        };
        Ok(self.ring.reduce((idx + self.space * u) as u64))
    }

    pub fn decode_index(&self, residue: u64) -> u64 {
        (residue as u128 % self.space) as u64
    }

    pub fn decode(&self, residue: u64) -> Report {
        self.from_index(self.decode_index(residue))
    }
}
