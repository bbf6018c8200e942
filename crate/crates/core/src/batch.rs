//! Shot records and their file formats.
//!
//! Two encodings are supported, both versioned:
//!
//! * JSONL: a header line `{"format":"sqmg-samples","version":1,"n_atoms":N,
//!   "seed":S,"shots":K}` followed by one `{"shot":k,"atoms":[..],"bonds":[..]}`
//!   line per shot.
//! * Binary: magic `SQMGSB`, `u16` version, `u32` n_atoms, `u64` seed, `u64`
//!   shot count (all little endian), then each shot as its `N(N+2)` classical
//!   bits in slot order packed LSB-first into whole bytes.

use std::io::{self, BufRead, Read, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ansatz::{atom_slots, bond_slots, classical_slot_count, pair_count};

pub const FORMAT_VERSION: u16 = 1;
const MAGIC: &[u8; 6] = b"SQMGSB";

/// Atom codes (3-bit) and bond codes (2-bit, lexicographic pair order) of one
/// shot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShotRecord {
    pub atoms: Vec<u8>,
    pub bonds: Vec<u8>,
}

impl ShotRecord {
    /// Reads codes out of a classical register laid out by the ansatz builder.
    pub fn from_bits(n_atoms: usize, bits: &[bool]) -> ShotRecord {
        let read = |r: std::ops::Range<usize>| r.fold(0u8, |acc, s| (acc << 1) | bits[s] as u8);
        ShotRecord {
            atoms: (0..n_atoms).map(|i| read(atom_slots(i))).collect(),
            bonds: (0..pair_count(n_atoms))
                .map(|k| read(bond_slots(n_atoms, k)))
                .collect(),
        }
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut bits = vec![false; classical_slot_count(n)];
        let mut write = |r: std::ops::Range<usize>, code: u8| {
            let w = r.len();
            for (k, s) in r.enumerate() {
                bits[s] = code >> (w - 1 - k) & 1 == 1;
            }
        };
        for (i, &c) in self.atoms.iter().enumerate() {
            write(atom_slots(i), c);
        }
        for (k, &c) in self.bonds.iter().enumerate() {
            write(bond_slots(n, k), c);
        }
        bits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub n_atoms: usize,
    pub seed: u64,
    pub records: Vec<ShotRecord>,
    /// Not part of either file format.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum BatchFormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a sample file: {0}")]
    Format(String),
    #[error("unsupported sample format version {0}")]
    Version(u16),
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    format: String,
    version: u16,
    n_atoms: usize,
    seed: u64,
    shots: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonShot {
    shot: usize,
    atoms: Vec<u8>,
    bonds: Vec<u8>,
}

impl SampleBatch {
    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        let header = JsonHeader {
            format: "sqmg-samples".into(),
            version: FORMAT_VERSION,
            n_atoms: self.n_atoms,
            seed: self.seed,
            shots: self.records.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for (shot, r) in self.records.iter().enumerate() {
            let line = JsonShot {
                shot,
                atoms: r.atoms.clone(),
                bonds: r.bonds.clone(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<SampleBatch, BatchFormatError> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| BatchFormatError::Format("empty file".into()))??;
        let header: JsonHeader = serde_json::from_str(&header_line)
            .map_err(|e| BatchFormatError::Format(format!("bad header: {e}")))?;
        if header.format != "sqmg-samples" {
            return Err(BatchFormatError::Format(format!(
                "unexpected format tag {:?}",
                header.format
            )));
        }
        if header.version != FORMAT_VERSION {
            return Err(BatchFormatError::Version(header.version));
        }
        let mut records = Vec::with_capacity(header.shots);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let shot: JsonShot = serde_json::from_str(&line)
                .map_err(|e| BatchFormatError::Format(format!("bad shot line: {e}")))?;
            if shot.shot != records.len() {
                return Err(BatchFormatError::Format(format!(
                    "shot {} out of order",
                    shot.shot
                )));
            }
            records.push(ShotRecord {
                atoms: shot.atoms,
                bonds: shot.bonds,
            });
        }
        if records.len() != header.shots {
            return Err(BatchFormatError::Format(format!(
                "header announces {} shots, found {}",
                header.shots,
                records.len()
            )));
        }
        Ok(SampleBatch {
            n_atoms: header.n_atoms,
            seed: header.seed,
            records,
            wall_time: Duration::ZERO,
        })
    }

    pub fn write_binary(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_atoms as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        let nbits = classical_slot_count(self.n_atoms);
        let mut buf = vec![0u8; nbits.div_ceil(8)];
        for r in &self.records {
            buf.fill(0);
            for (i, b) in r.to_bits().into_iter().enumerate() {
                if b {
                    buf[i / 8] |= 1 << (i % 8);
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<SampleBatch, BatchFormatError> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(BatchFormatError::Format("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != FORMAT_VERSION {
            return Err(BatchFormatError::Version(version));
        }
        r.read_exact(&mut b4)?;
        let n_atoms = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let shots = u64::from_le_bytes(b8) as usize;
        let nbits = classical_slot_count(n_atoms);
        let mut buf = vec![0u8; nbits.div_ceil(8)];
        let mut records = Vec::with_capacity(shots);
        for _ in 0..shots {
            r.read_exact(&mut buf)?;
            let bits: Vec<bool> = (0..nbits).map(|i| buf[i / 8] >> (i % 8) & 1 == 1).collect();
            records.push(ShotRecord::from_bits(n_atoms, &bits));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(BatchFormatError::Format("trailing bytes".into()));
        }
        Ok(SampleBatch {
            n_atoms,
            seed,
            records,
            wall_time: Duration::ZERO,
        })
    }
}
