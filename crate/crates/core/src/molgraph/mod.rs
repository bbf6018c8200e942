//! Molecular graphs decoded from shot records: structural validation,
//! canonical keys for uniqueness counting, and SMILES text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ansatz::{pair_count, pairs, AtomCodebook, BondCodebook, ModeSpec};
use crate::batch::ShotRecord;
use crate::chem::{AtomKind, BondKind, Element};

mod canon;
mod smiles;

pub use canon::canonical_key;
pub use smiles::{parse_smiles, to_smiles, Smiles, SmilesError};

/// Heavy-atom graph. Bonds are `(i, j, order)` with `i < j` and order 1..=3.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MoleculeGraph {
    pub atoms: Vec<Element>,
    pub bonds: Vec<(usize, usize, u8)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot: Option<u64>,
}

impl MoleculeGraph {
    pub fn new(atoms: Vec<Element>, bonds: Vec<(usize, usize, u8)>) -> Self {
        let mut bonds: Vec<_> = bonds
            .into_iter()
            .map(|(a, b, o)| if a < b { (a, b, o) } else { (b, a, o) })
            .collect();
        bonds.sort_unstable();
        MoleculeGraph {
            atoms,
            bonds,
            shot: None,
        }
    }

    /// Checks the structural invariants: indices in range, no self bonds,
    /// one bond per pair, orders in 1..=3.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.bonds.iter().all(|&(a, b, o)| {
            a < b && b < self.atoms.len() && (1..=3).contains(&o) && seen.insert((a, b))
        })
    }

    /// Neighbor lists with bond orders.
    pub fn adjacency(&self) -> Vec<Vec<(usize, u8)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for &(a, b, o) in &self.bonds {
            adj[a].push((b, o));
            adj[b].push((a, o));
        }
        adj
    }

    /// Relabels atom `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MoleculeGraph {
        let mut atoms = self.atoms.clone();
        for (i, &p) in perm.iter().enumerate() {
            atoms[p] = self.atoms[i];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|&(a, b, o)| (perm[a], perm[b], o))
            .collect();
        MoleculeGraph {
            shot: self.shot,
            ..MoleculeGraph::new(atoms, bonds)
        }
    }
}

/// Maximum total bond order per element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceTable(BTreeMap<Element, u8>);

impl Default for ValenceTable {
    fn default() -> Self {
        use Element::*;
        ValenceTable(BTreeMap::from([
            (C, 4),
            (N, 3),
            (O, 2),
            (S, 6),
            (P, 5),
            (F, 1),
            (Cl, 1),
        ]))
    }
}

impl ValenceTable {
    /// Overrides on top of the defaults; every entry must be positive.
    pub fn with_overrides(overrides: &BTreeMap<Element, u8>) -> Result<Self, String> {
        let mut t = ValenceTable::default();
        for (&e, &v) in overrides {
            if v == 0 {
                return Err(format!("valence of {e} must be positive"));
            }
            t.0.insert(e, v);
        }
        Ok(t)
    }

    pub fn max_valence(&self, e: Element) -> u8 {
        self.0[&e]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    EmptyMolecule,
    ValenceExceeded(usize),
    Disconnected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub valid: bool,
    pub failures: Vec<Failure>,
}

/// Valid means non-empty, every atom within its valence, and connected.
pub fn validate(mol: &MoleculeGraph, valence: &ValenceTable) -> ValidationResult {
    let mut failures = Vec::new();
    let n = mol.atoms.len();
    if n == 0 {
        failures.push(Failure::EmptyMolecule);
    }
    let mut load = vec![0u32; n];
    for &(a, b, o) in &mol.bonds {
        load[a] += o as u32;
        load[b] += o as u32;
    }
    for (i, (&el, &l)) in mol.atoms.iter().zip(&load).enumerate() {
        if l > valence.max_valence(el) as u32 {
            failures.push(Failure::ValenceExceeded(i));
        }
    }
    if n > 1 && component_count(n, &mol.bonds) > 1 {
        failures.push(Failure::Disconnected);
    }
    ValidationResult {
        valid: failures.is_empty(),
        failures,
    }
}

fn component_count(n: usize, bonds: &[(usize, usize, u8)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = n;
    for &(a, b, _) in bonds {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            comps -= 1;
        }
    }
    comps
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("record has {got} atom codes, expected {expected}")]
    AtomCount { got: usize, expected: usize },
    #[error("record has {got} bond codes, expected {expected}")]
    BondCount { got: usize, expected: usize },
    #[error("code {code} out of range for a {bits}-bit field")]
    CodeOutOfRange { code: u8, bits: u8 },
}

/// Everything needed to turn shot records into molecules.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub n_atoms: usize,
    pub atom_codebook: AtomCodebook,
    pub bond_codebook: BondCodebook,
    pub mode: ModeSpec,
}

impl Decoder {
    pub fn de_novo(n_atoms: usize) -> Self {
        Decoder {
            n_atoms,
            atom_codebook: AtomCodebook::default(),
            bond_codebook: BondCodebook::default(),
            mode: ModeSpec::de_novo(n_atoms),
        }
    }

    pub fn decode(&self, record: &ShotRecord) -> Result<MoleculeGraph, DecodeError> {
        decode_shot(
            record,
            self.n_atoms,
            &self.atom_codebook,
            &self.bond_codebook,
            &self.mode,
        )
    }
}

/// Maps codes through the codebooks, injects fixed atoms and bonds, drops
/// bond codes attached to an empty site and compacts away empty sites.
pub fn decode_shot(
    record: &ShotRecord,
    n_atoms: usize,
    atom_codebook: &AtomCodebook,
    bond_codebook: &BondCodebook,
    mode: &ModeSpec,
) -> Result<MoleculeGraph, DecodeError> {
    if record.atoms.len() != n_atoms {
        return Err(DecodeError::AtomCount {
            got: record.atoms.len(),
            expected: n_atoms,
        });
    }
    if record.bonds.len() != pair_count(n_atoms) {
        return Err(DecodeError::BondCount {
            got: record.bonds.len(),
            expected: pair_count(n_atoms),
        });
    }
    if let Some(&code) = record.atoms.iter().find(|&&c| c > 0b111) {
        return Err(DecodeError::CodeOutOfRange { code, bits: 3 });
    }
    if let Some(&code) = record.bonds.iter().find(|&&c| c > 0b11) {
        return Err(DecodeError::CodeOutOfRange { code, bits: 2 });
    }

    let kinds: Vec<AtomKind> = (0..n_atoms)
        .map(|i| match mode.fixed_atoms.get(&i) {
            Some(&el) => AtomKind::Atom(el),
            None => atom_codebook.kind(record.atoms[i]),
        })
        .collect();
    let mut index = vec![usize::MAX; n_atoms];
    let mut atoms = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        if let AtomKind::Atom(el) = k {
            index[i] = atoms.len();
            atoms.push(*el);
        }
    }
    let mut bonds = Vec::new();
    for (k, (i, j)) in pairs(n_atoms).enumerate() {
        if kinds[i] == AtomKind::None || kinds[j] == AtomKind::None {
            continue;
        }
        let bond = if mode.pair_is_free(i, j) {
            bond_codebook.kind(record.bonds[k])
        } else {
            mode.fixed_bonds
                .get(&(i, j))
                .copied()
                .unwrap_or(BondKind::None)
        };
        if bond != BondKind::None {
            bonds.push((index[i], index[j], bond.order()));
        }
    }
    Ok(MoleculeGraph {
        atoms,
        bonds,
        shot: None,
    })
}
