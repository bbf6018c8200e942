//! Builders for the generative ansatz: one 3-qubit register per heavy-atom
//! site plus 2-qubit bond registers, either one shared register that is
//! measured and reset after every pair (hybrid) or a dedicated register per
//! pair (static).
//!
//! Qubit map: atom `i` occupies qubits `3i..3i+3` with qubit `3i` holding the
//! most significant bit of the atom code. Bond registers follow the atom
//! registers. Classical slots mirror this: atom `i` writes slots `3i..3i+3`,
//! pair `k` (lexicographic over `i < j`) writes slots `3N+2k` and `3N+2k+1`.
//!
//! Parameter slots: each free atom owns 9 consecutive slots (three Ry
//! layers of three rotations) followed, for atoms `i ≥ 1`, by one slot for the
//! controlled rotation linking it to atom `i-1`. Pair slots come after all
//! atom slots, two per pair.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::chem::{AtomKind, BondKind, Element};
use crate::circuit::{Circuit, Gate, Predicate};
use crate::molgraph::ValenceTable;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnsatzError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

type Result<T> = std::result::Result<T, AnsatzError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(AnsatzError::InvalidArgument(msg.into()))
}

/// 3-bit code → atom kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AtomKind>", into = "Vec<AtomKind>")]
pub struct AtomCodebook([AtomKind; 8]);

impl Default for AtomCodebook {
    fn default() -> Self {
        use Element::*;
        AtomCodebook([
            AtomKind::None,
            AtomKind::Atom(C),
            AtomKind::Atom(O),
            AtomKind::Atom(N),
            AtomKind::Atom(S),
            AtomKind::Atom(P),
            AtomKind::Atom(F),
            AtomKind::Atom(Cl),
        ])
    }
}

impl AtomCodebook {
    pub fn new(kinds: [AtomKind; 8]) -> Result<Self> {
        if kinds[0] != AtomKind::None {
            return invalid("atom code 000 must map to NONE");
        }
        let distinct: BTreeSet<_> = kinds.iter().collect();
        if distinct.len() != 8 {
            return invalid("atom codebook must be a bijection over 8 codes");
        }
        Ok(AtomCodebook(kinds))
    }

    pub fn kind(&self, code: u8) -> AtomKind {
        self.0[(code & 0b111) as usize]
    }

    pub fn code_of(&self, kind: AtomKind) -> Option<u8> {
        self.0.iter().position(|&k| k == kind).map(|c| c as u8)
    }
}

impl TryFrom<Vec<AtomKind>> for AtomCodebook {
    type Error = AnsatzError;
    fn try_from(v: Vec<AtomKind>) -> Result<Self> {
        let arr: [AtomKind; 8] = v
            .try_into()
            .map_err(|_| AnsatzError::InvalidArgument("atom codebook needs 8 entries".into()))?;
        AtomCodebook::new(arr)
    }
}

impl From<AtomCodebook> for Vec<AtomKind> {
    fn from(c: AtomCodebook) -> Self {
        c.0.to_vec()
    }
}

/// 2-bit code → bond kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<BondKind>", into = "Vec<BondKind>")]
pub struct BondCodebook([BondKind; 4]);

impl Default for BondCodebook {
    fn default() -> Self {
        BondCodebook([
            BondKind::None,
            BondKind::Single,
            BondKind::Double,
            BondKind::Triple,
        ])
    }
}

impl BondCodebook {
    pub fn new(kinds: [BondKind; 4]) -> Result<Self> {
        if kinds[0] != BondKind::None {
            return invalid("bond code 00 must map to no bond");
        }
        let distinct: BTreeSet<_> = kinds.iter().collect();
        if distinct.len() != 4 {
            return invalid("bond codebook must be a bijection over 4 codes");
        }
        Ok(BondCodebook(kinds))
    }

    pub fn kind(&self, code: u8) -> BondKind {
        self.0[(code & 0b11) as usize]
    }

    pub fn code_of(&self, kind: BondKind) -> u8 {
        self.0.iter().position(|&k| k == kind).unwrap() as u8
    }
}

impl TryFrom<Vec<BondKind>> for BondCodebook {
    type Error = AnsatzError;
    fn try_from(v: Vec<BondKind>) -> Result<Self> {
        let arr: [BondKind; 4] = v
            .try_into()
            .map_err(|_| AnsatzError::InvalidArgument("bond codebook needs 4 entries".into()))?;
        BondCodebook::new(arr)
    }
}

impl From<BondCodebook> for Vec<BondKind> {
    fn from(c: BondCodebook) -> Self {
        c.0.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    DeNovo,
    ScaffoldDecoration,
    Linker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One shared bond register, measured and reset after every pair.
    Hybrid,
    /// A dedicated bond register per pair, never reset.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// Bond rotations anti-controlled on the `|000⟩` state of both atom
    /// registers; atoms are measured at the end.
    QuantumControlled,
    /// Atom registers are measured right after their blocks and the bond
    /// module is a classically conditioned group.
    EarlyMeasured,
}

/// A molecular fragment: elements plus bonds between local indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub atoms: Vec<Element>,
    #[serde(default)]
    pub bonds: Vec<(usize, usize, u8)>,
}

/// Which sites are clamped to fixed atoms and bonds, and which are sampled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpec {
    pub mode: Mode,
    pub fixed_atoms: BTreeMap<usize, Element>,
    /// Keys are `(i, j)` with `i < j`.
    pub fixed_bonds: BTreeMap<(usize, usize), BondKind>,
    pub free_sites: BTreeSet<usize>,
}

impl ModeSpec {
    pub fn de_novo(n_atoms: usize) -> Self {
        ModeSpec {
            mode: Mode::DeNovo,
            fixed_atoms: BTreeMap::new(),
            fixed_bonds: BTreeMap::new(),
            free_sites: (0..n_atoms).collect(),
        }
    }

    /// Clamps `core` onto `sites` (one site per fragment atom); every other
    /// site is free.
    pub fn scaffold(n_atoms: usize, core: &Fragment, sites: &[usize]) -> Result<Self> {
        let mut spec = ModeSpec {
            mode: Mode::ScaffoldDecoration,
            fixed_atoms: BTreeMap::new(),
            fixed_bonds: BTreeMap::new(),
            free_sites: BTreeSet::new(),
        };
        spec.place(core, sites)?;
        spec.free_sites = (0..n_atoms).filter(|s| !spec.fixed_atoms.contains_key(s)).collect();
        spec.validate(n_atoms, &ValenceTable::default())?;
        Ok(spec)
    }

    /// Clamps two terminal fragments; the sites in between are free.
    pub fn linker(
        n_atoms: usize,
        first: (&Fragment, &[usize]),
        second: (&Fragment, &[usize]),
    ) -> Result<Self> {
        let mut spec = ModeSpec {
            mode: Mode::Linker,
            fixed_atoms: BTreeMap::new(),
            fixed_bonds: BTreeMap::new(),
            free_sites: BTreeSet::new(),
        };
        spec.place(first.0, first.1)?;
        spec.place(second.0, second.1)?;
        spec.free_sites = (0..n_atoms).filter(|s| !spec.fixed_atoms.contains_key(s)).collect();
        spec.validate(n_atoms, &ValenceTable::default())?;
        Ok(spec)
    }

    fn place(&mut self, frag: &Fragment, sites: &[usize]) -> Result<()> {
        if frag.atoms.len() != sites.len() {
            return invalid(format!(
                "fragment has {} atoms but {} sites were given",
                frag.atoms.len(),
                sites.len()
            ));
        }
        for (&site, &el) in sites.iter().zip(&frag.atoms) {
            if self.fixed_atoms.insert(site, el).is_some() {
                return invalid(format!("site {site} is fixed twice"));
            }
        }
        for &(a, b, order) in &frag.bonds {
            if a >= sites.len() || b >= sites.len() || a == b {
                return invalid(format!("fragment bond ({a},{b}) is out of range"));
            }
            let kind = BondKind::from_order(order)
                .ok_or_else(|| AnsatzError::InvalidArgument(format!("bad bond order {order}")))?;
            let (i, j) = ordered(sites[a], sites[b]);
            self.fixed_bonds.insert((i, j), kind);
        }
        Ok(())
    }

    pub fn is_fixed(&self, site: usize) -> bool {
        self.fixed_atoms.contains_key(&site)
    }

    /// A pair gets a bond module unless both endpoints are fixed.
    pub fn pair_is_free(&self, i: usize, j: usize) -> bool {
        !(self.is_fixed(i) && self.is_fixed(j))
    }

    /// Structural checks against `n_atoms` plus a valence pre-check of the
    /// fixed fragment(s).
    pub fn validate(&self, n_atoms: usize, valence: &ValenceTable) -> Result<()> {
        if n_atoms == 0 {
            return invalid("n_atoms must be at least 1");
        }
        for (&site, _) in &self.fixed_atoms {
            if site >= n_atoms {
                return invalid(format!("fixed site {site} is out of range for {n_atoms} atoms"));
            }
            if self.free_sites.contains(&site) {
                return invalid(format!("site {site} is both fixed and free"));
            }
        }
        for &site in &self.free_sites {
            if site >= n_atoms {
                return invalid(format!("free site {site} is out of range for {n_atoms} atoms"));
            }
        }
        if self.fixed_atoms.len() + self.free_sites.len() != n_atoms {
            return invalid("fixed and free sites must cover every site");
        }
        for &(i, j) in self.fixed_bonds.keys() {
            if i >= j {
                return invalid(format!("fixed bond key ({i},{j}) must have i < j"));
            }
            if !self.is_fixed(i) || !self.is_fixed(j) {
                return invalid(format!("fixed bond ({i},{j}) touches a free site"));
            }
        }
        match self.mode {
            Mode::DeNovo => {
                if !self.fixed_atoms.is_empty() || !self.fixed_bonds.is_empty() {
                    return invalid("de novo mode cannot fix atoms or bonds");
                }
            }
            Mode::ScaffoldDecoration => {
                if self.fixed_atoms.is_empty() {
                    return invalid("scaffold decoration needs at least one fixed atom");
                }
            }
            Mode::Linker => {
                let comps = self.fixed_components();
                if comps != 2 {
                    return invalid(format!(
                        "linker mode needs exactly two fixed fragments, found {comps}"
                    ));
                }
            }
        }
        let mut load: BTreeMap<usize, u32> = BTreeMap::new();
        for (&(i, j), kind) in &self.fixed_bonds {
            *load.entry(i).or_default() += kind.order() as u32;
            *load.entry(j).or_default() += kind.order() as u32;
        }
        for (site, total) in load {
            let el = self.fixed_atoms[&site];
            if total > valence.max_valence(el) as u32 {
                return invalid(format!(
                    "fixed fragment exceeds the valence of {el} at site {site} ({total})"
                ));
            }
        }
        Ok(())
    }

    fn fixed_components(&self) -> usize {
        let sites: Vec<usize> = self.fixed_atoms.keys().copied().collect();
        let mut parent: BTreeMap<usize, usize> = sites.iter().map(|&s| (s, s)).collect();
        fn find(p: &mut BTreeMap<usize, usize>, x: usize) -> usize {
            let mut r = x;
            while p[&r] != r {
                r = p[&r];
            }
            p.insert(x, r);
            r
        }
        for (&(i, j), kind) in &self.fixed_bonds {
            if *kind != BondKind::None {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent.insert(a, b);
            }
        }
        let roots: BTreeSet<usize> = sites.iter().map(|&s| find(&mut parent, s)).collect();
        roots.len()
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `N² + 9N − 1` parameters for `N` free atoms.
pub fn param_count(n_atoms: usize) -> Result<usize> {
    if n_atoms == 0 {
        return invalid("n_atoms must be at least 1");
    }
    Ok(n_atoms * n_atoms + 9 * n_atoms - 1)
}

/// `3N + 2` qubits for the hybrid circuit, `N(N + 2)` for the static one.
pub fn qubit_count(n_atoms: usize, variant: Variant) -> Result<usize> {
    if n_atoms == 0 {
        return invalid("n_atoms must be at least 1");
    }
    Ok(match variant {
        Variant::Hybrid => 3 * n_atoms + 2,
        Variant::Static => n_atoms * (n_atoms + 2),
    })
}

pub fn pair_count(n_atoms: usize) -> usize {
    n_atoms * n_atoms.saturating_sub(1) / 2
}

/// Unordered site pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairs(n_atoms: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_atoms).flat_map(move |i| (i + 1..n_atoms).map(move |j| (i, j)))
}

/// Position of `(i, j)` in [`pairs`].
pub fn pair_index(n_atoms: usize, i: usize, j: usize) -> usize {
    let (i, j) = ordered(i, j);
    i * n_atoms - i * (i + 1) / 2 + (j - i - 1)
}

/// Classical slots holding atom `i`'s code, most significant bit first.
pub fn atom_slots(i: usize) -> Range<usize> {
    3 * i..3 * i + 3
}

/// Classical slots holding pair `k`'s bond code, most significant bit first.
pub fn bond_slots(n_atoms: usize, k: usize) -> Range<usize> {
    3 * n_atoms + 2 * k..3 * n_atoms + 2 * k + 2
}

pub fn classical_slot_count(n_atoms: usize) -> usize {
    3 * n_atoms + 2 * pair_count(n_atoms)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomBlockSlots {
    /// Three Ry layers over the atom's three qubits, layer-major.
    pub rotations: Range<usize>,
    /// Controlled rotation from the previous atom's last qubit.
    pub link: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_atoms: usize,
    /// `None` for fixed atoms.
    pub atoms: Vec<Option<AtomBlockSlots>>,
    /// Indexed by pair position; `None` for pairs between two fixed atoms.
    pub bonds: Vec<Option<Range<usize>>>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(n_atoms: usize, mode: &ModeSpec) -> Self {
        let mut next = 0;
        let mut atoms = Vec::with_capacity(n_atoms);
        for i in 0..n_atoms {
            if mode.is_fixed(i) {
                atoms.push(None);
                continue;
            }
            let rotations = next..next + 9;
            next += 9;
            let link = (i >= 1).then(|| {
                next += 1;
                next - 1
            });
            atoms.push(Some(AtomBlockSlots { rotations, link }));
        }
        let bonds = pairs(n_atoms)
            .map(|(i, j)| {
                mode.pair_is_free(i, j).then(|| {
                    next += 2;
                    next - 2..next
                })
            })
            .collect();
        ParamLayout {
            n_atoms,
            atoms,
            bonds,
            total: next,
        }
    }

    /// True when the slot ranges are pairwise disjoint and cover `0..total`.
    pub fn is_partition(&self) -> bool {
        let mut seen = vec![0u8; self.total];
        for a in self.atoms.iter().flatten() {
            for s in a.rotations.clone().chain(a.link) {
                seen[s] += 1;
            }
        }
        for r in self.bonds.iter().flatten() {
            for s in r.clone() {
                seen[s] += 1;
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// Everything that determines an ansatz topology.
#[derive(Debug, Clone)]
pub struct AnsatzSpec {
    pub n_atoms: usize,
    pub variant: Variant,
    pub conditioning: Conditioning,
    pub mode: ModeSpec,
    pub atom_codebook: AtomCodebook,
}

impl AnsatzSpec {
    pub fn de_novo(n_atoms: usize, variant: Variant, conditioning: Conditioning) -> Self {
        AnsatzSpec {
            n_atoms,
            variant,
            conditioning,
            mode: ModeSpec::de_novo(n_atoms),
            atom_codebook: AtomCodebook::default(),
        }
    }

    pub fn build(&self) -> Result<(Circuit, ParamLayout)> {
        build(self)
    }
}

pub fn build_hybrid_ansatz(
    n_atoms: usize,
    mode: &ModeSpec,
    conditioning: Conditioning,
) -> Result<(Circuit, ParamLayout)> {
    build(&AnsatzSpec {
        n_atoms,
        variant: Variant::Hybrid,
        conditioning,
        mode: mode.clone(),
        atom_codebook: AtomCodebook::default(),
    })
}

pub fn build_static_ansatz(
    n_atoms: usize,
    mode: &ModeSpec,
    conditioning: Conditioning,
) -> Result<(Circuit, ParamLayout)> {
    build(&AnsatzSpec {
        n_atoms,
        variant: Variant::Static,
        conditioning,
        mode: mode.clone(),
        atom_codebook: AtomCodebook::default(),
    })
}

fn build(spec: &AnsatzSpec) -> Result<(Circuit, ParamLayout)> {
    let n = spec.n_atoms;
    spec.mode.validate(n, &ValenceTable::default())?;
    let layout = ParamLayout::new(n, &spec.mode);
    let n_qubits = qubit_count(n, spec.variant)?;
    let mut c = Circuit::new(n_qubits, layout.total, classical_slot_count(n));
    let early = spec.conditioning == Conditioning::EarlyMeasured;

    for i in 0..n {
        let q = 3 * i;
        match (&layout.atoms[i], spec.mode.fixed_atoms.get(&i)) {
            (None, Some(&el)) => {
                let code = spec
                    .atom_codebook
                    .code_of(AtomKind::Atom(el))
                    .expect("codebook is a bijection");
                for k in 0..3 {
                    if code >> (2 - k) & 1 == 1 {
                        c.push(Gate::X { target: q + k });
                    }
                }
            }
            (Some(block), _) => {
                if let Some(link) = block.link {
                    c.push(Gate::ControlledRy {
                        control: q - 1,
                        target: q,
                        param: link,
                    });
                }
                let r = block.rotations.start;
                for layer in 0..3 {
                    for k in 0..3 {
                        c.push(Gate::Ry {
                            target: q + k,
                            param: r + 3 * layer + k,
                        });
                    }
                    if layer < 2 {
                        c.push(Gate::Cnot {
                            control: q + layer,
                            target: q + layer + 1,
                        });
                    }
                }
            }
            (None, None) => unreachable!("layout omits only fixed atoms"),
        }
        if early {
            for k in 0..3 {
                c.push(Gate::Measure {
                    qubit: q + k,
                    slot: q + k,
                });
            }
        }
    }

    for (k, (i, j)) in pairs(n).enumerate() {
        let Some(slots) = &layout.bonds[k] else {
            continue;
        };
        let b0 = match spec.variant {
            Variant::Hybrid => 3 * n,
            Variant::Static => 3 * n + 2 * k,
        };
        let b1 = b0 + 1;
        let cx = Gate::Cnot {
            control: b0,
            target: b1,
        };
        if early {
            c.push(Gate::Conditioned {
                predicate: Predicate::and(
                    Predicate::AnyNonZero {
                        slots: atom_slots(i).collect(),
                    },
                    Predicate::AnyNonZero {
                        slots: atom_slots(j).collect(),
                    },
                ),
                body: vec![
                    Gate::Ry {
                        target: b0,
                        param: slots.start,
                    },
                    Gate::Ry {
                        target: b1,
                        param: slots.start + 1,
                    },
                    cx,
                ],
            });
        } else {
            let registers = vec![(3 * i..3 * i + 3).collect(), (3 * j..3 * j + 3).collect()];
            for (t, p) in [(b0, slots.start), (b1, slots.start + 1)] {
                c.push(Gate::PresenceRy {
                    registers: Vec::clone(&registers),
                    target: t,
                    param: p,
                });
            }
            // the bond register is |00⟩ whenever the rotations were skipped,
            // so the CNOT needs no presence control
            c.push(cx);
        }
        let bs = bond_slots(n, k);
        c.push(Gate::Measure {
            qubit: b0,
            slot: bs.start,
        });
        c.push(Gate::Measure {
            qubit: b1,
            slot: bs.start + 1,
        });
        if spec.variant == Variant::Hybrid {
            c.push(Gate::Reset { qubit: b0 });
            c.push(Gate::Reset { qubit: b1 });
        }
    }

    if !early {
        for q in 0..3 * n {
            c.push(Gate::Measure { qubit: q, slot: q });
        }
    }
    Ok((c, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_stats, validate_circuit};

    #[test]
    fn scaling_formulas() {
        assert_eq!(param_count(2).unwrap(), 21);
        assert_eq!(param_count(10).unwrap(), 189);
        assert_eq!(param_count(40).unwrap(), 1959);
        assert_eq!(qubit_count(3, Variant::Hybrid).unwrap(), 11);
        assert_eq!(qubit_count(20, Variant::Static).unwrap(), 440);
        assert_eq!(qubit_count(1, Variant::Hybrid).unwrap(), 5);
        assert!(param_count(0).is_err());
        assert!(qubit_count(0, Variant::Static).is_err());
        for n in 1..50 {
            assert_eq!(
                qubit_count(n, Variant::Static).unwrap(),
                3 * n + 2 * pair_count(n)
            );
        }
    }

    #[test]
    fn pair_index_matches_enumeration() {
        for n in 1..12 {
            for (k, (i, j)) in pairs(n).enumerate() {
                assert_eq!(pair_index(n, i, j), k);
                assert_eq!(pair_index(n, j, i), k);
            }
        }
    }

    #[test]
    fn codebooks_reject_non_bijections() {
        let mut kinds = [AtomKind::None; 8];
        assert!(AtomCodebook::new(kinds).is_err());
        kinds = Vec::from(AtomCodebook::default()).try_into().unwrap();
        kinds.swap(0, 1);
        assert!(AtomCodebook::new(kinds).is_err());
        assert!(BondCodebook::new([
            BondKind::Single,
            BondKind::None,
            BondKind::Double,
            BondKind::Triple
        ])
        .is_err());
        let book = AtomCodebook::default();
        assert_eq!(book.kind(0b001), AtomKind::Atom(Element::C));
        assert_eq!(book.kind(0b111), AtomKind::Atom(Element::Cl));
        assert_eq!(book.code_of(AtomKind::Atom(Element::S)), Some(0b100));
    }

    #[test]
    fn n2_hybrid_shape() {
        let (c, layout) =
            build_hybrid_ansatz(2, &ModeSpec::de_novo(2), Conditioning::EarlyMeasured).unwrap();
        assert_eq!(c.n_qubits, 8);
        assert_eq!(c.n_params, 21);
        assert_eq!(layout.total, 21);
        assert_eq!(layout.bonds.len(), 1);
        assert_eq!(circuit_stats(&c).measure_count, 8);
        assert!(validate_circuit(&c).is_ok());
    }

    #[test]
    fn n1_has_no_bond_modules() {
        let (c, layout) =
            build_hybrid_ansatz(1, &ModeSpec::de_novo(1), Conditioning::EarlyMeasured).unwrap();
        assert_eq!(c.n_qubits, 5);
        assert_eq!(layout.total, 9);
        assert!(layout.bonds.is_empty());
        assert_eq!(c.count_where(|g| matches!(g, Gate::Conditioned { .. })), 0);
        assert_eq!(c.count_where(|g| matches!(g, Gate::Reset { .. })), 0);
    }

    #[test]
    fn n3_bond_modules_in_pair_order_with_resets() {
        let (c, _) =
            build_hybrid_ansatz(3, &ModeSpec::de_novo(3), Conditioning::EarlyMeasured).unwrap();
        let mut seen = Vec::new();
        let mut resets_after = Vec::new();
        for (idx, g) in c.gates.iter().enumerate() {
            if let Gate::Conditioned { predicate, .. } = g {
                let slots = predicate.slots();
                seen.push((slots[0] / 3, slots[3] / 3));
                let tail = &c.gates[idx + 1..idx + 5];
                resets_after.push(matches!(
                    tail,
                    [
                        Gate::Measure { qubit: 9, .. },
                        Gate::Measure { qubit: 10, .. },
                        Gate::Reset { qubit: 9 },
                        Gate::Reset { qubit: 10 }
                    ]
                ));
            }
        }
        assert_eq!(seen, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(resets_after, vec![true; 3]);
        assert_eq!(c.count_where(|g| matches!(g, Gate::Reset { .. })), 6);
    }

    #[test]
    fn static_variant_shapes() {
        for (n, q) in [(2, 8), (4, 24), (3, 15)] {
            let (c, layout) =
                build_static_ansatz(n, &ModeSpec::de_novo(n), Conditioning::EarlyMeasured)
                    .unwrap();
            assert_eq!(c.n_qubits, q);
            assert_eq!(layout.total, param_count(n).unwrap());
            assert_eq!(c.count_where(|g| matches!(g, Gate::Reset { .. })), 0);
            assert!(validate_circuit(&c).is_ok());
        }
    }

    #[test]
    fn builders_validate_for_all_sizes() {
        for n in 1..=40 {
            for variant in [Variant::Hybrid, Variant::Static] {
                for cond in [Conditioning::EarlyMeasured, Conditioning::QuantumControlled] {
                    let spec = AnsatzSpec::de_novo(n, variant, cond);
                    let (c, layout) = spec.build().unwrap();
                    let report = validate_circuit(&c);
                    assert!(report.is_ok(), "n={n} {variant:?} {cond:?}: {report:?}");
                    assert_eq!(layout.total, param_count(n).unwrap());
                    assert!(layout.is_partition());
                }
            }
        }
    }

    #[test]
    fn mode_validation() {
        let c = Fragment {
            atoms: vec![Element::C],
            bonds: vec![],
        };
        let linker = ModeSpec::linker(4, (&c, &[0]), (&c, &[3])).unwrap();
        assert_eq!(linker.free_sites, BTreeSet::from([1, 2]));
        assert!(ModeSpec::linker(4, (&c, &[0]), (&c, &[0])).is_err());

        let ethane = Fragment {
            atoms: vec![Element::C, Element::C],
            bonds: vec![(0, 1, 1)],
        };
        // one connected fragment is not two
        let mut joined = ModeSpec::scaffold(4, &ethane, &[0, 3]).unwrap();
        joined.mode = Mode::Linker;
        assert!(joined.validate(4, &ValenceTable::default()).is_err());

        let bad = Fragment {
            atoms: vec![Element::F, Element::C],
            bonds: vec![(0, 1, 2)],
        };
        assert!(ModeSpec::scaffold(3, &bad, &[0, 1]).is_err());
        assert!(ModeSpec::scaffold(1, &ethane, &[0, 1]).is_err());
        assert!(ModeSpec::de_novo(3).validate(2, &ValenceTable::default()).is_err());
    }

    #[test]
    fn scaffold_layout_omits_fixed_slots() {
        let core = Fragment {
            atoms: vec![Element::C, Element::N],
            bonds: vec![(0, 1, 1)],
        };
        let mode = ModeSpec::scaffold(4, &core, &[0, 1]).unwrap();
        let layout = ParamLayout::new(4, &mode);
        assert!(layout.atoms[0].is_none() && layout.atoms[1].is_none());
        // free atoms 2,3 with links: 20; pairs except (0,1): 5 × 2
        assert_eq!(layout.total, 30);
        assert!(layout.bonds[0].is_none());
        assert!(layout.is_partition());
        let (c, _) = build_hybrid_ansatz(4, &mode, Conditioning::EarlyMeasured).unwrap();
        assert!(validate_circuit(&c).is_ok());
        // N = 011 → one X on the last qubit of site 1 plus C = 001 on site 0
        assert_eq!(c.count_where(|g| matches!(g, Gate::X { .. })), 3);
    }
}
