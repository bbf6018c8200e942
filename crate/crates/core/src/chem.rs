//! Element and bond vocabularies shared by the ansatz codebooks and the
//! molecular-graph decoder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Heavy-atom element types representable by a 3-qubit atom register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    C,
    O,
    N,
    S,
    P,
    F,
    Cl,
}

impl Element {
    pub const ALL: [Element; 7] = [
        Element::C,
        Element::O,
        Element::N,
        Element::S,
        Element::P,
        Element::F,
        Element::Cl,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::O => "O",
            Element::N => "N",
            Element::S => "S",
            Element::P => "P",
            Element::F => "F",
            Element::Cl => "Cl",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown element symbol {0:?}")]
pub struct UnknownElement(pub String);

impl FromStr for Element {
    type Err = UnknownElement;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.symbol() == s)
            .ok_or_else(|| UnknownElement(s.to_string()))
    }
}

/// Content of an atom site: either empty or a heavy atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomKind {
    None,
    Atom(Element),
}

impl AtomKind {
    pub fn element(self) -> Option<Element> {
        match self {
            AtomKind::None => None,
            AtomKind::Atom(e) => Some(e),
        }
    }
}

impl fmt::Display for AtomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomKind::None => f.write_str("NONE"),
            AtomKind::Atom(e) => e.fmt(f),
        }
    }
}

impl FromStr for AtomKind {
    type Err = UnknownElement;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("none") {
            Ok(AtomKind::None)
        } else {
            s.parse().map(AtomKind::Atom)
        }
    }
}

/// Bond multiplicity between two atoms. `None` means no bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondKind {
    None,
    Single,
    Double,
    Triple,
}

impl BondKind {
    /// Bond order, 0 for no bond.
    pub fn order(self) -> u8 {
        match self {
            BondKind::None => 0,
            BondKind::Single => 1,
            BondKind::Double => 2,
            BondKind::Triple => 3,
        }
    }

    pub fn from_order(order: u8) -> Option<BondKind> {
        match order {
            0 => Some(BondKind::None),
            1 => Some(BondKind::Single),
            2 => Some(BondKind::Double),
            3 => Some(BondKind::Triple),
            _ => None,
        }
    }
}

impl fmt::Display for BondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BondKind::None => "none",
            BondKind::Single => "single",
            BondKind::Double => "double",
            BondKind::Triple => "triple",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for e in Element::ALL {
            assert_eq!(e.symbol().parse::<Element>().unwrap(), e);
        }
        assert!("Br".parse::<Element>().is_err());
        assert_eq!("none".parse::<AtomKind>().unwrap(), AtomKind::None);
    }

    #[test]
    fn bond_orders() {
        for o in 0..4 {
            assert_eq!(BondKind::from_order(o).unwrap().order(), o);
        }
        assert_eq!(BondKind::from_order(4), None);
    }
}
