//! Minimal SMILES writer and reader for heavy-atom graphs.
//!
//! The writer walks a depth-first spanning tree from atom 0, visiting
//! neighbours in index order, and emits ring-closure digits (`1`-`9`, then
//! `%10`-`%99`) for the remaining edges. The reader accepts exactly what the
//! writer can produce: organic-subset symbols without brackets, `-`, `=`,
//! `#`, branches, ring closures and `.` component separators.

use super::{canonical_key, MoleculeGraph};
use crate::chem::Element;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smiles {
    pub text: String,
    /// Set when the graph could not be written as SMILES and `text` holds
    /// the canonical key instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("SMILES parse error at byte {pos}: {message}")]
pub struct SmilesError {
    pub pos: usize,
    pub message: String,
}

const MAX_RING_LABEL: usize = 99;

pub fn to_smiles(mol: &MoleculeGraph) -> Smiles {
    match write(mol) {
        Some(text) => Smiles {
            text,
            fallback: false,
        },
        None => Smiles {
            text: canonical_key(mol),
            fallback: true,
        },
    }
}

fn bond_symbol(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

fn write(mol: &MoleculeGraph) -> Option<String> {
    let n = mol.atoms.len();
    let mut adj = mol.adjacency();
    for nb in &mut adj {
        nb.sort_unstable();
    }

    // first pass: spanning forest, visit order and ring-closure edges
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
    let mut rings: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
    let mut on_path = vec![false; n];
    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        visited[root] = true;
        dfs(root, usize::MAX, &adj, &mut visited, &mut on_path, &mut children, &mut rings);
    }

    // second pass: emit
    let mut out = String::new();
    let mut open: Vec<Option<usize>> = vec![None; MAX_RING_LABEL + 1];
    // ring edge (min, max) -> label while open
    let mut labels: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for (ci, &root) in roots.iter().enumerate() {
        if ci > 0 {
            out.push('.');
        }
        emit(root, mol, &children, &rings, &mut open, &mut labels, &mut out)?;
    }
    Some(out)
}

fn dfs(
    v: usize,
    parent: usize,
    adj: &[Vec<(usize, u8)>],
    visited: &mut [bool],
    on_path: &mut [bool],
    children: &mut [Vec<(usize, u8)>],
    rings: &mut [Vec<(usize, u8)>],
) {
    on_path[v] = true;
    for &(w, o) in &adj[v] {
        if w == parent {
            continue;
        }
        if !visited[w] {
            visited[w] = true;
            children[v].push((w, o));
            dfs(w, v, adj, visited, on_path, children, rings);
        } else if on_path[w] {
            // back edge to an ancestor: ring opens at w, closes at v
            rings[w].push((v, o));
            rings[v].push((w, o));
        }
    }
    on_path[v] = false;
}

fn emit(
    v: usize,
    mol: &MoleculeGraph,
    children: &[Vec<(usize, u8)>],
    rings: &[Vec<(usize, u8)>],
    open: &mut [Option<usize>],
    labels: &mut std::collections::BTreeMap<(usize, usize), usize>,
    out: &mut String,
) -> Option<()> {
    out.push_str(mol.atoms[v].symbol());
    for &(w, o) in &rings[v] {
        let key = (v.min(w), v.max(w));
        let label = match labels.remove(&key) {
            Some(l) => {
                open[l] = None;
                l
            }
            None => {
                let l = (1..=MAX_RING_LABEL).find(|&l| open[l].is_none())?;
                open[l] = Some(v);
                labels.insert(key, l);
                out.push_str(bond_symbol(o));
                l
            }
        };
        if label < 10 {
            out.push_str(&label.to_string());
        } else {
            out.push_str(&format!("%{label}"));
        }
    }
    let kids = &children[v];
    for (idx, &(w, o)) in kids.iter().enumerate() {
        let branch = idx + 1 < kids.len();
        if branch {
            out.push('(');
        }
        out.push_str(bond_symbol(o));
        emit(w, mol, children, rings, open, labels, out)?;
        if branch {
            out.push(')');
        }
    }
    Some(())
}

pub fn parse_smiles(text: &str) -> Result<MoleculeGraph, SmilesError> {
    let bytes = text.as_bytes();
    let err = |pos: usize, message: &str| SmilesError {
        pos,
        message: message.to_string(),
    };
    let mut atoms: Vec<Element> = Vec::new();
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut branch_stack: Vec<Option<usize>> = Vec::new();
    let mut pending_order: Option<u8> = None;
    let mut ring_open: std::collections::BTreeMap<usize, (usize, Option<u8>)> = Default::default();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            'C' | 'O' | 'N' | 'S' | 'P' | 'F' => {
                let (el, len) = if c == 'C' && bytes.get(i + 1) == Some(&b'l') {
                    (Element::Cl, 2)
                } else {
                    (text[i..i + 1].parse::<Element>().unwrap(), 1)
                };
                let idx = atoms.len();
                atoms.push(el);
                if let Some(p) = prev {
                    bonds.push((p, idx, pending_order.take().unwrap_or(1)));
                } else if pending_order.is_some() {
                    return Err(err(i, "bond symbol without a preceding atom"));
                }
                prev = Some(idx);
                i += len;
                continue;
            }
            '-' | '=' | '#' => {
                if pending_order.is_some() {
                    return Err(err(i, "two bond symbols in a row"));
                }
                pending_order = Some(match c {
                    '-' => 1,
                    '=' => 2,
                    _ => 3,
                });
            }
            '(' => {
                if prev.is_none() {
                    return Err(err(i, "branch without a preceding atom"));
                }
                branch_stack.push(prev);
            }
            ')' => {
                prev = branch_stack.pop().ok_or_else(|| err(i, "unbalanced ')'"))?;
                if pending_order.is_some() {
                    return Err(err(i, "dangling bond symbol"));
                }
            }
            '.' => {
                if !branch_stack.is_empty() || pending_order.is_some() {
                    return Err(err(i, "misplaced '.'"));
                }
                prev = None;
            }
            '0'..='9' | '%' => {
                let (label, len) = if c == '%' {
                    let digits = text
                        .get(i + 1..i + 3)
                        .filter(|d| d.bytes().all(|b| b.is_ascii_digit()))
                        .ok_or_else(|| err(i, "'%' needs two digits"))?;
                    (digits.parse::<usize>().unwrap(), 3)
                } else {
                    ((bytes[i] - b'0') as usize, 1)
                };
                let at = prev.ok_or_else(|| err(i, "ring label without an atom"))?;
                let order = pending_order.take();
                match ring_open.remove(&label) {
                    Some((other, open_order)) => {
                        if other == at {
                            return Err(err(i, "ring closure onto the same atom"));
                        }
                        let o = match (open_order, order) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(err(i, "conflicting ring bond orders"))
                            }
                            (a, b) => a.or(b).unwrap_or(1),
                        };
                        bonds.push((other, at, o));
                    }
                    None => {
                        ring_open.insert(label, (at, order));
                    }
                }
                i += len;
                continue;
            }
            _ => return Err(err(i, "unsupported character")),
        }
        i += 1;
    }
    if !branch_stack.is_empty() {
        return Err(err(bytes.len(), "unclosed branch"));
    }
    if !ring_open.is_empty() {
        return Err(err(bytes.len(), "unclosed ring"));
    }
    if pending_order.is_some() {
        return Err(err(bytes.len(), "dangling bond symbol"));
    }
    let graph = MoleculeGraph::new(atoms, bonds);
    if !graph.is_well_formed() {
        return Err(err(bytes.len(), "duplicate or invalid bond"));
    }
    Ok(graph)
}
