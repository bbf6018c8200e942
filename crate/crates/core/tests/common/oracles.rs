//! Brute-force reference implementations used to check the fast paths.
//! Nothing here shares code with the library beyond its data types.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use sqmg_core::chem::Element;
use sqmg_core::molgraph::{MoleculeGraph, ValenceTable};

/// Validity recomputed from an adjacency matrix: degree sums against the
/// table and connectivity by transitive closure.
pub fn brute_valid(mol: &MoleculeGraph, valence: &ValenceTable) -> (bool, Vec<usize>, bool) {
    let n = mol.atoms.len();
    let mut order = vec![vec![0u32; n]; n];
    for &(a, b, o) in &mol.bonds {
        order[a][b] += o as u32;
        order[b][a] += o as u32;
    }
    let over: Vec<usize> = (0..n)
        .filter(|&i| order[i].iter().sum::<u32>() > valence.max_valence(mol.atoms[i]) as u32)
        .collect();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || order[i][j] > 0).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let connected = n > 0 && reach[0].iter().all(|&r| r);
    (n > 0 && over.is_empty() && connected, over, connected)
}

/// Tries every bijection. Only for small graphs.
pub fn brute_isomorphic(g: &MoleculeGraph, h: &MoleculeGraph) -> bool {
    let n = g.atoms.len();
    if n != h.atoms.len() || g.bonds.len() != h.bonds.len() {
        return false;
    }
    let mg = matrix(g);
    let mh = matrix(h);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let matches = |p: &[usize]| {
        (0..n).all(|i| g.atoms[i] == h.atoms[p[i]])
            && (0..n).all(|i| (0..n).all(|j| mg[i][j] == mh[p[i]][p[j]]))
    };
    if matches(&perm) {
        return true;
    }
    // Heap's algorithm
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            if matches(&perm) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

fn matrix(g: &MoleculeGraph) -> Vec<Vec<u8>> {
    let n = g.atoms.len();
    let mut m = vec![vec![0u8; n]; n];
    for &(a, b, o) in &g.bonds {
        m[a][b] = o;
        m[b][a] = o;
    }
    m
}

pub fn random_graph(
    rng: &mut impl Rng,
    max_atoms: usize,
    elements: &[Element],
    edge_prob: f64,
) -> MoleculeGraph {
    let n = rng.gen_range(1..=max_atoms);
    let atoms: Vec<Element> = (0..n).map(|_| *elements.choose(rng).unwrap()).collect();
    let mut bonds = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(edge_prob) {
                bonds.push((i, j, rng.gen_range(1..=3)));
            }
        }
    }
    MoleculeGraph::new(atoms, bonds)
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
