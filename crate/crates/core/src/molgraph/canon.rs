//! Canonical labelling by individualization-refinement.
//!
//! Each connected component is canonicalized separately: colour refinement
//! on element labels and `(neighbour cell, bond order)` multisets produces an
//! equitable ordered partition; non-discrete partitions branch on every
//! vertex of the first smallest non-singleton cell. The key of a component is
//! the lexicographically smallest leaf certificate. Automorphisms found
//! between equal leaves prune sibling branches in the same orbit.

use super::MoleculeGraph;
use crate::chem::Element;

/// Permutation-invariant key: equal iff the graphs are isomorphic as
/// element-labelled, bond-order-labelled graphs.
pub fn canonical_key(mol: &MoleculeGraph) -> String {
    let n = mol.atoms.len();
    let mut adj = vec![vec![0u8; n]; n];
    for &(a, b, o) in &mol.bonds {
        adj[a][b] = o;
        adj[b][a] = o;
    }
    let mut keys: Vec<String> = components(n, &adj)
        .into_iter()
        .map(|comp| {
            let sub = Sub::new(&comp, &mol.atoms, &adj);
            let order = sub.canonical_order();
            sub.render(&order)
        })
        .collect();
    keys.sort_unstable();
    keys.join(".")
}

fn components(n: usize, adj: &[Vec<u8>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let v = comp[i];
            for w in 0..n {
                if adj[v][w] > 0 && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// A connected component relabelled to `0..len`.
struct Sub {
    atoms: Vec<Element>,
    adj: Vec<Vec<u8>>,
    nbrs: Vec<Vec<(usize, u8)>>,
}

type Partition = Vec<Vec<usize>>;

struct Search {
    best: Option<(Vec<u8>, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
}

impl Sub {
    fn new(comp: &[usize], atoms: &[Element], adj: &[Vec<u8>]) -> Sub {
        let m = comp.len();
        let atoms: Vec<Element> = comp.iter().map(|&v| atoms[v]).collect();
        let adj: Vec<Vec<u8>> = comp
            .iter()
            .map(|&a| comp.iter().map(|&b| adj[a][b]).collect())
            .collect();
        let nbrs = (0..m)
            .map(|v| (0..m).filter(|&w| adj[v][w] > 0).map(|w| (w, adj[v][w])).collect())
            .collect();
        Sub { atoms, adj, nbrs }
    }

    fn canonical_order(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut initial: Partition = Vec::new();
        for el in Element::ALL {
            let cell: Vec<usize> = (0..n).filter(|&v| self.atoms[v] == el).collect();
            if !cell.is_empty() {
                initial.push(cell);
            }
        }
        let mut search = Search {
            best: None,
            automorphisms: Vec::new(),
        };
        self.explore(initial, &mut Vec::new(), &mut search);
        search.best.expect("at least one leaf").1
    }

    /// Splits cells by neighbour signature until the partition is equitable.
    fn refine(&self, mut p: Partition) -> Partition {
        let n = self.atoms.len();
        let mut cell_of = vec![0usize; n];
        loop {
            for (ci, cell) in p.iter().enumerate() {
                for &v in cell {
                    cell_of[v] = ci;
                }
            }
            let mut next: Partition = Vec::with_capacity(p.len());
            for cell in &p {
                if cell.len() == 1 {
                    next.push(cell.clone());
                    continue;
                }
                let mut keyed: Vec<(Vec<(usize, u8)>, usize)> = cell
                    .iter()
                    .map(|&v| {
                        let mut sig: Vec<(usize, u8)> =
                            self.nbrs[v].iter().map(|&(w, o)| (cell_of[w], o)).collect();
                        sig.sort_unstable();
                        (sig, v)
                    })
                    .collect();
                keyed.sort();
                let mut start = 0;
                for i in 1..=keyed.len() {
                    if i == keyed.len() || keyed[i].0 != keyed[start].0 {
                        next.push(keyed[start..i].iter().map(|k| k.1).collect());
                        start = i;
                    }
                }
            }
            // cells only ever split, so an unchanged count means stable
            if next.len() == p.len() {
                return next;
            }
            p = next;
        }
    }

    fn explore(&self, p: Partition, path: &mut Vec<usize>, s: &mut Search) {
        let p = self.refine(p);
        let target = p
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() > 1)
            .min_by_key(|(i, c)| (c.len(), *i))
            .map(|(i, _)| i);
        let Some(ti) = target else {
            let order: Vec<usize> = p.iter().map(|c| c[0]).collect();
            let cert = self.certificate(&order);
            match &s.best {
                None => s.best = Some((cert, order)),
                Some((best, best_order)) => {
                    if cert < *best {
                        s.best = Some((cert, order));
                    } else if cert == *best {
                        let mut auto = vec![0usize; order.len()];
                        for (k, &v) in best_order.iter().enumerate() {
                            auto[v] = order[k];
                        }
                        s.automorphisms.push(auto);
                    }
                }
            }
            return;
        };
        let mut explored: Vec<usize> = Vec::new();
        for &v in &p[ti] {
            if !explored.is_empty() && self.same_orbit(v, &explored, path, &s.automorphisms) {
                continue;
            }
            let mut child: Partition = Vec::with_capacity(p.len() + 1);
            for (ci, cell) in p.iter().enumerate() {
                if ci == ti {
                    child.push(vec![v]);
                    child.push(cell.iter().copied().filter(|&w| w != v).collect());
                } else {
                    child.push(cell.clone());
                }
            }
            path.push(v);
            self.explore(child, path, s);
            path.pop();
            explored.push(v);
        }
    }

    /// Is `v` in the orbit of an explored vertex under the automorphisms
    /// found so far that fix `path` pointwise?
    fn same_orbit(&self, v: usize, explored: &[usize], path: &[usize], autos: &[Vec<usize>]) -> bool {
        let n = self.atoms.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for a in autos.iter().filter(|a| path.iter().all(|&u| a[u] == u)) {
            for x in 0..n {
                let (r1, r2) = (find(&mut parent, x), find(&mut parent, a[x]));
                if r1 != r2 {
                    parent[r1] = r2;
                }
            }
        }
        let rv = find(&mut parent, v);
        explored.iter().any(|&w| find(&mut parent, w) == rv)
    }

    fn certificate(&self, order: &[usize]) -> Vec<u8> {
        let n = order.len();
        let mut cert = Vec::with_capacity(n + n * (n - 1) / 2);
        for &v in order {
            cert.push(self.atoms[v] as u8);
        }
        for i in 0..n {
            for j in i + 1..n {
                cert.push(self.adj[order[i]][order[j]]);
            }
        }
        cert
    }

    fn render(&self, order: &[usize]) -> String {
        let syms: Vec<&str> = order.iter().map(|&v| self.atoms[v].symbol()).collect();
        let mut bonds = Vec::new();
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                let o = self.adj[order[i]][order[j]];
                if o > 0 {
                    bonds.push(format!("{i}-{j}:{o}"));
                }
            }
        }
        format!("{}|{}", syms.join(","), bonds.join(","))
    }
}
