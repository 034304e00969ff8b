//! Gate dependency DAG.

use rand::Rng;

use crate::circuit::Circuit;

/// Precedence graph over gate indices. An edge `i -> j` means gate `j`
/// shares a qubit with the earlier gate `i` and no gate between them on
/// that qubit exists. Transitive edges are removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDag {
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

/// Builds the dependency DAG of a circuit, transitively reduced.
pub fn build_dag(circuit: &Circuit) -> GateDag {
    let n = circuit.len();
    let mut last_on: Vec<Option<usize>> = vec![None; circuit.n_qubits()];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    // ancestor sets as bitsets, needed for the transitive reduction
    let words = n.div_ceil(64);
    let mut anc: Vec<Vec<u64>> = Vec::with_capacity(n);

    for (j, g) in circuit.gates().iter().enumerate() {
        let mut direct: Vec<usize> = g.qubits().iter().filter_map(|&q| last_on[q]).collect();
        direct.sort_unstable();
        direct.dedup();

        let mut set = vec![0u64; words];
        for &p in &direct {
            set[p / 64] |= 1 << (p % 64);
            for (w, a) in set.iter_mut().zip(&anc[p]) {
                *w |= *a;
            }
        }
        // p is redundant if it is an ancestor of another direct predecessor
        let kept: Vec<usize> = direct
            .iter()
            .copied()
            .filter(|&p| {
                !direct
                    .iter()
                    .any(|&o| o != p && anc[o][p / 64] & (1 << (p % 64)) != 0)
            })
            .collect();
        preds[j] = kept;
        anc.push(set);
        for &q in g.qubits() {
            last_on[q] = Some(j);
        }
    }

    let mut succs = vec![Vec::new(); n];
    for (j, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(j);
        }
    }
    GateDag { preds, succs }
}

impl GateDag {
    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn predecessors(&self, j: usize) -> &[usize] {
        &self.preds[j]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .preds
            .iter()
            .enumerate()
            .flat_map(|(j, ps)| ps.iter().map(move |&p| (p, j)))
            .collect();
        e.sort_unstable();
        e
    }

    /// Number of nodes on the longest path.
    pub fn longest_path_len(&self) -> usize {
        let mut depth = vec![0usize; self.len()];
        for j in 0..self.len() {
            depth[j] = self.preds[j].iter().map(|&p| depth[p]).max().unwrap_or(0) + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Longest path where each node contributes `weight(node)`.
    pub fn weighted_longest_path(&self, weight: impl Fn(usize) -> f64) -> f64 {
        let mut finish = vec![0.0f64; self.len()];
        for j in 0..self.len() {
            let start = self.preds[j]
                .iter()
                .map(|&p| finish[p])
                .fold(0.0, f64::max);
            finish[j] = start + weight(j);
        }
        finish.into_iter().fold(0.0, f64::max)
    }

    /// True when `order` is a permutation of the nodes respecting every edge.
    pub fn is_topological_order(&self, order: &[usize]) -> bool {
        if order.len() != self.len() {
            return false;
        }
        let mut pos = vec![usize::MAX; self.len()];
        for (i, &g) in order.iter().enumerate() {
            if g >= self.len() || pos[g] != usize::MAX {
                return false;
            }
            pos[g] = i;
        }
        self.edges().iter().all(|&(a, b)| pos[a] < pos[b])
    }

    /// Uniformly picks among ready nodes at each step.
    pub fn random_topological_order<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..self.len()).filter(|&j| indeg[j] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while !ready.is_empty() {
            let k = rng.random_range(0..ready.len());
            let g = ready.swap_remove(k);
            order.push(g);
            for &s in &self.succs[g] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(s);
                }
            }
        }
        order
    }
}
