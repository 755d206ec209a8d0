//! Brute-force enumeration of labeled d-regular graphs on a few vertices.

#![allow(dead_code)]

use std::collections::HashMap;

use regraph::graph::RegularGraph;

/// Bit `u * n + v` is set for each edge `u < v`.
pub type EdgeMask = u64;

pub fn mask_of(g: &RegularGraph) -> EdgeMask {
    g.edges().iter().fold(0, |m, &(u, v)| m | 1 << (u.min(v) * g.n() + u.max(v)))
}

/// Every labeled simple d-regular graph on `n <= 8` vertices, each exactly once.
pub fn enumerate_regular(n: usize, d: usize) -> Vec<EdgeMask> {
    assert!(n <= 8, "mask holds n*n <= 64 bits");
    let mut out = Vec::new();
    let mut deg = vec![0usize; n];
    extend(n, d, &mut deg, 0, &mut out);
    out
}

fn extend(n: usize, d: usize, deg: &mut [usize], mask: EdgeMask, out: &mut Vec<EdgeMask>) {
    // The smallest unfinished vertex takes all its remaining partners at once,
    // chosen in increasing order among later vertices, so no graph repeats.
    let Some(v) = (0..n).find(|&v| deg[v] < d) else {
        out.push(mask);
        return;
    };
    let need = d - deg[v];
    let candidates: Vec<usize> = (v + 1..n).filter(|&u| deg[u] < d && mask & (1 << (v * n + u)) == 0).collect();
    choose(n, d, deg, mask, v, &candidates, 0, need, out);
}

#[allow(clippy::too_many_arguments)]
fn choose(
    n: usize,
    d: usize,
    deg: &mut [usize],
    mask: EdgeMask,
    v: usize,
    candidates: &[usize],
    from: usize,
    need: usize,
    out: &mut Vec<EdgeMask>,
) {
    if need == 0 {
        extend(n, d, deg, mask, out);
        return;
    }
    for k in from..candidates.len() {
        if candidates.len() - k < need {
            break;
        }
        let u = candidates[k];
        deg[v] += 1;
        deg[u] += 1;
        choose(n, d, deg, mask | 1 << (v * n + u), v, candidates, k + 1, need - 1, out);
        deg[v] -= 1;
        deg[u] -= 1;
    }
}

/// Position of each graph in the enumeration.
pub fn index_of(graphs: &[EdgeMask]) -> HashMap<EdgeMask, usize> {
    graphs.iter().enumerate().map(|(i, &m)| (m, i)).collect()
}
