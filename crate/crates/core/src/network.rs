//! Watts-Strogatz small-world networks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::record::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct SmallWorld {
    pub network: Network,
    /// Lattice edges that were moved to a random endpoint.
    pub rewired_edges: usize,
    /// `true` for nodes none of whose lattice edges was rewired.
    pub lattice_intact: Vec<bool>,
}

impl SmallWorld {
    pub fn intact_fraction(&self) -> f64 {
        self.lattice_intact.iter().filter(|&&b| b).count() as f64 / self.lattice_intact.len() as f64
    }

    pub fn edge_count(&self) -> usize {
        self.network.directed_edge_count() / 2
    }
}

/// Ring of `n` nodes joined to their `k` nearest neighbours (`k / 2` per side);
/// each lattice edge `(i, i + d)` keeps `i` and is moved to a uniformly chosen
/// new endpoint with probability `p`, avoiding self-loops and duplicates.
pub fn generate_ws_network<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Result<SmallWorld> {
    if k % 2 != 0 || k < 2 || k >= n {
        return Err(Error::InvalidParameter(format!("ring degree k={k} must be even with 2 <= k < n={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("rewiring probability {p} outside [0, 1]")));
    }
    let half = k / 2;
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v: Vec<usize> = (1..=half).flat_map(|d| [(i + d) % n, (i + n - d) % n]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut intact = vec![true; n];
    let mut rewired = 0;
    for d in 1..=half {
        for i in 0..n {
            if !rng.random_bool(p) {
                continue;
            }
            let j = (i + d) % n;
            if adj[i].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != i && adj[i].binary_search(&w).is_err() {
                    break w;
                }
            };
            remove_sorted(&mut adj[i], j);
            remove_sorted(&mut adj[j], i);
            insert_sorted(&mut adj[i], w);
            insert_sorted(&mut adj[w], i);
            intact[i] = false;
            intact[j] = false;
            rewired += 1;
        }
    }
    let edges = adj.iter().enumerate().flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j)));
    let network = Network::from_directed_edges(n, edges)?;
    Ok(SmallWorld { network, rewired_edges: rewired, lattice_intact: intact })
}

fn remove_sorted(v: &mut Vec<usize>, x: usize) {
    if let Ok(pos) = v.binary_search(&x) {
        v.remove(pos);
    }
}

fn insert_sorted(v: &mut Vec<usize>, x: usize) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}
