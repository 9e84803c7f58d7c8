//! Shared fixtures and oracles for the integration tests.
#![allow(dead_code)]

use graphcond::graph::CircuitGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Vertex order w1, s1..s3, c1..c3, w2.
pub const REFERENCE_EDGES: [(usize, usize, f64); 13] = [
    (0, 1, 0.3),
    (0, 6, 0.79),
    (1, 3, 0.05),
    (1, 4, 0.31),
    (1, 6, 0.41),
    (2, 3, 0.05),
    (2, 5, 0.41),
    (2, 7, 0.38),
    (3, 4, 0.43),
    (3, 5, 0.31),
    (4, 5, 0.01),
    (4, 6, 0.14),
    (5, 7, 0.28),
];

pub fn reference_graph() -> CircuitGraph {
    CircuitGraph::new(8, 0, 7, REFERENCE_EDGES).unwrap()
}

/// Log-uniform in `[1e-2, 1e2]`.
pub fn conductance<R: Rng>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-2.0..2.0))
}

/// Connected graph on `n >= 3` vertices with terminals 0 and `n - 1`: a
/// random spanning tree plus `extra` random chords. No edge joins the
/// terminals directly.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> CircuitGraph {
    assert!(n >= 3);
    let w2 = n - 1;
    let forbidden = |a: usize, b: usize| (a.min(b), a.max(b)) == (0, w2);
    let mut edges = Vec::new();
    for v in 1..n {
        let mut u = rng.random_range(0..v);
        if forbidden(u, v) {
            u = 1;
        }
        edges.push((u, v, conductance(rng)));
    }
    let mut added = 0;
    while added < extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b || forbidden(a, b) {
            continue;
        }
        edges.push((a, b, conductance(rng)));
        added += 1;
    }
    CircuitGraph::new(n, 0, w2, edges).unwrap()
}

/// Random connected graph with between `lo` and `hi` vertices and a few
/// chords per vertex.
pub fn random_graph<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> CircuitGraph {
    let n = rng.random_range(lo..=hi);
    let extra = rng.random_range(0..=2 * n);
    random_connected_graph(rng, n, extra)
}

/// Two connected halves joined by one bridge, plus an optional floating
/// cluster. Returns the graph and the bridge's edge index.
pub fn bridged_graph<R: Rng>(rng: &mut R, half: usize, floating: usize) -> (CircuitGraph, usize) {
    let n = 2 * half + floating;
    let w2 = 2 * half - 1;
    let mut edges = Vec::new();
    let cluster = |edges: &mut Vec<(usize, usize, f64)>, base: usize, size: usize, rng: &mut R| {
        for v in 1..size {
            let u = rng.random_range(0..v);
            edges.push((base + u, base + v, conductance(rng)));
        }
        for _ in 0..size {
            let a = rng.random_range(0..size);
            let b = rng.random_range(0..size);
            if a != b {
                edges.push((base + a, base + b, conductance(rng)));
            }
        }
    };
    cluster(&mut edges, 0, half, rng);
    cluster(&mut edges, half, half, rng);
    if floating >= 2 {
        cluster(&mut edges, 2 * half, floating, rng);
    }
    // bridge between non-terminal vertices where possible
    let a = if half > 1 {
        rng.random_range(1..half)
    } else {
        0
    };
    let b = if half > 1 {
        rng.random_range(half..w2)
    } else {
        w2
    };
    let bridge = (a.min(b), a.max(b));
    edges.push((a, b, conductance(rng)));
    let g = CircuitGraph::new(n, 0, w2, edges).unwrap();
    let k = g.edges().iter().position(|e| (e.a, e.b) == bridge).unwrap();
    (g, k)
}

/// Series-parallel network with a closed-form conductance.
#[derive(Debug, Clone)]
pub enum SpNet {
    Leaf(f64),
    Series(Vec<SpNet>),
    Parallel(Vec<SpNet>),
}

impl SpNet {
    pub fn conductance(&self) -> f64 {
        match self {
            SpNet::Leaf(g) => *g,
            SpNet::Series(parts) => 1.0 / parts.iter().map(|p| 1.0 / p.conductance()).sum::<f64>(),
            SpNet::Parallel(parts) => parts.iter().map(SpNet::conductance).sum(),
        }
    }

    pub fn random<R: Rng>(rng: &mut R, depth: usize) -> SpNet {
        if depth == 0 || rng.random_bool(0.3) {
            return SpNet::Leaf(conductance(rng));
        }
        let k = rng.random_range(2..=3);
        let parts = (0..k).map(|_| SpNet::random(rng, depth - 1)).collect();
        if rng.random_bool(0.5) {
            SpNet::Series(parts)
        } else {
            SpNet::Parallel(parts)
        }
    }

    /// Circuit between vertices 0 and 1.
    pub fn to_graph(&self) -> CircuitGraph {
        let mut edges = Vec::new();
        let mut next = 2;
        self.emit(0, 1, &mut next, &mut edges);
        CircuitGraph::new(next, 0, 1, edges).unwrap()
    }

    fn emit(&self, from: usize, to: usize, next: &mut usize, edges: &mut Vec<(usize, usize, f64)>) {
        match self {
            // two halves of conductance 2g keep terminals from touching
            SpNet::Leaf(g) if (from, to) == (0, 1) => {
                let mid = *next;
                *next += 1;
                edges.push((from, mid, 2.0 * g));
                edges.push((mid, to, 2.0 * g));
            }
            SpNet::Leaf(g) => edges.push((from, to, *g)),
            SpNet::Series(parts) => {
                let mut a = from;
                for (i, p) in parts.iter().enumerate() {
                    let b = if i + 1 == parts.len() {
                        to
                    } else {
                        *next += 1;
                        *next - 1
                    };
                    p.emit(a, b, next, edges);
                    a = b;
                }
            }
            SpNet::Parallel(parts) => {
                for p in parts {
                    p.emit(from, to, next, edges);
                }
            }
        }
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
