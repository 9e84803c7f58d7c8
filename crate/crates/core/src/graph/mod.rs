//! Weighted contact graphs.
//!
//! Vertices are inclusions (or voxels) plus two terminal vertices standing
//! for the electrodes, edges are contacts weighted by their conductance.
//! For graphs built from a [`Sample`], inclusion `i` is vertex `i` and the
//! terminals are `w1 = n`, `w2 = n + 1`. Edges are stored with `a < b` and
//! sorted by `(a, b)`; parallel edges are merged by summing conductances.

mod format;
mod matrices;
mod union_find;

pub use format::{GraphParseError, GRAPH_HEADER};
pub use matrices::GraphMatrices;
pub use union_find::DisjointSets;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    boundary_contact, overlaps, Axis, Contact, ContactKind, Face, NeighborGrid, Participants,
    Periodicity, Shape,
};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactLaw {
    /// `c = k * depth`
    #[default]
    Linear,
    /// `c = k * depth^1.5`
    Hertz,
}

impl ContactLaw {
    pub fn exponent(self) -> f64 {
        match self {
            ContactLaw::Linear => 1.0,
            ContactLaw::Hertz => 1.5,
        }
    }
}

/// Conductance per unit overlap measure for every contact kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConstants {
    pub k_ss: f64,
    pub k_sc: f64,
    pub k_cc: f64,
    pub k_boundary_s: f64,
    pub k_boundary_c: f64,
    pub k_face: f64,
    pub k_edge: f64,
    pub k_vertex: f64,
    pub contact_law: ContactLaw,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self {
            k_ss: 1.0,
            k_sc: 1.0,
            k_cc: 1.0,
            k_boundary_s: 1.0,
            k_boundary_c: 1.0,
            k_face: 1.0,
            k_edge: 0.35,
            k_vertex: 0.15,
            contact_law: ContactLaw::Linear,
        }
    }
}

impl CalibrationConstants {
    pub fn validate(&self) -> Result<(), String> {
        for (name, k) in self.named() {
            if !(k.is_finite() && k > 0.0) {
                return Err(format!("{name} must be positive and finite, got {k}"));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("k_ss", self.k_ss),
            ("k_sc", self.k_sc),
            ("k_cc", self.k_cc),
            ("k_boundary_s", self.k_boundary_s),
            ("k_boundary_c", self.k_boundary_c),
            ("k_face", self.k_face),
            ("k_edge", self.k_edge),
            ("k_vertex", self.k_vertex),
        ]
    }

    /// Every constant multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k_ss: self.k_ss * factor,
            k_sc: self.k_sc * factor,
            k_cc: self.k_cc * factor,
            k_boundary_s: self.k_boundary_s * factor,
            k_boundary_c: self.k_boundary_c * factor,
            k_face: self.k_face * factor,
            k_edge: self.k_edge * factor,
            k_vertex: self.k_vertex * factor,
            contact_law: self.contact_law,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("constants serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let c: CalibrationConstants = toml::from_str(text).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    fn constant_for(&self, contact: &Contact) -> f64 {
        match contact.kind {
            ContactKind::SphereSphere => self.k_ss,
            ContactKind::SphereCylinder => self.k_sc,
            ContactKind::CylinderCylinder => self.k_cc,
            ContactKind::InclusionBoundary => match contact.boundary_shape {
                Some(Shape::Cylinder) => self.k_boundary_c,
                _ => self.k_boundary_s,
            },
        }
    }
}

pub fn conductance_from_contact(contact: &Contact, cal: &CalibrationConstants) -> f64 {
    debug_assert!(contact.overlap_depth > 0.0);
    cal.constant_for(contact) * contact.overlap_depth.powf(cal.contact_law.exponent())
}

/// Which pair of faces act as electrodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminals {
    /// Low and high faces of one axis (diagonal tensor entry).
    Opposite(Axis),
    /// Low faces of two different axes, restricted to a centered square of
    /// side `zone_fraction * L` on each face (off-diagonal entry).
    Adjacent {
        first: Axis,
        second: Axis,
        zone_fraction: f64,
    },
}

impl Terminals {
    pub fn faces(&self) -> (Face, Face) {
        match *self {
            Terminals::Opposite(a) => (Face::low(a), Face::high(a)),
            Terminals::Adjacent { first, second, .. } => (Face::low(first), Face::low(second)),
        }
    }

    /// Axes along which inclusion pairs may not wrap.
    pub fn periodicity(&self) -> Periodicity {
        match *self {
            Terminals::Opposite(a) => Periodicity::except(&[a]),
            Terminals::Adjacent { first, second, .. } => Periodicity::except(&[first, second]),
        }
    }

    fn zone_fraction(&self) -> Option<f64> {
        match *self {
            Terminals::Opposite(_) => None,
            Terminals::Adjacent { zone_fraction, .. } => Some(zone_fraction),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a circuit graph needs at least the two terminal vertices")]
    TooFewVertices,
    #[error("terminals must be two distinct vertices, got {0} and {1}")]
    BadTerminals(usize, usize),
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("edge joins the two terminals directly")]
    TerminalShort,
    #[error("edge ({0}, {1}) has non-positive or non-finite conductance {2}")]
    BadConductance(usize, usize, f64),
    #[error("off-diagonal terminals need two different axes and a zone fraction in (0, 1]")]
    BadTerminalSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    n_vertices: usize,
    terminals: [usize; 2],
    edges: Vec<Edge>,
}

impl CircuitGraph {
    /// Validates, orients, merges parallel edges and sorts.
    pub fn new<I>(n_vertices: usize, w1: usize, w2: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut raw = Self::new_unmerged(n_vertices, w1, w2, edges)?;
        // stable, so parallel conductances are summed in input order
        raw.edges.sort_by_key(|e| (e.a, e.b));
        let mut merged: Vec<Edge> = Vec::with_capacity(raw.edges.len());
        for e in raw.edges.drain(..) {
            match merged.last_mut() {
                Some(last) if (last.a, last.b) == (e.a, e.b) => last.conductance += e.conductance,
                _ => merged.push(e),
            }
        }
        Ok(Self {
            edges: merged,
            ..raw
        })
    }

    /// Validates and orients edges but keeps parallel edges and input order.
    pub fn new_unmerged<I>(
        n_vertices: usize,
        w1: usize,
        w2: usize,
        edges: I,
    ) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n_vertices < 2 {
            return Err(GraphError::TooFewVertices);
        }
        if w1 == w2 || w1 >= n_vertices || w2 >= n_vertices {
            return Err(GraphError::BadTerminals(w1, w2));
        }
        let mut out = Vec::new();
        for (i, j, c) in edges {
            if i >= n_vertices || j >= n_vertices {
                return Err(GraphError::VertexOutOfRange(i, j, n_vertices));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            if (i == w1 && j == w2) || (i == w2 && j == w1) {
                return Err(GraphError::TerminalShort);
            }
            if !(c.is_finite() && c > 0.0) {
                return Err(GraphError::BadConductance(i, j, c));
            }
            out.push(Edge {
                a: i.min(j),
                b: i.max(j),
                conductance: c,
            });
        }
        Ok(Self {
            n_vertices,
            terminals: [w1, w2],
            edges: out,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_internal(&self) -> usize {
        self.n_vertices - 2
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(w1, w2)`; `w1` is held at potential 1, `w2` at 0.
    pub fn terminals(&self) -> (usize, usize) {
        (self.terminals[0], self.terminals[1])
    }

    pub fn is_terminal(&self, v: usize) -> bool {
        v == self.terminals[0] || v == self.terminals[1]
    }

    pub fn with_terminals_swapped(&self) -> Self {
        Self {
            terminals: [self.terminals[1], self.terminals[0]],
            ..self.clone()
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.conductance *= factor;
        }
        g
    }

    /// Copy with edge `k` given a new conductance.
    pub fn with_edge_conductance(&self, k: usize, conductance: f64) -> Self {
        let mut g = self.clone();
        g.edges[k].conductance = conductance;
        g
    }

    /// Copy without the listed edges (indices into [`Self::edges`]).
    pub fn without_edges(&self, drop: &[usize]) -> Self {
        let mut g = self.clone();
        g.edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(k, _)| !drop.contains(k))
            .map(|(_, e)| *e)
            .collect();
        g
    }

    pub fn matrices(&self) -> GraphMatrices {
        GraphMatrices::new(self)
    }

    pub fn to_text(&self) -> String {
        format::write_graph(self)
    }

    pub fn parse(text: &str) -> Result<Self, GraphParseError> {
        format::parse_graph(text)
    }
}

pub fn graph_matrices(g: &CircuitGraph) -> GraphMatrices {
    GraphMatrices::new(g)
}

/// `true` iff the two terminals lie in the same connected component.
pub fn percolates(g: &CircuitGraph) -> bool {
    let mut sets = DisjointSets::new(g.n_vertices());
    for e in g.edges() {
        sets.union(e.a, e.b);
    }
    let (w1, w2) = g.terminals();
    sets.same(w1, w2)
}

fn in_central_zone(
    point: &crate::geometry::Vec3,
    face: Face,
    sample: &Sample,
    periodic: Periodicity,
    zone: f64,
) -> bool {
    let l = sample.cell.edge_length();
    face.axis.transverse().iter().all(|&t| {
        let mut x = point[t.index()];
        if periodic.is_periodic(t) {
            x = x.rem_euclid(l);
        }
        (x - 0.5 * l).abs() <= 0.5 * zone * l
    })
}

/// Every positive contact in `sample` for the given electrodes: pairwise
/// overlaps (one per periodic image) and inclusion-electrode overlaps.
pub fn sample_contacts(sample: &Sample, terminals: &Terminals) -> Vec<Contact> {
    let cell = sample.cell;
    let periodic = terminals.periodicity();
    let incs = &sample.inclusions;
    let mut out = Vec::new();
    let grid = NeighborGrid::build(incs, &cell);
    for (i, j) in grid.candidate_pairs() {
        let kind = ContactKind::between(incs[i].shape(), incs[j].shape());
        for o in overlaps(&incs[i], &incs[j], &cell, periodic) {
            out.push(Contact {
                kind,
                overlap_depth: o.depth,
                participants: Participants::Pair(i, j),
                boundary_shape: None,
            });
        }
    }
    let (f1, f2) = terminals.faces();
    for (i, inc) in incs.iter().enumerate() {
        for face in [f1, f2] {
            let Some(b) = boundary_contact(inc, face, &cell) else {
                continue;
            };
            if let Some(zone) = terminals.zone_fraction() {
                if !in_central_zone(&b.contact_point, face, sample, periodic, zone) {
                    continue;
                }
            }
            out.push(Contact {
                kind: ContactKind::InclusionBoundary,
                overlap_depth: b.depth,
                participants: Participants::Boundary { inclusion: i, face },
                boundary_shape: Some(inc.shape()),
            });
        }
    }
    out
}

pub fn build_contact_graph(
    sample: &Sample,
    terminals: &Terminals,
    cal: &CalibrationConstants,
) -> Result<CircuitGraph, GraphError> {
    if let Terminals::Adjacent {
        first,
        second,
        zone_fraction,
    } = *terminals
    {
        if first == second || !(zone_fraction > 0.0 && zone_fraction <= 1.0) {
            return Err(GraphError::BadTerminalSpec);
        }
    }
    let n = sample.len();
    let (w1, w2) = (n, n + 1);
    let (f1, _) = terminals.faces();
    let edges = sample_contacts(sample, terminals).into_iter().map(|c| {
        let g = conductance_from_contact(&c, cal);
        match c.participants {
            Participants::Pair(i, j) => (i, j, g),
            Participants::Boundary { inclusion, face } => {
                (inclusion, if face == f1 { w1 } else { w2 }, g)
            }
        }
    });
    CircuitGraph::new(n + 2, w1, w2, edges)
}
