//! Ohm–Kirchhoff circuit solves and the conductivity tensor.
//!
//! The full system has one unknown per vertex potential and one per edge
//! current. Unknowns are ordered `u_0..u_{n-1}, I_0..I_{m-1}`; rows are
//! ordered Ohm (one per edge), Kirchhoff (one per internal vertex, in
//! vertex order), then `u_w1 = 1` and `u_w2 = 0`. Edge `k` carries current
//! `I_k = c_k (u_a - u_b)` from `a` to `b`.
//!
//! Before solving, every vertex outside the components of `w1` and `w2` is
//! dropped; its potential is reported as `None` and its edges carry zero
//! current.

mod cg;
mod lu;

pub use cg::{pcg, CgOutcome};
pub use lu::SparseLu;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Axis;
use crate::graph::{
    build_contact_graph, CalibrationConstants, CircuitGraph, DisjointSets, GraphError, Terminals,
};
use crate::sample::{real, Sample};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("singular system at elimination step {step}")]
    Singular { step: usize },
    #[error("conjugate gradients broke down at iteration {iteration}")]
    Breakdown { iteration: usize },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {relative_residual:e}")]
    NoConvergence {
        iterations: usize,
        relative_residual: f64,
    },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Full direct below `direct_edge_limit` edges, Laplacian CG above.
    #[default]
    Auto,
    /// Sparse LU on the full `(u, I)` system.
    FullDirect,
    /// Conjugate gradients on the potential-only Laplacian.
    LaplacianCg,
}

impl std::str::FromStr for SolveMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(SolveMethod::Auto),
            "full-direct" => Ok(SolveMethod::FullDirect),
            "laplacian-cg" => Ok(SolveMethod::LaplacianCg),
            _ => Err(format!(
                "unknown solve method `{s}` (auto, full-direct, laplacian-cg)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub method: SolveMethod,
    pub direct_edge_limit: usize,
    pub cg_tolerance: f64,
    /// 0 selects `10 n + 1000` for `n` unknowns.
    pub cg_max_iterations: usize,
    /// Conductance of an all-conductor cell; results are divided by it.
    pub full_conductor_reference: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            direct_edge_limit: 100_000,
            cg_tolerance: 1e-12,
            cg_max_iterations: 0,
            full_conductor_reference: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return Err(SolveError::InvalidOptions(format!(
                "cg_tolerance must lie in (0, 1), got {}",
                self.cg_tolerance
            )));
        }
        if !(self.full_conductor_reference.is_finite() && self.full_conductor_reference > 0.0) {
            return Err(SolveError::InvalidOptions(format!(
                "full_conductor_reference must be positive, got {}",
                self.full_conductor_reference
            )));
        }
        Ok(())
    }

    fn route(&self, n_edges: usize) -> SolveMethod {
        match self.method {
            SolveMethod::Auto if n_edges < self.direct_edge_limit => SolveMethod::FullDirect,
            SolveMethod::Auto => SolveMethod::LaplacianCg,
            m => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemShape {
    pub unknowns: usize,
    pub ohm_rows: usize,
    pub kirchhoff_rows: usize,
    pub boundary_rows: usize,
}

impl SystemShape {
    pub fn equations(&self) -> usize {
        self.ohm_rows + self.kirchhoff_rows + self.boundary_rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub shape: SystemShape,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

pub fn assemble_system(g: &CircuitGraph) -> LinearSystem {
    let n = g.n_vertices();
    let m = g.n_edges();
    let (w1, w2) = g.terminals();
    let mut t = Vec::with_capacity(5 * m + 2);
    for (k, e) in g.edges().iter().enumerate() {
        t.push((k, n + k, 1.0));
        t.push((k, e.a, -e.conductance));
        t.push((k, e.b, e.conductance));
    }
    let mut kirchhoff_row = vec![usize::MAX; n];
    let mut row = m;
    for (v, slot) in kirchhoff_row.iter_mut().enumerate() {
        if !g.is_terminal(v) {
            *slot = row;
            row += 1;
        }
    }
    for (k, e) in g.edges().iter().enumerate() {
        if kirchhoff_row[e.a] != usize::MAX {
            t.push((kirchhoff_row[e.a], n + k, 1.0));
        }
        if kirchhoff_row[e.b] != usize::MAX {
            t.push((kirchhoff_row[e.b], n + k, -1.0));
        }
    }
    t.push((row, w1, 1.0));
    t.push((row + 1, w2, 1.0));
    let shape = SystemShape {
        unknowns: n + m,
        ohm_rows: m,
        kirchhoff_rows: n - 2,
        boundary_rows: 2,
    };
    let mut rhs = vec![0.0; shape.equations()];
    rhs[row] = 1.0;
    LinearSystem {
        shape,
        matrix: CsrMatrix::from_triplets(shape.equations(), shape.unknowns, &t),
        rhs,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSolution {
    /// `None` for vertices in floating components.
    pub potentials: Vec<Option<f64>>,
    /// Current along each edge from `a` to `b`.
    pub currents: Vec<f64>,
    /// Net current leaving `w1`.
    pub total_current: f64,
    /// Route taken; `None` when no linear solve was needed.
    pub method: Option<SolveMethod>,
}

impl CircuitSolution {
    /// Net current entering `w2`.
    pub fn terminal_inflow(&self, g: &CircuitGraph) -> f64 {
        let (_, w2) = g.terminals();
        net_outflow(g, &self.currents, w2).map_or(0.0, |x| -x)
    }

    /// Largest absolute current imbalance over internal vertices.
    pub fn kirchhoff_defect(&self, g: &CircuitGraph) -> f64 {
        let mut net = vec![0.0; g.n_vertices()];
        for (e, i) in g.edges().iter().zip(&self.currents) {
            net[e.a] += i;
            net[e.b] -= i;
        }
        (0..g.n_vertices())
            .filter(|&v| !g.is_terminal(v))
            .map(|v| net[v].abs())
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self, g: &CircuitGraph) -> String {
        let mut s = format!(
            "graphcond-solution 1\ntotal_current {}\n",
            real(self.total_current)
        );
        for (v, u) in self.potentials.iter().enumerate() {
            match u {
                Some(u) => writeln!(s, "potential {v} {}", real(*u)),
                None => writeln!(s, "potential {v} none"),
            }
            .expect("write to string");
        }
        for (k, (e, i)) in g.edges().iter().zip(&self.currents).enumerate() {
            writeln!(s, "current {k} {} {} {}", e.a, e.b, real(*i)).expect("write to string");
        }
        s
    }
}

fn net_outflow(g: &CircuitGraph, currents: &[f64], v: usize) -> Option<f64> {
    let mut out = 0.0;
    let mut seen = false;
    for (e, i) in g.edges().iter().zip(currents) {
        if e.a == v {
            out += i;
            seen = true;
        } else if e.b == v {
            out -= i;
            seen = true;
        }
    }
    seen.then_some(out)
}

pub fn solve_system(g: &CircuitGraph, opts: &SolverOptions) -> Result<CircuitSolution, SolveError> {
    opts.validate()?;
    let n = g.n_vertices();
    let (w1, w2) = g.terminals();
    let mut sets = DisjointSets::new(n);
    for e in g.edges() {
        sets.union(e.a, e.b);
    }
    let (r1, r2) = (sets.find(w1), sets.find(w2));
    let root: Vec<usize> = (0..n).map(|v| sets.find(v)).collect();

    if r1 != r2 {
        // each terminal's component sits at its terminal's potential
        let potentials = root
            .iter()
            .map(|&r| {
                if r == r1 {
                    Some(1.0)
                } else if r == r2 {
                    Some(0.0)
                } else {
                    None
                }
            })
            .collect();
        return Ok(CircuitSolution {
            potentials,
            currents: vec![0.0; g.n_edges()],
            total_current: 0.0,
            method: None,
        });
    }

    let mut compact = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for v in 0..n {
        if root[v] == r1 {
            compact[v] = kept.len();
            kept.push(v);
        }
    }
    let active_edges: Vec<usize> = (0..g.n_edges())
        .filter(|&k| root[g.edges()[k].a] == r1)
        .collect();
    let sub = CircuitGraph::new_unmerged(
        kept.len(),
        compact[w1],
        compact[w2],
        active_edges.iter().map(|&k| {
            let e = g.edges()[k];
            (compact[e.a], compact[e.b], e.conductance)
        }),
    )
    .expect("subgraph of a valid graph is valid");

    let method = opts.route(sub.n_edges());
    let (u_sub, i_sub) = match method {
        SolveMethod::FullDirect => solve_full(&sub)?,
        _ => solve_laplacian(&sub, opts)?,
    };

    let mut potentials = vec![None; n];
    for (c, &v) in kept.iter().enumerate() {
        potentials[v] = Some(u_sub[c]);
    }
    let mut currents = vec![0.0; g.n_edges()];
    for (c, &k) in active_edges.iter().enumerate() {
        currents[k] = i_sub[c];
    }
    let total_current = net_outflow(g, &currents, w1).unwrap_or(0.0);
    Ok(CircuitSolution {
        potentials,
        currents,
        total_current,
        method: Some(method),
    })
}

fn solve_full(g: &CircuitGraph) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let sys = assemble_system(g);
    let lu = SparseLu::factor(&sys.matrix)?;
    let mut x = lu.solve(&sys.rhs);
    let currents = x.split_off(g.n_vertices());
    Ok((x, currents))
}

const REFINEMENT_ROUNDS: usize = 4;
const REFINEMENT_FLOOR: f64 = 1e-14;

fn solve_laplacian(
    g: &CircuitGraph,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let n = g.n_vertices();
    let (w1, w2) = g.terminals();
    let mut index = vec![usize::MAX; n];
    let mut k = 0;
    for (v, slot) in index.iter_mut().enumerate() {
        if !g.is_terminal(v) {
            *slot = k;
            k += 1;
        }
    }
    let mut t = Vec::with_capacity(4 * g.n_edges());
    let mut b = vec![0.0; k];
    let fixed = |v: usize| if v == w1 { 1.0 } else { 0.0 };
    for e in g.edges() {
        let (ia, ib) = (index[e.a], index[e.b]);
        let c = e.conductance;
        match (ia != usize::MAX, ib != usize::MAX) {
            (true, true) => {
                t.extend([(ia, ia, c), (ib, ib, c), (ia, ib, -c), (ib, ia, -c)]);
            }
            (true, false) => {
                t.push((ia, ia, c));
                b[ia] += c * fixed(e.b);
            }
            (false, true) => {
                t.push((ib, ib, c));
                b[ib] += c * fixed(e.a);
            }
            (false, false) => {}
        }
    }
    let a = CsrMatrix::from_triplets(k, k, &t);
    let max_it = match opts.cg_max_iterations {
        0 => 10 * k + 1000,
        m => m,
    };
    let mut x = pcg(&a, &b, opts.cg_tolerance, max_it)?.x;
    // The stopping test is relative to |b|, which can dwarf the terminal
    // current; refine until every row defect is small against that current.
    let terminal_current = |x: &[f64]| -> f64 {
        g.edges()
            .iter()
            .filter_map(|e| {
                let other = if e.a == w1 {
                    e.b
                } else if e.b == w1 {
                    e.a
                } else {
                    return None;
                };
                let u = match index[other] {
                    usize::MAX => 0.0,
                    i => x[i],
                };
                Some(e.conductance * (1.0 - u))
            })
            .sum()
    };
    for _ in 0..REFINEMENT_ROUNDS {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        let target = opts.cg_tolerance * terminal_current(&x).abs();
        let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst <= target {
            break;
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = (target / norm).clamp(REFINEMENT_FLOOR, 0.5);
        let d = pcg(&a, &r, tol, max_it)?.x;
        for (x, d) in x.iter_mut().zip(d) {
            *x += d;
        }
    }
    let u: Vec<f64> = (0..n)
        .map(|v| match index[v] {
            usize::MAX if v == w2 => 0.0,
            usize::MAX => 1.0,
            i => x[i],
        })
        .collect();
    let currents = g
        .edges()
        .iter()
        .map(|e| e.conductance * (u[e.a] - u[e.b]))
        .collect();
    Ok((u, currents))
}

pub fn effective_conductance(g: &CircuitGraph) -> Result<f64, SolveError> {
    effective_conductance_with(g, &SolverOptions::default())
}

/// Total current divided by `full_conductor_reference`; exactly 0 when the
/// terminals are disconnected.
pub fn effective_conductance_with(
    g: &CircuitGraph,
    opts: &SolverOptions,
) -> Result<f64, SolveError> {
    let sol = solve_system(g, opts)?;
    Ok(sol.total_current / opts.full_conductor_reference)
}

/// Symmetric 3×3 effective conductivity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConductivityTensor {
    pub l: [[f64; 3]; 3],
}

/// Entry labels in [`ConductivityTensor::components`] order.
pub const TENSOR_COMPONENTS: [&str; 6] = ["xx", "yy", "zz", "xy", "xz", "yz"];
const COMPONENT_INDEX: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

impl ConductivityTensor {
    pub fn from_components(c: [f64; 6]) -> Self {
        let mut l = [[0.0; 3]; 3];
        for (&(i, j), v) in COMPONENT_INDEX.iter().zip(c) {
            l[i][j] = v;
            l[j][i] = v;
        }
        Self { l }
    }

    /// `[xx, yy, zz, xy, xz, yz]`
    pub fn components(&self) -> [f64; 6] {
        COMPONENT_INDEX.map(|(i, j)| self.l[i][j])
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [self.l[0][0], self.l[1][1], self.l[2][2]]
    }

    pub fn mean_diagonal(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() / 3.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomogenizationOptions {
    #[serde(flatten)]
    pub solver: SolverOptions,
    /// Side of the centered electrode square on each face for off-diagonal
    /// entries, as a fraction of the cell edge.
    pub central_zone_fraction: f64,
}

impl Default for HomogenizationOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            central_zone_fraction: 0.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomogenizationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Electrode pairs in [`TENSOR_COMPONENTS`] order.
pub fn tensor_terminals(zone_fraction: f64) -> [Terminals; 6] {
    COMPONENT_INDEX.map(|(i, j)| {
        let (a, b) = (Axis::ALL[i], Axis::ALL[j]);
        if i == j {
            Terminals::Opposite(a)
        } else {
            Terminals::Adjacent {
                first: a,
                second: b,
                zone_fraction,
            }
        }
    })
}

pub fn directional_conductance(
    sample: &Sample,
    terminals: &Terminals,
    cal: &CalibrationConstants,
    opts: &SolverOptions,
) -> Result<f64, HomogenizationError> {
    let g = build_contact_graph(sample, terminals, cal)?;
    Ok(effective_conductance_with(&g, opts)?)
}

pub fn conductivity_tensor(
    sample: &Sample,
    cal: &CalibrationConstants,
) -> Result<ConductivityTensor, HomogenizationError> {
    conductivity_tensor_with(sample, cal, &HomogenizationOptions::default())
}

/// The six electrode configurations are solved concurrently on the current
/// rayon pool.
pub fn conductivity_tensor_with(
    sample: &Sample,
    cal: &CalibrationConstants,
    opts: &HomogenizationOptions,
) -> Result<ConductivityTensor, HomogenizationError> {
    let values: Vec<f64> = tensor_terminals(opts.central_zone_fraction)
        .par_iter()
        .map(|t| directional_conductance(sample, t, cal, &opts.solver))
        .collect::<Result<_, _>>()?;
    let mut c = [0.0; 6];
    c.copy_from_slice(&values);
    Ok(ConductivityTensor::from_components(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Sphere, UnitCell, Vec3};
    use approx::assert_relative_eq;

    fn chain(cs: &[f64]) -> CircuitGraph {
        // w1 = 0, internal 1..cs.len()-1, w2 = cs.len()
        let n = cs.len() + 1;
        CircuitGraph::new(
            n,
            0,
            n - 1,
            cs.iter().enumerate().map(|(i, &c)| (i, i + 1, c)),
        )
        .unwrap()
    }

    fn both_routes(g: &CircuitGraph) -> [CircuitSolution; 2] {
        [SolveMethod::FullDirect, SolveMethod::LaplacianCg].map(|method| {
            solve_system(
                g,
                &SolverOptions {
                    method,
                    ..Default::default()
                },
            )
            .unwrap()
        })
    }

    #[test]
    fn shapes() {
        let s = assemble_system(&chain(&[1.0, 1.0])).shape;
        assert_eq!((s.unknowns, s.equations()), (5, 5));
        assert_eq!((s.ohm_rows, s.kirchhoff_rows, s.boundary_rows), (2, 1, 2));
        let empty = CircuitGraph::new(2, 0, 1, []).unwrap();
        let s = assemble_system(&empty).shape;
        assert_eq!((s.unknowns, s.equations()), (2, 2));
    }

    #[test]
    fn series_examples() {
        for sol in both_routes(&chain(&[1.0, 1.0])) {
            assert_relative_eq!(sol.total_current, 0.5, max_relative = 1e-12);
            assert_relative_eq!(sol.potentials[1].unwrap(), 0.5, max_relative = 1e-12);
        }
        for sol in both_routes(&chain(&[2.0, 2.0])) {
            assert_relative_eq!(sol.total_current, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn parallel_chains_add() {
        let g = CircuitGraph::new(
            4,
            0,
            3,
            [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        assert_relative_eq!(
            effective_conductance(&g).unwrap(),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn floating_component_absent() {
        // 3-4 is an island
        let g = CircuitGraph::new(5, 0, 2, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 5.0)]).unwrap();
        for sol in both_routes(&g) {
            assert_eq!(sol.potentials[3], None);
            assert_eq!(sol.potentials[4], None);
            assert_eq!(sol.currents[2], 0.0);
            assert_relative_eq!(
                sol.terminal_inflow(&g),
                sol.total_current,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn disconnected_is_exactly_zero() {
        let g = CircuitGraph::new(5, 0, 4, [(0, 1, 1.0), (2, 4, 1.0)]).unwrap();
        let sol = solve_system(&g, &SolverOptions::default()).unwrap();
        assert_eq!(sol.total_current, 0.0);
        assert_eq!(
            sol.potentials,
            vec![Some(1.0), Some(1.0), Some(0.0), None, Some(0.0)]
        );
        assert_eq!(effective_conductance(&g).unwrap(), 0.0);
    }

    #[test]
    fn normalization_divides() {
        let opts = SolverOptions {
            full_conductor_reference: 4.0,
            ..Default::default()
        };
        assert_relative_eq!(
            effective_conductance_with(&chain(&[2.0, 2.0]), &opts).unwrap(),
            0.25
        );
        let bad = SolverOptions {
            full_conductor_reference: 0.0,
            ..Default::default()
        };
        assert!(effective_conductance_with(&chain(&[1.0, 1.0]), &bad).is_err());
    }

    #[test]
    fn dump_lists_everything() {
        let g = CircuitGraph::new(4, 0, 2, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let sol = solve_system(&g, &SolverOptions::default()).unwrap();
        let text = sol.to_text(&g);
        assert!(text.contains("potential 3 none"));
        assert_eq!(
            text.lines().filter(|l| l.starts_with("current ")).count(),
            2
        );
    }

    #[test]
    fn empty_sample_zero_tensor() {
        let s = Sample::empty(UnitCell::unit());
        let t = conductivity_tensor(&s, &CalibrationConstants::default()).unwrap();
        assert_eq!(t, ConductivityTensor::default());
    }

    #[test]
    fn slab_along_x_only() {
        // overlapping spheres on a line through the cell along x
        let incs = (0..5)
            .map(|i| {
                Sphere::new(Vec3::new(0.1 + 0.2 * i as f64, 0.5, 0.5), 0.12)
                    .unwrap()
                    .into()
            })
            .collect();
        let s = Sample::new(UnitCell::unit(), incs);
        let t = conductivity_tensor(&s, &CalibrationConstants::default()).unwrap();
        assert!(t.l[0][0] > 0.0);
        assert_eq!(t.l[1][1], 0.0);
        assert_eq!(t.l[2][2], 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.l[i][j], t.l[j][i]);
            }
        }
    }

    #[test]
    fn components_round_trip() {
        let c = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = ConductivityTensor::from_components(c);
        assert_eq!(t.components(), c);
        assert_eq!(t.l[2][0], 5.0);
        assert_relative_eq!(t.mean_diagonal(), 2.0);
    }
}
