use super::CircuitGraph;
use crate::sparse::CsrMatrix;

/// Matrix views of a circuit graph.
///
/// * `adjacency` - symmetric weighted adjacency, zero diagonal
/// * `incidence` - vertex-by-edge 0/1 matrix, two ones per column
/// * `conductance` - the diagonal of C, one entry per edge
/// * `degree` - the diagonal of D = diag(A c), the weighted degrees
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub adjacency: CsrMatrix,
    pub incidence: CsrMatrix,
    pub conductance: Vec<f64>,
    pub degree: Vec<f64>,
}

impl GraphMatrices {
    pub fn new(g: &CircuitGraph) -> Self {
        let n = g.n_vertices();
        let m = g.n_edges();
        let mut adj = Vec::with_capacity(2 * m);
        let mut inc = Vec::with_capacity(2 * m);
        for (k, e) in g.edges().iter().enumerate() {
            adj.push((e.a, e.b, e.conductance));
            adj.push((e.b, e.a, e.conductance));
            inc.push((e.a, k, 1.0));
            inc.push((e.b, k, 1.0));
        }
        let incidence = CsrMatrix::from_triplets(n, m, &inc);
        let conductance: Vec<f64> = g.edges().iter().map(|e| e.conductance).collect();
        let degree = incidence.mul_vec(&conductance);
        Self {
            adjacency: CsrMatrix::from_triplets(n, n, &adj),
            incidence,
            conductance,
            degree,
        }
    }

    /// `A * C * A^T - D`, which equals the adjacency matrix.
    pub fn reconstructed_adjacency(&self) -> CsrMatrix {
        let n = self.incidence.nrows();
        let acat = self
            .incidence
            .scale_columns(&self.conductance)
            .mul(&self.incidence.transpose());
        let mut trip = acat.triplets();
        trip.extend(self.degree.iter().enumerate().map(|(i, &d)| (i, i, -d)));
        CsrMatrix::from_triplets(n, n, &trip)
    }

    /// Largest elementwise deviation between the adjacency matrix and its
    /// reconstruction from incidence, conductance and degree.
    pub fn identity_error(&self) -> f64 {
        let n = self.adjacency.nrows();
        let mut trip = self.reconstructed_adjacency().triplets();
        trip.extend(
            self.adjacency
                .triplets()
                .into_iter()
                .map(|(i, j, v)| (i, j, -v)),
        );
        CsrMatrix::from_triplets(n, n, &trip)
            .triplets()
            .into_iter()
            .map(|(_, _, v)| v.abs())
            .fold(0.0, f64::max)
    }
}
