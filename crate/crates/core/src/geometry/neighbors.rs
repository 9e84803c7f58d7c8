use super::{Inclusion, UnitCell, Vec3};

/// Periodic cell list over inclusion centers.
///
/// Cells are at least `2 * max_reach` wide, so any two inclusions that can
/// touch sit in the same or adjacent cells, and any point inside an inclusion
/// lies in a cell adjacent to the inclusion's center cell.
#[derive(Debug, Clone)]
pub struct NeighborGrid {
    cell: UnitCell,
    per_axis: usize,
    bins: Vec<Vec<usize>>,
    home: Vec<usize>,
}

impl NeighborGrid {
    pub fn with_reach(cell: &UnitCell, max_reach: f64, expected_items: usize) -> Self {
        let l = cell.edge_length();
        let mut per_axis = if max_reach > 0.0 {
            (l / (2.0 * max_reach)).floor().max(1.0) as usize
        } else {
            1
        };
        // keep the bin count within a small multiple of the item count
        let cap = ((expected_items.max(1) * 8) as f64).cbrt().ceil() as usize;
        per_axis = per_axis.min(cap.max(1)).min(256);
        Self {
            cell: *cell,
            per_axis,
            bins: vec![Vec::new(); per_axis.pow(3)],
            home: Vec::new(),
        }
    }

    pub fn build(inclusions: &[Inclusion], cell: &UnitCell) -> Self {
        let max_reach = inclusions.iter().map(Inclusion::reach).fold(0.0, f64::max);
        let mut grid = Self::with_reach(cell, max_reach, inclusions.len());
        for inc in inclusions {
            grid.push(&inc.center());
        }
        grid
    }

    /// Adds the next item (its index is the number of items pushed so far).
    pub fn push(&mut self, center: &Vec3) -> usize {
        let id = self.home.len();
        let bin = self.bin_of(center);
        self.bins[bin].push(id);
        self.home.push(bin);
        id
    }

    pub fn len(&self) -> usize {
        self.home.len()
    }

    pub fn is_empty(&self) -> bool {
        self.home.is_empty()
    }

    fn coords_of(&self, p: &Vec3) -> [usize; 3] {
        let w = self.cell.wrap(p);
        let scale = self.per_axis as f64 / self.cell.edge_length();
        let m = self.per_axis;
        [0, 1, 2].map(|k| ((w[k] * scale) as usize).min(m - 1))
    }

    fn bin_of(&self, p: &Vec3) -> usize {
        let [x, y, z] = self.coords_of(p);
        x + self.per_axis * (y + self.per_axis * z)
    }

    fn neighbor_bins(&self, coords: [usize; 3]) -> Vec<usize> {
        let m = self.per_axis as isize;
        let mut out = Vec::with_capacity(27);
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let x = (coords[0] as isize + dx).rem_euclid(m) as usize;
                    let y = (coords[1] as isize + dy).rem_euclid(m) as usize;
                    let z = (coords[2] as isize + dz).rem_euclid(m) as usize;
                    out.push(x + self.per_axis * (y + self.per_axis * z));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Items whose centers are close enough to `p` to possibly contain it or
    /// touch a shape centered at `p` with reach up to `max_reach`.
    pub fn candidates_near(&self, p: &Vec3) -> impl Iterator<Item = usize> + '_ {
        self.neighbor_bins(self.coords_of(p))
            .into_iter()
            .flat_map(move |b| self.bins[b].iter().copied())
    }

    /// Every candidate pair `(i, j)` with `i < j`, each listed once.
    pub fn candidate_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.per_axis;
        let mut out = Vec::new();
        for (bin, items) in self.bins.iter().enumerate() {
            if items.is_empty() {
                continue;
            }
            let coords = [bin % m, (bin / m) % m, bin / (m * m)];
            let near = self.neighbor_bins(coords);
            for &i in items {
                for &nb in &near {
                    for &j in &self.bins[nb] {
                        if j > i {
                            out.push((i, j));
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pair_overlap, Periodicity, Sphere};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairs_cover_every_overlap() {
        let cell = UnitCell::unit();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let incs: Vec<Inclusion> = (0..300)
            .map(|_| {
                Sphere::new(
                    Vec3::new(rng.random(), rng.random(), rng.random()),
                    rng.random_range(0.01..0.06),
                )
                .unwrap()
                .into()
            })
            .collect();
        let grid = NeighborGrid::build(&incs, &cell);
        let pairs: std::collections::HashSet<_> = grid.candidate_pairs().into_iter().collect();
        for i in 0..incs.len() {
            for j in (i + 1)..incs.len() {
                if pair_overlap(&incs[i], &incs[j], &cell, Periodicity::FULL).is_some() {
                    assert!(pairs.contains(&(i, j)), "missed pair {i} {j}");
                }
            }
        }
    }

    #[test]
    fn tiny_grid_lists_each_pair_once() {
        let cell = UnitCell::unit();
        let incs: Vec<Inclusion> = (0..5)
            .map(|i| {
                Sphere::new(Vec3::new(0.2 * i as f64, 0.1, 0.1), 0.3)
                    .unwrap()
                    .into()
            })
            .collect();
        let grid = NeighborGrid::build(&incs, &cell);
        let pairs = grid.candidate_pairs();
        assert_eq!(pairs.len(), 10);
    }
}
