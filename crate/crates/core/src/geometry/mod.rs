//! Shapes, periodic distances and overlap measurement.
//!
//! Every inclusion is treated as a capsule: a sphere is a capsule with a
//! zero-length axis, a cylinder is the set of points within `radius` of its
//! axis segment. Contacts are measured by the penetration depth
//! `r_a + r_b - d`, where `d` is the distance between the two axis segments
//! under the periodic images allowed by a [`Periodicity`] mask.

mod neighbors;
mod segment;

pub use neighbors::NeighborGrid;
pub use segment::{closest_point_on_segment, closest_points_between_segments};

use rand::Rng;
use thiserror::Error;

use crate::sample::Sample;

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("cell edge length must be positive and finite, got {0}")]
    BadCell(f64),
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("half length must be positive and finite, got {0}")]
    BadHalfLength(f64),
    #[error("axis must be a unit vector, got norm {0}")]
    BadAxis(f64),
    #[error("center has a non-finite component")]
    BadCenter,
}

/// Cubic periodic cell `[0, L)^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCell {
    edge_length: f64,
}

impl UnitCell {
    pub fn new(edge_length: f64) -> Result<Self, ShapeError> {
        if edge_length.is_finite() && edge_length > 0.0 {
            Ok(Self { edge_length })
        } else {
            Err(ShapeError::BadCell(edge_length))
        }
    }

    pub fn unit() -> Self {
        Self { edge_length: 1.0 }
    }

    pub fn edge_length(&self) -> f64 {
        self.edge_length
    }

    pub fn volume(&self) -> f64 {
        self.edge_length.powi(3)
    }

    /// Wraps a point back into `[0, L)^3`.
    pub fn wrap(&self, p: &Vec3) -> Vec3 {
        p.map(|x| {
            let w = x.rem_euclid(self.edge_length);
            // rem_euclid can round up to exactly L for tiny negative inputs
            if w >= self.edge_length {
                0.0
            } else {
                w
            }
        })
    }
}

impl Default for UnitCell {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    /// The two other axes, in increasing order.
    pub fn transverse(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}` (expected x, y or z)")),
        }
    }
}

/// One of the six faces of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: Axis,
    /// `false` for the plane at coordinate 0, `true` for the plane at `L`.
    pub high: bool,
}

impl Face {
    pub fn low(axis: Axis) -> Self {
        Self { axis, high: false }
    }

    pub fn high(axis: Axis) -> Self {
        Self { axis, high: true }
    }

    /// Face id in `0..6`: x-, x+, y-, y+, z-, z+.
    pub fn id(self) -> usize {
        2 * self.axis.index() + usize::from(self.high)
    }

    pub fn from_id(id: usize) -> Option<Self> {
        let axis = Axis::from_index(id / 2)?;
        Some(Self {
            axis,
            high: id % 2 == 1,
        })
    }
}

/// Which axes wrap periodically when pairing inclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Periodicity(pub [bool; 3]);

impl Periodicity {
    pub const FULL: Periodicity = Periodicity([true; 3]);

    /// Periodic everywhere except along the given axes.
    pub fn except(axes: &[Axis]) -> Self {
        let mut p = [true; 3];
        for a in axes {
            p[a.index()] = false;
        }
        Periodicity(p)
    }

    pub fn is_periodic(&self, axis: Axis) -> bool {
        self.0[axis.index()]
    }
}

fn wrap_component(d: f64, l: f64) -> f64 {
    // Result lies in (-L/2, L/2]; an exact half-cell tie goes to +L/2.
    d - l * (d / l - 0.5).ceil()
}

/// Shortest displacement `q - p` under full periodic wrapping.
pub fn min_image_delta(p: &Vec3, q: &Vec3, cell: &UnitCell) -> Vec3 {
    min_image_delta_masked(p, q, cell, Periodicity::FULL)
}

/// Like [`min_image_delta`], wrapping only the periodic axes.
pub fn min_image_delta_masked(p: &Vec3, q: &Vec3, cell: &UnitCell, periodic: Periodicity) -> Vec3 {
    let l = cell.edge_length;
    let mut d = q - p;
    for k in 0..3 {
        if periodic.0[k] {
            d[k] = wrap_component(d[k], l);
        }
    }
    d
}

/// Every periodic image displacement of `q` relative to `p` whose length
/// along each periodic axis is at most `reach`. Always contains the
/// minimum image.
pub(crate) fn image_deltas(
    p: &Vec3,
    q: &Vec3,
    cell: &UnitCell,
    periodic: Periodicity,
    reach: f64,
) -> Vec<Vec3> {
    let l = cell.edge_length;
    let base = min_image_delta_masked(p, q, cell, periodic);
    let mut per_axis: [Vec<f64>; 3] = Default::default();
    for k in 0..3 {
        per_axis[k].push(base[k]);
        if periodic.0[k] {
            let span = (reach / l).ceil() as i64 + 1;
            for s in -span..=span {
                if s == 0 {
                    continue;
                }
                let d = base[k] + s as f64 * l;
                if d.abs() <= reach {
                    per_axis[k].push(d);
                }
            }
        }
    }
    let mut out = Vec::with_capacity(per_axis.iter().map(Vec::len).product());
    for &x in &per_axis[0] {
        for &y in &per_axis[1] {
            for &z in &per_axis[2] {
                out.push(Vec3::new(x, y, z));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec3, radius: f64) -> Result<Self, ShapeError> {
        check_center(&center)?;
        check_positive(radius, ShapeError::BadRadius)?;
        Ok(Self { center, radius })
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center: Vec3,
    pub axis: Vec3,
    pub half_length: f64,
    pub radius: f64,
}

impl Cylinder {
    pub fn new(
        center: Vec3,
        axis: Vec3,
        half_length: f64,
        radius: f64,
    ) -> Result<Self, ShapeError> {
        check_center(&center)?;
        check_positive(radius, ShapeError::BadRadius)?;
        check_positive(half_length, ShapeError::BadHalfLength)?;
        let norm = axis.norm();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(ShapeError::BadAxis(norm));
        }
        Ok(Self {
            center,
            axis,
            half_length,
            radius,
        })
    }

    pub fn endpoints(&self) -> (Vec3, Vec3) {
        let h = self.axis * self.half_length;
        (self.center - h, self.center + h)
    }

    /// Length over radius.
    pub fn aspect(&self) -> f64 {
        2.0 * self.half_length / self.radius
    }

    /// Capsule volume: the cylindrical body plus two hemispherical caps.
    pub fn volume(&self) -> f64 {
        let pi = std::f64::consts::PI;
        pi * self.radius.powi(2) * 2.0 * self.half_length + 4.0 / 3.0 * pi * self.radius.powi(3)
    }
}

fn check_center(c: &Vec3) -> Result<(), ShapeError> {
    if c.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ShapeError::BadCenter)
    }
}

fn check_positive(x: f64, err: fn(f64) -> ShapeError) -> Result<(), ShapeError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(err(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Sphere,
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inclusion {
    Sphere(Sphere),
    Cylinder(Cylinder),
}

impl Inclusion {
    pub fn shape(&self) -> Shape {
        match self {
            Inclusion::Sphere(_) => Shape::Sphere,
            Inclusion::Cylinder(_) => Shape::Cylinder,
        }
    }

    pub fn center(&self) -> Vec3 {
        match self {
            Inclusion::Sphere(s) => s.center,
            Inclusion::Cylinder(c) => c.center,
        }
    }

    pub fn set_center(&mut self, center: Vec3) {
        match self {
            Inclusion::Sphere(s) => s.center = center,
            Inclusion::Cylinder(c) => c.center = center,
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Inclusion::Sphere(s) => s.radius,
            Inclusion::Cylinder(c) => c.radius,
        }
    }

    /// Distance from the center to the farthest point of the shape.
    pub fn reach(&self) -> f64 {
        match self {
            Inclusion::Sphere(s) => s.radius,
            Inclusion::Cylinder(c) => c.radius + c.half_length,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Inclusion::Sphere(s) => s.volume(),
            Inclusion::Cylinder(c) => c.volume(),
        }
    }

    /// Axis segment relative to the center (degenerate for spheres).
    fn local_segment(&self) -> (Vec3, Vec3) {
        match self {
            Inclusion::Sphere(_) => (Vec3::zeros(), Vec3::zeros()),
            Inclusion::Cylinder(c) => {
                let h = c.axis * c.half_length;
                (-h, h)
            }
        }
    }

    /// Scales every linear size; the axis length only when `axial` is set.
    pub fn scaled(&self, factor: f64, axial: bool) -> Inclusion {
        match *self {
            Inclusion::Sphere(s) => Inclusion::Sphere(Sphere {
                radius: s.radius * factor,
                ..s
            }),
            Inclusion::Cylinder(c) => Inclusion::Cylinder(Cylinder {
                radius: c.radius * factor,
                half_length: if axial {
                    c.half_length * factor
                } else {
                    c.half_length
                },
                ..c
            }),
        }
    }

    /// Periodic point membership.
    pub fn contains(&self, point: &Vec3, cell: &UnitCell) -> bool {
        let (s0, s1) = self.local_segment();
        let r = self.radius();
        let reach = self.reach();
        if reach < 0.5 * cell.edge_length {
            // only the minimum image can be within reach
            let d = min_image_delta(&self.center(), point, cell);
            if d.norm_squared() > reach * reach {
                return false;
            }
            let closest = closest_point_on_segment(&d, &s0, &s1);
            return (d - closest).norm_squared() <= r * r;
        }
        image_deltas(&self.center(), point, cell, Periodicity::FULL, reach)
            .iter()
            .any(|d| {
                let closest = closest_point_on_segment(d, &s0, &s1);
                (d - closest).norm_squared() <= r * r
            })
    }
}

impl From<Sphere> for Inclusion {
    fn from(s: Sphere) -> Self {
        Inclusion::Sphere(s)
    }
}

impl From<Cylinder> for Inclusion {
    fn from(c: Cylinder) -> Self {
        Inclusion::Cylinder(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContactKind {
    SphereSphere,
    SphereCylinder,
    CylinderCylinder,
    InclusionBoundary,
}

impl ContactKind {
    pub fn between(a: Shape, b: Shape) -> Self {
        match (a, b) {
            (Shape::Sphere, Shape::Sphere) => ContactKind::SphereSphere,
            (Shape::Cylinder, Shape::Cylinder) => ContactKind::CylinderCylinder,
            _ => ContactKind::SphereCylinder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Participants {
    Pair(usize, usize),
    Boundary { inclusion: usize, face: Face },
}

/// A classified overlap with positive depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub kind: ContactKind,
    pub overlap_depth: f64,
    pub participants: Participants,
    /// Shape of the inclusion for boundary contacts (selects the constant).
    pub boundary_shape: Option<Shape>,
}

/// Raw overlap between two shapes for one periodic image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub depth: f64,
    /// Unit vector pointing from the first shape toward the second.
    pub normal: Vec3,
}

/// All overlaps of `b` (and its periodic images) with `a`.
pub fn overlaps(
    a: &Inclusion,
    b: &Inclusion,
    cell: &UnitCell,
    periodic: Periodicity,
) -> Vec<Overlap> {
    let reach = a.reach() + b.reach();
    let (a0, a1) = a.local_segment();
    let (b0, b1) = b.local_segment();
    let rsum = a.radius() + b.radius();
    let mut out = Vec::new();
    for delta in image_deltas(&a.center(), &b.center(), cell, periodic, reach) {
        let (pa, pb) = closest_points_between_segments(&a0, &a1, &(b0 + delta), &(b1 + delta));
        let sep = pb - pa;
        let d = sep.norm();
        let depth = rsum - d;
        if depth > 0.0 {
            let normal = if d > 0.0 { sep / d } else { Vec3::x() };
            out.push(Overlap { depth, normal });
        }
    }
    out
}

fn deepest(list: Vec<Overlap>) -> Option<Overlap> {
    list.into_iter().max_by(|x, y| x.depth.total_cmp(&y.depth))
}

fn shape_order_key(inc: &Inclusion) -> [f64; 8] {
    match inc {
        Inclusion::Sphere(s) => [
            s.center.x, s.center.y, s.center.z, s.radius, 0.0, 0.0, 0.0, 0.0,
        ],
        Inclusion::Cylinder(c) => [
            c.center.x,
            c.center.y,
            c.center.z,
            c.radius,
            c.axis.x,
            c.axis.y,
            c.axis.z,
            c.half_length,
        ],
    }
}

/// Deepest overlap between two inclusions, measured in a canonical argument
/// order so that `pair_overlap(a, b)` and `pair_overlap(b, a)` agree bit for
/// bit.
pub fn pair_overlap(
    a: &Inclusion,
    b: &Inclusion,
    cell: &UnitCell,
    periodic: Periodicity,
) -> Option<Overlap> {
    let ka = shape_order_key(a);
    let kb = shape_order_key(b);
    let swap = ka
        .iter()
        .zip(kb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .is_some_and(|o| o.is_gt());
    if swap {
        deepest(overlaps(b, a, cell, periodic)).map(|o| Overlap {
            depth: o.depth,
            normal: -o.normal,
        })
    } else {
        deepest(overlaps(a, b, cell, periodic))
    }
}

pub fn sphere_sphere_contact(a: &Sphere, b: &Sphere, cell: &UnitCell) -> Option<Overlap> {
    let d = min_image_delta(&a.center, &b.center, cell);
    let dist = d.norm();
    let depth = a.radius + b.radius - dist;
    (depth > 0.0).then(|| Overlap {
        depth,
        normal: if dist > 0.0 { d / dist } else { Vec3::x() },
    })
}

pub fn sphere_cylinder_contact(s: &Sphere, c: &Cylinder, cell: &UnitCell) -> Option<Overlap> {
    pair_overlap(
        &Inclusion::Sphere(*s),
        &Inclusion::Cylinder(*c),
        cell,
        Periodicity::FULL,
    )
}

pub fn cylinder_cylinder_contact(a: &Cylinder, b: &Cylinder, cell: &UnitCell) -> Option<Overlap> {
    pair_overlap(
        &Inclusion::Cylinder(*a),
        &Inclusion::Cylinder(*b),
        cell,
        Periodicity::FULL,
    )
}

/// Penetration of an inclusion past a face plane, without periodic wrapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOverlap {
    pub depth: f64,
    /// Closest axis point projected onto the face plane.
    pub contact_point: Vec3,
}

pub fn boundary_contact(inc: &Inclusion, face: Face, cell: &UnitCell) -> Option<BoundaryOverlap> {
    let k = face.axis.index();
    let l = cell.edge_length();
    let (s0, s1) = inc.local_segment();
    let c = inc.center();
    let (p0, p1) = (c + s0, c + s1);
    // signed distance of a point to the plane, positive inside the cell
    let inward = |p: &Vec3| if face.high { l - p[k] } else { p[k] };
    let (d0, d1) = (inward(&p0), inward(&p1));
    let closest = if d0 < d1 {
        p0
    } else if d1 < d0 {
        p1
    } else {
        (p0 + p1) * 0.5
    };
    let depth = inc.radius() - d0.min(d1);
    if depth > 0.0 {
        let mut contact_point = closest;
        contact_point[k] = if face.high { l } else { 0.0 };
        Some(BoundaryOverlap {
            depth,
            contact_point,
        })
    } else {
        None
    }
}

/// Monte Carlo estimate of the union volume of all inclusions over the cell
/// volume.
pub fn volume_fraction_estimate<R: Rng + ?Sized>(
    sample: &Sample,
    n_probes: usize,
    rng: &mut R,
) -> f64 {
    let n_probes = n_probes.max(1);
    if sample.inclusions.is_empty() {
        return 0.0;
    }
    let cell = sample.cell;
    // bins one reach wide suffice for point queries
    let max_reach = sample
        .inclusions
        .iter()
        .map(Inclusion::reach)
        .fold(0.0, f64::max);
    let mut grid = NeighborGrid::with_reach(&cell, 0.5 * max_reach, sample.inclusions.len());
    for inc in &sample.inclusions {
        grid.push(&inc.center());
    }
    let l = cell.edge_length();
    let mut hits = 0usize;
    for _ in 0..n_probes {
        let p = Vec3::new(
            rng.random::<f64>() * l,
            rng.random::<f64>() * l,
            rng.random::<f64>() * l,
        );
        if grid
            .candidates_near(&p)
            .any(|i| sample.inclusions[i].contains(&p, &cell))
        {
            hits += 1;
        }
    }
    hits as f64 / n_probes as f64
}

/// Uniform direction on the unit sphere (Archimedes' area-preserving map).
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let rho = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
}
