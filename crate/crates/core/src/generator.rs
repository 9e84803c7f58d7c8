//! Sample generation: random sequential addition (RSA), relaxation by
//! repulsive displacements (MD), and the puff-up step that turns a
//! non-overlapping packing into a contact network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{
    overlaps, pair_overlap, random_unit_vector, volume_fraction_estimate, Cylinder, Inclusion,
    NeighborGrid, Periodicity, Sphere, UnitCell, Vec3,
};
use crate::sample::Sample;

/// Random stream used by every stochastic operation.
pub type RandomStream = ChaCha8Rng;

pub fn random_stream(seed: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rsa,
    Md,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rsa => "rsa",
            Method::Md => "md",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rsa" => Ok(Method::Rsa),
            "md" => Ok(Method::Md),
            other => Err(format!("unknown method `{other}` (expected rsa or md)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
    #[error("could not place inclusion {index} after {attempts} attempts")]
    PlacementFailure { index: usize, attempts: usize },
    #[error("relaxation left an overlap of {max_depth:e} after {iterations} iterations")]
    RelaxationFailure { max_depth: f64, iterations: usize },
}

/// Parameters of one generated sample. The cell is the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSpec {
    /// Solid fraction before puff-up, as implied by counts and sizes.
    pub target_volume_fraction: f64,
    pub n_spheres: usize,
    pub n_cylinders: usize,
    pub sphere_radius: f64,
    pub cylinder_radius: f64,
    /// Length over radius.
    pub cylinder_aspect: f64,
    pub method: Method,
    pub puff_factor: f64,
    /// Whether puff-up also lengthens cylinders.
    pub scale_axial: bool,
    pub seed: u64,
    pub max_attempts: usize,
    pub md_max_iterations: usize,
    pub md_tolerance: f64,
}

const PI: f64 = std::f64::consts::PI;

fn sphere_volume(r: f64) -> f64 {
    4.0 / 3.0 * PI * r.powi(3)
}

/// Capsule volume for radius `r` and length `aspect * r`.
fn capsule_volume(r: f64, aspect: f64) -> f64 {
    PI * r.powi(3) * (aspect + 4.0 / 3.0)
}

impl Default for GenerationSpec {
    fn default() -> Self {
        GenerationSpec {
            puff_factor: 1.2,
            ..GenerationSpec::from_fraction(0.2, 0.5, 60, 30, 5.0)
        }
    }
}

impl GenerationSpec {
    /// Derives radii so that `fraction` of the unit cell is solid, with
    /// `cylinder_share` of that volume carried by cylinders.
    pub fn from_fraction(
        fraction: f64,
        cylinder_share: f64,
        n_spheres: usize,
        n_cylinders: usize,
        aspect: f64,
    ) -> Self {
        let sphere_radius = if n_spheres > 0 {
            ((1.0 - cylinder_share) * fraction / (n_spheres as f64 * sphere_volume(1.0))).cbrt()
        } else {
            0.0
        };
        let cylinder_radius = if n_cylinders > 0 {
            (cylinder_share * fraction / (n_cylinders as f64 * capsule_volume(1.0, aspect))).cbrt()
        } else {
            0.0
        };
        let mut spec = GenerationSpec {
            target_volume_fraction: fraction,
            n_spheres,
            n_cylinders,
            sphere_radius,
            cylinder_radius,
            cylinder_aspect: aspect,
            method: Method::Rsa,
            puff_factor: 1.1,
            scale_axial: true,
            seed: 0,
            max_attempts: 100_000,
            md_max_iterations: 100_000,
            md_tolerance: 1e-9,
        };
        spec.target_volume_fraction = spec.analytic_fraction();
        spec
    }

    pub fn cylinder_half_length(&self) -> f64 {
        0.5 * self.cylinder_aspect * self.cylinder_radius
    }

    pub fn analytic_fraction(&self) -> f64 {
        let vs = if self.n_spheres > 0 {
            self.n_spheres as f64 * sphere_volume(self.sphere_radius)
        } else {
            0.0
        };
        let vc = if self.n_cylinders > 0 {
            self.n_cylinders as f64 * capsule_volume(self.cylinder_radius, self.cylinder_aspect)
        } else {
            0.0
        };
        vs + vc
    }

    /// Replaces `target_volume_fraction` with the value implied by counts and
    /// sizes.
    pub fn with_consistent_fraction(mut self) -> Self {
        self.target_volume_fraction = self.analytic_fraction();
        self
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: String| Err(GenerationError::InvalidSpec(m));
        if self.n_spheres + self.n_cylinders == 0 {
            return bad("at least one inclusion is required".into());
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.n_spheres > 0 && !positive(self.sphere_radius) {
            return bad(format!(
                "sphere_radius must be positive, got {}",
                self.sphere_radius
            ));
        }
        if self.n_cylinders > 0 {
            if !positive(self.cylinder_radius) {
                return bad(format!(
                    "cylinder_radius must be positive, got {}",
                    self.cylinder_radius
                ));
            }
            if !positive(self.cylinder_aspect) {
                return bad(format!(
                    "cylinder_aspect must be positive, got {}",
                    self.cylinder_aspect
                ));
            }
        }
        if !(self.puff_factor.is_finite() && self.puff_factor >= 1.0) {
            return bad(format!(
                "puff_factor must be >= 1, got {}",
                self.puff_factor
            ));
        }
        if !(self.target_volume_fraction > 0.0 && self.target_volume_fraction < 1.0) {
            return bad(format!(
                "target_volume_fraction must lie in (0, 1), got {}",
                self.target_volume_fraction
            ));
        }
        let analytic = self.analytic_fraction();
        if (analytic - self.target_volume_fraction).abs() > 1e-9 * self.target_volume_fraction {
            return bad(format!(
                "target_volume_fraction {} disagrees with counts and sizes ({analytic})",
                self.target_volume_fraction
            ));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1".into());
        }
        if self.md_max_iterations == 0 || !positive(self.md_tolerance) {
            return bad("md_max_iterations and md_tolerance must be positive".into());
        }
        Ok(())
    }
}

fn random_point<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(rng.random(), rng.random(), rng.random())
}

/// Inclusion templates in placement order: cylinders first, then spheres.
fn templates(spec: &GenerationSpec) -> Vec<Inclusion> {
    let mut out = Vec::with_capacity(spec.n_spheres + spec.n_cylinders);
    for _ in 0..spec.n_cylinders {
        out.push(Inclusion::Cylinder(Cylinder {
            center: Vec3::zeros(),
            axis: Vec3::z(),
            half_length: spec.cylinder_half_length(),
            radius: spec.cylinder_radius,
        }));
    }
    for _ in 0..spec.n_spheres {
        out.push(Inclusion::Sphere(Sphere {
            center: Vec3::zeros(),
            radius: spec.sphere_radius,
        }));
    }
    out
}

fn randomize<R: Rng + ?Sized>(template: &Inclusion, rng: &mut R) -> Inclusion {
    let mut inc = *template;
    inc.set_center(random_point(rng));
    if let Inclusion::Cylinder(c) = &mut inc {
        c.axis = random_unit_vector(rng);
    }
    inc
}

fn finish(spec: &GenerationSpec, inclusions: Vec<Inclusion>) -> Sample {
    let mut sample = Sample::new(UnitCell::unit(), inclusions);
    sample.spec = Some(spec.clone());
    sample
}

fn check_fits(templates: &[Inclusion], cell: &UnitCell) -> Result<(), GenerationError> {
    // an inclusion this large overlaps its own periodic image
    if let Some(index) = templates
        .iter()
        .position(|t| t.reach() >= 0.5 * cell.edge_length())
    {
        return Err(GenerationError::PlacementFailure { index, attempts: 0 });
    }
    Ok(())
}

pub fn generate_rsa<R: Rng + ?Sized>(
    spec: &GenerationSpec,
    rng: &mut R,
) -> Result<Sample, GenerationError> {
    spec.validate()?;
    let cell = UnitCell::unit();
    let templates = templates(spec);
    check_fits(&templates, &cell)?;
    let max_reach = templates.iter().map(Inclusion::reach).fold(0.0, f64::max);
    let mut grid = NeighborGrid::with_reach(&cell, max_reach, templates.len());
    let mut placed: Vec<Inclusion> = Vec::with_capacity(templates.len());

    for (index, template) in templates.iter().enumerate() {
        let mut attempts = 0;
        loop {
            if attempts == spec.max_attempts {
                return Err(GenerationError::PlacementFailure { index, attempts });
            }
            attempts += 1;
            let candidate = randomize(template, rng);
            let clash = grid
                .candidates_near(&candidate.center())
                .any(|j| !overlaps(&candidate, &placed[j], &cell, Periodicity::FULL).is_empty());
            if !clash {
                grid.push(&candidate.center());
                placed.push(candidate);
                break;
            }
        }
    }
    Ok(finish(spec, placed))
}

/// Largest overlap depth over all pairs.
pub fn max_overlap_depth(inclusions: &[Inclusion], cell: &UnitCell) -> f64 {
    let grid = NeighborGrid::build(inclusions, cell);
    grid.candidate_pairs()
        .into_iter()
        .filter_map(|(i, j)| pair_overlap(&inclusions[i], &inclusions[j], cell, Periodicity::FULL))
        .map(|o| o.depth)
        .fold(0.0, f64::max)
}

pub fn generate_md<R: Rng + ?Sized>(
    spec: &GenerationSpec,
    rng: &mut R,
) -> Result<Sample, GenerationError> {
    spec.validate()?;
    let cell = UnitCell::unit();
    let templates = templates(spec);
    check_fits(&templates, &cell)?;
    let mut incs: Vec<Inclusion> = templates.iter().map(|t| randomize(t, rng)).collect();
    let min_radius = incs
        .iter()
        .map(Inclusion::radius)
        .fold(f64::INFINITY, f64::min);
    let step_cap = 0.1 * min_radius;

    for _ in 0..spec.md_max_iterations {
        let grid = NeighborGrid::build(&incs, &cell);
        let mut moves = vec![Vec3::zeros(); incs.len()];
        let mut max_depth: f64 = 0.0;
        for (i, j) in grid.candidate_pairs() {
            for o in overlaps(&incs[i], &incs[j], &cell, Periodicity::FULL) {
                max_depth = f64::max(max_depth, o.depth);
                let push = o.normal * (0.5 * o.depth);
                moves[i] -= push;
                moves[j] += push;
            }
        }
        if max_depth <= spec.md_tolerance {
            return Ok(finish(spec, incs));
        }
        for (inc, mv) in incs.iter_mut().zip(&moves) {
            let len = mv.norm();
            let mv = if len > step_cap {
                mv * (step_cap / len)
            } else {
                *mv
            };
            inc.set_center(cell.wrap(&(inc.center() + mv)));
        }
    }
    // the last sweep moved particles; measure the final state
    let final_depth = max_overlap_depth(&incs, &cell);
    if final_depth <= spec.md_tolerance {
        return Ok(finish(spec, incs));
    }
    Err(GenerationError::RelaxationFailure {
        max_depth: final_depth,
        iterations: spec.md_max_iterations,
    })
}

pub fn generate<R: Rng + ?Sized>(
    spec: &GenerationSpec,
    rng: &mut R,
) -> Result<Sample, GenerationError> {
    match spec.method {
        Method::Rsa => generate_rsa(spec, rng),
        Method::Md => generate_md(spec, rng),
    }
}

/// Generates with a stream seeded from `spec.seed`.
pub fn generate_seeded(spec: &GenerationSpec) -> Result<Sample, GenerationError> {
    generate(spec, &mut random_stream(spec.seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PuffOptions {
    pub factor: f64,
    pub scale_axial: bool,
    pub fraction_probes: usize,
    pub probe_seed: u64,
}

impl PuffOptions {
    pub fn new(factor: f64) -> Self {
        Self {
            factor,
            scale_axial: true,
            fraction_probes: 1_000_000,
            probe_seed: 0,
        }
    }

    pub fn from_spec(spec: &GenerationSpec) -> Self {
        Self {
            factor: spec.puff_factor,
            scale_axial: spec.scale_axial,
            fraction_probes: 1_000_000,
            probe_seed: spec.seed ^ 0x9e37_79b9_7f4a_7c15,
        }
    }
}

/// Scales every inclusion about its own center; centers and orientations
/// are kept. The solid fraction is re-estimated by point probing.
pub fn puff_up(sample: &Sample, opts: &PuffOptions) -> Sample {
    if opts.factor == 1.0 {
        return sample.clone();
    }
    let mut out = sample.clone();
    for inc in &mut out.inclusions {
        *inc = inc.scaled(opts.factor, opts.scale_axial);
    }
    let mut rng = random_stream(opts.probe_seed);
    out.achieved_fraction = volume_fraction_estimate(&out, opts.fraction_probes, &mut rng);
    out
}
