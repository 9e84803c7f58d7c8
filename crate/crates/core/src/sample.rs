//! A periodic cell populated with inclusions, and its text format.
//!
//! ```text
//! graphcond-sample 1
//! cell 1.0000000000000000e0
//! fraction 1.5000000000000000e-1
//! generation method=rsa seed=7 n_spheres=2 ...      (optional)
//! sphere   <cx> <cy> <cz> <radius>
//! cylinder <cx> <cy> <cz> <radius> <ax> <ay> <az> <half_length>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Reals are written
//! with 17 significant digits so a write/parse round trip is lossless.

use std::fmt::Write as _;

use thiserror::Error;

use crate::generator::{GenerationSpec, Method};
use crate::geometry::{Cylinder, Inclusion, Sphere, UnitCell, Vec3};

pub const SAMPLE_HEADER: &str = "graphcond-sample";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub cell: UnitCell,
    pub inclusions: Vec<Inclusion>,
    /// Generation parameters, absent for hand-built fixtures.
    pub spec: Option<GenerationSpec>,
    /// Occupied volume fraction. [`Sample::new`] sums inclusion volumes,
    /// exact only without overlaps; puff-up stores a probe estimate.
    pub achieved_fraction: f64,
}

impl Sample {
    pub fn new(cell: UnitCell, inclusions: Vec<Inclusion>) -> Self {
        let achieved_fraction =
            inclusions.iter().map(Inclusion::volume).sum::<f64>() / cell.volume();
        Self {
            cell,
            inclusions,
            spec: None,
            achieved_fraction,
        }
    }

    pub fn empty(cell: UnitCell) -> Self {
        Self::new(cell, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.inclusions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inclusions.is_empty()
    }

    /// Rigid translation of every center, wrapped back into the cell.
    pub fn translated(&self, shift: &Vec3) -> Sample {
        let mut out = self.clone();
        for inc in &mut out.inclusions {
            inc.set_center(self.cell.wrap(&(inc.center() + shift)));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{SAMPLE_HEADER} {FORMAT_VERSION}");
        let _ = writeln!(s, "cell {}", real(self.cell.edge_length()));
        let _ = writeln!(s, "fraction {}", real(self.achieved_fraction));
        if let Some(spec) = &self.spec {
            let _ = writeln!(s, "generation {}", spec_fields(spec));
        }
        for inc in &self.inclusions {
            match inc {
                Inclusion::Sphere(sp) => {
                    let _ = writeln!(
                        s,
                        "sphere {} {} {} {}",
                        real(sp.center.x),
                        real(sp.center.y),
                        real(sp.center.z),
                        real(sp.radius)
                    );
                }
                Inclusion::Cylinder(c) => {
                    let _ = writeln!(
                        s,
                        "cylinder {} {} {} {} {} {} {} {}",
                        real(c.center.x),
                        real(c.center.y),
                        real(c.center.z),
                        real(c.radius),
                        real(c.axis.x),
                        real(c.axis.y),
                        real(c.axis.z),
                        real(c.half_length)
                    );
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Sample, SampleParseError> {
        parse_sample(text)
    }
}

pub(crate) fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn spec_fields(spec: &GenerationSpec) -> String {
    format!(
        "method={} seed={} n_spheres={} n_cylinders={} sphere_radius={} cylinder_radius={} \
         cylinder_aspect={} target_volume_fraction={} puff_factor={} scale_axial={} \
         max_attempts={} md_max_iterations={} md_tolerance={}",
        spec.method.name(),
        spec.seed,
        spec.n_spheres,
        spec.n_cylinders,
        real(spec.sphere_radius),
        real(spec.cylinder_radius),
        real(spec.cylinder_aspect),
        real(spec.target_volume_fraction),
        real(spec.puff_factor),
        spec.scale_axial,
        spec.max_attempts,
        spec.md_max_iterations,
        real(spec.md_tolerance),
    )
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("sample line {line}: {message}")]
pub struct SampleParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> SampleParseError {
    SampleParseError {
        line,
        message: message.into(),
    }
}

fn parse_reals<const N: usize>(line: usize, fields: &[&str]) -> Result<[f64; N], SampleParseError> {
    if fields.len() != N {
        return Err(err(
            line,
            format!("expected {N} numbers, found {}", fields.len()),
        ));
    }
    let mut out = [0.0; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f
            .parse::<f64>()
            .map_err(|_| err(line, format!("bad number `{f}`")))?;
        if !o.is_finite() {
            return Err(err(line, format!("non-finite number `{f}`")));
        }
    }
    Ok(out)
}

fn parse_spec(line: usize, fields: &[&str]) -> Result<GenerationSpec, SampleParseError> {
    let mut spec = GenerationSpec::default();
    let mut seen = std::collections::HashSet::new();
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, found `{field}`")))?;
        if !seen.insert(key) {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
        let bad = |_| err(line, format!("bad value for `{key}`: `{value}`"));
        let real = |v: &str| -> Result<f64, SampleParseError> {
            let x: f64 = v
                .parse()
                .map_err(|_| err(line, format!("bad value for `{key}`: `{v}`")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(err(line, format!("non-finite value for `{key}`")))
            }
        };
        match key {
            "method" => spec.method = value.parse::<Method>().map_err(|m| err(line, m))?,
            "seed" => spec.seed = value.parse().map_err(bad)?,
            "n_spheres" => spec.n_spheres = value.parse().map_err(bad)?,
            "n_cylinders" => spec.n_cylinders = value.parse().map_err(bad)?,
            "sphere_radius" => spec.sphere_radius = real(value)?,
            "cylinder_radius" => spec.cylinder_radius = real(value)?,
            "cylinder_aspect" => spec.cylinder_aspect = real(value)?,
            "target_volume_fraction" => spec.target_volume_fraction = real(value)?,
            "puff_factor" => spec.puff_factor = real(value)?,
            "scale_axial" => {
                spec.scale_axial = value.parse().map_err(|_| err(line, "bad boolean"))?
            }
            "max_attempts" => spec.max_attempts = value.parse().map_err(bad)?,
            "md_max_iterations" => spec.md_max_iterations = value.parse().map_err(bad)?,
            "md_tolerance" => spec.md_tolerance = real(value)?,
            other => return Err(err(line, format!("unknown generation key `{other}`"))),
        }
    }
    Ok(spec)
}

fn parse_sample(text: &str) -> Result<Sample, SampleParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (n, header) = lines.next().ok_or_else(|| err(0, "empty document"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some(SAMPLE_HEADER) {
        return Err(err(n, format!("expected `{SAMPLE_HEADER}` header")));
    }
    match head.next().map(str::parse::<u32>) {
        Some(Ok(FORMAT_VERSION)) if head.next().is_none() => {}
        _ => return Err(err(n, "unsupported format version")),
    }

    let mut cell = None;
    let mut fraction = None;
    let mut spec = None;
    let mut inclusions = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let rest = &fields[1..];
        match fields[0] {
            "cell" => {
                if cell.is_some() || !inclusions.is_empty() {
                    return Err(err(n, "`cell` must appear once, before inclusions"));
                }
                let [l] = parse_reals::<1>(n, rest)?;
                cell = Some(UnitCell::new(l).map_err(|e| err(n, e.to_string()))?);
            }
            "fraction" => {
                if fraction.is_some() {
                    return Err(err(n, "duplicate `fraction`"));
                }
                let [f] = parse_reals::<1>(n, rest)?;
                if !(f >= 0.0) {
                    return Err(err(n, "negative fraction"));
                }
                fraction = Some(f);
            }
            "generation" => {
                if spec.is_some() {
                    return Err(err(n, "duplicate `generation`"));
                }
                spec = Some(parse_spec(n, rest)?);
            }
            "sphere" => {
                let [x, y, z, r] = parse_reals::<4>(n, rest)?;
                let s = Sphere::new(Vec3::new(x, y, z), r).map_err(|e| err(n, e.to_string()))?;
                inclusions.push(Inclusion::Sphere(s));
            }
            "cylinder" => {
                let [x, y, z, r, ax, ay, az, h] = parse_reals::<8>(n, rest)?;
                let c = Cylinder::new(Vec3::new(x, y, z), Vec3::new(ax, ay, az), h, r)
                    .map_err(|e| err(n, e.to_string()))?;
                inclusions.push(Inclusion::Cylinder(c));
            }
            other => return Err(err(n, format!("unknown record `{other}`"))),
        }
    }
    let cell = cell.ok_or_else(|| err(0, "missing `cell` record"))?;
    let l = cell.edge_length();
    for inc in &inclusions {
        let c = inc.center();
        if c.iter().any(|&x| !(0.0..l).contains(&x)) {
            return Err(err(0, "inclusion center outside the cell"));
        }
    }
    let mut sample = Sample::new(cell, inclusions);
    sample.spec = spec;
    if let Some(f) = fraction {
        sample.achieved_fraction = f;
    }
    Ok(sample)
}
