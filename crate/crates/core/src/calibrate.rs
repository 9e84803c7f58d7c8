//! Least-squares calibration of contact constants from reference
//! conductances of two-inclusion fixtures.
//!
//! For each kind the model is `g = k * depth^p`, with `p` set by the contact
//! law, fitted through the origin: `k = sum(x g) / sum(x^2)`, `x = depth^p`.
//!
//! Reference files hold one point per line:
//!
//! ```text
//! # kind depth conductance
//! sphere-sphere 0.1 0.2
//! voxel-edge 1.0 0.35
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{Axis, Contact, ContactKind, Shape};
use crate::graph::{sample_contacts, CalibrationConstants, Terminals};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstantKind {
    SphereSphere,
    SphereCylinder,
    CylinderCylinder,
    SphereBoundary,
    CylinderBoundary,
    VoxelFace,
    VoxelEdge,
    VoxelVertex,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 8] = [
        ConstantKind::SphereSphere,
        ConstantKind::SphereCylinder,
        ConstantKind::CylinderCylinder,
        ConstantKind::SphereBoundary,
        ConstantKind::CylinderBoundary,
        ConstantKind::VoxelFace,
        ConstantKind::VoxelEdge,
        ConstantKind::VoxelVertex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstantKind::SphereSphere => "sphere-sphere",
            ConstantKind::SphereCylinder => "sphere-cylinder",
            ConstantKind::CylinderCylinder => "cylinder-cylinder",
            ConstantKind::SphereBoundary => "sphere-boundary",
            ConstantKind::CylinderBoundary => "cylinder-boundary",
            ConstantKind::VoxelFace => "voxel-face",
            ConstantKind::VoxelEdge => "voxel-edge",
            ConstantKind::VoxelVertex => "voxel-vertex",
        }
    }

    pub fn of_contact(c: &Contact) -> Self {
        match c.kind {
            ContactKind::SphereSphere => ConstantKind::SphereSphere,
            ContactKind::SphereCylinder => ConstantKind::SphereCylinder,
            ContactKind::CylinderCylinder => ConstantKind::CylinderCylinder,
            ContactKind::InclusionBoundary => match c.boundary_shape {
                Some(Shape::Cylinder) => ConstantKind::CylinderBoundary,
                _ => ConstantKind::SphereBoundary,
            },
        }
    }

    fn slot(self, c: &mut CalibrationConstants) -> &mut f64 {
        match self {
            ConstantKind::SphereSphere => &mut c.k_ss,
            ConstantKind::SphereCylinder => &mut c.k_sc,
            ConstantKind::CylinderCylinder => &mut c.k_cc,
            ConstantKind::SphereBoundary => &mut c.k_boundary_s,
            ConstantKind::CylinderBoundary => &mut c.k_boundary_c,
            ConstantKind::VoxelFace => &mut c.k_face,
            ConstantKind::VoxelEdge => &mut c.k_edge,
            ConstantKind::VoxelVertex => &mut c.k_vertex,
        }
    }
}

impl std::fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ConstantKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ConstantKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown contact kind `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no reference points for {0}")]
    InsufficientData(ConstantKind),
    #[error("every {0} reference point has zero overlap")]
    DegenerateFit(ConstantKind),
    #[error("invalid reference point: {0}")]
    InvalidPoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub kind: ConstantKind,
    pub overlap_depth: f64,
    pub measured_conductance: f64,
}

impl ReferencePoint {
    pub fn new(
        kind: ConstantKind,
        overlap_depth: f64,
        measured_conductance: f64,
    ) -> Result<Self, CalibrationError> {
        if !(overlap_depth.is_finite() && overlap_depth >= 0.0) {
            return Err(CalibrationError::InvalidPoint(format!(
                "overlap depth {overlap_depth}"
            )));
        }
        if !(measured_conductance.is_finite() && measured_conductance > 0.0) {
            return Err(CalibrationError::InvalidPoint(format!(
                "measured conductance {measured_conductance}"
            )));
        }
        Ok(Self {
            kind,
            overlap_depth,
            measured_conductance,
        })
    }

    /// The fixture must hold exactly one contact, counting pairwise overlaps
    /// and overlaps with the two x faces.
    pub fn from_fixture(
        fixture: &Sample,
        measured_conductance: f64,
    ) -> Result<Self, CalibrationError> {
        let contacts = sample_contacts(fixture, &Terminals::Opposite(Axis::X));
        match contacts.as_slice() {
            [c] => Self::new(
                ConstantKind::of_contact(c),
                c.overlap_depth,
                measured_conductance,
            ),
            other => Err(CalibrationError::InvalidPoint(format!(
                "fixture has {} contacts, expected exactly one",
                other.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindFit {
    pub kind: ConstantKind,
    pub k: f64,
    /// `measured - k * depth^p`, in input order.
    pub residuals: Vec<f64>,
}

impl KindFit {
    pub fn rms_residual(&self) -> f64 {
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub constants: CalibrationConstants,
    /// One entry per kind present in the input, in [`ConstantKind::ALL`] order.
    pub fits: Vec<KindFit>,
}

/// Fits every kind present in `points`; other constants keep their defaults.
pub fn fit_constants(points: &[ReferencePoint]) -> Result<FitReport, CalibrationError> {
    fit_constants_with(points, &CalibrationConstants::default(), &[])
}

/// Starts from `base`, whose contact law sets the exponent; every kind in
/// `required` must have at least one point.
pub fn fit_constants_with(
    points: &[ReferencePoint],
    base: &CalibrationConstants,
    required: &[ConstantKind],
) -> Result<FitReport, CalibrationError> {
    let p = base.contact_law.exponent();
    let mut by_kind: BTreeMap<ConstantKind, Vec<&ReferencePoint>> = BTreeMap::new();
    for pt in points {
        by_kind.entry(pt.kind).or_default().push(pt);
    }
    if let Some(&missing) = required.iter().find(|k| !by_kind.contains_key(k)) {
        return Err(CalibrationError::InsufficientData(missing));
    }
    let mut constants = base.clone();
    let mut fits = Vec::new();
    for (kind, pts) in by_kind {
        let x: Vec<f64> = pts.iter().map(|q| q.overlap_depth.powf(p)).collect();
        let sxx: f64 = x.iter().map(|x| x * x).sum();
        if sxx == 0.0 {
            return Err(CalibrationError::DegenerateFit(kind));
        }
        let sxg: f64 = x
            .iter()
            .zip(&pts)
            .map(|(x, q)| x * q.measured_conductance)
            .sum();
        let k = sxg / sxx;
        *kind.slot(&mut constants) = k;
        fits.push(KindFit {
            kind,
            k,
            residuals: x
                .iter()
                .zip(&pts)
                .map(|(x, q)| q.measured_conductance - k * x)
                .collect(),
        });
    }
    Ok(FitReport { constants, fits })
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("reference line {line}: {message}")]
pub struct ReferenceParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_references(text: &str) -> Result<Vec<ReferencePoint>, ReferenceParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ReferenceParseError {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        let [kind, depth, g] = f[..] else {
            return Err(err("expected `kind depth conductance`".into()));
        };
        let kind: ConstantKind = kind.parse().map_err(err)?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("bad number `{s}`")))
        };
        let pt = ReferencePoint::new(kind, num(depth)?, num(g)?).map_err(|e| err(e.to_string()))?;
        out.push(pt);
    }
    Ok(out)
}

pub fn write_references(points: &[ReferencePoint]) -> String {
    points
        .iter()
        .map(|p| {
            format!(
                "{} {} {}\n",
                p.kind,
                crate::sample::real(p.overlap_depth),
                crate::sample::real(p.measured_conductance)
            )
        })
        .collect()
}
