mod common;

use common::*;
use graphcond::generator::{generate_seeded, puff_up, GenerationSpec, PuffOptions};
use graphcond::geometry::Axis;
use graphcond::graph::{build_contact_graph, CalibrationConstants, Terminals};
use graphcond::sample::Sample;
use graphcond::solver::{
    conductivity_tensor, conductivity_tensor_with, effective_conductance_with,
    HomogenizationOptions, SolveMethod, SolverOptions,
};

fn puffed(spec: &GenerationSpec) -> Sample {
    let s = generate_seeded(spec).unwrap();
    puff_up(
        &s,
        &PuffOptions {
            fraction_probes: 1000,
            ..PuffOptions::from_spec(spec)
        },
    )
}

#[test]
fn isotropic_samples_have_equal_mean_diagonal() {
    let mut sum = [0.0; 3];
    for seed in 0..50 {
        let spec = GenerationSpec {
            seed,
            puff_factor: 1.2,
            ..GenerationSpec::from_fraction(0.25, 0.5, 60, 30, 5.0)
        };
        let t = conductivity_tensor(&puffed(&spec), &CalibrationConstants::default()).unwrap();
        for (s, d) in sum.iter_mut().zip(t.diagonal()) {
            *s += d;
        }
    }
    assert!(sum.iter().all(|s| *s > 0.0), "{sum:?}");
    for i in 0..3 {
        for j in 0..i {
            assert!(rel_diff(sum[i], sum[j]) <= 0.10, "{sum:?}");
        }
    }
}

#[test]
fn tensor_scales_with_constants() {
    let s = puffed(&GenerationSpec {
        seed: 3,
        ..GenerationSpec::default()
    });
    let cal = CalibrationConstants::default();
    let base = conductivity_tensor(&s, &cal).unwrap().components();
    for lambda in [0.1, 3.0, 250.0] {
        let scaled = conductivity_tensor(&s, &cal.scaled(lambda))
            .unwrap()
            .components();
        for (a, b) in base.iter().zip(scaled) {
            assert!(rel_diff(b, lambda * a) <= 1e-10, "{a} {b}");
        }
    }
}

#[test]
fn sample_graphs_agree_across_routes() {
    for seed in 0..5 {
        let s = puffed(&GenerationSpec {
            seed,
            ..GenerationSpec::default()
        });
        for axis in Axis::ALL {
            let g = build_contact_graph(
                &s,
                &Terminals::Opposite(axis),
                &CalibrationConstants::default(),
            )
            .unwrap();
            let direct = effective_conductance_with(
                &g,
                &SolverOptions {
                    method: SolveMethod::FullDirect,
                    ..Default::default()
                },
            )
            .unwrap();
            let cg = effective_conductance_with(
                &g,
                &SolverOptions {
                    method: SolveMethod::LaplacianCg,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(rel_diff(direct, cg) <= 1e-8, "{direct} {cg}");
        }
    }
}

#[test]
fn normalization_divides_every_component() {
    let s = puffed(&GenerationSpec {
        seed: 9,
        ..GenerationSpec::default()
    });
    let cal = CalibrationConstants::default();
    let base = conductivity_tensor(&s, &cal).unwrap().components();
    let mut opts = HomogenizationOptions::default();
    opts.solver.full_conductor_reference = 4.0;
    let normed = conductivity_tensor_with(&s, &cal, &opts)
        .unwrap()
        .components();
    for (a, b) in base.iter().zip(normed) {
        assert!(rel_diff(4.0 * b, *a) <= 1e-12);
    }
}

#[test]
fn sample_text_round_trip_preserves_tensor() {
    let s = puffed(&GenerationSpec {
        seed: 12,
        ..GenerationSpec::default()
    });
    let back = Sample::parse(&s.to_text()).unwrap();
    let cal = CalibrationConstants::default();
    assert_eq!(
        conductivity_tensor(&s, &cal).unwrap(),
        conductivity_tensor(&back, &cal).unwrap()
    );
}
