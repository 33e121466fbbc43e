//! The reference set of nontrivial media used by the verifier and the
//! property tests, plus admissible-point sampling.

use crate::error::{Error, Result};
use crate::finsler::{fundamental_tensor, SupportElement};
use crate::jets::ScalarField;
use crate::rng::Sampler;

use super::{Branch, Field, MediumSpec, Metric, UniaxialRay};

/// Minimum angle (radians) kept between sampled directions and a crystal's
/// optic axes, where the crystal metric is not smooth.
pub const OPTIC_AXIS_MARGIN: f64 = 0.3;

/// Half-width of the position cube the catalog media are designed for.
pub const DOMAIN_HALF_WIDTH: f64 = 1.0;

fn f(text: &str) -> Field {
    Field::parse(text).expect("catalog expression")
}

fn c(v: f64) -> Field {
    Field::constant(v)
}

pub fn fermat() -> MediumSpec {
    MediumSpec::Conformal {
        index: f("1 + 0.1*x1"),
    }
}

pub fn riemannian() -> MediumSpec {
    MediumSpec::Riemannian {
        g: [
            f("1 + 0.1*x2^2"),
            f("0.05*sin(x3)"),
            c(0.0),
            f("1 + 0.1*x1"),
            f("0.02*x1*x2"),
            f("exp(0.1*x1)"),
        ],
    }
}

pub fn uniaxial() -> MediumSpec {
    MediumSpec::Uniaxial {
        a: [f("1 + 0.05*x3"), c(0.0), c(0.0), c(1.0), c(0.0), c(1.0)],
        b: [f("1.2 + 0.05*x2"), c(0.0), c(0.0), c(1.0), c(0.0), f("1 + 0.1*x1^2")],
        ray: UniaxialRay::Extraordinary,
    }
}

pub fn biaxial() -> MediumSpec {
    MediumSpec::Biaxial {
        a: [c(1.0), c(0.0), c(0.0), c(1.0), c(0.0), c(1.0)],
        b_plus: [c(1.2), c(0.1), c(0.0), c(1.1), c(0.0), f("1 + 0.05*x1")],
        b_minus: [c(0.9), c(0.0), c(0.05), c(0.95), c(0.0), c(1.0)],
        branch: Branch::Plus,
    }
}

pub fn crystal() -> MediumSpec {
    MediumSpec::Crystal {
        v1: c(1.0),
        v2: c(0.95),
        v3: f("0.9 + 0.02*x1"),
        e_prime: [f("sin(0.6 + 0.05*x2)"), c(0.0), f("cos(0.6 + 0.05*x2)")],
        e_double_prime: [f("-sin(0.6 - 0.05*x2)"), c(0.0), f("cos(0.6 - 0.05*x2)")],
        branch: Branch::Plus,
    }
}

/// The five reference media, by name.
pub fn catalog() -> Vec<(&'static str, MediumSpec)> {
    vec![
        ("fermat", fermat()),
        ("riemannian", riemannian()),
        ("uniaxial", uniaxial()),
        ("biaxial", biaxial()),
        ("crystal", crystal()),
    ]
}

pub fn by_name(name: &str) -> Option<MediumSpec> {
    catalog().into_iter().find(|(n, _)| *n == name).map(|(_, s)| s)
}

/// Draw a supporting element with `x` in the cube of half-width `half` and
/// unit Euclidean `y`, rejecting points where the metric is undefined, not
/// strongly convex, or (for crystals) too close to an optic axis.
pub fn sample_admissible(metric: &Metric, sampler: &mut Sampler, half: f64) -> Result<SupportElement> {
    for _ in 0..10_000 {
        let se = SupportElement::new(sampler.in_cube(half), sampler.direction());
        if let Some(angle) = metric.optic_axis_angle(&se.x, &se.y) {
            if angle < OPTIC_AXIS_MARGIN {
                continue;
            }
        }
        if metric.eval_f64(&se.point()).is_err() {
            continue;
        }
        if fundamental_tensor(metric, &se).is_ok() {
            return Ok(se);
        }
    }
    Err(Error::Spec("no admissible supporting element found".into()))
}
