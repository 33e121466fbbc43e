//! Strong-convexity scan of a medium: is the fundamental tensor positive
//! definite at sampled supporting elements, and does the sufficient bound
//! `b/√2 < a < √2·b` hold for quotient metrics `a(y,y)/√b(y,y)`?

use serde::Serialize;

use crate::error::Error;
use crate::finsler::{fundamental_tensor, min_eigenvalue, SupportElement};
use crate::rng::Sampler;
use crate::tensor::{quad, Vec3};

use super::{build_metric, MediumSpec, Metric};

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityFailure {
    pub x: Vec3,
    pub y: Vec3,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    /// Samples where the metric could not be evaluated (domain errors).
    pub rejected: usize,
    /// Samples where `g` is not positive definite.
    pub failures: Vec<ConvexityFailure>,
    /// Smallest eigenvalue of `g` over evaluated samples.
    pub min_eigenvalue: f64,
    /// Samples where the sufficient bound was checked (quotient metrics only).
    pub sufficient_checked: usize,
    /// Samples violating `b(y,y)/√2 < a(y,y) < √2·b(y,y)`.
    pub sufficient_violations: Vec<SupportElement>,
}

impl ConvexityReport {
    /// `None` when the bound does not apply to this kind of medium.
    pub fn sufficient_condition_holds(&self) -> Option<bool> {
        (self.sufficient_checked > 0).then(|| self.sufficient_violations.is_empty())
    }

    pub fn positive_definite(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Sample `sample_count` supporting elements in `[-1, 1]³ × S²` and record
/// the eigenvalue verdict and the sufficient-bound verdict at each. Failures
/// are data; a malformed spec yields a report with every sample rejected.
pub fn check_strong_convexity(spec: &MediumSpec, sample_count: usize, seed: u64) -> ConvexityReport {
    let mut report = ConvexityReport {
        samples: sample_count,
        rejected: 0,
        failures: Vec::new(),
        min_eigenvalue: f64::INFINITY,
        sufficient_checked: 0,
        sufficient_violations: Vec::new(),
    };
    let Ok(metric) = build_metric(spec) else {
        report.rejected = sample_count;
        return report;
    };
    let mut sampler = Sampler::new(seed);
    for _ in 0..sample_count {
        let se = SupportElement::new(sampler.in_cube(1.0), sampler.direction());
        if let Metric::Quotient { a, b } = &metric {
            if let (Ok(am), Ok(bm)) = (a.matrix(&se.x), b.matrix(&se.x)) {
                let ayy = quad(&am, &se.y, &se.y);
                let byy = quad(&bm, &se.y, &se.y);
                report.sufficient_checked += 1;
                let s2 = std::f64::consts::SQRT_2;
                if !(byy / s2 < ayy && ayy < byy * s2) {
                    report.sufficient_violations.push(se);
                }
            }
        }
        match fundamental_tensor(&metric, &se) {
            Ok(m) => report.min_eigenvalue = report.min_eigenvalue.min(min_eigenvalue(&m.g)),
            Err(Error::NonPositiveDefinite { min_eigenvalue }) => {
                report.min_eigenvalue = report.min_eigenvalue.min(min_eigenvalue);
                report.failures.push(ConvexityFailure {
                    x: se.x,
                    y: se.y,
                    min_eigenvalue,
                });
            }
            Err(_) => report.rejected += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{Field, UniaxialRay};

    fn uniaxial(a: [f64; 6], b: [f64; 6]) -> MediumSpec {
        MediumSpec::Uniaxial {
            a: a.map(Field::constant),
            b: b.map(Field::constant),
            ray: UniaxialRay::Extraordinary,
        }
    }

    const ID: [f64; 6] = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];

    #[test]
    fn euclidean_has_no_failures() {
        let r = check_strong_convexity(&MediumSpec::Euclidean {}, 200, 1);
        assert!(r.positive_definite());
        assert_eq!(r.sufficient_condition_holds(), None);
    }

    #[test]
    fn equal_forms_satisfy_bound() {
        let r = check_strong_convexity(&uniaxial(ID, ID), 200, 1);
        assert_eq!(r.sufficient_condition_holds(), Some(true));
        assert!(r.positive_definite());
    }

    #[test]
    fn scaled_form_violates_bound_but_stays_convex() {
        // b = 2.5·a only rescales F, so the measured verdict is still convex.
        let r = check_strong_convexity(&uniaxial(ID, ID.map(|v| 2.5 * v)), 1000, 1);
        assert_eq!(r.sufficient_condition_holds(), Some(false));
        assert_eq!(r.sufficient_violations.len(), 1000);
        assert!(r.positive_definite());
    }

    #[test]
    fn strongly_anisotropic_form_fails() {
        let r = check_strong_convexity(&uniaxial(ID, [2.5, 0.0, 0.0, 1.0, 0.0, 1.0]), 1000, 3);
        assert_eq!(r.sufficient_condition_holds(), Some(false));
        assert!(!r.positive_definite());
        assert!(r.min_eigenvalue < 0.0);
    }
}
