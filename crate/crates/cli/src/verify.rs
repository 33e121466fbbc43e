//! The identity verifier: samples a medium at seeded random supporting
//! elements and reports, per identity, the worst residual and where it
//! occurred.

use finsler_core::finsler::{fundamental_tensor, geometry_with_residuals, spray, SupportElement};
use finsler_core::jets::ScalarField;
use finsler_core::media::catalog::{DOMAIN_HALF_WIDTH, OPTIC_AXIS_MARGIN};
use finsler_core::media::Metric;
use finsler_core::rng::Sampler;
use finsler_core::spinoptics::*;
use finsler_core::tensor::*;
use finsler_core::{Error, Result};
use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

/// Report keys, in output order.
pub const IDENTITIES: [&str; 9] = [
    "Al=0",
    "Pl=0",
    "Bianchi-P=-Adot",
    "GammaSym",
    "Homogeneity",
    "Euler-gyy=F2",
    "KernelResidual",
    "RiemannianReduction",
    "SigmaConsistency",
];

/// Tolerance of the structural identities.
pub const STRUCTURAL_TOL: f64 = 1e-8;
/// Tolerance of the kernel residual of the spin generator.
pub const KERNEL_TOL: f64 = 1e-7;
/// Tolerance on `|Σs − Σ′|/|Σ′|` for Riemannian media.
pub const SIGMA_PRIME_TOL: f64 = 1e-10;
/// Relative tolerance between the coordinate and frame forms of `Δ`, `Σ`.
pub const FRAME_TOL: f64 = 1e-9;
/// `max|A|` below which a sample is treated as Riemannian.
pub const RIEMANNIAN_CARTAN: f64 = 1e-12;

/// One residual of one sample, attributed to a report key.
#[derive(Clone, Copy, Debug)]
struct Residual {
    identity: usize,
    component: &'static str,
    tolerance: f64,
    value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Point {
    pub x: Vec3,
    pub y: Vec3,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentReport {
    pub name: &'static str,
    pub tolerance: f64,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub pass: bool,
    /// Largest residual relative to its tolerance, in units of that tolerance.
    pub max_ratio: f64,
    pub max_residual: f64,
    /// Number of samples at which the identity was evaluated.
    pub evaluated: usize,
    pub worst_point: Option<Point>,
    pub components: Vec<ComponentReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleFailure {
    pub sample: usize,
    pub point: Point,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct Identities(pub Vec<(&'static str, IdentityReport)>);

impl Serialize for Identities {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub medium: &'static str,
    pub samples: usize,
    pub seed: u64,
    pub constants: SpinConstants,
    pub identities: Identities,
    pub sample_failures: Vec<SampleFailure>,
}

/// Draw the sample table: `x` uniform in the cube, `y` a Euclidean unit
/// direction, redrawn only when it falls within the optic-axis margin of a
/// crystal (where the metric is not smooth).
pub fn sample_points(metric: &Metric, count: usize, seed: u64) -> Vec<SupportElement> {
    let mut s = Sampler::new(seed);
    (0..count)
        .map(|_| loop {
            let se = SupportElement::new(s.in_cube(DOMAIN_HALF_WIDTH), s.direction());
            match metric.optic_axis_angle(&se.x, &se.y) {
                Some(a) if a < OPTIC_AXIS_MARGIN => continue,
                _ => break se,
            }
        })
        .collect()
}

fn mat_diff(a: &Mat3, b: &Mat3) -> f64 {
    max_abs(flat_mat(a).zip(flat_mat(b)).map(|(p, q)| p - q).collect::<Vec<_>>().iter())
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// All residuals at one sample, with `y` first rescaled onto the indicatrix.
fn residuals_at(metric: &Metric, raw: &SupportElement, k: &SpinConstants) -> Result<Vec<Residual>> {
    let f = metric.eval_f64(&raw.point())?;
    if !(f > 0.0) {
        return Err(Error::Domain(format!("F = {f} is not positive")));
    }
    let se = SupportElement::new(raw.x, scale(&raw.y, 1.0 / f));
    let (geom, ids) = geometry_with_residuals(metric, &se)?;
    let mut out = Vec::new();
    let mut push = |identity: usize, component: &'static str, tolerance: f64, value: f64| {
        out.push(Residual {
            identity,
            component,
            tolerance,
            value,
        })
    };
    let named = ids.named();
    let get = |name: &str| named.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).expect("known residual");

    for c in ["cartan_transversality", "cartan_symmetry", "vertical_bianchi"] {
        push(0, c, STRUCTURAL_TOL, get(c));
    }
    push(1, "p_transversality", STRUCTURAL_TOL, get("p_transversality"));
    push(2, "p_equals_minus_a_dot", STRUCTURAL_TOL, get("p_equals_minus_a_dot"));
    for c in ["gamma_symmetry", "n_from_gamma", "spray_from_n", "horizontal_f", "unit_transport", "r_antisymmetry"] {
        push(3, c, STRUCTURAL_TOL, get(c));
    }
    push(5, "euler", STRUCTURAL_TOL, get("euler"));
    push(5, "inverse", STRUCTURAL_TOL, get("inverse"));

    // degree-1 F, degree-0 g and degree-2 G under y → 2y
    let doubled = SupportElement::new(se.x, scale(&se.y, 2.0));
    let f2 = metric.eval_f64(&doubled.point())?;
    push(4, "f_degree_one", STRUCTURAL_TOL, relative(f2, 2.0));
    let m2 = fundamental_tensor(metric, &doubled)?;
    push(4, "g_degree_zero", STRUCTURAL_TOL, mat_diff(&m2.g, &geom.metric.g));
    let (_, g2) = spray(metric, &doubled)?;
    let spray_dev = max_abs(&sub(&g2, &scale(&geom.connection.spray, 4.0)));
    push(4, "spray_degree_two", STRUCTURAL_TOL, spray_dev / max_abs(&geom.connection.spray).max(1.0));

    let spin = spin_tensor_at(&geom, k.s);
    let c = coupling_values(&geom, &spin, k);
    let u = &geom.metric.u;
    let ps_u = max_abs(&mat_vec(&c.ps, u)).max(max_abs(&mat_vec(&transpose(&c.ps), u)));
    push(1, "spin_landsberg_transversality", STRUCTURAL_TOL, ps_u);

    let (fd, fs) = frame_delta_sigma(&geom, k)?;
    push(8, "delta_frame_vs_coordinates", FRAME_TOL, relative(c.delta, fd));
    push(8, "sigma_frame_vs_coordinates", FRAME_TOL, relative(c.sigma, fs));
    push(8, "spin_landsberg_two_forms", STRUCTURAL_TOL, mat_diff(&c.ps, &c.ps_direct));

    // the spin generator is only defined off the singular locus
    if check_regular(&c, k).is_ok() {
        let x = generator_from_couplings(&geom, &spin, &c, k);
        push(6, "kernel", KERNEL_TOL, kernel_report(&geom, k, &x)?.max());
        if max_abs(flat_t3(&geom.cartan.a)) <= RIEMANNIAN_CARTAN {
            let special = riemannian_generator(&geom, &spin, k)?;
            push(7, "generator", STRUCTURAL_TOL, x.max_diff(&special));
            push(7, "sigma_prime", SIGMA_PRIME_TOL, relative(c.sigma * k.s, c.sigma_prime));
        }
    }
    Ok(out)
}

/// `a` is a worse residual than `b`; NaN is worse than anything.
fn worse(a: f64, b: f64) -> bool {
    (a.is_nan() && !b.is_nan()) || a > b
}

/// Run every identity at `count` seeded samples.
pub fn verify(metric: &Metric, medium: &'static str, count: usize, seed: u64) -> VerifyReport {
    let k = SpinConstants::default();
    let points = sample_points(metric, count, seed);
    let results: Vec<Result<Vec<Residual>>> = points.par_iter().map(|se| residuals_at(metric, se, &k)).collect();

    let mut reports: Vec<IdentityReport> = (0..IDENTITIES.len())
        .map(|_| IdentityReport {
            pass: true,
            max_ratio: 0.0,
            max_residual: 0.0,
            evaluated: 0,
            worst_point: None,
            components: Vec::new(),
        })
        .collect();
    let mut failures = Vec::new();
    for (i, (se, r)) in points.iter().zip(results).enumerate() {
        let residuals = match r {
            Ok(r) => r,
            Err(e) => {
                failures.push(SampleFailure {
                    sample: i,
                    point: Point { x: se.x, y: se.y },
                    error: e.to_string(),
                });
                continue;
            }
        };
        let mut seen = [false; IDENTITIES.len()];
        for res in residuals {
            let rep = &mut reports[res.identity];
            seen[res.identity] = true;
            let comp = match rep.components.iter_mut().find(|c| c.name == res.component) {
                Some(c) => c,
                None => {
                    rep.components.push(ComponentReport {
                        name: res.component,
                        tolerance: res.tolerance,
                        max_residual: 0.0,
                        pass: true,
                    });
                    rep.components.last_mut().unwrap()
                }
            };
            if worse(res.value, comp.max_residual) {
                comp.max_residual = res.value;
            }
            // NaN residuals fail
            comp.pass &= res.value <= res.tolerance;
            let ratio = res.value / res.tolerance;
            if rep.worst_point.is_none() || worse(ratio, rep.max_ratio) {
                rep.max_ratio = ratio;
                rep.worst_point = Some(Point { x: se.x, y: se.y });
            }
            if worse(res.value, rep.max_residual) {
                rep.max_residual = res.value;
            }
        }
        for (rep, s) in reports.iter_mut().zip(seen) {
            rep.evaluated += s as usize;
        }
    }
    for rep in &mut reports {
        rep.pass = rep.components.iter().all(|c| c.pass);
    }
    let pass = failures.is_empty() && reports.iter().all(|r| r.pass);
    VerifyReport {
        pass,
        medium,
        samples: count,
        seed,
        constants: k,
        identities: Identities(IDENTITIES.iter().copied().zip(reports).collect()),
        sample_failures: failures,
    }
}
