//! Acceptance run: every criterion at its stated sample counts and
//! tolerances, one PASS/FAIL line each. Exits nonzero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use finsler_core::dynamics::*;
use finsler_core::finsler::{geometry, geometry_with_residuals, GeometrySample, SupportElement};
use finsler_core::jets::{evaluate_jet, partial, ScalarField};
use finsler_core::media::catalog::{self, catalog, sample_admissible, DOMAIN_HALF_WIDTH};
use finsler_core::media::{build_metric, parse_field, Branch, Field, Metric, MediumSpec};
use finsler_core::rng::Sampler;
use finsler_core::spinoptics::*;
use finsler_core::tensor::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn catalog_metrics() -> Vec<(&'static str, Metric)> {
    catalog().into_iter().map(|(n, s)| (n, build_metric(&s).unwrap())).collect()
}

fn admissible(m: &Metric, seed: u64, count: usize) -> Vec<SupportElement> {
    let mut s = Sampler::new(seed);
    (0..count).map(|_| sample_admissible(m, &mut s, DOMAIN_HALF_WIDTH).unwrap()).collect()
}

/// Same point with `y` rescaled onto the indicatrix.
fn on_indicatrix(m: &Metric, se: &SupportElement) -> SupportElement {
    let f = m.eval_f64(&se.point()).unwrap();
    SupportElement::new(se.x, scale(&se.y, 1.0 / f))
}

fn derivative_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, "");
    let mut points = 0;
    for (name, m) in catalog_metrics() {
        let energy = Energy(&m);
        let f = |q: &[f64; 6]| energy.eval_f64(q).unwrap();
        for se in admissible(&m, 1, 100) {
            let p = se.point();
            let jet = evaluate_jet(&energy, &p, 3).unwrap();
            for idx in pipeline_partials() {
                let exact = partial(&jet, &idx).unwrap();
                let fd = richardson(&f, &p, &idx, fd_step(idx.degree() as u32));
                let err = (exact - fd).abs() / fd.abs().max(1.0);
                if !(err <= worst.0) {
                    worst = (err, name);
                }
            }
            points += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        worst.0 < 1e-6 && t < Duration::from_secs(30),
        format!("{points} points, worst relative error {:.2e} ({}), {:.1?}", worst.0, worst.1, t),
    )
}

fn structural_identities() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    let k = SpinConstants::new(1.0, 0.1).unwrap();
    for (name, m) in catalog_metrics() {
        for se in admissible(&m, 1, 100) {
            let se = on_indicatrix(&m, &se);
            let (geom, r) = geometry_with_residuals(&m, &se).unwrap();
            let spin = spin_tensor_at(&geom, k.s);
            let c = coupling_values(&geom, &spin, &k);
            let u = &geom.metric.u;
            let ps_u = max_abs(&mat_vec(&c.ps, u)).max(max_abs(&mat_vec(&transpose(&c.ps), u)));
            for (id, v) in r.named().into_iter().chain([("spin_landsberg_transversality", ps_u)]) {
                if !(v <= worst.0) {
                    worst = (v, format!("{name}: {id}"));
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst.0 < 1e-8 && t < Duration::from_secs(60),
        format!("500 points, worst residual {:.2e} ({}), {:.1?}", worst.0, worst.1, t),
    )
}

fn kernel_oracle() -> Outcome {
    let k = SpinConstants::default();
    let mut worst = 0.0f64;
    let mut weakest_detection = f64::INFINITY;
    let mut singular = 0;
    let mut bump = Sampler::new(99);
    for (_, m) in catalog_metrics() {
        for se in admissible(&m, 3, 50) {
            let geom = geometry(&m, &on_indicatrix(&m, &se)).unwrap();
            let spin = spin_tensor_at(&geom, k.s);
            let Ok(x) = foliation_generator(&geom, &spin, &k) else {
                singular += 1;
                continue;
            };
            worst = worst.max(kernel_residual(&geom, &spin, &k, &x).unwrap());
            let d = bump.direction();
            let e = bump.direction();
            let perturbed = RayDerivative {
                dx: add(&x.dx, &scale(&d, 1e-3)),
                du: add(&x.du, &scale(&e, 1e-3)),
            };
            weakest_detection = weakest_detection.min(kernel_residual(&geom, &spin, &k, &perturbed).unwrap());
        }
    }
    outcome(
        worst < 1e-7 && weakest_detection > 1e-4 && singular == 0,
        format!("250 points, worst residual {worst:.2e}, smallest perturbed residual {weakest_detection:.2e}, {singular} singular"),
    )
}

fn riemannian_reduction() -> Outcome {
    let mut generator = 0.0f64;
    let mut sigma = 0.0f64;
    for spec in [catalog::riemannian(), catalog::fermat()] {
        let m = build_metric(&spec).unwrap();
        for se in admissible(&m, 4, 50) {
            let geom: GeometrySample = geometry(&m, &on_indicatrix(&m, &se)).unwrap();
            for k in [SpinConstants::new(1.0, 0.01).unwrap(), SpinConstants::new(0.6, -0.2).unwrap()] {
                let spin = spin_tensor_at(&geom, k.s);
                let c = couplings(&geom, &spin, &k).unwrap();
                let general = generator_from_couplings(&geom, &spin, &c, &k);
                let special = riemannian_generator(&geom, &spin, &k).unwrap();
                generator = generator.max(general.max_diff(&special));
                sigma = sigma.max((c.sigma * k.s - c.sigma_prime).abs() / c.sigma_prime.abs());
            }
        }
    }
    outcome(
        generator < 1e-8 && sigma < 1e-10,
        format!("200 evaluations, generator difference {generator:.2e}, relative Σs−Σ′ {sigma:.2e}"),
    )
}

fn euclid() -> Metric {
    build_metric(&MediumSpec::Euclidean {}).unwrap()
}

fn flat_limit() -> Outcome {
    let m = euclid();
    let cfg = IntegratorConfig::rk45(1e-10, 10.0);
    let mut worst = 0.0f64;
    let mut dirs = Sampler::new(5);
    for s in [0.01, -0.01, 0.3] {
        for _ in 0..4 {
            let u0 = dirs.direction();
            let x0 = dirs.in_cube(1.0);
            let k = SpinConstants::new(1.0, s).unwrap();
            let tr = integrate(&Spin { metric: &m, constants: k }, x0, u0, &cfg).unwrap();
            if tr.termination != Termination::ReachedEnd {
                return outcome(false, format!("ray ended early: {:?}", tr.termination));
            }
            for smp in &tr.samples {
                let line = add(&x0, &scale(&u0, smp.state.t));
                worst = worst.max(norm(&sub(&smp.state.x, &line)));
            }
        }
    }
    outcome(worst < 1e-9, format!("12 rays over length 10, max deviation {worst:.2e}"))
}

fn fermat_equivalence() -> Outcome {
    let base = euclid();
    let mut details = Vec::new();
    let mut pass = true;
    for (index, x0, u0) in [
        ("1 + 0.1*x1", [0.0; 3], [0.0, 0.6, 0.8]),
        ("1 + 0.2*exp(-(x1^2 + x2^2))", [0.5, 0.1, -5.0], [0.0, 0.0, 1.0]),
    ] {
        let expr = parse_field(index).unwrap();
        let fine = |t_end| IntegratorConfig {
            max_step: Some(0.05),
            ..IntegratorConfig::rk45(1e-12, t_end)
        };
        let fermat = integrate(&Fermat { base: &base, index: &expr }, x0, u0, &fine(10.0)).unwrap();
        let conformal = build_metric(&MediumSpec::Conformal { index: Field::parse(index).unwrap() }).unwrap();
        // optical length exceeds the Euclidean length 10 for these indices
        let geodesic = integrate(&Geodesic(&conformal), x0, u0, &fine(14.0)).unwrap();
        let d = one_sided_distance(&fermat, &geodesic);
        pass &= d < 1e-6 && fermat.termination == Termination::ReachedEnd;
        details.push(format!("n = {index}: {d:.2e}"));
    }
    outcome(pass, format!("point-set distance {}", details.join(", ")))
}

fn integrator_order() -> Outcome {
    let m = build_metric(&catalog::fermat()).unwrap();
    let (x0, u0) = ([0.0; 3], [0.0, 0.6, 0.8]);
    let exact = IntegratorConfig {
        renormalize: false,
        ..IntegratorConfig::rk45(1e-13, 10.0)
    };
    let reference = integrate(&Geodesic(&m), x0, u0, &exact).unwrap().last().state.x;
    let err = |h: f64| {
        let cfg = IntegratorConfig {
            renormalize: false,
            ..IntegratorConfig::rk4(h, 10.0)
        };
        norm(&sub(&integrate(&Geodesic(&m), x0, u0, &cfg).unwrap().last().state.x, &reference))
    };
    let e = [0.5, 0.25, 0.125].map(err);
    let ratios = [e[0] / e[1], e[1] / e[2]];
    outcome(
        ratios.iter().all(|r| (12.0..=20.0).contains(r)),
        format!("errors {:.2e}, {:.2e}, {:.2e}; ratios {:.2}, {:.2}", e[0], e[1], e[2], ratios[0], ratios[1]),
    )
}

fn mirror(v: &Vec3) -> Vec3 {
    [v[0], -v[1], v[2]]
}

fn helicity_antisymmetry() -> Outcome {
    let cfg = IntegratorConfig {
        output_interval: Some(0.5),
        ..IntegratorConfig::rk45(1e-10, 10.0)
    };
    let k = SpinConstants::new(1.0, 0.01).unwrap();
    let (x0, u0) = ([0.0; 3], [0.3, 0.0, 1.0]);
    let run = |m: &Metric, k: SpinConstants| integrate(&Spin { metric: m, constants: k }, x0, u0, &cfg).unwrap();

    let m = build_metric(&catalog::fermat()).unwrap();
    let (plus, minus) = (run(&m, k), run(&m, k.flipped()));
    let reference = integrate(&Geodesic(&m), x0, u0, &cfg).unwrap();
    let end = reference.last().state;
    let shift = |t: &Trajectory| {
        let d = sub(&t.last().state.x, &end.x);
        let dir = scale(&end.u, 1.0 / norm(&end.u));
        sub(&d, &scale(&dir, dot(&d, &dir)))
    };
    let (sp, sm) = (shift(&plus), shift(&minus));
    let antisymmetry = max_abs(&sub(&sp, &mirror(&sm)));
    let along_path = plus
        .samples
        .iter()
        .zip(&minus.samples)
        .map(|(a, b)| max_abs(&sub(&a.state.x, &mirror(&b.state.x))))
        .fold(0.0, f64::max);

    let vacuum = euclid();
    let flat = transverse_shift(&run(&vacuum, k), &run(&vacuum, k.flipped()), None).unwrap();
    let vac = norm(&flat.transverse);
    outcome(
        antisymmetry < 1e-8 && along_path < 1e-8 && sp[1].abs() > 1e-6 && vac < 1e-9,
        format!(
            "out-of-plane shift {:+.4e} vs {:+.4e}, antisymmetry defect {antisymmetry:.1e} (path {along_path:.1e}), vacuum {vac:.1e}",
            sp[1], sm[1]
        ),
    )
}

fn crystal_consistency() -> Outcome {
    let crystal = |v: [f64; 3], e1: Vec3, e2: Vec3, branch| {
        build_metric(&MediumSpec::Crystal {
            v1: v[0].into(),
            v2: v[1].into(),
            v3: v[2].into(),
            e_prime: e1.map(Field::constant),
            e_double_prime: e2.map(Field::constant),
            branch,
        })
        .unwrap()
    };
    let value = |m: &Metric, y: &Vec3| m.eval_f64(&[0.0, 0.0, 0.0, y[0], y[1], y[2]]).unwrap();
    let (v1, v3) = (1.0, 0.8);
    let e = {
        let a = [0.3, -0.2, 0.9];
        scale(&a, 1.0 / norm(&a))
    };
    let ordinary = crystal([v1, v1, v3], e, e, Branch::Minus);
    let extraordinary = crystal([v1, v1, v3], e, e, Branch::Plus);
    let iso: Vec<Metric> = [Branch::Plus, Branch::Minus]
        .into_iter()
        .map(|b| crystal([2.0; 3], [0.6, 0.0, 0.8], [0.0, 1.0, 0.0], b))
        .collect();
    let mut s = Sampler::new(9);
    let (mut worst_uni, mut worst_iso) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let y = s.direction();
        let yy = dot(&y, &y);
        let fo = norm(&y) / v1;
        let fe = yy / (v3 * v3 * yy + (v1 * v1 - v3 * v3) * dot(&e, &y).powi(2)).sqrt();
        worst_uni = worst_uni.max((value(&ordinary, &y) - fo).abs() / fo);
        worst_uni = worst_uni.max((value(&extraordinary, &y) - fe).abs() / fe);
        for m in &iso {
            let expect = norm(&y) / 2.0;
            worst_iso = worst_iso.max((value(m, &y) - expect).abs() / expect);
        }
    }
    outcome(
        worst_uni < 1e-12 && worst_iso < 1e-12,
        format!("1000 directions, uniaxial {worst_uni:.1e}, isotropic {worst_iso:.1e}"),
    )
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_finsler"));
    c.env_remove("FINSLER_THREADS");
    c
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let mut failures = Vec::new();
    let mut check = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // golden trajectories, twice each
    let scene = dir.path().join("scene_spin.json");
    std::fs::copy(golden("scene_spin.json"), &scene).unwrap();
    for run in 0..2 {
        check("trace exit 0", exit_code(&["trace", scene.to_str().unwrap()]) == 0);
        for (out, expected) in [("ray_000.csv", "spin_ray_000.csv"), ("ray_001.csv", "spin_ray_001.csv")] {
            let got = std::fs::read(dir.path().join("out").join(out)).unwrap();
            check(&format!("golden {out} (run {run})"), got == std::fs::read(golden(expected)).unwrap());
        }
    }
    let verify = bin()
        .args(["verify", golden("crystal.json").to_str().unwrap(), "--samples", "20", "--seed", "42"])
        .output()
        .unwrap();
    check("verify golden", verify.stdout == std::fs::read(golden("verify_crystal_seed42.json")).unwrap());
    check("verify exit 0", verify.status.code() == Some(0));

    let bad = write("bad.json", r#"{"type": "uniaxial", "a": [1, 0, 0, 1, 0, 1], "b": [2.5, 0, 0, 1, 0, 1]}"#);
    check("verify failure exit 1", exit_code(&["verify", &bad]) == 1);
    let parse = write(
        "parse.json",
        r#"{"medium": {"type": "conformal", "index": "1 + * x1"}, "model": "geodesic",
            "rays": [{"x0": [0, 0, 0], "u0": [0, 0, 1]}], "output": {"path": "o"}}"#,
    );
    check("parse error exit 2", exit_code(&["trace", &parse]) == 2);
    let singular = write(
        "singular.json",
        r#"{"medium": {"type": "conformal", "index": "1 + 0.1*x1"}, "model": "spin",
            "constants": {"p": 0.1, "s": 1.0},
            "rays": [{"x0": [-0.5, 0, 0], "u0": [0, 0, 1]}], "output": {"path": "sing"}}"#,
    );
    check("all singular exit 3", exit_code(&["trace", &singular]) == 3);
    let a = dir.path().join("out/ray_000.csv");
    let b = dir.path().join("out/ray_001.csv");
    check(
        "grid mismatch exit 2",
        exit_code(&["compare", "--plus", a.to_str().unwrap(), "--minus", b.to_str().unwrap()]) == 2,
    );
    let total = 12;
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{total} checks: golden files byte-identical, exits 0/1/2/3 as specified")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("derivative oracle", derivative_oracle),
        ("structural identities", structural_identities),
        ("kernel oracle", kernel_oracle),
        ("Riemannian reduction", riemannian_reduction),
        ("flat limit", flat_limit),
        ("Fermat equivalence", fermat_equivalence),
        ("integrator order", integrator_order),
        ("helicity antisymmetry", helicity_antisymmetry),
        ("crystal consistency", crystal_consistency),
        ("CLI determinism and exit codes", cli_contract),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let mark = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{mark} {:>2} {name}: {} [{:.2?}]", i + 1, o.detail, start.elapsed());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
