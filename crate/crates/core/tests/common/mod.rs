//! Independent oracles shared by the integration tests: finite differences,
//! closed-form conformal geometry, and point-set distances between rays.
#![allow(dead_code)]

use finsler_core::dynamics::Trajectory;
use finsler_core::jets::{MultiIndex, Scalar, ScalarField, NVARS};
use finsler_core::Result;

/// `E = ½F²` of a metric, as a field of its own.
pub struct Energy<'a, M>(pub &'a M);

impl<M: ScalarField> ScalarField for Energy<'_, M> {
    fn eval<S: Scalar>(&self, z: &[S; NVARS]) -> Result<S> {
        let f = self.0.eval(z)?;
        Ok(f.square() * S::from_f64(0.5))
    }
}

/// Nested central difference of the mixed partial `idx` with step `h`.
///
/// Per variable: first order `(f₊ − f₋)/2h`, second `(f₊ − 2f + f₋)/h²`,
/// third `(f₊₂ − 2f₊ + 2f₋ − f₋₂)/2h³`. Every stencil has an even error
/// expansion, so one Richardson step removes the `h²` term.
pub fn central_difference(f: &dyn Fn(&[f64; 6]) -> f64, p: &[f64; 6], idx: &MultiIndex, h: f64) -> f64 {
    let e = idx.exponents();
    fn rec(f: &dyn Fn(&[f64; 6]) -> f64, p: [f64; 6], e: &[u8; 6], var: usize, h: f64) -> f64 {
        if var == 6 {
            return f(&p);
        }
        let at = |d: f64| {
            let mut q = p;
            q[var] += d * h;
            rec(f, q, e, var + 1, h)
        };
        match e[var] {
            0 => at(0.0),
            1 => (at(1.0) - at(-1.0)) / (2.0 * h),
            2 => (at(1.0) - 2.0 * at(0.0) + at(-1.0)) / (h * h),
            3 => (at(2.0) - 2.0 * at(1.0) + 2.0 * at(-1.0) - at(-2.0)) / (2.0 * h * h * h),
            n => panic!("finite-difference stencil of order {n} not provided"),
        }
    }
    rec(f, *p, &e, 0, h)
}

/// Richardson-extrapolated central difference: `(4D(h/2) − D(h))/3`.
pub fn richardson(f: &dyn Fn(&[f64; 6]) -> f64, p: &[f64; 6], idx: &MultiIndex, h: f64) -> f64 {
    let coarse = central_difference(f, p, idx, h);
    let fine = central_difference(f, p, idx, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Step used for a partial of the given total order, balancing truncation
/// (`h⁴` after extrapolation) against rounding (`ε/hᵏ`).
pub fn fd_step(order: u32) -> f64 {
    match order {
        1 => 1e-5,
        2 => 1e-3,
        _ => 1e-2,
    }
}

/// Every partial of `E = ½F²` that enters `g`, `A`, `G`, `N` and `Γ`:
/// `∂x`, `∂y`, `∂y²`, `∂y³`, `∂x∂y`, `∂x∂y²`.
pub fn pipeline_partials() -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for i in 0..6 {
        out.push(MultiIndex::from_vars(&[i]).unwrap());
    }
    for i in 3..6 {
        for j in i..6 {
            out.push(MultiIndex::from_vars(&[i, j]).unwrap());
            for k in j..6 {
                out.push(MultiIndex::from_vars(&[i, j, k]).unwrap());
            }
        }
    }
    for x in 0..3 {
        for i in 3..6 {
            out.push(MultiIndex::from_vars(&[x, i]).unwrap());
            for j in i..6 {
                out.push(MultiIndex::from_vars(&[x, i, j]).unwrap());
            }
        }
    }
    out
}

/// Conformally flat metric `gᵢⱼ = n²δᵢⱼ` with `φ = ln n` given by its
/// gradient and Hessian at a point: Christoffel symbols
/// `Γⁱⱼₖ = δⁱⱼφₖ + δⁱₖφⱼ − δⱼₖφᵢ` and the Riemann tensor
/// `Rⱼⁱₖₗ = ∂ₖΓⁱⱼₗ − ∂ₗΓⁱⱼₖ + ΓⁱₘₖΓᵐⱼₗ − ΓⁱₘₗΓᵐⱼₖ`, stored as `r[i][j][k][l]`.
pub fn conformal_riemann(dphi: [f64; 3], ddphi: [[f64; 3]; 3]) -> [[[[f64; 3]; 3]; 3]; 3] {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let gamma = |i: usize, j: usize, k: usize| d(i, j) * dphi[k] + d(i, k) * dphi[j] - d(j, k) * dphi[i];
    // ∂ₘΓⁱⱼₖ
    let dgamma =
        |m: usize, i: usize, j: usize, k: usize| d(i, j) * ddphi[k][m] + d(i, k) * ddphi[j][m] - d(j, k) * ddphi[i][m];
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut v = dgamma(k, i, j, l) - dgamma(l, i, j, k);
                    for m in 0..3 {
                        v += gamma(i, m, k) * gamma(m, j, l) - gamma(i, m, l) * gamma(m, j, k);
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    r
}

fn hermite(p0: &[f64; 3], m0: &[f64; 3], p1: &[f64; 3], m1: &[f64; 3], s: f64) -> [f64; 3] {
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    std::array::from_fn(|i| h00 * p0[i] + h10 * m0[i] + h01 * p1[i] + h11 * m1[i])
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Distance from `p` to the curve through the samples of `curve`, using
/// cubic Hermite interpolation with tangents `ẋ = u` (valid for the
/// geodesic and Fermat models).
pub fn distance_to_curve(curve: &Trajectory, p: &[f64; 3]) -> f64 {
    let s = &curve.samples;
    let nearest = (0..s.len())
        .min_by(|&a, &b| dist(&s[a].state.x, p).total_cmp(&dist(&s[b].state.x, p)))
        .expect("non-empty curve");
    let mut best = dist(&s[nearest].state.x, p);
    for seg in [nearest.saturating_sub(1), nearest] {
        if seg + 1 >= s.len() {
            continue;
        }
        let (a, b) = (&s[seg].state, &s[seg + 1].state);
        let dt = b.t - a.t;
        let m0 = a.u.map(|v| v * dt);
        let m1 = b.u.map(|v| v * dt);
        let f = |t: f64| dist(&hermite(&a.x, &m0, &b.x, &m1, t), p);
        // coarse scan, then golden-section refinement
        let mut t0 = (0..=32).map(|k| k as f64 / 32.0).min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap();
        let (mut lo, mut hi) = ((t0 - 1.0 / 32.0).max(0.0), (t0 + 1.0 / 32.0).min(1.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if f(c) < f(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        t0 = 0.5 * (lo + hi);
        best = best.min(f(t0));
    }
    best
}

/// Largest distance from a sample of `a` to the curve `b`.
pub fn one_sided_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    a.samples.iter().map(|s| distance_to_curve(b, &s.state.x)).fold(0.0, f64::max)
}
