//! Spinning light in a Finsler–Cartan medium.
//!
//! Given the geometry at a point `(x, u)` of the indicatrix bundle and the
//! orbit invariants (color `p`, spin `s`), this module builds the spin
//! tensor `Sᵢⱼ = s·volᵢⱼₖuᵏ`, its curvature couplings `R(S)`, `P(S)`,
//! `Q̂(S)`, the scalars `Δ` and `Σ`, and the generator of the characteristic
//! foliation, i.e. the ray equations
//!
//! ```text
//! ẋ = u + (1/(2sΣ)) S R(S) u
//! u̇ = V − N ẋ,   V = −(1/(2s²ΔΣ)) S (p − ½P(S)ᵀ) S R(S) u
//! ```
//!
//! with mixed tensors `Sⁱⱼ = gⁱᵏSₖⱼ`, `R(S)ⁱⱼ = gⁱᵏR(S)ₖⱼ`,
//! `P(S)ᵀⁱⱼ = gⁱᵏP(S)ⱼₖ`, and the normalization `X³ = 1` (the parameter is
//! not arclength). `V` is the vertical part of the generator in the
//! `(δ/δx, ∂/∂u)` basis; the `−N ẋ` term converts it to the coordinate ODE.
//!
//! Curvature tensors are lowered as `Rⱼᵢₖₗ = gᵢₘRⱼᵐₖₗ` and contracted with
//! the spin tensor on their first index pair.
//!
//! [`kernel_residual`] is an independent oracle: it assembles the
//! presymplectic 2-form from the frame components of the full Cartan
//! curvature and measures how far a candidate vector is from its kernel.

use std::array::from_fn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::{raise_first, GeometrySample};
use crate::tensor::*;

/// Orbit invariants of a spinning photon and the thresholds used to flag
/// the singular locus `Δ = 0 ∪ Σ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinConstants {
    /// Color `p > 0`.
    pub p: f64,
    /// Spin `s ≠ 0`; its sign is the helicity.
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_sigma: Option<f64>,
}

impl Default for SpinConstants {
    fn default() -> Self {
        SpinConstants {
            p: 1.0,
            s: 0.01,
            tol_delta: None,
            tol_sigma: None,
        }
    }
}

impl SpinConstants {
    pub fn new(p: f64, s: f64) -> Result<Self> {
        let k = SpinConstants {
            p,
            s,
            tol_delta: None,
            tol_sigma: None,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::Config(format!("color p must be positive, got {}", self.p)));
        }
        if self.s == 0.0 || !self.s.is_finite() {
            return Err(Error::Config(format!("spin s must be nonzero, got {}", self.s)));
        }
        for t in [self.tol_delta, self.tol_sigma].into_iter().flatten() {
            if !(t > 0.0) {
                return Err(Error::Config(format!("singularity tolerance must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn helicity(&self) -> f64 {
        self.s.signum()
    }

    /// Same constants with the helicity reversed.
    pub fn flipped(&self) -> Self {
        SpinConstants { s: -self.s, ..*self }
    }

    fn default_tolerance(&self) -> f64 {
        1e-9 * self.s.abs().max(self.p * self.p / self.s.abs())
    }

    pub fn delta_tolerance(&self) -> f64 {
        self.tol_delta.unwrap_or_else(|| self.default_tolerance())
    }

    pub fn sigma_tolerance(&self) -> f64 {
        self.tol_sigma.unwrap_or_else(|| self.default_tolerance())
    }
}

/// A g-orthonormal, positively oriented frame with `e₃ = u`.
#[derive(Clone, Debug, Serialize)]
pub struct OrthonormalFrame {
    /// `e[a][i] = eₐⁱ`
    pub e: Mat3,
    /// `omega[a][i] = ωᵃᵢ`, the dual coframe.
    pub omega: Mat3,
}

/// Gram–Schmidt in the metric `g`, starting from `e₃ = u` and drawing the
/// transverse vectors from `seeds` in order. Seeds (nearly) in the span of
/// the vectors already chosen are skipped; running out of seeds is a
/// [`Error::DegenerateSeed`].
pub fn adapted_frame(g: &Mat3, u: &Vec3, seeds: &[Vec3]) -> Result<OrthonormalFrame> {
    let ip = |a: &Vec3, b: &Vec3| quad(g, a, b);
    let nu = ip(u, u).sqrt();
    let e3 = scale(u, 1.0 / nu);
    let mut chosen: Vec<Vec3> = vec![e3];
    for seed in seeds {
        if chosen.len() == 3 {
            break;
        }
        let mut v = *seed;
        for c in &chosen {
            v = sub(&v, &scale(c, ip(&v, c)));
        }
        let seed_norm = ip(seed, seed).sqrt();
        let n = ip(&v, &v).sqrt();
        if !(n > 1e-8 * seed_norm) {
            continue;
        }
        chosen.push(scale(&v, 1.0 / n));
    }
    if chosen.len() < 3 {
        return Err(Error::DegenerateSeed);
    }
    let (e1, mut e2) = (chosen[1], chosen[2]);
    if dot(&cross(&e1, &e2), &e3) < 0.0 {
        e2 = scale(&e2, -1.0);
    }
    let e = [e1, e2, e3];
    let omega = from_fn(|a| mat_vec(g, &e[a]));
    Ok(OrthonormalFrame { e, omega })
}

/// [`adapted_frame`] seeded with the canonical axes.
pub fn default_frame(g: &Mat3, u: &Vec3) -> Result<OrthonormalFrame> {
    adapted_frame(g, u, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
}

#[derive(Clone, Debug, Serialize)]
pub struct SpinTensorSample {
    /// `volᵢⱼₖ = √det g · εᵢⱼₖ`
    pub vol: Tensor3,
    /// `Sᵢⱼ = s·volᵢⱼₖuᵏ`
    pub s_lo: Mat3,
    /// `Sⁱⱼ = gⁱᵏSₖⱼ`
    pub s_mixed: Mat3,
    /// `Sⁱʲ = gⁱᵏgʲˡSₖₗ`
    pub s_up: Mat3,
}

pub fn spin_tensor(g: &Mat3, g_inv: &Mat3, u: &Vec3, s: f64) -> SpinTensorSample {
    let root = det(g).sqrt();
    let vol: Tensor3 = from_fn(|i| from_fn(|j| from_fn(|k| root * levi_civita(i, j, k))));
    let s_lo: Mat3 = from_fn(|i| from_fn(|j| s * (0..3).map(|k| vol[i][j][k] * u[k]).sum::<f64>()));
    let s_mixed = mat_mul(g_inv, &s_lo);
    let s_up = mat_mul(&s_mixed, g_inv);
    SpinTensorSample {
        vol,
        s_lo,
        s_mixed,
        s_up,
    }
}

/// Spin tensor at the supporting element of a geometry sample.
pub fn spin_tensor_at(geom: &GeometrySample, s: f64) -> SpinTensorSample {
    let m = &geom.metric;
    spin_tensor(&m.g, &m.g_inv, &m.u, s)
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingSample {
    /// `R(S)ₖₗ = Rₐᵦₖₗ Sᵃᵇ`
    pub rs: Mat3,
    /// `P(S)_cd = 2(A_{cda|b} − A_{ace}Ȧᵉ_{bd}) Sᵃᵇ`
    pub ps: Mat3,
    /// `P(S)_cd = Pₐᵦ_cd Sᵃᵇ`, the direct contraction (for cross-checking).
    pub ps_direct: Mat3,
    /// `Q̂(S)_cd = −2A_{aec}Aᵉ_{bd} Sᵃᵇ`
    pub qhat_s: Mat3,
    pub rss: f64,
    pub qhat_ss: f64,
    pub delta: f64,
    pub sigma: f64,
    /// `Σ′ = p² + ¼R(S)(S)`
    pub sigma_prime: f64,
}

fn contract_first_pair(t: &Tensor4, s_up: &Mat3) -> Mat3 {
    from_fn(|c| {
        from_fn(|d| {
            let mut v = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    v += t[a][b][c][d] * s_up[a][b];
                }
            }
            v
        })
    })
}

fn full_contract(m: &Mat3, s_up: &Mat3) -> f64 {
    (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m[i][j] * s_up[i][j]).sum()
}

/// Couplings and `Δ`, `Σ` without the singularity check.
pub fn coupling_values(geom: &GeometrySample, spin: &SpinTensorSample, k: &SpinConstants) -> CouplingSample {
    let (p, s) = (k.p, k.s);
    let g_inv = &geom.metric.g_inv;
    let a = &geom.cartan.a;
    let cv = &geom.curvature;
    let su = &spin.s_up;

    let rs = contract_first_pair(&geom.lower(&cv.r), su);
    let ps_direct = contract_first_pair(&geom.lower(&cv.p), su);

    let a_mix = raise_first(g_inv, a);
    let a_dot_mix = raise_first(g_inv, &cv.a_dot);
    let mut ps = ZERO_MAT;
    let mut qhat_s = ZERO_MAT;
    for c in 0..3 {
        for d in 0..3 {
            let (mut pv, mut qv) = (0.0, 0.0);
            for aa in 0..3 {
                for b in 0..3 {
                    let sab = su[aa][b];
                    if sab == 0.0 {
                        continue;
                    }
                    let mut t = cv.a_cov[c][d][aa][b];
                    for e in 0..3 {
                        t -= a[aa][c][e] * a_dot_mix[e][b][d];
                        qv -= 2.0 * a[aa][e][c] * a_mix[e][b][d] * sab;
                    }
                    pv += 2.0 * t * sab;
                }
            }
            ps[c][d] = pv;
            qhat_s[c][d] = qv;
        }
    }

    let rss = full_contract(&rs, su);
    let qhat_ss = full_contract(&qhat_s, su);
    let delta = s * (1.0 - qhat_ss / (4.0 * s * s));
    let trace_p = full_contract(&ps, g_inv);
    let mut pp = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for kk in 0..3 {
                for l in 0..3 {
                    pp += ps[i][kk] * ps[j][l] * su[i][j] * su[kk][l];
                }
            }
        }
    }
    let sigma = (p * p - 0.5 * p * trace_p + pp / (8.0 * s * s)) / delta + rss / (4.0 * s);
    CouplingSample {
        rs,
        ps,
        ps_direct,
        qhat_s,
        rss,
        qhat_ss,
        delta,
        sigma,
        sigma_prime: p * p + 0.25 * rss,
    }
}

/// Couplings, failing with [`Error::SingularLocus`] near `Δ = 0` or `Σ = 0`.
pub fn couplings(geom: &GeometrySample, spin: &SpinTensorSample, k: &SpinConstants) -> Result<CouplingSample> {
    let c = coupling_values(geom, spin, k);
    check_regular(&c, k)?;
    Ok(c)
}

pub fn check_regular(c: &CouplingSample, k: &SpinConstants) -> Result<()> {
    if !(c.delta.abs() >= k.delta_tolerance()) || !(c.sigma.abs() >= k.sigma_tolerance()) {
        return Err(Error::SingularLocus {
            delta: c.delta,
            sigma: c.sigma,
        });
    }
    Ok(())
}

/// Tangent vector to the indicatrix bundle in coordinates: `(ẋ, u̇)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RayDerivative {
    pub dx: Vec3,
    pub du: Vec3,
}

impl RayDerivative {
    pub fn max_diff(&self, o: &RayDerivative) -> f64 {
        max_abs(&sub(&self.dx, &o.dx)).max(max_abs(&sub(&self.du, &o.du)))
    }
}

/// Ray derivative from precomputed couplings (no singularity check).
pub fn generator_from_couplings(
    geom: &GeometrySample,
    spin: &SpinTensorSample,
    c: &CouplingSample,
    k: &SpinConstants,
) -> RayDerivative {
    let (p, s) = (k.p, k.s);
    let g_inv = &geom.metric.g_inv;
    let u = &geom.metric.u;
    let sm = &spin.s_mixed;
    let rs_u = mat_vec(&mat_mul(g_inv, &c.rs), u);
    let srs_u = mat_vec(sm, &rs_u);
    let dx = add(u, &scale(&srs_u, 1.0 / (2.0 * s * c.sigma)));

    // (p·I − ½ gⁱᵏP(S)ⱼₖ) applied to S R(S) u, then S again
    let pt = mat_mul(g_inv, &transpose(&c.ps));
    let inner: Vec3 = from_fn(|i| p * srs_u[i] - 0.5 * dot(&pt[i], &srs_u));
    let v = scale(&mat_vec(sm, &inner), -1.0 / (2.0 * s * s * c.delta * c.sigma));
    let n_dx = mat_vec(&geom.connection.n, &dx);
    RayDerivative { dx, du: sub(&v, &n_dx) }
}

/// Generator of the characteristic foliation with `X³ = 1`.
pub fn foliation_generator(
    geom: &GeometrySample,
    spin: &SpinTensorSample,
    k: &SpinConstants,
) -> Result<RayDerivative> {
    let c = couplings(geom, spin, k)?;
    Ok(generator_from_couplings(geom, spin, &c, k))
}

/// Independent implementation of the Riemannian special case
///
/// ```text
/// ẋ = u + (1/(2Σ′)) S R(S) u,   u̇ = (p/(2Σ′)) R(S) u − N ẋ,   Σ′ = p² + ¼R(S)(S),
/// ```
///
/// valid when the Cartan tensor vanishes.
pub fn riemannian_generator(
    geom: &GeometrySample,
    spin: &SpinTensorSample,
    k: &SpinConstants,
) -> Result<RayDerivative> {
    let g = &geom.metric.g;
    let g_inv = &geom.metric.g_inv;
    let u = &geom.metric.u;
    let r = &geom.curvature.r;
    // R(S)_{kl} = g_{im} R_j^m_{kl} S^{ji}
    let mut rs = ZERO_MAT;
    for kk in 0..3 {
        for l in 0..3 {
            for j in 0..3 {
                for i in 0..3 {
                    for m in 0..3 {
                        rs[kk][l] += g[i][m] * r[m][j][kk][l] * spin.s_up[j][i];
                    }
                }
            }
        }
    }
    let rss: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| rs[i][j] * spin.s_up[i][j]).sum();
    let sigma_prime = k.p * k.p + 0.25 * rss;
    if !(sigma_prime.abs() >= k.sigma_tolerance() * k.s.abs()) {
        return Err(Error::SingularLocus {
            delta: k.s,
            sigma: sigma_prime / k.s,
        });
    }
    let rs_u: Vec3 = from_fn(|i| (0..3).map(|j| (0..3).map(|l| g_inv[i][l] * rs[l][j]).sum::<f64>() * u[j]).sum());
    let anomalous = mat_vec(&spin.s_mixed, &rs_u);
    let dx = add(u, &scale(&anomalous, 1.0 / (2.0 * sigma_prime)));
    let vertical = scale(&rs_u, k.p / (2.0 * sigma_prime));
    Ok(RayDerivative {
        dx,
        du: sub(&vertical, &mat_vec(&geom.connection.n, &dx)),
    })
}

/// Frame components of a tangent vector: horizontal `ωᵃ(X)` and vertical
/// `ωᵃ̄(X) = ωᵃᵢ(u̇ⁱ + Nⁱⱼẋʲ)` (with `F = 1`).
fn frame_components(frame: &OrthonormalFrame, n: &Mat3, x: &RayDerivative) -> [f64; 6] {
    let h = mat_vec(&frame.omega, &x.dx);
    let dy = add(&x.du, &mat_vec(n, &x.dx));
    let v = mat_vec(&frame.omega, &dy);
    [h[0], h[1], h[2], v[0], v[1], v[2]]
}

/// `T_frame[a][b][c][d] = eₐʲ e_bᵐ e_cᵏ e_dˡ T[j][m][k][l]`
fn to_frame4(e: &Mat3, t: &Tensor4) -> Tensor4 {
    // contract one index at a time
    let mut cur = *t;
    for slot in 0..4 {
        let mut next = ZERO_T4;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let idx = [a, b, c, d];
                        let mut v = 0.0;
                        for m in 0..3 {
                            let mut src = idx;
                            src[slot] = m;
                            v += e[idx[slot]][m] * cur[src[0]][src[1]][src[2]][src[3]];
                        }
                        next[a][b][c][d] = v;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// The presymplectic 2-form at `(x, u)` as an antisymmetric 6×6 matrix in
/// the hv-frame (indices 0..3 horizontal, 3..6 vertical):
///
/// ```text
/// σ = p hₐᵦ ωᵃ̄∧ωᵇ + ½ Ω̂ₐᵦSᵃᵇ − ½ Sₐᵦ ωᵃ̄∧ωᵇ̄,
/// Ω̂ₐᵦ = ½R̂ₐᵦ_cd ωᶜ∧ωᵈ + P̂ₐᵦ_cd ωᶜ∧ωᵈ̄ + ½Q̂ₐᵦ_cd ωᶜ̄∧ωᵈ̄,
/// ```
///
/// with frame spin `S¹² = −S²¹ = s`, and `(α∧β)(X,Y) = α(X)β(Y) − α(Y)β(X)`.
pub fn presymplectic_form(geom: &GeometrySample, frame: &OrthonormalFrame, k: &SpinConstants) -> [[f64; 6]; 6] {
    let s = k.s;
    let e = &frame.e;
    let cv = &geom.curvature;
    let rh = to_frame4(e, &geom.lower(&cv.rhat));
    let ph = to_frame4(e, &geom.lower(&cv.phat));
    let qh = to_frame4(e, &geom.lower(&cv.qhat));
    let mut sigma = [[0.0; 6]; 6];
    let mut wedge = |i: usize, j: usize, c: f64| {
        sigma[i][j] += c;
        sigma[j][i] -= c;
    };
    // p h_ab ω^ā ∧ ω^b
    for a in 0..2 {
        wedge(3 + a, a, k.p);
    }
    // ½ S^{ab} Ω̂_ab with S^{12} = s, S^{21} = −s
    for c in 0..3 {
        for d in 0..3 {
            let r = s * (rh[0][1][c][d] - rh[1][0][c][d]);
            let pp = s * (ph[0][1][c][d] - ph[1][0][c][d]);
            let q = s * (qh[0][1][c][d] - qh[1][0][c][d]);
            wedge(c, d, 0.5 * 0.5 * r);
            wedge(c, 3 + d, 0.5 * pp);
            wedge(3 + c, 3 + d, 0.5 * 0.5 * q);
        }
    }
    // −½ S_ab ω^ā ∧ ω^b̄
    wedge(3, 4, -0.5 * s);
    wedge(4, 3, 0.5 * s);
    sigma
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct KernelReport {
    /// `max |σ(X, Y)|` over the five tangent basis vectors of the indicatrix bundle.
    pub residual: f64,
    /// `|λ| = |σ(X, ê₃̄)|`, the Lagrange multiplier of the constraint `F = 1`.
    pub multiplier: f64,
    /// `|ω³̄(X)|`, tangency to the indicatrix.
    pub tangency: f64,
}

impl KernelReport {
    pub fn max(&self) -> f64 {
        self.residual.max(self.multiplier).max(self.tangency)
    }
}

pub fn kernel_report(geom: &GeometrySample, k: &SpinConstants, x: &RayDerivative) -> Result<KernelReport> {
    let frame = default_frame(&geom.metric.g, &geom.metric.u)?;
    Ok(kernel_report_in(geom, &frame, k, x))
}

/// [`kernel_report`] in a caller-chosen adapted frame.
pub fn kernel_report_in(
    geom: &GeometrySample,
    frame: &OrthonormalFrame,
    k: &SpinConstants,
    x: &RayDerivative,
) -> KernelReport {
    let xs = frame_components(frame, &geom.connection.n, x);
    let sigma = presymplectic_form(geom, frame, k);
    let contracted: [f64; 6] = from_fn(|j| (0..6).map(|i| xs[i] * sigma[i][j]).sum());
    let residual = [0, 1, 2, 3, 4].iter().fold(0.0f64, |m, &j| m.max(contracted[j].abs()));
    KernelReport {
        residual,
        multiplier: contracted[5].abs(),
        tangency: xs[5].abs(),
    }
}

/// Distance of `X` from the kernel of the presymplectic 2-form (max-norm of
/// `σ(X, ·)` on the indicatrix bundle, the multiplier and the tangency
/// defect). The spin tensor argument is accepted for symmetry with the other
/// operations; the oracle rebuilds the spin in its own frame.
pub fn kernel_residual(
    geom: &GeometrySample,
    _spin: &SpinTensorSample,
    k: &SpinConstants,
    x: &RayDerivative,
) -> Result<f64> {
    Ok(kernel_report(geom, k, x)?.max())
}

/// `Δ` and `Σ` from the frame-level formulas
///
/// ```text
/// Δ = s[1 − ¼ Q̂_ABCD εᴬᴮεᶜᴰ]
/// Σ = (1/Δ)[p² − ½p P(S)_AB δᴬᴮ + ⅛ P(S)_AC P(S)_BD εᴬᴮεᶜᴰ] + ¼ s R_ABCD εᴬᴮεᶜᴰ
/// ```
///
/// evaluated in an adapted frame, for comparison with the coordinate forms.
pub fn frame_delta_sigma(geom: &GeometrySample, k: &SpinConstants) -> Result<(f64, f64)> {
    let (p, s) = (k.p, k.s);
    let frame = default_frame(&geom.metric.g, &geom.metric.u)?;
    let cv = &geom.curvature;
    let r = to_frame4(&frame.e, &geom.lower(&cv.r));
    let pf = to_frame4(&frame.e, &geom.lower(&cv.p));
    let q = to_frame4(&frame.e, &geom.lower(&cv.qhat));
    let eps = |a: usize, b: usize| levi_civita(a, b, 2);
    let mut qee = 0.0;
    let mut ree = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    let w = eps(a, b) * eps(c, d);
                    qee += q[a][b][c][d] * w;
                    ree += r[a][b][c][d] * w;
                }
            }
        }
    }
    // P(S)_AB = P_{abAB} S^{ab} with frame S^{12} = −S^{21} = s
    let ps = |a: usize, b: usize| s * (pf[0][1][a][b] - pf[1][0][a][b]);
    let delta = s * (1.0 - 0.25 * qee);
    let mut pp = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    pp += ps(a, c) * ps(b, d) * eps(a, b) * eps(c, d);
                }
            }
        }
    }
    let sigma = (p * p - 0.5 * p * (ps(0, 0) + ps(1, 1)) + pp / 8.0) / delta + 0.25 * s * ree;
    Ok((delta, sigma))
}
