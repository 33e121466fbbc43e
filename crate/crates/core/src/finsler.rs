//! Metric, connection and curvature tensors of a Finsler structure in three
//! dimensions, evaluated at a supporting element `(x, y)`.
//!
//! Everything is derived from a single jet of `F` around the supporting
//! element: `E = ½F²` is formed in jet arithmetic, the fundamental tensor and
//! its inverse stay jets, and each later object (spray, nonlinear connection,
//! Chern coefficients) is again a jet one order lower. Horizontal derivatives
//! `δ/δxᵏ = ∂/∂xᵏ − Nᵐₖ ∂/∂yᵐ` are applied literally to those jets.
//!
//! Storage conventions (upper index first):
//!
//! | field            | element            | meaning                         |
//! |------------------|--------------------|---------------------------------|
//! | `g[i][j]`        | `gᵢⱼ`              | fundamental tensor              |
//! | `a[i][j][k]`     | `Aᵢⱼₖ`             | Cartan tensor `F·Cᵢⱼₖ`          |
//! | `spray[i]`       | `Gⁱ`               | geodesics obey `u̇ = −G`         |
//! | `n[i][j]`        | `Nⁱⱼ`              | `½ ∂Gⁱ/∂yʲ`                     |
//! | `gamma[i][j][k]` | `Γⁱⱼₖ`             | Chern connection                |
//! | `r[i][j][k][l]`  | `Rⱼⁱₖₗ`            | hh-curvature                    |
//! | `p[i][j][k][l]`  | `Pⱼⁱₖₗ`            | hv-curvature `−F ∂Γⁱⱼₖ/∂yˡ`     |
//! | `a_cov[i][j][k][l]` | `Aᵢⱼₖ|ₗ`        | horizontal covariant derivative |
//!
//! Lowering follows the convention `Rⱼᵢₖₗ = gᵢₘ Rⱼᵐₖₗ`.

use std::array::from_fn;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::jets::{evaluate_jet_limited, Jet, ScalarField};
use crate::tensor::*;

/// A point of the slit tangent bundle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupportElement {
    pub x: Vec3,
    pub y: Vec3,
}

impl SupportElement {
    pub fn new(x: Vec3, y: Vec3) -> Self {
        SupportElement { x, y }
    }

    pub fn point(&self) -> [f64; 6] {
        [self.x[0], self.x[1], self.x[2], self.y[0], self.y[1], self.y[2]]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricSample {
    pub f: f64,
    pub g: Mat3,
    pub g_inv: Mat3,
    /// Unit supporting element `uⁱ = yⁱ/F`.
    pub u: Vec3,
    /// `uᵢ = gᵢⱼuʲ = ∂F/∂yⁱ`.
    pub u_flat: Vec3,
}

#[derive(Clone, Debug, Serialize)]
pub struct CartanSample {
    /// `Cᵢⱼₖ = ¼ ∂³F²/∂yⁱ∂yʲ∂yᵏ`
    pub c: Tensor3,
    /// `Aᵢⱼₖ = F·Cᵢⱼₖ`
    pub a: Tensor3,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConnectionSample {
    pub spray: Vec3,
    pub n: Mat3,
    pub gamma: Tensor3,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChernCurvature {
    pub r: Tensor4,
    pub p: Tensor4,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSample {
    pub r: Tensor4,
    pub p: Tensor4,
    pub rhat: Tensor4,
    pub phat: Tensor4,
    pub qhat: Tensor4,
    pub a_cov: Tensor4,
    /// `Ȧᵢⱼₖ = Aᵢⱼₖ|ₗ uˡ`
    pub a_dot: Tensor3,
}

/// Every tensor of the pipeline at one supporting element.
#[derive(Clone, Debug, Serialize)]
pub struct GeometrySample {
    pub se: SupportElement,
    pub metric: MetricSample,
    pub cartan: CartanSample,
    pub connection: ConnectionSample,
    pub curvature: CurvatureSample,
}

impl GeometrySample {
    /// `A^i_{jk} = g^{il} A_{ljk}`
    pub fn a_mixed(&self) -> Tensor3 {
        raise_first(&self.metric.g_inv, &self.cartan.a)
    }

    /// Lower the upper index of a curvature tensor: `T_{jikl} = g_{im} T_j^m_{kl}`,
    /// returned as `out[j][i][k][l]`.
    pub fn lower(&self, t: &Tensor4) -> Tensor4 {
        lower_curvature(&self.metric.g, t)
    }
}

/// Scale-invariant positive-definiteness threshold on the fundamental tensor.
pub const PD_RELATIVE_THRESHOLD: f64 = 1e-10;

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(g: &Mat3) -> f64 {
    let m = Matrix3::from_fn(|i, j| 0.5 * (g[i][j] + g[j][i]));
    SymmetricEigen::new(m).eigenvalues.min()
}

fn check_positive_definite(g: &Mat3) -> Result<()> {
    let lambda = min_eigenvalue(g);
    let trace = g[0][0] + g[1][1] + g[2][2];
    if !(trace > 0.0) || !(lambda > PD_RELATIVE_THRESHOLD * trace) {
        return Err(Error::NonPositiveDefinite {
            min_eigenvalue: lambda,
        });
    }
    Ok(())
}

type JetMat = [[Jet; 3]; 3];
type JetT3 = [[[Jet; 3]; 3]; 3];

fn values(m: &JetMat) -> Mat3 {
    from_fn(|i| from_fn(|j| m[i][j].value()))
}

fn sum_jets(mut terms: impl Iterator<Item = Jet>) -> Jet {
    let first = terms.next().expect("at least one term");
    terms.fold(first, |acc, t| acc + t)
}

/// Jets of `F`, `E = ½F²`, the fundamental tensor and its inverse.
struct MetricJets {
    f: Jet,
    e: Jet,
    y: [Jet; 3],
    g: JetMat,
    g_inv: JetMat,
}

impl MetricJets {
    fn new<M: ScalarField + ?Sized>(
        metric: &M,
        se: &SupportElement,
        order: u8,
        x_order: u8,
    ) -> Result<Self> {
        let z = se.point();
        if se.y == ZERO3 {
            return Err(domain("supporting element y must be nonzero"));
        }
        let f = evaluate_jet_limited(metric, &z, order, x_order)?;
        if !(f.value() > 0.0) || !f.value().is_finite() {
            return Err(domain(format!(
                "Finsler function must be positive, got F = {}",
                f.value()
            )));
        }
        let e = &f * &f * 0.5;
        let g: JetMat = from_fn(|i| from_fn(|j| e.derivative(3 + i).derivative(3 + j)));
        check_positive_definite(&values(&g))?;
        let g_inv = invert(&g)?;
        let y = from_fn(|i| Jet::variable_with_limits(3 + i, se.y[i], order, x_order));
        Ok(MetricJets { f, e, y, g, g_inv })
    }

    fn sample(&self) -> MetricSample {
        let f = self.f.value();
        let g = values(&self.g);
        let g_inv = values(&self.g_inv);
        let u = from_fn(|i| self.y[i].value() / f);
        let u_flat = mat_vec(&g, &u);
        MetricSample {
            f,
            g,
            g_inv,
            u,
            u_flat,
        }
    }

    /// `Gⁱ = gⁱᵏ (∂²E/∂xˡ∂yᵏ yˡ − ∂E/∂xᵏ)`
    fn spray(&self) -> [Jet; 3] {
        let dx: [Jet; 3] = from_fn(|l| self.e.derivative(l));
        let bracket: [Jet; 3] = from_fn(|k| {
            let mixed = sum_jets((0..3).map(|l| dx[l].derivative(3 + k) * &self.y[l]));
            mixed - &dx[k]
        });
        from_fn(|i| sum_jets((0..3).map(|k| &self.g_inv[i][k] * &bracket[k])))
    }
}

/// Inverse of a symmetric jet matrix via the adjugate.
fn invert(g: &JetMat) -> Result<JetMat> {
    let cof: JetMat = from_fn(|i| {
        from_fn(|j| {
            let (j1, j2, i1, i2) = ((j + 1) % 3, (j + 2) % 3, (i + 1) % 3, (i + 2) % 3);
            &g[j1][i1] * &g[j2][i2] - &g[j1][i2] * &g[j2][i1]
        })
    });
    let det = sum_jets((0..3).map(|j| &g[0][j] * &cof[j][0]));
    let inv_det = crate::jets::Scalar::try_recip(&det)?;
    Ok(from_fn(|i| from_fn(|j| &cof[i][j] * &inv_det)))
}

/// Horizontal derivative `δf/δxᵏ = ∂f/∂xᵏ − Nᵐₖ ∂f/∂yᵐ`, value only.
fn delta_value(f: &Jet, n: &Mat3, k: usize) -> f64 {
    f.first_partial(k) - (0..3).map(|m| n[m][k] * f.first_partial(3 + m)).sum::<f64>()
}

/// Connection-level jets.
struct ConnectionJets {
    spray: [Jet; 3],
    n: JetMat,
    gamma: JetT3,
}

impl ConnectionJets {
    fn new(m: &MetricJets) -> Self {
        let spray = m.spray();
        let n: JetMat = from_fn(|i| from_fn(|j| spray[i].derivative(3 + j) * 0.5));
        // dg[j][k][l] = δ_j g_kl
        let dg: JetT3 = from_fn(|j| {
            from_fn(|k| {
                from_fn(|l| {
                    let gkl = &m.g[k][l];
                    let vertical = sum_jets((0..3).map(|r| &n[r][j] * &gkl.derivative(3 + r)));
                    gkl.derivative(j) - vertical
                })
            })
        });
        let gamma: JetT3 = from_fn(|i| {
            from_fn(|j| {
                from_fn(|k| {
                    sum_jets((0..3).map(|l| {
                        let bracket = &dg[j][k][l] + &dg[k][j][l] - &dg[l][j][k];
                        &m.g_inv[i][l] * &bracket
                    })) * 0.5
                })
            })
        });
        ConnectionJets { spray, n, gamma }
    }

    fn sample(&self) -> ConnectionSample {
        ConnectionSample {
            spray: from_fn(|i| self.spray[i].value()),
            n: values(&self.n),
            gamma: from_fn(|i| from_fn(|j| from_fn(|k| self.gamma[i][j][k].value()))),
        }
    }
}

fn cartan_jets(m: &MetricJets) -> JetT3 {
    from_fn(|i| from_fn(|j| from_fn(|k| &m.f * &(m.g[i][j].derivative(3 + k) * 0.5))))
}

fn cartan_sample(m: &MetricJets, a: &JetT3) -> CartanSample {
    let f = m.f.value();
    let a: Tensor3 = from_fn(|i| from_fn(|j| from_fn(|k| a[i][j][k].value())));
    let c = from_fn(|i| from_fn(|j| from_fn(|k| a[i][j][k] / f)));
    CartanSample { c, a }
}

pub fn raise_first(g_inv: &Mat3, t: &Tensor3) -> Tensor3 {
    from_fn(|i| {
        from_fn(|j| from_fn(|k| (0..3).map(|l| g_inv[i][l] * t[l][j][k]).sum()))
    })
}

/// `out[j][i][k][l] = g_{im} t[m][j][k][l]`
pub fn lower_curvature(g: &Mat3, t: &Tensor4) -> Tensor4 {
    from_fn(|j| {
        from_fn(|i| {
            from_fn(|k| from_fn(|l| (0..3).map(|m| g[i][m] * t[m][j][k][l]).sum()))
        })
    })
}

/// Full pipeline state, kept around for the identity checks.
struct Pipeline {
    metric: MetricJets,
    cartan: JetT3,
    sample: GeometrySample,
}

impl Pipeline {
    fn new<M: ScalarField + ?Sized>(metric: &M, se: &SupportElement) -> Result<Self> {
        let mj = MetricJets::new(metric, se, 4, 2)?;
        let conn = ConnectionJets::new(&mj);
        let cartan = cartan_jets(&mj);
        let ms = mj.sample();
        let cs = cartan_sample(&mj, &cartan);
        let connection = conn.sample();
        let curvature = curvature(&ms, &cs, &connection, &conn, &cartan);
        let sample = GeometrySample {
            se: *se,
            metric: ms,
            cartan: cs,
            connection,
            curvature,
        };
        Ok(Pipeline {
            metric: mj,
            cartan,
            sample,
        })
    }
}

fn curvature(
    ms: &MetricSample,
    cs: &CartanSample,
    connection: &ConnectionSample,
    conn: &ConnectionJets,
    cartan: &JetT3,
) -> CurvatureSample {
    let f = ms.f;
    let u = &ms.u;
    let n = &connection.n;
    let gam = &connection.gamma;
    let g_inv = &ms.g_inv;

    // dgam[k][i][j][l] = δ_k Γ^i_{jl}
    let dgam: Tensor4 =
        from_fn(|k| from_fn(|i| from_fn(|j| from_fn(|l| delta_value(&conn.gamma[i][j][l], n, k)))));

    let r: Tensor4 = from_fn(|i| {
        from_fn(|j| {
            from_fn(|k| {
                from_fn(|l| {
                    let mut v = dgam[k][i][j][l] - dgam[l][i][j][k];
                    for m in 0..3 {
                        v += gam[i][m][k] * gam[m][j][l] - gam[i][m][l] * gam[m][j][k];
                    }
                    v
                })
            })
        })
    });
    let p: Tensor4 = from_fn(|i| {
        from_fn(|j| from_fn(|k| from_fn(|l| -f * conn.gamma[i][j][k].first_partial(3 + l))))
    });

    let a = &cs.a;
    let a_cov: Tensor4 = from_fn(|i| {
        from_fn(|j| {
            from_fn(|k| {
                from_fn(|l| {
                    let mut v = delta_value(&cartan[i][j][k], n, l);
                    for m in 0..3 {
                        v -= gam[m][i][l] * a[m][j][k]
                            + gam[m][j][l] * a[i][m][k]
                            + gam[m][k][l] * a[i][j][m];
                    }
                    v
                })
            })
        })
    });
    let a_dot: Tensor3 =
        from_fn(|i| from_fn(|j| from_fn(|k| (0..3).map(|l| a_cov[i][j][k][l] * u[l]).sum())));

    let a_mix = raise_first(g_inv, a);
    let a_dot_mix = raise_first(g_inv, &a_dot);
    // rvec[e][k][l] = u^j R_j^e_{kl}
    let rvec: Tensor3 =
        from_fn(|e| from_fn(|k| from_fn(|l| (0..3).map(|j| u[j] * r[e][j][k][l]).sum())));

    let rhat: Tensor4 = from_fn(|i| {
        from_fn(|j| {
            from_fn(|k| {
                from_fn(|l| {
                    r[i][j][k][l] + (0..3).map(|m| a_mix[i][j][m] * rvec[m][k][l]).sum::<f64>()
                })
            })
        })
    });
    let phat: Tensor4 = from_fn(|i| {
        from_fn(|j| {
            from_fn(|k| {
                from_fn(|l| {
                    let mut v = p[i][j][k][l];
                    for m in 0..3 {
                        v += g_inv[i][m] * a_cov[m][j][l][k] - a_mix[i][j][m] * a_dot_mix[m][k][l];
                    }
                    v
                })
            })
        })
    });
    let qhat: Tensor4 = from_fn(|i| {
        from_fn(|j| {
            from_fn(|k| {
                from_fn(|l| {
                    (0..3)
                        .map(|m| a_mix[i][m][k] * a_mix[m][l][j] - a_mix[i][m][l] * a_mix[m][k][j])
                        .sum()
                })
            })
        })
    });

    CurvatureSample {
        r,
        p,
        rhat,
        phat,
        qhat,
        a_cov,
        a_dot,
    }
}

/// Fundamental tensor `gᵢⱼ = ½ ∂²F²/∂yⁱ∂yʲ` and the unit supporting element.
pub fn fundamental_tensor<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<MetricSample> {
    Ok(MetricJets::new(metric, se, 2, 0)?.sample())
}

pub fn cartan_tensor<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<CartanSample> {
    let m = MetricJets::new(metric, se, 3, 0)?;
    let a = cartan_jets(&m);
    Ok(cartan_sample(&m, &a))
}

/// Metric data together with the spray, the minimum needed by the geodesic
/// and Fermat ray models.
pub fn spray<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<(MetricSample, Vec3)> {
    let m = MetricJets::new(metric, se, 2, 1)?;
    let g = m.spray();
    Ok((m.sample(), from_fn(|i| g[i].value())))
}

pub fn connection<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<ConnectionSample> {
    let m = MetricJets::new(metric, se, 3, 1)?;
    Ok(ConnectionJets::new(&m).sample())
}

pub fn chern_curvature<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<ChernCurvature> {
    let c = geometry(metric, se)?.curvature;
    Ok(ChernCurvature { r: c.r, p: c.p })
}

pub fn cartan_curvature<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<CurvatureSample> {
    Ok(geometry(metric, se)?.curvature)
}

/// All tensors at once from one order-4 jet of `F`.
pub fn geometry<M: ScalarField + ?Sized>(metric: &M, se: &SupportElement) -> Result<GeometrySample> {
    Ok(Pipeline::new(metric, se)?.sample)
}

/// Max-norm residuals of the structural identities at one supporting element.
#[derive(Clone, Debug, Default, Serialize)]
pub struct IdentityResiduals {
    /// `Aᵢⱼₖuᵏ`
    pub cartan_transversality: f64,
    /// Deviation of `A` from total symmetry.
    pub cartan_symmetry: f64,
    /// `Pⁱⱼₖₗuˡ`
    pub p_transversality: f64,
    /// `uʲPⱼᵢₖₗ + Ȧᵢₖₗ`
    pub p_equals_minus_a_dot: f64,
    /// `Γⁱⱼₖ − Γⁱₖⱼ`
    pub gamma_symmetry: f64,
    /// `Nⁱⱼ − Γⁱⱼₖyᵏ`
    pub n_from_gamma: f64,
    /// `Gⁱ − Nⁱⱼyʲ`
    pub spray_from_n: f64,
    /// `δF/δxⁱ`
    pub horizontal_f: f64,
    /// `δuⁱ/δxʲ + Γⁱₖⱼuᵏ`
    pub unit_transport: f64,
    /// Relative `|gᵢⱼyⁱyʲ − F²| / F²`
    pub euler: f64,
    /// `g⁻¹g − I`
    pub inverse: f64,
    /// `Rⱼⁱₖₗ + Rⱼⁱₗₖ`
    pub r_antisymmetry: f64,
    /// `A_{ijk‖l} − A_{ijl‖k} − (A_{ijk}u_l − A_{ijl}u_k)` with `‖` the
    /// vertical derivative `F ∂/∂yˡ`.
    pub vertical_bianchi: f64,
}

impl IdentityResiduals {
    /// `(field name, residual)` pairs, in declaration order.
    pub fn named(&self) -> [(&'static str, f64); 13] {
        [
            ("cartan_transversality", self.cartan_transversality),
            ("cartan_symmetry", self.cartan_symmetry),
            ("p_transversality", self.p_transversality),
            ("p_equals_minus_a_dot", self.p_equals_minus_a_dot),
            ("gamma_symmetry", self.gamma_symmetry),
            ("n_from_gamma", self.n_from_gamma),
            ("spray_from_n", self.spray_from_n),
            ("horizontal_f", self.horizontal_f),
            ("unit_transport", self.unit_transport),
            ("euler", self.euler),
            ("inverse", self.inverse),
            ("r_antisymmetry", self.r_antisymmetry),
            ("vertical_bianchi", self.vertical_bianchi),
        ]
    }

    pub fn max_with(&mut self, o: &IdentityResiduals) {
        macro_rules! m {
            ($($f:ident),*) => { $( self.$f = self.$f.max(o.$f); )* };
        }
        m!(
            cartan_transversality,
            cartan_symmetry,
            p_transversality,
            p_equals_minus_a_dot,
            gamma_symmetry,
            n_from_gamma,
            spray_from_n,
            horizontal_f,
            unit_transport,
            euler,
            inverse,
            r_antisymmetry,
            vertical_bianchi
        );
    }
}

/// Geometry plus the residual of every structural identity.
pub fn geometry_with_residuals<M: ScalarField + ?Sized>(
    metric: &M,
    se: &SupportElement,
) -> Result<(GeometrySample, IdentityResiduals)> {
    let pl = Pipeline::new(metric, se)?;
    let s = &pl.sample;
    let (ms, cs, cn, cv) = (&s.metric, &s.cartan, &s.connection, &s.curvature);
    let u = &ms.u;
    let y = &se.y;
    let f = ms.f;
    let mut r = IdentityResiduals::default();

    for i in 0..3 {
        for j in 0..3 {
            let au: f64 = (0..3).map(|k| cs.a[i][j][k] * u[k]).sum();
            r.cartan_transversality = r.cartan_transversality.max(au.abs());
            for k in 0..3 {
                let a = cs.a[i][j][k];
                let d = (a - cs.a[j][i][k]).abs().max((a - cs.a[i][k][j]).abs());
                r.cartan_symmetry = r.cartan_symmetry.max(d);
                let gs = cn.gamma[i][j][k] - cn.gamma[i][k][j];
                r.gamma_symmetry = r.gamma_symmetry.max(gs.abs());
                let pu: f64 = (0..3).map(|l| cv.p[i][j][k][l] * u[l]).sum();
                r.p_transversality = r.p_transversality.max(pu.abs());
                for l in 0..3 {
                    let anti = cv.r[i][j][k][l] + cv.r[i][j][l][k];
                    r.r_antisymmetry = r.r_antisymmetry.max(anti.abs());
                }
            }
            let ng: f64 = cn.n[i][j] - (0..3).map(|k| cn.gamma[i][j][k] * y[k]).sum::<f64>();
            r.n_from_gamma = r.n_from_gamma.max(ng.abs());
            let id = (0..3).map(|k| ms.g_inv[i][k] * ms.g[k][j]).sum::<f64>()
                - if i == j { 1.0 } else { 0.0 };
            r.inverse = r.inverse.max(id.abs());
        }
        let gn = cn.spray[i] - (0..3).map(|j| cn.n[i][j] * y[j]).sum::<f64>();
        r.spray_from_n = r.spray_from_n.max(gn.abs());
        r.horizontal_f = r.horizontal_f.max(delta_value(&pl.metric.f, &cn.n, i).abs());
    }

    let p_low = lower_curvature(&ms.g, &cv.p);
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let up: f64 = (0..3).map(|j| u[j] * p_low[j][i][k][l]).sum();
                r.p_equals_minus_a_dot = r.p_equals_minus_a_dot.max((up + cv.a_dot[i][k][l]).abs());
            }
        }
    }

    // u^i = y^i / F as jets; δu^i/δx^j + Γ^i_{kj} u^k
    let f_inv = crate::jets::Scalar::try_recip(&pl.metric.f)?;
    let u_jet: [Jet; 3] = from_fn(|i| &pl.metric.y[i] * &f_inv);
    for i in 0..3 {
        for j in 0..3 {
            let t = delta_value(&u_jet[i], &cn.n, j)
                + (0..3).map(|k| cn.gamma[i][k][j] * u[k]).sum::<f64>();
            r.unit_transport = r.unit_transport.max(t.abs());
        }
    }

    let gyy = quad(&ms.g, y, y);
    r.euler = ((gyy - f * f) / (f * f)).abs();

    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let vk = f * pl.cartan[i][j][k].first_partial(3 + l);
                    let vl = f * pl.cartan[i][j][l].first_partial(3 + k);
                    let rhs = cs.a[i][j][k] * ms.u_flat[l] - cs.a[i][j][l] * ms.u_flat[k];
                    r.vertical_bianchi = r.vertical_bianchi.max((vk - vl - rhs).abs());
                }
            }
        }
    }
    Ok((pl.sample, r))
}
