//! Full tensor dump at one supporting element, every number printed with
//! 17 significant digits.

use finsler_core::finsler::{geometry, SupportElement};
use finsler_core::media::Metric;
use finsler_core::spinoptics::{coupling_values, spin_tensor_at, SpinConstants};
use finsler_core::tensor::{Mat3, Tensor3, Tensor4, Vec3};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::CliResult;

/// A nested array of numbers in fixed 17-significant-digit notation.
#[derive(Serialize)]
#[serde(untagged)]
pub enum Num {
    Leaf(Box<RawValue>),
    List(Vec<Num>),
}

impl Num {
    pub fn scalar(v: f64) -> Num {
        // `{:.16e}` of a finite float is valid JSON number text
        let text = if v.is_finite() { format!("{v:.16e}") } else { "null".to_string() };
        Num::Leaf(RawValue::from_string(text).expect("formatted float is JSON"))
    }

    pub fn vec(v: &Vec3) -> Num {
        Num::List(v.iter().map(|x| Num::scalar(*x)).collect())
    }

    pub fn mat(m: &Mat3) -> Num {
        Num::List(m.iter().map(Num::vec).collect())
    }

    pub fn t3(t: &Tensor3) -> Num {
        Num::List(t.iter().map(Num::mat).collect())
    }

    pub fn t4(t: &Tensor4) -> Num {
        Num::List(t.iter().map(Num::t3).collect())
    }
}

#[derive(Serialize)]
pub struct SpinDump {
    pub p: Num,
    pub s: Num,
    /// `Sᵢⱼ = s·volᵢⱼₖuᵏ`
    #[serde(rename = "S")]
    pub s_lo: Num,
    #[serde(rename = "Delta")]
    pub delta: Num,
    #[serde(rename = "Sigma")]
    pub sigma: Num,
    /// Whether `(Δ, Σ)` is within the singular-locus tolerances.
    pub singular: bool,
}

/// Index layout: `A[i][j][k] = Aᵢⱼₖ`, `N[i][j] = Nⁱⱼ`, `Gamma[i][j][k] = Γⁱⱼₖ`,
/// and `T[i][j][k][l] = Tⱼⁱₖₗ` for the curvatures.
#[derive(Serialize)]
pub struct TensorDump {
    pub x: Num,
    pub y: Num,
    #[serde(rename = "F")]
    pub f: Num,
    pub u: Num,
    pub g: Num,
    #[serde(rename = "A")]
    pub a: Num,
    #[serde(rename = "G")]
    pub spray: Num,
    #[serde(rename = "N")]
    pub n: Num,
    #[serde(rename = "Gamma")]
    pub gamma: Num,
    #[serde(rename = "R")]
    pub r: Num,
    #[serde(rename = "P")]
    pub p: Num,
    #[serde(rename = "Rhat")]
    pub rhat: Num,
    #[serde(rename = "Phat")]
    pub phat: Num,
    #[serde(rename = "Qhat")]
    pub qhat: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinDump>,
}

/// Tensors at `(x, y)`; the spin block (evaluated at the unit direction
/// `u = y/F`) is included when constants are given.
pub fn dump(metric: &Metric, x: Vec3, y: Vec3, constants: Option<SpinConstants>) -> CliResult<TensorDump> {
    let g = geometry(metric, &SupportElement::new(x, y))?;
    let spin = match constants {
        None => None,
        Some(k) => {
            k.validate()?;
            let unit = geometry(metric, &SupportElement::new(x, g.metric.u))?;
            let st = spin_tensor_at(&unit, k.s);
            let c = coupling_values(&unit, &st, &k);
            let singular = finsler_core::spinoptics::check_regular(&c, &k).is_err();
            Some(SpinDump {
                p: Num::scalar(k.p),
                s: Num::scalar(k.s),
                s_lo: Num::mat(&st.s_lo),
                delta: Num::scalar(c.delta),
                sigma: Num::scalar(c.sigma),
                singular,
            })
        }
    };
    let cv = &g.curvature;
    Ok(TensorDump {
        x: Num::vec(&x),
        y: Num::vec(&y),
        f: Num::scalar(g.metric.f),
        u: Num::vec(&g.metric.u),
        g: Num::mat(&g.metric.g),
        a: Num::t3(&g.cartan.a),
        spray: Num::vec(&g.connection.spray),
        n: Num::mat(&g.connection.n),
        gamma: Num::t3(&g.connection.gamma),
        r: Num::t4(&cv.r),
        p: Num::t4(&cv.p),
        rhat: Num::t4(&cv.rhat),
        phat: Num::t4(&cv.phat),
        qhat: Num::t4(&cv.qhat),
        spin,
    })
}
