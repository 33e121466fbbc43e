//! Optical media described as Finsler metrics.
//!
//! A [`MediumSpec`] is the declarative (serde) form; [`build_metric`] turns
//! it into a [`Metric`], which is a [`ScalarField`] evaluable on jets. Every
//! scalar in a spec may be a number or an expression in `x1, x2, x3`.
//!
//! Symmetric tensors are given by their six upper-triangle components in the
//! order `[11, 12, 13, 22, 23, 33]`.

pub mod catalog;
pub mod convexity;
pub mod expr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::jets::{Scalar, ScalarField, NVARS};
pub use expr::{parse_field, Expr};

/// A scalar field of position, written as a number or an expression string.
#[derive(Clone, Debug, PartialEq)]
pub struct Field(pub Expr);

impl Field {
    pub fn constant(v: f64) -> Self {
        Field(Expr::Num(v))
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_field(text).map(Field)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::constant(v)
    }
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Expr::Num(v) if v.is_finite() => s.serialize_f64(v),
            _ => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Field {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Field::constant(v)),
            Raw::Text(t) => Field::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "+", alias = "plus")]
    Plus,
    #[serde(rename = "-", alias = "minus")]
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniaxialRay {
    /// `F_o = √a(y,y)`
    Ordinary,
    /// `F_e = a(y,y)/√b(y,y)`
    #[default]
    Extraordinary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumSpec {
    Euclidean {},
    /// `F = n(x)|y|`
    Conformal { index: Field },
    /// `F = √(gᵢⱼ(x) yⁱyʲ)`
    Riemannian { g: [Field; 6] },
    Uniaxial {
        a: [Field; 6],
        b: [Field; 6],
        #[serde(default)]
        ray: UniaxialRay,
    },
    /// `F^± = a(y,y)/√b^±(y,y)`
    Biaxial {
        a: [Field; 6],
        b_plus: [Field; 6],
        b_minus: [Field; 6],
        branch: Branch,
    },
    /// Fresnel-derived metric of a crystal with principal velocities
    /// `v1 ≥ v2 ≥ v3` and optic axes `e′`, `e″`.
    Crystal {
        v1: Field,
        v2: Field,
        v3: Field,
        e_prime: [Field; 3],
        e_double_prime: [Field; 3],
        branch: Branch,
    },
}

impl MediumSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MediumSpec::Euclidean {} => "euclidean",
            MediumSpec::Conformal { .. } => "conformal",
            MediumSpec::Riemannian { .. } => "riemannian",
            MediumSpec::Uniaxial { .. } => "uniaxial",
            MediumSpec::Biaxial { .. } => "biaxial",
            MediumSpec::Crystal { .. } => "crystal",
        }
    }
}

/// Symmetric 3×3 field from its upper-triangle components.
#[derive(Clone, Debug)]
pub struct SymField([Expr; 6]);

impl SymField {
    fn new(f: &[Field; 6]) -> Self {
        SymField(std::array::from_fn(|i| f[i].0.clone()))
    }

    pub fn identity() -> Self {
        let one = || Field::constant(1.0);
        let zero = || Field::constant(0.0);
        SymField::new(&[one(), zero(), zero(), one(), zero(), one()])
    }

    fn slot(i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        [[0, 1, 2], [1, 3, 4], [2, 4, 5]][i][j]
    }

    /// Components at a position.
    pub fn at<S: Scalar>(&self, x: &[S; 3]) -> Result<[S; 6]> {
        let mut out: [Option<S>; 6] = Default::default();
        for (k, e) in self.0.iter().enumerate() {
            out[k] = Some(e.eval(x)?);
        }
        Ok(out.map(|v| v.expect("filled")))
    }

    /// `q(y, y) = qᵢⱼ yⁱ yʲ`
    pub fn quadratic<S: Scalar>(comp: &[S; 6], y: &[S; 3]) -> S {
        let mut acc = S::from_f64(0.0);
        for i in 0..3 {
            for j in i..3 {
                let c = comp[Self::slot(i, j)].clone() * y[i].clone() * y[j].clone();
                acc = if i == j { acc + c } else { acc + c * 2.0 };
            }
        }
        acc
    }

    /// Plain matrix at a position.
    pub fn matrix(&self, x: &[f64; 3]) -> Result<[[f64; 3]; 3]> {
        let c = self.at(x)?;
        Ok(std::array::from_fn(|i| std::array::from_fn(|j| c[Self::slot(i, j)])))
    }
}

/// A Finsler function `F(x, y)` built from a [`MediumSpec`].
#[derive(Clone, Debug)]
pub enum Metric {
    Euclidean,
    Conformal {
        index: Expr,
    },
    Riemannian {
        g: SymField,
    },
    /// `a(y,y)/√b(y,y)`: extraordinary uniaxial and biaxial metrics.
    Quotient {
        a: SymField,
        b: SymField,
    },
    Crystal {
        v1: Expr,
        v3: Expr,
        e_prime: [Expr; 3],
        e_double_prime: [Expr; 3],
        branch: Branch,
    },
}

fn position<S: Scalar>(z: &[S; NVARS]) -> [S; 3] {
    [z[0].clone(), z[1].clone(), z[2].clone()]
}

fn direction<S: Scalar>(z: &[S; NVARS]) -> [S; 3] {
    [z[3].clone(), z[4].clone(), z[5].clone()]
}

fn dot<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

fn eval3<S: Scalar>(e: &[Expr; 3], x: &[S; 3]) -> Result<[S; 3]> {
    Ok([e[0].eval(x)?, e[1].eval(x)?, e[2].eval(x)?])
}

/// Euclidean unit vector field.
fn unit<S: Scalar>(v: [S; 3]) -> Result<[S; 3]> {
    let inv = dot(&v, &v).try_sqrt()?.try_recip()?;
    Ok(v.map(|c| c * inv.clone()))
}

/// `|e × y|²`, computed as `|e|²|y|² − ⟨e,y⟩²`.
fn cross_norm_sq<S: Scalar>(e: &[S; 3], ey: &S, yy: &S) -> S {
    dot(e, e) * yy.clone() - ey.square()
}

impl ScalarField for Metric {
    fn eval<S: Scalar>(&self, z: &[S; NVARS]) -> Result<S> {
        let x = position(z);
        let y = direction(z);
        let yy = dot(&y, &y);
        match self {
            Metric::Euclidean => yy.try_sqrt(),
            Metric::Conformal { index } => {
                let n = index.eval(&x)?;
                if !(n.value() > 0.0) {
                    return Err(domain(format!("refractive index must be positive, got {}", n.value())));
                }
                Ok(n * yy.try_sqrt()?)
            }
            Metric::Riemannian { g } => SymField::quadratic(&g.at(&x)?, &y).try_sqrt(),
            Metric::Quotient { a, b } => {
                let ayy = SymField::quadratic(&a.at(&x)?, &y);
                let byy = SymField::quadratic(&b.at(&x)?, &y);
                ayy.try_div(&byy.try_sqrt()?)
            }
            Metric::Crystal {
                v1,
                v3,
                e_prime,
                e_double_prime,
                branch,
            } => {
                let v1 = v1.eval(&x)?;
                let v3 = v3.eval(&x)?;
                if !(v1.value() > 0.0 && v3.value() > 0.0) {
                    return Err(domain("principal velocities must be positive"));
                }
                let (v1s, v3s) = (v1.square(), v3.square());
                let big_a = (v1s.clone() + v3s.clone()) * 0.5;
                let big_b = (v1s - v3s) * 0.5;
                let e1 = unit(eval3(e_prime, &x)?)?;
                let e2 = unit(eval3(e_double_prime, &x)?)?;
                let e1y = dot(&e1, &y);
                let e2y = dot(&e2, &y);
                let c1 = cross_norm_sq(&e1, &e1y, &yy);
                let c2 = cross_norm_sq(&e2, &e2y, &yy);
                let cross = (c1 * c2).try_sqrt()?;
                let mixed = match branch {
                    Branch::Plus => e1y * e2y - cross,
                    Branch::Minus => e1y * e2y + cross,
                };
                let bracket = big_a * yy.clone() + big_b * mixed;
                if !(bracket.value() > 0.0) {
                    return Err(domain(format!(
                        "crystal velocity bracket is non-positive ({})",
                        bracket.value()
                    )));
                }
                yy.try_div(&bracket.try_sqrt()?)
            }
        }
    }
}

impl Metric {
    /// Euclidean angle between `y` and the nearest (unoriented) optic axis at
    /// `x`, for crystal media; `None` otherwise.
    pub fn optic_axis_angle(&self, x: &[f64; 3], y: &[f64; 3]) -> Option<f64> {
        let Metric::Crystal {
            e_prime,
            e_double_prime,
            ..
        } = self
        else {
            return None;
        };
        let ny = dot(y, y).sqrt();
        let mut best = f64::INFINITY;
        for axis in [e_prime, e_double_prime] {
            let e = eval3(axis, x).ok()?;
            let ne = dot(&e, &e).sqrt();
            let c = (dot(&e, y) / (ne * ny)).abs().min(1.0);
            best = best.min(c.acos());
        }
        Some(best)
    }
}

fn require_positive(name: &str, f: &Field) -> Result<()> {
    if let Some(v) = f.0.as_constant() {
        if !(v > 0.0) {
            return Err(Error::Spec(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

fn require_nonzero_axis(name: &str, e: &[Field; 3]) -> Result<()> {
    let c: Vec<Option<f64>> = e.iter().map(|f| f.0.as_constant()).collect();
    if c.iter().all(|v| v.is_some()) {
        let n: f64 = c.iter().map(|v| v.unwrap().powi(2)).sum::<f64>().sqrt();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::Spec(format!("{name} must be a nonzero vector")));
        }
    }
    Ok(())
}

/// Turn a declarative spec into an evaluable Finsler function.
///
/// Constant parameters are validated here; position-dependent ones are
/// checked at evaluation time and surface as domain errors.
pub fn build_metric(spec: &MediumSpec) -> Result<Metric> {
    Ok(match spec {
        MediumSpec::Euclidean {} => Metric::Euclidean,
        MediumSpec::Conformal { index } => {
            require_positive("refractive index", index)?;
            Metric::Conformal {
                index: index.0.clone(),
            }
        }
        MediumSpec::Riemannian { g } => Metric::Riemannian { g: SymField::new(g) },
        MediumSpec::Uniaxial { a, b, ray } => match ray {
            UniaxialRay::Ordinary => Metric::Riemannian { g: SymField::new(a) },
            UniaxialRay::Extraordinary => Metric::Quotient {
                a: SymField::new(a),
                b: SymField::new(b),
            },
        },
        MediumSpec::Biaxial {
            a,
            b_plus,
            b_minus,
            branch,
        } => Metric::Quotient {
            a: SymField::new(a),
            b: SymField::new(match branch {
                Branch::Plus => b_plus,
                Branch::Minus => b_minus,
            }),
        },
        MediumSpec::Crystal {
            v1,
            v2,
            v3,
            e_prime,
            e_double_prime,
            branch,
        } => {
            require_positive("v1", v1)?;
            require_positive("v2", v2)?;
            require_positive("v3", v3)?;
            require_nonzero_axis("e_prime", e_prime)?;
            require_nonzero_axis("e_double_prime", e_double_prime)?;
            Metric::Crystal {
                v1: v1.0.clone(),
                v3: v3.0.clone(),
                e_prime: std::array::from_fn(|i| e_prime[i].0.clone()),
                e_double_prime: std::array::from_fn(|i| e_double_prime[i].0.clone()),
                branch: *branch,
            }
        }
    })
}
