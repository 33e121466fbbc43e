//! Truncated multivariate Taylor arithmetic over the six phase-space
//! variables `(x¹, x², x³, y¹, y², y³)`.
//!
//! A [`Jet`] stores Taylor coefficients `c_α = ∂^α f / α!` for every
//! multi-index `α` with total degree at most [`MAX_ORDER`] and degree at most
//! [`MAX_X_ORDER`] in the position block. Each jet additionally carries its
//! own truncation limits `(order, x_order)`: arithmetic takes the minimum of
//! the operands' limits, and differentiation lowers them, so every stored
//! coefficient is exact up to floating-point rounding.
//!
//! Fields are written once against the [`Scalar`] trait and evaluated either
//! on plain `f64` or on jets.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};

pub const NVARS: usize = 6;
pub const MAX_ORDER: u8 = 4;
pub const MAX_X_ORDER: u8 = 2;
/// Number of monomials with total degree ≤ 4 and x-degree ≤ 2 in six variables.
pub const JET_LEN: usize = 155;

/// Exponents of a mixed partial derivative, ordered `x¹ x² x³ y¹ y² y³`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex([u8; NVARS]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; NVARS]);

    pub fn new(exponents: [u8; NVARS]) -> Result<Self> {
        let idx = MultiIndex(exponents);
        if idx.degree() > MAX_ORDER || idx.x_degree() > MAX_X_ORDER {
            return Err(Error::Index {
                index: idx.to_string(),
                order: MAX_ORDER,
                x_order: MAX_X_ORDER,
            });
        }
        Ok(idx)
    }

    /// Multi-index of the mixed partial `∂/∂z^{v₁} ∂/∂z^{v₂} …`, where
    /// variables 0..3 are positions and 3..6 are fiber coordinates.
    pub fn from_vars(vars: &[usize]) -> Result<Self> {
        let mut e = [0u8; NVARS];
        for &v in vars {
            assert!(v < NVARS, "variable index {v} out of range");
            e[v] = e[v].saturating_add(1);
        }
        Self::new(e)
    }

    pub fn exponents(&self) -> [u8; NVARS] {
        self.0
    }

    pub fn degree(&self) -> u8 {
        self.0.iter().sum()
    }

    pub fn x_degree(&self) -> u8 {
        self.0[..3].iter().sum()
    }

    /// `α! = Π αᵢ!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u32).product::<u32>() as f64)
            .product()
    }

    fn key(&self) -> usize {
        self.0
            .iter()
            .rev()
            .fold(0usize, |acc, &e| acc * 5 + e as usize)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; NVARS] = ["x1", "x2", "x3", "y1", "y2", "y3"];
        let mut wrote = false;
        for (name, &e) in NAMES.iter().zip(self.0.iter()) {
            if e == 0 {
                continue;
            }
            if wrote {
                write!(f, " ")?;
            }
            if e == 1 {
                write!(f, "d{name}")?;
            } else {
                write!(f, "d{name}^{e}")?;
            }
            wrote = true;
        }
        if !wrote {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// Precomputed monomial tables shared by every jet.
struct Basis {
    monomials: Vec<MultiIndex>,
    degree: Vec<u8>,
    x_degree: Vec<u8>,
    lookup: Vec<u16>,
    /// Per limit pair: monomials inside the limits.
    active: Vec<Vec<u16>>,
    /// Per limit pair: `(a, b, a+b)` products landing inside the limits.
    products: Vec<Vec<(u16, u16, u16)>>,
    /// Per variable: `(target, source, factor)` with `source = target + e_v`.
    derivative: Vec<Vec<(u16, u16, f64)>>,
}

const NONE: u16 = u16::MAX;

fn limit_slot(order: u8, x_order: u8) -> usize {
    order as usize * (MAX_X_ORDER as usize + 1) + x_order as usize
}

fn basis() -> &'static Basis {
    static BASIS: OnceLock<Basis> = OnceLock::new();
    BASIS.get_or_init(build_basis)
}

fn build_basis() -> Basis {
    let mut monomials = Vec::new();
    let mut e = [0u8; NVARS];
    fn rec(pos: usize, left: u8, e: &mut [u8; NVARS], out: &mut Vec<MultiIndex>) {
        if pos == NVARS {
            let m = MultiIndex(*e);
            if m.x_degree() <= MAX_X_ORDER {
                out.push(m);
            }
            return;
        }
        for k in 0..=left {
            e[pos] = k;
            rec(pos + 1, left - k, e, out);
        }
        e[pos] = 0;
    }
    rec(0, MAX_ORDER, &mut e, &mut monomials);
    monomials.sort_by_key(|m| (m.degree(), std::cmp::Reverse(m.0)));
    assert_eq!(monomials.len(), JET_LEN);

    let degree: Vec<u8> = monomials.iter().map(|m| m.degree()).collect();
    let x_degree: Vec<u8> = monomials.iter().map(|m| m.x_degree()).collect();
    let mut lookup = vec![NONE; 5usize.pow(NVARS as u32)];
    for (i, m) in monomials.iter().enumerate() {
        lookup[m.key()] = i as u16;
    }

    let slots = limit_slot(MAX_ORDER, MAX_X_ORDER) + 1;
    let mut active = vec![Vec::new(); slots];
    let mut products = vec![Vec::new(); slots];
    let mut all_products = Vec::new();
    for (a, ma) in monomials.iter().enumerate() {
        for (b, mb) in monomials.iter().enumerate() {
            let mut s = [0u8; NVARS];
            for v in 0..NVARS {
                s[v] = ma.0[v] + mb.0[v];
            }
            let sm = MultiIndex(s);
            if sm.degree() > MAX_ORDER || sm.x_degree() > MAX_X_ORDER {
                continue;
            }
            let out = lookup[sm.key()];
            all_products.push((a as u16, b as u16, out));
        }
    }
    all_products.sort_by_key(|&(_, _, out)| out);
    for k in 0..=MAX_ORDER {
        for kx in 0..=MAX_X_ORDER.min(k) {
            let slot = limit_slot(k, kx);
            active[slot] = (0..JET_LEN as u16)
                .filter(|&i| degree[i as usize] <= k && x_degree[i as usize] <= kx)
                .collect();
            products[slot] = all_products
                .iter()
                .copied()
                .filter(|&(_, _, o)| degree[o as usize] <= k && x_degree[o as usize] <= kx)
                .collect();
        }
    }

    let mut derivative = vec![Vec::new(); NVARS];
    for v in 0..NVARS {
        for (t, mt) in monomials.iter().enumerate() {
            let mut s = mt.0;
            s[v] += 1;
            let sm = MultiIndex(s);
            if sm.degree() > MAX_ORDER || sm.x_degree() > MAX_X_ORDER {
                continue;
            }
            let src = lookup[sm.key()];
            derivative[v].push((t as u16, src, s[v] as f64));
        }
    }

    Basis {
        monomials,
        degree,
        x_degree,
        lookup,
        active,
        products,
        derivative,
    }
}

/// Truncated Taylor expansion of a scalar at a point of the 6-dimensional
/// `(x, y)` domain.
#[derive(Clone)]
pub struct Jet {
    order: u8,
    x_order: u8,
    c: Box<[f64; JET_LEN]>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = basis();
        let mut m = f.debug_map();
        for &i in &b.active[limit_slot(self.order, self.x_order)] {
            let v = self.c[i as usize];
            if v != 0.0 {
                m.entry(&b.monomials[i as usize].to_string(), &v);
            }
        }
        m.finish()
    }
}

impl Jet {
    fn zeros(order: u8, x_order: u8) -> Self {
        debug_assert!(order <= MAX_ORDER && x_order <= order.min(MAX_X_ORDER));
        Jet {
            order,
            x_order,
            c: Box::new([0.0; JET_LEN]),
        }
    }

    /// A constant is exact at every order.
    pub fn constant(value: f64) -> Self {
        let mut j = Self::zeros(MAX_ORDER, MAX_X_ORDER);
        j.c[0] = value;
        j
    }

    /// The coordinate function `z^var` expanded around `value`.
    pub fn variable(var: usize, value: f64, order: u8) -> Self {
        Self::variable_with_limits(var, value, order, order)
    }

    /// Like [`Jet::variable`] with an explicit cap on the position order.
    pub fn variable_with_limits(var: usize, value: f64, order: u8, x_order: u8) -> Self {
        assert!(var < NVARS);
        let order = order.min(MAX_ORDER);
        let mut j = Self::zeros(order, x_order.min(order).min(MAX_X_ORDER));
        j.c[0] = value;
        if order > 0 && (var >= 3 || j.x_order > 0) {
            let mut e = [0u8; NVARS];
            e[var] = 1;
            j.c[basis().lookup[MultiIndex(e).key()] as usize] = 1.0;
        }
        j
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn x_order(&self) -> u8 {
        self.x_order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn contains(&self, idx: &MultiIndex) -> bool {
        idx.degree() <= self.order && idx.x_degree() <= self.x_order
    }

    /// Taylor coefficient `∂^α f / α!`.
    pub fn coefficient(&self, idx: &MultiIndex) -> Result<f64> {
        if !self.contains(idx) {
            return Err(Error::Index {
                index: idx.to_string(),
                order: self.order,
                x_order: self.x_order,
            });
        }
        Ok(self.c[basis().lookup[idx.key()] as usize])
    }

    /// First partial derivative `∂f/∂z^var` at the expansion point.
    ///
    /// Panics when the jet carries no first-order data in that direction.
    pub fn first_partial(&self, var: usize) -> f64 {
        assert!(
            self.order > 0 && (var >= 3 || self.x_order > 0),
            "jet of order ({}, {}) has no first partial in variable {var}",
            self.order,
            self.x_order
        );
        let mut e = [0u8; NVARS];
        e[var] = 1;
        self.c[basis().lookup[MultiIndex(e).key()] as usize]
    }

    /// Iterate over `(multi-index, coefficient)` pairs inside the limits.
    pub fn coefficients(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        let b = basis();
        b.active[limit_slot(self.order, self.x_order)]
            .iter()
            .map(move |&i| (b.monomials[i as usize], self.c[i as usize]))
    }

    /// Exact derivative with respect to variable `var`; lowers the limits.
    ///
    /// Panics when the jet carries no derivative information in that
    /// direction, which is a bookkeeping bug in the caller.
    pub fn derivative(&self, var: usize) -> Jet {
        let is_x = var < 3;
        assert!(
            self.order > 0 && (!is_x || self.x_order > 0),
            "jet of order ({}, {}) cannot be differentiated in variable {var}",
            self.order,
            self.x_order
        );
        let order = self.order - 1;
        let x_order = if is_x {
            self.x_order - 1
        } else {
            self.x_order.min(order)
        };
        let b = basis();
        let mut out = Jet::zeros(order, x_order);
        for &(t, src, factor) in &b.derivative[var] {
            let t = t as usize;
            if b.degree[t] <= order && b.x_degree[t] <= x_order {
                out.c[t] = self.c[src as usize] * factor;
            }
        }
        out
    }

    /// Drop every coefficient beyond the given limits.
    pub fn truncate(&self, order: u8, x_order: u8) -> Jet {
        let order = order.min(self.order);
        let x_order = x_order.min(self.x_order).min(order);
        let mut out = Jet::zeros(order, x_order);
        for &i in &basis().active[limit_slot(order, x_order)] {
            out.c[i as usize] = self.c[i as usize];
        }
        out
    }

    fn binary(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let x_order = self.x_order.min(other.x_order);
        let mut out = Jet::zeros(order, x_order);
        for &i in &basis().active[limit_slot(order, x_order)] {
            let i = i as usize;
            out.c[i] = f(self.c[i], other.c[i]);
        }
        out
    }

    fn scaled(&self, s: f64) -> Jet {
        let mut out = Jet::zeros(self.order, self.x_order);
        for &i in &basis().active[limit_slot(self.order, self.x_order)] {
            out.c[i as usize] = self.c[i as usize] * s;
        }
        out
    }

    fn product(&self, other: &Jet) -> Jet {
        let order = self.order.min(other.order);
        let x_order = self.x_order.min(other.x_order);
        let mut out = Jet::zeros(order, x_order);
        for &(a, b, o) in &basis().products[limit_slot(order, x_order)] {
            out.c[o as usize] += self.c[a as usize] * other.c[b as usize];
        }
        out
    }

    /// `Σ tₙ (f − f₀)ⁿ` for the Taylor coefficients `tₙ` of a univariate
    /// function at `f₀ = self.value()`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Jet::zeros(self.order, self.x_order);
        if h.c.iter().all(|v| *v == 0.0) {
            // a constant argument: skip the series so that infinite Taylor
            // coefficients cannot leak NaN into the value
            r.c[0] = taylor[0];
            return r;
        }
        let n = taylor.len() - 1;
        r.c[0] = taylor[n];
        for k in (0..n).rev() {
            r = r.product(&h);
            r.c[0] += taylor[k];
        }
        // the argument's increment has no constant term, so the value is exact
        r.c[0] = taylor[0];
        r
    }

    fn taylor_len(&self) -> usize {
        self.order as usize + 1
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.binary(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.binary(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scaled(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        (&self).neg()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scaled(rhs)
    }
}

/// Numbers the geometry pipeline can be written against: plain reals and jets.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_f64(value: f64) -> Self;
    fn value(&self) -> f64;
    fn try_recip(&self) -> Result<Self>;
    fn try_div(&self, rhs: &Self) -> Result<Self>;
    fn try_sqrt(&self) -> Result<Self>;
    fn try_ln(&self) -> Result<Self>;
    /// Real power; the base must be positive.
    fn try_powf(&self, exponent: f64) -> Result<Self>;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;

    /// Integer power by repeated multiplication; negative exponents divide.
    fn try_powi(&self, n: i32) -> Result<Self> {
        let mut acc = Self::from_f64(1.0);
        for _ in 0..n.unsigned_abs() {
            acc = acc * self.clone();
        }
        if n < 0 {
            acc.try_recip()
        } else {
            Ok(acc)
        }
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

fn check_nonzero(v: f64, what: &str) -> Result<()> {
    if v == 0.0 || !v.is_finite() {
        return Err(domain(format!("{what}: division by {v}")));
    }
    Ok(())
}

impl Scalar for f64 {
    fn from_f64(value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn try_recip(&self) -> Result<Self> {
        check_nonzero(*self, "reciprocal")?;
        Ok(1.0 / self)
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        check_nonzero(*rhs, "quotient")?;
        Ok(self / rhs)
    }
    fn try_sqrt(&self) -> Result<Self> {
        if !(*self >= 0.0) {
            return Err(domain(format!("sqrt of {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn try_ln(&self) -> Result<Self> {
        if !(*self > 0.0) {
            return Err(domain(format!("log of {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn try_powf(&self, exponent: f64) -> Result<Self> {
        if !(*self > 0.0) {
            return Err(domain(format!("real power of non-positive base {self}")));
        }
        Ok(f64::powf(*self, exponent))
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
}

impl Scalar for Jet {
    fn from_f64(value: f64) -> Self {
        Jet::constant(value)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn try_recip(&self) -> Result<Self> {
        let a = self.c[0];
        check_nonzero(a, "reciprocal")?;
        let inv = 1.0 / a;
        let mut t = Vec::with_capacity(self.taylor_len());
        let mut p = inv;
        for _ in 0..self.taylor_len() {
            t.push(p);
            p *= -inv;
        }
        Ok(self.compose(&t))
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        let mut q = self * &rhs.try_recip()?;
        q.c[0] = self.c[0] / rhs.c[0];
        Ok(q)
    }
    fn try_sqrt(&self) -> Result<Self> {
        let a = self.c[0];
        if !(a > 0.0) && !(a == 0.0 && self.order == 0) {
            return Err(domain(format!("sqrt of {a}")));
        }
        if self.order == 0 {
            return Ok(self.compose(&[a.sqrt()]));
        }
        let mut t = power_series(a, 0.5, self.taylor_len());
        t[0] = a.sqrt();
        Ok(self.compose(&t))
    }
    fn try_ln(&self) -> Result<Self> {
        let a = self.c[0];
        if !(a > 0.0) {
            return Err(domain(format!("log of {a}")));
        }
        let mut t = vec![a.ln()];
        let mut p = 1.0;
        for n in 1..self.taylor_len() {
            p /= a;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign * p / n as f64);
        }
        Ok(self.compose(&t))
    }
    fn try_powf(&self, exponent: f64) -> Result<Self> {
        let a = self.c[0];
        if !(a > 0.0) {
            return Err(domain(format!("real power of non-positive base {a}")));
        }
        Ok(self.compose(&power_series(a, exponent, self.taylor_len())))
    }
    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let mut t = Vec::with_capacity(self.taylor_len());
        let mut fact = 1.0;
        for n in 0..self.taylor_len() {
            if n > 0 {
                fact *= n as f64;
            }
            t.push(e / fact);
        }
        self.compose(&t)
    }
    fn sin(&self) -> Self {
        self.compose(&trig_series(self.c[0], 0, self.taylor_len()))
    }
    fn cos(&self) -> Self {
        self.compose(&trig_series(self.c[0], 1, self.taylor_len()))
    }
}

/// Taylor coefficients of `t ↦ t^p` at `a > 0`.
fn power_series(a: f64, p: f64, len: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(len);
    let mut binom = 1.0;
    for n in 0..len {
        if n > 0 {
            binom *= (p - (n as f64 - 1.0)) / n as f64;
        }
        t.push(binom * a.powf(p - n as f64));
    }
    t[0] = a.powf(p);
    t
}

/// Taylor coefficients of sin (`shift = 0`) or cos (`shift = 1`) at `a`.
fn trig_series(a: f64, shift: usize, len: usize) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    let cycle = [s, c, -s, -c];
    let mut fact = 1.0;
    (0..len)
        .map(|n| {
            if n > 0 {
                fact *= n as f64;
            }
            cycle[(n + shift) % 4] / fact
        })
        .collect()
}

/// A scalar function of the six phase-space variables, evaluable on any
/// [`Scalar`].
pub trait ScalarField: Send + Sync {
    fn eval<S: Scalar>(&self, z: &[S; NVARS]) -> Result<S>;

    fn eval_f64(&self, z: &[f64; NVARS]) -> Result<f64> {
        self.eval(z)
    }
}

/// Expand `field` around `point` to the requested total order (≤ 4; the
/// position block is capped at 2).
pub fn evaluate_jet<F: ScalarField + ?Sized>(
    field: &F,
    point: &[f64; NVARS],
    order: u8,
) -> Result<Jet> {
    evaluate_jet_limited(field, point, order, order)
}

/// Expand `field` with separate caps on the total and the position order.
pub fn evaluate_jet_limited<F: ScalarField + ?Sized>(
    field: &F,
    point: &[f64; NVARS],
    order: u8,
    x_order: u8,
) -> Result<Jet> {
    if order > MAX_ORDER {
        return Err(Error::Index {
            index: format!("order {order}"),
            order: MAX_ORDER,
            x_order: MAX_X_ORDER,
        });
    }
    let z: [Jet; NVARS] =
        std::array::from_fn(|v| Jet::variable_with_limits(v, point[v], order, x_order));
    field.eval(&z)
}

/// Raw partial derivative `∂^α f` (coefficient times `α!`).
pub fn partial(jet: &Jet, idx: &MultiIndex) -> Result<f64> {
    Ok(jet.coefficient(idx)? * idx.factorial())
}
