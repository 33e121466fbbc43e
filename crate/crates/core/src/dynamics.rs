//! Ray models and their numerical integration.
//!
//! Three right-hand sides act on states `(x, u)` of the indicatrix bundle
//! `F(x, u) = 1`:
//!
//! * geodesic: `ẋ = u`, `u̇ = −G(x, u)`;
//! * Fermat:   `ẋ = u`, `u̇ = (F²·gⁱʲ∂ⱼn − (u·∇n)uⁱ)/n − Gⁱ`, i.e.
//!   `∇ᵤ(n u) = grad n` with reference vector `u`;
//! * spin:     the characteristic foliation of
//!   [`spinoptics::foliation_generator`](crate::spinoptics::foliation_generator).
//!
//! Off the indicatrix every model is extended by homogeneity (`ẋ` of degree
//! one and `u̇` of degree two in `u`), which is what a parameter change does.
//! The parameter `t` of the spin model is the foliation parameter fixed by
//! `X³ = 1`, not arclength.
//!
//! [`integrate`] offers fixed-step RK4 and adaptive Dormand–Prince 5(4),
//! optional projection back onto the indicatrix, a domain box, and
//! detection of the singular locus `Δ = 0 ∪ Σ = 0` by bisection.

use std::array::from_fn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::{geometry, spray, SupportElement};
use crate::jets::{Jet, ScalarField};
use crate::media::Expr;
use crate::spinoptics::{check_regular, coupling_values, generator_from_couplings, spin_tensor_at, RayDerivative, SpinConstants};
use crate::tensor::*;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub t: f64,
    pub x: Vec3,
    pub u: Vec3,
}

/// A right-hand side of the ray equations.
pub trait RayRhs: Sync {
    /// The Finsler function `F(x, u)` defining the constraint.
    fn finsler(&self, x: &Vec3, u: &Vec3) -> Result<f64>;

    fn derivative(&self, x: &Vec3, u: &Vec3) -> Result<RayDerivative>;

    /// `(Δ, Σ)` at the state, for models that have them.
    fn singular_scalars(&self, _x: &Vec3, _u: &Vec3) -> Result<Option<(f64, f64)>> {
        Ok(None)
    }

    /// Thresholds below which `|Δ|`, `|Σ|` count as singular.
    fn singular_tolerances(&self) -> Option<(f64, f64)> {
        None
    }
}

fn finsler_value<M: ScalarField + ?Sized>(metric: &M, x: &Vec3, u: &Vec3) -> Result<f64> {
    metric.eval_f64(&[x[0], x[1], x[2], u[0], u[1], u[2]])
}

/// `ẋ = u`, `u̇ = −G(x, u)`.
pub fn geodesic_rhs<M: ScalarField + ?Sized>(metric: &M, state: &RayState) -> Result<RayDerivative> {
    let (_, g) = spray(metric, &SupportElement::new(state.x, state.u))?;
    Ok(RayDerivative {
        dx: state.u,
        du: scale(&g, -1.0),
    })
}

/// Value and gradient of a position-dependent index.
pub fn index_gradient(index: &Expr, x: &Vec3) -> Result<(f64, Vec3)> {
    let z: [Jet; 3] = from_fn(|i| Jet::variable(i, x[i], 1));
    let n = index.eval(&z)?;
    Ok((n.value(), from_fn(|i| n.first_partial(i))))
}

/// Fermat's principle in the medium with base metric `F` and index `n`.
pub fn fermat_rhs<M: ScalarField + ?Sized>(base: &M, index: &Expr, state: &RayState) -> Result<RayDerivative> {
    let (n, grad) = index_gradient(index, &state.x)?;
    if !(n > 0.0) {
        return Err(Error::Domain(format!("refractive index {n} is not positive at {:?}", state.x)));
    }
    let u = &state.u;
    let (m, g) = spray(base, &SupportElement::new(state.x, *u))?;
    let raised = mat_vec(&m.g_inv, &grad);
    let along = dot(u, &grad);
    let f2 = m.f * m.f;
    Ok(RayDerivative {
        dx: *u,
        du: from_fn(|i| (f2 * raised[i] - along * u[i]) / n - g[i]),
    })
}

/// Spinning-light generator, extended off the indicatrix by homogeneity.
pub fn spin_rhs<M: ScalarField + ?Sized>(metric: &M, k: &SpinConstants, state: &RayState) -> Result<RayDerivative> {
    let f = finsler_value(metric, &state.x, &state.u)?;
    let unit = scale(&state.u, 1.0 / f);
    let geom = geometry(metric, &SupportElement::new(state.x, unit))?;
    let spin = spin_tensor_at(&geom, k.s);
    let c = coupling_values(&geom, &spin, k);
    check_regular(&c, k)?;
    let d = generator_from_couplings(&geom, &spin, &c, k);
    Ok(RayDerivative {
        dx: scale(&d.dx, f),
        du: scale(&d.du, f * f),
    })
}

pub struct Geodesic<'a, M: ?Sized>(pub &'a M);

pub struct Fermat<'a, M: ?Sized> {
    pub base: &'a M,
    pub index: &'a Expr,
}

pub struct Spin<'a, M: ?Sized> {
    pub metric: &'a M,
    pub constants: SpinConstants,
}

impl<M: ScalarField + ?Sized> RayRhs for Geodesic<'_, M> {
    fn finsler(&self, x: &Vec3, u: &Vec3) -> Result<f64> {
        finsler_value(self.0, x, u)
    }
    fn derivative(&self, x: &Vec3, u: &Vec3) -> Result<RayDerivative> {
        geodesic_rhs(self.0, &RayState { t: 0.0, x: *x, u: *u })
    }
}

impl<M: ScalarField + ?Sized> RayRhs for Fermat<'_, M> {
    fn finsler(&self, x: &Vec3, u: &Vec3) -> Result<f64> {
        finsler_value(self.base, x, u)
    }
    fn derivative(&self, x: &Vec3, u: &Vec3) -> Result<RayDerivative> {
        fermat_rhs(self.base, self.index, &RayState { t: 0.0, x: *x, u: *u })
    }
}

impl<M: ScalarField + ?Sized> RayRhs for Spin<'_, M> {
    fn finsler(&self, x: &Vec3, u: &Vec3) -> Result<f64> {
        finsler_value(self.metric, x, u)
    }
    fn derivative(&self, x: &Vec3, u: &Vec3) -> Result<RayDerivative> {
        spin_rhs(self.metric, &self.constants, &RayState { t: 0.0, x: *x, u: *u })
    }
    fn singular_scalars(&self, x: &Vec3, u: &Vec3) -> Result<Option<(f64, f64)>> {
        let f = finsler_value(self.metric, x, u)?;
        let geom = geometry(self.metric, &SupportElement::new(*x, scale(u, 1.0 / f)))?;
        let spin = spin_tensor_at(&geom, self.constants.s);
        let c = coupling_values(&geom, &spin, &self.constants);
        Ok(Some((c.delta, c.sigma)))
    }
    fn singular_tolerances(&self) -> Option<(f64, f64)> {
        Some((self.constants.delta_tolerance(), self.constants.sigma_tolerance()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rk45,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl DomainBox {
    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4; initial step for RK45.
    pub step: f64,
    pub atol: f64,
    pub rtol: f64,
    /// Upper bound on the adaptive step.
    pub max_step: Option<f64>,
    pub t_end: f64,
    /// Rescale `u` by `1/F` after every step.
    pub renormalize: bool,
    pub domain: Option<DomainBox>,
    pub max_steps: usize,
    /// Retain samples on the grid `k·output_interval` (plus `t_end`);
    /// every accepted step otherwise.
    pub output_interval: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45,
            step: 0.01,
            atol: 1e-10,
            rtol: 1e-10,
            max_step: None,
            t_end: 10.0,
            renormalize: true,
            domain: None,
            max_steps: 1_000_000,
            output_interval: None,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64, t_end: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            step,
            t_end,
            ..Default::default()
        }
    }

    pub fn rk45(tol: f64, t_end: f64) -> Self {
        IntegratorConfig {
            atol: tol,
            rtol: tol,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("step", self.step)?;
        positive("atol", self.atol)?;
        positive("rtol", self.rtol)?;
        positive("t_end", self.t_end)?;
        if let Some(h) = self.max_step {
            positive("max_step", h)?;
        }
        if let Some(h) = self.output_interval {
            positive("output_interval", h)?;
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if let Some(b) = &self.domain {
            if (0..3).any(|i| !(b.min[i] < b.max[i])) {
                return Err(Error::Config("domain box must have min < max".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    ReachedEnd,
    SingularLocus { t: f64 },
    LeftDomain,
    MaxSteps,
    EvaluationFailed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub state: RayState,
    /// `F(x, u) − 1`
    pub f_drift: f64,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory always holds its initial sample")
    }
}

type State = [f64; 6];

fn pack(x: &Vec3, u: &Vec3) -> State {
    [x[0], x[1], x[2], u[0], u[1], u[2]]
}

fn split(y: &State) -> (Vec3, Vec3) {
    ([y[0], y[1], y[2]], [y[3], y[4], y[5]])
}

fn eval<R: RayRhs + ?Sized>(rhs: &R, y: &State) -> Result<State> {
    let (x, u) = split(y);
    let d = rhs.derivative(&x, &u)?;
    Ok(pack(&d.dx, &d.du))
}

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn rk4_step<R: RayRhs + ?Sized>(rhs: &R, y: &State, h: f64) -> Result<State> {
    let k1 = eval(rhs, y)?;
    let k2 = eval(rhs, &axpy(y, &[(0.5, &k1)], h))?;
    let k3 = eval(rhs, &axpy(y, &[(0.5, &k2)], h))?;
    let k4 = eval(rhs, &axpy(y, &[(1.0, &k3)], h))?;
    Ok(axpy(y, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)], h))
}

/// One Dormand–Prince step: the fifth-order solution and the embedded error estimate.
fn dp45_step<R: RayRhs + ?Sized>(rhs: &R, y: &State, h: f64) -> Result<(State, State)> {
    let k1 = eval(rhs, y)?;
    let k2 = eval(rhs, &axpy(y, &[(1.0 / 5.0, &k1)], h))?;
    let k3 = eval(rhs, &axpy(y, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)], h))?;
    let k4 = eval(rhs, &axpy(y, &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)], h))?;
    let k5 = eval(
        rhs,
        &axpy(
            y,
            &[
                (19372.0 / 6561.0, &k1),
                (-25360.0 / 2187.0, &k2),
                (64448.0 / 6561.0, &k3),
                (-212.0 / 729.0, &k4),
            ],
            h,
        ),
    )?;
    let k6 = eval(
        rhs,
        &axpy(
            y,
            &[
                (9017.0 / 3168.0, &k1),
                (-355.0 / 33.0, &k2),
                (46732.0 / 5247.0, &k3),
                (49.0 / 176.0, &k4),
                (-5103.0 / 18656.0, &k5),
            ],
            h,
        ),
    )?;
    let y5 = axpy(
        y,
        &[
            (35.0 / 384.0, &k1),
            (500.0 / 1113.0, &k3),
            (125.0 / 192.0, &k4),
            (-2187.0 / 6784.0, &k5),
            (11.0 / 84.0, &k6),
        ],
        h,
    );
    let k7 = eval(rhs, &y5)?;
    let e = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
    let err = from_fn(|i| h * (0..7).map(|s| e[s] * ks[s][i]).sum::<f64>());
    Ok((y5, err))
}

fn error_norm(err: &State, y0: &State, y1: &State, cfg: &IntegratorConfig) -> f64 {
    (0..6)
        .map(|i| err[i].abs() / (cfg.atol + cfg.rtol * y0[i].abs().max(y1[i].abs())))
        .fold(0.0, f64::max)
}

struct Stepper<'a, R: ?Sized> {
    rhs: &'a R,
    cfg: &'a IntegratorConfig,
}

enum StepOutcome {
    Ok(State),
    Singular,
    Failed(Error),
}

impl<R: RayRhs + ?Sized> Stepper<'_, R> {
    fn project(&self, y: State) -> Result<State> {
        if !self.cfg.renormalize {
            return Ok(y);
        }
        let (x, u) = split(&y);
        let f = self.rhs.finsler(&x, &u)?;
        Ok(pack(&x, &scale(&u, 1.0 / f)))
    }

    /// Whether `y` lies on the regular side relative to the reference signs.
    fn regular(&self, y: &State, reference: Option<(f64, f64)>) -> Result<bool> {
        let (Some((d0, s0)), Some((td, ts))) = (reference, self.rhs.singular_tolerances()) else {
            return Ok(true);
        };
        let (x, u) = split(y);
        let Some((d, s)) = self.rhs.singular_scalars(&x, &u)? else {
            return Ok(true);
        };
        Ok(d.abs() >= td && s.abs() >= ts && d.signum() == d0.signum() && s.signum() == s0.signum())
    }

    /// A single fixed step of size `h` (RK4 or the fifth-order DP solution).
    fn plain_step(&self, y: &State, h: f64) -> Result<State> {
        let raw = match self.cfg.method {
            Method::Rk4 => rk4_step(self.rhs, y, h)?,
            Method::Rk45 => dp45_step(self.rhs, y, h)?.0,
        };
        self.project(raw)
    }

    fn classify(&self, r: Result<State>, reference: Option<(f64, f64)>) -> StepOutcome {
        match r {
            Ok(y) => match self.regular(&y, reference) {
                Ok(true) => StepOutcome::Ok(y),
                Ok(false) | Err(Error::SingularLocus { .. }) => StepOutcome::Singular,
                Err(e) => StepOutcome::Failed(e),
            },
            Err(Error::SingularLocus { .. }) => StepOutcome::Singular,
            Err(e) => StepOutcome::Failed(e),
        }
    }

    /// Largest regular step in `(0, h)` found by bisection to `1e-12` in `t`.
    fn bisect_singular(&self, y: &State, h: f64, reference: Option<(f64, f64)>) -> Option<(f64, State)> {
        let (mut lo, mut hi) = (0.0, h);
        let mut best = None;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            match self.classify(self.plain_step(y, mid), reference) {
                StepOutcome::Ok(ym) => {
                    lo = mid;
                    best = Some((mid, ym));
                }
                _ => hi = mid,
            }
        }
        best
    }
}

/// The spin generator grows like `1/Σ` (and `1/Δ`), so the flow reaches the
/// singular locus in finite parameter time with unbounded speed and the step
/// controller stalls before a sign change can be bracketed. A stall is
/// attributed to the locus when `|Δ|` or `|Σ|` has collapsed by four orders
/// of magnitude since the start of the ray.
fn approaching_locus(samples: &[Sample]) -> bool {
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return false;
    };
    let collapsed = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => b.abs() < 1e-4 * a.abs(),
        _ => false,
    };
    collapsed(first.delta, last.delta) || collapsed(first.sigma, last.sigma)
}

fn make_sample<R: RayRhs + ?Sized>(rhs: &R, t: f64, y: &State) -> Result<Sample> {
    let (x, u) = split(y);
    let f = rhs.finsler(&x, &u)?;
    let ds = rhs.singular_scalars(&x, &u)?;
    Ok(Sample {
        state: RayState { t, x, u },
        f_drift: f - 1.0,
        delta: ds.map(|d| d.0),
        sigma: ds.map(|d| d.1),
    })
}

/// Integrate from `(x0, u0)`; `u0` is first rescaled onto the indicatrix.
///
/// Reaching the singular locus, leaving the domain box, exhausting the step
/// budget and failing to evaluate the medium all end the trajectory and are
/// reported in [`Trajectory::termination`]. Errors are returned only for an
/// invalid configuration or an unusable initial state.
pub fn integrate<R: RayRhs + ?Sized>(rhs: &R, x0: Vec3, u0: Vec3, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if norm(&u0) == 0.0 || !u0.iter().chain(x0.iter()).all(|v| v.is_finite()) {
        return Err(Error::Config("initial direction must be finite and nonzero".into()));
    }
    let f0 = rhs.finsler(&x0, &u0)?;
    let mut y = pack(&x0, &scale(&u0, 1.0 / f0));
    let first = make_sample(rhs, 0.0, &y)?;
    if let (Some(d), Some(s), Some((td, ts))) = (first.delta, first.sigma, rhs.singular_tolerances()) {
        if d.abs() < td || s.abs() < ts {
            return Err(Error::SingularLocus { delta: d, sigma: s });
        }
    }
    let reference = first.delta.zip(first.sigma);
    let stepper = Stepper { rhs, cfg };
    let mut samples = vec![first];
    let mut t = 0.0;
    let mut h = cfg.step;
    if let Some(m) = cfg.max_step {
        h = h.min(m);
    }
    let mut next_output = cfg.output_interval.map(|dt| dt.min(cfg.t_end));
    let mut output_index = 1usize;
    let mut steps = 0usize;

    let push = |samples: &mut Vec<Sample>, t: f64, y: &State| -> std::result::Result<(), Termination> {
        make_sample(rhs, t, y)
            .map(|s| samples.push(s))
            .map_err(|e| Termination::EvaluationFailed { message: e.to_string() })
    };

    let termination = loop {
        if t >= cfg.t_end {
            break Termination::ReachedEnd;
        }
        if steps >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        // clip the step to the end of the run and to the next output time
        let target = next_output.unwrap_or(cfg.t_end);
        let mut step = h.min(target - t);
        let lands = step >= target - t;
        if lands {
            step = target - t;
        }

        let attempt = match cfg.method {
            Method::Rk4 => stepper.plain_step(&y, step).map(|y1| (y1, true)),
            Method::Rk45 => dp45_step(rhs, &y, step).and_then(|(y1, err)| {
                let en = error_norm(&err, &y, &y1, cfg);
                let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                let mut nh = step * factor;
                if let Some(m) = cfg.max_step {
                    nh = nh.min(m);
                }
                if !lands || en > 1.0 {
                    h = nh;
                } else {
                    h = h.max(nh.min(h * 5.0)).min(cfg.max_step.unwrap_or(f64::INFINITY));
                }
                if en <= 1.0 {
                    stepper.project(y1).map(|p| (p, true))
                } else {
                    Ok((y1, false))
                }
            }),
        };
        let y1 = match attempt {
            Ok((_, false)) => {
                if h < 1e-14 * (1.0 + t.abs()) {
                    if approaching_locus(&samples) {
                        break Termination::SingularLocus { t };
                    }
                    break Termination::EvaluationFailed {
                        message: "step size underflow".into(),
                    };
                }
                continue;
            }
            Ok((y1, true)) => stepper.classify(Ok(y1), reference),
            Err(e) => stepper.classify(Err(e), reference),
        };
        steps += 1;
        let y1 = match y1 {
            StepOutcome::Ok(y1) => y1,
            StepOutcome::Singular => {
                if let Some((dt, ys)) = stepper.bisect_singular(&y, step, reference) {
                    if let Err(term) = push(&mut samples, t + dt, &ys) {
                        break term;
                    }
                    break Termination::SingularLocus { t: t + dt };
                }
                break Termination::SingularLocus { t };
            }
            StepOutcome::Failed(e) => break Termination::EvaluationFailed { message: e.to_string() },
        };
        let t1 = if lands { target } else { t + step };
        if let Some(b) = &cfg.domain {
            if !b.contains(&split(&y1).0) {
                break Termination::LeftDomain;
            }
        }
        y = y1;
        t = t1;
        let retain = match (cfg.output_interval, lands) {
            (None, _) => true,
            (Some(_), true) => true,
            (Some(_), false) => false,
        };
        if lands {
            if let Some(dt) = cfg.output_interval {
                output_index += 1;
                next_output = Some((dt * output_index as f64).min(cfg.t_end));
                if t >= cfg.t_end {
                    next_output = None;
                }
            }
        }
        if retain {
            if let Err(term) = push(&mut samples, t, &y) {
                break term;
            }
        }
    };
    Ok(Trajectory { samples, termination })
}

/// Integrate a batch of rays in parallel; results keep the input order.
pub fn integrate_batch<R: RayRhs + ?Sized>(
    rhs: &R,
    rays: &[(Vec3, Vec3)],
    cfg: &IntegratorConfig,
) -> Vec<Result<Trajectory>> {
    rays.par_iter().map(|(x0, u0)| integrate(rhs, *x0, *u0, cfg)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransverseShift {
    /// `x₊(t_end) − x₋(t_end)`
    pub separation: Vec3,
    /// Component of the separation orthogonal to the mean final direction
    /// and, when a gradient is supplied, to the index gradient.
    pub transverse: Vec3,
}

/// Compare two trajectories started from the same state on the same grid.
///
/// Both must have the same number of samples, the same parameter values
/// (to `1e-12` relative) and the same initial state.
pub fn transverse_shift(plus: &Trajectory, minus: &Trajectory, gradient: Option<Vec3>) -> Result<TransverseShift> {
    if plus.samples.len() != minus.samples.len() || plus.samples.is_empty() {
        return Err(Error::GridMismatch(format!(
            "sample counts differ: {} vs {}",
            plus.samples.len(),
            minus.samples.len()
        )));
    }
    for (i, (a, b)) in plus.samples.iter().zip(&minus.samples).enumerate() {
        let (ta, tb) = (a.state.t, b.state.t);
        if (ta - tb).abs() > 1e-12 * ta.abs().max(tb.abs()).max(1.0) {
            return Err(Error::GridMismatch(format!("parameter differs at sample {i}: {ta} vs {tb}")));
        }
    }
    let (a0, b0) = (&plus.samples[0].state, &minus.samples[0].state);
    if a0.x != b0.x || a0.u != b0.u {
        return Err(Error::GridMismatch("initial states differ".into()));
    }
    let (a, b) = (&plus.last().state, &minus.last().state);
    let separation = sub(&a.x, &b.x);
    let mean = add(&a.u, &b.u);
    let mut basis: Vec<Vec3> = Vec::new();
    for v in std::iter::once(mean).chain(gradient) {
        let mut w = v;
        for e in &basis {
            w = sub(&w, &scale(e, dot(&w, e)));
        }
        let n = norm(&w);
        if n > 1e-12 * norm(&v).max(f64::MIN_POSITIVE) {
            basis.push(scale(&w, 1.0 / n));
        }
    }
    let mut transverse = separation;
    for e in &basis {
        transverse = sub(&transverse, &scale(e, dot(&transverse, e)));
    }
    Ok(TransverseShift { separation, transverse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{build_metric, parse_field, MediumSpec};

    fn euclid() -> crate::media::Metric {
        build_metric(&MediumSpec::Euclidean {}).unwrap()
    }

    #[test]
    fn euclidean_geodesic_is_straight() {
        let m = euclid();
        let tr = integrate(&Geodesic(&m), [0.0; 3], [0.0, 0.0, 1.0], &IntegratorConfig::rk45(1e-10, 5.0)).unwrap();
        assert_eq!(tr.termination, Termination::ReachedEnd);
        let end = tr.last().state;
        assert_eq!(end.t, 5.0);
        assert!(max_abs(&sub(&end.x, &[0.0, 0.0, 5.0])) < 1e-10);
    }

    #[test]
    fn fermat_bends_toward_higher_index() {
        let m = euclid();
        let idx = parse_field("1 + 0.1*x1").unwrap();
        let s = RayState {
            t: 0.0,
            x: [0.0; 3],
            u: [0.0, 0.0, 1.0],
        };
        let d = fermat_rhs(&m, &idx, &s).unwrap();
        assert!(d.du[0] > 0.0);
        let one = parse_field("1").unwrap();
        let conformal = build_metric(&crate::media::catalog::fermat()).unwrap();
        let s = RayState {
            t: 0.0,
            x: [0.3, -0.2, 0.1],
            u: [0.6, 0.0, 0.8],
        };
        let a = fermat_rhs(&conformal, &one, &s).unwrap();
        let b = geodesic_rhs(&conformal, &s).unwrap();
        assert!(a.max_diff(&b) < 1e-15);
    }

    #[test]
    fn nonpositive_index_is_a_domain_error() {
        let idx = parse_field("x1").unwrap();
        let s = RayState {
            t: 0.0,
            x: [-1.0, 0.0, 0.0],
            u: [0.0, 0.0, 1.0],
        };
        assert!(matches!(fermat_rhs(&euclid(), &idx, &s), Err(Error::Domain(_))));
    }

    #[test]
    fn output_grid_is_exact() {
        let m = euclid();
        let cfg = IntegratorConfig {
            output_interval: Some(0.5),
            ..IntegratorConfig::rk45(1e-10, 2.0)
        };
        let tr = integrate(&Geodesic(&m), [0.0; 3], [1.0, 0.0, 0.0], &cfg).unwrap();
        let ts: Vec<f64> = tr.samples.iter().map(|s| s.state.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn domain_exit_terminates() {
        let m = euclid();
        let cfg = IntegratorConfig {
            domain: Some(DomainBox {
                min: [-1.0; 3],
                max: [1.0; 3],
            }),
            ..IntegratorConfig::rk4(0.1, 5.0)
        };
        let tr = integrate(&Geodesic(&m), [0.0; 3], [1.0, 0.0, 0.0], &cfg).unwrap();
        assert_eq!(tr.termination, Termination::LeftDomain);
        assert!(tr.last().state.x[0] <= 1.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let m = euclid();
        let cfg = IntegratorConfig {
            atol: 0.0,
            ..Default::default()
        };
        assert!(matches!(integrate(&Geodesic(&m), [0.0; 3], [1.0, 0.0, 0.0], &cfg), Err(Error::Config(_))));
        assert!(matches!(
            integrate(&Geodesic(&m), [0.0; 3], [0.0; 3], &IntegratorConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shift_requires_matching_grids() {
        let m = euclid();
        let a = integrate(&Geodesic(&m), [0.0; 3], [1.0, 0.0, 0.0], &IntegratorConfig::rk4(0.5, 1.0)).unwrap();
        let b = integrate(&Geodesic(&m), [0.0; 3], [1.0, 0.0, 0.0], &IntegratorConfig::rk4(0.25, 1.0)).unwrap();
        assert!(matches!(transverse_shift(&a, &b, None), Err(Error::GridMismatch(_))));
        let s = transverse_shift(&a, &a, None).unwrap();
        assert_eq!(s.separation, [0.0; 3]);
    }
}
