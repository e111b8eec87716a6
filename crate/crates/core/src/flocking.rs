//! Flocking certificates for the four structural regimes.
//!
//! Every certificate compares an initial dispersion (the velocity
//! diameter `V(0)`, or its `pi`-weighted variant in the reversible case)
//! against a threshold assembled from structural constants of the graph
//! and an integral or envelope of the communication kernel:
//!
//! - reversible: `Vtilde(0) < (alpha c_P sqrt(pi*) / 2) int_{X(0)}^inf psi`
//! - scrambling: `V(0) < alpha chi int_{X(0)}^inf psi`
//! - hierarchical: `V(0) < (alpha A_*/H) sup (r - X(0)) w(r)`
//! - general leadership: `V(0) < C_GL sup (r - X(0)) w(r)^D`
//!
//! When a certificate holds it also carries a confinement radius (an
//! upper bound for `sup_t X(t)`), an exponential decay rate, and a decay
//! form strong enough to bound `V(t)` at every time.

use crate::dynamics::AgentState;
use crate::error::{Error, Result};
use crate::graph::{scrambling_coefficient, InteractionGraph};
use crate::kernel::CommunicationKernel;
use crate::numerics;
use crate::Model;

/// Which structural assumption a certificate was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Reversible,
    Scrambling,
    Hierarchical,
    GeneralLeadership,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Regime::Reversible => "reversible",
            Regime::Scrambling => "scrambling",
            Regime::Hierarchical => "hierarchical",
            Regime::GeneralLeadership => "general-leadership",
        };
        write!(f, "{name}")
    }
}

/// A time-dependent upper bound on the velocity diameter, in the form
/// each regime's analysis yields.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayForm {
    /// `V(t) <= prefactor * exp(-rate t)`.
    Exponential { prefactor: f64, rate: f64 },
    /// `V(t) <= v0 * P(Gamma(height) > omega t)`.
    GammaTail { v0: f64, omega: f64, height: usize },
    /// `V(t) <= v0 * (1 - contraction)^floor(t / step)`.
    Geometric {
        v0: f64,
        contraction: f64,
        step: f64,
    },
}

impl DecayForm {
    pub fn bound(&self, t: f64) -> f64 {
        match *self {
            DecayForm::Exponential { prefactor, rate } => prefactor * (-rate * t).exp(),
            DecayForm::GammaTail { v0, omega, height } => {
                v0 * numerics::gamma_upper_tail(height, omega * t)
            }
            DecayForm::Geometric {
                v0,
                contraction,
                step,
            } => v0 * (1.0 - contraction).powi((t / step).floor() as i32),
        }
    }

    /// The headline exponential rate of the bound.
    pub fn rate(&self) -> f64 {
        match *self {
            DecayForm::Exponential { rate, .. } => rate,
            DecayForm::GammaTail { omega, .. } => omega,
            DecayForm::Geometric {
                contraction, step, ..
            } => -(-contraction).ln_1p() / step,
        }
    }
}

/// The intermediate quantities a certificate was assembled from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Witness {
    /// Maximiser of the kernel envelope, when attained at finite `r`.
    pub envelope_argmax: Option<f64>,
    /// Root of the radius condition before safety inflation.
    pub radius_root: Option<f64>,
    /// Step time `t_0` of the geometric contraction (general leadership).
    pub step_time: Option<f64>,
}

/// Outcome of one flocking check.
#[derive(Debug, Clone)]
pub struct FlockingCertificate {
    pub regime: Regime,
    pub model: Model,
    /// Strict inequality `lhs < threshold`.
    pub holds: bool,
    /// The initial dispersion the condition constrains.
    pub lhs: f64,
    /// Right-hand side; `+inf` means the flocking is unconditional.
    pub threshold: f64,
    /// `threshold - lhs`.
    pub margin: f64,
    /// Predicted bound on `sup_t X(t)`, when the certificate holds.
    pub radius: Option<f64>,
    /// Predicted exponential decay rate, when the certificate holds.
    pub rate: Option<f64>,
    pub decay: Option<DecayForm>,
    pub witness: Witness,
}

/// MT-specific envelope weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MtEnvelope {
    /// `w(r) = (a_bar + a_star) psi / (a_bar + a_star psi)`.
    Hierarchical { offset_bar: f64, a_star: f64 },
    /// `w(r) = (psi / (k + a_hat psi))^D`.
    General { k_denom: f64, a_hat: f64 },
}

const RADIUS_INFLATION: f64 = 1e-6;
const BRACKET_CEILING_FACTOR: f64 = 1e6;

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::CertificatePrecondition(format!(
            "coupling strength must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Reversible certificate (CS model only): compares the pi-weighted
/// dispersion `Vtilde(0)` against
/// `(alpha c_P sqrt(pi*) / 2) int_{X(0)}^inf psi`.
pub fn check_reversible(
    g: &InteractionGraph,
    pi: &nalgebra::DVector<f64>,
    kernel: &CommunicationKernel,
    alpha: f64,
    state0: &AgentState,
) -> Result<FlockingCertificate> {
    check_alpha(alpha)?;
    let c_p = g.poincare_constant(pi)?;
    let pi_star = pi.min();
    let (x0, _) = state0.diameters();
    let v_star = crate::dynamics::asymptotic_velocity(g, pi, &state0.velocities)?;
    let mut vtilde_sq = 0.0;
    for i in 0..g.n() {
        let mut dev = 0.0;
        for m in 0..state0.dim() {
            let diff = state0.velocities[(i, m)] - v_star[m];
            dev += diff * diff;
        }
        vtilde_sq += pi[i] * dev;
    }
    let lhs = vtilde_sq.sqrt();

    let integral = kernel.tail_integral(x0);
    let coeff = 0.5 * c_p * pi_star.sqrt();
    let threshold = alpha * (coeff * integral);
    let holds = lhs < threshold;

    let mut cert = FlockingCertificate {
        regime: Regime::Reversible,
        model: Model::CuckerSmale,
        holds,
        lhs,
        threshold,
        margin: threshold - lhs,
        radius: None,
        rate: None,
        decay: None,
        witness: Witness::default(),
    };
    if holds {
        let radius = if lhs == 0.0 {
            x0
        } else {
            solve_xm(|r| alpha * coeff * kernel.evaluate(r), x0, lhs)?
        };
        let rate = alpha * c_p * kernel.evaluate(radius);
        cert.witness.radius_root = Some(radius);
        cert.radius = Some(radius);
        cert.rate = Some(rate);
        cert.decay = Some(DecayForm::Exponential {
            prefactor: 2.0 * lhs / pi_star.sqrt(),
            rate,
        });
    }
    Ok(cert)
}

/// Scrambling certificate: `V(0) < alpha chi int_{X(0)}^inf psi` with
/// `chi` taken from `A` for the CS model and from `B` for MT.
pub fn check_scrambling(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    alpha: f64,
    state0: &AgentState,
    model: Model,
) -> Result<FlockingCertificate> {
    check_alpha(alpha)?;
    let chi = match model {
        Model::CuckerSmale => scrambling_coefficient(g.weights()),
        Model::MotschTadmor => scrambling_coefficient(&g.mt_matrix()?),
    };
    let chi = match chi {
        Some(value) if value > 0.0 => value,
        _ => {
            return Err(Error::CertificatePrecondition(
                "scrambling coefficient is zero or undefined".to_string(),
            ))
        }
    };
    let (x0, v0) = state0.diameters();
    let integral = kernel.tail_integral(x0);
    let threshold = alpha * (chi * integral);
    let holds = v0 < threshold;

    let mut cert = FlockingCertificate {
        regime: Regime::Scrambling,
        model,
        holds,
        lhs: v0,
        threshold,
        margin: threshold - v0,
        radius: None,
        rate: None,
        decay: None,
        witness: Witness::default(),
    };
    if holds {
        let radius = if v0 == 0.0 {
            x0
        } else {
            solve_xm(|r| alpha * chi * kernel.evaluate(r), x0, v0)?
        };
        let rate = alpha * chi * kernel.evaluate(radius);
        cert.witness.radius_root = Some(radius);
        cert.radius = Some(radius);
        cert.rate = Some(rate);
        cert.decay = Some(DecayForm::Exponential {
            prefactor: v0,
            rate,
        });
    }
    Ok(cert)
}

/// Hierarchical-leadership certificate.
///
/// CS threshold: `(alpha A_*/H) sup_{r >= X(0)} (r - X(0)) psi(r)`.
/// MT threshold replaces `A_*` by `B_*` and reweights the envelope by
/// `(a_bar + A_*) psi / (a_bar + A_* psi)`; with `a_bar = 0` the
/// envelope is unbounded and the flocking unconditional.
pub fn check_hierarchical(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    alpha: f64,
    state0: &AgentState,
    model: Model,
) -> Result<FlockingCertificate> {
    check_alpha(alpha)?;
    let hierarchy = g.heights()?;
    let n = g.n();
    if n < 2 {
        return Err(Error::CertificatePrecondition(
            "hierarchy height is zero for a single agent".to_string(),
        ));
    }
    let height = hierarchy.max;
    let a_star = (1..n)
        .map(|i| g.row_sum(i))
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .unwrap();
    let (x0, v0) = state0.diameters();

    let (front, mt_env, omega_of) = match model {
        Model::CuckerSmale => {
            let front = a_star / height as f64;
            let omega = move |rho: f64| a_star * rho;
            (front, None, Box::new(omega) as Box<dyn Fn(f64) -> f64>)
        }
        Model::MotschTadmor => {
            let b = g.mt_matrix()?;
            let b_star = (1..n)
                .map(|i| b.row(i).sum())
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            let offset_bar = (1..n).map(|i| g.offsets()[i]).fold(0.0f64, f64::max);
            let front = b_star / height as f64;
            let omega =
                move |rho: f64| b_star * (offset_bar + a_star) * rho / (offset_bar + a_star * rho);
            (
                front,
                Some(MtEnvelope::Hierarchical { offset_bar, a_star }),
                Box::new(omega) as Box<dyn Fn(f64) -> f64>,
            )
        }
    };

    let (env_value, env_argmax) = envelope_max(kernel, x0, 1, mt_env)?;
    let threshold = alpha * (front * env_value);
    let holds = v0 < threshold;

    let mut cert = FlockingCertificate {
        regime: Regime::Hierarchical,
        model,
        holds,
        lhs: v0,
        threshold,
        margin: threshold - v0,
        radius: None,
        rate: None,
        decay: None,
        witness: Witness {
            envelope_argmax: env_argmax,
            ..Witness::default()
        },
    };
    if holds {
        let weight = hl_weight(kernel, mt_env);
        let cond = |r: f64| alpha * front * (r - x0) * weight(r);
        let (root, radius) = smallest_admissible_radius(&cond, x0, v0, env_argmax)?;
        let omega = alpha * omega_of(kernel.evaluate(radius));
        cert.witness.radius_root = Some(root);
        cert.radius = Some(radius);
        cert.rate = Some(omega);
        cert.decay = Some(DecayForm::GammaTail { v0, omega, height });
    }
    Ok(cert)
}

fn hl_weight(kernel: &CommunicationKernel, mt: Option<MtEnvelope>) -> impl Fn(f64) -> f64 + '_ {
    move |r: f64| {
        let psi = kernel.evaluate(r);
        match mt {
            None => psi,
            Some(MtEnvelope::Hierarchical { offset_bar, a_star }) => {
                (offset_bar + a_star) * psi / (offset_bar + a_star * psi)
            }
            Some(MtEnvelope::General { .. }) => unreachable!("hierarchical weight"),
        }
    }
}

/// General-leadership certificate, driven by the coalescence diameter D.
///
/// CS threshold:
/// `alpha (A_hat/D)^D ((D-1)/A_bar)^{D-1} e^{1-D} sup (r - X(0)) psi(r)^D`
/// (with `0^0 = 1` at `D = 1`). MT replaces `A_bar` by `B_bar` and
/// `psi` by `psi / (K + A_hat psi)`.
pub fn check_general(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    alpha: f64,
    state0: &AgentState,
    model: Model,
) -> Result<FlockingCertificate> {
    check_alpha(alpha)?;
    let coalescence = g.coalescence_diameter();
    let diameter = coalescence
        .diameter
        .ok_or_else(|| Error::NoUniqueClosedClass {
            count: g.closed_classes().len(),
        })?;
    if diameter == 0 {
        return Err(Error::CertificatePrecondition(
            "coalescence diameter is zero for a single agent".to_string(),
        ));
    }
    let a_hat = g
        .weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .copied()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .ok_or_else(|| Error::MissingConstant("smallest positive weight".to_string()))?;
    let (x0, v0) = state0.diameters();
    let d_int = diameter as i32;
    let d_f = diameter as f64;

    let (rate_bar, mt_env) = match model {
        Model::CuckerSmale => {
            let a_bar = (0..g.n()).map(|i| g.row_sum(i)).fold(0.0f64, f64::max);
            (a_bar, None)
        }
        Model::MotschTadmor => {
            let k_denom = g
                .k_denominator()
                .ok_or_else(|| Error::MissingConstant("K (no edge to scan)".to_string()))?;
            let b = g.mt_matrix()?;
            let b_bar = (0..g.n()).map(|i| b.row(i).sum()).fold(0.0f64, f64::max);
            (b_bar, Some(MtEnvelope::General { k_denom, a_hat }))
        }
    };

    // (A_hat/D)^D ((D-1)/rate_bar)^{D-1} e^{1-D}; 0^0 = 1 covers D = 1.
    let front =
        (a_hat / d_f).powi(d_int) * ((d_f - 1.0) / rate_bar).powi(d_int - 1) * (1.0 - d_f).exp();

    let (env_value, env_argmax) = envelope_max(kernel, x0, diameter, mt_env)?;
    let threshold = alpha * (front * env_value);
    let holds = v0 < threshold;

    let mut cert = FlockingCertificate {
        regime: Regime::GeneralLeadership,
        model,
        holds,
        lhs: v0,
        threshold,
        margin: threshold - v0,
        radius: None,
        rate: None,
        decay: None,
        witness: Witness {
            envelope_argmax: env_argmax,
            ..Witness::default()
        },
    };
    if !holds {
        return Ok(cert);
    }

    // Per-jump lower rate along a coalescence path.
    let theta = |r: f64| {
        let psi = kernel.evaluate(r);
        match mt_env {
            None => a_hat * psi,
            Some(MtEnvelope::General { k_denom, a_hat }) => a_hat * psi / (k_denom + a_hat * psi),
            Some(MtEnvelope::Hierarchical { .. }) => unreachable!("general weight"),
        }
    };

    if diameter == 1 {
        // t_0 -> 0 limit: the condition degenerates to
        // `(r - X(0)) alpha theta(r) > V(0)` with exponential decay.
        let cond = |r: f64| alpha * theta(r) * (r - x0);
        let (root, radius) = smallest_admissible_radius(&cond, x0, v0, env_argmax)?;
        let rate = alpha * theta(radius);
        cert.witness.radius_root = Some(root);
        cert.radius = Some(radius);
        cert.rate = Some(rate);
        cert.decay = Some(DecayForm::Exponential {
            prefactor: v0,
            rate,
        });
    } else {
        let t0 = (d_f - 1.0) / (alpha * rate_bar);
        let contraction = move |r: f64| {
            (1.0f64.min(alpha * theta(r) * t0 / d_f)).powi(d_int) * (-alpha * rate_bar * t0).exp()
        };
        let cond = |r: f64| contraction(r) * (r - x0) / t0;
        let (root, radius) = smallest_admissible_radius(&cond, x0, v0, env_argmax)?;
        let c = contraction(radius).min(1.0 - 1e-300);
        let rate = -(-c).ln_1p() / t0;
        cert.witness.radius_root = Some(root);
        cert.witness.step_time = Some(t0);
        cert.radius = Some(radius);
        cert.rate = Some(rate);
        cert.decay = Some(DecayForm::Geometric {
            v0,
            contraction: c,
            step: t0,
        });
    }
    Ok(cert)
}

/// Smallest `r` with `cond(r) > v0`, reported as `(root, inflated)`
/// where the returned radius carries a relative safety inflation (any
/// admissible radius certifies, so inflating stays sound).
fn smallest_admissible_radius<F: Fn(f64) -> f64>(
    cond: &F,
    x0: f64,
    v0: f64,
    argmax: Option<f64>,
) -> Result<(f64, f64)> {
    if v0 == 0.0 {
        return Ok((x0, x0));
    }
    let hi = match argmax {
        Some(r_star) if cond(r_star) > v0 => r_star,
        Some(r_star) => {
            return Err(Error::RadiusSolve(format!(
                "margin too thin to certify a radius: cond({r_star}) = {} <= {v0}",
                cond(r_star)
            )))
        }
        None => {
            // Unbounded envelope: grow until the condition is met.
            let mut step = x0.max(1.0);
            let mut hi = x0 + step;
            let ceiling = 1e12 * x0.max(1.0);
            while cond(hi) <= v0 {
                step *= 2.0;
                hi = x0 + step;
                if hi - x0 > ceiling {
                    return Err(Error::RadiusSolve(
                        "no admissible radius below the bracket ceiling".to_string(),
                    ));
                }
            }
            hi
        }
    };
    let f = |r: f64| cond(r) - v0;
    let root = numerics::bisect(&f, x0, hi, 1e-12 * hi.max(1.0));
    let inflated = (root * (1.0 + RADIUS_INFLATION)).min(hi);
    let radius = if cond(inflated) > v0 { inflated } else { hi };
    Ok((root, radius))
}

/// Solves `int_{x0}^{X_M} phi(r) dr = v0` for the confinement radius of
/// a dissipative differential inequality, by geometric bracket growth
/// and bisection. Requires `v0 < int_{x0}^inf phi` (rejects otherwise).
pub fn solve_xm<F: Fn(f64) -> f64>(phi: F, x0: f64, v0: f64) -> Result<f64> {
    if !x0.is_finite() || x0 < 0.0 {
        return Err(Error::RadiusSolve(format!("X(0) = {x0}")));
    }
    if !v0.is_finite() || v0 < 0.0 {
        return Err(Error::RadiusSolve(format!("V(0) = {v0}")));
    }
    if v0 == 0.0 {
        return Ok(x0);
    }
    const QUAD_TOL: f64 = 1e-12;
    let mut lo = x0;
    let mut acc = 0.0;
    let mut step = x0.max(1.0);
    let ceiling = 1e13 * x0.max(1.0);
    let hi = loop {
        let hi = lo + step;
        let segment = numerics::integrate(&phi, lo, hi, QUAD_TOL);
        if acc + segment > v0 {
            break hi;
        }
        acc += segment;
        lo = hi;
        step *= 2.0;
        if hi - x0 > ceiling {
            return Err(Error::RadiusSolve(format!(
                "the integral of phi reaches only {acc} <= V(0) = {v0}"
            )));
        }
    };
    let f = |x: f64| acc + numerics::integrate(&phi, lo, x, QUAD_TOL) - v0;
    let mut x_m = numerics::bisect(&f, lo, hi, 1e-10 * x0.max(1.0));
    // One Newton polish pins the integral residual itself.
    let density = phi(x_m);
    if density > 0.0 {
        x_m = (x_m - f(x_m) / density).max(x0);
    }
    debug_assert!(f(x_m).abs() <= 1e-9 * v0.max(1.0));
    Ok(x_m)
}

/// Supremum over `r >= x0` of `(r - x0) w(r)` where `w` is `psi^d` for
/// the CS model or an MT reweighting. Returns the value (possibly
/// `+inf`) and the maximiser when attained at finite `r`.
///
/// Power-law kernels use closed forms where they exist and bracketed
/// root-finding on the stationarity equation otherwise; tabulated
/// kernels fall back to golden-section search over their declared
/// domain.
pub fn envelope_max(
    kernel: &CommunicationKernel,
    x0: f64,
    d: usize,
    mt: Option<MtEnvelope>,
) -> Result<(f64, Option<f64>)> {
    if x0.is_nan() || x0 < 0.0 {
        return Err(Error::Envelope(format!("X(0) = {x0} must be non-negative")));
    }
    if d == 0 {
        return Err(Error::Envelope(
            "envelope exponent D must be positive".to_string(),
        ));
    }
    if let Some(MtEnvelope::Hierarchical { .. }) = mt {
        if d != 1 {
            return Err(Error::Envelope(
                "the hierarchical envelope is a D = 1 object".to_string(),
            ));
        }
    }
    // Degenerate MT weights are constant in r, so the envelope grows
    // without bound regardless of the kernel: hierarchical with zero
    // offsets (weight 1) and general leadership with K = 0 (weight
    // 1/A_hat^D).
    let degenerate = match mt {
        Some(MtEnvelope::Hierarchical { offset_bar, .. }) => offset_bar == 0.0,
        Some(MtEnvelope::General { k_denom, .. }) => k_denom == 0.0,
        None => false,
    };
    if degenerate {
        return Ok((f64::INFINITY, None));
    }

    let weight = |r: f64| -> f64 {
        let psi = kernel.evaluate(r);
        match mt {
            None => psi.powi(d as i32),
            Some(MtEnvelope::Hierarchical { offset_bar, a_star }) => {
                (offset_bar + a_star) * psi / (offset_bar + a_star * psi)
            }
            Some(MtEnvelope::General { k_denom, a_hat }) => {
                (psi / (k_denom + a_hat * psi)).powi(d as i32)
            }
        }
    };
    let objective = |r: f64| (r - x0) * weight(r);

    match kernel {
        CommunicationKernel::PowerLaw { beta } => {
            let e = beta * d as f64;
            if e < 1.0 {
                return Ok((f64::INFINITY, None));
            }
            if e == 1.0 {
                // The objective increases to its limit at infinity.
                let limit = match mt {
                    None => 1.0,
                    Some(MtEnvelope::Hierarchical { offset_bar, a_star }) => {
                        (offset_bar + a_star) / offset_bar
                    }
                    Some(MtEnvelope::General { k_denom, .. }) => k_denom.powi(-(d as i32)),
                };
                return Ok((limit, None));
            }
            let r_star = match mt {
                None => {
                    // Positive root of (1-e) r^2 + e x0 r + 1 = 0.
                    (((e * x0).powi(2) + 4.0 * (e - 1.0)).sqrt() + e * x0) / (2.0 * (e - 1.0))
                }
                Some(env) => {
                    let ratio = match env {
                        MtEnvelope::Hierarchical { offset_bar, a_star } => a_star / offset_bar,
                        MtEnvelope::General { k_denom, a_hat } => a_hat / k_denom,
                    };
                    mt_stationarity_root(*beta, d, x0, ratio)?
                }
            };
            Ok((objective(r_star), Some(r_star)))
        }
        CommunicationKernel::Table(table) => {
            if kernel.tail_diverges() {
                return Err(Error::Envelope(
                    "tabulated kernel with divergent tail: envelope boundedness is undeclared"
                        .to_string(),
                ));
            }
            let last = *table.knots().last().unwrap();
            if x0 >= last {
                return Ok((0.0, Some(x0)));
            }
            // Conservative: maximise over the declared domain only.
            let (r_star, value) = numerics::golden_max(&objective, x0, last, 1e-12 * last.max(1.0));
            Ok((value, Some(r_star)))
        }
    }
}

/// Root on `[x0, inf)` of the MT stationarity equation
/// `(1 - beta D) r^2 + beta D x0 r + 1 = -ratio (1 + r^2)^{1 - beta/2}`,
/// the first-order condition of `(r - x0) (psi / (c + psi'))`-type
/// envelopes. For `beta = 2` and `D = 1` the closed form
/// `x0 + sqrt(x0^2 + 1 + ratio)` applies.
fn mt_stationarity_root(beta: f64, d: usize, x0: f64, ratio: f64) -> Result<f64> {
    let e = beta * d as f64;
    debug_assert!(e > 1.0);
    if beta == 2.0 && d == 1 {
        return Ok(x0 + (x0 * x0 + 1.0 + ratio).sqrt());
    }
    let s = |r: f64| {
        (1.0 - e) * r * r + e * x0 * r + 1.0 + ratio * (1.0 + r * r).powf(1.0 - beta / 2.0)
    };
    let ceiling = BRACKET_CEILING_FACTOR * x0.max(1.0);
    let mut step = x0.max(1.0);
    let mut hi = x0 + step;
    while s(hi) > 0.0 {
        step *= 2.0;
        hi = x0 + step;
        if hi > ceiling {
            return Err(Error::Envelope(format!(
                "stationarity root exceeds the bracket ceiling {ceiling:e}"
            )));
        }
    }
    // s decreases through the root; flip the sign for the bisector.
    Ok(numerics::bisect(&|r| -s(r), x0, hi, 1e-11 * hi.max(1.0)))
}

/// Hierarchical decay bound via Gamma-tail absorption:
/// `V(t) <= v0 (sum_{n < height} (omega t)^n / n!) e^{-omega t}`.
pub fn decay_estimate_hl(height: usize, omega: f64, v0: f64, t: f64) -> f64 {
    debug_assert!(height >= 1 && omega > 0.0 && t >= 0.0);
    v0 * numerics::gamma_upper_tail(height, omega * t)
}
