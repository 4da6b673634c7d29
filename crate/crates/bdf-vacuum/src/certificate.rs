//! Analytic constants of the contraction estimates and the admissibility
//! certificate for `(α, Λ, n, b)`.
//!
//! `C_6` is Talenti's sharp Sobolev constant for `‖u‖₆ ≤ C₆‖∇u‖₂` on R³.
//! A different (non-sharp) convention would shift `α_b` by a bounded factor.

use crate::dirac::pair_trace;
use crate::error::{BdfError, Result};
use crate::lattice::{energy_scale, norm_sqr, sub, Vec3};
use crate::quad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Default truncation order of the κ-series.
pub const N_MAX: usize = 500;

/// `C_∞ = 1/(2√π)`.
pub fn c_inf() -> f64 {
    0.5 / PI.sqrt()
}

/// Talenti's sharp constant `(1/√(3π))·(Γ(3)/Γ(3/2))^{1/3}`.
pub fn c6() -> f64 {
    (1.0 / (3.0 * PI).sqrt()) * (4.0 / PI.sqrt()).cbrt()
}

/// `K_p = (1/2π)∫ dη E(η)^{-p}` in closed form `Γ((p−1)/2)/(2√π Γ(p/2))`.
pub fn k_p(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(BdfError::InvalidArgument(format!("K_p needs p > 1, got {p}")));
    }
    Ok((ln_gamma(0.5 * (p - 1.0)) - ln_gamma(0.5 * p)).exp() / (2.0 * PI.sqrt()))
}

/// `K_p` by direct quadrature.
pub fn k_p_quadrature(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(BdfError::InvalidArgument(format!("K_p needs p > 1, got {p}")));
    }
    let f = |eta: f64| (1.0 + eta * eta).powf(-0.5 * p);
    let v = quad::integrate(&f, 0.0, 1.0, 1e-13)? + quad::integrate_power_tail(&f, 1.0, p - 1.0, 1e-13)?;
    Ok(v / PI)
}

/// `∫_{R³} E(u)^{-q} du` by radial quadrature.
pub fn radial_integral(q: f64) -> Result<f64> {
    if !(q > 3.0) {
        return Err(BdfError::InvalidArgument(format!("∫E^-q diverges for q ≤ 3, got {q}")));
    }
    let f = |u: f64| 4.0 * PI * u * u * (1.0 + u * u).powf(-0.5 * q);
    Ok(quad::integrate(&f, 0.0, 1.0, 1e-12)? + quad::integrate_power_tail(&f, 1.0, q - 3.0, 1e-12)?)
}

/// `S_{p,q} = 4π (2π)^{-3/p} (∫ E(u)^{-q} du)^{1/p}`.
pub fn s_pq(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(BdfError::InvalidArgument(format!("S_pq needs p > 0, got {p}")));
    }
    Ok(4.0 * PI * (2.0 * PI).powf(-3.0 / p) * radial_integral(q)?.powf(1.0 / p))
}

/// `C_M = 2 (∫₀^∞ t² dt / (E(2t)^{4/3} E(t)²))^{1/2}`.
pub fn c_m() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| c_m_with_tol(1e-12).expect("C_M integrand is integrable"))
}

pub fn c_m_with_tol(tol: f64) -> Result<f64> {
    let f = |t: f64| t * t / ((1.0 + 4.0 * t * t).powf(2.0 / 3.0) * (1.0 + t * t));
    // f ~ t^{-4/3}
    let v = quad::integrate(&f, 0.0, 1.0, tol)? + quad::integrate_power_tail(&f, 1.0, 1.0 / 3.0, tol)?;
    Ok(2.0 * v.sqrt())
}

/// `E(2x)^θ ∫ du / (E(2u)^{1+θ} |u − x|²)` for `|x| = x`, with the angular
/// integral done analytically:
/// `∫ dΩ/|u−x|² = (2π/(ux)) ln|(u+x)/(u−x)|`.
pub fn c_r_profile(theta: f64, x: f64) -> Result<f64> {
    let w = |u: f64| (1.0 + 4.0 * u * u).powf(-0.5 * (1.0 + theta));
    let inner = if x <= 0.0 {
        4.0 * PI * (quad::integrate(&w, 0.0, 1.0, 1e-12)? + quad::integrate_power_tail(&w, 1.0, theta, 1e-12)?)
    } else {
        // ln|(u+x)/(u−x)| = 2 artanh(min/max), accurate far from u = x
        let lr = |u: f64| 2.0 * (u.min(x) / u.max(x)).atanh();
        let g = |u: f64| u * lr(u) * w(u);
        let tol = 1e-11 * x.max(1.0);
        let s = quad::integrate(&g, 0.0, x, tol)? + quad::integrate(&g, x, 2.0 * x, tol)?
            + quad::integrate_power_tail(&g, 2.0 * x, theta, tol)?;
        2.0 * PI / x * s
    };
    Ok((1.0 + 4.0 * x * x).powf(0.5 * theta) * inner)
}

/// `lim_{x→∞}` of `c_r_profile`: `π ∫₀^∞ v^{-θ} ln|(1+v)/(1−v)| dv`, closed form
/// `(π^{3/2}/2) Γ((2−θ)/2)Γ(1/2)Γ(θ/2) / (Γ((1+θ)/2)Γ((3−θ)/2))`.
pub fn c_r_profile_limit(theta: f64) -> f64 {
    0.5 * PI.powf(1.5) * gamma(0.5 * (2.0 - theta)) * PI.sqrt() * gamma(0.5 * theta)
        / (gamma(0.5 * (1.0 + theta)) * gamma(0.5 * (3.0 - theta)))
}

/// Same limit by quadrature.
pub fn c_r_profile_limit_quadrature(theta: f64) -> Result<f64> {
    let g = |v: f64| v.powf(-theta) * 2.0 * v.min(1.0 / v).atanh();
    let s = quad::integrate(&g, 0.0, 1.0, 1e-11)? + quad::integrate(&g, 1.0, 2.0, 1e-11)?
        + quad::integrate_power_tail(&g, 2.0, theta, 1e-11)?;
    Ok(PI * s)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CrEstimate {
    /// `C_R`
    pub value: f64,
    /// minimizing θ
    pub theta: f64,
    /// largest profile value found by the finite-|x| scan at that θ
    pub finite_scan_max: f64,
    /// abscissa of that value
    pub finite_scan_x: f64,
    /// `x → ∞` limit of the profile at that θ
    pub profile_limit: f64,
}

/// `C_θ = (1/2π²) sup_x profile(θ, x)`. The profile increases toward its
/// `|x| → ∞` limit, so the sup is the larger of a finite scan and the limit.
pub fn c_theta(theta: f64) -> Result<(f64, f64, f64)> {
    if !(theta > 0.0 && theta < 2.0) {
        return Err(BdfError::InvalidArgument(format!("θ must lie in (0,2), got {theta}")));
    }
    let mut err = None;
    let (s, v) = quad::scan_then_golden(
        |s| {
            let x = s / (1.0 - s);
            c_r_profile(theta, x).unwrap_or_else(|e| {
                err = Some(e);
                f64::NAN
            })
        },
        0.0,
        0.98,
        24,
        1e-6,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let limit = c_r_profile_limit(theta);
    Ok((v.max(limit) / (2.0 * PI * PI), v, s / (1.0 - s)))
}

/// `C_R = inf_{θ∈(0,2)} C_θ`, memoized.
pub fn c_r_estimate() -> CrEstimate {
    static V: OnceLock<CrEstimate> = OnceLock::new();
    *V.get_or_init(|| {
        let (theta, neg) = quad::golden_max(|t| -c_theta(t).map(|c| c.0).unwrap_or(f64::INFINITY), 0.05, 1.95, 1e-6);
        let (_, scan, x) = c_theta(theta).expect("θ inside (0,2)");
        CrEstimate { value: -neg, theta, finite_scan_max: scan, finite_scan_x: x, profile_limit: c_r_profile_limit(theta) }
    })
}

pub fn c_r() -> f64 {
    c_r_estimate().value
}

/// Λ-independent constants feeding the κ_n.
#[derive(Clone, Debug, Serialize)]
pub struct BaseConstants {
    pub c_inf: f64,
    pub c6: f64,
    pub c_r: f64,
    pub c_m: f64,
    pub s6: f64,
    pub s65: f64,
    pub s64: f64,
    pub s24: f64,
    pub k2: f64,
    pub k32: f64,
    pub c_q: f64,
    pub c_rho: f64,
    pub c_rho4: f64,
    pub c_q2: f64,
    pub c_rho2: f64,
    pub c_rho3: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    /// `κ_n` for `n = 0..=N_MAX` (entries 0 and 1 unused and zero)
    #[serde(skip)]
    pub kappa: Vec<f64>,
}

fn kappa_general(b: &BaseConstants, n: usize) -> f64 {
    let nf = n as f64;
    let kq = k_p(0.5 * nf).expect("n ≥ 3");
    let kr = k_p(0.5 * (nf + 1.0)).expect("n ≥ 3");
    nf * b.c_r * kq * b.c_q * 2f64.sqrt() + 2.0 * nf * kr * b.c_rho * PI.sqrt()
}

pub fn base_constants() -> &'static BaseConstants {
    static V: OnceLock<BaseConstants> = OnceLock::new();
    V.get_or_init(|| {
        let c_inf = c_inf();
        let c6 = c6();
        let c_r = c_r();
        let c_m = c_m();
        let s6 = s_pq(6.0, 6.0).expect("q > 3");
        let s65 = s_pq(6.0, 5.0).expect("q > 3");
        let s64 = s_pq(6.0, 4.0).expect("q > 3");
        let s24 = s_pq(2.0, 4.0).expect("q > 3");
        let k2 = k_p(2.0).expect("p > 1");
        let k32 = k_p(1.5).expect("p > 1");
        let t = s6 * c6 / (2.0 * PI.sqrt());
        let c_q = 2f64.sqrt() * t.powi(3);
        let c_rho = s6 * c6 / (4.0 * PI) * t.powi(5);
        let c_rho4 = k2 * s6 * c6 / PI * t * t;
        let c_q2 = (2f64.powf(1.5) * k32)
            .max(s6 * c6 * k32 / (2.0 * PI).sqrt())
            .max(5f64.sqrt() * s65 * c_m * c6 / (PI * 2f64.sqrt()));
        let c_rho2 = (s6 * c6 / (2.0 * PI)).max(s65 * c_m * c6 / (PI.powf(1.5) * 2f64.sqrt()));
        let c_rho3 = 15.0 * c_m * s6 * s64 * s64 * c6.powi(4) / (PI * (4.0 * PI * c_inf).powi(3));
        let kappa2 = c_q2 * c_r * 2f64.sqrt() + 2.0 * PI.sqrt() * c_rho2;
        let kappa3 = 3.0 * c_r * k32 * c_q * 2f64.sqrt() + 2.0 * PI.sqrt() * c_rho3;
        let kappa4 = 4.0 * c_r * k2 * c_q * 2f64.sqrt() + 2.0 * PI.sqrt() * c_rho4;
        let mut b = BaseConstants {
            c_inf,
            c6,
            c_r,
            c_m,
            s6,
            s65,
            s64,
            s24,
            k2,
            k32,
            c_q,
            c_rho,
            c_rho4,
            c_q2,
            c_rho2,
            c_rho3,
            kappa2,
            kappa3,
            kappa4,
            kappa: Vec::new(),
        };
        let mut kappa = vec![0.0; N_MAX + 1];
        kappa[2] = kappa2;
        kappa[3] = kappa3;
        kappa[4] = kappa4;
        for (n, slot) in kappa.iter_mut().enumerate().skip(5) {
            *slot = kappa_general(&b, n);
        }
        b.kappa = kappa;
        b
    })
}

/// `κ₁` as a function of `log Λ`.
pub fn kappa1_log(log_lambda: f64) -> f64 {
    let cr = c_r();
    let l = log_lambda.max(0.0).sqrt();
    (cr * 2f64.sqrt() / PI.sqrt() * l).max(2f64.sqrt() * cr + l / (2f64.powf(1.5) * PI.sqrt()))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 3.0 {
        Ok(())
    } else {
        Err(BdfError::InvalidArgument(format!("the κ estimates assume Λ ≥ 3, got {lambda}")))
    }
}

/// `κ_n(Λ)`; only `κ₁` depends on Λ.
pub fn kappa(n: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    match n {
        0 => Err(BdfError::InvalidArgument("κ_n needs n ≥ 1".into())),
        1 => Ok(kappa1_log(lambda.ln())),
        n if n <= N_MAX => Ok(base_constants().kappa[n]),
        n => Ok(kappa_general(base_constants(), n)),
    }
}

/// Upper bound on `Σ_{n>N} n κ_n x^{n−1}` using `κ_n ≤ n·c_N` for `n > N`.
fn fprime_tail(x: f64) -> f64 {
    let b = base_constants();
    let nf = N_MAX as f64;
    let c = b.c_r * k_p(0.5 * (nf + 1.0)).unwrap() * b.c_q * 2f64.sqrt()
        + 2.0 * k_p(0.5 * (nf + 2.0)).unwrap() * b.c_rho * PI.sqrt();
    let mut sum = 0.0;
    let mut n = N_MAX + 1;
    let mut pw = x.powi(N_MAX as i32);
    loop {
        let term = (n * n) as f64 * pw;
        sum += term;
        if term <= 1e-18 * sum || pw == 0.0 || n > 10_000_000 {
            break;
        }
        pw *= x;
        n += 1;
    }
    c * sum
}

/// `f′(x) = Σ_{n≥2} n κ_n x^{n−1}`: truncated sum and tail bound.
pub fn fprime(x: f64) -> (f64, f64) {
    let b = base_constants();
    let mut s = 0.0;
    let mut pw = x;
    for n in 2..=N_MAX {
        s += n as f64 * b.kappa[n] * pw;
        pw *= x;
    }
    (s, fprime_tail(x))
}

/// `a_{b,Λ}(x) = (x − b)/(κ₁x + x f′(x))`, tail included in `f′`.
pub fn a_function_log(log_lambda: f64, b: f64, x: f64) -> f64 {
    if x >= 1.0 {
        return 0.0;
    }
    let (s, tail) = fprime(x);
    let k1 = kappa1_log(log_lambda);
    if x <= 0.0 {
        return if b == 0.0 { 1.0 / k1 } else { 0.0 };
    }
    (x - b) / (k1 * x + x * (s + tail))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaBound {
    pub alpha_b: f64,
    pub x_lambda: f64,
    pub r_b: f64,
    /// `a_{b,Λ}(x_Λ)`
    pub a_max: f64,
    /// tail bound over truncated `f′` at `x_Λ`
    pub tail_ratio: f64,
    pub tail_ok: bool,
}

/// `α_b(Λ)` with `log Λ` given directly (so very large cutoffs are usable).
pub fn alpha_b_log(log_lambda: f64, b: f64) -> Result<AlphaBound> {
    if log_lambda < 3f64.ln() - 1e-12 {
        return Err(BdfError::InvalidArgument(format!("the κ estimates assume Λ ≥ 3, got log Λ = {log_lambda}")));
    }
    if !(0.0..1.0).contains(&b) {
        return Err(BdfError::InvalidArgument(format!("b must lie in [0,1), got {b}")));
    }
    let hi = 1.0 - 1e-9;
    let (x, a) = quad::scan_then_golden(|x| a_function_log(log_lambda, b, x), b, hi, 2000, 1e-9);
    if !(a > 0.0) {
        return Err(BdfError::Bracket(format!("a_(b,Λ) has no positive maximum on [{b}, 1)")));
    }
    let r_b = if x > 0.0 { x / a } else { 0.0 };
    let (s, tail) = fprime(x);
    let tail_ratio = if s > 0.0 { tail / s } else { 0.0 };
    Ok(AlphaBound {
        alpha_b: a.min(1.0 / (PI / 4.0 + r_b)),
        x_lambda: x,
        r_b,
        a_max: a,
        tail_ratio,
        tail_ok: tail_ratio <= 1e-6,
    })
}

pub fn alpha_b(lambda: f64, b: f64) -> Result<AlphaBound> {
    check_lambda(lambda)?;
    alpha_b_log(lambda.ln(), b)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Certificate {
    pub alpha: f64,
    pub lambda: f64,
    pub n_c_norm: f64,
    pub b: f64,
    /// `2√π α ‖n‖_C ≤ b`
    pub weak_field: bool,
    /// `α ≤ α_b(Λ)`
    pub alpha_bound: bool,
    /// both lines of the Banach-ball system at `R = R_b(Λ)`
    pub banach_ball: bool,
    pub alpha_b: f64,
    pub x_lambda: f64,
    pub r_b: f64,
    pub pass: bool,
}

/// Evaluate the existence/uniqueness conditions for `(α, Λ, ‖n‖_C, b)`.
pub fn check_conditions(alpha: f64, lambda: f64, n_c_norm: f64, b: f64) -> Result<Certificate> {
    if !(alpha >= 0.0) || !alpha.is_finite() || !n_c_norm.is_finite() || !lambda.is_finite() {
        return Err(BdfError::InvalidArgument("certificate inputs must be finite, α ≥ 0".into()));
    }
    let ab = alpha_b(lambda, b)?;
    let weak_field = 2.0 * PI.sqrt() * alpha * n_c_norm <= b;
    let alpha_bound = alpha <= ab.alpha_b;
    let r = ab.r_b;
    let x = alpha * r;
    let banach_ball = if x < 1.0 {
        let (s, tail) = fprime(x);
        let lhs = 2.0 * PI.sqrt() * n_c_norm + x * kappa1_log(lambda.ln()) + x * (s + tail);
        lhs <= r && alpha <= 1.0 / (PI / 4.0 + r)
    } else {
        false
    };
    Ok(Certificate {
        alpha,
        lambda,
        n_c_norm,
        b,
        weak_field,
        alpha_bound,
        banach_ball,
        alpha_b: ab.alpha_b,
        x_lambda: ab.x_lambda,
        r_b: r,
        pass: weak_field && alpha_bound && banach_ball,
    })
}

/// Least-squares fit of `κ_n ≈ K√n` over `n ∈ [lo, hi]`.
pub fn kappa_sqrt_fit(lo: usize, hi: usize) -> f64 {
    let b = base_constants();
    let (mut num, mut den) = (0.0, 0.0);
    for n in lo..=hi.min(N_MAX) {
        let s = (n as f64).sqrt();
        num += b.kappa[n] * s;
        den += s * s;
    }
    num / den
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantsTable {
    pub lambda: f64,
    pub c_inf: f64,
    pub c6: f64,
    pub c_r: CrEstimate,
    pub c_m: f64,
    pub s6: f64,
    pub s65: f64,
    pub s64: f64,
    pub s24: f64,
    pub k2: f64,
    pub k32: f64,
    pub c_q: f64,
    pub c_rho: f64,
    pub c_rho4: f64,
    pub c_q2: f64,
    pub c_rho2: f64,
    pub c_rho3: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    /// `κ_n` for `n = 1..=kappa_orders`
    pub kappa_n: Vec<f64>,
    /// fitted `K` in `κ_n ≈ K√n` over `n ∈ [50, 200]`
    pub kappa_sqrt_coefficient: f64,
    pub n_max: usize,
}

pub fn constants_table(lambda: f64, kappa_orders: usize) -> Result<ConstantsTable> {
    check_lambda(lambda)?;
    let b = base_constants();
    let kappa_n = (1..=kappa_orders).map(|n| kappa(n, lambda)).collect::<Result<Vec<_>>>()?;
    Ok(ConstantsTable {
        lambda,
        c_inf: b.c_inf,
        c6: b.c6,
        c_r: c_r_estimate(),
        c_m: b.c_m,
        s6: b.s6,
        s65: b.s65,
        s64: b.s64,
        s24: b.s24,
        k2: b.k2,
        k32: b.k32,
        c_q: b.c_q,
        c_rho: b.c_rho,
        c_rho4: b.c_rho4,
        c_q2: b.c_q2,
        c_rho2: b.c_rho2,
        c_rho3: b.c_rho3,
        kappa1: kappa1_log(lambda.ln()),
        kappa2: b.kappa2,
        kappa3: b.kappa3,
        kappa4: b.kappa4,
        kappa_n,
        kappa_sqrt_coefficient: kappa_sqrt_fit(50, 200),
        n_max: N_MAX,
    })
}

// ---------------------------------------------------------------------------
// Inequality suite

#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// largest lhs/rhs ratio seen
    pub worst_ratio: f64,
    pub counterexample: Option<String>,
}

impl InequalityCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), samples: 0, violations: 0, worst_ratio: 0.0, counterexample: None }
    }

    fn record(&mut self, lhs: f64, rhs: f64, ctx: impl FnOnce() -> String) {
        self.samples += 1;
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
        }
        // relative roundoff slack only
        if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
            self.violations += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(format!("lhs={lhs:e} rhs={rhs:e} {}", ctx()));
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub seed: u64,
    pub checks: Vec<InequalityCheck>,
    pub pass: bool,
}

/// Random vector with log-uniform magnitude in `[1e-3, 1e3]`, uniform direction.
pub fn random_momentum<R: Rng>(rng: &mut R) -> Vec3 {
    let mag = 10f64.powf(rng.random_range(-3.0..3.0));
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    [mag * r * phi.cos(), mag * r * phi.sin(), mag * z]
}

fn delta(s: f64) -> f64 {
    if s < 1.0 { s } else { s - 1.0 }
}

/// `∫_{|u|≤Λ} du / (E(2u) E(u)²)` by quadrature.
pub fn log_integral(lambda: f64) -> Result<f64> {
    let f = |u: f64| 4.0 * PI * u * u / ((1.0 + 4.0 * u * u).sqrt() * (1.0 + u * u));
    quad::integrate(&f, 0.0, lambda, 1e-12)
}

/// The same integral in closed form,
/// `4π(½ argsh(2Λ) − (1/√3) argth(√3Λ/√(1+4Λ²)))`.
pub fn log_integral_closed(lambda: f64) -> f64 {
    4.0 * PI * (0.5 * (2.0 * lambda).asinh() - (3f64.sqrt() * lambda / (1.0 + 4.0 * lambda * lambda).sqrt()).atanh() / 3f64.sqrt())
}

/// Random-sampled verification of the pointwise inequalities.
pub fn inequality_suite(sample_count: usize, seed: u64) -> Result<InequalityReport> {
    if sample_count == 0 {
        return Err(BdfError::InvalidArgument("sample_count must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exps = [0.5, 1.0, 2.0, 3.0];
    let mut sum_checks: Vec<InequalityCheck> =
        exps.iter().map(|s| InequalityCheck::new(&format!("peetre_sum s={s}"))).collect();
    let mut prod_checks: Vec<InequalityCheck> = exps
        .iter()
        .chain([-0.5, -1.0, -2.0, -3.0].iter())
        .map(|s| InequalityCheck::new(&format!("peetre_prod s={s}")))
        .collect();
    let prod_exps: Vec<f64> = exps.iter().chain([-0.5, -1.0, -2.0, -3.0].iter()).copied().collect();
    let mut fraction = InequalityCheck::new("estim_fraction");
    let mut estim_m = InequalityCheck::new("estim_M");
    let mut trick = InequalityCheck::new("trick");

    for _ in 0..sample_count {
        let xi = random_momentum(&mut rng);
        let eta = random_momentum(&mut rng);
        let (e_xi, e_diff, e_eta) = (energy_scale(xi), energy_scale(sub(xi, eta)), energy_scale(eta));
        for (c, &s) in sum_checks.iter_mut().zip(&exps) {
            c.record(e_xi.powf(s), 2f64.powf(delta(s)) * (e_diff.powf(s) + e_eta.powf(s)), || {
                format!("xi={xi:?} eta={eta:?}")
            });
        }
        for (c, &s) in prod_checks.iter_mut().zip(&prod_exps) {
            c.record(e_xi.powf(s), 2f64.powf(s.abs()) * e_diff.powf(s) * e_eta.powf(s.abs()), || {
                format!("xi={xi:?} eta={eta:?}")
            });
        }

        let (p, q) = (xi, eta);
        let pq_sum = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
        let ep = energy_scale(p);
        fraction.record(energy_scale(pq_sum) / (ep * ep * e_diff * e_diff), 2.0, || format!("p={p:?} q={q:?}"));

        let mid = [0.5 * pq_sum[0], 0.5 * pq_sum[1], 0.5 * pq_sum[2]];
        let bound = (norm_sqr(sub(p, q)) / (2.0 * (1.0 + norm_sqr(mid)))).min(2.0);
        estim_m.record(pair_trace(p, q), bound, || format!("p={p:?} q={q:?}"));

        let h = 10f64.powf(rng.random_range(-3.0..3.0)) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let eq = energy_scale(q);
        let lhs = 1.0 / ((ep * ep + h * h).sqrt() * (eq * eq + h * h).sqrt());
        trick.record(lhs, 2.0 / (energy_scale(pq_sum) * (1.0 + h * h).sqrt()), || format!("p={p:?} q={q:?} eta={h}"));
    }

    let mut log_check = InequalityCheck::new("estim_Log");
    for &lam in &[3.0, 10.0, 100.0] {
        let v = log_integral(lam)?;
        log_check.record(v, 2.0 * PI * f64::ln(lam), || format!("Lambda={lam}"));
    }

    let mut checks = sum_checks;
    checks.append(&mut prod_checks);
    checks.extend([fraction, estim_m, trick, log_check]);
    let pass = checks.iter().all(|c| c.violations == 0);
    Ok(InequalityReport { seed, checks, pass })
}

/// `‖R_Q‖_R ≤ C_R ‖Q‖_Q` on random Hermitian lattice kernels whose entries
/// carry random power-law weights in `E(p−q)` and `E(p+q)`.
pub fn exchange_bound_check(lattice: &std::sync::Arc<crate::lattice::Lattice>, count: usize, seed: u64) -> InequalityCheck {
    use crate::kernel::{exchange_kernel, q_norm, r_norm};
    use crate::lattice::add;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = InequalityCheck::new("exchange_bound");
    let cr = c_r();
    let modes = lattice.modes().to_vec();
    for i in 0..count {
        let s1: f64 = rng.random_range(-1.0..3.0);
        let s2: f64 = rng.random_range(-1.0..3.0);
        let mut q = crate::sample::random_hermitian(lattice, &mut rng, 1.0);
        for a in 0..modes.len() {
            for b in 0..modes.len() {
                let w = energy_scale(sub(modes[a], modes[b])).powf(-s1) * energy_scale(add(modes[a], modes[b])).powf(-s2);
                let blk = q.matrix_block(a, b).scale_re(w);
                q.set_matrix_block(a, b, &blk);
            }
        }
        let lhs = r_norm(&exchange_kernel(&q));
        let rhs = cr * q_norm(&q);
        check.record(lhs, rhs, || format!("sample {i} (s1={s1:.3}, s2={s2:.3})"));
    }
    check
}
