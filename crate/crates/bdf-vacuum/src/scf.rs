//! Self-consistent field iteration for the dressed vacuum `P = χ_(−∞,0)(D_Q)`.

use crate::certificate::{self, Certificate};
use crate::dirac::p0_projector;
use crate::energy::{bdf_energy_with_exchange, gap_lower_bound, mean_field_with_exchange, EnergyBreakdown};
use crate::error::{BdfError, Result};
use crate::kernel::{density_of, exchange_kernel, p_trace, vacuum_charge, x_norm, KernelOperator, VacuumCharge};
use crate::lattice::{build_lattice, c_norm, coulomb_product, source_density, DensityField, Lattice, LatticeSpec, SourceProfile};
use crate::response::{continuum_response_on, lattice_response};
use crate::sample;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Consecutive growing increments that count as divergence.
pub const DIVERGENCE_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Plain,
    Preconditioned,
}

/// Response function used in the density mixing `(1 + αB(k))⁻¹`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// continuum `B_Λ(|k|)`
    #[default]
    Continuum,
    /// the lattice sum `B_lat(k)`
    Lattice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub lattice: LatticeSpec,
    pub source: SourceProfile,
    pub scheme: Scheme,
    pub exchange: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub gap_tol: f64,
    #[serde(default)]
    pub preconditioner: Preconditioner,
}

impl SolverConfig {
    pub fn new(alpha: f64, lattice: LatticeSpec, source: SourceProfile) -> Self {
        Self {
            alpha,
            lattice,
            source,
            scheme: Scheme::Preconditioned,
            exchange: true,
            tol: 1e-8,
            max_iter: 200,
            gap_tol: 1e-6,
            preconditioner: Preconditioner::Continuum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(BdfError::InvalidArgument(format!("α must be finite and ≥ 0, got {}", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(BdfError::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.gap_tol >= 0.0) {
            return Err(BdfError::InvalidArgument(format!("gap_tol must be ≥ 0, got {}", self.gap_tol)));
        }
        if self.max_iter == 0 {
            return Err(BdfError::InvalidArgument("max_iter must be ≥ 1".into()));
        }
        self.lattice.validate()
    }
}

/// Iterate `(Q_j, ρ′_j)` plus the cached exchange kernel `R_{Q_j}`.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub q: KernelOperator,
    pub rho_prime: DensityField,
    r_q: Option<KernelOperator>,
}

impl SolverState {
    pub fn new(q: KernelOperator, rho_prime: DensityField) -> Result<Self> {
        if q.lattice().as_ref() != rho_prime.lattice().as_ref() {
            return Err(BdfError::LatticeMismatch);
        }
        Ok(Self { q, rho_prime, r_q: None })
    }
}

#[derive(Clone, Debug)]
pub struct SpectralProjector {
    pub projector: KernelOperator,
    pub min_abs_eig: f64,
}

/// `χ_(−∞,0)(H)` from a full eigendecomposition; errors when an eigenvalue
/// lies within `gap_tol` of zero.
pub fn negative_spectral_projector(h: &KernelOperator, gap_tol: f64) -> Result<SpectralProjector> {
    let (vals, vecs) = h.hermitian_eigen()?;
    let min_abs_eig = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_abs_eig < gap_tol {
        return Err(BdfError::GapCollapse { min_abs_eig, gap_tol });
    }
    let neg = vals.iter().take_while(|v| **v < 0.0).count();
    let u = vecs.subcols(0, neg);
    let projector = KernelOperator::from_matrix(h.lattice(), u * u.adjoint())?;
    Ok(SpectralProjector { projector, min_abs_eig })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub x_increment: f64,
    pub energy: EnergyBreakdown,
    /// `str_{P⁰}(Q_j)`
    pub charge: f64,
    pub min_abs_eig: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIterExceeded,
    Diverged,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    /// `‖[P, D_Q]‖_F`
    pub commutator: f64,
    pub commutator_ok: bool,
    pub charge: VacuumCharge,
    /// `‖Q‖` (operator norm); charge must vanish when below 1
    pub operator_norm: f64,
    pub charge_ok: bool,
    /// `1 − α(2√π‖ρ′‖_C + √2 C_R‖Q‖_Q)`
    pub gap_bound: f64,
    pub d: Option<f64>,
    /// `α d π/4 ≤ 1`
    pub d_certificate: bool,
    pub optimality_samples: usize,
    pub min_delta_energy: f64,
    pub optimality_ok: bool,
    /// `E(Q) ≥ −(α/2) D(n,n)`
    pub lower_bound_ok: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverReport {
    pub config: SolverConfig,
    pub verdict: Verdict,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
    /// geometric rate fitted to the increments
    pub rate: Option<f64>,
    pub energy: EnergyBreakdown,
    pub charge: VacuumCharge,
    /// `‖n‖_C`
    pub source_c_norm: f64,
    /// `D(n,n)`
    pub source_self_energy: f64,
    pub certificate: Option<Certificate>,
    pub verification: Option<Verification>,
    #[serde(skip)]
    pub q: KernelOperator,
    #[serde(skip)]
    pub rho_prime: DensityField,
}

/// Prepared solver: lattice, source, free operators and mixing weights.
pub struct Solver {
    config: SolverConfig,
    lattice: Arc<Lattice>,
    source: DensityField,
    p0: KernelOperator,
    mixing: Vec<f64>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let lattice = build_lattice(config.lattice)?;
        let source = source_density(&lattice, &config.source)?;
        Self::with_source(config, lattice, source)
    }

    /// Solver with an explicit source density on a prebuilt lattice.
    pub fn with_source(config: SolverConfig, lattice: Arc<Lattice>, source: DensityField) -> Result<Self> {
        config.validate()?;
        if source.lattice().as_ref() != lattice.as_ref() {
            return Err(BdfError::LatticeMismatch);
        }
        let b = match config.preconditioner {
            Preconditioner::Continuum => continuum_response_on(&lattice, lattice.cutoff().max(f64::MIN_POSITIVE))?,
            Preconditioner::Lattice => lattice_response(&lattice),
        };
        let mixing = b.iter().map(|&bk| 1.0 / (1.0 + config.alpha * bk)).collect();
        Ok(Self { p0: p0_projector(&lattice), config, lattice, source, mixing })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn source(&self) -> &DensityField {
        &self.source
    }

    /// `(Q₀, ρ′₀) = (0, −n)`.
    pub fn initial_state(&self) -> SolverState {
        SolverState { q: KernelOperator::zeros(&self.lattice), rho_prime: self.source.scaled(-1.0), r_q: None }
    }

    fn exchange_of(&self, q: &KernelOperator) -> Option<KernelOperator> {
        if self.config.exchange && self.config.alpha != 0.0 {
            Some(exchange_kernel(q))
        } else {
            None
        }
    }

    fn ensure_exchange(&self, state: &mut SolverState) {
        if state.r_q.is_none() {
            state.r_q = self.exchange_of(&state.q);
        }
    }

    /// `Q = χ_(−∞,0)(D⁰ + αV[ρ′] − αR_{Q_j}) − P⁰` and its exchange kernel.
    fn project(&self, state: &mut SolverState, rho_prime: &DensityField) -> Result<(KernelOperator, f64)> {
        self.ensure_exchange(state);
        let d = mean_field_with_exchange(state.r_q.as_ref(), rho_prime, self.config.alpha)?;
        let sp = negative_spectral_projector(&d, self.config.gap_tol)?;
        Ok((sp.projector.sub(&self.p0)?, sp.min_abs_eig))
    }

    /// One step of the plain scheme: the potential is built from `ρ_{Q_j} − n`.
    pub fn iterate_plain(&self, state: &mut SolverState) -> Result<(SolverState, f64)> {
        let rho_prime = density_of(&state.q).sub(&self.source)?;
        let (q, gap) = self.project(state, &rho_prime)?;
        let rho_prime = density_of(&q).sub(&self.source)?;
        let r_q = self.exchange_of(&q);
        Ok((SolverState { q, rho_prime, r_q }, gap))
    }

    /// One step of the preconditioned scheme: the potential is built from the
    /// independent `ρ′_j`, which is then mixed with `(1 + αB)⁻¹`.
    pub fn iterate_preconditioned(&self, state: &mut SolverState) -> Result<(SolverState, f64)> {
        let old = state.rho_prime.clone();
        let (q, gap) = self.project(state, &old)?;
        let target = density_of(&q).sub(&self.source)?;
        let values = target
            .values()
            .iter()
            .zip(old.values())
            .zip(&self.mixing)
            .map(|((t, o), &l)| t * l + o * (1.0 - l))
            .collect();
        let rho_prime = DensityField::from_values(&self.lattice, values)?;
        let r_q = self.exchange_of(&q);
        Ok((SolverState { q, rho_prime, r_q }, gap))
    }

    pub fn step(&self, state: &mut SolverState) -> Result<(SolverState, f64)> {
        match self.config.scheme {
            Scheme::Plain => self.iterate_plain(state),
            Scheme::Preconditioned => self.iterate_preconditioned(state),
        }
    }

    fn energy_of(&self, state: &SolverState) -> Result<EnergyBreakdown> {
        bdf_energy_with_exchange(&state.q, state.r_q.as_ref(), &self.source, self.config.alpha)
    }

    /// Iterate from `initial`; `observe` sees every accepted iterate.
    pub fn run_with<F>(&self, initial: SolverState, mut observe: F) -> Result<SolverReport>
    where
        F: FnMut(usize, &SolverState) -> Result<()>,
    {
        let mut state = initial;
        let mut records = Vec::new();
        let mut verdict = Verdict::MaxIterExceeded;
        let mut growing = 0;
        for iter in 1..=self.config.max_iter {
            let (next, min_abs_eig) = self.step(&mut state)?;
            let x_increment = x_norm(&next.q.sub(&state.q)?, &next.rho_prime.sub(&state.rho_prime)?);
            let energy = self.energy_of(&next)?;
            let charge = p_trace(&next.q, &self.p0)?;
            log::debug!("iter {iter}: increment {x_increment:.3e}, energy {:.12e}", energy.total);
            if let Some(prev) = records.last().map(|r: &IterationRecord| r.x_increment) {
                growing = if x_increment > prev { growing + 1 } else { 0 };
            }
            records.push(IterationRecord { iter, x_increment, energy, charge, min_abs_eig });
            state = next;
            observe(iter, &state)?;
            if x_increment <= self.config.tol {
                verdict = Verdict::Converged;
                break;
            }
            if growing >= DIVERGENCE_WINDOW || !x_increment.is_finite() {
                verdict = Verdict::Diverged;
                break;
            }
        }
        self.ensure_exchange(&mut state);
        let energy = self.energy_of(&state)?;
        let charge = vacuum_charge(&state.q, &self.p0)?;
        let source_c_norm = c_norm(&self.source);
        let source_self_energy = coulomb_product(&self.source, &self.source)?;
        let certificate = certificate_for(&self.config, source_c_norm).ok();
        Ok(SolverReport {
            config: self.config.clone(),
            verdict,
            converged: verdict == Verdict::Converged,
            rate: fit_rate(&records),
            records,
            energy,
            charge,
            source_c_norm,
            source_self_energy,
            certificate,
            verification: None,
            q: state.q,
            rho_prime: state.rho_prime,
        })
    }

    pub fn run(&self, initial: SolverState) -> Result<SolverReport> {
        self.run_with(initial, |_, _| Ok(()))
    }

    /// Post-solution diagnostics.
    pub fn verify(&self, report: &SolverReport, samples: usize, seed: u64) -> Result<Verification> {
        let alpha = self.config.alpha;
        let q = &report.q;
        let p = q.add(&self.p0)?;
        let rho_prime = density_of(q).sub(&self.source)?;
        let r_q = self.exchange_of(q);
        let d_q = mean_field_with_exchange(r_q.as_ref(), &rho_prime, alpha)?;
        let commutator = p.compose(&d_q)?.sub(&d_q.compose(&p)?)?.hs_norm();
        let commutator_ok = commutator <= 10.0 * self.config.tol;

        let charge = vacuum_charge(q, &self.p0)?;
        let operator_norm = q.operator_norm()?;
        let charge_ok = charge.integral && (operator_norm >= 1.0 || charge.integer == 0);

        let gap_bound = gap_lower_bound(q, &rho_prime, alpha);
        let d = (gap_bound > 0.0).then(|| 1.0 / gap_bound);
        let d_certificate = d.is_some_and(|d| alpha * d * PI / 4.0 <= 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_delta_energy = f64::INFINITY;
        for _ in 0..samples {
            let w = sample::random_unit_in_range(&p, false, &mut rng);
            let v = sample::random_unit_in_range(&p, true, &mut rng);
            let t: f64 = 1.0 - rng.random::<f64>();
            let delta = self.energy_change(&d_q, &w, &v, t)?;
            min_delta_energy = min_delta_energy.min(delta);
        }
        if samples == 0 {
            min_delta_energy = 0.0;
        }
        let optimality_ok = min_delta_energy >= -10.0 * self.config.tol;

        let bound = -0.5 * alpha * coulomb_product(&self.source, &self.source)?;
        let lower_bound_ok = report.energy.total >= bound - 10.0 * self.config.tol;
        Ok(Verification {
            commutator,
            commutator_ok,
            charge,
            operator_norm,
            charge_ok,
            gap_bound,
            d,
            d_certificate,
            optimality_samples: samples,
            min_delta_energy,
            optimality_ok,
            lower_bound_ok,
            pass: commutator_ok && charge_ok && optimality_ok && lower_bound_ok,
        })
    }

    /// `E(Q+γ) − E(Q)` for `γ = t(|w⟩⟨w| − |v⟩⟨v|)`, through the exact
    /// expansion `tr(D_Qγ) + (α/2)D(ρ_γ,ρ_γ) − (α/2)X(γ,γ)`.
    fn energy_change(&self, d_q: &KernelOperator, w: &[Complex64], v: &[Complex64], t: f64) -> Result<f64> {
        let alpha = self.config.alpha;
        let lat = &self.lattice;
        let gamma = sample::rank_one(lat, w).sub(&sample::rank_one(lat, v))?.scale(t);
        let linear = t * (expectation(d_q, w) - expectation(d_q, v));
        let rho = density_of(&gamma);
        let mut quad = 0.5 * alpha * coulomb_product(&rho, &rho)?;
        if self.config.exchange {
            quad -= 0.5 * alpha * gamma.frobenius_inner(&exchange_kernel(&gamma))?.re;
        }
        Ok(linear + quad)
    }
}

fn expectation(op: &KernelOperator, x: &[Complex64]) -> f64 {
    let m = op.matrix();
    let mut s = Complex64::new(0.0, 0.0);
    for (i, xi) in x.iter().enumerate() {
        let mut row = Complex64::new(0.0, 0.0);
        for (j, xj) in x.iter().enumerate() {
            row += m[(i, j)] * xj;
        }
        s += xi.conj() * row;
    }
    s.re
}

/// `exp` of the least-squares slope of `log(increment)` against the iteration
/// index, skipping the first step and increments at roundoff level.
pub fn fit_rate(records: &[IterationRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .skip(1)
        .filter(|r| r.x_increment > 1e-14 && r.x_increment.is_finite())
        .map(|r| (r.iter as f64, r.x_increment.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

/// Certificate with `b = 2√π α ‖n‖_C`, when the cutoff allows one.
pub fn certificate_for(config: &SolverConfig, source_c_norm: f64) -> Result<Certificate> {
    let b = 2.0 * PI.sqrt() * config.alpha * source_c_norm;
    certificate::check_conditions(config.alpha, config.lattice.cutoff, source_c_norm, b)
}

/// Solve from `(0, −n)` and verify on convergence.
pub fn solve(config: &SolverConfig) -> Result<SolverReport> {
    let solver = Solver::new(config.clone())?;
    let mut report = solver.run(solver.initial_state())?;
    if report.converged {
        report.verification = Some(solver.verify(&report, 100, 0)?);
    }
    Ok(report)
}
