//! The BDF energy, the mean-field operator `D_Q` and the lower-bound check.

use crate::certificate;
use crate::dirac::{free_operator, lambda_projectors, p0_projector};
use crate::error::{BdfError, Result};
use crate::kernel::{density_of, exchange_kernel, potential_operator, q_norm, KernelOperator};
use crate::lattice::{c_norm, coulomb_product, energy_scale, DensityField};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Spectral slack for `−P⁰ ≤ Γ ≤ 1 − P⁰`.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// `−α D(ρ_Γ, n)`
    pub direct_external: f64,
    /// `(α/2) D(ρ_Γ, ρ_Γ)`
    pub direct_self: f64,
    /// `−(α/2) ∬ |Γ(x,y)|²/|x−y|`
    pub exchange: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(kinetic: f64, direct_external: f64, direct_self: f64, exchange: f64) -> Self {
        Self { kinetic, direct_external, direct_self, exchange, total: kinetic + direct_external + direct_self + exchange }
    }

    pub fn direct(&self) -> f64 {
        self.direct_external + self.direct_self
    }
}

/// `tr(|D⁰|Γ₊₊) − tr(|D⁰|Γ₋₋)`, evaluated on the diagonal blocks.
pub fn kinetic_term(gamma: &KernelOperator) -> f64 {
    let lat = gamma.lattice();
    let mut s = 0.0;
    for (a, &p) in lat.modes().iter().enumerate() {
        let (plus, minus) = lambda_projectors(p);
        let g = gamma.matrix_block(a, a);
        let gpp = plus * g * plus;
        let gmm = minus * g * minus;
        s += energy_scale(p) * (gpp.trace().re - gmm.trace().re);
    }
    s
}

/// Energy with a precomputed exchange kernel `R_Γ`.
pub fn bdf_energy_with_exchange(
    gamma: &KernelOperator,
    r_gamma: Option<&KernelOperator>,
    n: &DensityField,
    alpha: f64,
) -> Result<EnergyBreakdown> {
    let rho = density_of(gamma);
    rho.check_same(n)?;
    let kinetic = kinetic_term(gamma);
    if alpha == 0.0 {
        return Ok(EnergyBreakdown::from_parts(kinetic, 0.0, 0.0, 0.0));
    }
    let direct_external = -alpha * coulomb_product(&rho, n)?;
    let direct_self = 0.5 * alpha * coulomb_product(&rho, &rho)?;
    let exchange = match r_gamma {
        Some(r) => -0.5 * alpha * gamma.frobenius_inner(r)?.re,
        None => 0.0,
    };
    Ok(EnergyBreakdown::from_parts(kinetic, direct_external, direct_self, exchange))
}

/// `E(Γ) = tr(D⁰Γ) − αD(ρ_Γ,n) + (α/2)D(ρ_Γ,ρ_Γ) − (α/2)∬|Γ(x,y)|²/|x−y|`.
pub fn bdf_energy(gamma: &KernelOperator, n: &DensityField, alpha: f64) -> Result<EnergyBreakdown> {
    check_alpha(alpha)?;
    let r = exchange_kernel(gamma);
    bdf_energy_with_exchange(gamma, Some(&r), n, alpha)
}

/// The reduced functional: `E` without the exchange term.
pub fn reduced_energy(gamma: &KernelOperator, n: &DensityField, alpha: f64) -> Result<EnergyBreakdown> {
    check_alpha(alpha)?;
    bdf_energy_with_exchange(gamma, None, n, alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(BdfError::InvalidArgument(format!("α must be finite and ≥ 0, got {alpha}")))
    }
}

/// `D⁰ + αV[ρ′] − αR`, with `R` the exchange kernel of `Q` when given.
pub fn mean_field_with_exchange(
    r_q: Option<&KernelOperator>,
    rho_prime: &DensityField,
    alpha: f64,
) -> Result<KernelOperator> {
    let lat = rho_prime.lattice();
    let mut d = free_operator(lat);
    if alpha == 0.0 {
        return Ok(d);
    }
    d = d.add(&potential_operator(rho_prime).scale(alpha))?;
    if let Some(r) = r_q {
        d = d.sub(&r.scale(alpha))?;
    }
    Ok(d)
}

/// `D_Q = D⁰ + α ρ′∗|·|⁻¹ − α Q(x,y)/|x−y|`.
pub fn mean_field_operator(q: &KernelOperator, rho_prime: &DensityField, alpha: f64) -> Result<KernelOperator> {
    q.lattice().as_ref().eq(rho_prime.lattice().as_ref()).then_some(()).ok_or(BdfError::LatticeMismatch)?;
    if alpha == 0.0 {
        return Ok(free_operator(q.lattice()));
    }
    mean_field_with_exchange(Some(&exchange_kernel(q)), rho_prime, alpha)
}

/// `1 − α(2√π‖ρ′‖_C + √2 C_R ‖Q‖_Q)`; when positive, `|D_Q| ≥` this times `|D⁰|`.
pub fn gap_lower_bound(q: &KernelOperator, rho_prime: &DensityField, alpha: f64) -> f64 {
    1.0 - alpha * (2.0 * PI.sqrt() * c_norm(rho_prime) + 2f64.sqrt() * certificate::c_r() * q_norm(q))
}

/// Residual of the exact second-order expansion of `E` around `Q`:
/// `E(Q+γ) − [tr(D_Qγ) + (α/2)D(ρ_γ,ρ_γ) − (α/2)X(γ,γ) + E(Q)]`.
pub fn expand_around(q: &KernelOperator, gamma: &KernelOperator, n: &DensityField, alpha: f64) -> Result<f64> {
    let e_q = bdf_energy(q, n, alpha)?.total;
    let e_sum = bdf_energy(&q.add(gamma)?, n, alpha)?.total;
    let rho_prime = density_of(q).sub(n)?;
    let d_q = mean_field_operator(q, &rho_prime, alpha)?;
    let rho_g = density_of(gamma);
    let linear = d_q.compose(gamma)?.trace().re;
    let quad = 0.5 * alpha * coulomb_product(&rho_g, &rho_g)?
        - 0.5 * alpha * gamma.frobenius_inner(&exchange_kernel(gamma))?.re;
    Ok((e_sum - (linear + quad + e_q)).abs())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Admissibility {
    /// spectrum of `P⁰ + Γ`
    pub min_eig: f64,
    pub max_eig: f64,
    pub admissible: bool,
}

/// `−P⁰ ≤ Γ ≤ 1 − P⁰` via the spectrum of `P⁰ + Γ`.
pub fn admissibility(gamma: &KernelOperator) -> Result<Admissibility> {
    let eig = p0_projector(gamma.lattice()).add(gamma)?.hermitian_eigenvalues()?;
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Admissibility {
        min_eig,
        max_eig,
        admissible: min_eig >= -ADMISSIBILITY_TOL && max_eig <= 1.0 + ADMISSIBILITY_TOL,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LowerBoundVerdict {
    pub admissibility: Admissibility,
    pub energy: f64,
    /// `−(α/2) D(n,n)`
    pub bound: f64,
    pub holds: bool,
}

/// `E(Γ) ≥ −(α/2) D(n,n)` for admissible `Γ`, `α ≤ 4/π`.
pub fn lower_bound_check(gamma: &KernelOperator, n: &DensityField, alpha: f64, tol: f64) -> Result<LowerBoundVerdict> {
    if alpha > 4.0 / PI {
        return Err(BdfError::InvalidArgument(format!("the lower bound needs α ≤ 4/π, got {alpha}")));
    }
    let admissibility = admissibility(gamma)?;
    let energy = bdf_energy(gamma, n, alpha)?.total;
    let bound = -0.5 * alpha * coulomb_product(n, n)?;
    Ok(LowerBoundVerdict { admissibility, energy, bound, holds: energy >= bound - tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::exchange_pairing;
    use crate::lattice::{build_lattice, source_density, Lattice, LatticeSpec, SourceProfile};
    use crate::sample;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn small() -> Arc<Lattice> {
        build_lattice(LatticeSpec::new(4, 1.0, 1.5)).unwrap()
    }

    fn gaussian(lat: &Arc<Lattice>) -> DensityField {
        source_density(lat, &SourceProfile::Gaussian { charge: 1.0, width: 1.0 }).unwrap()
    }

    /// Normalized eigenvector of `D⁰(p)` in mode `a` with the sign `s`.
    fn eigenmode(lat: &Arc<Lattice>, a: usize, positive: bool) -> Vec<Complex64> {
        let (plus, minus) = lambda_projectors(lat.modes()[a]);
        let proj = if positive { plus } else { minus };
        let mut col = [Complex64::new(0.0, 0.0); 4];
        for i in 0..4 {
            col[i] = proj[(i, 0)] + proj[(i, 2)];
        }
        let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut v = vec![Complex64::new(0.0, 0.0); lat.dim()];
        for i in 0..4 {
            v[4 * a + i] = col[i] / norm;
        }
        v
    }

    #[test]
    fn kinetic_examples() {
        let lat = small();
        assert_eq!(kinetic_term(&KernelOperator::zeros(&lat)), 0.0);
        for a in [0, 3, lat.num_modes() - 1] {
            let e = energy_scale(lat.modes()[a]);
            let w = sample::rank_one(&lat, &eigenmode(&lat, a, true));
            assert!((kinetic_term(&w) - e).abs() < 1e-12);
            let v = sample::rank_one(&lat, &eigenmode(&lat, a, false)).scale(-1.0);
            assert!((kinetic_term(&v) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn kinetic_equals_trace_with_d0() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample::random_hermitian(&lat, &mut rng, 1.0);
        let t = free_operator(&lat).compose(&g).unwrap().trace().re;
        assert!((kinetic_term(&g) - t).abs() < 1e-12);
    }

    #[test]
    fn energy_trivial_cases() {
        let lat = small();
        let n = gaussian(&lat);
        let z = bdf_energy(&KernelOperator::zeros(&lat), &n, 0.3).unwrap();
        assert_eq!(z.total, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = sample::random_hermitian(&lat, &mut rng, 1.0);
        let e = bdf_energy(&g, &n, 0.0).unwrap();
        assert_eq!(e.total, kinetic_term(&g));
        let e = bdf_energy(&g, &n, 0.1).unwrap();
        assert!((e.total - (e.kinetic + e.direct_external + e.direct_self + e.exchange)).abs() < 1e-14);
        assert!(bdf_energy(&g, &n, -1.0).is_err());
    }

    #[test]
    fn energy_nonnegative_without_source() {
        let lat = small();
        let n = DensityField::zeros(&lat);
        let p0 = p0_projector(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..20 {
            let g = sample::random_admissible(&p0, &mut rng, 0.2 + 0.2 * i as f64).unwrap();
            assert!(admissibility(&g).unwrap().admissible);
            for alpha in [0.1, 0.5, 4.0 / PI] {
                assert!(bdf_energy(&g, &n, alpha).unwrap().total >= -1e-12);
            }
        }
    }

    #[test]
    fn lower_bound_on_admissible_states() {
        let lat = small();
        let n = gaussian(&lat).scaled(3.0);
        let p0 = p0_projector(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = lower_bound_check(&KernelOperator::zeros(&lat), &n, 1.0, 0.0).unwrap();
        assert!(v.holds && v.bound < 0.0);
        for _ in 0..20 {
            let g = sample::random_admissible(&p0, &mut rng, 1.0).unwrap();
            let v = lower_bound_check(&g, &n, 1.2, 1e-12).unwrap();
            assert!(v.admissibility.admissible && v.holds);
        }
        assert!(lower_bound_check(&KernelOperator::zeros(&lat), &n, 1.3, 0.0).is_err());
    }

    #[test]
    fn inadmissible_state_reported() {
        let lat = small();
        let a = admissibility(&KernelOperator::identity(&lat)).unwrap();
        assert!(!a.admissible && a.max_eig > 1.5);
    }

    #[test]
    fn mean_field_examples() {
        let lat = small();
        let n = gaussian(&lat);
        let q = KernelOperator::zeros(&lat);
        let d = mean_field_operator(&q, &n, 0.0).unwrap();
        assert_eq!(d.sub(&free_operator(&lat)).unwrap().hs_norm(), 0.0);
        let minus_n = n.scaled(-1.0);
        let d = mean_field_operator(&q, &minus_n, 0.4).unwrap();
        let furry = free_operator(&lat).sub(&potential_operator(&n).scale(0.4)).unwrap();
        assert!(d.sub(&furry).unwrap().hs_norm() < 1e-14);
        assert!(d.hermitian_defect() < 1e-14);
    }

    #[test]
    fn gap_estimate_holds() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = sample::random_real_density(&lat, &mut rng, 0.5);
        for s in [0.1, 0.3] {
            let q = sample::random_hermitian(&lat, &mut rng, s);
            for alpha in [0.05, 0.2] {
                let g = gap_lower_bound(&q, &rho, alpha);
                if g <= 0.0 {
                    continue;
                }
                let eig = mean_field_operator(&q, &rho, alpha).unwrap().hermitian_eigenvalues().unwrap();
                let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                assert!(min >= g - 1e-12, "min |eig| {min} below {g}");
            }
        }
    }

    #[test]
    fn expansion_identity_exact() {
        let lat = small();
        let n = gaussian(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let q = sample::random_hermitian(&lat, &mut rng, 0.7);
            let g = sample::random_hermitian(&lat, &mut rng, 0.7);
            let alpha = 0.3;
            let e_q = bdf_energy(&q, &n, alpha).unwrap().total;
            assert!(expand_around(&q, &g, &n, alpha).unwrap() <= 1e-10 * (1.0 + e_q.abs()));
            assert!(expand_around(&q, &KernelOperator::zeros(&lat), &n, alpha).unwrap() <= 1e-12 * (1.0 + e_q.abs()));
            assert!(expand_around(&q, &q.scale(-1.0), &n, alpha).unwrap() <= 1e-10 * (1.0 + e_q.abs()));
        }
    }

    #[test]
    fn directional_derivative_matches_mean_field() {
        let lat = small();
        let n = gaussian(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = sample::random_hermitian(&lat, &mut rng, 0.5);
        let g = sample::random_hermitian(&lat, &mut rng, 0.5);
        let alpha = 0.4;
        let rho_prime = density_of(&q).sub(&n).unwrap();
        let slope = mean_field_operator(&q, &rho_prime, alpha).unwrap().compose(&g).unwrap().trace().re;
        let e0 = bdf_energy(&q, &n, alpha).unwrap().total;
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let e1 = bdf_energy(&q.add(&g.scale(h)).unwrap(), &n, alpha).unwrap().total;
            let err = ((e1 - e0) / h - slope).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-2 * (1.0 + slope.abs()));
    }

    #[test]
    fn reduced_energy_convex_on_segments() {
        let lat = small();
        let n = gaussian(&lat);
        let p0 = p0_projector(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let a = sample::random_admissible(&p0, &mut rng, 1.0).unwrap();
            let b = sample::random_admissible(&p0, &mut rng, 1.0).unwrap();
            let mid = a.add(&b).unwrap().scale(0.5);
            let ea = reduced_energy(&a, &n, 0.8).unwrap().total;
            let eb = reduced_energy(&b, &n, 0.8).unwrap().total;
            let em = reduced_energy(&mid, &n, 0.8).unwrap().total;
            assert!(em <= 0.5 * (ea + eb) + 1e-12);
        }
    }

    #[test]
    fn charge_conjugation_symmetry_of_energy() {
        let lat = small();
        let n = gaussian(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = sample::random_hermitian(&lat, &mut rng, 0.5);
        let cq = crate::dirac::charge_conjugate(&q).scale(-1.0);
        let e1 = bdf_energy(&q, &n, 0.3).unwrap();
        let e2 = bdf_energy(&cq, &n.scaled(-1.0), 0.3).unwrap();
        assert!((e1.total - e2.total).abs() < 1e-12 * (1.0 + e1.total.abs()));
    }

    #[test]
    fn exchange_term_matches_pairing() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = sample::random_hermitian(&lat, &mut rng, 1.0);
        let e = bdf_energy(&g, &DensityField::zeros(&lat), 0.5).unwrap();
        assert!((e.exchange + 0.25 * exchange_pairing(&g, &g).unwrap()).abs() < 1e-12);
        assert!(e.exchange <= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn expansion_identity_random(seed in 0u64..10_000, alpha in 0.0f64..1.2) {
            let lat = small();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = sample::random_real_density(&lat, &mut rng, 1.0);
            let q = sample::random_hermitian(&lat, &mut rng, 1.0);
            let g = sample::random_hermitian(&lat, &mut rng, 1.0);
            let e_q = bdf_energy(&q, &n, alpha).unwrap().total;
            prop_assert!(expand_around(&q, &g, &n, alpha).unwrap() <= 1e-10 * (1.0 + e_q.abs()));
        }
    }
}
