//! Vacuum polarization: the response function `B_Λ(k)`, first-order
//! densities and the resolvent expansion of the dressed projector.

use crate::dirac::{d0_block, pair_trace, unit_d0_block, SpinorMatrix};
use crate::error::{BdfError, Result};
use crate::kernel::{exchange_kernel, potential_operator, KernelOperator};
use crate::lattice::{coulomb_potential, energy_scale, norm_sqr, DensityField, Lattice};
use crate::quad;
use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Relative tolerance of the 1D response quadrature.
pub const B_TOL: f64 = 1e-10;

fn check_cutoff(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(BdfError::InvalidArgument(format!("Λ must be positive and finite, got {lambda}")))
    }
}

/// `B_Λ(k) = (1/π)∫₀^{Λ/E(Λ)} (z² − z⁴/3)/(1 − z²) dz / (1 + |k|²(1 − z²)/4)`.
///
/// Integrated in `s` with `z = tanh s`, which removes the growth near `z = 1`.
pub fn b_lambda_1d(k_abs: f64, lambda: f64) -> Result<f64> {
    check_cutoff(lambda)?;
    let k2 = k_abs * k_abs;
    let f = |s: f64| {
        let t = s.tanh();
        let sech2 = 1.0 - t * t;
        t * t * (1.0 - t * t / 3.0) / (1.0 + 0.25 * k2 * sech2)
    };
    let upper = lambda.asinh();
    // the integrand is bounded by 1, so this is a relative bound on B
    let scale = b_lambda_zero_closed(lambda)?.max(1e-300);
    Ok(quad::integrate(&f, 0.0, upper, B_TOL * scale)? / PI)
}

/// Exact primitive at `k = 0`: `(1/π)[z³/9 − 2z/3 + (2/3) artanh z]` at
/// `z = Λ/E(Λ)`.
pub fn b_lambda_zero_closed(lambda: f64) -> Result<f64> {
    check_cutoff(lambda)?;
    let z = lambda / energy_scale([lambda, 0.0, 0.0]);
    // artanh(Λ/E(Λ)) = asinh(Λ), exact for large Λ
    Ok((z * z * z / 9.0 - 2.0 * z / 3.0 + 2.0 / 3.0 * lambda.asinh()) / PI)
}

/// `(2/3π) log Λ − 5/9π + (2/3π) log 2`.
pub fn b_lambda_zero_asymptotic(lambda: f64) -> f64 {
    (2.0 / 3.0 * lambda.ln() - 5.0 / 9.0 + 2.0 / 3.0 * 2f64.ln()) / PI
}

/// The 3D form
/// `(1/π²|k|²) ∫_{|l|≤Λ} [E₊E₋ − (l₊·l₋ + 1)] / (E₊E₋(E₊ + E₋)) dl`
/// with `l± = l ± k/2`, integrated in cylindrical symmetry around `k`.
pub fn b_lambda_3d(k: [f64; 3], lambda: f64) -> Result<f64> {
    check_cutoff(lambda)?;
    let k2 = norm_sqr(k);
    if !(k2 > 0.0) {
        return Err(BdfError::InvalidArgument("the 3D form needs k ≠ 0; use b_lambda_1d".into()));
    }
    let kk = k2.sqrt();
    let integrand = |r: f64, c: f64| {
        let a = 1.0 + r * r + 0.25 * k2;
        let b = r * kk * c;
        let root = ((a - b) * (a + b)).sqrt();
        let shifted = a - 0.5 * k2;
        // E₊E₋ − (a − k²/2) without cancellation
        let num = if shifted > 0.0 {
            (a * k2 - 0.25 * k2 * k2 - b * b).max(0.0) / (root + shifted)
        } else {
            root - shifted
        };
        let (ep, em) = ((a + b).sqrt(), (a - b).sqrt());
        num / (root * (ep + em))
    };
    let failed = std::cell::Cell::new(None);
    let radial = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        match quad::integrate(&|c: f64| integrand(r, c), -1.0, 1.0, 1e-12) {
            Ok(v) => 2.0 * PI * r * r * v,
            Err(e) => {
                failed.set(Some(e));
                0.0
            }
        }
    };
    let v = quad::integrate(&radial, 0.0, lambda, 1e-10 * (1.0 + lambda * lambda))?;
    if let Some(e) = failed.take() {
        return Err(e);
    }
    Ok(v / (PI * PI * k2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseMethod {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "3d")]
    ThreeD,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResponseTable {
    pub lambda: f64,
    pub method: ResponseMethod,
    /// `(|k|, B_Λ(k))`
    pub samples: Vec<(f64, f64)>,
}

/// `B_Λ` sampled at the given `|k|` values.
pub fn response_table(lambda: f64, ks: &[f64], method: ResponseMethod) -> Result<ResponseTable> {
    let samples = ks
        .iter()
        .map(|&k| {
            let b = match method {
                ResponseMethod::OneD => b_lambda_1d(k, lambda)?,
                ResponseMethod::ThreeD => b_lambda_3d([0.0, 0.0, k], lambda)?,
            };
            Ok((k, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResponseTable { lambda, method, samples })
}

/// `α / (1 + (2α/3π) log Λ)`.
pub fn dressed_alpha(alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !(lambda >= 1.0) {
        return Err(BdfError::InvalidArgument(format!("dressed coupling needs α ≥ 0, Λ ≥ 1, got ({alpha}, {lambda})")));
    }
    Ok(alpha / (1.0 + 2.0 * alpha / (3.0 * PI) * lambda.ln()))
}

/// `B_Λ` on every difference momentum of a lattice, one quadrature per
/// distinct `|k|`.
pub fn continuum_response_on(lattice: &Arc<Lattice>, lambda: f64) -> Result<Vec<f64>> {
    let mut cache: Vec<(f64, f64)> = Vec::new();
    lattice
        .diff_modes()
        .iter()
        .map(|&k| {
            let r = norm_sqr(k).sqrt();
            if let Some(&(_, b)) = cache.iter().find(|(kk, _)| (kk - r).abs() <= 1e-12 * (1.0 + r)) {
                return Ok(b);
            }
            let b = b_lambda_1d(r, lambda)?;
            cache.push((r, b));
            Ok(b)
        })
        .collect()
}

/// `ρ̂₀,₁(k) = −B_Λ(k) ρ̂′(k)`.
pub fn first_order_density(rho_prime: &DensityField, lambda: f64) -> Result<DensityField> {
    let b = continuum_response_on(rho_prime.lattice(), lambda)?;
    multiply(rho_prime, &b, -1.0)
}

/// `−(1/4π) φ̂′(k) |k|² B_Λ(k)`; equal to `first_order_density` except at
/// `k = 0`, where the Coulomb potential carries no mode.
pub fn first_order_density_from_potential(rho_prime: &DensityField, lambda: f64) -> Result<DensityField> {
    let lat = rho_prime.lattice();
    let b = continuum_response_on(lat, lambda)?;
    let phi = coulomb_potential(rho_prime);
    let weights: Vec<f64> = lat.diff_modes().iter().zip(&b).map(|(&k, &bk)| norm_sqr(k) * bk).collect();
    multiply(&phi, &weights, -1.0 / (4.0 * PI))
}

fn multiply(f: &DensityField, w: &[f64], c: f64) -> Result<DensityField> {
    let values = f.values().iter().zip(w).map(|(v, &x)| v * (c * x)).collect();
    DensityField::from_values(f.lattice(), values)
}

/// Lattice response `B_lat(k) = (Δp³/(π²|k|²)) Σ_{p−q=k} Tr(Λ⁺(p)Λ⁻(q))/(E(p)+E(q))`,
/// the exact first-order response of the lattice model to a potential.
/// Zero at `k = 0`.
pub fn lattice_response(lattice: &Arc<Lattice>) -> Vec<f64> {
    let modes = lattice.modes();
    let m = modes.len();
    let mut out = vec![0.0; lattice.num_diffs()];
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let (p, q) = (modes[a], modes[b]);
            out[lattice.pair_diff(a, b)] += pair_trace(p, q) / (energy_scale(p) + energy_scale(q));
        }
    }
    let zero = lattice.zero_diff();
    let c = lattice.cell_volume() / (PI * PI);
    for (i, (v, &k)) in out.iter_mut().zip(lattice.diff_modes()).enumerate() {
        *v = if i == zero { 0.0 } else { *v * c / norm_sqr(k) };
    }
    out
}

/// `−B_lat(k) ρ̂′(k)`.
pub fn lattice_first_order_density(rho_prime: &DensityField) -> Result<DensityField> {
    multiply(rho_prime, &lattice_response(rho_prime.lattice()), -1.0)
}

/// Closed form of `−(1/2π)∫dη G W G` for Hermitian `W`:
/// `−½ (E(p)+E(q))⁻¹ (D̃(p) Ŵ(p,q) D̃(q) − Ŵ(p,q))`.
pub fn closed_form_first_order_w(w: &KernelOperator) -> KernelOperator {
    let lat = w.lattice();
    let modes = lat.modes();
    let units: Vec<SpinorMatrix> = modes.iter().map(|&p| unit_d0_block(p)).collect();
    let mut out = KernelOperator::zeros(lat);
    for a in 0..modes.len() {
        for b in 0..modes.len() {
            let blk = w.matrix_block(a, b);
            let s = -0.5 / (energy_scale(modes[a]) + energy_scale(modes[b]));
            let v = (units[a] * blk * units[b] - blk).scale_re(s);
            out.set_matrix_block(a, b, &v);
        }
    }
    out
}

/// `W = R_Q − φ′` with `φ′` the Coulomb potential of `ρ′`.
pub fn perturbation(q: &KernelOperator, rho_prime: &DensityField) -> Result<KernelOperator> {
    exchange_kernel(q).sub(&potential_operator(rho_prime))
}

/// First-order term in closed form.
pub fn closed_form_first_order(q: &KernelOperator, rho_prime: &DensityField) -> Result<KernelOperator> {
    Ok(closed_form_first_order_w(&perturbation(q, rho_prime)?))
}

#[derive(Clone, Copy, Debug)]
pub struct EtaQuadrature {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// stop when doubling changes the result by at most this (Frobenius)
    pub tol: f64,
}

impl Default for EtaQuadrature {
    fn default() -> Self {
        Self { initial_nodes: 64, max_nodes: 4096, tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct PerturbativeTerm {
    pub term: KernelOperator,
    pub nodes: usize,
    /// Frobenius change on the last doubling
    pub change: f64,
}

fn resolvent_blocks(lat: &Lattice, eta: f64) -> Vec<SpinorMatrix> {
    lat.modes()
        .iter()
        .map(|&p| {
            let d = d0_block(p);
            let s = 1.0 / (1.0 + norm_sqr(p) + eta * eta);
            // (D + iη)⁻¹ = (D − iη)/(E² + η²)
            (d - SpinorMatrix::identity().scale(Complex64::new(0.0, eta))).scale_re(s)
        })
        .collect()
}

fn left_block(g: &[SpinorMatrix], x: &Mat<Complex64>) -> Mat<Complex64> {
    let n = x.nrows();
    Mat::from_fn(n, x.ncols(), |r, c| {
        let (a, i) = (r / 4, r % 4);
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..4 {
            s += g[a][(i, j)] * x[(4 * a + j, c)];
        }
        s
    })
}

fn right_block(x: &Mat<Complex64>, g: &[SpinorMatrix]) -> Mat<Complex64> {
    Mat::from_fn(x.nrows(), x.ncols(), |r, c| {
        let (b, j) = (c / 4, c % 4);
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            s += x[(r, 4 * b + i)] * g[b][(i, j)];
        }
        s
    })
}

/// `G(η)[W G(η)]ⁿ` with `G(η) = (D⁰ + iη)⁻¹`.
fn resolvent_product(lat: &Lattice, w: &Mat<Complex64>, order: usize, eta: f64) -> Mat<Complex64> {
    let g = resolvent_blocks(lat, eta);
    let wg = right_block(w, &g);
    let mut acc = left_block(&g, &wg);
    for _ in 1..order {
        acc = &acc * &wg;
    }
    acc
}

fn eta_rule(lat: &Lattice, w: &Mat<Complex64>, order: usize, nodes: usize) -> Mat<Complex64> {
    let c = energy_scale([lat.cutoff(), 0.0, 0.0]).sqrt();
    let n = w.nrows();
    let mut sum = Mat::<Complex64>::zeros(n, n);
    for (x, wt) in quad::gauss_legendre(nodes) {
        // θ ∈ (0, π/2), η = c tan θ
        let theta = 0.25 * PI * (x + 1.0);
        let eta = c * theta.tan();
        let jac = 0.25 * PI * wt * c / (theta.cos() * theta.cos());
        let a = resolvent_product(lat, w, order, eta);
        // A(−η) = A(η)†
        sum += faer::Scale(Complex64::new(jac, 0.0)) * (&a + a.adjoint());
    }
    faer::Scale(Complex64::new(-1.0 / (2.0 * PI), 0.0)) * sum
}

/// `−(1/2π)∫dη G[W G]ⁿ` for a Hermitian perturbation `W`.
pub fn perturbative_term_w(w: &KernelOperator, order: usize, rule: EtaQuadrature) -> Result<PerturbativeTerm> {
    if order == 0 {
        return Err(BdfError::InvalidArgument("perturbative order must be ≥ 1".into()));
    }
    let lat = w.lattice();
    let mut nodes = rule.initial_nodes.max(2);
    let mut prev = eta_rule(lat, w.matrix(), order, nodes);
    loop {
        let next_nodes = 2 * nodes;
        if next_nodes > rule.max_nodes {
            let change = f64::INFINITY;
            return Err(BdfError::Quadrature { estimate: change });
        }
        let next = eta_rule(lat, w.matrix(), order, next_nodes);
        let change = (&next - &prev).norm_l2();
        if change <= rule.tol {
            let term = KernelOperator::from_matrix(lat, next)?;
            return Ok(PerturbativeTerm { term, nodes: next_nodes, change });
        }
        if next_nodes * 2 > rule.max_nodes {
            return Err(BdfError::Quadrature { estimate: change });
        }
        prev = next;
        nodes = next_nodes;
    }
}

/// `Q_n(Q, ρ′) = −(1/2π)∫dη G[(R_Q − φ′)G]ⁿ`, without the factor `αⁿ`.
pub fn perturbative_term(
    order: usize,
    q: &KernelOperator,
    rho_prime: &DensityField,
    rule: EtaQuadrature,
) -> Result<PerturbativeTerm> {
    perturbative_term_w(&perturbation(q, rho_prime)?, order, rule)
}

/// Largest `|ρ̂|` of the second-order pure-potential density, which vanishes
/// by charge-conjugation symmetry.
pub fn furry_check(rho_prime: &DensityField) -> Result<f64> {
    let q = KernelOperator::zeros(rho_prime.lattice());
    let t = perturbative_term(2, &q, rho_prime, EtaQuadrature::default())?;
    Ok(crate::kernel::density_of(&t.term).max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::m_matrix;
    use crate::kernel::density_of;
    use crate::lattice::{build_lattice, source_density, LatticeSpec, SourceProfile, FOURIER_NORM};
    use crate::sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Arc<Lattice> {
        build_lattice(LatticeSpec::new(4, 1.0, 1.5)).unwrap()
    }

    fn b_direct(k_abs: f64, lambda: f64) -> f64 {
        // plain z-integral, fine away from z = 1
        let z_max = lambda / energy_scale([lambda, 0.0, 0.0]);
        let f = |z: f64| (z * z - z.powi(4) / 3.0) / (1.0 - z * z) / (1.0 + k_abs * k_abs * (1.0 - z * z) / 4.0);
        quad::integrate(&f, 0.0, z_max, 1e-13).unwrap() / PI
    }

    #[test]
    fn b_zero_agrees_with_closed_forms() {
        for &l in &[0.3, 1.0, 10.0, 100.0] {
            let q = b_lambda_1d(0.0, l).unwrap();
            assert!((q - b_lambda_zero_closed(l).unwrap()).abs() < 1e-10 * q.max(1e-3), "Λ={l}");
            assert!((q - b_direct(0.0, l)).abs() < 1e-9 * q.max(1e-3));
        }
        for &l in &[10.0, 100.0, 1000.0] {
            let gap = (b_lambda_1d(0.0, l).unwrap() - b_lambda_zero_asymptotic(l)).abs();
            assert!(gap <= 5.0 / (l * l), "Λ={l}: {gap}");
        }
    }

    #[test]
    fn b_zero_remainder_decays_like_inverse_square() {
        let r = |l: f64| b_lambda_zero_closed(l).unwrap() - b_lambda_zero_asymptotic(l);
        for &l in &[10.0, 30.0, 100.0] {
            let ratio = r(l) / r(2.0 * l);
            assert!((ratio - 4.0).abs() < 0.1, "Λ={l}: {ratio}");
        }
    }

    #[test]
    fn b_log_derivative_tends_to_leading_coefficient() {
        let l = 1e6;
        let h: f64 = 1e-3;
        let d = (b_lambda_zero_closed(l * h.exp()).unwrap() - b_lambda_zero_closed(l).unwrap()) / h;
        assert!((d - 2.0 / (3.0 * PI)).abs() < 1e-6);
    }

    #[test]
    fn b_shape() {
        assert!(b_lambda_1d(1.0, 100.0).unwrap() < b_lambda_1d(0.0, 100.0).unwrap());
        assert!(b_lambda_1d(0.0, 1e-3).unwrap() < 1e-9);
        assert!(b_lambda_1d(0.0, 0.0).is_err());
        assert!(b_lambda_1d(0.0, -1.0).is_err());
        for &k in &[0.5, 2.0, 7.0] {
            assert!((b_lambda_1d(k, 5.0).unwrap() - b_direct(k, 5.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn b_3d_matches_1d() {
        let gap = |k: f64, l: f64| {
            let a = b_lambda_1d(k, l).unwrap();
            let b = b_lambda_3d([0.0, k, 0.0], l).unwrap();
            assert!(b > 0.0);
            (a - b).abs() / a
        };
        for &(k, l) in &[(1.0, 50.0), (0.5, 10.0), (3.0, 100.0)] {
            assert!(gap(k, l) < 1e-4, "(k,Λ)=({k},{l}): {}", gap(k, l));
        }
        // away from that regime the forms differ by a finite-cutoff term
        assert!(gap(3.0, 10.0) > gap(3.0, 30.0) && gap(3.0, 30.0) > gap(3.0, 100.0));
        assert!(b_lambda_3d([0.0; 3], 10.0).is_err());
    }

    #[test]
    fn b_3d_depends_only_on_modulus() {
        let a = b_lambda_3d([0.0, 0.0, 1.3], 4.0).unwrap();
        let s = 1.3 / 3f64.sqrt();
        let b = b_lambda_3d([s, s, s], 4.0).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn dressed_alpha_examples() {
        assert_eq!(dressed_alpha(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(dressed_alpha(0.3, 1.0).unwrap(), 0.3);
        assert!(dressed_alpha(0.3, 2.0).unwrap() < 0.3);
        assert!(dressed_alpha(0.3, 0.5).is_err());
    }

    #[test]
    fn first_order_density_screens() {
        let lat = small();
        let n = source_density(&lat, &SourceProfile::Gaussian { charge: 1.0, width: 1.0 }).unwrap();
        let rho1 = first_order_density(&n.scaled(-1.0), 10.0).unwrap();
        for (v, nv) in rho1.values().iter().zip(n.values()) {
            // same sign as n, opposite to −n
            assert!(v.re * nv.re > 0.0);
        }
        assert_eq!(first_order_density(&DensityField::zeros(&lat), 10.0).unwrap().max_abs(), 0.0);
        let pot = first_order_density_from_potential(&n, 10.0).unwrap();
        let zero = lat.zero_diff();
        for (i, (a, b)) in pot.values().iter().zip(first_order_density(&n, 10.0).unwrap().values()).enumerate() {
            if i != zero {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn first_order_pure_potential_matches_m_matrix() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = sample::random_real_density(&lat, &mut rng, 1.0);
        let q = KernelOperator::zeros(&lat);
        let t = perturbative_term(1, &q, &rho, EtaQuadrature::default()).unwrap();
        let phi = coulomb_potential(&rho);
        let modes = lat.modes();
        let c = lat.cell_volume() * 2f64.powf(-2.5) * PI.powf(-1.5);
        let mut worst: f64 = 0.0;
        for a in 0..lat.num_modes() {
            for b in 0..lat.num_modes() {
                let expect = m_matrix(modes[a], modes[b]).scale(phi.values()[lat.pair_diff(a, b)] * c);
                worst = worst.max(t.term.matrix_block(a, b).max_abs_diff(&expect));
            }
        }
        assert!(worst < 1e-6, "{worst}");
        let closed = closed_form_first_order(&q, &rho).unwrap();
        assert!(closed.sub(&t.term).unwrap().hs_norm() < 1e-6);
    }

    #[test]
    fn first_order_exchange_matches_closed_form() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = sample::random_hermitian(&lat, &mut rng, 1.0);
        let zero = DensityField::zeros(&lat);
        let t = perturbative_term(1, &q, &zero, EtaQuadrature::default()).unwrap();
        let closed = closed_form_first_order(&q, &zero).unwrap();
        assert!(closed.sub(&t.term).unwrap().hs_norm() < 1e-6);
        assert!(t.term.hermitian_defect() < 1e-12);
    }

    #[test]
    fn lattice_response_reproduces_first_order_density() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = sample::random_real_density(&lat, &mut rng, 1.0);
        let closed = closed_form_first_order(&KernelOperator::zeros(&lat), &rho).unwrap();
        let from_op = density_of(&closed);
        let from_b = lattice_first_order_density(&rho).unwrap();
        for (a, b) in from_op.values().iter().zip(from_b.values()) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(lattice_response(&lat).iter().all(|&b| b >= 0.0));
        let _ = FOURIER_NORM;
    }

    #[test]
    fn eta_quadrature_is_converged() {
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = sample::random_real_density(&lat, &mut rng, 1.0);
        let q = sample::random_hermitian(&lat, &mut rng, 0.5);
        for order in 1..=3 {
            let t = perturbative_term(order, &q, &rho, EtaQuadrature::default()).unwrap();
            assert!(t.change <= 1e-8);
        }
        assert!(perturbative_term(0, &q, &rho, EtaQuadrature::default()).is_err());
    }

    #[test]
    fn furry_theorem_on_lattice() {
        let lat = small();
        let n = source_density(&lat, &SourceProfile::Gaussian { charge: 1.0, width: 1.0 }).unwrap();
        assert!(furry_check(&n).unwrap() <= 1e-10 * n.max_abs());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = sample::random_real_density(&lat, &mut rng, 1.0);
        assert!(furry_check(&rho).unwrap() <= 1e-10 * rho.max_abs());
        // with exchange the second-order density does not vanish
        let q = sample::random_hermitian(&lat, &mut rng, 1.0);
        let t = perturbative_term(2, &q, &rho, EtaQuadrature::default()).unwrap();
        assert!(density_of(&t.term).max_abs() > 1e-6);
    }

    #[test]
    fn second_order_matches_nested_first_order() {
        // −(1/2π)∫ G W G W G equals the sum over the closed-form
        // spectral representation
        let lat = small();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = sample::random_hermitian(&lat, &mut rng, 1.0);
        let t = perturbative_term_w(&w, 2, EtaQuadrature::default()).unwrap();
        // resolvent identity: d/dε χ(D⁰ + εW) at ε=0 second derivative / 2
        let h = 1e-3;
        let proj = |e: f64| sample::negative_projector(&crate::dirac::free_operator(&lat).add(&w.scale(e)).unwrap()).unwrap();
        let second = proj(h).add(&proj(-h)).unwrap().sub(&proj(0.0).scale(2.0)).unwrap().scale(0.5 / (h * h));
        assert!(second.sub(&t.term).unwrap().hs_norm() < 1e-4 * (1.0 + t.term.hs_norm()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn first_order_is_linear(seed in 0u64..1000, c in -3.0f64..3.0) {
            let lat = small();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = sample::random_real_density(&lat, &mut rng, 1.0);
            let q = sample::random_hermitian(&lat, &mut rng, 1.0);
            let a = perturbative_term(1, &q, &rho, EtaQuadrature::default()).unwrap().term;
            let b = perturbative_term(1, &q.scale(c), &rho.scaled(c), EtaQuadrature::default()).unwrap().term;
            prop_assert!(b.sub(&a.scale(c)).unwrap().hs_norm() <= 1e-12 * (1.0 + a.hs_norm() * c.abs()));
        }

        #[test]
        fn b_positive_decreasing_increasing(k in 0.0f64..20.0, dk in 0.01f64..5.0, l in 0.5f64..1e4) {
            let b = b_lambda_1d(k, l).unwrap();
            prop_assert!(b > 0.0);
            prop_assert!(b_lambda_1d(k + dk, l).unwrap() < b);
            prop_assert!(b_lambda_1d(k, 1.5 * l).unwrap() > b);
        }
    }
}
