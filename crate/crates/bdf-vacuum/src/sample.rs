//! Seeded random operators, densities and projectors for property tests,
//! optimality sampling and the validation suite.

use crate::error::Result;
use crate::kernel::KernelOperator;
use crate::lattice::{DensityField, Lattice};
use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use std::sync::Arc;

fn cgauss<R: Rng>(rng: &mut R) -> Complex64 {
    // Box–Muller pair gives both parts
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * t.cos(), r * t.sin()) * std::f64::consts::FRAC_1_SQRT_2
}

/// Vector with i.i.d. standard complex Gaussian entries.
pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n).map(|_| cgauss(rng)).collect()
}

/// Operator with i.i.d. Gaussian matrix entries of size `scale/√dim`.
pub fn random_operator<R: Rng>(lat: &Arc<Lattice>, rng: &mut R, scale: f64) -> KernelOperator {
    let n = lat.dim();
    let s = scale / (n as f64).sqrt();
    let mat = Mat::from_fn(n, n, |_, _| cgauss(rng) * s);
    KernelOperator::from_matrix(lat, mat).expect("square")
}

/// Hermitian part of `random_operator`.
pub fn random_hermitian<R: Rng>(lat: &Arc<Lattice>, rng: &mut R, scale: f64) -> KernelOperator {
    random_operator(lat, rng, scale).hermitian_part()
}

/// Real density field (`ρ̂(−k) = conj ρ̂(k)`) with Gaussian amplitudes
/// damped by `exp(−|k|²/4)`.
pub fn random_real_density<R: Rng>(lat: &Arc<Lattice>, rng: &mut R, scale: f64) -> DensityField {
    let mut f = DensityField::zeros(lat);
    let ks = lat.diff_modes().to_vec();
    for i in 0..lat.num_diffs() {
        let j = lat.neg_diff(i);
        if j < i {
            continue;
        }
        let damp = (-0.25 * crate::lattice::norm_sqr(ks[i])).exp() * scale;
        let v = cgauss(rng) * damp;
        let vals = f.values_mut();
        if i == j {
            vals[i] = Complex64::new(v.re, 0.0);
        } else {
            vals[i] = v;
            vals[j] = v.conj();
        }
    }
    f
}

/// `|ψ⟩⟨ψ|` for a matrix-representation vector `ψ`.
pub fn rank_one(lat: &Arc<Lattice>, psi: &[Complex64]) -> KernelOperator {
    let n = lat.dim();
    let mat = Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj());
    KernelOperator::from_matrix(lat, mat).expect("square")
}

/// Unit vector in the range of `p` (when `inside`) or of `1 − p`.
pub fn random_unit_in_range<R: Rng>(p: &KernelOperator, inside: bool, rng: &mut R) -> Vec<Complex64> {
    let n = p.dim();
    let x = random_vector(n, rng);
    let pm = p.matrix();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = Complex64::new(0.0, 0.0);
        for (j, xj) in x.iter().enumerate() {
            s += pm[(i, j)] * xj;
        }
        *yi = if inside { s } else { x[i] - s };
    }
    let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    y.iter().map(|v| v / norm).collect()
}

/// Negative spectral projector of `1/2 − P + εH` for a random Hermitian `H`:
/// a projector near `P` for small `ε`.
pub fn perturbed_projector<R: Rng>(p: &KernelOperator, rng: &mut R, eps: f64) -> Result<KernelOperator> {
    let lat = p.lattice();
    let h = random_hermitian(lat, rng, eps);
    let shifted = KernelOperator::identity(lat).scale(0.5).sub(p)?.add(&h)?;
    negative_projector(&shifted)
}

/// `χ_(−∞,0)(H)` without a gap check.
pub fn negative_projector(h: &KernelOperator) -> Result<KernelOperator> {
    let (vals, vecs) = h.hermitian_eigen()?;
    let neg = vals.iter().take_while(|v| **v < 0.0).count();
    let u = vecs.subcols(0, neg);
    let mat = u * u.adjoint();
    KernelOperator::from_matrix(h.lattice(), mat)
}

/// Hermitian `γ` with `−P⁰ ≤ γ ≤ 1 − P⁰`, built by clamping the spectrum of
/// `P⁰ + H` to `[0, 1]` for a random Hermitian `H`.
pub fn random_admissible<R: Rng>(p0: &KernelOperator, rng: &mut R, scale: f64) -> Result<KernelOperator> {
    let lat = p0.lattice();
    let h = random_hermitian(lat, rng, scale);
    let (vals, vecs) = p0.add(&h)?.hermitian_eigen()?;
    let n = p0.dim();
    let clamped: Vec<f64> = vals.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut scaled = vecs.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= clamped[j];
        }
    }
    let g = &scaled * vecs.adjoint();
    KernelOperator::from_matrix(lat, g)?.hermitian_part().sub(p0)
}
