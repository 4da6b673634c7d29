//! Dirac matrices in the standard (Dirac) representation, free-operator
//! blocks `α·p + β`, the spectral projectors `Λ±(p)` and the first-order
//! matrix `M(p,q)`.

use crate::kernel::KernelOperator;
use crate::lattice::{dot, energy_scale, Lattice, Vec3};
use num_complex::Complex64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 4×4 complex matrix acting on the spinor index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinorMatrix(pub [[Complex64; 4]; 4]);

impl SpinorMatrix {
    pub const fn zero() -> Self {
        Self([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 4])
    }

    pub fn diag(d: [Complex64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v *= c);
        m
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v = v.conj());
        m
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    /// `Σ|a_ij|²`
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|v| v.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Anticommutator `AB + BA`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }
}

impl Index<(usize, usize)> for SpinorMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for SpinorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.0[i][j]
    }
}

impl Add for SpinorMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for SpinorMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for SpinorMatrix {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for SpinorMatrix {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl Mul for SpinorMatrix {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

/// `α₁, α₂, α₃, β`.
#[derive(Clone, Copy, Debug)]
pub struct DiracMatrices {
    pub alpha: [SpinorMatrix; 3],
    pub beta: SpinorMatrix,
}

fn pauli() -> [[[Complex64; 2]; 2]; 3] {
    [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ]
}

/// `β = diag(1,1,−1,−1)`, `α_k = [[0, σ_k], [σ_k, 0]]`.
pub fn dirac_matrices() -> DiracMatrices {
    let s = pauli();
    let alpha = std::array::from_fn(|k| {
        let mut m = SpinorMatrix::zero();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j + 2] = s[k][i][j];
                m.0[i + 2][j] = s[k][i][j];
            }
        }
        m
    });
    DiracMatrices { alpha, beta: SpinorMatrix::diag([ONE, ONE, -ONE, -ONE]) }
}

/// `α·p + β`.
pub fn d0_block(p: Vec3) -> SpinorMatrix {
    let (px, py, pz) = (Complex64::new(p[0], 0.0), Complex64::new(p[1], 0.0), Complex64::new(p[2], 0.0));
    // σ·p
    let a = pz;
    let b = px - I * py;
    let c = px + I * py;
    let d = -pz;
    SpinorMatrix([
        [ONE, ZERO, a, b],
        [ZERO, ONE, c, d],
        [a, b, -ONE, ZERO],
        [c, d, ZERO, -ONE],
    ])
}

/// `(Λ⁺(p), Λ⁻(p))` with `Λ± = (E(p) ± (α·p + β)) / 2E(p)`.
pub fn lambda_projectors(p: Vec3) -> (SpinorMatrix, SpinorMatrix) {
    let e = energy_scale(p);
    let d = d0_block(p).scale_re(0.5 / e);
    let half = SpinorMatrix::identity().scale_re(0.5);
    (half + d, half - d)
}

/// `Tr[Λ⁺(p)Λ⁻(q)] = 1 − (p·q + 1)/(E(p)E(q))`.
pub fn pair_trace(p: Vec3, q: Vec3) -> f64 {
    // (E_p E_q)² − (p·q + 1)² = |p − q|² + |p × q|², no cancellation near p = q
    let ep = energy_scale(p);
    let eq = energy_scale(q);
    let c = dot(p, q) + 1.0;
    let cross = [
        p[1] * q[2] - p[2] * q[1],
        p[2] * q[0] - p[0] * q[2],
        p[0] * q[1] - p[1] * q[0],
    ];
    let diff2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
    let num = diff2 + dot(cross, cross);
    let den = ep * eq;
    num / (den * (den + c))
}

/// `D̃(p) = (α·p + β)/E(p)`.
pub fn unit_d0_block(p: Vec3) -> SpinorMatrix {
    d0_block(p).scale_re(1.0 / energy_scale(p))
}

/// `M(p,q) = (E(p)+E(q))⁻¹ [D̃(p)D̃(q) − 1]`.
pub fn m_matrix(p: Vec3, q: Vec3) -> SpinorMatrix {
    let s = energy_scale(p) + energy_scale(q);
    (unit_d0_block(p) * unit_d0_block(q) - SpinorMatrix::identity()).scale_re(1.0 / s)
}

/// `U = iβα₂`, so that charge conjugation reads `Cψ = U·conj(ψ)`.
pub fn charge_conjugation_matrix() -> SpinorMatrix {
    let dm = dirac_matrices();
    (dm.beta * dm.alpha[1]).scale(I)
}

/// `C A C⁻¹` for the antiunitary charge conjugation, kernel
/// `U conj(Â(−p,−q)) U⁻¹`.
pub fn charge_conjugate(op: &KernelOperator) -> KernelOperator {
    let lat = op.lattice();
    let u = charge_conjugation_matrix();
    let ui = u.adjoint();
    let ints = lat.mode_ints();
    let neg: Vec<usize> = ints
        .iter()
        .map(|n| lat.mode_index([-n[0], -n[1], -n[2]]).expect("the ball is symmetric"))
        .collect();
    let mut out = KernelOperator::zeros(lat);
    for a in 0..lat.num_modes() {
        for b in 0..lat.num_modes() {
            let blk = u * op.matrix_block(neg[a], neg[b]).conj() * ui;
            out.set_matrix_block(a, b, &blk);
        }
    }
    out
}

/// Free operator `D⁰` on the lattice (block diagonal `α·p + β`).
pub fn free_operator(lat: &Arc<Lattice>) -> KernelOperator {
    KernelOperator::block_diagonal(lat, |p| d0_block(p))
}

/// Negative spectral projector of the free operator, block `Λ⁻(p)`.
pub fn p0_projector(lat: &Arc<Lattice>) -> KernelOperator {
    KernelOperator::block_diagonal(lat, |p| lambda_projectors(p).1)
}

/// `|D⁰|`, block `E(p)·I`.
pub fn abs_free_operator(lat: &Arc<Lattice>) -> KernelOperator {
    KernelOperator::block_diagonal(lat, |p| SpinorMatrix::identity().scale_re(energy_scale(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeSpec};
    use proptest::prelude::*;

    fn eigenvalues_hermitian(m: &SpinorMatrix) -> Vec<f64> {
        let a = faer::Mat::<Complex64>::from_fn(4, 4, |i, j| m.0[i][j]);
        let e = a.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        e.into_iter().collect()
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        [-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0]
    }

    #[test]
    fn clifford_relations() {
        let dm = dirac_matrices();
        let id = SpinorMatrix::identity();
        let z = SpinorMatrix::zero();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { id.scale_re(2.0) } else { z };
                assert_eq!(dm.alpha[i].anticommutator(&dm.alpha[j]), expect);
            }
            assert_eq!(dm.alpha[i].anticommutator(&dm.beta), z);
            assert_eq!(dm.alpha[i].trace(), ZERO);
            assert!(dm.alpha[i].is_hermitian(0.0));
        }
        assert_eq!(dm.beta * dm.beta, id);
        assert_eq!(dm.beta.trace(), ZERO);
        assert_eq!(dm.alpha[0] * dm.alpha[1] + dm.alpha[1] * dm.alpha[0], z);
    }

    #[test]
    fn d0_block_matches_clifford_sum() {
        let dm = dirac_matrices();
        let p = [0.3, -1.7, 2.2];
        let mut s = dm.beta;
        for k in 0..3 {
            s += dm.alpha[k].scale_re(p[k]);
        }
        assert!(d0_block(p).max_abs_diff(&s) < 1e-15);
        assert_eq!(d0_block([0.0; 3]), dm.beta);
    }

    #[test]
    fn d0_block_spectrum() {
        let ev = eigenvalues_hermitian(&d0_block([3.0, 0.0, 0.0]));
        let e = 10f64.sqrt();
        for (got, want) in ev.iter().zip([-e, -e, e, e]) {
            assert!((got - want).abs() < 1e-13);
        }
        let ev = eigenvalues_hermitian(&d0_block([0.0; 3]));
        assert_eq!(ev.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn projectors_at_origin() {
        let (plus, minus) = lambda_projectors([0.0; 3]);
        assert_eq!(minus, SpinorMatrix::diag([ZERO, ZERO, ONE, ONE]));
        assert_eq!(plus, SpinorMatrix::diag([ONE, ONE, ZERO, ZERO]));
    }

    #[test]
    fn pair_trace_special_values() {
        let q = [0.4, 2.0, -1.0];
        assert_eq!(pair_trace(q, q), 0.0);
        let expect = 1.0 - 1.0 / energy_scale(q);
        assert!((pair_trace([0.0; 3], q) - expect).abs() < 1e-15);
    }

    #[test]
    fn m_matrix_special_values() {
        let p = [1.0, -0.5, 0.25];
        assert!(m_matrix(p, p).trace().norm() < 1e-15);
        let q = [0.7, 2.0, -1.5];
        let eq = energy_scale(q);
        let expect = 8.0 * (1.0 - 1.0 / eq) / (1.0 + eq).powi(2);
        assert!((m_matrix([0.0; 3], q).norm_sqr() - expect).abs() < 1e-14);
    }

    #[test]
    fn charge_conjugation_reverses_free_operator() {
        // C D⁰(p) C⁻¹ acting on conj: U conj(D⁰(−p)) U⁻¹ = −D⁰(p)
        let u = charge_conjugation_matrix();
        let uinv = u.adjoint();
        assert!((u * uinv).max_abs_diff(&SpinorMatrix::identity()) < 1e-15);
        let p = [0.3, -1.1, 2.5];
        let lhs = u * d0_block([-p[0], -p[1], -p[2]]).conj() * uinv;
        assert!(lhs.max_abs_diff(&(-d0_block(p))) < 1e-14);
    }

    #[test]
    fn lattice_free_operators() {
        let lat = build_lattice(LatticeSpec::new(4, 1.0, 2.0)).unwrap();
        let p0 = p0_projector(&lat);
        let d0 = free_operator(&lat);
        assert!(p0.compose(&p0).unwrap().sub(&p0).unwrap().hs_norm() < 1e-12);
        let comm = d0.compose(&p0).unwrap().sub(&p0.compose(&d0).unwrap()).unwrap();
        assert!(comm.hs_norm() < 1e-13);
        assert!((p0.trace().re - 2.0 * lat.num_modes() as f64).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn block_squares_to_energy(p in vec3()) {
            let b = d0_block(p);
            let e2 = 1.0 + dot(p, p);
            prop_assert!((b * b).max_abs_diff(&SpinorMatrix::identity().scale_re(e2)) < 1e-12 * e2);
            prop_assert!(b.is_hermitian(0.0));
        }

        #[test]
        fn projector_algebra(p in vec3()) {
            let (plus, minus) = lambda_projectors(p);
            let id = SpinorMatrix::identity();
            prop_assert!((plus * plus).max_abs_diff(&plus) < 1e-13);
            prop_assert!((minus * minus).max_abs_diff(&minus) < 1e-13);
            prop_assert!((plus * minus).max_abs_diff(&SpinorMatrix::zero()) < 1e-13);
            prop_assert!((plus + minus).max_abs_diff(&id) < 1e-15);
            prop_assert!((plus.trace().re - 2.0).abs() < 1e-13);
            prop_assert!((minus.trace().re - 2.0).abs() < 1e-13);
            let e = energy_scale(p);
            prop_assert!(((plus - minus).scale_re(e)).max_abs_diff(&d0_block(p)) < 1e-12 * e);
        }

        #[test]
        fn pair_trace_closed_form_matches_matrix_trace(p in vec3(), q in vec3()) {
            let direct = (lambda_projectors(p).0 * lambda_projectors(q).1).trace();
            prop_assert!((direct.re - pair_trace(p, q)).abs() < 1e-12);
            prop_assert!(direct.im.abs() < 1e-12);
            let sym = (lambda_projectors(p).1 * lambda_projectors(q).0).trace().re;
            prop_assert!((sym - pair_trace(p, q)).abs() < 1e-12);
        }

        #[test]
        fn m_matrix_trace_and_norm_identities(p in vec3(), q in vec3()) {
            let m = m_matrix(p, q);
            let s = energy_scale(p) + energy_scale(q);
            let t = pair_trace(p, q);
            prop_assert!((m.trace().re + 4.0 * t / s).abs() < 1e-13);
            prop_assert!((m.norm_sqr() - 8.0 * t / (s * s)).abs() < 1e-13);
        }
    }
}
