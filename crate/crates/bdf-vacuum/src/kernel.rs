//! Dense kernel operators on the lattice.
//!
//! An operator with kernel `Â(p,q)` is stored through its matrix
//! representation `M = Δp³·Â`, a dense `4N × 4N` complex matrix indexed by
//! `4·mode + spin`. With this scaling composition is the matrix product,
//! `tr A = Δp³ Σ_p Tr Â(p,p)` is the matrix trace and the Hilbert–Schmidt
//! norm is the Frobenius norm of `M`.

use crate::certificate;
use crate::dirac::{p0_projector, SpinorMatrix};
use crate::error::{BdfError, Result};
use crate::lattice::{add, c_norm, coulomb_potential, energy_scale, norm_sqr, sub, DensityField, Lattice, Vec3, FOURIER_NORM};
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct KernelOperator {
    lattice: Arc<Lattice>,
    mat: Mat<Complex64>,
}

impl KernelOperator {
    pub fn zeros(lattice: &Arc<Lattice>) -> Self {
        let n = lattice.dim();
        Self { lattice: lattice.clone(), mat: Mat::zeros(n, n) }
    }

    pub fn identity(lattice: &Arc<Lattice>) -> Self {
        let n = lattice.dim();
        Self { lattice: lattice.clone(), mat: Mat::identity(n, n) }
    }

    /// Wrap a matrix representation `Δp³·Â`.
    pub fn from_matrix(lattice: &Arc<Lattice>, mat: Mat<Complex64>) -> Result<Self> {
        let n = lattice.dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(BdfError::InvalidArgument(format!(
                "matrix is {}x{}, lattice needs {n}x{n}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { lattice: lattice.clone(), mat })
    }

    /// Momentum-diagonal operator acting as the 4×4 matrix `f(p)` at each mode.
    pub fn block_diagonal<F: Fn(Vec3) -> SpinorMatrix>(lattice: &Arc<Lattice>, f: F) -> Self {
        let mut op = Self::zeros(lattice);
        for (a, &p) in lattice.modes().iter().enumerate() {
            op.set_matrix_block(a, a, &f(p));
        }
        op
    }

    /// Operator with kernel `Â(p,q) = f(p,q)`.
    pub fn from_kernel_fn<F: FnMut(Vec3, Vec3) -> SpinorMatrix>(lattice: &Arc<Lattice>, mut f: F) -> Self {
        let mut op = Self::zeros(lattice);
        let vol = lattice.cell_volume();
        let modes = lattice.modes();
        for a in 0..modes.len() {
            for b in 0..modes.len() {
                op.set_matrix_block(a, b, &f(modes[a], modes[b]).scale_re(vol));
            }
        }
        op
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut Mat<Complex64> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> Mat<Complex64> {
        self.mat
    }

    pub fn matrix_block(&self, a: usize, b: usize) -> SpinorMatrix {
        let mut m = SpinorMatrix::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.mat[(4 * a + i, 4 * b + j)];
            }
        }
        m
    }

    pub fn set_matrix_block(&mut self, a: usize, b: usize, m: &SpinorMatrix) {
        for i in 0..4 {
            for j in 0..4 {
                self.mat[(4 * a + i, 4 * b + j)] = m.0[i][j];
            }
        }
    }

    /// Kernel block `Â(p_a, p_b)`.
    pub fn kernel_block(&self, a: usize, b: usize) -> SpinorMatrix {
        self.matrix_block(a, b).scale_re(1.0 / self.lattice.cell_volume())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if *self.lattice == *other.lattice {
            Ok(())
        } else {
            Err(BdfError::LatticeMismatch)
        }
    }

    fn with(&self, mat: Mat<Complex64>) -> Self {
        Self { lattice: self.lattice.clone(), mat }
    }

    /// `(AB)̂(p,q) = Δp³ Σ_l Â(p,l) B̂(l,q)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.with(&self.mat * &other.mat))
    }

    pub fn adjoint(&self) -> Self {
        self.with(self.mat.adjoint().to_owned())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.with(&self.mat + &other.mat))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.with(&self.mat - &other.mat))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with(Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * c))
    }

    pub fn scale_complex(&self, c: Complex64) -> Self {
        self.with(Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * c))
    }

    /// `‖A‖_HS² = Δp⁶ Σ |Â(p,q)|²`.
    pub fn hs_norm(&self) -> f64 {
        self.mat.norm_l2()
    }

    /// `⟨A, B⟩ = Δp⁶ Σ Tr Â(p,q)† B̂(p,q) = tr(A†B)`.
    pub fn frobenius_inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        let n = self.dim();
        let mut s = CZERO;
        for j in 0..n {
            for i in 0..n {
                s += self.mat[(i, j)].conj() * other.mat[(i, j)];
            }
        }
        Ok(s)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// Largest entry of `A − A†`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn hermitian_part(&self) -> Self {
        let n = self.dim();
        self.with(Mat::from_fn(n, n, |i, j| 0.5 * (self.mat[(i, j)] + self.mat[(j, i)].conj())))
    }

    /// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Mat<Complex64>)> {
        let evd = self.mat.self_adjoint_eigen(Side::Lower).map_err(|_| BdfError::Eigen)?;
        let values = evd.S().column_vector().iter().map(|v| v.re).collect();
        Ok((values, evd.U().to_owned()))
    }

    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        self.mat.self_adjoint_eigenvalues(Side::Lower).map_err(|_| BdfError::Eigen)
    }

    /// Operator norm of a Hermitian operator.
    pub fn operator_norm(&self) -> Result<f64> {
        Ok(self.hermitian_eigenvalues()?.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    /// Matrix blocks as a flat list indexed by `a·N + b`.
    fn blocks(&self) -> Vec<[Complex64; 16]> {
        let m = self.lattice.num_modes();
        let mut out = vec![[CZERO; 16]; m * m];
        for b in 0..m {
            for j in 0..4 {
                let col = 4 * b + j;
                for a in 0..m {
                    let blk = &mut out[a * m + b];
                    for i in 0..4 {
                        blk[4 * i + j] = self.mat[(4 * a + i, col)];
                    }
                }
            }
        }
        out
    }

    fn from_blocks(lattice: &Arc<Lattice>, blocks: &[[Complex64; 16]]) -> Self {
        let m = lattice.num_modes();
        let n = 4 * m;
        let mat = Mat::from_fn(n, n, |r, c| blocks[(r / 4) * m + c / 4][4 * (r % 4) + c % 4]);
        Self { lattice: lattice.clone(), mat }
    }
}

/// `str_P(A) = tr(P A P) + tr((1−P) A (1−P))`.
pub fn p_trace(a: &KernelOperator, p: &KernelOperator) -> Result<f64> {
    a.check_same(p)?;
    let pa = p.compose(a)?;
    let ap = a.compose(p)?;
    let pap = pa.compose(p)?;
    Ok((a.trace() - pa.trace() - ap.trace() + pap.trace() * 2.0).re)
}

/// `str_{P⁰}(A)`.
pub fn p0_trace(a: &KernelOperator) -> Result<f64> {
    p_trace(a, &p0_projector(a.lattice()))
}

/// Tolerance for calling a charge an integer.
pub const CHARGE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct VacuumCharge {
    /// `str_{P⁰}(Q)`
    pub super_trace: f64,
    /// `tr(Q³)`
    pub cube_trace: f64,
    /// nearest integer to `super_trace`
    pub integer: i64,
    /// both traces within `CHARGE_TOL` of `integer`
    pub integral: bool,
}

/// Charge of `Q = P′ − P⁰` computed two ways.
pub fn vacuum_charge(q: &KernelOperator, p0: &KernelOperator) -> Result<VacuumCharge> {
    let super_trace = p_trace(q, p0)?;
    let q2 = q.compose(q)?;
    let cube_trace = q2.compose(q)?.trace().re;
    let integer = super_trace.round() as i64;
    let integral =
        (super_trace - integer as f64).abs() <= CHARGE_TOL && (cube_trace - integer as f64).abs() <= CHARGE_TOL;
    Ok(VacuumCharge { super_trace, cube_trace, integer, integral })
}

/// `ρ̂_Γ(k) = (Δp³/(2π)^{3/2}) Σ_{p−q=k} Tr Γ̂(p,q)`.
pub fn density_of(gamma: &KernelOperator) -> DensityField {
    let lat = gamma.lattice();
    let m = lat.num_modes();
    let mut rho = DensityField::zeros(lat);
    let vals = rho.values_mut();
    for b in 0..m {
        for a in 0..m {
            let k = lat.pair_diff(a, b);
            let mut t = CZERO;
            for i in 0..4 {
                t += gamma.mat[(4 * a + i, 4 * b + i)];
            }
            vals[k] += t * FOURIER_NORM;
        }
    }
    rho
}

/// `∫_{[-1/2,1/2]³} d³u/|u|²`. Splitting the cube into six pyramids over its
/// faces gives `3∫∫_{[-1,1]²} ds dt/(1+s²+t²) = 12∫₀¹ atan(1/√(1+s²))/√(1+s²) ds`.
pub fn unit_cell_inverse_square() -> f64 {
    static V: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *V.get_or_init(|| {
        let f = |s: f64| {
            let a = (1.0 + s * s).sqrt();
            (1.0 / a).atan() / a
        };
        12.0 * crate::quad::integrate(&f, 0.0, 1.0, 1e-14).expect("smooth integrand")
    })
}

/// Exchange kernel `R̂(p,q) = (1/2π²) Δl³ Σ_l w(l) Q̂(p−l, q−l)`, i.e. the
/// kernel of `Q(x,y)/|x−y|`, with `w(l) = 1/|l|²` for `l ≠ 0`. The `l = 0`
/// cell is integrated exactly, `w(0) = Δl⁻³∫_cell dl/|l|²`, rather than
/// dropped: without it the weight matrix has zero diagonal and the pairing
/// `⟨Γ, R_Γ⟩ = ∬|Γ(x,y)|²/|x−y|` goes negative. Terms with `p−l` or `q−l`
/// outside the ball vanish.
pub fn exchange_kernel(q: &KernelOperator) -> KernelOperator {
    let lat = q.lattice();
    let m = lat.num_modes();
    let ints = lat.mode_ints();
    let modes = lat.modes();
    let c = lat.cell_volume() / (2.0 * PI * PI);
    let src = q.blocks();

    let self_cell = c * unit_cell_inverse_square() / lat.spacing().powi(2);
    let mut weights = vec![0.0; m * m];
    for a in 0..m {
        for mm in 0..m {
            weights[a * m + mm] = if a == mm { self_cell } else { c / norm_sqr(sub(modes[a], modes[mm])) };
        }
    }

    let mut out = vec![[CZERO; 16]; m * m];
    for a in 0..m {
        let w = &weights[a * m..(a + 1) * m];
        for b in 0..m {
            let d = [ints[b][0] - ints[a][0], ints[b][1] - ints[a][1], ints[b][2] - ints[a][2]];
            let mut acc = [CZERO; 16];
            for mm in 0..m {
                let n = ints[mm];
                if let Some(bb) = lat.mode_index([n[0] + d[0], n[1] + d[1], n[2] + d[2]]) {
                    let wt = w[mm];
                    let blk = &src[mm * m + bb];
                    for e in 0..16 {
                        acc[e] += blk[e] * wt;
                    }
                }
            }
            out[a * m + b] = acc;
        }
    }
    KernelOperator::from_blocks(lat, &out)
}

/// `X(A,B) = Re⟨A, R_B⟩`; `X(Γ,Γ) = ∬|Γ(x,y)|²/|x−y|`.
pub fn exchange_pairing(a: &KernelOperator, b: &KernelOperator) -> Result<f64> {
    Ok(a.frobenius_inner(&exchange_kernel(b))?.re)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KatoDiagnostic {
    /// `⟨Q, R_Q⟩`
    pub pairing: f64,
    /// `(π/2) tr(|D⁰|Q²)`
    pub bound: f64,
    /// within 5% of the bound
    pub holds: bool,
}

/// `⟨Q, R_Q⟩ ≤ (π/2) tr(|D⁰|Q²)` for Hermitian `Q`. Lattice truncation of the
/// Coulomb kernel can shift the constant, so a miss is logged, not an error.
pub fn kato_diagnostic(q: &KernelOperator) -> Result<KatoDiagnostic> {
    let pairing = exchange_pairing(q, q)?;
    let abs_d0 = crate::dirac::abs_free_operator(q.lattice());
    let bound = 0.5 * PI * abs_d0.compose(&q.compose(q)?)?.trace().re;
    let holds = pairing <= 1.05 * bound;
    if !holds {
        log::warn!("Kato bound missed: ⟨Q,R_Q⟩ = {pairing:.6e} > (π/2)tr(|D⁰|Q²) = {bound:.6e}");
    }
    Ok(KatoDiagnostic { pairing, bound, holds })
}

fn weighted_block_norm<W: Fn(Vec3, Vec3) -> f64>(op: &KernelOperator, w: W) -> f64 {
    let lat = op.lattice();
    let modes = lat.modes();
    let m = modes.len();
    let mut s = 0.0;
    for b in 0..m {
        for a in 0..m {
            let mut blk = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    blk += op.mat[(4 * a + i, 4 * b + j)].norm_sqr();
                }
            }
            s += w(modes[a], modes[b]) * blk;
        }
    }
    s.sqrt()
}

/// `‖Q‖_Q² = ∬ E(p−q)² E(p+q) |Q̂(p,q)|²`.
pub fn q_norm(q: &KernelOperator) -> f64 {
    weighted_block_norm(q, |p, r| {
        let d = sub(p, r);
        (1.0 + norm_sqr(d)) * energy_scale(add(p, r))
    })
}

/// `‖R‖_R² = ∬ E(p−q)² E(p+q)⁻¹ |R̂(p,q)|²`.
pub fn r_norm(r: &KernelOperator) -> f64 {
    weighted_block_norm(r, |p, q| {
        let d = sub(p, q);
        (1.0 + norm_sqr(d)) / energy_scale(add(p, q))
    })
}

/// `‖(Q,ρ′)‖_X = C_R√2 ‖Q‖_Q + 2√π ‖ρ′‖_C`.
pub fn x_norm(q: &KernelOperator, rho_prime: &DensityField) -> f64 {
    certificate::c_r() * 2f64.sqrt() * q_norm(q) + 2.0 * PI.sqrt() * c_norm(rho_prime)
}

/// Multiplication by the Coulomb potential of `ρ`: kernel
/// `(2π)^{-3/2} φ̂(p−q)` with `φ̂ = 4πρ̂/|k|²`.
pub fn potential_operator(rho: &DensityField) -> KernelOperator {
    let lat = rho.lattice();
    let phi = coulomb_potential(rho);
    let m = lat.num_modes();
    let scale = lat.cell_volume() * FOURIER_NORM;
    let mut op = KernelOperator::zeros(lat);
    for b in 0..m {
        for a in 0..m {
            let v = phi.values()[lat.pair_diff(a, b)] * scale;
            for i in 0..4 {
                op.mat[(4 * a + i, 4 * b + i)] = v;
            }
        }
    }
    op
}
