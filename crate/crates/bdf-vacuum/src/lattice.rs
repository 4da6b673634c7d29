//! Discretized cutoff space: the momentum grid restricted to the ball
//! `|p| ≤ Λ`, density fields on difference momenta, Coulomb products and
//! the density-space norms.
//!
//! Fourier convention: `f̂(k) = (2π)^(-3/2) ∫ f(x) e^(-ik·x) dx`. Every
//! lattice sum carries the cell volume `Δk³` (with `Δk = Δp`). The `k = 0`
//! point is dropped from every `|k|⁻²` sum.

use crate::error::{BdfError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub type Vec3 = [f64; 3];

/// `(2π)^(-3/2)`
pub const FOURIER_NORM: f64 = 0.063_493_635_934_240_97;

const BALL_SLACK: f64 = 1e-12;

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sqr(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// `E(k) = √(1 + |k|²)`.
#[inline]
pub fn energy_scale(k: Vec3) -> f64 {
    (1.0 + norm_sqr(k)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub points_per_axis: usize,
    pub spacing: f64,
    pub cutoff: f64,
}

impl LatticeSpec {
    pub fn new(points_per_axis: usize, spacing: f64, cutoff: f64) -> Self {
        Self { points_per_axis, spacing, cutoff }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis == 0 || self.points_per_axis % 2 != 0 {
            return Err(BdfError::InvalidLattice(format!(
                "points_per_axis must be positive and even, got {}",
                self.points_per_axis
            )));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(BdfError::InvalidLattice(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.cutoff >= 0.0) || !self.cutoff.is_finite() {
            return Err(BdfError::InvalidLattice(format!("cutoff must be nonnegative, got {}", self.cutoff)));
        }
        let box_half = (self.points_per_axis / 2) as f64 * self.spacing;
        if self.cutoff > box_half * (1.0 + BALL_SLACK) {
            return Err(BdfError::InvalidLattice(format!(
                "cutoff {} exceeds half box width {}",
                self.cutoff, box_half
            )));
        }
        Ok(())
    }
}

/// Lookup from integer offsets in `[-h, h]³` to list positions.
#[derive(Debug, Clone)]
struct CubeIndex {
    half: i32,
    side: usize,
    slots: Vec<u32>,
}

impl CubeIndex {
    const EMPTY: u32 = u32::MAX;

    fn new(half: i32) -> Self {
        let side = (2 * half + 1) as usize;
        Self { half, side, slots: vec![Self::EMPTY; side * side * side] }
    }

    #[inline]
    fn slot(&self, n: [i32; 3]) -> Option<usize> {
        let h = self.half;
        if n.iter().any(|&c| c < -h || c > h) {
            return None;
        }
        let s = self.side;
        Some(((n[0] + h) as usize * s + (n[1] + h) as usize) * s + (n[2] + h) as usize)
    }

    fn insert(&mut self, n: [i32; 3], idx: usize) {
        let s = self.slot(n).expect("inside cube");
        self.slots[s] = idx as u32;
    }

    #[inline]
    fn get(&self, n: [i32; 3]) -> Option<usize> {
        let s = self.slot(n)?;
        let v = self.slots[s];
        (v != Self::EMPTY).then_some(v as usize)
    }
}

/// Momentum grid `Δp·Z³ ∩ {|p| ≤ Λ}` and the set of differences `p − q`.
///
/// Modes and difference momenta are stored in lexicographic order of their
/// integer coordinates.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    mode_ints: Vec<[i32; 3]>,
    modes: Vec<Vec3>,
    mode_index: CubeIndex,
    diff_ints: Vec<[i32; 3]>,
    diffs: Vec<Vec3>,
    diff_index: CubeIndex,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

pub fn build_lattice(spec: LatticeSpec) -> Result<Arc<Lattice>> {
    Lattice::new(spec).map(Arc::new)
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let half = (spec.points_per_axis / 2) as i32;
        let h = spec.spacing;
        let r2 = (spec.cutoff / h).powi(2) * (1.0 + BALL_SLACK);

        let mut mode_ints = Vec::new();
        for i in -half..=half {
            for j in -half..=half {
                for k in -half..=half {
                    if (i * i + j * j + k * k) as f64 <= r2 {
                        mode_ints.push([i, j, k]);
                    }
                }
            }
        }
        let mut mode_index = CubeIndex::new(half);
        for (idx, &n) in mode_ints.iter().enumerate() {
            mode_index.insert(n, idx);
        }

        let in_ball = |n: [i32; 3]| ((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64) <= r2;
        let reachable = |k: [i32; 3]| -> bool {
            // a witness p with p and p - k in the ball sits near k/2
            let c = [k[0].div_euclid(2), k[1].div_euclid(2), k[2].div_euclid(2)];
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let p = [c[0] + dx, c[1] + dy, c[2] + dz];
                        if in_ball(p) && in_ball([p[0] - k[0], p[1] - k[1], p[2] - k[2]]) {
                            return true;
                        }
                    }
                }
            }
            // otherwise scan the lens where the two balls overlap
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            let w = (r2 - 0.25 * k2).max(0.0).sqrt().ceil() as i32 + 1;
            for dx in -w..=w {
                for dy in -w..=w {
                    for dz in -w..=w {
                        let p = [c[0] + dx, c[1] + dy, c[2] + dz];
                        if in_ball(p) && in_ball([p[0] - k[0], p[1] - k[1], p[2] - k[2]]) {
                            return true;
                        }
                    }
                }
            }
            false
        };
        let mut diff_ints = Vec::new();
        let d2 = 4.0 * r2;
        for i in -2 * half..=2 * half {
            for j in -2 * half..=2 * half {
                for k in -2 * half..=2 * half {
                    let n = [i, j, k];
                    if ((i * i + j * j + k * k) as f64) <= d2 && reachable(n) {
                        diff_ints.push(n);
                    }
                }
            }
        }
        diff_ints.sort_unstable();
        let mut diff_index = CubeIndex::new(2 * half);
        for (idx, &n) in diff_ints.iter().enumerate() {
            diff_index.insert(n, idx);
        }

        let to_vec = |n: &[i32; 3]| [n[0] as f64 * h, n[1] as f64 * h, n[2] as f64 * h];
        let modes = mode_ints.iter().map(to_vec).collect();
        let diffs = diff_ints.iter().map(to_vec).collect();
        Ok(Self { spec, mode_ints, modes, mode_index, diff_ints, diffs, diff_index })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    pub fn cutoff(&self) -> f64 {
        self.spec.cutoff
    }

    /// `Δp³`
    pub fn cell_volume(&self) -> f64 {
        self.spec.spacing.powi(3)
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Spinor dimension `4·|modes|`.
    pub fn dim(&self) -> usize {
        4 * self.modes.len()
    }

    pub fn modes(&self) -> &[Vec3] {
        &self.modes
    }

    pub fn mode_ints(&self) -> &[[i32; 3]] {
        &self.mode_ints
    }

    pub fn mode_index(&self, n: [i32; 3]) -> Option<usize> {
        self.mode_index.get(n)
    }

    pub fn num_diffs(&self) -> usize {
        self.diffs.len()
    }

    pub fn diff_modes(&self) -> &[Vec3] {
        &self.diffs
    }

    pub fn diff_ints(&self) -> &[[i32; 3]] {
        &self.diff_ints
    }

    pub fn diff_index(&self, n: [i32; 3]) -> Option<usize> {
        self.diff_index.get(n)
    }

    /// Position of `p_a − p_b` in the difference list.
    #[inline]
    pub fn pair_diff(&self, a: usize, b: usize) -> usize {
        let (x, y) = (self.mode_ints[a], self.mode_ints[b]);
        self.diff_index
            .get([x[0] - y[0], x[1] - y[1], x[2] - y[2]])
            .expect("differences of modes are indexed")
    }

    pub fn zero_diff(&self) -> usize {
        self.diff_index.get([0, 0, 0]).expect("k = 0 present")
    }

    /// Index of `−k` for difference index `i`.
    pub fn neg_diff(&self, i: usize) -> usize {
        let n = self.diff_ints[i];
        self.diff_index.get([-n[0], -n[1], -n[2]]).expect("difference set is symmetric")
    }
}

/// Complex amplitudes `f̂(k)` on the difference momenta of a lattice.
#[derive(Debug, Clone)]
pub struct DensityField {
    lattice: Arc<Lattice>,
    values: Vec<Complex64>,
}

impl DensityField {
    pub fn zeros(lattice: &Arc<Lattice>) -> Self {
        Self { lattice: lattice.clone(), values: vec![Complex64::new(0.0, 0.0); lattice.num_diffs()] }
    }

    pub fn from_values(lattice: &Arc<Lattice>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice.num_diffs() {
            return Err(BdfError::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                lattice.num_diffs(),
                values.len()
            )));
        }
        Ok(Self { lattice: lattice.clone(), values })
    }

    pub fn from_fn<F: FnMut(Vec3) -> Complex64>(lattice: &Arc<Lattice>, mut f: F) -> Self {
        let values = lattice.diff_modes().iter().map(|&k| f(k)).collect();
        Self { lattice: lattice.clone(), values }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if *self.lattice == *other.lattice {
            Ok(())
        } else {
            Err(BdfError::LatticeMismatch)
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { lattice: self.lattice.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { lattice: self.lattice.clone(), values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|f̂(−k) − conj f̂(k)|`.
    pub fn reality_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[self.lattice.neg_diff(i)] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Apply a radial multiplier `g(|k|)` pointwise.
    pub fn map_radial<F: FnMut(f64) -> f64>(&self, mut g: F) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.lattice.diff_modes())
            .map(|(v, &k)| v * g(norm_sqr(k).sqrt()))
            .collect();
        Self { lattice: self.lattice.clone(), values }
    }
}

/// Sum over `k ≠ 0` of `w(k)·conj(f̂)ĝ`, times `Δk³`.
fn weighted_pairing<W: Fn(f64) -> f64>(f: &DensityField, g: &DensityField, w: W) -> Complex64 {
    let lat = &f.lattice;
    let zero = lat.zero_diff();
    let mut s = Complex64::new(0.0, 0.0);
    for (i, &k) in lat.diff_modes().iter().enumerate() {
        if i == zero {
            continue;
        }
        s += f.values[i].conj() * g.values[i] * w(norm_sqr(k));
    }
    s * lat.cell_volume()
}

/// `D(f,g) = 4π Δk³ Σ_{k≠0} conj(f̂(k)) ĝ(k) / |k|²` (real part).
pub fn coulomb_product(f: &DensityField, g: &DensityField) -> Result<f64> {
    f.check_same(g)?;
    Ok(4.0 * PI * weighted_pairing(f, g, |k2| 1.0 / k2).re)
}

/// `‖ρ‖_C² = Δk³ Σ_{k≠0} E(k)²|ρ̂(k)|²/|k|²`.
pub fn c_norm(rho: &DensityField) -> f64 {
    weighted_pairing(rho, rho, |k2| (1.0 + k2) / k2).re.max(0.0).sqrt()
}

/// `‖ζ‖_{C′}² = Δk³ Σ_{k≠0} |k|²|ζ̂(k)|²/E(k)²`, dual to `c_norm` under the
/// pairing `Δk³ Σ conj(ζ̂)ρ̂`.
pub fn c_dual_norm(zeta: &DensityField) -> f64 {
    weighted_pairing(zeta, zeta, |k2| k2 / (1.0 + k2)).re.max(0.0).sqrt()
}

/// `‖φ‖_Y² = Δk³ Σ |k|² E(k)² |φ̂(k)|²`.
pub fn y_norm(phi: &DensityField) -> f64 {
    weighted_pairing(phi, phi, |k2| k2 * (1.0 + k2)).re.max(0.0).sqrt()
}

/// `Δk³ Σ_{k≠0} conj(ζ̂)ρ̂`, the pairing under which `c_dual_norm` is dual.
pub fn density_pairing(zeta: &DensityField, rho: &DensityField) -> Result<Complex64> {
    zeta.check_same(rho)?;
    Ok(weighted_pairing(zeta, rho, |_| 1.0))
}

/// Lattice Coulomb potential `φ̂ = 4πρ̂/|k|²` of a density, zero at `k = 0`.
pub fn coulomb_potential(rho: &DensityField) -> DensityField {
    let zero = rho.lattice.zero_diff();
    let mut out = rho.map_radial(|k| if k > 0.0 { 4.0 * PI / (k * k) } else { 0.0 });
    out.values[zero] = Complex64::new(0.0, 0.0);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase")]
pub enum SourceProfile {
    Gaussian { charge: f64, width: f64 },
}

/// External charge density sampled on the difference momenta:
/// `n̂(k) = Z (2π)^(-3/2) exp(-σ²|k|²/2)`.
pub fn source_density(lattice: &Arc<Lattice>, profile: &SourceProfile) -> Result<DensityField> {
    match *profile {
        SourceProfile::Gaussian { charge, width } => {
            if !(width > 0.0) {
                return Err(BdfError::InvalidArgument(format!("source width must be positive, got {width}")));
            }
            Ok(DensityField::from_fn(lattice, |k| {
                Complex64::new(charge * FOURIER_NORM * (-0.5 * width * width * norm_sqr(k)).exp(), 0.0)
            }))
        }
    }
}
