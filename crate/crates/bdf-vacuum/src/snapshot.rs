//! Binary checkpoints of an SCF state.
//!
//! Layout, all little endian:
//!
//! | field            | type                                  |
//! |------------------|---------------------------------------|
//! | magic            | `b"BDFSNAP\0"`                        |
//! | version          | `u32` (currently 1)                   |
//! | points_per_axis  | `u64`                                 |
//! | spacing, cutoff  | `f64`, `f64`                          |
//! | mode count `M`   | `u64`                                 |
//! | diff count `K`   | `u64`                                 |
//! | operator blocks  | `M²` blocks, row-major over `(p, q)`; each block 16 `(re, im)` `f64` pairs, row-major |
//! | density          | `K` `(re, im)` `f64` pairs                   |

use crate::error::{BdfError, Result};
use crate::kernel::KernelOperator;
use crate::lattice::{build_lattice, DensityField, LatticeSpec};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"BDFSNAP\0";
pub const VERSION: u32 = 1;

/// Serialize `(Q, ρ′)`.
pub fn write_state<W: Write>(mut out: W, q: &KernelOperator, rho_prime: &DensityField) -> Result<()> {
    let lat = q.lattice();
    if lat.as_ref() != rho_prime.lattice().as_ref() {
        return Err(BdfError::LatticeMismatch);
    }
    let spec = lat.spec();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(spec.points_per_axis as u64).to_le_bytes())?;
    out.write_all(&spec.spacing.to_le_bytes())?;
    out.write_all(&spec.cutoff.to_le_bytes())?;
    out.write_all(&(lat.num_modes() as u64).to_le_bytes())?;
    out.write_all(&(lat.num_diffs() as u64).to_le_bytes())?;
    let m = lat.num_modes();
    let mut buf = Vec::with_capacity(16 * 16 * m);
    for a in 0..m {
        buf.clear();
        for b in 0..m {
            let blk = q.matrix_block(a, b);
            for i in 0..4 {
                for j in 0..4 {
                    buf.extend_from_slice(&blk[(i, j)].re.to_le_bytes());
                    buf.extend_from_slice(&blk[(i, j)].im.to_le_bytes());
                }
            }
        }
        out.write_all(&buf)?;
    }
    for v in rho_prime.values() {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => BdfError::Snapshot("truncated file".into()),
        _ => BdfError::Io(e),
    })?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array::<8, R>(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array::<8, R>(r)?))
}

fn read_complex<R: Read>(r: &mut R) -> Result<Complex64> {
    let re = read_f64(r)?;
    Ok(Complex64::new(re, read_f64(r)?))
}

/// Deserialize `(Q, ρ′)`, rebuilding the lattice from the stored spec.
pub fn read_state<R: Read>(mut input: R) -> Result<(KernelOperator, DensityField)> {
    if &read_array::<8, R>(&mut input)? != MAGIC {
        return Err(BdfError::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array::<4, R>(&mut input)?);
    if version != VERSION {
        return Err(BdfError::Snapshot(format!("unsupported version {version}")));
    }
    let points = read_u64(&mut input)? as usize;
    let spacing = read_f64(&mut input)?;
    let cutoff = read_f64(&mut input)?;
    let lat = build_lattice(LatticeSpec::new(points, spacing, cutoff))
        .map_err(|e| BdfError::Snapshot(format!("stored lattice is invalid: {e}")))?;
    let m = read_u64(&mut input)? as usize;
    let k = read_u64(&mut input)? as usize;
    if m != lat.num_modes() || k != lat.num_diffs() {
        return Err(BdfError::Snapshot(format!(
            "mode counts ({m}, {k}) do not match the stored lattice ({}, {})",
            lat.num_modes(),
            lat.num_diffs()
        )));
    }
    let mut q = KernelOperator::zeros(&lat);
    for a in 0..m {
        for b in 0..m {
            let mut blk = crate::dirac::SpinorMatrix::zero();
            for i in 0..4 {
                for j in 0..4 {
                    blk[(i, j)] = read_complex(&mut input)?;
                }
            }
            q.set_matrix_block(a, b, &blk);
        }
    }
    let values = (0..k).map(|_| read_complex(&mut input)).collect::<Result<Vec<_>>>()?;
    let rho = DensityField::from_values(&lat, values)?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(BdfError::Snapshot("trailing bytes".into()));
    }
    Ok((q, rho))
}

pub fn save(path: &Path, q: &KernelOperator, rho_prime: &DensityField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_state(std::io::BufWriter::new(file), q, rho_prime)
}

pub fn load(path: &Path) -> Result<(KernelOperator, DensityField)> {
    let file = std::fs::File::open(path)?;
    read_state(std::io::BufReader::new(file))
}
