//! Binary dumps of instances and bases (little-endian, row-major `f64`) and CSV
//! helpers shared by the experiment writers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::bases::{BasisKind, OrthonormalBasis};
use crate::error::{Error, Result};
use crate::model::{Dims, GroundTruth, ProblemInstance, SensingMatrices, SubspacePrior};
use crate::rng::Distribution;
use crate::scalar::Real;
use crate::solver::TrajectoryEntry;

const INSTANCE_MAGIC: &[u8; 8] = b"BCALINST";
const BASIS_MAGIC: &[u8; 8] = b"BCALBASE";
const VERSION: u32 = 1;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_values<W: Write, S: Real>(w: &mut W, values: impl Iterator<Item = S>) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v.to_f64_lossy())?;
    }
    Ok(())
}

fn read_vec<R: Read, S: Real>(r: &mut R, len: usize) -> Result<Array1<S>> {
    let mut out = Array1::zeros(len);
    for v in out.iter_mut() {
        *v = S::lit(r.read_f64::<LittleEndian>()?);
    }
    Ok(out)
}

fn read_mat<R: Read, S: Real>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<S>> {
    let v = read_vec(r, rows * cols)?;
    Array2::from_shape_vec((rows, cols), v.to_vec()).map_err(|e| Error::Format(e.to_string()))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = r.read_u64::<LittleEndian>()?;
    usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in usize")))
}

fn write_basis_body<W: Write, S: Real>(w: &mut W, b: &OrthonormalBasis<S>) -> Result<()> {
    w.write_u64::<LittleEndian>(b.dim() as u64)?;
    w.write_u64::<LittleEndian>(b.rank() as u64)?;
    w.write_u8(b.kind().code())?;
    write_values(w, b.matrix().iter().copied())
}

fn read_basis_body<R: Read, S: Real>(r: &mut R) -> Result<OrthonormalBasis<S>> {
    let d = read_len(r)?;
    let rank = read_len(r)?;
    let kind = BasisKind::from_code(r.read_u8()?).ok_or_else(|| Error::Format("unknown basis kind".into()))?;
    if rank == 0 || rank > d {
        return Err(Error::Format(format!("basis shape {d} x {rank} is invalid")));
    }
    let m = read_mat(r, d, rank)?;
    OrthonormalBasis::new(m, kind)
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format("bad magic header".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

/// Writes a basis: magic, version, `d`, `r`, kind code, then the `d × r` matrix.
pub fn write_basis<W: Write, S: Real>(w: &mut W, b: &OrthonormalBasis<S>) -> Result<()> {
    w.write_all(BASIS_MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    write_basis_body(w, b)
}

/// Reads a basis and re-validates its orthonormality.
pub fn read_basis<R: Read, S: Real>(r: &mut R) -> Result<OrthonormalBasis<S>> {
    check_magic(r, BASIS_MAGIC)?;
    read_basis_body(r)
}

pub fn save_basis<S: Real>(path: &Path, b: &OrthonormalBasis<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_basis(&mut w, b)?;
    w.flush()?;
    Ok(())
}

pub fn load_basis<S: Real>(path: &Path) -> Result<OrthonormalBasis<S>> {
    read_basis(&mut BufReader::new(File::open(path)?))
}

/// Writes a full instance: header (`n, m, p, k, h`, distribution, seed, `ρ`, flags),
/// then `x`, `g`, the stacked sensing matrices, `y` (`m × p`), the noise if any and
/// the two bases if any. Sensing matrices are always written explicitly.
pub fn write_instance<W: Write, S: Real>(w: &mut W, inst: &ProblemInstance<S>) -> Result<()> {
    let d = inst.dims();
    w.write_all(INSTANCE_MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    for v in [d.n, d.m, d.p, d.k.unwrap_or(0), d.h.unwrap_or(0)] {
        w.write_u64::<LittleEndian>(v as u64)?;
    }
    w.write_u8(match inst.dist() {
        Distribution::Gaussian => 0,
        Distribution::Rademacher => 1,
    })?;
    w.write_u64::<LittleEndian>(inst.seed())?;
    w.write_f64::<LittleEndian>(inst.truth().rho)?;
    let flags = u8::from(inst.is_noisy()) | (u8::from(inst.prior().is_some()) << 1);
    w.write_u8(flags)?;
    let t = inst.truth();
    write_values(w, t.x.iter().copied())?;
    write_values(w, t.g.iter().copied())?;
    write_values(w, inst.sensing().stacked().iter().copied())?;
    write_values(w, inst.y().iter().copied())?;
    if let Some(nz) = inst.noise() {
        write_values(w, nz.iter().copied())?;
    }
    if let Some(pr) = inst.prior() {
        write_basis_body(w, &pr.signal)?;
        write_basis_body(w, &pr.gain)?;
    }
    Ok(())
}

/// Reads an instance written by [`write_instance`]; the measurements are re-synthesized
/// and must agree with the stored ones to `1e-12` relative.
pub fn read_instance<R: Read, S: Real>(r: &mut R) -> Result<ProblemInstance<S>> {
    check_magic(r, INSTANCE_MAGIC)?;
    let n = read_len(r)?;
    let m = read_len(r)?;
    let p = read_len(r)?;
    let k = read_len(r)?;
    let h = read_len(r)?;
    let dist = match r.read_u8()? {
        0 => Distribution::Gaussian,
        1 => Distribution::Rademacher,
        other => return Err(Error::Format(format!("unknown distribution code {other}"))),
    };
    let seed = r.read_u64::<LittleEndian>()?;
    let rho = r.read_f64::<LittleEndian>()?;
    let flags = r.read_u8()?;
    let x = read_vec::<_, S>(r, n)?;
    let g = read_vec::<_, S>(r, m)?;
    let stacked = read_mat::<_, S>(r, m * p, n)?;
    let y_stored = read_mat::<_, S>(r, m, p)?;
    let noise = if flags & 1 != 0 { Some(read_mat::<_, S>(r, m, p)?) } else { None };
    let prior = if flags & 2 != 0 {
        let signal = read_basis_body(r)?;
        let gain = read_basis_body(r)?;
        Some(SubspacePrior::new(signal, gain)?)
    } else {
        None
    };
    let dims = if prior.is_some() { Dims::with_subspace(n, m, p, k, h) } else { Dims::new(n, m, p) };
    let mut truth = GroundTruth::new(x, g, rho)?;
    if let Some(pr) = &prior {
        truth.z = Some(pr.signal.analyze(&truth.x));
        truth.b = Some(pr.gain.analyze(&truth.g));
    }
    let sensing = SensingMatrices::from_stacked(stacked, p)?;
    let inst = ProblemInstance::assemble(dims, dist, seed, truth, sensing, prior, noise)?;
    let scale = y_stored.iter().fold(0.0f64, |a, v| a.max(v.to_f64_lossy().abs())).max(f64::MIN_POSITIVE);
    let worst = inst
        .y()
        .iter()
        .zip(y_stored.iter())
        .fold(0.0f64, |a, (u, v)| a.max((u.to_f64_lossy() - v.to_f64_lossy()).abs()));
    if worst > 1e-12 * scale {
        return Err(Error::Format(format!("stored measurements disagree with the model ({worst:e})")));
    }
    Ok(inst)
}

pub fn save_instance<S: Real>(path: &Path, inst: &ProblemInstance<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_instance(&mut w, inst)?;
    w.flush()?;
    Ok(())
}

pub fn load_instance<S: Real>(path: &Path) -> Result<ProblemInstance<S>> {
    read_instance(&mut BufReader::new(File::open(path)?))
}

/// Trajectory CSV: `iter,f,delta,delta_F,mu_signal,mu_gain`.
pub fn write_trajectory_csv<W: Write>(w: &mut W, trajectory: &[TrajectoryEntry]) -> Result<()> {
    writeln!(w, "iter,f,delta,delta_F,mu_signal,mu_gain")?;
    for e in trajectory {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.iter,
            fmt_f64(e.f),
            fmt_f64(e.delta),
            fmt_f64(e.delta_f),
            fmt_f64(e.mu_signal),
            fmt_f64(e.mu_gain)
        )?;
    }
    Ok(())
}

pub fn save_trajectory_csv(path: &Path, trajectory: &[TrajectoryEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trajectory_csv(&mut w, trajectory)?;
    w.flush()?;
    Ok(())
}

/// 8-bit binary PGM of a row-major `side × side` field, min–max normalized.
pub fn write_pgm<W: Write, S: Real>(w: &mut W, values: &Array1<S>, side: usize) -> Result<()> {
    if side * side != values.len() {
        return Err(Error::ShapeMismatch(format!("{} values do not form a {side} x {side} image", values.len())));
    }
    let vals: Vec<f64> = values.iter().map(|v| v.to_f64_lossy()).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(w, "P5\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = vals.iter().map(|v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn save_pgm<S: Real>(path: &Path, values: &Array1<S>, side: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(&mut w, values, side)?;
    w.flush()?;
    Ok(())
}
