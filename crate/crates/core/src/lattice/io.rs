//! Binary environment files.
//!
//! Layout (little endian): magic `PLENV001`, `u32` version, `u8` kind
//! (0 site, 1 bond), `u32` d, `u32` n, `u32` r, `u64` seed, `u32` label
//! length, label bytes (UTF-8), `u64` value count, then the values as `f64`
//! in storage order (time, then site index, then direction).

use std::io::{Read, Write};
use std::path::Path;

use super::{DisorderKind, Environment, EnvironmentField, LatticeError, Result};

pub const MAGIC: &[u8; 8] = b"PLENV001";
pub const VERSION: u32 = 1;

pub fn write_field<W: Write>(field: &EnvironmentField, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match field.kind() {
        DisorderKind::Site => 0u8,
        DisorderKind::Bond => 1u8,
    }])?;
    for v in [field.dim(), field.horizon(), field.radius()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&field.seed().to_le_bytes())?;
    let label = field.label().as_bytes();
    w.write_all(&(label.len() as u32).to_le_bytes())?;
    w.write_all(label)?;
    w.write_all(&(field.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_field<R: Read>(mut r: R) -> Result<EnvironmentField> {
    if &read_array::<8, _>(&mut r)? != MAGIC {
        return Err(LatticeError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(LatticeError::Format(format!("unsupported version {version}")));
    }
    let kind = match read_array::<1, _>(&mut r)?[0] {
        0 => DisorderKind::Site,
        1 => DisorderKind::Bond,
        k => return Err(LatticeError::Format(format!("unknown kind tag {k}"))),
    };
    let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let radius = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if dim == 0 {
        return Err(LatticeError::Format("zero dimension".into()));
    }
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let label_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut label = vec![0u8; label_len];
    r.read_exact(&mut label)?;
    let label = String::from_utf8(label).map_err(|_| LatticeError::Format("label is not UTF-8".into()))?;
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let mut payload = Vec::new();
    r.take(count as u64 * 8).read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(LatticeError::Format("truncated payload".into()));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    EnvironmentField::from_parts(kind, dim, n, radius, seed, label, values)
}

pub fn save(field: &EnvironmentField, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_field(field, std::io::BufWriter::new(f))
}

pub fn load(path: &Path) -> Result<EnvironmentField> {
    let f = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderLaw;

    #[test]
    fn round_trip_is_bit_exact() {
        let law = DisorderLaw::uniform(-1.0, 2.0).unwrap();
        let f = EnvironmentField::sample(&law, DisorderKind::Bond, 5, 6, 2, 77).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(&buf[..]).unwrap();
        assert_eq!(g.kind(), f.kind());
        assert_eq!((g.dim(), g.horizon(), g.radius(), g.seed()), (2, 5, 6, 77));
        assert_eq!(g.label(), law.label());
        assert!(f.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let law = DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap();
        let f = EnvironmentField::sample(&law, DisorderKind::Site, 3, 3, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert!(read_field(&buf[..buf.len() - 3]).is_err());
        buf[0] = b'X';
        assert!(read_field(&buf[..]).is_err());
    }
}
