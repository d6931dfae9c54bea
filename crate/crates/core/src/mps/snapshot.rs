use std::io::{Read, Write};

use ndarray::Array3;

use super::{MatrixProductState, MpsError, MpsResult, SiteTensor};
use crate::linalg::C64;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ACHI";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Layout: magic, `u32` version, `u64` N, `u64` d, then per site `u64` left and
/// right dims followed by the entries as little-endian `(re, im)` pairs in
/// `(left, phys, right)` row-major order.
pub fn write_snapshot<W: Write>(mps: &MatrixProductState, mut w: W) -> MpsResult<()> {
    let io = |e: std::io::Error| MpsError::Snapshot(e.to_string());
    w.write_all(SNAPSHOT_MAGIC).map_err(io)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(mps.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(mps.phys_dim() as u64).to_le_bytes()).map_err(io)?;
    for s in mps.sites() {
        w.write_all(&(s.left_dim() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(s.right_dim() as u64).to_le_bytes()).map_err(io)?;
    }
    let mut buf = Vec::new();
    for s in mps.sites() {
        buf.clear();
        for z in s.data().iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> MpsResult<MatrixProductState> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(MpsError::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != SNAPSHOT_VERSION {
        return Err(MpsError::Snapshot(format!("unsupported version {version}")));
    }
    let n = read_dim(&mut r)?;
    let d = read_dim(&mut r)?;
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        dims.push((read_dim(&mut r)?, read_dim(&mut r)?));
    }
    let mut sites = Vec::with_capacity(n);
    for (l, rd) in dims {
        let len = l
            .checked_mul(d)
            .and_then(|x| x.checked_mul(rd))
            .ok_or_else(|| MpsError::Snapshot("dimension overflow".into()))?;
        let mut entries = Vec::with_capacity(len);
        for _ in 0..len {
            let re = f64::from_le_bytes(read_array(&mut r)?);
            let im = f64::from_le_bytes(read_array(&mut r)?);
            entries.push(C64::new(re, im));
        }
        let a = Array3::from_shape_vec((l, d, rd), entries)
            .map_err(|e| MpsError::Snapshot(e.to_string()))?;
        sites.push(SiteTensor::new(a)?);
    }
    MatrixProductState::new(sites)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> MpsResult<()> {
    r.read_exact(buf).map_err(|e| MpsError::Snapshot(e.to_string()))
}

fn read_array<R: Read, const K: usize>(r: &mut R) -> MpsResult<[u8; K]> {
    let mut b = [0u8; K];
    read_exact(r, &mut b)?;
    Ok(b)
}

fn read_dim<R: Read>(r: &mut R) -> MpsResult<usize> {
    let v = u64::from_le_bytes(read_array(r)?);
    usize::try_from(v)
        .ok()
        .filter(|&x| x >= 1 && x <= 1 << 24)
        .ok_or_else(|| MpsError::Snapshot(format!("implausible dimension {v}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = MatrixProductState::random(7, 2, 6, 99).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"ACHI");
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back.sites(), m.sites());
    }

    #[test]
    fn rejects_corruption() {
        let m = MatrixProductState::product_state(3, 2, &[0, 1, 0]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&m, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(bad.as_slice()), Err(MpsError::Snapshot(_))));
        let mut wrong_version = buf.clone();
        wrong_version[4] = 9;
        assert!(read_snapshot(wrong_version.as_slice()).is_err());
        assert!(read_snapshot(&buf[..buf.len() - 3]).is_err());
    }
}
