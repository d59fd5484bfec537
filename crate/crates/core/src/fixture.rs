//! `UTPF` matrix fixtures: magic, `u32` rows, `u32` cols, then `rows * cols`
//! little-endian `f32` values in row-major order. Values widen to `f64` on load.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 4] = b"UTPF";
const HEADER_LEN: usize = 12;

pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Fixture("missing UTPF header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let body = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Fixture(format!("{rows}x{cols} overflows")))?;
    if body.len() != expected {
        return Err(Error::Fixture(format!("{rows}x{cols} fixture needs {expected} data bytes, found {}", body.len())));
    }
    let data = body.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))).collect();
    Matrix::new(rows, cols, data)
}

pub fn read(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
    decode(&bytes).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Matrix::new(1, 2, vec![1.0, -2.5]).unwrap();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"UTPF");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 20);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(decode(b"UTP").is_err());
        assert!(decode(b"XXXX\x01\0\0\0\x01\0\0\0\0\0\0\0").is_err());
        assert!(decode(b"UTPF\x01\0\0\0\x02\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.utpf");
        let m = Matrix::new(2, 2, vec![0.5, 0.25, -1.0, 8.0]).unwrap();
        write(&p, &m).unwrap();
        assert_eq!(read(&p).unwrap(), m);
    }

    proptest! {
        #[test]
        fn f32_values_round_trip_exactly(rows in 0usize..5, cols in 0usize..5, seed in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 25)) {
            let data: Vec<f64> = seed.iter().take(rows * cols).map(|&v| f64::from(v)).collect();
            let m = Matrix::new(rows, cols, data).unwrap();
            prop_assert_eq!(decode(&encode(&m)).unwrap(), m);
        }
    }
}
