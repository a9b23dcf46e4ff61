//! Binary field snapshots.
//!
//! Layout: magic `NLSF`, version u32, dim u32, per-axis u64 counts, then
//! little-endian f64 interleaved (re, im) in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use nls_core::{C64, ComplexField, Grid};

const MAGIC: &[u8; 4] = b"NLSF";
const VERSION: u32 = 1;

pub fn write_snapshot(path: &Path, field: &ComplexField) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 16 * field.values().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let shape = field.grid().shape();
    buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &n in shape {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .with_context(|| format!("writing snapshot {}", path.display()))
}

/// Raw snapshot payload; the grid geometry comes from the run config.
pub struct SnapshotData {
    pub shape: Vec<usize>,
    pub values: Vec<C64>,
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotData> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading snapshot {}", path.display()))?;
    let take = |bytes: &[u8], at: &mut usize, n: usize| -> Result<Vec<u8>> {
        if *at + n > bytes.len() {
            bail!("snapshot truncated at byte {}", *at);
        }
        let out = bytes[*at..*at + n].to_vec();
        *at += n;
        Ok(out)
    };
    let mut at = 0usize;
    let magic = take(&bytes, &mut at, 4)?;
    if magic != MAGIC {
        bail!("bad snapshot magic {:?}", magic);
    }
    let version = u32::from_le_bytes(take(&bytes, &mut at, 4)?.try_into().unwrap());
    if version != VERSION {
        bail!("unsupported snapshot version {version} (reader supports {VERSION})");
    }
    let dim = u32::from_le_bytes(take(&bytes, &mut at, 4)?.try_into().unwrap()) as usize;
    if dim == 0 || dim > 2 {
        bail!("snapshot dimension {dim} out of range");
    }
    let mut shape = Vec::with_capacity(dim);
    for _ in 0..dim {
        shape.push(u64::from_le_bytes(take(&bytes, &mut at, 8)?.try_into().unwrap()) as usize);
    }
    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        let re = f64::from_le_bytes(take(&bytes, &mut at, 8)?.try_into().unwrap());
        let im = f64::from_le_bytes(take(&bytes, &mut at, 8)?.try_into().unwrap());
        values.push(C64::new(re, im));
    }
    if at != bytes.len() {
        bail!("snapshot has {} trailing bytes", bytes.len() - at);
    }
    Ok(SnapshotData { shape, values })
}

/// Reattach a snapshot to its grid.
pub fn snapshot_to_field(data: &SnapshotData, grid: &Grid) -> Result<ComplexField> {
    if data.shape != grid.shape() {
        bail!(
            "snapshot shape {:?} does not match grid {:?}",
            data.shape,
            grid.shape()
        );
    }
    Ok(ComplexField::from_values(grid, data.values.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nls_core::domain::RectDomain;

    #[test]
    fn round_trip_bitwise() {
        let grid = Grid::new(RectDomain::rectangle(1.0, 2.0).unwrap(), &[5, 7]).unwrap();
        let field = ComplexField::from_fn(&grid, |p| C64::new(p[0] * 3.7, -p[1] / 1.3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.nlsf");
        write_snapshot(&path, &field).unwrap();
        let data = read_snapshot(&path).unwrap();
        let back = snapshot_to_field(&data, &grid).unwrap();
        assert_eq!(field.values(), back.values());
    }

    #[test]
    fn corrupt_magic_and_version_rejected() {
        let grid = Grid::new(RectDomain::interval(1.0).unwrap(), &[8]).unwrap();
        let field = ComplexField::zeros(&grid);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.nlsf");
        write_snapshot(&path, &field).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_snapshot(&path).is_err());

        write_snapshot(&path, &field).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99; // future version
        std::fs::write(&path, &bytes).unwrap();
        let err = read_snapshot(&path).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }

    #[test]
    fn truncation_detected() {
        let grid = Grid::new(RectDomain::interval(1.0).unwrap(), &[8]).unwrap();
        let field = ComplexField::zeros(&grid);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.nlsf");
        write_snapshot(&path, &field).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_snapshot(&path).unwrap_err().to_string().contains("truncated"));
    }
}
