//! Flat binary snapshots: `VXSNAP01`, u64 n, f64 L, t, ν, u64 N, then n² little-endian
//! f64 for the total field followed by each component.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::VorticityField;

pub const MAGIC: &[u8; 8] = b"VXSNAP01";

pub fn write_snapshot(path: &Path, field: &VorticityField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(field.n as u64).to_le_bytes())?;
    for x in [field.l_box, field.t, field.nu] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&(field.components.len() as u64).to_le_bytes())?;
    for f in std::iter::once(&field.total).chain(&field.components) {
        for x in f {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Circulations are not stored; they are recovered as the component masses.
pub fn read_snapshot(path: &Path) -> Result<VorticityField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{} is not a vorticity snapshot", path.display())));
    }
    let mut b = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut b)?;
        Ok(b)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let l_box = f64::from_le_bytes(next(&mut r)?);
    let t = f64::from_le_bytes(next(&mut r)?);
    let nu = f64::from_le_bytes(next(&mut r)?);
    let count = u64::from_le_bytes(next(&mut r)?) as usize;
    if n == 0 || n > 1 << 14 || count > 1024 {
        return Err(Error::Format(format!("implausible header: n = {n}, N = {count}")));
    }
    let read_field = |r: &mut BufReader<File>| -> Result<Vec<f64>> {
        let mut raw = vec![0u8; 8 * n * n];
        r.read_exact(&mut raw)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let total = read_field(&mut r)?;
    let components: Vec<Vec<f64>> = (0..count).map(|_| read_field(&mut r)).collect::<Result<_>>()?;
    let mut field = VorticityField { n, l_box, t, nu, alphas: Vec::new(), total, components };
    field.alphas = field.components.iter().map(|c| field.integral(c)).collect();
    Ok(field)
}

/// Appends `snapshot_path,t,nu` to an index CSV, writing the header on creation.
pub fn append_index(index: &Path, snapshot: &Path, t: f64, nu: f64) -> Result<()> {
    let fresh = !index.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(index)?;
    if fresh {
        writeln!(f, "snapshot_path,t,nu")?;
    }
    writeln!(f, "{},{t:e},{nu:e}", snapshot.display())?;
    Ok(())
}
