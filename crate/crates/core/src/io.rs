//! SFLD v1 field files.
//!
//! Layout (little endian throughout):
//!   bytes 0..4   magic "SFLD"
//!   u32          version = 1
//!   u8           domain kind (0 = cube, 1 = ball, 2 = half_ball)
//!   u32          n
//!   f64          h
//!   n^3 records  node value, 3 x f64, row-major with x fastest;
//!                nodes outside the domain are written as NaN triplets
//!   u32          vertex count V
//!   V records    position 3 x f64, value 3 x f64, area weight f64,
//!                tag u8 (0 = curved, 1 = flat)

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::domain::{build_domain, DomainKind};
use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::vec3::{self, Vec3};

const MAGIC: [u8; 4] = *b"SFLD";
const VERSION: u32 = 1;

pub fn save_field(field: &SphereField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let grid = &field.grid;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[grid.kind.code()])?;
    w.write_all(&(grid.n as u32).to_le_bytes())?;
    w.write_all(&grid.h.to_le_bytes())?;
    for (idx, &inside) in grid.inside.iter().enumerate() {
        let v = if inside {
            field.node_values[idx]
        } else {
            [f64::NAN; 3]
        };
        for c in v {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    let surface = &grid.surface;
    w.write_all(&(surface.len() as u32).to_le_bytes())?;
    for v in 0..surface.len() {
        for c in surface.positions[v] {
            w.write_all(&c.to_le_bytes())?;
        }
        for c in field.vertex_values[v] {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&surface.weights[v].to_le_bytes())?;
        w.write_all(&[surface.tags[v]])?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated file".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }
}

pub fn load_field(path: &Path) -> Result<SphereField> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    let magic = r.bytes::<4>()?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = DomainKind::from_code(r.u8()?)?;
    let n = r.u32()? as usize;
    let h = r.f64()?;
    let grid = build_domain(kind, n)?;
    if (h - grid.h).abs() > 1e-15 {
        return Err(Error::Format(format!(
            "stored spacing {h} does not match 2/(n-1) = {}",
            grid.h
        )));
    }

    let mut node_values = Vec::with_capacity(grid.num_nodes());
    for idx in 0..grid.num_nodes() {
        let v = r.vec3()?;
        if grid.inside[idx] {
            if !vec3::is_finite(v) {
                return Err(Error::Format(format!("non-finite value at in-domain node {idx}")));
            }
            if (vec3::norm(v) - 1.0).abs() > 1e-9 {
                return Err(Error::Format(format!("node {idx} value is not unit length")));
            }
        }
        node_values.push(v);
    }

    let vcount = r.u32()? as usize;
    if vcount != grid.surface.len() {
        return Err(Error::Format(format!(
            "vertex count {vcount} does not match the rebuilt surface ({})",
            grid.surface.len()
        )));
    }
    let mut grid = grid;
    let mut vertex_values = Vec::with_capacity(vcount);
    for v in 0..vcount {
        let pos = r.vec3()?;
        let val = r.vec3()?;
        let weight = r.f64()?;
        let tag = r.u8()?;
        if !vec3::is_finite(val) || (vec3::norm(val) - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("vertex {v} value is not unit length")));
        }
        // trust the stored geometry byte-for-byte; it must match the rebuild
        if vec3::dist(pos, grid.surface.positions[v]) > 1e-12 {
            return Err(Error::Format(format!("vertex {v} position drifted from the rebuilt surface")));
        }
        grid.surface.positions[v] = pos;
        grid.surface.weights[v] = weight;
        grid.surface.tags[v] = tag;
        vertex_values.push(val);
    }
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Format("trailing bytes after payload".into())),
        Err(e) => return Err(Error::Io(e)),
    }
    grid.surface.rebuild_adjacency();

    Ok(SphereField {
        grid: Arc::new(grid),
        node_values,
        vertex_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::hedgehog;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Arc::new(build_domain(DomainKind::Ball, 17).unwrap());
        let field = hedgehog(grid, [0.1, -0.2, 0.05]).unwrap();
        let p1 = dir.path().join("a.sfld");
        let p2 = dir.path().join("b.sfld");
        save_field(&field, &p1).unwrap();
        let loaded = load_field(&p1).unwrap();
        save_field(&loaded, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.sfld");
        let mut f = File::create(&p).unwrap();
        f.write_all(b"NOPE0000000000000000").unwrap();
        drop(f);
        match load_field(&p) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Arc::new(build_domain(DomainKind::Ball, 9).unwrap());
        let field = SphereField::constant(grid, [0.0, 0.0, 1.0]);
        let p = dir.path().join("t.sfld");
        save_field(&field, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let cut = p.with_extension("cut");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        match load_field(&cut) {
            Err(Error::Format(msg)) => assert!(msg.contains("truncated"), "{msg}"),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }
}
