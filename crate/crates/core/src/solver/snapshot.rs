//! Self-describing binary field snapshots.
//!
//! Layout: the 8-byte magic `SHEARSNP`, a little-endian `u32` header
//! length, a UTF-8 JSON header, then every component in header order as
//! little-endian `f64` with `x₃` varying fastest.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::field::VelocityField;
use super::grid::{Field3, Grid, GridSpec};
use crate::error::{Error, Result};
use crate::geometry::Geometry;

pub const MAGIC: &[u8; 8] = b"SHEARSNP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    /// `[n1, n2, nz]`.
    pub shape: [usize; 3],
    /// Where the first sample of the component sits, in units of the
    /// spacing: `(x₁, x₂, x₃)` of index `(0, 0, 0)`.
    pub origin: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub version: u32,
    pub length: f64,
    pub height: f64,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub spacing: [f64; 3],
    pub time: f64,
    pub wall_speed: f64,
    pub dtype: String,
    pub byte_order: String,
    pub index_order: String,
    pub components: Vec<Component>,
}

fn header_for(field: &VelocityField) -> SnapshotHeader {
    let g = &field.grid;
    let comp = |name: &str, nz: usize, origin: [f64; 3]| Component {
        name: name.into(),
        shape: [g.n1, g.n2, nz],
        origin,
    };
    SnapshotHeader {
        version: FORMAT_VERSION,
        length: g.geometry.length,
        height: g.geometry.height,
        n1: g.n1,
        n2: g.n2,
        n3: g.n3,
        spacing: [g.dx1, g.dx2, g.dz],
        time: field.time,
        wall_speed: field.wall_speed,
        dtype: "f64".into(),
        byte_order: "little".into(),
        index_order: "(i*n2 + j)*nz + k".into(),
        components: vec![
            comp("u1", g.n3, [0.0, 0.5, 0.5]),
            comp("u2", g.n3, [0.5, 0.0, 0.5]),
            comp("u3", g.n3 + 1, [0.5, 0.5, 0.0]),
            comp("p", g.n3, [0.5, 0.5, 0.5]),
        ],
    }
}

pub fn write_snapshot<W: Write>(field: &VelocityField, mut out: W) -> Result<()> {
    let header = serde_json::to_vec(&header_for(field)).map_err(|e| Error::Format {
        what: "snapshot header",
        reason: e.to_string(),
    })?;
    let io = |e: std::io::Error| Error::Format {
        what: "snapshot",
        reason: e.to_string(),
    };
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&(header.len() as u32).to_le_bytes())
        .map_err(io)?;
    out.write_all(&header).map_err(io)?;
    let mut buf = Vec::new();
    for f in [&field.u1, &field.u2, &field.u3, &field.p] {
        buf.clear();
        buf.reserve(f.data.len() * 8);
        for v in &f.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<VelocityField> {
    let bad = |reason: String| Error::Format {
        what: "snapshot",
        reason,
    };
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|e| bad(e.to_string()))?;
    if &magic != MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len).map_err(|e| bad(e.to_string()))?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    input
        .read_exact(&mut header)
        .map_err(|e| bad(e.to_string()))?;
    let header: SnapshotHeader = serde_json::from_slice(&header).map_err(|e| bad(e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {}", header.version)));
    }
    if header.dtype != "f64" || header.byte_order != "little" {
        return Err(bad("only little-endian f64 data is supported".into()));
    }
    let geometry = Geometry::new(header.length, header.height)?;
    let spec = GridSpec {
        n1: header.n1,
        n2: header.n2,
        n3: header.n3,
        dt: 1.0,
        cfl_safety: 1.0,
    };
    spec.validate()?;
    let mut field = VelocityField::zeros(&Grid::new(&geometry, &spec));
    field.time = header.time;
    field.wall_speed = header.wall_speed;
    let names = ["u1", "u2", "u3", "p"];
    if header.components.len() != names.len()
        || header
            .components
            .iter()
            .zip(names)
            .any(|(c, n)| c.name != n)
    {
        return Err(bad("unexpected component list".into()));
    }
    let targets: [&mut Field3; 4] = [&mut field.u1, &mut field.u2, &mut field.u3, &mut field.p];
    let mut word = [0u8; 8];
    for (component, target) in header.components.iter().zip(targets) {
        let expected = [target.n1, target.n2, target.nz];
        if component.shape != expected {
            return Err(bad(format!(
                "component {} has shape {:?}, expected {:?}",
                component.name, component.shape, expected
            )));
        }
        for v in target.data.iter_mut() {
            input
                .read_exact(&mut word)
                .map_err(|e| bad(e.to_string()))?;
            *v = f64::from_le_bytes(word);
        }
    }
    Ok(field)
}

pub fn save_snapshot(field: &VelocityField, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_snapshot(field, &mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: &Path) -> Result<VelocityField> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_snapshot(std::io::BufReader::new(file))
}
