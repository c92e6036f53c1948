//! On-disk formats: a little-endian binary container for sampled fields with a
//! JSON sidecar describing the grid, and plain CSV writers for experiment
//! outputs. Round trips are bit-exact.

use crate::error::{CdError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::SpaceTimeGrid;
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

const MAGIC: &[u8; 8] = b"CDFIELD\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Real,
    Complex,
}

/// JSON sidecar written next to every binary field file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMeta {
    pub dim: usize,
    pub n_nodes: usize,
    pub m_steps: usize,
    pub t_horizon: f64,
    pub components: usize,
    pub value_kind: ValueKind,
    pub label: String,
}

fn write_header<W: Write>(w: &mut W, meta: &FieldMeta) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(meta.dim as u32).to_le_bytes())?;
    w.write_all(&(meta.n_nodes as u32).to_le_bytes())?;
    w.write_all(&(meta.m_steps as u32).to_le_bytes())?;
    w.write_all(&meta.t_horizon.to_le_bytes())?;
    w.write_all(&(meta.components as u32).to_le_bytes())?;
    let kind: u32 = match meta.value_kind {
        ValueKind::Real => 0,
        ValueKind::Complex => 1,
    };
    w.write_all(&kind.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_header<R: Read>(r: &mut R) -> Result<FieldMeta> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CdError::InvalidArgument("not a field container (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(CdError::InvalidArgument(format!("unsupported container version {version}")));
    }
    let dim = read_u32(r)? as usize;
    let n_nodes = read_u32(r)? as usize;
    let m_steps = read_u32(r)? as usize;
    let t_horizon = read_f64(r)?;
    let components = read_u32(r)? as usize;
    let value_kind = match read_u32(r)? {
        0 => ValueKind::Real,
        1 => ValueKind::Complex,
        k => return Err(CdError::InvalidArgument(format!("unknown value kind {k}"))),
    };
    Ok(FieldMeta { dim, n_nodes, m_steps, t_horizon, components, value_kind, label: String::new() })
}

fn component_values(field: &ScalarField<f64>, out: &mut Vec<f64>) {
    out.extend(field.values().iter().copied());
}

fn write_payload<W: Write>(w: &mut W, data: &[f64]) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn meta_for(grid: &SpaceTimeGrid, components: usize, value_kind: ValueKind, label: &str) -> FieldMeta {
    FieldMeta {
        dim: grid.dim(),
        n_nodes: grid.n_nodes(),
        m_steps: grid.m_steps(),
        t_horizon: grid.t_horizon(),
        components,
        value_kind,
        label: label.to_string(),
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    std::path::PathBuf::from(p)
}

fn save_raw(path: &Path, meta: &FieldMeta, data: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut w, meta)?;
    write_payload(&mut w, data)?;
    w.flush()?;
    let sidecar = serde_json::to_string_pretty(meta)?;
    std::fs::write(sidecar_path(path), sidecar)?;
    Ok(())
}

fn load_raw(path: &Path) -> Result<(FieldMeta, Vec<f64>)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut meta = read_header(&mut r)?;
    if let Ok(text) = std::fs::read_to_string(sidecar_path(path)) {
        let side: FieldMeta = serde_json::from_str(&text)?;
        meta.label = side.label;
    }
    let slots = (meta.m_steps + 1) * meta.n_nodes.pow(meta.dim as u32) * meta.components;
    let doubles = match meta.value_kind {
        ValueKind::Real => slots,
        ValueKind::Complex => 2 * slots,
    };
    let mut data = Vec::with_capacity(doubles);
    for _ in 0..doubles {
        data.push(read_f64(&mut r)?);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CdError::InvalidArgument("trailing bytes after field payload".into()));
    }
    Ok((meta, data))
}

fn grid_from_meta(meta: &FieldMeta) -> Result<Arc<SpaceTimeGrid>> {
    SpaceTimeGrid::new(meta.dim, meta.n_nodes, meta.m_steps, meta.t_horizon)
}

pub fn save_scalar(path: &Path, field: &ScalarField<f64>, label: &str) -> Result<()> {
    let meta = meta_for(field.grid(), 1, ValueKind::Real, label);
    let data: Vec<f64> = field.values().iter().copied().collect();
    save_raw(path, &meta, &data)
}

pub fn load_scalar(path: &Path) -> Result<(ScalarField<f64>, FieldMeta)> {
    let (meta, data) = load_raw(path)?;
    if meta.components != 1 || meta.value_kind != ValueKind::Real {
        return Err(CdError::InvalidArgument("container does not hold one real component".into()));
    }
    let grid = grid_from_meta(&meta)?;
    let values = ArrayD::from_shape_vec(IxDyn(&grid.field_shape()), data)
        .map_err(|e| CdError::InvalidArgument(e.to_string()))?;
    Ok((ScalarField::from_values(&grid, values)?, meta))
}

pub fn save_complex_scalar(path: &Path, field: &ScalarField<Complex64>, label: &str) -> Result<()> {
    let meta = meta_for(field.grid(), 1, ValueKind::Complex, label);
    let mut data = Vec::with_capacity(2 * field.values().len());
    for v in field.values().iter() {
        data.push(v.re);
        data.push(v.im);
    }
    save_raw(path, &meta, &data)
}

pub fn load_complex_scalar(path: &Path) -> Result<(ScalarField<Complex64>, FieldMeta)> {
    let (meta, data) = load_raw(path)?;
    if meta.components != 1 || meta.value_kind != ValueKind::Complex {
        return Err(CdError::InvalidArgument("container does not hold one complex component".into()));
    }
    let grid = grid_from_meta(&meta)?;
    let values: Vec<Complex64> =
        data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let values = ArrayD::from_shape_vec(IxDyn(&grid.field_shape()), values)
        .map_err(|e| CdError::InvalidArgument(e.to_string()))?;
    Ok((ScalarField::from_values(&grid, values)?, meta))
}

pub fn save_vector(path: &Path, field: &VectorField<f64>, label: &str) -> Result<()> {
    let meta = meta_for(field.grid(), field.dim(), ValueKind::Real, label);
    let mut data = Vec::new();
    for c in field.components() {
        component_values(c, &mut data);
    }
    save_raw(path, &meta, &data)
}

pub fn load_vector(path: &Path) -> Result<(VectorField<f64>, FieldMeta)> {
    let (meta, data) = load_raw(path)?;
    if meta.value_kind != ValueKind::Real || meta.components != meta.dim {
        return Err(CdError::InvalidArgument("container does not hold an n-component real field".into()));
    }
    let grid = grid_from_meta(&meta)?;
    let per = data.len() / meta.components;
    let mut comps = Vec::with_capacity(meta.components);
    for j in 0..meta.components {
        let chunk = data[j * per..(j + 1) * per].to_vec();
        let values = ArrayD::from_shape_vec(IxDyn(&grid.field_shape()), chunk)
            .map_err(|e| CdError::InvalidArgument(e.to_string()))?;
        comps.push(ScalarField::from_values(&grid, values)?);
    }
    Ok((VectorField::new(comps)?, meta))
}

/// Deterministic CSV writer: fixed header, `{:.17e}` cells, LF line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, VectorField};
    use crate::grid::SpaceTimeGrid;

    fn grid() -> Arc<SpaceTimeGrid> {
        SpaceTimeGrid::new(2, 9, 8, 0.75).unwrap()
    }

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |t, x| (t + 1.0) * (x[0] * 7.3).sin() + x[1] / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.field");
        save_scalar(&p, &f, "state").unwrap();
        let (back, meta) = load_scalar(&p).unwrap();
        assert_eq!(meta.label, "state");
        assert!(f
            .values()
            .iter()
            .zip(back.values().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn complex_round_trip_is_bit_exact() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |t, x| (t + 1.0) * (x[0] - 0.3))
            .into_complex()
            .map(|v| Complex64::new(v.re, v.re * 0.5 - 0.1));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.field");
        save_complex_scalar(&p, &f, "remainder").unwrap();
        let (back, _) = load_complex_scalar(&p).unwrap();
        assert!(f.values().iter().zip(back.values().iter()).all(|(a, b)| {
            a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
        }));
    }

    #[test]
    fn vector_round_trip_is_bit_exact() {
        let g = grid();
        let f = VectorField::from_fns(&g, |t, x, j| t * 0.2 + x[j] * (j as f64 + 1.5));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.field");
        save_vector(&p, &f, "convection").unwrap();
        let (back, _) = load_vector(&p).unwrap();
        for j in 0..2 {
            assert!(f
                .component(j)
                .values()
                .iter()
                .zip(back.component(j).values().iter())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.field");
        std::fs::write(&p, b"NOTAFLD\0rest").unwrap();
        assert!(load_scalar(&p).is_err());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |_, x| x[0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.field");
        save_scalar(&p, &f, "x").unwrap();
        assert!(load_complex_scalar(&p).is_err());
        assert!(load_vector(&p).is_err());
    }

    #[test]
    fn csv_output_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let rows = vec![vec![1.0, 2.5e-3], vec![-0.75, 3.0]];
        write_csv(&p1, &["lambda", "ratio"], &rows).unwrap();
        write_csv(&p2, &["lambda", "ratio"], &rows).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        assert!(text.starts_with("lambda,ratio\n"));
    }
}
