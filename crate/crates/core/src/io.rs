//! `.gfn` and `.mwt` containers: 4-byte magic, little-endian u32 header
//! length, JSON header, then little-endian f64 payload.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{GridFunction, GridGeometry};
use crate::spd::Mat;
use crate::weights::{MatrixWeight, WeightMeta, WeightSpec};

const GFN_MAGIC: &[u8; 4] = b"GFN1";
const MWT_MAGIC: &[u8; 4] = b"MWT1";

#[derive(Debug, Serialize, Deserialize)]
struct GfnHeader {
    d: usize,
    #[serde(rename = "L")]
    depth: usize,
    n: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct MwtHeader {
    d: usize,
    #[serde(rename = "L")]
    depth: usize,
    n: usize,
    kind: String,
    params: Option<WeightSpec>,
    seed: u64,
}

fn write_container(out: &mut impl Write, magic: &[u8; 4], header: &impl Serialize, payload: &[f64]) -> Result<()> {
    let h = serde_json::to_vec(header)?;
    out.write_all(magic)?;
    out.write_all(&(h.len() as u32).to_le_bytes())?;
    out.write_all(&h)?;
    let mut buf = Vec::with_capacity(payload.len() * 8);
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_container(input: &mut impl Read, magic: &[u8; 4]) -> Result<(Vec<u8>, Vec<f64>)> {
    let mut m = [0u8; 4];
    input.read_exact(&mut m)?;
    if &m != magic {
        return Err(LabError::Format(format!("bad magic {:?}", String::from_utf8_lossy(&m))));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut header)?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 {
        return Err(LabError::Format("payload is not a whole number of f64 values".into()));
    }
    let payload = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, payload))
}

pub fn write_gfn(out: &mut impl Write, f: &GridFunction) -> Result<()> {
    let h = GfnHeader { d: f.geom.d, depth: f.geom.depth, n: f.n };
    write_container(out, GFN_MAGIC, &h, &f.data)
}

pub fn read_gfn(input: &mut impl Read) -> Result<GridFunction> {
    let (header, payload) = read_container(input, GFN_MAGIC)?;
    let h: GfnHeader = serde_json::from_slice(&header)?;
    let geom = GridGeometry::new(h.d, h.depth)?;
    GridFunction::new(geom, h.n, payload)
}

pub fn write_mwt(out: &mut impl Write, w: &MatrixWeight) -> Result<()> {
    let kind = match &w.meta.spec {
        Some(spec) => serde_json::to_value(spec)?["kind"].as_str().unwrap_or("custom").to_string(),
        None => "custom".to_string(),
    };
    let h =
        MwtHeader { d: w.geom.d, depth: w.geom.depth, n: w.n, kind, params: w.meta.spec.clone(), seed: w.meta.seed };
    write_container(out, MWT_MAGIC, &h, &w.to_flat())
}

pub fn read_mwt(input: &mut impl Read) -> Result<MatrixWeight> {
    let (header, payload) = read_container(input, MWT_MAGIC)?;
    let h: MwtHeader = serde_json::from_slice(&header)?;
    let geom = GridGeometry::new(h.d, h.depth)?;
    let nn = h.n * h.n;
    if h.n == 0 || payload.len() != geom.cells() * nn {
        return Err(LabError::Format("payload length does not match header".into()));
    }
    let mats = payload.chunks_exact(nn).map(|c| Mat::from_slice(h.n, h.n, c)).collect();
    MatrixWeight::new(geom, mats, WeightMeta { spec: h.params, seed: h.seed })
}

pub fn save_gfn(path: &Path, f: &GridFunction) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_gfn(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load_gfn(path: &Path) -> Result<GridFunction> {
    read_gfn(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_mwt(path: &Path, w: &MatrixWeight) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_mwt(&mut file, w)?;
    file.flush()?;
    Ok(())
}

pub fn load_mwt(path: &Path) -> Result<MatrixWeight> {
    read_mwt(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::generate_weight;

    #[test]
    fn gfn_round_trip() {
        let g = GridGeometry::new(2, 3).unwrap();
        let f = GridFunction::from_fn(g, 3, |c| vec![c as f64, -0.5 * c as f64, 1e-300]);
        let mut buf = Vec::new();
        write_gfn(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"GFN1");
        assert_eq!(read_gfn(&mut buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn mwt_round_trip() {
        let g = GridGeometry::new(1, 4).unwrap();
        let spec = WeightSpec::RandomLogLipschitz { n: 2, amplitude: 0.5, modes: 2 };
        let w = generate_weight(g, &spec, 3).unwrap();
        let mut buf = Vec::new();
        write_mwt(&mut buf, &w).unwrap();
        let back = read_mwt(&mut buf.as_slice()).unwrap();
        assert_eq!(back.to_flat(), w.to_flat());
        assert_eq!(back.meta, w.meta);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let g = GridGeometry::new(1, 2).unwrap();
        let f = GridFunction::zeros(g, 1);
        let mut buf = Vec::new();
        write_gfn(&mut buf, &f).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_gfn(&mut bad.as_slice()), Err(LabError::Format(_))));
        buf.pop();
        assert!(read_gfn(&mut buf.as_slice()).is_err());
        assert!(read_mwt(&mut b"GFN1".as_slice()).is_err());
    }
}
