//! Binary checkpoint of a [`FieldParams`].
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic      "EVF1"
//! l_pos      u32
//! l_dir      u32
//! eps_u      f64
//! n_arrays   u32
//! n_arrays × { name_len u32, name utf-8, rows u32, cols u32 }
//! payload    every array's values as f64, row-major, in table order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{FieldConfig, FieldError, FieldParams, Linear, HEAD_OUTPUTS};
use crate::autodiff::ParamStore;

const MAGIC: &[u8; 4] = b"EVF1";

pub fn write_checkpoint(params: &FieldParams, mut w: impl Write) -> Result<(), FieldError> {
    let cfg = &params.config;
    w.write_all(MAGIC)?;
    w.write_all(&(cfg.l_pos as u32).to_le_bytes())?;
    w.write_all(&(cfg.l_dir as u32).to_le_bytes())?;
    w.write_all(&cfg.eps_u.to_le_bytes())?;
    w.write_all(&(params.store.len() as u32).to_le_bytes())?;
    for (name, v) in params.store.iter_values() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(v.nrows() as u32).to_le_bytes())?;
        w.write_all(&(v.ncols() as u32).to_le_bytes())?;
    }
    for (_, v) in params.store.iter_values() {
        for x in v.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(params: &FieldParams, path: impl AsRef<Path>) -> Result<(), FieldError> {
    let f = File::create(path)?;
    write_checkpoint(params, BufWriter::new(f))
}

fn read_u32(r: &mut impl Read) -> Result<u32, FieldError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, FieldError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn bad(msg: impl Into<String>) -> FieldError {
    FieldError::Checkpoint(msg.into())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<FieldParams, FieldError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("magic mismatch"));
    }
    let l_pos = read_u32(&mut r)? as usize;
    let l_dir = read_u32(&mut r)? as usize;
    let eps_u = read_f64(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    if n > 4096 {
        return Err(bad(format!("implausible array count {n}")));
    }
    let mut table = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_u32(&mut r)? as usize;
        if len > 256 {
            return Err(bad("array name too long"));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("array name is not utf-8"))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        table.push((name, rows, cols));
    }
    let mut store = ParamStore::new();
    for (name, rows, cols) in table {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let x = read_f64(&mut r)?;
            if !x.is_finite() {
                return Err(bad(format!("non-finite value in `{name}`")));
            }
            data.push(x);
        }
        let arr = Array2::from_shape_vec((rows, cols), data).expect("shape from table");
        store.insert(name, arr);
    }
    assemble(store, l_pos, l_dir, eps_u)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<FieldParams, FieldError> {
    let f = File::open(path)?;
    read_checkpoint(BufReader::new(f))
}

fn layer(store: &ParamStore, name: &str) -> Result<Linear, FieldError> {
    let weight = store
        .id(&format!("{name}.weight"))
        .ok_or_else(|| bad(format!("missing `{name}.weight`")))?;
    let bias = store
        .id(&format!("{name}.bias"))
        .ok_or_else(|| bad(format!("missing `{name}.bias`")))?;
    let (w, b) = (store.value(weight), store.value(bias));
    if b.nrows() != 1 || b.ncols() != w.ncols() {
        return Err(bad(format!("`{name}` bias does not match weight")));
    }
    Ok(Linear { weight, bias })
}

fn assemble(store: ParamStore, l_pos: usize, l_dir: usize, eps_u: f64) -> Result<FieldParams, FieldError> {
    let mut trunk = Vec::new();
    while store.id(&format!("trunk.{}.weight", trunk.len())).is_some() {
        trunk.push(layer(&store, &format!("trunk.{}", trunk.len()))?);
    }
    let density = layer(&store, "density")?;
    let head = layer(&store, "head")?;
    let width = trunk
        .first()
        .map(|l| store.value(l.weight).ncols())
        .unwrap_or(0);
    let config = FieldConfig {
        l_pos,
        l_dir,
        width,
        depth: trunk.len(),
        eps_u,
    };
    let mut fan_in = config.pos_dim();
    for l in &trunk {
        if store.value(l.weight).dim() != (fan_in, width) {
            return Err(bad("trunk layer shapes do not chain"));
        }
        fan_in = width;
    }
    if store.value(density.weight).dim() != (fan_in, 1) {
        return Err(bad("density head shape"));
    }
    if store.value(head.weight).dim() != (fan_in + config.dir_dim(), HEAD_OUTPUTS) {
        return Err(bad("color/uncertainty head shape"));
    }
    let expected = 2 * trunk.len() + 4;
    if store.len() != expected {
        return Err(bad("unexpected extra arrays"));
    }
    Ok(FieldParams {
        config,
        store,
        trunk,
        density,
        head,
    })
}
