//! Ensemble and grid-field serialization.
//!
//! Ensembles are written either as CSV (a `# n,m,M` comment line, then one
//! row per coordinate) or as a little-endian binary blob: the magic bytes
//! `ENSB`, three `u64` dimensions and the column-major `f64` data.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

const MAGIC: &[u8; 4] = b"ENSB";

pub fn ensemble_to_csv(ens: &Ensemble) -> String {
    let mut out = format!("# {},{},{}\n", ens.param_dim(), ens.error_dim(), ens.size());
    for row in ens.data().row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn ensemble_from_csv(text: &str) -> Result<Ensemble> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty ensemble file".into()))?;
    let dims: Vec<usize> = header
        .trim_start_matches('#')
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("bad header {header:?}: {e}"))))
        .collect::<Result<_>>()?;
    let [n, m, size] = dims[..] else {
        return Err(Error::Parse(format!("header must hold n,m,M, got {header:?}")));
    };
    let mut values = Vec::with_capacity((n + m) * size);
    let mut rows = 0;
    for line in lines {
        for tok in line.split(',') {
            values.push(tok.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad value {tok:?}: {e}")))?);
        }
        rows += 1;
    }
    if rows != n + m || values.len() != (n + m) * size {
        return Err(Error::Parse(format!("expected {} rows of {size} values", n + m)));
    }
    Ensemble::new(DMatrix::from_row_slice(n + m, size, &values), n, m)
}

pub fn write_ensemble_binary<W: Write>(ens: &Ensemble, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    for d in [ens.param_dim(), ens.error_dim(), ens.size()] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for x in ens.data().iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_ensemble_binary<R: Read>(mut r: R) -> Result<Ensemble> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not an ensemble file".into()));
    }
    let mut dims = [0usize; 3];
    let mut buf = [0u8; 8];
    for d in &mut dims {
        r.read_exact(&mut buf)?;
        *d = usize::try_from(u64::from_le_bytes(buf)).map_err(|_| Error::Parse("dimension overflow".into()))?;
    }
    let [n, m, size] = dims;
    let count = (n + m).checked_mul(size).ok_or_else(|| Error::Parse("dimension overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Ensemble::new(DMatrix::from_vec(n + m, size, data), n, m)
}

pub fn save_ensemble(ens: &Ensemble, path: &Path) -> Result<()> {
    let f = fs::File::create(path)?;
    write_ensemble_binary(ens, std::io::BufWriter::new(f))
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    read_ensemble_binary(BufReader::new(fs::File::open(path)?))
}

/// Metadata stored next to a grid-field CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub grid: GridSpec,
    pub fields: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<Vec<f64>>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// Named per-cell columns as `cell,x,y,<names...>`.
pub fn fields_to_csv(grid: &GridSpec, columns: &[(&str, &[f64])]) -> Result<String> {
    for (name, c) in columns {
        if c.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch(format!("field {name} has {} cells, grid {}", c.len(), grid.num_cells())));
        }
    }
    let mut out = String::from("cell,x,y");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for l in 0..grid.num_cells() {
        let p = grid.center(l);
        out.push_str(&format!("{l},{:.17e},{:.17e}", p.x, p.y));
        for (_, c) in columns {
            out.push_str(&format!(",{:.17e}", c[l]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads back the named columns written by [`fields_to_csv`].
pub fn fields_from_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut lines = BufReader::new(text.as_bytes()).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
    let names: Vec<String> = header.split(',').skip(3).map(str::to_owned).collect();
    let mut cols = vec![Vec::new(); names.len()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != names.len() + 3 {
            return Err(Error::Parse(format!("row has {} fields, expected {}", toks.len(), names.len() + 3)));
        }
        for (c, tok) in cols.iter_mut().zip(&toks[3..]) {
            c.push(tok.parse::<f64>().map_err(|e| Error::Parse(format!("bad value {tok:?}: {e}")))?);
        }
    }
    Ok(names.into_iter().zip(cols).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Ensemble {
        Ensemble::new(DMatrix::from_fn(3, 4, |r, c| (r as f64 + 0.1) * (c as f64 - 1.3) / 7.0), 2, 1).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let e = sample();
        let back = ensemble_from_csv(&ensemble_to_csv(&e)).unwrap();
        assert_eq!(back.data(), e.data());
        assert_eq!((back.param_dim(), back.error_dim()), (2, 1));
    }

    #[test]
    fn binary_round_trip() {
        let e = sample();
        let mut buf = Vec::new();
        write_ensemble_binary(&e, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 24 + 12 * 8);
        let back = read_ensemble_binary(&buf[..]).unwrap();
        assert_eq!(back.data(), e.data());
        assert!(read_ensemble_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn field_round_trip() {
        let g = GridSpec::new(3).unwrap();
        let a: Vec<f64> = (0..9).map(|x| x as f64 / 3.0).collect();
        let b: Vec<f64> = (0..9).map(|x| -(x as f64)).collect();
        let text = fields_to_csv(&g, &[("a", &a), ("b", &b)]).unwrap();
        let back = fields_from_csv(&text).unwrap();
        assert_eq!(back[0].0, "a");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].1, b);
    }
}
