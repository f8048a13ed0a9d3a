//! File formats: binary columnar ensembles with JSON sidecars, CSV density
//! grids, CSV leaf graphs, JSON report rows.

use crate::stacks::LeafStack;
use crate::torus::TorusPoint;
use crate::transport::{ParticleEnsemble, Provenance, UlamDensity};
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use std::path::Path;

/// Sidecar manifest stored next to an ensemble binary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub seed: u64,
    pub system: String,
    pub depth: usize,
    pub particles: usize,
    pub provenance: Provenance,
}

/// Write an ensemble as columnar little-endian f64: all x, then all y, then
/// all weights.
pub fn write_ensemble(
    dir: &Path,
    stem: &str,
    e: &ParticleEnsemble,
    sidecar: &EnsembleSidecar,
) -> io::Result<()> {
    let mut buf = Vec::with_capacity(e.len() * 24);
    for p in &e.points {
        buf.extend_from_slice(&p.x.to_le_bytes());
    }
    for p in &e.points {
        buf.extend_from_slice(&p.y.to_le_bytes());
    }
    for w in &e.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    std::fs::write(dir.join(format!("{stem}.bin")), &buf)?;
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    std::fs::write(dir.join(format!("{stem}.json")), json)
}

pub fn read_ensemble(dir: &Path, stem: &str) -> io::Result<(ParticleEnsemble, EnsembleSidecar)> {
    let sidecar: EnsembleSidecar = serde_json::from_slice(&std::fs::read(
        dir.join(format!("{stem}.json")),
    )?)
    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut f = std::fs::File::open(dir.join(format!("{stem}.bin")))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    let n = sidecar.particles;
    if buf.len() != n * 24 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("expected {} bytes, found {}", n * 24, buf.len()),
        ));
    }
    let read_f64 = |i: usize| f64::from_le_bytes(buf[8 * i..8 * i + 8].try_into().unwrap());
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        points.push(TorusPoint::new(read_f64(i), read_f64(n + i)));
    }
    let weights: Vec<f64> = (0..n).map(|i| read_f64(2 * n + i)).collect();
    Ok((
        ParticleEnsemble::new(points, weights, sidecar.provenance.clone()),
        sidecar,
    ))
}

/// Density as a CSV grid, one row per grid row.
pub fn write_density_csv(path: &Path, d: &UlamDensity) -> io::Result<()> {
    let mut out = String::new();
    let m = d.grid_size;
    for i in 0..m {
        let row: Vec<String> = (0..m).map(|j| format!("{}", d.mass(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn read_density_csv(path: &Path) -> io::Result<UlamDensity> {
    let text = std::fs::read_to_string(path)?;
    let mut cells = Vec::new();
    let mut m = 0;
    for line in text.lines() {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        if m == 0 {
            m = row.len();
        }
        cells.extend(row);
    }
    if cells.len() != m * m {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "density grid is not square",
        ));
    }
    Ok(UlamDensity::from_masses(m, cells))
}

/// One leaf graph as CSV `u,g(u)` plus a JSON metadata blob.
pub fn write_leaf_csv(
    dir: &Path,
    stem: &str,
    us: &[f64],
    values: &[f64],
    metadata: &serde_json::Value,
) -> io::Result<()> {
    let mut out = String::from("u,g\n");
    for (u, v) in us.iter().zip(values) {
        out.push_str(&format!("{u},{v}\n"));
    }
    std::fs::write(dir.join(format!("{stem}.csv")), out)?;
    std::fs::write(
        dir.join(format!("{stem}.meta.json")),
        serde_json::to_string_pretty(metadata).expect("metadata serializes"),
    )
}

/// Export a stack: one CSV per leaf plus an index manifest.
pub fn write_stack(dir: &Path, stack: &LeafStack) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut index = Vec::new();
    for leaf in &stack.leaves {
        let stem = format!("leaf_{:03}", leaf.id);
        let us: Vec<f64> = (0..leaf.graph.nodes()).map(|i| leaf.graph.a_at(i)).collect();
        let meta = serde_json::json!({
            "id": leaf.id,
            "base": [leaf.base.x, leaf.base.y],
            "transverse": leaf.transverse,
            "lip": leaf.graph.lip,
            "lip_chart": leaf.lip_chart,
            "dlip_chart": leaf.dlip_chart,
            "slope_origin_chart": leaf.slope_origin_chart,
        });
        write_leaf_csv(dir, &stem, &us, &leaf.graph.values, &meta)?;
        index.push(serde_json::json!({"stem": stem, "transverse": leaf.transverse}));
    }
    let manifest = serde_json::json!({
        "kind": stack.kind,
        "r_star": stack.r_star,
        "reference_base": [stack.reference.base.x, stack.reference.base.y],
        "e_u": stack.reference.e_u,
        "e_cs": stack.reference.e_cs,
        "leaves": index,
        "rejections": stack.rejections,
    });
    std::fs::write(
        dir.join("stack.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}

/// Append one JSON row (JSON-lines report format).
pub fn append_json_row<W: Write>(mut w: W, row: &serde_json::Value) -> io::Result<()> {
    writeln!(w, "{row}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{sample_from_density, UlamDensity};

    #[test]
    fn ensemble_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = UlamDensity::uniform(8);
        let e = sample_from_density(&d, 1000, 7);
        let sc = EnsembleSidecar {
            seed: 7,
            system: "A".into(),
            depth: 0,
            particles: e.len(),
            provenance: e.provenance.clone(),
        };
        write_ensemble(dir.path(), "test", &e, &sc).unwrap();
        let (back, sc2) = read_ensemble(dir.path(), "test").unwrap();
        assert_eq!(back.points, e.points);
        assert_eq!(back.weights, e.weights);
        assert_eq!(sc2.seed, 7);
    }

    #[test]
    fn density_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let d = UlamDensity::from_masses(16, (0..256).map(|i| 1.0 + (i % 7) as f64).collect());
        let p = dir.path().join("d.csv");
        write_density_csv(&p, &d).unwrap();
        let back = read_density_csv(&p).unwrap();
        assert_eq!(back.grid_size, 16);
        for (a, b) in back.cells.iter().zip(&d.cells) {
            assert_eq!(a, b);
        }
    }
}
