//! File formats: ASCII meshes, model files, measurement data, VTK export.
//!
//! Every writer emits a fixed decimal layout (`{:.17e}` for floats) so that
//! identical runs produce byte-identical artifacts.

use crate::forward::PointSource;
use crate::mesh::SimplicialMesh;
use crate::model::ModelState;
use crate::{C64, Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

// ---------------------------------------------------------------------------
// Mesh: ASCII node-element format
// ---------------------------------------------------------------------------

/// Read a mesh from the ASCII format: a header `dim n_vertices n_cells`,
/// one coordinate line per vertex, then one 0-based vertex-index line per
/// cell. Imported boundary faces carry the single tag `boundary`.
pub fn read_mesh_ascii(path: &Path) -> Result<SimplicialMesh> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open mesh file {}: {e}", path.display())))?;
    parse_mesh_ascii(BufReader::new(file))
}

pub fn parse_mesh_ascii(reader: impl BufRead) -> Result<SimplicialMesh> {
    let mut lines = reader.lines().enumerate();
    let mut next_tokens = |what: &str| -> Result<(usize, Vec<String>)> {
        for (no, line) in lines.by_ref() {
            let line = line.map_err(|e| Error::Io(format!("read error: {e}")))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok((
                no + 1,
                trimmed.split_whitespace().map(str::to_string).collect(),
            ));
        }
        Err(Error::Mesh(format!("mesh parse error: missing {what}")))
    };

    let (hline, header) = next_tokens("header")?;
    if header.len() != 3 {
        return Err(Error::Mesh(format!(
            "mesh parse error at line {hline}: header must be 'dim n_vertices n_cells'"
        )));
    }
    let parse_usize = |s: &str, line: usize| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Mesh(format!("mesh parse error at line {line}: bad integer '{s}'")))
    };
    let dim = parse_usize(&header[0], hline)?;
    let n_vertices = parse_usize(&header[1], hline)?;
    let n_cells = parse_usize(&header[2], hline)?;
    if dim != 2 && dim != 3 {
        return Err(Error::Mesh(format!("unsupported mesh dimension {dim}")));
    }

    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (no, tokens) = next_tokens("vertex line")?;
        if tokens.len() != dim {
            return Err(Error::Mesh(format!(
                "mesh parse error at line {no}: expected {dim} coordinates"
            )));
        }
        let mut v = [0.0f64; 3];
        for (d, t) in tokens.iter().enumerate() {
            v[d] = t.parse().map_err(|_| {
                Error::Mesh(format!("mesh parse error at line {no}: bad number '{t}'"))
            })?;
        }
        vertices.push(v);
    }
    let mut cells = Vec::with_capacity(n_cells * (dim + 1));
    for _ in 0..n_cells {
        let (no, tokens) = next_tokens("cell line")?;
        if tokens.len() != dim + 1 {
            return Err(Error::Mesh(format!(
                "mesh parse error at line {no}: expected {} vertex indices",
                dim + 1
            )));
        }
        for t in &tokens {
            cells.push(parse_usize(t, no)?);
        }
    }
    SimplicialMesh::from_raw(dim, vertices, cells, vec!["boundary".to_string()], |_, _| {
        Some(0)
    })
}

pub fn write_mesh_ascii(path: &Path, mesh: &SimplicialMesh) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {} {}", mesh.dim, mesh.n_vertices(), mesh.n_cells())?;
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        let coords: Vec<String> = (0..mesh.dim).map(|d| format!("{:.17e}", p[d])).collect();
        writeln!(w, "{}", coords.join(" "))?;
    }
    for e in 0..mesh.n_cells() {
        let idx: Vec<String> = mesh.cell(e).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", idx.join(" "))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// Write a model in the ASCII format: header `dim n_cells order`, then one
/// line per cell with the wave-speed coefficients followed by the density
/// coefficients.
pub fn write_model_ascii(path: &Path, model: &ModelState) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {} {}", model.dim, model.n_cells, model.order)?;
    let k = model.dof_per_cell();
    for e in 0..model.n_cells {
        let mut row: Vec<String> = Vec::with_capacity(2 * k);
        for a in 0..k {
            row.push(format!("{:.17e}", model.c[e * k + a]));
        }
        for a in 0..k {
            row.push(format!("{:.17e}", model.rho[e * k + a]));
        }
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_model_ascii(path: &Path) -> Result<ModelState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot open model file {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::Config("empty model file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(Error::Config(format!(
            "model parse error at line {}: header must be 'dim n_cells order'",
            hline + 1
        )));
    }
    let dim: usize = h[0]
        .parse()
        .map_err(|_| Error::Config("bad model dimension".into()))?;
    let n_cells: usize = h[1]
        .parse()
        .map_err(|_| Error::Config("bad model cell count".into()))?;
    let order: u32 = h[2]
        .parse()
        .map_err(|_| Error::Config("bad model order".into()))?;
    let k = crate::basis::simplex_dof_count(order, dim);
    let mut c = Vec::with_capacity(n_cells * k);
    let mut rho = Vec::with_capacity(n_cells * k);
    for e in 0..n_cells {
        let (no, line) = lines.next().ok_or_else(|| {
            Error::Config(format!("model file truncated: missing cell {e}"))
        })?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| {
                    Error::Config(format!("model parse error at line {}: '{t}'", no + 1))
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 2 * k {
            return Err(Error::Config(format!(
                "model parse error at line {}: expected {} values",
                no + 1,
                2 * k
            )));
        }
        c.extend_from_slice(&vals[..k]);
        rho.extend_from_slice(&vals[k..]);
    }
    let model = ModelState {
        dim,
        n_cells,
        order,
        c,
        rho,
        c_bounds: (f64::MIN_POSITIVE, f64::MAX),
    };
    model.validate()?;
    Ok(model)
}

const MODEL_MAGIC: &[u8; 4] = b"HDGM";

/// Little-endian binary model: magic, u32 dim, u64 n_cells, u32 order, then
/// the wave-speed and density coefficient arrays as f64.
pub fn write_model_binary(path: &Path, model: &ModelState) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&(model.dim as u32).to_le_bytes())?;
    w.write_all(&(model.n_cells as u64).to_le_bytes())?;
    w.write_all(&model.order.to_le_bytes())?;
    for v in model.c.iter().chain(model.rho.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_model_binary(path: &Path) -> Result<ModelState> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Config("not a binary model file".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    file.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    file.read_exact(&mut u64buf)?;
    let n_cells = u64::from_le_bytes(u64buf) as usize;
    file.read_exact(&mut u32buf)?;
    let order = u32::from_le_bytes(u32buf);
    let k = crate::basis::simplex_dof_count(order, dim);
    let mut read_array = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            file.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let c = read_array(n_cells * k)?;
    let rho = read_array(n_cells * k)?;
    let model = ModelState {
        dim,
        n_cells,
        order,
        c,
        rho,
        c_bounds: (f64::MIN_POSITIVE, f64::MAX),
    };
    model.validate()?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Measurement data
// ---------------------------------------------------------------------------

/// Measured complex pressures indexed by (frequency, source, receiver),
/// together with the acquisition geometry that produced them.
#[derive(Clone, Debug)]
pub struct DataSet {
    pub freqs_hz: Vec<f64>,
    pub laplace_shift: f64,
    pub sources: Vec<PointSource>,
    pub receivers: Vec<[f64; 3]>,
    /// `values[freq][source][receiver]`.
    pub values: Vec<Vec<Vec<C64>>>,
    pub noise_seed: Option<u64>,
}

impl DataSet {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.freqs_hz.len() {
            return Err(Error::Config("data set: frequency block count mismatch".into()));
        }
        for (fi, block) in self.values.iter().enumerate() {
            if block.len() != self.sources.len() {
                return Err(Error::Config(format!(
                    "data set: frequency {fi} has {} source traces, expected {}",
                    block.len(),
                    self.sources.len()
                )));
            }
            for trace in block {
                if trace.len() != self.receivers.len() {
                    return Err(Error::Config("data set: receiver count mismatch".into()));
                }
                if trace.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(Error::Config("data set: non-finite value".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sigma(&self, fi: usize) -> C64 {
        crate::complex_frequency(self.freqs_hz[fi], self.laplace_shift)
    }
}

/// CSV data set: `#`-prefixed header lines carry the geometry, then one row
/// `freq_idx,source_id,receiver_id,freq_re,freq_im,value_re,value_im` per
/// measurement (the complex frequency `sigma` is spelled out per row).
pub fn write_dataset_csv(path: &Path, data: &DataSet) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let freqs: Vec<String> = data.freqs_hz.iter().map(|f| format!("{f:.17e}")).collect();
    writeln!(w, "# freqs_hz: {}", freqs.join(" "))?;
    writeln!(w, "# laplace_shift: {:.17e}", data.laplace_shift)?;
    for s in &data.sources {
        writeln!(
            w,
            "# source: {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            s.position[0], s.position[1], s.position[2], s.amplitude.re, s.amplitude.im
        )?;
    }
    for r in &data.receivers {
        writeln!(w, "# receiver: {:.17e} {:.17e} {:.17e}", r[0], r[1], r[2])?;
    }
    if let Some(seed) = data.noise_seed {
        writeln!(w, "# noise_seed: {seed}")?;
    }
    writeln!(w, "freq_idx,source_id,receiver_id,freq_re,freq_im,value_re,value_im")?;
    for (fi, block) in data.values.iter().enumerate() {
        let sigma = data.sigma(fi);
        for (si, trace) in block.iter().enumerate() {
            for (ri, v) in trace.iter().enumerate() {
                writeln!(
                    w,
                    "{fi},{si},{ri},{:.17e},{:.17e},{:.17e},{:.17e}",
                    sigma.re, sigma.im, v.re, v.im
                )?;
            }
        }
    }
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<DataSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot open data set {}: {e}", path.display())))?;
    let mut freqs_hz = Vec::new();
    let mut laplace_shift = 0.0;
    let mut sources = Vec::new();
    let mut receivers = Vec::new();
    let mut noise_seed = None;
    let mut rows: Vec<(usize, usize, usize, C64)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("freqs_hz:") {
                freqs_hz = v
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad_line(no)))
                    .collect::<Result<_>>()?;
            } else if let Some(v) = rest.strip_prefix("laplace_shift:") {
                laplace_shift = v.trim().parse().map_err(|_| bad_line(no))?;
            } else if let Some(v) = rest.strip_prefix("source:") {
                let f: Vec<f64> = v
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad_line(no)))
                    .collect::<Result<_>>()?;
                if f.len() != 5 {
                    return Err(bad_line(no));
                }
                sources.push(PointSource {
                    position: [f[0], f[1], f[2]],
                    amplitude: C64::new(f[3], f[4]),
                });
            } else if let Some(v) = rest.strip_prefix("receiver:") {
                let f: Vec<f64> = v
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad_line(no)))
                    .collect::<Result<_>>()?;
                if f.len() != 3 {
                    return Err(bad_line(no));
                }
                receivers.push([f[0], f[1], f[2]]);
            } else if let Some(v) = rest.strip_prefix("noise_seed:") {
                noise_seed = Some(v.trim().parse().map_err(|_| bad_line(no))?);
            }
            continue;
        }
        if line.starts_with("freq_idx") {
            continue;
        }
        let t: Vec<&str> = line.split(',').collect();
        if t.len() != 7 {
            return Err(bad_line(no));
        }
        let fi: usize = t[0].parse().map_err(|_| bad_line(no))?;
        let si: usize = t[1].parse().map_err(|_| bad_line(no))?;
        let ri: usize = t[2].parse().map_err(|_| bad_line(no))?;
        let re: f64 = t[5].parse().map_err(|_| bad_line(no))?;
        let im: f64 = t[6].parse().map_err(|_| bad_line(no))?;
        rows.push((fi, si, ri, C64::new(re, im)));
    }
    let mut values =
        vec![vec![vec![C64::new(0.0, 0.0); receivers.len()]; sources.len()]; freqs_hz.len()];
    for (fi, si, ri, v) in rows {
        if fi >= freqs_hz.len() || si >= sources.len() || ri >= receivers.len() {
            return Err(Error::Config("data row indexes out of range".into()));
        }
        values[fi][si][ri] = v;
    }
    let data = DataSet {
        freqs_hz,
        laplace_shift,
        sources,
        receivers,
        values,
        noise_seed,
    };
    data.validate()?;
    Ok(data)
}

fn bad_line(no: usize) -> Error {
    Error::Config(format!("data set parse error at line {}", no + 1))
}

const DATA_MAGIC: &[u8; 4] = b"HDGD";

/// Little-endian binary data set: magic, counts, geometry arrays, then the
/// contiguous complex values in (frequency, source, receiver) order.
pub fn write_dataset_binary(path: &Path, data: &DataSet) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(DATA_MAGIC)?;
    w.write_all(&(data.freqs_hz.len() as u64).to_le_bytes())?;
    w.write_all(&(data.sources.len() as u64).to_le_bytes())?;
    w.write_all(&(data.receivers.len() as u64).to_le_bytes())?;
    w.write_all(&data.laplace_shift.to_le_bytes())?;
    let seed = data.noise_seed.map(|s| s as i64).unwrap_or(-1);
    w.write_all(&seed.to_le_bytes())?;
    for f in &data.freqs_hz {
        w.write_all(&f.to_le_bytes())?;
    }
    for s in &data.sources {
        for v in [
            s.position[0],
            s.position[1],
            s.position[2],
            s.amplitude.re,
            s.amplitude.im,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for r in &data.receivers {
        for v in r {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for block in &data.values {
        for trace in block {
            for v in trace {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_dataset_binary(path: &Path) -> Result<DataSet> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != DATA_MAGIC {
        return Err(Error::Config("not a binary data set".into()));
    }
    let mut u64buf = [0u8; 8];
    let mut f64buf = [0u8; 8];
    let mut read_u64 = |f: &mut std::fs::File| -> Result<u64> {
        f.read_exact(&mut u64buf)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let nf = read_u64(&mut file)? as usize;
    let ns = read_u64(&mut file)? as usize;
    let nr = read_u64(&mut file)? as usize;
    let mut read_f64 = move |f: &mut std::fs::File| -> Result<f64> {
        f.read_exact(&mut f64buf)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let laplace_shift = read_f64(&mut file)?;
    let seed = {
        let mut buf = [0u8; 8];
        file.read_exact(&mut buf)?;
        let s = i64::from_le_bytes(buf);
        if s < 0 {
            None
        } else {
            Some(s as u64)
        }
    };
    let mut freqs_hz = Vec::with_capacity(nf);
    for _ in 0..nf {
        freqs_hz.push(read_f64(&mut file)?);
    }
    let mut sources = Vec::with_capacity(ns);
    for _ in 0..ns {
        let x = read_f64(&mut file)?;
        let y = read_f64(&mut file)?;
        let z = read_f64(&mut file)?;
        let re = read_f64(&mut file)?;
        let im = read_f64(&mut file)?;
        sources.push(PointSource {
            position: [x, y, z],
            amplitude: C64::new(re, im),
        });
    }
    let mut receivers = Vec::with_capacity(nr);
    for _ in 0..nr {
        let x = read_f64(&mut file)?;
        let y = read_f64(&mut file)?;
        let z = read_f64(&mut file)?;
        receivers.push([x, y, z]);
    }
    let mut values = vec![vec![vec![C64::new(0.0, 0.0); nr]; ns]; nf];
    for block in &mut values {
        for trace in block.iter_mut() {
            for v in trace.iter_mut() {
                let re = read_f64(&mut file)?;
                let im = read_f64(&mut file)?;
                *v = C64::new(re, im);
            }
        }
    }
    let data = DataSet {
        freqs_hz,
        laplace_shift,
        sources,
        receivers,
        values,
        noise_seed: seed,
    };
    data.validate()?;
    Ok(data)
}

/// Number of complex values above which the CLI prefers the binary layout.
pub const DATASET_BINARY_THRESHOLD: usize = 1 << 20;

/// Write as CSV or binary depending on size and extension.
pub fn write_dataset_auto(path: &Path, data: &DataSet) -> Result<()> {
    let n_values = data.freqs_hz.len() * data.sources.len() * data.receivers.len();
    let binary = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => true,
        Some("csv") => false,
        _ => n_values > DATASET_BINARY_THRESHOLD,
    };
    if binary {
        write_dataset_binary(path, data)
    } else {
        write_dataset_csv(path, data)
    }
}

pub fn read_dataset_auto(path: &Path) -> Result<DataSet> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut magic = [0u8; 4];
    let is_binary = file.read_exact(&mut magic).is_ok() && &magic == DATA_MAGIC;
    drop(file);
    if is_binary {
        read_dataset_binary(path)
    } else {
        read_dataset_csv(path)
    }
}

/// Forward measurement export: one `source_id, receiver_id, freq_re,
/// freq_im, value_re, value_im` row per receiver per source.
pub fn write_measurements_csv(
    path: &Path,
    sigma: C64,
    per_source: &[Vec<C64>],
) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "source_id,receiver_id,freq_re,freq_im,value_re,value_im")?;
    for (si, trace) in per_source.iter().enumerate() {
        for (ri, v) in trace.iter().enumerate() {
            writeln!(
                w,
                "{si},{ri},{:.17e},{:.17e},{:.17e},{:.17e}",
                sigma.re, sigma.im, v.re, v.im
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// VTK export
// ---------------------------------------------------------------------------

/// Legacy ASCII VTK unstructured grid with point and cell scalar arrays.
pub fn write_vtk(
    path: &Path,
    mesh: &SimplicialMesh,
    point_scalars: &[(&str, Vec<f64>)],
    cell_scalars: &[(&str, Vec<f64>)],
) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "hdgwave field export")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    let npc = mesh.dim + 1;
    writeln!(w, "CELLS {} {}", mesh.n_cells(), mesh.n_cells() * (npc + 1))?;
    for e in 0..mesh.n_cells() {
        let idx: Vec<String> = mesh.cell(e).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{} {}", npc, idx.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_cells())?;
    let vtk_type = if mesh.dim == 2 { 5 } else { 10 };
    for _ in 0..mesh.n_cells() {
        writeln!(w, "{vtk_type}")?;
    }
    if !point_scalars.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, values) in point_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(w, "{v:.17e}")?;
            }
        }
    }
    if !cell_scalars.is_empty() {
        writeln!(w, "CELL_DATA {}", mesh.n_cells())?;
        for (name, values) in cell_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(w, "{v:.17e}")?;
            }
        }
    }
    Ok(())
}

/// Downsample a cellwise high-order complex field to per-vertex values by
/// averaging the adjacent cells' traces at each vertex.
pub fn vertex_average_pressure(
    op: &crate::hdg::HdgOperator,
    sol: &crate::hdg::FieldSolution,
) -> (Vec<f64>, Vec<f64>) {
    let mesh = op.mesh;
    let mut re = vec![0.0; mesh.n_vertices()];
    let mut im = vec![0.0; mesh.n_vertices()];
    let mut count = vec![0usize; mesh.n_vertices()];
    for e in 0..mesh.n_cells() {
        let basis = crate::basis::basis_for(
            crate::quadrature::Domain::cell(mesh.dim),
            op.orders.cell_orders[e],
        )
        .expect("basis exists for assembled orders");
        let nd = op.cells[e].n_dof;
        // vertex j of the cell corresponds to reference vertex j
        let ref_vertices: [[f64; 3]; 4] = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        for (lv, &gv) in mesh.cell(e).iter().enumerate() {
            let phi = basis.eval(ref_vertices[lv]);
            let mut val = C64::new(0.0, 0.0);
            for j in 0..nd {
                val += sol.cell_coeffs[e][j] * C64::new(phi[j], 0.0);
            }
            re[gv] += val.re;
            im[gv] += val.im;
            count[gv] += 1;
        }
    }
    for v in 0..mesh.n_vertices() {
        if count[v] > 0 {
            re[v] /= count[v] as f64;
            im[v] /= count[v] as f64;
        }
    }
    (re, im)
}
