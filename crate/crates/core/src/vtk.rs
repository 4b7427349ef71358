//! Legacy ASCII VTK unstructured-grid snapshots with point data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

/// Nodal field with `ncomp` interleaved components per point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointField {
    pub name: String,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl PointField {
    pub fn new<T: Real>(name: &str, ncomp: usize, values: &[T]) -> Self {
        Self { name: name.to_string(), ncomp, values: values.iter().map(|v| v.to_f64_lossy()).collect() }
    }
}

/// Contents of a snapshot file.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: Option<f64>,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub fields: Vec<PointField>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&PointField> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Formats `fields` on `mesh`. Vector fields with fewer than three components are padded
/// with zeros, as VTK vectors are 3D.
pub fn format_vtk<T: Real>(mesh: &Mesh<T>, time: Option<f64>, fields: &[PointField]) -> Result<String> {
    let n = mesh.num_vertices();
    for f in fields {
        if f.values.len() != n * f.ncomp || f.ncomp == 0 || f.ncomp > 3 {
            return Err(Error::InvalidInput(format!(
                "field {} has {} values for {} points with {} components",
                f.name,
                f.values.len(),
                n,
                f.ncomp
            )));
        }
        if f.name.is_empty() || f.name.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("invalid field name {:?}", f.name)));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nductflow snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    if let Some(t) = time {
        let _ = write!(s, "FIELD FieldData 1\nTIME 1 1 double\n{t:e}\n");
    }
    let _ = writeln!(s, "POINTS {n} double");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} {:e}", v[0].to_f64_lossy(), v[1].to_f64_lossy(), v[2].to_f64_lossy());
    }
    let nv = mesh.dim() + 1;
    let nc = mesh.num_cells();
    let _ = writeln!(s, "CELLS {nc} {}", nc * (nv + 1));
    for c in 0..nc {
        s.push_str(&nv.to_string());
        for v in mesh.cell(c) {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    let ty = if mesh.dim() == 2 { VTK_TRIANGLE } else { VTK_TETRA };
    for _ in 0..nc {
        let _ = writeln!(s, "{ty}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
    }
    for f in fields {
        if f.ncomp == 1 {
            let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name);
            for v in &f.values {
                let _ = writeln!(s, "{v:e}");
            }
        } else {
            let _ = writeln!(s, "VECTORS {} double", f.name);
            for c in f.values.chunks(f.ncomp) {
                let mut x = [0.0; 3];
                x[..f.ncomp].copy_from_slice(c);
                let _ = writeln!(s, "{:e} {:e} {:e}", x[0], x[1], x[2]);
            }
        }
    }
    Ok(s)
}

pub fn write_vtk<T: Real>(
    mesh: &Mesh<T>,
    time: Option<f64>,
    fields: &[PointField],
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, format_vtk(mesh, time, fields)?)?;
    Ok(())
}

struct Tokens<'a> {
    it: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(body: &'a str, first_line: usize) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            body.lines()
                .enumerate()
                .flat_map(move |(i, l)| l.split_whitespace().map(move |w| (i + first_line, w))),
        );
        Self { it: it.peekable(), line: first_line }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.line, message: message.into() }
    }

    fn next(&mut self) -> Option<&'a str> {
        let (l, w) = self.it.next()?;
        self.line = l;
        Some(w)
    }

    fn word(&mut self) -> Result<&'a str> {
        self.next().ok_or_else(|| self.err("unexpected end of file"))
    }

    fn num<N: std::str::FromStr>(&mut self) -> Result<N> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("invalid number {w:?}")))
    }
}

/// Parses a snapshot written by [`format_vtk`] (legacy ASCII, unstructured grid).
pub fn parse_vtk(text: &str) -> Result<Snapshot> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.starts_with("# vtk DataFile") {
        return Err(Error::Parse { line: 1, message: "missing VTK header".into() });
    }
    lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(Error::Parse { line: 3, message: "only ASCII VTK files are supported".into() });
    }
    let body_start = text.lines().take(3).map(|l| l.len() + 1).sum::<usize>().min(text.len());
    let mut tk = Tokens::new(&text[body_start..], 4);
    let mut snap = Snapshot { time: None, points: Vec::new(), cells: Vec::new(), fields: Vec::new() };
    let mut n_points = 0usize;
    while let Some(key) = tk.next() {
        match key {
            "DATASET" => {
                let kind = tk.word()?;
                if kind != "UNSTRUCTURED_GRID" {
                    return Err(tk.err(format!("unsupported dataset {kind}")));
                }
            }
            "FIELD" => {
                tk.word()?;
                let arrays: usize = tk.num()?;
                for _ in 0..arrays {
                    let name = tk.word()?;
                    let ncomp: usize = tk.num()?;
                    let ntup: usize = tk.num()?;
                    tk.word()?;
                    let vals: Vec<f64> = (0..ncomp * ntup).map(|_| tk.num()).collect::<Result<_>>()?;
                    if name == "TIME" && vals.len() == 1 {
                        snap.time = Some(vals[0]);
                    }
                }
            }
            "POINTS" => {
                n_points = tk.num()?;
                tk.word()?;
                snap.points = (0..n_points)
                    .map(|_| Ok([tk.num()?, tk.num()?, tk.num()?]))
                    .collect::<Result<_>>()?;
            }
            "CELLS" => {
                let nc: usize = tk.num()?;
                tk.word()?;
                for _ in 0..nc {
                    let k: usize = tk.num()?;
                    let cell: Vec<usize> = (0..k).map(|_| tk.num()).collect::<Result<_>>()?;
                    if let Some(v) = cell.iter().find(|&&v| v >= n_points) {
                        return Err(tk.err(format!("cell vertex {v} out of range")));
                    }
                    snap.cells.push(cell);
                }
            }
            "CELL_TYPES" => {
                let nc: usize = tk.num()?;
                for _ in 0..nc {
                    let ty: u8 = tk.num()?;
                    if ty != VTK_TRIANGLE && ty != VTK_TETRA {
                        return Err(Error::UnsupportedElement(ty as u32));
                    }
                }
            }
            "POINT_DATA" => {
                let n: usize = tk.num()?;
                if n != n_points {
                    return Err(tk.err(format!("POINT_DATA {n} does not match {n_points} points")));
                }
            }
            "SCALARS" => {
                let name = tk.word()?.to_string();
                tk.word()?;
                let ncomp: usize = if matches!(tk.it.peek(), Some((_, w)) if *w != "LOOKUP_TABLE") { tk.num()? } else { 1 };
                if tk.word()? != "LOOKUP_TABLE" {
                    return Err(tk.err("expected LOOKUP_TABLE"));
                }
                tk.word()?;
                let values = (0..n_points * ncomp).map(|_| tk.num()).collect::<Result<_>>()?;
                snap.fields.push(PointField { name, ncomp, values });
            }
            "VECTORS" => {
                let name = tk.word()?.to_string();
                tk.word()?;
                let values = (0..n_points * 3).map(|_| tk.num()).collect::<Result<_>>()?;
                snap.fields.push(PointField { name, ncomp: 3, values });
            }
            other => return Err(tk.err(format!("unexpected keyword {other}"))),
        }
    }
    Ok(snap)
}

pub fn read_vtk(path: impl AsRef<Path>) -> Result<Snapshot> {
    parse_vtk(&std::fs::read_to_string(path)?)
}

/// Drops the padding components of a 3-component field read back on a `dim`-dimensional mesh.
pub fn truncate_components(field: &PointField, dim: usize) -> Vec<f64> {
    if field.ncomp <= dim {
        return field.values.clone();
    }
    field.values.chunks(field.ncomp).flat_map(|c| c[..dim].iter().copied()).collect()
}
