//! Gmsh MSH 2.2 ASCII reader and writer.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::Mesh;

const LINE: u32 = 1;
const TRIANGLE: u32 = 2;
const TETRA: u32 = 4;
const POINT: u32 = 15;

struct Element {
    kind: u32,
    tag: i32,
    nodes: Vec<usize>,
    line: usize,
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.it.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t);
            }
        }
        Err(Error::Parse { line: self.last, message: "unexpected end of file".into() })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.last, message: message.into() }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        let l = self.next_line()?;
        if l == token {
            Ok(())
        } else {
            Err(self.err(format!("expected {token}, found {l:?}")))
        }
    }
}

fn parse_num<F: std::str::FromStr>(lines: &Lines, s: &str) -> Result<F> {
    s.parse().map_err(|_| lines.err(format!("invalid number {s:?}")))
}

fn nodes_per_element(kind: u32) -> Result<usize> {
    match kind {
        LINE => Ok(2),
        TRIANGLE => Ok(3),
        TETRA => Ok(4),
        POINT => Ok(1),
        other => Err(Error::UnsupportedElement(other)),
    }
}

/// Parses MSH 2.2 ASCII text. Boundary facets take their tag from the physical group.
pub fn parse_msh<T: Real>(text: &str) -> Result<Mesh<T>> {
    let mut lines = Lines { it: text.lines().enumerate(), last: 0 };
    let mut nodes: Vec<(usize, [f64; 3])> = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let section = match lines.next_line() {
            Ok(s) => s,
            Err(_) if saw_format => break,
            Err(e) => return Err(e),
        };
        match section {
            "$MeshFormat" => {
                let l = lines.next_line()?;
                let mut f = l.split_whitespace();
                let version = f.next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(lines.err(format!("unsupported MSH version {version}")));
                }
                if f.next() != Some("0") {
                    return Err(lines.err("only ASCII MSH files are supported"));
                }
                lines.expect("$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let count = lines.next_line()?;
                let n: usize = parse_num(&lines, count)?;
                nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(lines.err("node line needs id x y z"));
                    }
                    let id: usize = parse_num(&lines, f[0])?;
                    let mut x = [0.0; 3];
                    for k in 0..3 {
                        x[k] = parse_num(&lines, f[k + 1])?;
                    }
                    nodes.push((id, x));
                }
                lines.expect("$EndNodes")?;
            }
            "$Elements" => {
                let count = lines.next_line()?;
                let n: usize = parse_num(&lines, count)?;
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(lines.err("truncated element line"));
                    }
                    let kind: u32 = parse_num(&lines, f[1])?;
                    let ntags: usize = parse_num(&lines, f[2])?;
                    let npe = nodes_per_element(kind)?;
                    if f.len() != 3 + ntags + npe {
                        return Err(lines.err(format!("element line has {} fields, expected {}", f.len(), 3 + ntags + npe)));
                    }
                    let tag = if ntags > 0 { parse_num(&lines, f[3])? } else { 0 };
                    let mut el_nodes = Vec::with_capacity(npe);
                    for s in &f[3 + ntags..] {
                        el_nodes.push(parse_num(&lines, s)?);
                    }
                    elements.push(Element { kind, tag, nodes: el_nodes, line: lines.last });
                }
                lines.expect("$EndElements")?;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let end = format!("$End{}", &s[1..]);
                while lines.next_line()? != end {}
            }
            other => return Err(lines.err(format!("unexpected content {other:?}"))),
        }
    }
    if !saw_format {
        return Err(Error::Parse { line: 0, message: "missing $MeshFormat section".into() });
    }
    build(nodes, elements)
}

fn build<T: Real>(nodes: Vec<(usize, [f64; 3])>, elements: Vec<Element>) -> Result<Mesh<T>> {
    let dim = if elements.iter().any(|e| e.kind == TETRA) {
        3
    } else if elements.iter().any(|e| e.kind == TRIANGLE) {
        2
    } else {
        return Err(Error::InvalidMesh("no triangle or tetrahedron elements".into()));
    };
    let (cell_kind, facet_kind) = if dim == 3 { (TETRA, TRIANGLE) } else { (TRIANGLE, LINE) };
    let node_index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
    if node_index.len() != nodes.len() {
        return Err(Error::InvalidMesh("duplicate node ids".into()));
    }
    let lookup = |id: usize, line: usize| {
        node_index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Parse { line, message: format!("element references unknown node {id}") })
    };
    // compact numbering over the nodes that cells actually use, in file order
    let mut used = vec![false; nodes.len()];
    let mut raw_cells = Vec::new();
    for e in elements.iter().filter(|e| e.kind == cell_kind) {
        for &n in &e.nodes {
            let i = lookup(n, e.line)?;
            used[i] = true;
            raw_cells.push(i);
        }
    }
    let mut renum = vec![usize::MAX; nodes.len()];
    let mut vertices = Vec::new();
    for (i, (_, x)) in nodes.iter().enumerate() {
        if used[i] {
            renum[i] = vertices.len();
            let z = if dim == 2 { 0.0 } else { x[2] };
            if dim == 2 && x[2] != 0.0 {
                return Err(Error::InvalidMesh("2D mesh with nonzero z coordinate".into()));
            }
            vertices.push([T::lit(x[0]), T::lit(x[1]), T::lit(z)]);
        }
    }
    let cells: Vec<usize> = raw_cells.iter().map(|&i| renum[i]).collect();

    let mut faces: HashSet<Vec<usize>> = HashSet::new();
    for c in cells.chunks(dim + 1) {
        for skip in 0..=dim {
            let mut f: Vec<usize> = (0..=dim).filter(|&k| k != skip).map(|k| c[k]).collect();
            f.sort_unstable();
            faces.insert(f);
        }
    }
    let mut tagged = Vec::new();
    for e in elements.iter().filter(|e| e.kind == facet_kind) {
        let mut f = Vec::with_capacity(dim);
        for &n in &e.nodes {
            let i = lookup(n, e.line)?;
            if renum[i] == usize::MAX {
                return Err(Error::MixedElements(format!(
                    "element on line {} is not a facet of any cell",
                    e.line
                )));
            }
            f.push(renum[i]);
        }
        let mut key = f.clone();
        key.sort_unstable();
        if !faces.contains(&key) {
            return Err(Error::MixedElements(format!("element on line {} is not a facet of any cell", e.line)));
        }
        tagged.push((f, e.tag));
    }
    Mesh::new(dim, vertices, cells, tagged)
}

/// Reads a mesh from an MSH 2.2 ASCII file.
pub fn read_msh<T: Real>(path: impl AsRef<Path>) -> Result<Mesh<T>> {
    parse_msh(&std::fs::read_to_string(path)?)
}

/// Serializes a mesh as MSH 2.2 ASCII; boundary facets carry their tag as physical group.
pub fn format_msh<T: Real>(mesh: &Mesh<T>) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, p[0].to_f64_lossy(), p[1].to_f64_lossy(), p[2].to_f64_lossy());
    }
    s.push_str("$EndNodes\n$Elements\n");
    let (cell_kind, facet_kind) = if mesh.dim() == 3 { (TETRA, TRIANGLE) } else { (TRIANGLE, LINE) };
    let _ = writeln!(s, "{}", mesh.num_boundary_facets() + mesh.num_cells());
    let mut id = 1;
    for f in 0..mesh.num_boundary_facets() {
        let tag = mesh.facet_tag(f);
        let _ = write!(s, "{id} {facet_kind} 2 {tag} {tag}");
        for v in mesh.facet(f) {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
        id += 1;
    }
    for c in 0..mesh.num_cells() {
        let _ = write!(s, "{id} {cell_kind} 2 0 0");
        for v in mesh.cell(c) {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}

pub fn write_msh<T: Real>(mesh: &Mesh<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_msh(mesh))?;
    Ok(())
}
