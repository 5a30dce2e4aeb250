//! ASCII OBJ and PLY mesh files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::format(path, "unknown mesh extension (expected .obj or .ply)")),
        }
    }
}

/// Loads a mesh and multiplies every position by `scale` (file units to
/// millimetres). Polygons are fan-triangulated.
pub fn load_mesh(path: &Path, scale: f64) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (vertices, faces) = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::Ply => parse_ply(&text),
    }
    .map_err(|m| Error::format(path, m))?;
    let vertices = vertices.into_iter().map(|v| v * scale).collect();
    TriMesh::new(vertices, faces).map_err(|e| match e {
        Error::Io { .. } | Error::FileFormat { .. } => e,
        other => Error::format(path, other),
    })
}

/// Writes the mesh with positions divided by `scale`.
pub fn save_mesh(mesh: &TriMesh, path: &Path, scale: f64) -> Result<()> {
    let text = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => write_obj(mesh, scale),
        MeshFormat::Ply => write_ply(mesh, scale),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

type Parsed = (Vec<Vec3>, Vec<[usize; 3]>);

fn parse_f64(token: Option<&str>, line: usize) -> Result<f64, String> {
    let token = token.ok_or_else(|| format!("line {line}: missing coordinate"))?;
    token
        .parse::<f64>()
        .map_err(|_| format!("line {line}: invalid number {token:?}"))
}

fn triangulate(polygon: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..polygon.len() - 1 {
        faces.push([polygon[0], polygon[k], polygon[k + 1]]);
    }
}

pub fn parse_obj(text: &str) -> Result<Parsed, String> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let x = parse_f64(tokens.next(), line)?;
                let y = parse_f64(tokens.next(), line)?;
                let z = parse_f64(tokens.next(), line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut polygon = Vec::new();
                for token in tokens {
                    let index_text = token.split('/').next().unwrap_or("");
                    let index: i64 = index_text
                        .parse()
                        .map_err(|_| format!("line {line}: invalid face index {token:?}"))?;
                    let resolved = match index {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => return Err(format!("line {line}: face index 0 is not valid")),
                    };
                    if resolved < 0 {
                        return Err(format!("line {line}: face index {index} out of range"));
                    }
                    polygon.push(resolved as usize);
                }
                if polygon.len() < 3 {
                    return Err(format!("line {line}: face with fewer than 3 vertices"));
                }
                triangulate(&polygon, &mut faces);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn parse_ply(text: &str) -> Result<Parsed, String> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err("missing 'ply' magic line".into());
    }
    struct Element {
        name: String,
        count: usize,
        properties: Vec<String>,
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut ascii = false;
    loop {
        let (n, raw) = lines.next().ok_or("unterminated PLY header")?;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", ..] => ascii = true,
            ["format", other, ..] => return Err(format!("unsupported PLY format {other:?} (only ascii)")),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format!("line {}: invalid element count", n + 1))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] | ["property", _, name] => elements
                .last_mut()
                .ok_or(format!("line {}: property before element", n + 1))?
                .properties
                .push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    if !ascii {
        return Err("PLY header does not declare a format".into());
    }
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for element in &elements {
        for _ in 0..element.count {
            let (n, raw) = lines.next().ok_or(format!("truncated {} data", element.name))?;
            let line = n + 1;
            let values: Vec<&str> = raw.split_whitespace().collect();
            match element.name.as_str() {
                "vertex" => {
                    let coord = |axis: &str| -> Result<f64, String> {
                        let k = element
                            .properties
                            .iter()
                            .position(|p| p == axis)
                            .ok_or(format!("vertex element lacks property {axis}"))?;
                        parse_f64(values.get(k).copied(), line)
                    };
                    vertices.push(Vec3::new(coord("x")?, coord("y")?, coord("z")?));
                }
                "face" => {
                    let count: usize = values
                        .first()
                        .and_then(|v| v.parse().ok())
                        .ok_or(format!("line {line}: invalid face"))?;
                    if count < 3 || values.len() < count + 1 {
                        return Err(format!("line {line}: invalid face"));
                    }
                    let polygon = values[1..=count]
                        .iter()
                        .map(|v| v.parse::<usize>().map_err(|_| format!("line {line}: invalid face index {v:?}")))
                        .collect::<Result<Vec<_>, _>>()?;
                    triangulate(&polygon, &mut faces);
                }
                _ => {}
            }
        }
    }
    Ok((vertices, faces))
}

pub fn write_obj(mesh: &TriMesh, scale: f64) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let v = v / scale;
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    out
}

pub fn write_ply(mesh: &TriMesh, scale: f64) -> String {
    let mut out = String::new();
    writeln!(out, "ply\nformat ascii 1.0").unwrap();
    writeln!(out, "element vertex {}\nproperty double x\nproperty double y\nproperty double z", mesh.len()).unwrap();
    writeln!(out, "element face {}\nproperty list uchar int vertex_indices\nend_header", mesh.faces.len()).unwrap();
    for v in &mesh.vertices {
        let v = v / scale;
        writeln!(out, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in &mesh.faces {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    out
}
