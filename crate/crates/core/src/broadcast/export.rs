//! PLY and OBJ mesh files.
//!
//! Writers emit vertices as doubles and faces in the order given, so the
//! published winding survives. Each written mesh gets a sidecar
//! `<file>.ids` listing the map vertex id of every exported vertex, one per
//! line. The reader accepts the usual PLY scalar types and OBJ polygons
//! (fan-triangulated).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::trimesh::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    PlyAscii,
    PlyBinary,
    Obj,
}

impl MeshFormat {
    /// `.obj` maps to OBJ, anything else to binary PLY.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "obj" => MeshFormat::Obj,
            _ => MeshFormat::PlyBinary,
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ply" | "ply-binary" => Ok(MeshFormat::PlyBinary),
            "ply-ascii" => Ok(MeshFormat::PlyAscii),
            "obj" => Ok(MeshFormat::Obj),
            _ => Err(Error::InvalidConfig(format!("unknown mesh format `{s}`"))),
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

/// Writes `mesh` and its id sidecar. `vertex_ids` must be empty or match
/// the vertex count; when empty, local indices are written as ids.
pub fn write_mesh(mesh: &TriMesh, vertex_ids: &[u32], path: &Path, format: MeshFormat) -> Result<()> {
    mesh.validate()?;
    if !vertex_ids.is_empty() && vertex_ids.len() != mesh.vertices.len() {
        return Err(Error::InvalidConfig(format!(
            "{} vertex ids for {} vertices",
            vertex_ids.len(),
            mesh.vertices.len()
        )));
    }
    let mut body = Vec::new();
    match format {
        MeshFormat::PlyAscii | MeshFormat::PlyBinary => {
            let enc = if format == MeshFormat::PlyAscii {
                "ascii"
            } else {
                "binary_little_endian"
            };
            body.extend_from_slice(
                format!(
                    "ply\nformat {enc} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
                    mesh.vertices.len(),
                    mesh.faces.len()
                )
                .as_bytes(),
            );
            if format == MeshFormat::PlyAscii {
                for p in &mesh.vertices {
                    body.extend_from_slice(format!("{:?} {:?} {:?}\n", p.x, p.y, p.z).as_bytes());
                }
                for f in &mesh.faces {
                    body.extend_from_slice(format!("3 {} {} {}\n", f[0], f[1], f[2]).as_bytes());
                }
            } else {
                for p in &mesh.vertices {
                    for v in [p.x, p.y, p.z] {
                        body.extend_from_slice(&v.to_le_bytes());
                    }
                }
                for f in &mesh.faces {
                    body.push(3);
                    for &i in f {
                        body.extend_from_slice(&(i as i32).to_le_bytes());
                    }
                }
            }
        }
        MeshFormat::Obj => {
            for p in &mesh.vertices {
                body.extend_from_slice(format!("v {:?} {:?} {:?}\n", p.x, p.y, p.z).as_bytes());
            }
            for f in &mesh.faces {
                body.extend_from_slice(format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1).as_bytes());
            }
        }
    }
    write_file(path, &body)?;
    let mut ids = String::from("# map vertex id per exported vertex\n");
    for i in 0..mesh.vertices.len() {
        let id = vertex_ids.get(i).copied().unwrap_or(i as u32);
        ids.push_str(&id.to_string());
        ids.push('\n');
    }
    write_file(&sidecar_path(path), ids.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_id_map(mesh_path: &Path) -> Result<Vec<u32>> {
    let path = sidecar_path(mesh_path);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, l)| l.trim().parse().map_err(|e| Error::parse(&path, n + 1, format!("{e}"))))
        .collect()
}

/// Reads a PLY or OBJ file, detected by content.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mesh = if bytes.starts_with(b"ply") {
        read_ply(&bytes, path)?
    } else {
        read_obj(&bytes, path)?
    };
    mesh.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8], big_endian: bool) -> f64 {
        macro_rules! get {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().unwrap();
                (if big_endian { <$t>::from_be_bytes(a) } else { <$t>::from_le_bytes(a) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => get!(i16, 2),
            Scalar::U16 => get!(u16, 2),
            Scalar::I32 => get!(i32, 4),
            Scalar::U32 => get!(u32, 4),
            Scalar::F32 => get!(f32, 4),
            Scalar::F64 => get!(f64, 8),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn read_ply(bytes: &[u8], path: &Path) -> Result<TriMesh> {
    let err = |line: usize, m: String| Error::parse(path, line, m);
    let mut reader = BufReader::new(bytes);
    let mut elements: Vec<Element> = Vec::new();
    let mut encoding = None;
    let mut line_no = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(err(line_no, "missing end_header".into()));
        }
        line_no += 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["ply"] | [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", enc, _] => encoding = Some(enc.to_string()),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| err(line_no, format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (Some(c), Some(i)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(err(line_no, format!("unknown list types `{ct} {it}`")));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| err(line_no, "property before element".into()))?
                    .props
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let t = Scalar::parse(ty).ok_or_else(|| err(line_no, format!("unknown type `{ty}`")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| err(line_no, "property before element".into()))?
                    .props
                    .push(Property::Scalar(name.to_string(), t));
            }
            ["end_header"] => break,
            _ => return Err(err(line_no, format!("unexpected header line `{}`", line.trim()))),
        }
    }
    let encoding = encoding.ok_or_else(|| err(line_no, "missing format line".into()))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut handle = |el: &Element, values: Vec<Vec<f64>>, faces: &mut Vec<[u32; 3]>| -> Result<()> {
        match el.name.as_str() {
            "vertex" => {
                let idx = |n: &str| {
                    el.props
                        .iter()
                        .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
                        .ok_or_else(|| err(0, format!("vertex element lacks `{n}`")))
                };
                let (ix, iy, iz) = (idx("x")?, idx("y")?, idx("z")?);
                vertices.push(Point3::new(values[ix][0], values[iy][0], values[iz][0]));
            }
            "face" => {
                let list = el
                    .props
                    .iter()
                    .position(|p| matches!(p, Property::List(n, ..) if n == "vertex_indices" || n == "vertex_index"))
                    .ok_or_else(|| err(0, "face element lacks vertex_indices".into()))?;
                let poly = &values[list];
                if poly.len() < 3 {
                    return Err(err(0, format!("face with {} vertices", poly.len())));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
                }
            }
            _ => {}
        }
        Ok(())
    };
    match encoding.as_str() {
        "ascii" => {
            let mut rest = String::new();
            reader.read_to_string(&mut rest).map_err(|e| Error::io(path, e))?;
            let mut tokens = rest.split_whitespace();
            let mut next = || -> Result<f64> {
                let t = tokens.next().ok_or_else(|| err(0, "unexpected end of data".into()))?;
                t.parse().map_err(|_| err(0, format!("bad number `{t}`")))
            };
            for el in &elements {
                for _ in 0..el.count {
                    let mut values = Vec::with_capacity(el.props.len());
                    for p in &el.props {
                        values.push(match p {
                            Property::Scalar(..) => vec![next()?],
                            Property::List(..) => {
                                let n = next()? as usize;
                                (0..n).map(|_| next()).collect::<Result<_>>()?
                            }
                        });
                    }
                    handle(el, values, &mut faces)?;
                }
            }
        }
        "binary_little_endian" | "binary_big_endian" => {
            let be = encoding == "binary_big_endian";
            let mut data = Vec::new();
            reader.read_to_end(&mut data).map_err(|e| Error::io(path, e))?;
            let mut pos = 0usize;
            let mut take = |t: Scalar| -> Result<f64> {
                let end = pos + t.size();
                if end > data.len() {
                    return Err(err(0, "truncated binary payload".into()));
                }
                let v = t.read(&data[pos..end], be);
                pos = end;
                Ok(v)
            };
            for el in &elements {
                for _ in 0..el.count {
                    let mut values = Vec::with_capacity(el.props.len());
                    for p in &el.props {
                        values.push(match p {
                            Property::Scalar(_, t) => vec![take(*t)?],
                            Property::List(_, ct, it) => {
                                let n = take(*ct)? as usize;
                                (0..n).map(|_| take(*it)).collect::<Result<_>>()?
                            }
                        });
                    }
                    handle(el, values, &mut faces)?;
                }
            }
        }
        other => return Err(err(0, format!("unsupported PLY format `{other}`"))),
    }
    Ok(TriMesh { vertices, faces })
}

fn read_obj(bytes: &[u8], path: &Path) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |m: String| Error::parse(path, n + 1, m);
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let v: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse().map_err(|_| err(format!("bad number `{t}`"))))
                    .collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                vertices.push(Point3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err(format!("bad index `{t}`")))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(err(format!("index `{t}` out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err(format!("face with {} vertices", idx.len())));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh { vertices, faces })
}
