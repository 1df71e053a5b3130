//! OBJ and OFF readers, OBJ writer.

use super::{MeshError, SurfaceMesh};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "off" => Some(MeshFormat::Off),
            _ => None,
        }
    }
}

pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<SurfaceMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::ParseError { line: 0, msg: e.to_string() })?;
    let (positions, faces) = match format {
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Off => parse_off(text)?,
    };
    SurfaceMesh::new(positions, faces)
}

pub fn load_mesh_file(path: &Path) -> Result<SurfaceMesh, MeshError> {
    let format = MeshFormat::from_path(path).ok_or_else(|| MeshError::ParseError {
        line: 0,
        msg: format!("unknown mesh extension for {}", path.display()),
    })?;
    load_mesh(&std::fs::read(path)?, format)
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::ParseError { line, msg: msg.into() }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64, MeshError> {
    let tok = tok.ok_or_else(|| perr(line, "missing coordinate"))?;
    let v: f64 = tok.parse().map_err(|_| perr(line, format!("bad number {tok:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(perr(line, "non-finite coordinate"))
    }
}

type Parsed = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_obj(text: &str) -> Result<Parsed, MeshError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let p = [parse_f64(toks.next(), line)?, parse_f64(toks.next(), line)?, parse_f64(toks.next(), line)?];
                positions.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in toks {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| perr(line, format!("bad face index {tok:?}")))?;
                    let resolved = match i {
                        0 => return Err(perr(line, "face index 0 is invalid in OBJ")),
                        i if i > 0 => i - 1,
                        i => positions.len() as i64 + i,
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(perr(line, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(perr(line, "face with fewer than three vertices"));
                }
                if idx.len() > 3 {
                    return Err(MeshError::NonTriangular { face: faces.len(), count: idx.len() });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    Ok((positions, faces))
}

fn parse_off(text: &str) -> Result<Parsed, MeshError> {
    // Tokens with their line numbers, comments stripped.
    let mut toks = text.lines().enumerate().flat_map(|(n, l)| {
        l.split('#').next().unwrap_or("").split_whitespace().map(move |t| (n + 1, t)).collect::<Vec<_>>()
    });
    let (line, head) = toks.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut counts = Vec::new();
    if let Some(rest) = head.strip_prefix("OFF") {
        if !rest.is_empty() {
            counts.push((line, rest));
        }
    } else {
        return Err(perr(line, "missing OFF header"));
    }
    while counts.len() < 3 {
        counts.push(toks.next().ok_or_else(|| perr(line, "missing counts"))?);
    }
    let count = |(l, t): (usize, &str)| t.parse::<usize>().map_err(|_| perr(l, format!("bad count {t:?}")));
    let nv = count(counts[0])?;
    let nf = count(counts[1])?;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            let (l, t) = toks.next().ok_or_else(|| perr(0, "truncated vertex list"))?;
            *c = parse_f64(Some(t), l)?;
        }
        positions.push(p);
    }
    let mut faces = Vec::with_capacity(nf);
    let mut last_line = 0;
    for f in 0..nf {
        let (l, t) = toks.next().ok_or_else(|| perr(last_line, "truncated face list"))?;
        let k: usize = t.parse().map_err(|_| perr(l, format!("bad vertex count {t:?}")))?;
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            let (l2, t2) = toks.next().ok_or_else(|| perr(l, "truncated face"))?;
            let i: usize = t2.parse().map_err(|_| perr(l2, format!("bad face index {t2:?}")))?;
            if i >= nv {
                return Err(perr(l2, format!("face index {i} out of range")));
            }
            idx.push(i);
            last_line = l2;
        }
        // skip optional per-face colour values on the same line
        let mut peek = toks.clone();
        while let Some((l3, _)) = peek.next() {
            if l3 != l {
                break;
            }
            toks.next();
        }
        if k < 3 {
            return Err(perr(l, "face with fewer than three vertices"));
        }
        if k > 3 {
            return Err(MeshError::NonTriangular { face: f, count: k });
        }
        faces.push([idx[0], idx[1], idx[2]]);
    }
    Ok((positions, faces))
}

pub fn write_obj(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    for p in mesh.positions() {
        s.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
    }
    for f in mesh.faces() {
        s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    s
}
