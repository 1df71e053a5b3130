use crate::error::CliError;
use serde::Serialize;
use std::path::Path;

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    write_text(path, &text)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Centroids of the k² sub-triangles of every face, in barycentric coordinates.
pub fn sample_grid(n_faces: usize, k: usize) -> Vec<(usize, [f64; 3])> {
    let k = k.max(1);
    let kf = k as f64;
    let mut local = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k - i {
            let (a, b) = ((i as f64 + 1.0 / 3.0) / kf, (j as f64 + 1.0 / 3.0) / kf);
            local.push([a, b, 1.0 - a - b]);
            if i + j + 2 <= k {
                let (a, b) = ((i as f64 + 2.0 / 3.0) / kf, (j as f64 + 2.0 / 3.0) / kf);
                local.push([a, b, 1.0 - a - b]);
            }
        }
    }
    (0..n_faces).flat_map(|f| local.iter().map(move |&b| (f, b))).collect()
}
