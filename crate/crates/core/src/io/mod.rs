//! File formats: problem documents, result documents and trace CSV.

mod problem;
mod result;

pub use problem::{
    parse_problem, parse_problem_str, problem_to_json, EdgeObjectiveSpec, EdgeSpec, ObjectiveSpec, ProblemFile,
};
pub use result::{result_to_json, trace_to_csv, ResultFile, TRACE_HEADER};

use std::io::Write;
use std::path::Path;

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
