//! CSV, JSON and gnuplot writers. Every file opens with a provenance header
//! (crate version, configuration hash, seed); nothing time-dependent is written.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gci::{GciSolution, Mesh2D};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Header {
    /// Hashes the resolved configuration (any serializable value).
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Header {
            command: command.to_string(),
            version: VERSION.to_string(),
            config_hash: config_hash(config)?,
            seed,
        })
    }

    fn comment_lines(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# swarm-hydro {} {}\n# config_hash {}\n# seed {}\n",
            self.version, self.command, self.config_hash, seed
        )
    }
}

/// First 16 hex digits of the SHA-256 of the canonical JSON form.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let canon = serde_json::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    let digest = Sha256::digest(canon.as_bytes());
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Writes a header comment, a column line and the rows.
pub fn write_csv(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = header.comment_lines();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Pretty JSON object with the header under `_header`.
pub fn write_json(path: &Path, header: &Header, body: &impl Serialize) -> Result<()> {
    let mut value = serde_json::to_value(body).map_err(|e| Error::Io(e.to_string()))?;
    let Value::Object(map) = &mut value else {
        return Err(Error::Io("JSON body must be an object".into()));
    };
    map.insert("_header".into(), json!(header));
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

/// Nodal `(θ, r, χ, χ_Ω)` table, θ-major.
pub fn write_fields_csv(path: &Path, header: &Header, gci: &GciSolution) -> Result<()> {
    let mesh = &gci.mesh;
    let mut rows = Vec::with_capacity(mesh.n_nodes());
    for (i, &t) in mesh.theta_nodes().iter().enumerate() {
        for (j, &r) in mesh.r_nodes().iter().enumerate() {
            let k = mesh.node(i, j);
            rows.push(vec![num(t), num(r), num(gci.chi.values[k]), num(gci.chi_omega.values[k])]);
        }
    }
    write_csv(path, header, &["theta", "r", "chi", "chi_omega"], &rows)
}

/// Text `nonuniform matrix` for gnuplot: the first line holds the column
/// count and the θ nodes, every further line an `r` node and its values.
pub fn write_gnuplot_matrix(path: &Path, header: &Header, mesh: &Mesh2D, values: &[f64]) -> Result<()> {
    let mut out = header.comment_lines();
    let th = mesh.theta_nodes();
    out.push_str(&th.len().to_string());
    for &t in th {
        out.push(' ');
        out.push_str(&num(t));
    }
    out.push('\n');
    for (j, &r) in mesh.r_nodes().iter().enumerate() {
        out.push_str(&num(r));
        for i in 0..th.len() {
            out.push(' ');
            out.push_str(&num(values[mesh.node(i, j)]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn numbers_round_trip() {
        for x in [PI, -1e-300, 1.0 / 3.0, 6.02214076e23, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&json!({"d": 2, "sigma": 0.2})).unwrap();
        assert_eq!(a, config_hash(&json!({"d": 2, "sigma": 0.2})).unwrap());
        assert_ne!(a, config_hash(&json!({"d": 3, "sigma": 0.2})).unwrap());
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn files_carry_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let h = Header::new("test", &json!({"x": 1}), Some(7)).unwrap();
        let csv = dir.path().join("sub/t.csv");
        write_csv(&csv, &h, &["a", "b"], &[vec![num(1.0), num(2.0)]]).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("# swarm-hydro "));
        assert!(text.contains("# seed 7\n"));
        assert!(text.contains("\na,b\n"));
        let js = dir.path().join("t.json");
        write_json(&js, &h, &json!({"value": 1.5})).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(&js).unwrap()).unwrap();
        assert_eq!(v["_header"]["seed"], 7);
        assert_eq!(v["value"], 1.5);
        let mesh = Mesh2D::with_nodes(vec![0.0, 1.0, PI], vec![0.0, 0.5, 1.0]).unwrap();
        let dat = dir.path().join("m.dat");
        write_gnuplot_matrix(&dat, &h, &mesh, &vec![0.0; mesh.n_nodes()]).unwrap();
        let body: Vec<String> =
            fs::read_to_string(&dat).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect();
        assert_eq!(body.len(), 4);
        assert!(body[0].starts_with("3 "));
    }
}
