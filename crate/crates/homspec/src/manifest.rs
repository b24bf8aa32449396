//! MANIFEST: the status of a run and the SHA-256 of every file it wrote.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// The run stopped in `stage`; listed files are partial outputs.
    Failed {
        stage: String,
    },
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Complete => write!(f, "complete"),
            Status::Failed { stage } => write!(f, "failed stage={stage}"),
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Relative path (with `/` separators) to (size, hex digest).
    pub entries: BTreeMap<String, (u64, String)>,
}

pub fn sha256_file(path: &Path) -> io::Result<(u64, String)> {
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path)?;
    let size = io::copy(&mut file, &mut hasher)?;
    Ok((size, hex::encode(hasher.finalize())))
}

impl Manifest {
    /// Hashes every regular file below `root` except the manifest itself.
    pub fn scan(root: &Path) -> io::Result<Self> {
        let mut m = Manifest::default();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = path.strip_prefix(root).expect("walk stays below root");
                let rel = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                if rel == "MANIFEST" {
                    continue;
                }
                m.entries.insert(rel, sha256_file(&path)?);
            }
        }
        Ok(m)
    }

    pub fn write(&self, root: &Path, status: &Status) -> io::Result<()> {
        let mut w = io::BufWriter::new(fs::File::create(root.join("MANIFEST"))?);
        writeln!(w, "# homspec manifest")?;
        writeln!(w, "status={status}")?;
        for (path, (size, digest)) in &self.entries {
            writeln!(w, "{digest}  {size}  {path}")?;
        }
        w.flush()
    }

    /// Reads back the status line and entries of a MANIFEST.
    pub fn read(root: &Path) -> io::Result<(String, Self)> {
        let text = fs::read_to_string(root.join("MANIFEST"))?;
        let mut status = String::new();
        let mut m = Manifest::default();
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            if let Some(s) = line.strip_prefix("status=") {
                status = s.to_string();
                continue;
            }
            let mut parts = line.splitn(3, "  ");
            if let (Some(d), Some(s), Some(p)) = (parts.next(), parts.next(), parts.next()) {
                let size = s
                    .parse()
                    .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, line.to_string()))?;
                m.entries.insert(p.to_string(), (size, d.to_string()));
            }
        }
        Ok((status, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_write_read() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("a.txt"), "abc").unwrap();
        fs::write(dir.path().join("sub/b.txt"), "").unwrap();
        let m = Manifest::scan(dir.path()).unwrap();
        assert_eq!(
            m.entries["a.txt"].1,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(m.entries["sub/b.txt"].0, 0);
        m.write(
            dir.path(),
            &Status::Failed {
                stage: "simulate".into(),
            },
        )
        .unwrap();
        let (status, back) = Manifest::read(dir.path()).unwrap();
        assert_eq!(status, "failed stage=simulate");
        assert_eq!(back, m);
        assert_eq!(Manifest::scan(dir.path()).unwrap(), m);
    }
}
