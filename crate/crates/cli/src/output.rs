//! Report files that are either all written or all removed.

use std::path::{Path, PathBuf};

use anyhow::Context;

pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    /// Removes every file written so far.
    pub fn discard(self) {
        for path in self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}
