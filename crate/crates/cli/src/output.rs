use std::io::Write;
use std::path::{Path, PathBuf};

use camel::Error;
use tempfile::NamedTempFile;

/// Output directory whose files are replaced atomically.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Error> {
        std::fs::create_dir_all(root).map_err(|source| Error::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes to a temporary file in the same directory, then renames it over
    /// `name`, so readers never see a partial file.
    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Error> {
        let target = self.path(name);
        let io_err = |source| Error::Io {
            path: target.clone(),
            source,
        };
        let mut tmp = NamedTempFile::new_in(&self.root).map_err(io_err)?;
        tmp.write_all(contents.as_bytes()).map_err(io_err)?;
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(&target).map_err(|e| io_err(e.error))?;
        Ok(target)
    }
}
