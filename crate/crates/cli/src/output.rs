use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: vapcast::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for vapcast::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

/// Files written by one command. Unless [`Outputs::commit`] is called,
/// everything written (and any directory created) is removed on drop.
#[derive(Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ensure_dir(&mut self, dir: &Path) -> Result<(), CliError> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        // deepest first, so removal can go in order
        self.dirs.extend(missing);
        Ok(())
    }

    fn create(&mut self, path: &Path) -> Result<BufWriter<File>, CliError> {
        if let Some(parent) = path.parent() {
            self.ensure_dir(parent)?;
        }
        let file = File::create(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.files.push(path.to_path_buf());
        Ok(BufWriter::new(file))
    }

    /// Writes through a library serializer.
    pub fn write_with(
        &mut self,
        path: &Path,
        stage: &'static str,
        f: impl FnOnce(&mut BufWriter<File>) -> vapcast::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = self.create(path)?;
        f(&mut w).stage(stage)?;
        w.flush().map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        let mut w = self.create(path)?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, path: &Path, stage: &'static str, v: &T) -> Result<(), CliError> {
        let text = vapcast::data::report_json_string(v).stage(stage)?;
        self.write_text(path, &text)
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in &self.dirs {
            let _ = fs::remove_dir(d);
        }
    }
}
