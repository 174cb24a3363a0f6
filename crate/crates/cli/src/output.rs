use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pepscan_core::event_io::{read_run, EventRecord, FormatError, RunHeader};
use serde::{de::DeserializeOwned, Serialize};
use tempfile::NamedTempFile;

use crate::Failure;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root).map_err(|e| Failure::usage(format!("cannot create output dir `{}`: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write_with<F>(&mut self, name: &str, fill: F) -> Result<PathBuf, Failure>
    where
        F: FnOnce(&mut BufWriter<&mut File>) -> Result<(), Failure>,
    {
        let path = self.root.join(name);
        let io = |e: std::io::Error| Failure::domain(format!("writing `{}`: {e}", path.display()));
        let mut tmp = NamedTempFile::new_in(&self.root).map_err(io)?;
        {
            let mut sink = BufWriter::new(tmp.as_file_mut());
            fill(&mut sink)?;
            sink.flush().map_err(io)?;
        }
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(io)?;
        }
        tmp.persist(&path).map_err(|e| io(e.error))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        self.write_with(name, |w| w.write_all(text.as_bytes()).map_err(Failure::domain))
    }

    pub fn write_toml<S: Serialize>(&mut self, name: &str, value: &S) -> Result<PathBuf, Failure> {
        let text = toml::to_string(value).map_err(Failure::domain)?;
        self.write_text(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub fn read_toml<D: DeserializeOwned>(path: &Path) -> Result<D, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read `{}`: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::domain(format!("`{}`: {e}", path.display())))
}

/// Streams the events of a run file through `consume`; a format error
/// anywhere in the file fails the whole call.
pub fn with_events<R>(path: &Path, consume: impl FnOnce(&RunHeader, &mut dyn Iterator<Item = EventRecord>) -> R) -> Result<R, Failure> {
    let file = File::open(path).map_err(|e| Failure::usage(format!("cannot open `{}`: {e}", path.display())))?;
    let fmt = |e: FormatError| Failure::domain(format!("`{}`: {e}", path.display()));
    let (header, mut reader) = read_run(BufReader::new(file)).map_err(fmt)?;
    let mut error = None;
    let mut events = std::iter::from_fn(|| match reader.next()? {
        Ok(e) => Some(e),
        Err(e) => {
            error = Some(e);
            None
        }
    });
    let out = consume(&header, &mut events);
    match error {
        Some(e) => Err(fmt(e)),
        None => Ok(out),
    }
}
