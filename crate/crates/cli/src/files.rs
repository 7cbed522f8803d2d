//! File access with transparent gzip for paths ending in `.gz`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{CliError, CliResult};

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn open(path: &Path) -> CliResult<Box<dyn BufRead>> {
    let f = File::open(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    Ok(if is_gz(path) {
        Box::new(BufReader::new(MultiGzDecoder::new(f)))
    } else {
        Box::new(BufReader::new(f))
    })
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    open(path)?
        .read_to_string(&mut s)
        .map_err(|e| CliError::io(&path.display().to_string(), e))?;
    Ok(s)
}

pub enum Output {
    Plain(BufWriter<File>),
    Gz(GzEncoder<BufWriter<File>>),
    Stdout(io::StdoutLock<'static>),
}

impl Output {
    /// `None` writes to standard output.
    pub fn create(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Output::Stdout(io::stdout().lock()));
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
        }
        let f = File::create(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
        let w = BufWriter::new(f);
        Ok(if is_gz(path) {
            Output::Gz(GzEncoder::new(w, Compression::default()))
        } else {
            Output::Plain(w)
        })
    }

    pub fn finish(self) -> io::Result<()> {
        match self {
            Output::Plain(mut w) => w.flush(),
            Output::Gz(g) => g.finish()?.flush(),
            Output::Stdout(mut s) => s.flush(),
        }
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Output::Plain(w) => w.write(buf),
            Output::Gz(w) => w.write(buf),
            Output::Stdout(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Output::Plain(w) => w.flush(),
            Output::Gz(w) => w.flush(),
            Output::Stdout(w) => w.flush(),
        }
    }
}

/// Creates `path`, lets `body` fill it, and finishes the stream.
pub fn write_with<F>(path: Option<&Path>, body: F) -> CliResult<()>
where
    F: FnOnce(&mut Output) -> io::Result<()>,
{
    let name = path.map_or("<stdout>".to_string(), |p| p.display().to_string());
    let mut out = Output::create(path)?;
    body(&mut out).map_err(|e| CliError::io(&name, e))?;
    out.finish().map_err(|e| CliError::io(&name, e))
}
