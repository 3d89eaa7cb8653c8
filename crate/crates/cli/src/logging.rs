//! Run log: every record goes to stderr and to `<logs_dir>/<command>.log`,
//! which starts with the arguments, versions, seed and resolved config.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::sync::{Mutex, Once};

use anyhow::{Context, Result};

use crate::commands::Workspace;

static SINK: Mutex<Option<File>> = Mutex::new(None);
static INIT: Once = Once::new();

struct Tee;

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        if let Some(f) = SINK.lock().unwrap_or_else(|p| p.into_inner()).as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        if let Some(f) = SINK.lock().unwrap_or_else(|p| p.into_inner()).as_mut() {
            f.flush()?;
        }
        io::stderr().flush()
    }
}

pub(crate) fn start(ws: &Workspace, command: &str, args: &[OsString]) -> Result<()> {
    let dir = ws.path(&ws.config.paths.logs_dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{command}.log"));
    let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    writeln!(f, "# command: {}", argv.join(" "))?;
    writeln!(f, "# adcnn-cli {} / adcnn {}", env!("CARGO_PKG_VERSION"), adcnn::VERSION)?;
    writeln!(f, "# seed: {}", ws.config.seed)?;
    writeln!(f, "# resolved config:")?;
    f.write_all(ws.config.to_toml().as_bytes())?;
    writeln!(f, "# log:")?;
    *SINK.lock().unwrap_or_else(|p| p.into_inner()) = Some(f);

    INIT.call_once(|| {
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
            .target(env_logger::Target::Pipe(Box::new(Tee)))
            .format_timestamp(None)
            .try_init();
    });
    Ok(())
}

pub(crate) fn finish(code: i32) {
    log::logger().flush();
    if let Some(mut f) = SINK.lock().unwrap_or_else(|p| p.into_inner()).take() {
        let _ = writeln!(f, "# exit status {code}");
        let _ = f.flush();
    }
}
