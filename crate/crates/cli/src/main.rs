use std::io::{self, Write};

/// Standard output that treats a closed pipe (`metascan vectors | head`) as
/// the reader being done rather than an error.
struct Stdout(io::StdoutLock<'static>);

impl Write for Stdout {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self.0.write(buf) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(buf.len()),
            other => other,
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self.0.flush() {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => other,
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut out = Stdout(io::stdout().lock());
    let code = metascan_cli::run(std::env::args_os(), &mut out, &mut io::stderr().lock());
    let _ = out.flush();
    std::process::exit(code);
}
