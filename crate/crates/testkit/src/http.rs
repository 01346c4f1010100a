//! A scripted HTTP/1.1 server on a loopback port.
//!
//! Every connection is served by its own thread and closed after one
//! response. Each request is logged with its arrival time so tests can check
//! retry counts and request spacing.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub at: Instant,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum Reply {
    Respond {
        status: u16,
        headers: Vec<(String, String)>,
        body: Vec<u8>,
    },
    /// Close the connection without writing anything.
    Hangup,
    /// Wait before replying.
    Stall(Duration, Box<Reply>),
}

impl Reply {
    pub fn ok(body: impl Into<Vec<u8>>) -> Self {
        Reply::status(200, body)
    }

    pub fn status(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Reply::Respond { status, headers: Vec::new(), body: body.into() }
    }

    pub fn not_found() -> Self {
        Reply::status(404, "<html><body>Not Found</body></html>")
    }

    pub fn redirect(status: u16, location: &str) -> Self {
        Reply::Respond { status, headers: vec![("Location".into(), location.into())], body: Vec::new() }
    }
}

type Handler = dyn Fn(&Request, usize) -> Reply + Send + Sync;

/// A running server. Dropping it stops accepting connections.
pub struct Server {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<Request>>>,
    stop: Arc<AtomicBool>,
}

impl Server {
    /// Starts a server. The handler gets each request and the number of
    /// earlier requests to the same path.
    pub fn start<F>(handler: F) -> Server
    where
        F: Fn(&Request, usize) -> Reply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().unwrap();
        let log = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        {
            let log = Arc::clone(&log);
            let stop = Arc::clone(&stop);
            thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(conn) = conn else { continue };
                    let log = Arc::clone(&log);
                    let handler = Arc::clone(&handler);
                    thread::spawn(move || serve(conn, &log, &*handler));
                }
            });
        }
        Server { addr, log, stop }
    }

    /// Serves fixed bodies by path; anything else is a 404.
    pub fn static_files(files: Vec<(String, Vec<u8>)>) -> Server {
        Server::start(move |req, _| {
            let path = req.path.split('?').next().unwrap_or("");
            files.iter().find(|(p, _)| p == path).map_or_else(Reply::not_found, |(_, b)| Reply::ok(b.clone()))
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://127.0.0.1:<port>`, without a trailing slash.
    pub fn origin(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.origin())
    }

    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }

    pub fn hits(&self, path: &str) -> usize {
        self.log.lock().unwrap().iter().filter(|r| r.path == path).count()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
    }
}

/// An address on which nothing listens.
pub fn refused_addr() -> SocketAddr {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap()
}

fn serve(conn: TcpStream, log: &Mutex<Vec<Request>>, handler: &Handler) {
    let at = Instant::now();
    let mut reader = BufReader::new(match conn.try_clone() {
        Ok(c) => c,
        Err(_) => return,
    });
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 {
            break;
        }
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let req = Request { method, path, headers, at };
    let seen = {
        let mut log = log.lock().unwrap();
        let seen = log.iter().filter(|r| r.path == req.path).count();
        log.push(req.clone());
        seen
    };
    write_reply(conn, handler(&req, seen));
}

fn write_reply(mut conn: TcpStream, reply: Reply) {
    match reply {
        Reply::Hangup => {}
        Reply::Stall(d, inner) => {
            thread::sleep(d);
            write_reply(conn, *inner);
        }
        Reply::Respond { status, headers, body } => {
            let mut head = format!("HTTP/1.1 {status} {}\r\n", reason(status));
            for (k, v) in &headers {
                head.push_str(&format!("{k}: {v}\r\n"));
            }
            head.push_str(&format!("Content-Length: {}\r\nConnection: close\r\n\r\n", body.len()));
            let _ = conn.write_all(head.as_bytes());
            let _ = conn.write_all(&body);
            let _ = conn.flush();
        }
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        302 => "Found",
        303 => "See Other",
        307 => "Temporary Redirect",
        308 => "Permanent Redirect",
        403 => "Forbidden",
        404 => "Not Found",
        500 => "Internal Server Error",
        502 => "Bad Gateway",
        503 => "Service Unavailable",
        504 => "Gateway Timeout",
        _ => "Status",
    }
}

/// Text served for the default core probes of a Joomla install, keyed by
/// path relative to the base path.
pub fn joomla_core_files() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "robots.txt",
            "# If the Joomla site is installed within a folder\n# eg www.example.com/joomla/ then the robots.txt file\n\
             User-agent: *\nDisallow: /administrator/\nDisallow: /cache/\n",
        ),
        (
            "web.config.txt",
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<configuration>\n<!-- joomla rewrite rules -->\n</configuration>\n",
        ),
        (
            "administrator/manifests/files/joomla.xml",
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<extension version=\"3.6\" type=\"file\" method=\"upgrade\">\n\
             <name>files_joomla</name>\n<author>Joomla! Project</author>\n</extension>\n",
        ),
        (
            "language/en-GB/en-GB.xml",
            "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<metafile version=\"3.9\" client=\"site\">\n\
             <name>English (en-GB)</name>\n<description>en-GB site language for Joomla</description>\n</metafile>\n",
        ),
    ]
}

/// Files of a Joomla install under `base` (which starts and ends with `/`):
/// the core probe files, a home page and `extra` paths relative to `base`.
pub fn joomla_site(base: &str, extra: &[(&str, &str)]) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> =
        joomla_core_files().into_iter().map(|(p, b)| (format!("{base}{p}"), b.as_bytes().to_vec())).collect();
    files.push((base.to_string(), b"<html><head><meta name=\"generator\" content=\"Joomla!\"></head></html>".to_vec()));
    files.extend(extra.iter().map(|(p, b)| (format!("{base}{p}"), b.as_bytes().to_vec())));
    files
}
