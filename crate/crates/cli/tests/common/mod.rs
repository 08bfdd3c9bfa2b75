#![allow(dead_code)]

use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

pub const RECORDED: &str = include_str!("../fixtures/block_5200791.json");

type Handler = dyn Fn(u64) -> (u16, String) + Send + Sync;

/// HTTP/1.1 server answering `/block?height=H` with `handler(H)`.
pub fn serve_blocks(handler: impl Fn(u64) -> (u16, String) + Send + Sync + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handler: Arc<Handler> = Arc::new(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let handler = Arc::clone(&handler);
            thread::spawn(move || serve(stream, &*handler));
        }
    });
    url
}

fn serve(stream: TcpStream, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            if line.trim_end().is_empty() {
                break;
            }
        }
        let path = request_line.split_whitespace().nth(1).unwrap_or("");
        let height = path
            .split("height=")
            .nth(1)
            .and_then(|h| h.parse().ok())
            .unwrap_or(0);
        let (status, body) = handler(height);
        let reply = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        );
        if out.write_all(reply.as_bytes()).is_err() {
            return;
        }
    }
}

pub fn block_json(height: u64, time: &str) -> String {
    format!(
        r#"{{"jsonrpc":"2.0","id":-1,"result":{{"block":{{"header":{{"height":"{height}","time":"{time}"}}}}}}}}"#
    )
}

/// Run the CLI in-process; returns (exit code, stderr text).
pub fn blocktime(args: &[&str]) -> (i32, String) {
    let mut err = Vec::new();
    let argv: Vec<OsString> = std::iter::once("blocktime")
        .chain(args.iter().copied())
        .map(OsString::from)
        .collect();
    let code = blocktime_cli::run(argv, &mut err);
    (code, String::from_utf8(err).unwrap())
}

pub fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}
