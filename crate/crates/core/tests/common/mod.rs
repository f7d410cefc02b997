#![allow(dead_code)]

use std::sync::Arc;
use std::thread;

use tiny_http::{Header, Response, Server};

pub struct MockReply {
    pub status: u16,
    pub body: String,
}

impl MockReply {
    pub fn ok(body: &str) -> Self {
        Self { status: 200, body: body.to_string() }
    }
}

/// Serves every request on its own thread with `handler(method, path, body)`.
/// Returns the base URL. The server lives until the test process exits.
pub fn serve<F>(handler: F) -> String
where
    F: Fn(&str, &str, &[u8]) -> MockReply + Send + Sync + 'static,
{
    let server = Server::http("127.0.0.1:0").expect("bind mock server");
    let port = server.server_addr().to_ip().expect("ip listener").port();
    let handler = Arc::new(handler);
    thread::spawn(move || {
        for mut request in server.incoming_requests() {
            let handler = Arc::clone(&handler);
            thread::spawn(move || {
                let mut body = Vec::new();
                let _ = request.as_reader().read_to_end(&mut body);
                let reply = handler(request.method().as_str(), request.url(), &body);
                let json = Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = request.respond(Response::from_string(reply.body).with_status_code(reply.status).with_header(json));
            });
        }
    });
    format!("http://127.0.0.1:{port}")
}
