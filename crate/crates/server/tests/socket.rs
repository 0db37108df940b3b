use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use backdoor_server::{serve_on, Api};
use serde_json::{json, Value};

fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, payload) = raw.split_once("\r\n\r\n").unwrap();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(head.to_ascii_lowercase().contains("content-type: application/json"));
    (status, serde_json::from_str(payload).unwrap())
}

#[tokio::test(flavor = "multi_thread")]
async fn effect_over_a_real_socket() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let api = Arc::new(Api::default());
    let server = tokio::spawn(serve_on(listener, api));

    let dag = std::fs::read_to_string(format!("{}/../../data/mediated.dag", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let (status, total, stale) = tokio::task::spawn_blocking(move || {
        let (status, doc) = request(addr, "POST", "/sessions", &json!({ "graph": dag }).to_string());
        assert_eq!(status, 201);
        let id = doc["session"]["id"].as_str().unwrap().to_string();
        let (status, doc) = request(
            addr,
            "POST",
            &format!("/sessions/{id}/effect"),
            &json!({ "exposure": "X", "outcome": "Y" }).to_string(),
        );
        let (stale, _) = request(
            addr,
            "POST",
            &format!("/sessions/{id}/edits"),
            &json!({ "expected_revision": 7, "edits": [] }).to_string(),
        );
        (status, doc["result"]["total"].as_f64().unwrap(), stale)
    })
    .await
    .unwrap();
    assert_eq!(status, 200);
    assert!((total - 0.48).abs() < 1e-12);
    assert_eq!(stale, 409);
    server.abort();
}
