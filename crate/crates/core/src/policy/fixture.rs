//! Replay fixture server for the slow-planner wire protocol.
//!
//! Binds an ephemeral localhost port and serves a fixed script: one
//! scripted response per incoming connection, in order. Every request line
//! received is logged and returned at shutdown so tests can assert on the
//! exact bytes a client sent. Once the script is exhausted the listener
//! closes and further connections are refused, which clients surface as
//! transport failures.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

/// What the server does with one connection.
#[derive(Debug, Clone)]
pub enum FixtureAction {
    /// Send this body followed by a newline, then close.
    Reply(String),
    /// Close immediately without replying.
    Close,
    /// Hold the connection open for this long without replying, then
    /// close; long stalls trigger client read timeouts.
    Stall(Duration),
}

/// A scripted fixture server. Start it, point a client at `addr()`, then
/// `shutdown()` to collect the request log.
pub struct ReplayFixtureServer {
    addr: String,
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Vec<String>>,
}

impl ReplayFixtureServer {
    pub fn start(script: Vec<FixtureAction>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?.to_string();
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || serve(listener, script, &stop_flag));
        Ok(ReplayFixtureServer { addr, stop, handle })
    }

    /// The `host:port` the server listens on.
    pub fn addr(&self) -> &str {
        &self.addr
    }

    /// Stops the server and returns the raw request lines received, one
    /// per connection, in order.
    pub fn shutdown(self) -> Vec<String> {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop in case the script is not exhausted.
        let _ = TcpStream::connect(&self.addr);
        self.handle.join().expect("fixture server thread panicked")
    }
}

fn serve(listener: TcpListener, script: Vec<FixtureAction>, stop: &AtomicBool) -> Vec<String> {
    let mut log = Vec::new();
    for action in script {
        let Ok((stream, _)) = listener.accept() else {
            break;
        };
        if stop.load(Ordering::SeqCst) {
            break;
        }
        if let Err(e) = handle_connection(stream, &action, &mut log) {
            log.push(format!("<fixture io error: {e}>"));
        }
    }
    log
}

fn handle_connection(
    stream: TcpStream,
    action: &FixtureAction,
    log: &mut Vec<String>,
) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    log.push(line.trim_end_matches('\n').to_string());
    match action {
        FixtureAction::Reply(body) => {
            let mut stream = stream;
            stream.write_all(body.as_bytes())?;
            stream.write_all(b"\n")?;
            stream.flush()?;
        }
        FixtureAction::Close => {}
        FixtureAction::Stall(for_time) => {
            std::thread::sleep(*for_time);
        }
    }
    Ok(())
}
