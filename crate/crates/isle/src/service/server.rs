//! The streaming server: loads a directory of `.islc` files at startup and
//! answers LIST / HEAD / FETCH over TCP, truncating server-side on request
//! so only one full copy of each stream is ever stored.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::codestream::{self, Codestream, HEADER_LEN, INDEX_ENTRY_LEN};

use super::protocol::{Opcode, Request, Response, Status};
use super::ServiceError;

type Store = Arc<BTreeMap<String, Codestream>>;

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    /// Block until the accept loop ends (i.e. run the server in the
    /// foreground).
    pub fn wait(mut self) {
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.stop_and_join();
        }
    }
}

/// Load every `*.islc` file under `store_dir` (filename stem = asset id)
/// and serve it on `bind_addr`. Any unparseable or truncated store file
/// fails startup, naming the offending path.
pub fn serve(store_dir: &Path, bind_addr: &str) -> Result<ServerHandle, ServiceError> {
    let store = Arc::new(load_store(store_dir)?);
    let listener = TcpListener::bind(bind_addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));

    let accept_stop = Arc::clone(&stop);
    let accept_thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if accept_stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let store = Arc::clone(&store);
            std::thread::spawn(move || handle_connection(stream, store));
        }
    });

    Ok(ServerHandle { addr, stop, accept_thread: Some(accept_thread) })
}

fn load_store(dir: &Path) -> Result<BTreeMap<String, Codestream>, ServiceError> {
    let mut store = BTreeMap::new();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "islc"))
        .collect();
    paths.sort();
    for path in paths {
        let bytes = std::fs::read(&path)?;
        let cs = codestream::parse(&bytes)
            .map_err(|source| ServiceError::Store { path: path.clone(), source })?;
        if cs.present_segments() != cs.n_levels() + 1 {
            return Err(ServiceError::StoreNotFull { path });
        }
        let asset_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        store.insert(asset_id, cs);
    }
    Ok(store)
}

fn handle_connection(mut stream: TcpStream, store: Store) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(60)));
    loop {
        match Request::read_from(&mut stream) {
            Ok(None) => return,
            Ok(Some(req)) => {
                let resp = respond(&req, &store);
                if resp.write_to(&mut stream).is_err() || stream.flush().is_err() {
                    return;
                }
            }
            Err(ServiceError::Io(_)) => return,
            Err(_) => {
                // Malformed frame: answer BAD_REQUEST, then drop the
                // connection since framing can no longer be trusted.
                let _ = Response::new(Status::BadRequest, Vec::new()).write_to(&mut stream);
                return;
            }
        }
    }
}

fn respond(req: &Request, store: &Store) -> Response {
    match req.opcode {
        Opcode::List => {
            let mut body = String::new();
            for id in store.keys() {
                body.push_str(id);
                body.push('\n');
            }
            Response::new(Status::Ok, body.into_bytes())
        }
        Opcode::Head => match store.get(&req.asset_id) {
            None => Response::new(Status::NotFound, Vec::new()),
            Some(cs) => {
                let prefix_len = HEADER_LEN + cs.header().segment_count() * INDEX_ENTRY_LEN;
                let mut bytes = codestream::serialize(cs);
                bytes.truncate(prefix_len);
                Response::new(Status::Ok, bytes)
            }
        },
        Opcode::Fetch => match store.get(&req.asset_id) {
            None => Response::new(Status::NotFound, Vec::new()),
            Some(cs) => {
                if req.d < 0 {
                    return Response::new(Status::Ok, codestream::serialize(cs));
                }
                let d = req.d as u8;
                if d > cs.n_levels() {
                    return Response::new(Status::Range, Vec::new());
                }
                let truncated =
                    codestream::truncate(cs, d).expect("store holds full streams");
                Response::new(Status::Ok, codestream::serialize(&truncated))
            }
        },
    }
}
