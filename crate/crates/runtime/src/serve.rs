//! The protocol socket and control endpoint.
//!
//! Clients connect over TCP and speak newline-delimited protocol messages.
//! On connect a client receives an `ADVERTISE` and `POSE_UPDATE` for every
//! robot in the pool and a `TASK_STATUS` for every task; after that it sees
//! every message the runtime exchanges with the robots. Clients may send:
//!
//! - `SUBMIT_PROGRAM`, answered with `TASK_STATUS` (state `aborted` with the
//!   diagnostic in `detail` when the source does not compile)
//! - `QUERY_STATUS` and `CANCEL_TASK`, answered with `TASK_STATUS`
//! - `EVENT`, `PROPERTY_UPDATE`, `RETRACT` and `LEAVE`, applied to the world
//!   as injected mutations
//!
//! One ticker advances the runtime; every request is applied under the same
//! lock, so each one sees a consistent snapshot.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::Duration;

use log::{info, warn};
use resh_lang::SourceProgram;
use resh_protocol::{split, Body, Message, TaskState, TransportError};
use resh_sim::{ClockMode, Mutation};

use crate::runtime::Runtime;

/// How long an idle stepped server sleeps between checks.
const IDLE: Duration = Duration::from_millis(20);

struct State {
    rt: Runtime,
    /// Wire messages already broadcast.
    cursor: usize,
}

struct Shared {
    state: Mutex<State>,
    clients: Mutex<Vec<Sender<Message>>>,
    stop: AtomicBool,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn broadcast(&self, msgs: &[Message]) {
        if msgs.is_empty() {
            return;
        }
        let mut clients = self.clients.lock().unwrap_or_else(|e| e.into_inner());
        clients.retain(|tx| msgs.iter().all(|m| tx.send(m.clone()).is_ok()));
    }
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// Stops a running server from another thread.
#[derive(Clone)]
pub struct ServerHandle {
    shared: Arc<Shared>,
    addr: SocketAddr,
}

impl ServerHandle {
    pub fn stop(&self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // Wakes the blocking accept.
        let _ = TcpStream::connect(self.addr);
    }
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, rt: Runtime) -> io::Result<Server> {
        let cursor = rt.wire().len();
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            shared: Arc::new(Shared {
                state: Mutex::new(State { rt, cursor }),
                clients: Mutex::new(Vec::new()),
                stop: AtomicBool::new(false),
            }),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn handle(&self) -> io::Result<ServerHandle> {
        Ok(ServerHandle {
            shared: self.shared.clone(),
            addr: self.local_addr()?,
        })
    }

    /// Serves until [`ServerHandle::stop`]. A stepped clock advances as
    /// fast as it can while any task is live and idles otherwise.
    pub fn run(self) -> io::Result<()> {
        let shared = self.shared.clone();
        let listener = self.listener;
        let acceptor = thread::spawn(move || {
            for stream in listener.incoming() {
                if shared.stop.load(Ordering::SeqCst) {
                    break;
                }
                match stream {
                    Ok(s) => {
                        let shared = shared.clone();
                        thread::spawn(move || {
                            if let Err(e) = serve_client(&shared, s) {
                                warn!("client: {e}");
                            }
                        });
                    }
                    Err(e) => warn!("accept: {e}"),
                }
            }
        });
        let shared = self.shared;
        while !shared.stop.load(Ordering::SeqCst) {
            let (msgs, wait) = {
                let mut st = shared.lock();
                let stepped = st.rt.world().clock().mode() == ClockMode::Stepped;
                if stepped && st.rt.engine().all_done() {
                    (Vec::new(), Some(IDLE))
                } else {
                    st.rt.step();
                    let wait = st.rt.world().clock().wall_time(st.rt.config().step_ms);
                    (fresh(&mut st), wait)
                }
            };
            shared.broadcast(&msgs);
            match wait {
                Some(d) => thread::sleep(d),
                None => thread::yield_now(),
            }
        }
        let _ = acceptor.join();
        Ok(())
    }
}

fn fresh(st: &mut State) -> Vec<Message> {
    let msgs = st.rt.wire()[st.cursor..].to_vec();
    st.cursor = st.rt.wire().len();
    msgs
}

fn serve_client(shared: &Shared, stream: TcpStream) -> io::Result<()> {
    let peer = stream.peer_addr()?;
    let (mut reader, mut writer) = split(stream)?;
    let (tx, rx) = mpsc::channel::<Message>();
    thread::spawn(move || {
        for m in rx {
            if writer.write(&m).is_err() {
                break;
            }
        }
    });
    {
        let mut st = shared.lock();
        // Anything pending goes out first so the snapshot is not repeated.
        let pending = fresh(&mut st);
        shared.broadcast(&pending);
        for m in snapshot(&mut st.rt) {
            let _ = tx.send(m);
        }
        shared
            .clients
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(tx.clone());
    }
    info!("client {peer} connected");
    loop {
        match reader.read() {
            Ok(Some(m)) => {
                let (replies, msgs) = {
                    let mut st = shared.lock();
                    let replies = control(&mut st.rt, m);
                    (replies, fresh(&mut st))
                };
                shared.broadcast(&msgs);
                for r in replies {
                    let _ = tx.send(r);
                }
            }
            Ok(None) => break,
            Err(TransportError::Decode(e)) => warn!("client {peer}: {e}"),
            Err(e) => {
                warn!("client {peer}: {e}");
                break;
            }
        }
    }
    info!("client {peer} disconnected");
    Ok(())
}

fn snapshot(rt: &mut Runtime) -> Vec<Message> {
    let mut bodies = Vec::new();
    for r in rt.world().robots() {
        bodies.push(Body::Advertise {
            robot: r.config.name.clone(),
            capabilities: r.capabilities.clone(),
            properties: r.properties.clone(),
        });
        bodies.push(Body::PoseUpdate {
            robot: r.config.name.clone(),
            pose: r.pose,
            battery: r.battery,
        });
    }
    for t in rt.tasks() {
        bodies.push(Body::TaskStatus {
            program_id: t.program_id,
            state: t.state,
            detail: t.detail,
        });
    }
    bodies.into_iter().map(|b| rt.message(b)).collect()
}

fn status_of(rt: &Runtime, program_id: &str) -> Body {
    match rt.status(program_id) {
        Some(t) => Body::TaskStatus {
            program_id: t.program_id,
            state: t.state,
            detail: t.detail,
        },
        None => Body::TaskStatus {
            program_id: program_id.to_string(),
            state: TaskState::Aborted,
            detail: Some(format!("unknown program {program_id}")),
        },
    }
}

/// Applies one client request; returns the direct replies.
pub fn control(rt: &mut Runtime, m: Message) -> Vec<Message> {
    let inject = |rt: &mut Runtime, mutation: Mutation| {
        if let Err(e) = rt.inject(mutation) {
            warn!("{} from {}: {e}", m.body.kind(), m.sender);
        }
    };
    let reply = match &m.body {
        Body::SubmitProgram { source, program_id } => {
            let src = SourceProgram::new(source.clone(), format!("<{}>", m.sender));
            match rt.submit(&src, program_id.as_deref()) {
                Ok(id) => Some(status_of(rt, &id)),
                Err(e) => Some(Body::TaskStatus {
                    program_id: program_id.clone().unwrap_or_default(),
                    state: TaskState::Aborted,
                    detail: Some(format!("rejected: {e}")),
                }),
            }
        }
        Body::QueryStatus { program_id } => Some(status_of(rt, program_id)),
        Body::CancelTask { program_id } => {
            if let Err(e) = rt.cancel(program_id) {
                warn!("{e}");
            }
            Some(status_of(rt, program_id))
        }
        Body::Event { name, args } => {
            inject(
                rt,
                Mutation::FireEvent {
                    name: name.clone(),
                    args: args.clone(),
                },
            );
            None
        }
        Body::PropertyUpdate { robot, prop, value } => {
            inject(
                rt,
                Mutation::SetProperty {
                    robot: robot.clone(),
                    prop: prop.clone(),
                    value: value.clone(),
                },
            );
            None
        }
        Body::Retract { robot, action } => {
            inject(
                rt,
                Mutation::RetractCapability {
                    robot: robot.clone(),
                    action: action.clone(),
                },
            );
            None
        }
        Body::Leave { robot } => {
            inject(
                rt,
                Mutation::RemoveRobot {
                    robot: robot.clone(),
                },
            );
            None
        }
        other => {
            warn!("{} from {} is not a control request", other.kind(), m.sender);
            None
        }
    };
    reply.map(|b| rt.message(b)).into_iter().collect()
}
