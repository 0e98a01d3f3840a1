//! TCP protocol server.
//!
//! Threads: one acceptor, a reader and a writer per client, and the driver
//! that owns the [`Session`]. Readers hand commands to the driver over two
//! channels, with `estop` on its own lane that is drained first. The driver
//! fans messages out into per-client [`ClientOutbox`]es; a writer thread
//! drains each one onto its socket.
//!
//! A client must open with `hello`. Any number of observers may connect, but
//! only one controller at a time. Only the controller may send commands,
//! except `estop`, which every client may send.

use std::collections::VecDeque;
use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use gesture_cell::synth::GestureClass;

use crate::messages::{
    ClientMsg, Command, CommandError, ErrorCode, Response, Role, ServerMsg, TelemetryMsg, Welcome, COMMAND_NAMES,
};
use crate::session::Session;
use crate::wire;
use crate::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerConfig {
    /// Telemetry messages held per client before the oldest are dropped.
    pub telemetry_queue: usize,
    /// Pace the loop to wall-clock time; otherwise run as fast as possible.
    pub realtime: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { telemetry_queue: 512, realtime: true }
    }
}

type Frame = Arc<Vec<u8>>;

#[derive(Default)]
struct OutboxState {
    control: VecDeque<Frame>,
    telemetry: VecDeque<Frame>,
    dropped: u64,
    closed: bool,
}

/// Per-client outgoing queue. Control frames (responses, gesture events)
/// are never dropped; telemetry beyond `capacity` evicts the oldest
/// telemetry frame.
pub struct ClientOutbox {
    state: Mutex<OutboxState>,
    ready: Condvar,
    capacity: usize,
}

impl ClientOutbox {
    pub fn new(capacity: usize) -> Self {
        Self { state: Mutex::new(OutboxState::default()), ready: Condvar::new(), capacity: capacity.max(1) }
    }

    pub fn push_control(&self, frame: Arc<Vec<u8>>) {
        let mut s = self.state.lock().unwrap();
        if !s.closed {
            s.control.push_back(frame);
            self.ready.notify_one();
        }
    }

    /// Returns `true` when an older frame had to be dropped.
    pub fn push_telemetry(&self, frame: Arc<Vec<u8>>) -> bool {
        let mut s = self.state.lock().unwrap();
        if s.closed {
            return false;
        }
        let mut dropped = false;
        if s.telemetry.len() >= self.capacity {
            s.telemetry.pop_front();
            s.dropped += 1;
            dropped = true;
        }
        s.telemetry.push_back(frame);
        self.ready.notify_one();
        dropped
    }

    /// Blocks for the next frame, control first. `None` once closed and
    /// drained of control frames.
    pub fn next(&self) -> Option<Arc<Vec<u8>>> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(f) = s.control.pop_front() {
                return Some(f);
            }
            if s.closed {
                return None;
            }
            if let Some(f) = s.telemetry.pop_front() {
                return Some(f);
            }
            s = self.ready.wait(s).unwrap();
        }
    }

    pub fn dropped(&self) -> u64 {
        self.state.lock().unwrap().dropped
    }

    pub fn queued(&self) -> (usize, usize) {
        let s = self.state.lock().unwrap();
        (s.control.len(), s.telemetry.len())
    }

    pub fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }
}

fn encode(msg: &ServerMsg) -> Frame {
    Arc::new(serde_json::to_vec(msg).expect("server messages serialise"))
}

struct Inbound {
    id: u64,
    command: Command,
    reply: Arc<ClientOutbox>,
}

enum Membership {
    Join { role: Role, outbox: Arc<ClientOutbox>, stream: TcpStream },
}

struct Member {
    outbox: Arc<ClientOutbox>,
    stream: TcpStream,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    dropped: Arc<AtomicU64>,
    driver: Option<JoinHandle<Result<Session, GatewayError>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Telemetry frames dropped across all clients so far.
    pub fn telemetry_dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn is_finished(&self) -> bool {
        self.driver.as_ref().is_none_or(|d| d.is_finished())
    }

    /// Stops the loop and returns the session for inspection.
    pub fn shutdown(mut self) -> Result<Session, GatewayError> {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        match self.driver.take().map(JoinHandle::join) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(GatewayError::Io("driver thread panicked".into())),
            None => Err(GatewayError::Io("server already stopped".into())),
        }
    }

    /// Blocks until the driver stops on its own (it only does on error).
    pub fn wait(mut self) -> Result<Session, GatewayError> {
        match self.driver.take().map(JoinHandle::join) {
            Some(Ok(r)) => r,
            _ => Err(GatewayError::Io("driver thread panicked".into())),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

pub fn spawn(session: Session, listener: TcpListener, config: ServerConfig) -> io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let stop = Arc::new(AtomicBool::new(false));
    let dropped = Arc::new(AtomicU64::new(0));
    let (urgent_tx, urgent_rx) = mpsc::channel::<Inbound>();
    let (normal_tx, normal_rx) = mpsc::channel::<Inbound>();
    let (join_tx, join_rx) = mpsc::channel::<Membership>();

    let acceptor = {
        let stop = stop.clone();
        thread::Builder::new().name("gateway-accept".into()).spawn(move || {
            let controller = Arc::new(AtomicU64::new(0));
            let mut next_client = 1u64;
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let _ = stream.set_nonblocking(false);
                        let _ = stream.set_nodelay(true);
                        let ctx = ClientCtx {
                            client: next_client,
                            controller: controller.clone(),
                            urgent: urgent_tx.clone(),
                            normal: normal_tx.clone(),
                            join: join_tx.clone(),
                            capacity: config.telemetry_queue,
                        };
                        next_client += 1;
                        let _ = thread::Builder::new().name("gateway-client".into()).spawn(move || ctx.run(stream));
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                    Err(_) => thread::sleep(Duration::from_millis(10)),
                }
            }
        })?
    };

    let driver = {
        let stop = stop.clone();
        let dropped = dropped.clone();
        thread::Builder::new()
            .name("gateway-driver".into())
            .spawn(move || drive(session, config, stop, dropped, urgent_rx, normal_rx, join_rx))?
    };

    Ok(ServerHandle { addr, stop, dropped, driver: Some(driver), acceptor: Some(acceptor) })
}

fn drive(
    mut session: Session,
    config: ServerConfig,
    stop: Arc<AtomicBool>,
    dropped: Arc<AtomicU64>,
    urgent: Receiver<Inbound>,
    normal: Receiver<Inbound>,
    joins: Receiver<Membership>,
) -> Result<Session, GatewayError> {
    let mut members: Vec<Member> = Vec::new();
    let period = Duration::from_secs_f64(session.dt());
    let start = Instant::now();
    let result = loop {
        if stop.load(Ordering::SeqCst) {
            break Ok(());
        }
        while let Ok(Membership::Join { role, outbox, stream }) = joins.try_recv() {
            let welcome = Welcome {
                role,
                preset: session.preset().to_string(),
                gestures: GestureClass::ALL.iter().map(|g| g.name().to_string()).collect(),
                commands: COMMAND_NAMES.iter().map(|c| c.to_string()).collect(),
            };
            outbox.push_control(encode(&ServerMsg::Welcome(welcome)));
            members.push(Member { outbox, stream });
        }
        for lane in [&urgent, &normal] {
            while let Ok(cmd) = lane.try_recv() {
                let result = session.handle_command(&cmd.command);
                cmd.reply.push_control(encode(&ServerMsg::Response(Response::from_result(Some(cmd.id), result))));
            }
        }
        if let Err(e) = session.tick() {
            break Err(e);
        }
        members.retain(|m| !m.outbox.is_closed());
        for mut msg in session.drain() {
            if let ServerMsg::Telemetry(TelemetryMsg::Metrics { telemetry_dropped, .. }) = &mut msg {
                *telemetry_dropped = dropped.load(Ordering::Relaxed);
            }
            let frame = encode(&msg);
            let lossy = matches!(msg, ServerMsg::Telemetry(_));
            for m in &members {
                if !lossy {
                    m.outbox.push_control(frame.clone());
                } else if m.outbox.push_telemetry(frame.clone()) {
                    dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        if config.realtime {
            let due = start + period * session.ticks() as u32;
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    };
    for m in &members {
        m.outbox.close();
        let _ = m.stream.shutdown(Shutdown::Both);
    }
    result.map(|()| session)
}

struct ClientCtx {
    client: u64,
    controller: Arc<AtomicU64>,
    urgent: Sender<Inbound>,
    normal: Sender<Inbound>,
    join: Sender<Membership>,
    capacity: usize,
}

impl ClientCtx {
    fn run(self, stream: TcpStream) {
        let Ok(write_half) = stream.try_clone() else { return };
        let Ok(member_half) = stream.try_clone() else { return };
        let mut reader = BufReader::new(stream);
        let reject = |err: CommandError| {
            let mut w = BufWriter::new(&write_half);
            let _ = wire::send_json(&mut w, &ServerMsg::Response(Response::from_result(None, Err(err))));
            let _ = write_half.shutdown(Shutdown::Both);
        };

        let role = match wire::read_frame(&mut reader) {
            Ok(Some(bytes)) => match serde_json::from_slice::<ClientMsg>(&bytes) {
                Ok(ClientMsg::Hello { role }) => role,
                _ => return reject(CommandError::new(ErrorCode::BadRequest, "expected hello")),
            },
            _ => return,
        };
        if role == Role::Controller
            && self.controller.compare_exchange(0, self.client, Ordering::SeqCst, Ordering::SeqCst).is_err()
        {
            return reject(CommandError::new(ErrorCode::ControllerTaken, "another controller is connected"));
        }

        let outbox = Arc::new(ClientOutbox::new(self.capacity));
        let writer = {
            let outbox = outbox.clone();
            let stream = write_half;
            thread::spawn(move || {
                let mut w = BufWriter::new(&stream);
                while let Some(frame) = outbox.next() {
                    if wire::write_frame(&mut w, &frame).is_err() {
                        break;
                    }
                }
                outbox.close();
                let _ = stream.shutdown(Shutdown::Both);
            })
        };
        let joined = self.join.send(Membership::Join { role, outbox: outbox.clone(), stream: member_half });
        if joined.is_ok() {
            self.read_loop(&mut reader, role, &outbox);
        }
        outbox.close();
        if role == Role::Controller {
            let _ = self.controller.compare_exchange(self.client, 0, Ordering::SeqCst, Ordering::SeqCst);
        }
        let _ = writer.join();
    }

    fn read_loop(&self, reader: &mut BufReader<TcpStream>, role: Role, outbox: &Arc<ClientOutbox>) {
        let respond = |id: Option<u64>, err: CommandError| {
            outbox.push_control(encode(&ServerMsg::Response(Response::from_result(id, Err(err)))));
        };
        loop {
            let bytes = match wire::read_frame(reader) {
                Ok(Some(b)) => b,
                _ => return,
            };
            if outbox.is_closed() {
                return;
            }
            let (id, value) = match serde_json::from_slice::<ClientMsg>(&bytes) {
                Ok(ClientMsg::Command { id, command }) => (id, command),
                Ok(ClientMsg::Hello { .. }) => {
                    respond(None, CommandError::new(ErrorCode::BadRequest, "already greeted"));
                    continue;
                }
                Err(e) => {
                    respond(None, CommandError::new(ErrorCode::BadRequest, e.to_string()));
                    continue;
                }
            };
            let command = match Command::from_value(value) {
                Ok(c) => c,
                Err(e) => {
                    respond(Some(id), e);
                    continue;
                }
            };
            // any client may stop the robot
            if role != Role::Controller && command != Command::Estop {
                respond(Some(id), CommandError::new(ErrorCode::NotController, "observers cannot send commands"));
                continue;
            }
            let lane = if command == Command::Estop { &self.urgent } else { &self.normal };
            if lane.send(Inbound { id, command, reply: outbox.clone() }).is_err() {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(b: u8) -> Frame {
        Arc::new(vec![b])
    }

    #[test]
    fn outbox_drops_oldest_telemetry_only() {
        let o = ClientOutbox::new(3);
        o.push_control(f(100));
        for b in 0..10 {
            o.push_telemetry(f(b));
        }
        o.push_control(f(101));
        assert_eq!(o.dropped(), 7);
        assert_eq!(o.queued(), (2, 3));
        let order: Vec<u8> = (0..5).map(|_| o.next().unwrap()[0]).collect();
        assert_eq!(order, vec![100, 101, 7, 8, 9]);
    }

    #[test]
    fn closed_outbox_flushes_control_then_ends() {
        let o = ClientOutbox::new(2);
        o.push_telemetry(f(1));
        o.push_control(f(2));
        o.close();
        assert_eq!(o.next().unwrap()[0], 2);
        assert!(o.next().is_none());
        o.push_control(f(3));
        assert!(o.next().is_none());
    }
}
