//! The operator protocol over real sockets.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use gesture_cell::synth::Environment;
use gesture_cell_gateway::messages::{ClientMsg, ErrorCode, Response, Role, ServerMsg, TelemetryMsg, Welcome};
use gesture_cell_gateway::server::{self, ServerConfig, ServerHandle};
use gesture_cell_gateway::wire::{recv_json, send_json};
use gesture_cell_gateway::{PipelineConfig, Session};
use serde_json::{json, Value};

fn start(config: ServerConfig) -> ServerHandle {
    let session = Session::new(PipelineConfig::synthetic("test1", Environment::HandOnly, 1)).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    server::spawn(session, listener, config).unwrap()
}

struct Client {
    r: BufReader<TcpStream>,
    w: BufWriter<TcpStream>,
    next_id: u64,
}

impl Client {
    fn raw(handle: &ServerHandle) -> Self {
        let s = TcpStream::connect(handle.addr()).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        Self { r: BufReader::new(s.try_clone().unwrap()), w: BufWriter::new(s), next_id: 1 }
    }

    fn hello(&mut self, role: Role) {
        send_json(&mut self.w, &ClientMsg::Hello { role }).unwrap();
    }

    fn connect(handle: &ServerHandle, role: Role) -> (Self, Welcome) {
        let mut c = Self::raw(handle);
        c.hello(role);
        match c.recv() {
            Some(ServerMsg::Welcome(w)) => (c, w),
            other => panic!("expected welcome, got {other:?}"),
        }
    }

    fn recv(&mut self) -> Option<ServerMsg> {
        recv_json(&mut self.r).unwrap()
    }

    fn send(&mut self, command: Value) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        send_json(&mut self.w, &ClientMsg::Command { id, command }).unwrap();
        id
    }

    /// Reads until the response to `id`, collecting everything else.
    fn response(&mut self, id: u64, seen: &mut Vec<ServerMsg>) -> Response {
        loop {
            match self.recv().expect("connection closed") {
                ServerMsg::Response(r) if r.id == Some(id) => return r,
                other => seen.push(other),
            }
        }
    }

    fn call(&mut self, command: Value) -> Response {
        let id = self.send(command);
        self.response(id, &mut Vec::new())
    }
}

fn code(r: &Response) -> Option<ErrorCode> {
    r.error.as_ref().map(|e| e.code)
}

#[test]
fn welcome_lists_gestures_and_commands() {
    let h = start(ServerConfig::default());
    let (_c, w) = Client::connect(&h, Role::Observer);
    assert_eq!(w.role, Role::Observer);
    assert_eq!(w.preset, "test1");
    assert_eq!(w.gestures.len(), 9);
    for cmd in ["inject_gesture", "play_gesture", "set_proximity", "estop", "release_estop", "load_preset"] {
        assert!(w.commands.iter().any(|c| c == cmd), "{cmd}");
    }
    h.shutdown().unwrap();
}

#[test]
fn roles_gate_commands() {
    let h = start(ServerConfig::default());
    let (mut ctl, _) = Client::connect(&h, Role::Controller);
    let (mut obs, _) = Client::connect(&h, Role::Observer);

    let r = obs.call(json!({"cmd": "inject_gesture", "class": "up"}));
    assert_eq!(code(&r), Some(ErrorCode::NotController));

    let mut second = Client::raw(&h);
    second.hello(Role::Controller);
    match second.recv() {
        Some(ServerMsg::Response(r)) => assert_eq!(code(&r), Some(ErrorCode::ControllerTaken)),
        other => panic!("{other:?}"),
    }
    assert!(second.recv().is_none(), "refused controller is disconnected");

    let r = obs.call(json!({"cmd": "estop"}));
    assert!(r.ok, "{r:?}");
    let r = ctl.call(json!({"cmd": "release_estop"}));
    assert!(r.ok);

    // the slot frees up when the controller leaves
    drop(ctl);
    let t = Instant::now();
    loop {
        let mut c = Client::raw(&h);
        c.hello(Role::Controller);
        match c.recv() {
            Some(ServerMsg::Welcome(w)) => {
                assert_eq!(w.role, Role::Controller);
                break;
            }
            _ if t.elapsed() < Duration::from_secs(10) => std::thread::sleep(Duration::from_millis(20)),
            other => panic!("controller slot never freed: {other:?}"),
        }
    }
    h.shutdown().unwrap();
}

#[test]
fn malformed_requests_get_error_responses() {
    let h = start(ServerConfig::default());
    let (mut ctl, _) = Client::connect(&h, Role::Controller);
    assert_eq!(code(&ctl.call(json!({"cmd": "launch_missiles"}))), Some(ErrorCode::UnknownCommand));
    assert_eq!(code(&ctl.call(json!({"verb": "estop"}))), Some(ErrorCode::BadRequest));
    assert_eq!(code(&ctl.call(json!({"cmd": "set_proximity", "distance": "near"}))), Some(ErrorCode::BadArguments));
    assert_eq!(code(&ctl.call(json!({"cmd": "play_gesture", "class": "up"}))), Some(ErrorCode::Rejected));

    // a frame that is not a client message at all
    send_json(&mut ctl.w, &json!({"kind": "gossip"})).unwrap();
    match ctl.recv().unwrap() {
        ServerMsg::Response(r) => assert_eq!((r.id, code(&r)), (None, Some(ErrorCode::BadRequest))),
        other => panic!("{other:?}"),
    }
    // the connection still works
    let r = ctl.call(json!({"cmd": "inject_gesture", "class": "swipe_right"}));
    assert!(r.ok && r.detail.as_deref().unwrap().contains("move_right"), "{r:?}");
    assert_eq!(code(&ctl.call(json!({"cmd": "load_preset", "id": "test5"}))), Some(ErrorCode::Rejected));

    let mut silent = Client::raw(&h);
    silent.hello(Role::Observer);
    silent.recv();
    let mut rude = Client::raw(&h);
    send_json(&mut rude.w, &json!({"kind": "command", "id": 1, "command": {"cmd": "estop"}})).unwrap();
    match rude.recv() {
        Some(ServerMsg::Response(r)) => assert_eq!(code(&r), Some(ErrorCode::BadRequest)),
        other => panic!("{other:?}"),
    }
    h.shutdown().unwrap();
}

#[test]
fn events_and_telemetry_fan_out_to_every_client() {
    let h = start(ServerConfig::default());
    let (mut ctl, _) = Client::connect(&h, Role::Controller);
    let (mut a, _) = Client::connect(&h, Role::Observer);
    let (mut b, _) = Client::connect(&h, Role::Observer);
    let r = ctl.call(json!({"cmd": "inject_gesture", "class": "up", "confidence": 0.9}));
    assert!(r.ok);

    for obs in [&mut a, &mut b] {
        let mut gesture = None;
        let mut streams = std::collections::BTreeSet::new();
        while gesture.is_none() || streams.len() < 3 {
            match obs.recv().unwrap() {
                ServerMsg::Gesture(g) => gesture = Some(g),
                ServerMsg::Telemetry(t) => {
                    streams.insert(t.stream().to_string());
                }
                ServerMsg::Response(r) => panic!("observer got someone else's response {r:?}"),
                ServerMsg::Welcome(_) => panic!("second welcome"),
            }
        }
        let g = gesture.unwrap();
        assert_eq!((g.class.as_str(), g.confidence, g.seq), ("up", 0.9, 0));
        assert_eq!(g.channel, "gesture_recognition");
    }
    let session = h.shutdown().unwrap();
    assert_eq!(session.events().len(), 1);
}

#[test]
fn stalled_client_loses_telemetry_but_not_responses() {
    let h = start(ServerConfig { telemetry_queue: 8, realtime: false });
    let (mut ctl, _) = Client::connect(&h, Role::Controller);
    let (mut stalled, _) = Client::connect(&h, Role::Observer);
    let estop_id = stalled.send(json!({"cmd": "estop"}));

    // the controller keeps reading; the observer reads nothing for a while
    let t = Instant::now();
    let mut reported = 0;
    while reported == 0 {
        assert!(t.elapsed() < Duration::from_secs(60), "no telemetry was ever dropped");
        if let Some(ServerMsg::Telemetry(TelemetryMsg::Metrics { telemetry_dropped, .. })) = ctl.recv() {
            reported = telemetry_dropped;
        }
    }
    assert!(h.telemetry_dropped() >= reported);
    let r = ctl.call(json!({"cmd": "inject_gesture", "class": "swipe_left"}));
    assert!(r.ok);

    let mut seen = Vec::new();
    let r = stalled.response(estop_id, &mut seen);
    assert!(r.ok, "{r:?}");
    // the gesture event rides the lossless lane
    while !seen.iter().any(|m| matches!(m, ServerMsg::Gesture(_))) {
        seen.push(stalled.recv().unwrap());
    }
    let session = h.shutdown().unwrap();
    assert!(session.robot().state().estopped);
}
