use gesture_cell::synth::Environment;
use gesture_cell_gateway::log::{parse_log, read_log, replay, LogRecord, SessionLogWriter, LOG_VERSION};
use gesture_cell_gateway::messages::Command;
use gesture_cell_gateway::{GatewayError, PipelineConfig, Session};

fn inject(class: &str) -> Command {
    Command::InjectGesture { class: class.into(), confidence: 1.0 }
}

/// Records a short operator session and returns the log text.
fn record(dir: &std::path::Path) -> String {
    let config = PipelineConfig::synthetic("test1", Environment::HandPlusHuman, 11);
    let path = dir.join("session.jsonl");
    let mut s = Session::new(config.clone()).unwrap();
    s.attach_log(SessionLogWriter::create(&path, &config).unwrap());
    let script: [(f64, Command); 7] = [
        (0.3, inject("swipe_right")),
        (0.8, Command::SetProximity { distance: Some(0.7) }),
        (1.5, inject("up")),
        (2.0, Command::Estop),
        (2.5, Command::ReleaseEstop),
        (0.5, Command::SetProximity { distance: None }),
        (0.1, inject("wave")),
    ];
    for (wait, cmd) in &script {
        s.run_for(*wait).unwrap();
        let _ = s.handle_command(cmd);
    }
    s.run_for(6.0).unwrap();
    s.drain();
    s.finish_log().unwrap().unwrap();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn replay_reproduces_events_and_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let text = record(dir.path());
    let log = read_log(&dir.path().join("session.jsonl")).unwrap();
    assert!(!log.truncated);
    assert_eq!(log.events().len(), 2);
    let commands = log.records.iter().filter(|r| matches!(r, LogRecord::Command { .. })).count();
    assert_eq!(commands, 7, "rejected commands are logged too");

    let report = replay(&log, None).unwrap();
    assert!(report.is_faithful(), "{report:?}");
    assert_eq!(report.final_state_match, Some(true));
    assert_eq!(report.replayed_events, 2);
    assert_eq!(report.records, text.lines().count() - 1);
}

#[test]
fn truncated_log_replays_as_a_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let text = record(dir.path());
    // cut in the middle of a line somewhere after the first event
    let first_event = text.find("\"kind\":\"gesture\"").unwrap();
    let cut = first_event + (text.len() - first_event) / 3;
    let log = parse_log(&text[..cut]).unwrap();
    assert!(log.truncated);
    assert!(log.end().is_none());
    let complete = text[..cut].matches('\n').count() - 1;
    assert_eq!(log.records.len(), complete);

    let report = replay(&log, None).unwrap();
    assert!(report.is_faithful(), "{report:?}");
    assert_eq!(report.final_state_match, None);
    assert!(report.recorded_events >= 1 && report.recorded_events <= report.replayed_events);
}

#[test]
fn empty_log_is_a_successful_noop() {
    for text in ["", "\n", "  \n\n"] {
        let log = parse_log(text).unwrap();
        assert!(log.config.is_none() && log.records.is_empty());
        let report = replay(&log, None).unwrap();
        assert!(report.is_faithful());
        assert_eq!((report.records, report.ticks, report.replayed_events), (0, 0, 0));
    }
}

#[test]
fn other_versions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let text = record(dir.path());
    let bumped = text.replacen(&format!("\"version\":{LOG_VERSION}"), "\"version\":99", 1);
    assert_ne!(bumped, text);
    match parse_log(&bumped) {
        Err(GatewayError::LogVersion { found, expected }) => {
            assert_eq!(found, "99");
            assert_eq!(expected, LOG_VERSION);
        }
        other => panic!("expected a version error, got {other:?}"),
    }
    assert!(parse_log("{\"record\":\"header\",\"format\":\"something-else\",\"version\":1}\n").is_err());
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = record(dir.path());
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{\"record\":\"message\",";
    let broken = lines.join("\n") + "\n";
    let err = parse_log(&broken).unwrap_err();
    assert!(err.to_string().contains("line 4"), "{err}");
}

#[test]
fn tampered_log_is_reported_unfaithful() {
    let dir = tempfile::tempdir().unwrap();
    let text = record(dir.path());
    let tampered = text.replacen("\"class\":\"swipe_right\"", "\"class\":\"swipe_left\"", 1);
    let report = replay(&parse_log(&tampered).unwrap(), None).unwrap();
    assert!(!report.events_match);
    assert_eq!(report.first_mismatch, Some(0));
    assert!(!report.is_faithful());
}
