//! Line encoding of trace records: `key=value` pairs in a fixed order,
//! starting with `tick` and `kind`.

use microctl_core::afsm::RuleId;
use microctl_core::phone_sim::SensorSnapshot;
use microctl_core::trace::{TraceEvent, TraceRecord};

fn join_ids(ids: &[RuleId]) -> String {
    ids.iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn format_record(r: &TraceRecord) -> String {
    let head = format!("tick={} kind={}", r.tick, r.kind());
    let body = match &r.event {
        TraceEvent::ContextChange {
            rule,
            from,
            to,
            output,
        } => format!(
            "rule={rule} from={} to={} volume={} vibration={}",
            from.name(),
            to.name(),
            output.volume,
            output.vibration
        ),
        TraceEvent::Conflict {
            state,
            fired,
            others,
        } => {
            format!(
                "state={} fired={fired} others={}",
                state.name(),
                join_ids(others)
            )
        }
        TraceEvent::EffectorSet { by, applied, state } => {
            let mut set = Vec::new();
            if applied.volume {
                set.push("volume");
            }
            if applied.vibration {
                set.push("vibration");
            }
            let set = if set.is_empty() {
                "none".to_string()
            } else {
                set.join(",")
            };
            format!(
                "by={by} applied={set} volume={} vibration={}",
                state.volume, state.vibration
            )
        }
        TraceEvent::Failure { device, status } => format!("device={device} status={status}"),
        TraceEvent::Reconfig {
            role,
            rule,
            old,
            new,
        } => {
            format!("role={role} rule={rule} old={old} new={new}")
        }
        TraceEvent::RuleChange { from, to } => format!("from={} to={}", from.name(), to.name()),
        TraceEvent::Fault { message } => format!("message={message:?}"),
    };
    format!("{head} {body}")
}

pub fn format_trace(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

pub fn format_snapshot(s: &SensorSnapshot) -> String {
    let gps = if s.gps.valid {
        format!("valid:{}:{}", s.gps.location.name(), s.gps.speed)
    } else {
        "invalid".to_string()
    };
    let bt = if s.bluetooth.is_empty() {
        "-".to_string()
    } else {
        s.bluetooth.iter().cloned().collect::<Vec<_>>().join(",")
    };
    format!(
        "gps={gps} bt={bt} time={} meeting={}-{}",
        s.time, s.meeting_start, s.meeting_end
    )
}
