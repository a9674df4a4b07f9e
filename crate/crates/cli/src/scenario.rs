//! Scenario files.
//!
//! ```text
//! # comment
//! name driving
//! ticks 5
//! 1 bt_connect car_handsfree
//! 2 gps_fix valid other 80 51.0 -0.1
//! 3 fail gps
//! 0 calendar 540 600
//! ```
//!
//! `ticks` is required; `name` defaults to the caller-supplied name. Events
//! are `<tick> <event> <args...>`, with times in minutes of the day.

use microctl_core::phone_sim::{Device, InjectedEvent, Location};
use microctl_core::Scenario;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_scenario(text: &str, default_name: &str) -> Result<Scenario, ScenarioParseError> {
    let mut name = None;
    let mut ticks = None;
    let mut events = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let err = |message: String| ScenarioParseError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "name" => {
                let [_, n] = words[..] else {
                    return Err(err("expected `name <name>`".into()));
                };
                name = Some(n.to_string());
            }
            "ticks" => {
                if ticks.is_some() {
                    return Err(err("duplicate ticks header".into()));
                }
                let [_, n] = words[..] else {
                    return Err(err("expected `ticks <N>`".into()));
                };
                ticks = Some(
                    n.parse::<u64>()
                        .map_err(|_| err(format!("invalid tick count `{n}`")))?,
                );
            }
            first => {
                let tick: u64 = first.parse().map_err(|_| {
                    err(format!("expected a tick number or header, found `{first}`"))
                })?;
                let Some(total) = ticks else {
                    return Err(err("event before the `ticks` header".into()));
                };
                if tick >= total {
                    return Err(err(format!("tick {tick} outside a {total}-tick run")));
                }
                let event = parse_event(&words[1..]).map_err(err)?;
                events.push((tick, event));
            }
        }
    }
    let Some(ticks) = ticks else {
        return Err(ScenarioParseError {
            line: last_line,
            message: "missing `ticks <N>` header".into(),
        });
    };
    let name = name.unwrap_or_else(|| default_name.to_string());
    Scenario::new(&name, ticks, events).map_err(|e| ScenarioParseError {
        line: last_line,
        message: e.to_string(),
    })
}

fn minute(s: &str) -> Result<u16, String> {
    match s.parse::<u16>() {
        Ok(m) if m < 1440 => Ok(m),
        _ => Err(format!("invalid minute of day `{s}`")),
    }
}

fn float(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("invalid number `{s}`")),
    }
}

fn device(s: &str) -> Result<Device, String> {
    Device::parse(s).map_err(|e| e.to_string())
}

fn parse_event(words: &[&str]) -> Result<InjectedEvent, String> {
    let Some((&kind, args)) = words.split_first() else {
        return Err("missing event".into());
    };
    let arity = |n: &[usize]| -> Result<(), String> {
        if n.contains(&args.len()) {
            Ok(())
        } else {
            Err(format!(
                "`{kind}` takes {n:?} arguments, found {}",
                args.len()
            ))
        }
    };
    Ok(match kind {
        "gps_fix" => {
            arity(&[3, 5])?;
            let valid = match args[0] {
                "valid" => true,
                "invalid" => false,
                other => return Err(format!("expected valid or invalid, found `{other}`")),
            };
            let location = Location::from_name(args[1])
                .ok_or_else(|| format!("unknown location `{}`", args[1]))?;
            let speed = float(args[2])?;
            if speed < 0.0 {
                return Err(format!("negative speed `{}`", args[2]));
            }
            let (lat, lon) = if args.len() == 5 {
                (float(args[3])?, float(args[4])?)
            } else {
                (0.0, 0.0)
            };
            InjectedEvent::GpsFix {
                valid,
                location,
                speed,
                lat,
                lon,
            }
        }
        "bt_connect" => {
            arity(&[1])?;
            InjectedEvent::BtConnect(args[0].to_string())
        }
        "bt_disconnect" => {
            arity(&[1])?;
            InjectedEvent::BtDisconnect(args[0].to_string())
        }
        "clock" => {
            arity(&[1])?;
            InjectedEvent::ClockSet(minute(args[0])?)
        }
        "calendar" => {
            arity(&[2])?;
            InjectedEvent::CalendarSet {
                meeting_start: minute(args[0])?,
                meeting_end: minute(args[1])?,
            }
        }
        "fail" => {
            arity(&[1])?;
            InjectedEvent::Fail(device(args[0])?)
        }
        "restore" => {
            arity(&[1])?;
            InjectedEvent::Restore(device(args[0])?)
        }
        other => return Err(format!("unknown event `{other}`")),
    })
}

/// Inverse of [`parse_scenario`] for generated scenarios.
pub fn format_scenario(s: &Scenario) -> String {
    let mut out = format!("name {}\nticks {}\n", s.name, s.ticks);
    for (tick, event) in s.events() {
        let body = match event {
            InjectedEvent::GpsFix {
                valid,
                location,
                speed,
                lat,
                lon,
            } => format!(
                "gps_fix {} {} {speed} {lat} {lon}",
                if *valid { "valid" } else { "invalid" },
                location.name()
            ),
            InjectedEvent::BtConnect(d) => format!("bt_connect {d}"),
            InjectedEvent::BtDisconnect(d) => format!("bt_disconnect {d}"),
            InjectedEvent::ClockSet(t) => format!("clock {t}"),
            InjectedEvent::CalendarSet {
                meeting_start,
                meeting_end,
            } => format!("calendar {meeting_start} {meeting_end}"),
            InjectedEvent::Fail(d) => format!("fail {}", d.name()),
            InjectedEvent::Restore(d) => format!("restore {}", d.name()),
        };
        out.push_str(&format!("{tick} {body}\n"));
    }
    out
}
