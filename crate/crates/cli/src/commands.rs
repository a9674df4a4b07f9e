//! Command implementations. Each returns its output and exit code so they can
//! be driven from tests without spawning a process.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use microctl_core::afsm::{all_sensors, detect_conflicts, AfsmDef, Rule};
use microctl_core::ensemble::CMVariant;
use microctl_core::meta::config_map as meta_config_map;
use microctl_core::{run as run_scenario, RunOptions, Scenario};

use crate::scenario::parse_scenario;
use crate::tables::{format_table, parse_table};
use crate::trace::{format_snapshot, format_trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_RUNTIME_FAULT: i32 = 2;
pub const EXIT_CONFLICTS: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutput {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl CommandOutput {
    fn ok(stdout: String) -> Self {
        CommandOutput {
            stdout,
            stderr: String::new(),
            code: EXIT_OK,
        }
    }

    fn error(code: i32, stderr: String) -> Self {
        CommandOutput {
            stdout: String::new(),
            stderr,
            code,
        }
    }
}

fn read(path: &Path) -> Result<String, CommandOutput> {
    fs::read_to_string(path)
        .map_err(|e| CommandOutput::error(EXIT_INPUT_ERROR, format!("{}: {e}\n", path.display())))
}

fn variant(name: &str) -> Result<CMVariant, CommandOutput> {
    CMVariant::parse(name).ok_or_else(|| {
        let known: Vec<_> = CMVariant::ALL.iter().map(|v| v.short_name()).collect();
        CommandOutput::error(
            EXIT_INPUT_ERROR,
            format!(
                "unknown variant `{name}` (expected one of {})\n",
                known.join(", ")
            ),
        )
    })
}

/// Runs a parsed scenario; the trace goes to stdout.
pub fn run_parsed(scenario: &Scenario, ticks: Option<u64>) -> CommandOutput {
    let outcome = run_scenario(
        scenario,
        RunOptions {
            ticks,
            ..RunOptions::default()
        },
    );
    let stdout = format_trace(outcome.trace());
    match outcome.fault {
        None => CommandOutput::ok(stdout),
        Some(fault) => CommandOutput {
            stdout,
            stderr: format!("runtime fault: {fault}\n"),
            code: EXIT_RUNTIME_FAULT,
        },
    }
}

pub fn run_text(text: &str, name: &str, ticks: Option<u64>) -> CommandOutput {
    match parse_scenario(text, name) {
        Ok(s) => run_parsed(&s, ticks),
        Err(e) => CommandOutput::error(EXIT_INPUT_ERROR, format!("{name}: {e}\n")),
    }
}

/// `run <scenario> [--ticks N] [--trace PATH]`
pub fn run(path: &Path, ticks: Option<u64>, trace: Option<&Path>) -> CommandOutput {
    let text = match read(path) {
        Ok(t) => t,
        Err(out) => return out,
    };
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    let mut out = run_text(&text, name, ticks);
    if let Some(trace) = trace {
        if out.code != EXIT_INPUT_ERROR {
            if let Err(e) = fs::write(trace, &out.stdout) {
                return CommandOutput::error(
                    EXIT_INPUT_ERROR,
                    format!("{}: {e}\n", trace.display()),
                );
            }
            out.stdout.clear();
        }
    }
    out
}

fn expected_table(name: Option<&str>) -> Result<AfsmDef, String> {
    match name {
        None => Ok(all_sensors()),
        Some(n) => CMVariant::parse(n)
            .map(CMVariant::machine)
            .ok_or_else(|| format!("no embedded table named `{n}`")),
    }
}

fn diff_rule(expected: &Rule, found: &Rule, report: &mut Vec<String>) -> bool {
    let states = |r: &Rule| {
        r.from
            .iter()
            .map(|s| s.name())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let predicate = |r: &Rule| {
        if expected.predicate != found.predicate
            && expected.predicate.to_string() == found.predicate.to_string()
        {
            format!("{:?}", r.predicate)
        } else {
            r.predicate.to_string()
        }
    };
    let fields = [
        ("name", expected.name.clone(), found.name.clone()),
        ("current state", states(expected), states(found)),
        (
            "new state",
            expected.to.name().to_string(),
            found.to.name().to_string(),
        ),
        ("predicate", predicate(expected), predicate(found)),
        (
            "volume",
            expected.output.volume.to_string(),
            found.output.volume.to_string(),
        ),
        (
            "vibration",
            expected.output.vibration.to_string(),
            found.output.vibration.to_string(),
        ),
    ];
    let before = report.len();
    for (what, e, f) in fields {
        if e != f {
            report.push(format!(
                "rule {}: {what} differs: expected `{e}`, found `{f}`",
                expected.id
            ));
        }
    }
    report.len() == before
}

/// Compares a rule table against the embedded one with the same name (the
/// all-sensors table when unnamed). Exits 1 on any difference.
pub fn validate_text(text: &str) -> CommandOutput {
    let table = match parse_table(text) {
        Ok(t) => t,
        Err(e) => return CommandOutput::error(EXIT_INPUT_ERROR, format!("{e}\n")),
    };
    let expected = match expected_table(table.name.as_deref()) {
        Ok(m) => m,
        Err(e) => return CommandOutput::error(EXIT_INPUT_ERROR, format!("{e}\n")),
    };
    let mut report = Vec::new();
    let mut matching = 0;
    for rule in expected.rules() {
        let found: Vec<&Rule> = table.rules.iter().filter(|r| r.id == rule.id).collect();
        match found[..] {
            [] => report.push(format!("rule {}: missing", rule.id)),
            [f, ..] => {
                if diff_rule(rule, f, &mut report) {
                    matching += 1;
                }
                if found.len() > 1 {
                    report.push(format!("rule {}: duplicate", rule.id));
                }
            }
        }
    }
    for rule in &table.rules {
        if expected.rule(rule.id).is_none() {
            report.push(format!("rule {}: unexpected", rule.id));
        }
    }
    let mut stdout = String::new();
    for line in &report {
        stdout.push_str(line);
        stdout.push('\n');
    }
    let _ = writeln!(
        stdout,
        "{}: {matching}/{} rules match",
        expected.name(),
        expected.rules().len()
    );
    CommandOutput {
        stdout,
        stderr: String::new(),
        code: if report.is_empty() {
            EXIT_OK
        } else {
            EXIT_INPUT_ERROR
        },
    }
}

/// `validate <tables-file>`
pub fn validate(path: &Path) -> CommandOutput {
    match read(path) {
        Ok(text) => validate_text(&text),
        Err(out) => out,
    }
}

pub fn check_machine(m: &AfsmDef) -> CommandOutput {
    let conflicts = detect_conflicts(m);
    let mut stdout = String::new();
    for c in &conflicts {
        let ids: Vec<_> = c.rules.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(
            stdout,
            "state={} rules={} witness: {}",
            c.state.name(),
            ids.join(","),
            format_snapshot(&c.witness)
        );
    }
    let _ = writeln!(
        stdout,
        "{}: {} conflicting rule sets",
        m.name(),
        conflicts.len()
    );
    CommandOutput {
        stdout,
        stderr: String::new(),
        code: if conflicts.is_empty() {
            EXIT_OK
        } else {
            EXIT_CONFLICTS
        },
    }
}

/// `check-conflicts <variant>`
pub fn check_conflicts(name: &str) -> CommandOutput {
    match variant(name) {
        Ok(v) => check_machine(&v.machine()),
        Err(out) => out,
    }
}

/// `list-rules <variant>`, in the same format `validate` reads.
pub fn list_rules(name: &str) -> CommandOutput {
    match variant(name) {
        Ok(v) => {
            let m = v.machine();
            CommandOutput::ok(format_table(m.name(), m.rules()))
        }
        Err(out) => out,
    }
}

/// `config-map`
pub fn config_map() -> CommandOutput {
    let mut stdout =
        String::from("gps   bt    ringtone vibration  context_manager   adaptation_manager\n");
    let flag = |ok: bool| if ok { "ok" } else { "FAIL" };
    for (h, c) in meta_config_map() {
        let _ = writeln!(
            stdout,
            "{:<5} {:<5} {:<8} {:<10} {:<17} {}",
            flag(h.gps_ok),
            flag(h.bt_ok),
            flag(h.ringtone_ok),
            flag(h.vibration_ok),
            c.active_cm.short_name(),
            c.active_am.short_name()
        );
    }
    CommandOutput::ok(stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_variant_is_an_input_error() {
        assert_eq!(check_conflicts("Toaster").code, EXIT_INPUT_ERROR);
        assert_eq!(list_rules("Toaster").code, EXIT_INPUT_ERROR);
    }

    #[test]
    fn listed_rules_validate() {
        for v in CMVariant::ALL {
            let out = validate_text(&list_rules(v.short_name()).stdout);
            assert_eq!(out.code, EXIT_OK, "{}", out.stdout);
        }
    }

    #[test]
    fn empty_table_reports_every_rule_missing() {
        let out = validate_text("");
        assert_eq!(out.code, EXIT_INPUT_ERROR);
        assert_eq!(out.stdout.matches(": missing").count(), 16);
        assert!(out.stdout.ends_with("0/16 rules match\n"));
    }

    #[test]
    fn config_map_has_sixteen_rows() {
        assert_eq!(config_map().stdout.lines().count(), 17);
    }

    #[test]
    fn scenario_errors_exit_one() {
        let out = run_text("ticks 2\n3 fail gps\n", "bad", None);
        assert_eq!(out.code, EXIT_INPUT_ERROR);
        assert!(out.stderr.contains("line 2"));
    }

    #[test]
    fn runtime_faults_exit_two() {
        let out = run_text("ticks 2\n1 bt_disconnect nobody\n", "fault", None);
        assert_eq!(out.code, EXIT_RUNTIME_FAULT);
        assert!(out.stdout.contains("kind=fault"));
    }
}
