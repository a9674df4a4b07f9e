//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use microctl::commands::{check_conflicts, run_text, EXIT_CONFLICTS, EXIT_OK};
use microctl::tables::parse_table;
use microctl::trace::format_trace;
use microctl_core::afsm::{
    all_sensors, build_variant, snapshot_grid, Atom, ContextState, Predicate, RuleId,
};
use microctl_core::bus::{BoxedHandler, Bus, Descriptor, Message, Outbox, Role, Topic};
use microctl_core::ensemble::{AMVariant, CMVariant, Signal};
use microctl_core::knowledge::keys;
use microctl_core::meta::{config_map, ADAPTATION_MANAGER_RULES, CONTEXT_MANAGER_RULES};
use microctl_core::phone_sim::{
    Device, EffectorCall, EffectorState, HealthState, InjectedEvent, Location, SensorSnapshot,
    Vibration,
};
use microctl_core::trace::{TraceEvent, TraceRecord};
use microctl_core::{run, RunOptions, Runtime, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn crate_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(crate_file(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn scenario(name: &str) -> Scenario {
    microctl::scenario::parse_scenario(&read(&format!("scenarios/{name}.scn")), name).unwrap()
}

fn context_changes(trace: &[TraceRecord]) -> Vec<(char, ContextState, u8, Vibration)> {
    trace
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::ContextChange {
                rule, to, output, ..
            } => Some((rule.as_char(), *to, output.volume, output.vibration)),
            _ => None,
        })
        .collect()
}

fn golden(name: &str, expected: &[(char, ContextState, u8, Vibration)]) {
    let s = scenario(name);
    let out = run(&s, RunOptions::default());
    assert!(out.fault.is_none());
    assert_eq!(context_changes(out.trace()), expected);
    let cli = run_text(&read(&format!("scenarios/{name}.scn")), name, None);
    assert_eq!(cli.code, EXIT_OK);
    assert_eq!(
        cli.stdout,
        read(&format!("tests/golden/{name}.trace")),
        "byte-exact trace"
    );
    assert_eq!(cli.stdout, format_trace(out.trace()));
}

fn criterion_1() {
    use ContextState::*;
    use Vibration::Off;
    golden(
        "driving",
        &[
            ('e', Driving, 75, Off),
            ('g', DrivingFast, 0, Off),
            ('h', Driving, 75, Off),
            ('f', General, 50, Off),
        ],
    );
}

fn criterion_2() {
    use ContextState::*;
    use Vibration::{Off, On};
    golden(
        "meeting",
        &[
            ('k', Office, 0, On),
            ('m', Meeting, 0, Off),
            ('n', Office, 0, On),
            ('l', General, 50, Off),
        ],
    );
}

fn criterion_3() {
    let s = scenario("gps_failure");
    let fail_tick = s
        .events()
        .iter()
        .find(|(_, e)| *e == InjectedEvent::Fail(Device::Gps))
        .map(|(t, _)| *t)
        .unwrap();
    let mut rt = Runtime::new();
    let mut gps_reads = Vec::new();
    for tick in 0..s.ticks {
        rt.tick(tick, s.events_at(tick)).unwrap();
        if tick >= fail_tick {
            gps_reads.push(rt.sim().access().gps);
        }
    }
    let trace = rt.trace();
    let failures: Vec<_> = trace
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::Failure { .. }))
        .collect();
    let reconfigs: Vec<_> = trace
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::Reconfig { .. }))
        .collect();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].tick, fail_tick);
    assert_eq!(reconfigs.len(), 1);
    assert_eq!(
        reconfigs[0].event,
        TraceEvent::Reconfig {
            role: Role::ContextManager,
            rule: 'b',
            old: "ContextManagerAllSensors".into(),
            new: "ContextManagerNoGPS".into(),
        }
    );
    let gps_only = [
        ContextState::Outdoor,
        ContextState::Jogging,
        ContextState::DrivingFast,
    ];
    // The scenario must reach a GPS-only state before the failure for the check to mean anything.
    assert!(context_changes(trace)
        .iter()
        .any(|(_, to, ..)| gps_only.contains(to)));
    let after = trace
        .iter()
        .skip_while(|r| !matches!(r.event, TraceEvent::Reconfig { .. }));
    for r in after {
        if let TraceEvent::ContextChange { to, .. } | TraceEvent::RuleChange { to, .. } = r.event {
            assert!(!gps_only.contains(&to), "{r:?}");
        }
    }
    assert!(gps_reads.windows(2).all(|w| w[0] == w[1]), "{gps_reads:?}");
    assert_eq!(read("tests/golden/gps_failure.trace"), format_trace(trace));
}

fn criterion_4() {
    let table = parse_table(&read("tables/no_gps.rules")).unwrap();
    let derived = build_variant(false, true);
    assert_eq!(table.name.as_deref(), Some(derived.name()));
    assert_eq!(table.rules.len(), 10);
    assert_eq!(table.rules, derived.rules());
    for id in ['i', 'k'] {
        let rule = derived.rule(RuleId::new(id).unwrap()).unwrap();
        assert!(matches!(
            rule.predicate,
            Predicate::Atom(Atom::BtConnected(_))
        ));
    }
    let full_table = parse_table(&read("tables/all_sensors.rules")).unwrap();
    assert_eq!(full_table.rules, all_sensors().rules());
}

fn criterion_5() {
    let map = config_map();
    assert_eq!(map.len(), 16);
    let inputs: BTreeSet<_> = map
        .iter()
        .map(|(h, _)| (h.gps_ok, h.bt_ok, h.ringtone_ok, h.vibration_ok))
        .collect();
    assert_eq!(inputs.len(), 16);
    let pairs: BTreeSet<(CMVariant, AMVariant)> = map
        .iter()
        .map(|(_, c)| (c.active_cm, c.active_am))
        .collect();
    assert_eq!(pairs.len(), 16);
    for bits in 0u8..16 {
        let h = HealthState {
            gps_ok: bits & 1 != 0,
            bt_ok: bits & 2 != 0,
            ringtone_ok: bits & 4 != 0,
            vibration_ok: bits & 8 != 0,
        };
        let cm: Vec<char> = CONTEXT_MANAGER_RULES
            .iter()
            .filter(|r| (r.trigger)(&h))
            .map(|r| r.id)
            .collect();
        let am: Vec<char> = ADAPTATION_MANAGER_RULES
            .iter()
            .filter(|r| (r.trigger)(&h))
            .map(|r| r.id)
            .collect();
        assert_eq!(cm.len(), 1, "{h:?}");
        assert_eq!(am.len(), 1, "{h:?}");
    }
    let ids = |rules: &[microctl_core::meta::MetaRule]| -> String {
        rules.iter().map(|r| r.id).collect()
    };
    assert_eq!(ids(&CONTEXT_MANAGER_RULES), "abcd");
    assert_eq!(ids(&ADAPTATION_MANAGER_RULES), "efgh");
}

const PEERS: [&str; 6] = [
    "car_handsfree",
    "home_pc",
    "office_pc",
    "peer_a",
    "peer_b",
    "peer_c",
];

fn random_scenario(rng: &mut ChaCha8Rng, devices: &[Device]) -> Scenario {
    let ticks = rng.gen_range(4..24u64);
    let mut connected = BTreeSet::new();
    let mut events = vec![(
        0,
        InjectedEvent::CalendarSet {
            meeting_start: 540,
            meeting_end: 600,
        },
    )];
    for tick in 0..ticks {
        for _ in 0..rng.gen_range(0..3) {
            let e = match rng.gen_range(0..10) {
                0..=2 => InjectedEvent::GpsFix {
                    valid: rng.gen_bool(0.8),
                    location: [Location::Home, Location::Office, Location::Other]
                        [rng.gen_range(0..3)],
                    speed: [0.0, 8.0, 50.0, 90.0][rng.gen_range(0..4)],
                    lat: 0.0,
                    lon: 0.0,
                },
                3..=6 => {
                    let name = PEERS[rng.gen_range(0..PEERS.len())].to_string();
                    if connected.remove(&name) {
                        InjectedEvent::BtDisconnect(name)
                    } else {
                        connected.insert(name.clone());
                        InjectedEvent::BtConnect(name)
                    }
                }
                7 => InjectedEvent::ClockSet([500, 545, 610][rng.gen_range(0..3)]),
                _ if devices.is_empty() => continue,
                8 => InjectedEvent::Fail(devices[rng.gen_range(0..devices.len())]),
                _ => InjectedEvent::Restore(devices[rng.gen_range(0..devices.len())]),
            };
            events.push((tick, e));
        }
    }
    Scenario::new("random", ticks, events).unwrap()
}

fn criterion_6() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    for i in 0..100 {
        let s = random_scenario(&mut rng, &Device::ALL);
        let plain = run(&s, RunOptions::default());
        let recreated = run(
            &s,
            RunOptions {
                recreate_between_ticks: true,
                ..RunOptions::default()
            },
        );
        assert!(plain.fault.is_none(), "scenario {i}: {:?}", plain.fault);
        assert_eq!(
            format_trace(plain.trace()),
            format_trace(recreated.trace()),
            "scenario {i}"
        );
    }
}

type Log = Vec<(String, u64)>;

fn recorder(id: &'static str) -> BoxedHandler<Log, u64> {
    Box::new(
        move |m: &Message<u64>, log: &mut Log, _: &mut Outbox<Log, u64>| {
            log.push((id.to_string(), m.payload));
            Ok(())
        },
    )
}

fn cm(id: &str) -> Descriptor {
    Descriptor::new(
        id,
        Role::ContextManager,
        &[Topic::NewContext],
        &["/generateContext"],
    )
}

/// Every arrangement of `publishes` publishes and `steps` single steps, as bitmasks.
fn schedules(publishes: u32, steps: u32) -> impl Iterator<Item = Vec<bool>> {
    let n = publishes + steps;
    (0u32..1 << n)
        .filter(move |m| m.count_ones() == publishes)
        .map(move |m| (0..n).map(|i| m & (1 << i) != 0).collect())
}

fn criterion_7() {
    let publishes = 3u32;
    let mut runs = 0;
    for schedule in schedules(publishes, 4) {
        for swap_at in 0..=schedule.len() {
            let mut bus: Bus<Log, u64> = Bus::new();
            bus.register(
                Descriptor::new("Knowledge", Role::Knowledge, &[], &["/NewSensorContext"]),
                recorder("Knowledge"),
            )
            .unwrap();
            bus.register(cm("Old"), recorder("Old")).unwrap();
            let mut log = Log::new();
            let mut next_payload = 0;
            for (i, &is_publish) in schedule.iter().enumerate() {
                if i == swap_at {
                    bus.swap("Old", cm("New"), recorder("New")).unwrap();
                }
                if is_publish {
                    bus.publish(Topic::NewContext, next_payload, "Knowledge")
                        .unwrap();
                    next_payload += 1;
                } else {
                    bus.step(&mut log).unwrap();
                }
            }
            if swap_at == schedule.len() {
                bus.swap("Old", cm("New"), recorder("New")).unwrap();
            }
            bus.dispatch(&mut log).unwrap();
            let mut delivered: Vec<u64> = log.iter().map(|(_, p)| *p).collect();
            delivered.sort_unstable();
            assert_eq!(
                delivered,
                (0..u64::from(publishes)).collect::<Vec<_>>(),
                "{schedule:?} swap@{swap_at}"
            );
            assert!(bus.exclusive_roles_hold());
            assert!(bus.is_registered("New") && !bus.is_registered("Old"));
            runs += 1;
        }
    }
    assert_eq!(runs, 35 * 8);
}

/// Independent encoding of the General-state guards.
fn general_enabled(s: &SensorSnapshot) -> Vec<char> {
    let bt = |d: &str| s.bluetooth.contains(d);
    let at = |l| s.gps.valid && s.gps.location == l;
    let mut out = Vec::new();
    if s.gps.valid && s.gps.location != Location::Home && s.gps.location != Location::Office {
        out.push('a');
    }
    if bt("car_handsfree") {
        out.push('e');
    }
    if bt("home_pc") || at(Location::Home) {
        out.push('i');
    }
    if bt("office_pc") || at(Location::Office) {
        out.push('k');
    }
    if bt("home_pc") || bt("office_pc") {
        out.push('o');
    }
    out
}

fn criterion_8() {
    let report = check_conflicts("AllSensors");
    assert_eq!(report.code, EXIT_CONFLICTS);
    assert!(report.stdout.contains("state=General rules=i,o "));
    assert!(report.stdout.contains("state=General rules=k,o "));

    let mut brute: BTreeSet<String> = BTreeSet::new();
    for s in snapshot_grid() {
        let enabled = general_enabled(&s);
        if enabled.len() >= 2 {
            let ids: Vec<String> = enabled.iter().map(char::to_string).collect();
            brute.insert(ids.join(","));
        }
    }
    let reported: BTreeSet<String> = report
        .stdout
        .lines()
        .filter_map(|l| l.strip_prefix("state=General rules="))
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(reported, brute);

    let m = all_sensors();
    let home = SensorSnapshot::quiet().with_bluetooth(["home_pc"]);
    let step = m.step(ContextState::General, &home);
    assert_eq!(
        (step.fired, step.new_state),
        (RuleId::new('i'), ContextState::Home)
    );
    let office = SensorSnapshot::quiet().with_bluetooth(["office_pc"]);
    let step = m.step(ContextState::General, &office);
    assert_eq!(
        (step.fired, step.new_state),
        (RuleId::new('k'), ContextState::Office)
    );
    assert_eq!(step.conflicts, vec![RuleId::new('o').unwrap()]);
}

fn criterion_9() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    for i in 0..100 {
        let base = random_scenario(
            &mut rng,
            &[Device::Gps, Device::Bluetooth, Device::Vibration],
        );
        let mut events = vec![(0, InjectedEvent::Fail(Device::Ringtone))];
        events.extend(
            base.events()
                .iter()
                .filter(|(_, e)| !matches!(e, InjectedEvent::Fail(Device::Vibration)))
                .cloned(),
        );
        let s = Scenario::new("ringtone", base.ticks, events).unwrap();
        let out = run(&s, RunOptions::default());
        assert!(out.fault.is_none(), "scenario {i}");
        assert_eq!(
            out.runtime.config().active_am,
            AMVariant::NoRingtone,
            "scenario {i}"
        );
        let sim = out.runtime.sim();
        let mut replay = EffectorState::default();
        for call in sim.effector_calls() {
            match *call {
                EffectorCall::SetVolume { .. } => {
                    panic!("scenario {i}: volume written with ringtone failed")
                }
                EffectorCall::SetVibration { vibration, ok } => {
                    assert!(ok);
                    replay.vibration = vibration;
                }
            }
        }
        assert_eq!(replay, sim.effectors());
        assert_eq!(sim.effectors().volume, 50);
    }
}

fn criterion_10() {
    let mut rt = Runtime::new();
    rt.tick(0, &[InjectedEvent::Fail(Device::Gps)]).unwrap();
    let health = rt.knowledge().health().unwrap();
    for _ in 0..2 {
        rt.inject(
            Topic::SensorsFailure,
            Signal::Health(health),
            "FailureManager",
        )
        .unwrap();
    }
    let reconfigs = rt
        .trace()
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::Reconfig { .. }))
        .count();
    assert_eq!(reconfigs, 1);
    assert_eq!(rt.config().active_cm, CMVariant::NoGPS);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    for i in 0..100 {
        let s = random_scenario(&mut rng, &Device::ALL);
        let settle = s.last_event_tick().unwrap_or(0);
        let mut rt = Runtime::new();
        let mut settled = None;
        for tick in 0..s.ticks + 5 {
            rt.tick(tick, s.events_at(tick)).unwrap();
            let version = rt
                .knowledge()
                .get(keys::ENSEMBLE_CONFIG)
                .unwrap()
                .unwrap()
                .version;
            if tick == settle {
                settled = Some((version, rt.config()));
            } else if let Some((v, config)) = settled {
                assert_eq!(version, v, "scenario {i} tick {tick}");
                assert_eq!(rt.config(), config);
            }
        }
    }
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("driving golden trace", criterion_1),
        ("meeting golden trace", criterion_2),
        ("GPS failure reconfiguration", criterion_3),
        ("degraded variant derivation", criterion_4),
        ("configuration space totality", criterion_5),
        ("statelessness under recreation", criterion_6),
        ("swap atomicity", criterion_7),
        ("conflict oracle", criterion_8),
        ("failed effector masking", criterion_9),
        ("idempotence and convergence", criterion_10),
    ];
    panic::set_hook(Box::new(|info| eprintln!("  {info}")));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let ok = panic::catch_unwind(AssertUnwindSafe(check)).is_ok();
        println!(
            "criterion {:>2} {name}: {}",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
