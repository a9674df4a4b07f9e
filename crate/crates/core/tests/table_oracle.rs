//! The full rule table checked against a second, hand-written encoding of the
//! same rules as plain closures.

use std::collections::BTreeSet;

use microctl_core::afsm::{all_sensors, detect_conflicts, snapshot_grid, ContextState, RuleId};
use microctl_core::phone_sim::{Location, SensorSnapshot};
use proptest::prelude::*;

use ContextState::*;

type Guard = fn(&SensorSnapshot) -> bool;

fn bt(s: &SensorSnapshot, d: &str) -> bool {
    s.bluetooth.contains(d)
}

fn outdoor(s: &SensorSnapshot) -> bool {
    s.gps.valid && s.gps.location != Location::Home && s.gps.location != Location::Office
}
fn jogging(s: &SensorSnapshot) -> bool {
    s.gps.valid && s.gps.speed > 5.0
}
fn driving(s: &SensorSnapshot) -> bool {
    bt(s, "car_handsfree")
}
fn driving_fast(s: &SensorSnapshot) -> bool {
    s.gps.valid && s.gps.speed > 70.0
}
fn home(s: &SensorSnapshot) -> bool {
    bt(s, "home_pc") || (s.gps.valid && s.gps.location == Location::Home)
}
fn office(s: &SensorSnapshot) -> bool {
    bt(s, "office_pc") || (s.gps.valid && s.gps.location == Location::Office)
}
fn meeting(s: &SensorSnapshot) -> bool {
    s.time >= s.meeting_start && s.bluetooth.len() >= 3
}
fn meeting_over(s: &SensorSnapshot) -> bool {
    s.time >= s.meeting_end
}
fn sync(s: &SensorSnapshot) -> bool {
    bt(s, "home_pc") || bt(s, "office_pc")
}

fn oracle() -> Vec<(char, &'static [ContextState], ContextState, Guard, u8)> {
    vec![
        ('a', &[General], Outdoor, outdoor, 100),
        ('b', &[Outdoor], General, |s| !outdoor(s), 50),
        ('c', &[Outdoor], Jogging, jogging, 25),
        ('d', &[Jogging], Outdoor, |s| !jogging(s), 100),
        ('e', &[General, Home, Office, Outdoor], Driving, driving, 75),
        ('f', &[Driving], General, |s| !driving(s), 50),
        ('g', &[Driving], DrivingFast, driving_fast, 0),
        ('h', &[DrivingFast], Driving, |s| !driving_fast(s), 75),
        ('i', &[General], Home, home, 100),
        ('j', &[Home], General, |s| !home(s), 50),
        ('k', &[General], Office, office, 0),
        ('l', &[Office], General, |s| !office(s), 50),
        ('m', &[Office], Meeting, meeting, 0),
        ('n', &[Meeting], Office, meeting_over, 0),
        ('o', &[General], Sync, sync, 100),
        ('p', &[Sync], General, |s| !sync(s), 50),
    ]
}

fn oracle_enabled(state: ContextState, s: &SensorSnapshot) -> Vec<char> {
    oracle()
        .into_iter()
        .filter(|(_, from, _, guard, _)| from.contains(&state) && guard(s))
        .map(|(id, ..)| id)
        .collect()
}

fn machine_enabled(state: ContextState, s: &SensorSnapshot) -> Vec<char> {
    all_sensors()
        .enabled_rules(state, s)
        .iter()
        .map(|r| r.id.as_char())
        .collect()
}

#[test]
fn oracle_matches_machine_metadata() {
    let m = all_sensors();
    assert_eq!(m.rules().len(), 16);
    for ((id, from, to, _, volume), rule) in oracle().into_iter().zip(m.rules()) {
        assert_eq!(rule.id.as_char(), id);
        assert_eq!(rule.from, from.iter().copied().collect::<BTreeSet<_>>());
        assert_eq!(rule.to, to);
        assert_eq!(rule.output.volume, volume);
    }
}

#[test]
fn enabled_rules_match_oracle_on_grid() {
    for s in snapshot_grid() {
        for state in ContextState::ALL {
            assert_eq!(
                machine_enabled(state, &s),
                oracle_enabled(state, &s),
                "{state:?} {s:?}"
            );
        }
    }
}

#[test]
fn step_fires_first_enabled_rule_in_table_order() {
    let m = all_sensors();
    for s in snapshot_grid() {
        for state in ContextState::ALL {
            let enabled = oracle_enabled(state, &s);
            let step = m.step(state, &s);
            match enabled.split_first() {
                None => {
                    assert_eq!(step.fired, None);
                    assert_eq!(step.new_state, state);
                }
                Some((&first, rest)) => {
                    assert_eq!(step.fired, RuleId::new(first));
                    assert_eq!(
                        step.new_state,
                        m.rule(RuleId::new(first).unwrap()).unwrap().to
                    );
                    let others: Vec<char> = step.conflicts.iter().map(|r| r.as_char()).collect();
                    assert_eq!(others, rest);
                }
            }
        }
    }
}

#[test]
fn conflicts_match_brute_force_enumeration() {
    let mut expected = BTreeSet::new();
    for s in snapshot_grid() {
        for state in ContextState::ALL {
            let enabled = oracle_enabled(state, &s);
            if enabled.len() >= 2 {
                expected.insert((state, enabled));
            }
        }
    }
    let found = detect_conflicts(&all_sensors());
    let found_set: BTreeSet<_> = found
        .iter()
        .map(|c| {
            (
                c.state,
                c.rules.iter().map(|r| r.as_char()).collect::<Vec<_>>(),
            )
        })
        .collect();
    assert_eq!(found.len(), found_set.len(), "duplicate conflict entries");
    assert_eq!(found_set, expected);
    for c in &found {
        let ids: Vec<char> = c.rules.iter().map(|r| r.as_char()).collect();
        assert_eq!(oracle_enabled(c.state, &c.witness), ids);
    }
    assert!(expected.contains(&(General, vec!['i', 'o'])));
    assert!(expected.contains(&(General, vec!['k', 'o'])));
}

fn snapshot() -> impl Strategy<Value = SensorSnapshot> {
    let location = prop_oneof![
        Just(Location::Home),
        Just(Location::Office),
        Just(Location::Other),
        Just(Location::Unknown)
    ];
    (
        any::<bool>(),
        location,
        0.0f64..150.0,
        proptest::collection::btree_set(
            prop_oneof![
                Just("car_handsfree".to_string()),
                Just("home_pc".to_string()),
                Just("office_pc".to_string()),
                "[a-z]{1,6}"
            ],
            0..6,
        ),
        0u16..1440,
        0u16..1440,
        0u16..1440,
    )
        .prop_map(|(valid, location, speed, bluetooth, time, start, end)| {
            let mut s = SensorSnapshot::quiet().with_gps(valid, location, speed);
            s.bluetooth = bluetooth;
            s.time = time;
            s.meeting_start = start;
            s.meeting_end = end;
            s
        })
}

proptest! {
    #[test]
    fn enabled_rules_match_oracle_on_random_snapshots(s in snapshot()) {
        for state in ContextState::ALL {
            prop_assert_eq!(machine_enabled(state, &s), oracle_enabled(state, &s));
        }
    }
}
