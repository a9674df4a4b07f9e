//! The full contextual rule table (all sensors available).

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{AfsmDef, Atom, ContextState, Output, Predicate, Rule, RuleId, TimeRef};
use crate::phone_sim::{Location, Vibration, CAR_HANDSFREE, HOME_PC, OFFICE_PC};

use ContextState::*;

fn rule(
    id: char,
    name: &str,
    from: &[ContextState],
    to: ContextState,
    predicate: Predicate,
    volume: u8,
    vibration: Vibration,
) -> Rule {
    Rule {
        id: RuleId::new(id).expect("table ids are lowercase letters"),
        name: name.to_string(),
        from: from.iter().copied().collect::<BTreeSet<_>>(),
        to,
        predicate,
        output: Output { volume, vibration },
    }
}

fn gps_valid() -> Predicate {
    Predicate::atom(Atom::GpsIsValid)
}

fn at(loc: Location) -> Predicate {
    Predicate::atom(Atom::GpsLocationIs(loc))
}

fn bt(device: &str) -> Predicate {
    Predicate::atom(Atom::BtConnected(device.to_string()))
}

pub(super) fn all_sensors_rules() -> Vec<Rule> {
    use Vibration::{Off, On};
    vec![
        rule(
            'a',
            "ActivateOutdoor",
            &[General],
            Outdoor,
            Predicate::and([
                gps_valid(),
                Predicate::not(at(Location::Home)),
                Predicate::not(at(Location::Office)),
            ]),
            100,
            Off,
        ),
        rule(
            'b',
            "DesactivateOutdoor",
            &[Outdoor],
            General,
            Predicate::negate_rule("ActivateOutdoor"),
            50,
            Off,
        ),
        rule(
            'c',
            "ActivateJogging",
            &[Outdoor],
            Jogging,
            Predicate::and([gps_valid(), Predicate::atom(Atom::GpsSpeedGt(5))]),
            25,
            Off,
        ),
        rule(
            'd',
            "DesactivateJogging",
            &[Jogging],
            Outdoor,
            Predicate::negate_rule("ActivateJogging"),
            100,
            Off,
        ),
        rule(
            'e',
            "ActivateDriving",
            &[General, Home, Office, Outdoor],
            Driving,
            bt(CAR_HANDSFREE),
            75,
            Off,
        ),
        rule(
            'f',
            "DesactivateDriving",
            &[Driving],
            General,
            Predicate::negate_rule("ActivateDriving"),
            50,
            Off,
        ),
        rule(
            'g',
            "ActivateDrivingFast",
            &[Driving],
            DrivingFast,
            Predicate::and([gps_valid(), Predicate::atom(Atom::GpsSpeedGt(70))]),
            0,
            Off,
        ),
        rule(
            'h',
            "DesactivateDrivingFast",
            &[DrivingFast],
            Driving,
            Predicate::negate_rule("ActivateDrivingFast"),
            75,
            Off,
        ),
        rule(
            'i',
            "ActivateHome",
            &[General],
            Home,
            Predicate::or([
                bt(HOME_PC),
                Predicate::and([gps_valid(), at(Location::Home)]),
            ]),
            100,
            Off,
        ),
        rule(
            'j',
            "DesactivateHome",
            &[Home],
            General,
            Predicate::negate_rule("ActivateHome"),
            50,
            Off,
        ),
        rule(
            'k',
            "ActivateOffice",
            &[General],
            Office,
            Predicate::or([
                bt(OFFICE_PC),
                Predicate::and([gps_valid(), at(Location::Office)]),
            ]),
            0,
            On,
        ),
        rule(
            'l',
            "DesactivateOffice",
            &[Office],
            General,
            Predicate::negate_rule("ActivateOffice"),
            50,
            Off,
        ),
        rule(
            'm',
            "ActivateMeeting",
            &[Office],
            Meeting,
            Predicate::and([
                Predicate::atom(Atom::TimeGte(TimeRef::MeetingStart)),
                Predicate::atom(Atom::BtCountGte(3)),
            ]),
            0,
            Off,
        ),
        rule(
            'n',
            "DesactivateMeeting",
            &[Meeting],
            Office,
            Predicate::atom(Atom::TimeGte(TimeRef::MeetingEnd)),
            0,
            On,
        ),
        rule(
            'o',
            "ActivateSync",
            &[General],
            Sync,
            Predicate::or([bt(HOME_PC), bt(OFFICE_PC)]),
            100,
            Off,
        ),
        rule(
            'p',
            "DesactivateSync",
            &[Sync],
            General,
            Predicate::negate_rule("ActivateSync"),
            50,
            Off,
        ),
    ]
}

/// The nine-state machine used while every sensor works.
pub fn all_sensors() -> AfsmDef {
    AfsmDef::new(super::variant_name(true, true), all_sensors_rules())
        .expect("embedded rule table is well-formed")
}
