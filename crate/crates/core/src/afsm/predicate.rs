use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::phone_sim::{Location, Sensor, SensorSnapshot};

/// Which calendar boundary a time comparison reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeRef {
    MeetingStart,
    MeetingEnd,
}

impl TimeRef {
    pub fn name(self) -> &'static str {
        match self {
            TimeRef::MeetingStart => "meeting_start",
            TimeRef::MeetingEnd => "meeting_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    GpsIsValid,
    GpsLocationIs(Location),
    /// Strict: speed > threshold (km/h).
    GpsSpeedGt(u32),
    BtConnected(String),
    /// Inclusive: device count >= n.
    BtCountGte(u32),
    /// Inclusive: time >= boundary.
    TimeGte(TimeRef),
}

impl Atom {
    pub fn sensor(&self) -> Sensor {
        match self {
            Atom::GpsIsValid | Atom::GpsLocationIs(_) | Atom::GpsSpeedGt(_) => Sensor::Gps,
            Atom::BtConnected(_) | Atom::BtCountGte(_) => Sensor::Bluetooth,
            Atom::TimeGte(_) => Sensor::Calendar,
        }
    }

    pub fn eval(&self, s: &SensorSnapshot) -> bool {
        match self {
            Atom::GpsIsValid => s.gps.valid,
            Atom::GpsLocationIs(loc) => s.gps.location == *loc,
            Atom::GpsSpeedGt(threshold) => s.gps.speed > f64::from(*threshold),
            Atom::BtConnected(device) => s.bluetooth.contains(device),
            Atom::BtCountGte(n) => s.bt_count() >= *n as usize,
            Atom::TimeGte(TimeRef::MeetingStart) => s.time >= s.meeting_start,
            Atom::TimeGte(TimeRef::MeetingEnd) => s.time >= s.meeting_end,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::GpsIsValid => f.write_str("GPS.isValid()"),
            Atom::GpsLocationIs(loc) => write!(f, "GPS.location()={loc}"),
            Atom::GpsSpeedGt(v) => write!(f, "GPS.speed()>{v}"),
            Atom::BtConnected(d) => write!(f, "BT={d}"),
            Atom::BtCountGte(n) => write!(f, "BT.count()>={n}"),
            Atom::TimeGte(r) => write!(f, "Time>={}", r.name()),
        }
    }
}

/// Guard of a contextual rule.
///
/// `RuleNegation` names another rule of the same machine and stands for the
/// negation of that rule's guard. It is kept in the source form so rule tables
/// compare structurally; [`super::AfsmDef`] inlines it when the machine is built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    Atom(Atom),
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    RuleNegation(String),
}

impl Predicate {
    pub fn atom(a: Atom) -> Self {
        Predicate::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Predicate) -> Self {
        Predicate::Not(Box::new(p))
    }

    pub fn and(parts: impl IntoIterator<Item = Predicate>) -> Self {
        Predicate::And(parts.into_iter().collect())
    }

    pub fn or(parts: impl IntoIterator<Item = Predicate>) -> Self {
        Predicate::Or(parts.into_iter().collect())
    }

    pub fn negate_rule(name: impl Into<String>) -> Self {
        Predicate::RuleNegation(name.into())
    }

    /// Visits every atom, without descending into referenced rules.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Predicate::Atom(a) => f(a),
            Predicate::Not(p) => p.for_each_atom(f),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.for_each_atom(f)),
            Predicate::RuleNegation(_) => {}
        }
    }

    pub fn for_each_rule_ref(&self, f: &mut impl FnMut(&str)) {
        match self {
            Predicate::Atom(_) => {}
            Predicate::Not(p) => p.for_each_rule_ref(f),
            Predicate::And(ps) | Predicate::Or(ps) => {
                ps.iter().for_each(|p| p.for_each_rule_ref(f))
            }
            Predicate::RuleNegation(name) => f(name),
        }
    }

    pub fn mentions_sensor(&self, sensor: Sensor) -> bool {
        let mut found = false;
        self.for_each_atom(&mut |a| found |= a.sensor() == sensor);
        found
    }

    pub fn has_rule_refs(&self) -> bool {
        let mut found = false;
        self.for_each_rule_ref(&mut |_| found = true);
        found
    }
}

/// Evaluates a guard with every rule reference already inlined.
///
/// Returns `UnresolvedRuleRef` if `p` still contains a `RuleNegation`; use
/// [`super::AfsmDef::eval_rule`] to evaluate guards in their source form.
pub fn eval_predicate(p: &Predicate, s: &SensorSnapshot) -> Result<bool, super::AfsmError> {
    if let Some(name) = first_rule_ref(p) {
        return Err(super::AfsmError::UnresolvedRuleRef(name));
    }
    Ok(eval_resolved(p, s))
}

fn first_rule_ref(p: &Predicate) -> Option<String> {
    let mut found = None;
    p.for_each_rule_ref(&mut |n| {
        if found.is_none() {
            found = Some(String::from(n));
        }
    });
    found
}

pub(crate) fn eval_resolved(p: &Predicate, s: &SensorSnapshot) -> bool {
    match p {
        Predicate::Atom(a) => a.eval(s),
        Predicate::Not(inner) => !eval_resolved(inner, s),
        Predicate::And(ps) => ps.iter().all(|p| eval_resolved(p, s)),
        Predicate::Or(ps) => ps.iter().any(|p| eval_resolved(p, s)),
        Predicate::RuleNegation(name) => unreachable!("rule reference `{name}` survived inlining"),
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Atom(a) => write!(f, "{a}"),
            Predicate::RuleNegation(name) => write!(f, "!{name}"),
            Predicate::Not(p) if is_connective(p) => write!(f, "!({p})"),
            Predicate::Not(p) => write!(f, "!{p}"),
            Predicate::And(ps) => write_joined(f, ps, " && "),
            Predicate::Or(ps) => write_joined(f, ps, " || "),
        }
    }
}

fn write_joined(f: &mut fmt::Formatter<'_>, parts: &[Predicate], sep: &str) -> fmt::Result {
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        if is_connective(p) {
            write!(f, "({p})")?;
        } else {
            write!(f, "{p}")?;
        }
    }
    Ok(())
}

fn is_connective(p: &Predicate) -> bool {
    matches!(p, Predicate::And(_) | Predicate::Or(_))
}
