//! Adaptation finite-state machines: contextual states, guarded rules with
//! effector outputs, deterministic stepping, reachability and conflict search.

mod conflicts;
mod predicate;
mod tables;
mod variant;

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use conflicts::{
    detect_conflicts, snapshot_grid, Conflict, GRID_MEETING_END, GRID_MEETING_START,
};
pub use predicate::{eval_predicate, Atom, Predicate, TimeRef};
pub use tables::all_sensors;
pub use variant::{build_variant, variant_name};

use crate::phone_sim::{SensorSnapshot, Vibration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextState {
    General,
    Outdoor,
    Jogging,
    Driving,
    DrivingFast,
    Home,
    Office,
    Meeting,
    Sync,
}

impl ContextState {
    pub const ALL: [ContextState; 9] = [
        ContextState::General,
        ContextState::Outdoor,
        ContextState::Jogging,
        ContextState::Driving,
        ContextState::DrivingFast,
        ContextState::Home,
        ContextState::Office,
        ContextState::Meeting,
        ContextState::Sync,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContextState::General => "General",
            ContextState::Outdoor => "Outdoor",
            ContextState::Jogging => "Jogging",
            ContextState::Driving => "Driving",
            ContextState::DrivingFast => "DrivingFast",
            ContextState::Home => "Home",
            ContextState::Office => "Office",
            ContextState::Meeting => "Meeting",
            ContextState::Sync => "Sync",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }
}

impl fmt::Display for ContextState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Single-letter rule identifier (`a`, `b`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(char);

impl RuleId {
    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_lowercase().then_some(RuleId(c))
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Effector settings attached to a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Output {
    pub volume: u8,
    pub vibration: Vibration,
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.volume, self.vibration)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub name: String,
    pub from: BTreeSet<ContextState>,
    pub to: ContextState,
    pub predicate: Predicate,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AfsmError {
    DuplicateRuleId(RuleId),
    DuplicateRuleName(String),
    EmptyFromSet(RuleId),
    VolumeOutOfRange(RuleId, u8),
    UnresolvedRuleRef(String),
    CyclicRuleRef(String),
}

impl fmt::Display for AfsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AfsmError::DuplicateRuleId(id) => write!(f, "rule id `{id}` used twice"),
            AfsmError::DuplicateRuleName(n) => write!(f, "rule name `{n}` used twice"),
            AfsmError::EmptyFromSet(id) => write!(f, "rule `{id}` has no source state"),
            AfsmError::VolumeOutOfRange(id, v) => {
                write!(f, "rule `{id}` sets volume {v}, outside 0..=100")
            }
            AfsmError::UnresolvedRuleRef(n) => write!(f, "reference to unknown rule `{n}`"),
            AfsmError::CyclicRuleRef(n) => write!(f, "rule `{n}` negates itself through a cycle"),
        }
    }
}

/// A validated machine. Rule guards are kept in source form and a resolved
/// copy (rule references inlined) is used for evaluation.
#[derive(Debug, Clone)]
pub struct AfsmDef {
    name: String,
    initial: ContextState,
    rules: Vec<Rule>,
    resolved: Vec<Predicate>,
}

impl PartialEq for AfsmDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.initial == other.initial && self.rules == other.rules
    }
}

impl Eq for AfsmDef {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub new_state: ContextState,
    pub fired: Option<RuleId>,
    pub output: Option<Output>,
    /// Enabled rules that lost to `fired` on table order.
    pub conflicts: Vec<RuleId>,
}

impl AfsmDef {
    /// Builds a machine starting in `General`.
    pub fn new(name: impl Into<String>, rules: Vec<Rule>) -> Result<Self, AfsmError> {
        let mut ids = BTreeSet::new();
        let mut by_name = BTreeMap::new();
        for (idx, rule) in rules.iter().enumerate() {
            if !ids.insert(rule.id) {
                return Err(AfsmError::DuplicateRuleId(rule.id));
            }
            if by_name.insert(rule.name.as_str(), idx).is_some() {
                return Err(AfsmError::DuplicateRuleName(rule.name.clone()));
            }
            if rule.from.is_empty() {
                return Err(AfsmError::EmptyFromSet(rule.id));
            }
            if rule.output.volume > 100 {
                return Err(AfsmError::VolumeOutOfRange(rule.id, rule.output.volume));
            }
        }
        let mut resolved = Vec::with_capacity(rules.len());
        for rule in &rules {
            let mut stack = Vec::new();
            resolved.push(inline(
                &rule.predicate,
                &rules,
                &by_name,
                &mut stack,
                &rule.name,
            )?);
        }
        Ok(AfsmDef {
            name: name.into(),
            initial: ContextState::General,
            rules,
            resolved,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn initial(&self) -> ContextState {
        self.initial
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = RuleId> + '_ {
        self.rules.iter().map(|r| r.id)
    }

    /// The guard of rule `idx` with every rule reference inlined.
    pub fn resolved_predicate(&self, idx: usize) -> &Predicate {
        &self.resolved[idx]
    }

    pub fn eval_rule(&self, idx: usize, s: &SensorSnapshot) -> bool {
        predicate::eval_resolved(&self.resolved[idx], s)
    }

    /// Every rule leaving `state` whose guard holds, in table order.
    pub fn enabled_rules(&self, state: ContextState, s: &SensorSnapshot) -> Vec<&Rule> {
        self.rules
            .iter()
            .enumerate()
            .filter(|(idx, r)| r.from.contains(&state) && self.eval_rule(*idx, s))
            .map(|(_, r)| r)
            .collect()
    }

    /// Fires at most one rule: the first enabled one in table order.
    pub fn step(&self, state: ContextState, s: &SensorSnapshot) -> StepResult {
        let enabled = self.enabled_rules(state, s);
        match enabled.split_first() {
            None => StepResult {
                new_state: state,
                fired: None,
                output: None,
                conflicts: Vec::new(),
            },
            Some((first, rest)) => StepResult {
                new_state: first.to,
                fired: Some(first.id),
                output: Some(first.output),
                conflicts: rest.iter().map(|r| r.id).collect(),
            },
        }
    }

    /// States reachable from the initial state when every rule is treated as
    /// an unconditional edge.
    pub fn reachable_states(&self) -> BTreeSet<ContextState> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(state) = queue.pop_front() {
            for rule in self.rules.iter().filter(|r| r.from.contains(&state)) {
                if seen.insert(rule.to) {
                    queue.push_back(rule.to);
                }
            }
        }
        seen
    }
}

fn inline(
    p: &Predicate,
    rules: &[Rule],
    by_name: &BTreeMap<&str, usize>,
    stack: &mut Vec<String>,
    owner: &str,
) -> Result<Predicate, AfsmError> {
    Ok(match p {
        Predicate::Atom(a) => Predicate::Atom(a.clone()),
        Predicate::Not(inner) => Predicate::not(inline(inner, rules, by_name, stack, owner)?),
        Predicate::And(ps) => Predicate::And(
            ps.iter()
                .map(|p| inline(p, rules, by_name, stack, owner))
                .collect::<Result<_, _>>()?,
        ),
        Predicate::Or(ps) => Predicate::Or(
            ps.iter()
                .map(|p| inline(p, rules, by_name, stack, owner))
                .collect::<Result<_, _>>()?,
        ),
        Predicate::RuleNegation(name) => {
            let idx = *by_name
                .get(name.as_str())
                .ok_or_else(|| AfsmError::UnresolvedRuleRef(name.clone()))?;
            if name == owner || stack.iter().any(|n| n == name) {
                return Err(AfsmError::CyclicRuleRef(name.clone()));
            }
            stack.push(name.clone());
            let target = inline(&rules[idx].predicate, rules, by_name, stack, owner)?;
            stack.pop();
            Predicate::not(target)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phone_sim::{Location, SensorSnapshot, CAR_HANDSFREE, HOME_PC, OFFICE_PC};
    use alloc::string::ToString;
    use alloc::vec;

    fn rid(c: char) -> RuleId {
        RuleId::new(c).unwrap()
    }

    fn ids(rules: &[&Rule]) -> Vec<char> {
        rules.iter().map(|r| r.id.as_char()).collect()
    }

    fn rule_pred(m: &AfsmDef, c: char) -> &Predicate {
        let idx = m.rules().iter().position(|r| r.id == rid(c)).unwrap();
        m.resolved_predicate(idx)
    }

    #[test]
    fn outdoor_guard_holds_away_from_home_and_office() {
        let m = all_sensors();
        let s = SensorSnapshot::quiet().with_gps(true, Location::Other, 0.0);
        assert_eq!(eval_predicate(rule_pred(&m, 'a'), &s), Ok(true));
    }

    #[test]
    fn driving_fast_threshold_is_strict() {
        let m = all_sensors();
        let at = SensorSnapshot::quiet().with_gps(true, Location::Other, 70.0);
        let above = SensorSnapshot::quiet().with_gps(true, Location::Other, 70.5);
        assert_eq!(eval_predicate(rule_pred(&m, 'g'), &at), Ok(false));
        assert_eq!(eval_predicate(rule_pred(&m, 'g'), &above), Ok(true));
    }

    #[test]
    fn not_inverts() {
        let x = Predicate::atom(Atom::BtConnected(HOME_PC.to_string()));
        let s = SensorSnapshot::quiet().with_bluetooth([HOME_PC]);
        assert_eq!(eval_predicate(&x, &s), Ok(true));
        assert_eq!(eval_predicate(&Predicate::not(x), &s), Ok(false));
    }

    #[test]
    fn raw_rule_reference_is_rejected_by_eval() {
        let p = Predicate::negate_rule("ActivateOutdoor");
        assert_eq!(
            eval_predicate(&p, &SensorSnapshot::quiet()),
            Err(AfsmError::UnresolvedRuleRef("ActivateOutdoor".into()))
        );
    }

    #[test]
    fn enabled_rules_examples() {
        let m = all_sensors();
        let home = SensorSnapshot::quiet().with_bluetooth([HOME_PC]);
        assert_eq!(
            ids(&m.enabled_rules(ContextState::General, &home)),
            vec!['i', 'o']
        );
        assert!(m
            .enabled_rules(ContextState::General, &SensorSnapshot::quiet())
            .is_empty());
        let slow = SensorSnapshot::quiet().with_gps(true, Location::Other, 3.0);
        assert_eq!(
            ids(&m.enabled_rules(ContextState::Jogging, &slow)),
            vec!['d']
        );
    }

    #[test]
    fn step_examples() {
        let m = all_sensors();
        let car = SensorSnapshot::quiet().with_bluetooth([CAR_HANDSFREE]);
        let r = m.step(ContextState::General, &car);
        assert_eq!(r.new_state, ContextState::Driving);
        assert_eq!(r.fired, Some(rid('e')));
        assert_eq!(
            r.output,
            Some(Output {
                volume: 75,
                vibration: Vibration::Off
            })
        );
        assert!(r.conflicts.is_empty());

        let quiet = m.step(ContextState::General, &SensorSnapshot::quiet());
        assert_eq!(quiet.new_state, ContextState::General);
        assert_eq!((quiet.fired, quiet.output), (None, None));

        let home = m.step(
            ContextState::General,
            &SensorSnapshot::quiet().with_bluetooth([HOME_PC]),
        );
        assert_eq!(home.new_state, ContextState::Home);
        assert_eq!(home.fired, Some(rid('i')));
        assert_eq!(home.conflicts, vec![rid('o')]);

        let office = m.step(
            ContextState::General,
            &SensorSnapshot::quiet().with_bluetooth([OFFICE_PC]),
        );
        assert_eq!(office.fired, Some(rid('k')));
        assert_eq!(office.conflicts, vec![rid('o')]);
    }

    #[test]
    fn reachability() {
        assert_eq!(all_sensors().reachable_states().len(), 9);
        use ContextState::*;
        assert_eq!(
            build_variant(false, true).reachable_states(),
            BTreeSet::from([General, Home, Office, Meeting, Driving, Sync])
        );
        let empty = AfsmDef::new("Empty", vec![]).unwrap();
        assert_eq!(empty.reachable_states(), BTreeSet::from([General]));
    }

    fn simple_rule(id: char, name: &str, predicate: Predicate) -> Rule {
        Rule {
            id: rid(id),
            name: name.into(),
            from: BTreeSet::from([ContextState::General]),
            to: ContextState::Home,
            predicate,
            output: Output {
                volume: 10,
                vibration: Vibration::Off,
            },
        }
    }

    #[test]
    fn construction_errors() {
        let atom = || Predicate::atom(Atom::GpsIsValid);
        assert_eq!(
            AfsmDef::new(
                "x",
                vec![simple_rule('a', "A", atom()), simple_rule('a', "B", atom())]
            ),
            Err(AfsmError::DuplicateRuleId(rid('a')))
        );
        assert_eq!(
            AfsmDef::new(
                "x",
                vec![simple_rule('a', "A", atom()), simple_rule('b', "A", atom())]
            ),
            Err(AfsmError::DuplicateRuleName("A".into()))
        );
        assert_eq!(
            AfsmDef::new(
                "x",
                vec![simple_rule('a', "A", Predicate::negate_rule("Z"))]
            ),
            Err(AfsmError::UnresolvedRuleRef("Z".into()))
        );
        assert_eq!(
            AfsmDef::new(
                "x",
                vec![
                    simple_rule('a', "A", Predicate::negate_rule("B")),
                    simple_rule('b', "B", Predicate::negate_rule("A")),
                ]
            ),
            Err(AfsmError::CyclicRuleRef("A".into()))
        );
        let mut loud = simple_rule('a', "A", atom());
        loud.output.volume = 120;
        assert_eq!(
            AfsmDef::new("x", vec![loud]),
            Err(AfsmError::VolumeOutOfRange(rid('a'), 120))
        );
    }

    #[test]
    fn rule_negation_inlines_to_not() {
        let m = all_sensors();
        assert_eq!(
            rule_pred(&m, 'b'),
            &Predicate::not(rule_pred(&m, 'a').clone())
        );
    }

    #[test]
    fn display_uses_table_syntax() {
        let m = all_sensors();
        let text: Vec<_> = m.rules().iter().map(|r| r.predicate.to_string()).collect();
        assert_eq!(
            text[0],
            "GPS.isValid() && !GPS.location()=home && !GPS.location()=office"
        );
        assert_eq!(text[1], "!ActivateOutdoor");
        assert_eq!(
            text[8],
            "BT=home_pc || (GPS.isValid() && GPS.location()=home)"
        );
        assert_eq!(text[12], "Time>=meeting_start && BT.count()>=3");
    }
}
