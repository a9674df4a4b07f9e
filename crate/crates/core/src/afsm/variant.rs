//! Derives reduced machines for failed sensors from the full rule table.
//!
//! A rule survives only if its guard can still fire without the failed
//! sensors. Disjuncts that read a failed sensor are removed; anything else
//! that reads one drops the whole rule. Negation references follow the rule
//! they point to. A rule whose guard lost a disjunct is renamed with a suffix
//! naming the sensors it still reads (`ActivateHome` -> `ActivateHomeBT`), and
//! rules negating it pick up the same suffix.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::{tables, AfsmDef, Predicate, Rule};
use crate::phone_sim::Sensor;

pub fn variant_name(gps_ok: bool, bt_ok: bool) -> &'static str {
    match (gps_ok, bt_ok) {
        (true, true) => "ContextManagerAllSensors",
        (false, true) => "ContextManagerNoGPS",
        (true, false) => "ContextManagerNoBluetooth",
        (false, false) => "ContextManagerNoGPSNoBluetooth",
    }
}

/// The machine a context manager uses given which sensors are available.
pub fn build_variant(gps_ok: bool, bt_ok: bool) -> AfsmDef {
    let full = tables::all_sensors_rules();
    let mut failed = BTreeSet::new();
    if !gps_ok {
        failed.insert(Sensor::Gps);
    }
    if !bt_ok {
        failed.insert(Sensor::Bluetooth);
    }
    let rules = prune_rules(&full, &failed);
    AfsmDef::new(variant_name(gps_ok, bt_ok), rules).expect("pruned table stays well-formed")
}

/// Applies the pruning procedure to an arbitrary, already validated rule list.
pub(crate) fn prune_rules(rules: &[Rule], failed: &BTreeSet<Sensor>) -> Vec<Rule> {
    let mut pruner = Pruner {
        rules,
        failed,
        index: rules
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.as_str(), i))
            .collect(),
        memo: BTreeMap::new(),
    };
    (0..rules.len())
        .filter_map(|idx| pruner.rule(idx).map(|kept| kept.rule))
        .collect()
}

#[derive(Clone)]
struct Kept {
    rule: Rule,
    sensors: BTreeSet<Sensor>,
}

struct Pruned {
    predicate: Predicate,
    /// A disjunct was removed, so the guard is weaker than the original.
    lossy: bool,
    /// The guard differs from the original in any way.
    changed: bool,
    sensors: BTreeSet<Sensor>,
}

struct Pruner<'a> {
    rules: &'a [Rule],
    failed: &'a BTreeSet<Sensor>,
    index: BTreeMap<&'a str, usize>,
    memo: BTreeMap<usize, Option<Kept>>,
}

impl Pruner<'_> {
    fn rule(&mut self, idx: usize) -> Option<Kept> {
        if let Some(done) = self.memo.get(&idx) {
            return done.clone();
        }
        let original = &self.rules[idx];
        let result = self.predicate(&original.predicate).map(|p| {
            let mut name = original.name.clone();
            if p.changed {
                name.push_str(&suffix(&p.sensors));
            }
            Kept {
                rule: Rule {
                    name,
                    predicate: p.predicate,
                    ..original.clone()
                },
                sensors: p.sensors,
            }
        });
        self.memo.insert(idx, result.clone());
        result
    }

    fn predicate(&mut self, p: &Predicate) -> Option<Pruned> {
        match p {
            Predicate::Atom(a) => {
                let sensor = a.sensor();
                (!self.failed.contains(&sensor)).then(|| Pruned {
                    predicate: p.clone(),
                    lossy: false,
                    changed: false,
                    sensors: BTreeSet::from([sensor]),
                })
            }
            Predicate::Not(inner) => {
                let inner = self.predicate(inner)?;
                // negating a weakened guard would strengthen the complement
                if inner.lossy {
                    return None;
                }
                Some(Pruned {
                    predicate: Predicate::not(inner.predicate),
                    ..inner
                })
            }
            Predicate::And(parts) => {
                let mut out = Vec::with_capacity(parts.len());
                let (mut lossy, mut changed, mut sensors) = (false, false, BTreeSet::new());
                for part in parts {
                    let p = self.predicate(part)?;
                    lossy |= p.lossy;
                    changed |= p.changed;
                    sensors.extend(p.sensors);
                    out.push(p.predicate);
                }
                Some(Pruned {
                    predicate: Predicate::And(out),
                    lossy,
                    changed,
                    sensors,
                })
            }
            Predicate::Or(parts) => {
                let mut out = Vec::with_capacity(parts.len());
                let (mut lossy, mut changed, mut sensors) = (false, false, BTreeSet::new());
                for part in parts {
                    match self.predicate(part) {
                        Some(p) => {
                            lossy |= p.lossy;
                            changed |= p.changed;
                            sensors.extend(p.sensors);
                            out.push(p.predicate);
                        }
                        None => {
                            lossy = true;
                            changed = true;
                        }
                    }
                }
                let predicate = match out.len() {
                    0 => return None,
                    1 if parts.len() > 1 => out.pop().expect("one survivor"),
                    _ => Predicate::Or(out),
                };
                Some(Pruned {
                    predicate,
                    lossy,
                    changed,
                    sensors,
                })
            }
            Predicate::RuleNegation(name) => {
                let idx = *self.index.get(name.as_str())?;
                let target = self.rule(idx)?;
                Some(Pruned {
                    changed: target.rule.name != *name,
                    predicate: Predicate::RuleNegation(target.rule.name),
                    lossy: false,
                    sensors: target.sensors,
                })
            }
        }
    }
}

fn suffix(sensors: &BTreeSet<Sensor>) -> String {
    let mut s = String::new();
    for sensor in sensors {
        match sensor {
            Sensor::Gps => s.push_str("GPS"),
            Sensor::Bluetooth => s.push_str("BT"),
            Sensor::Calendar => {}
        }
    }
    s
}
