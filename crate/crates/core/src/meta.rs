//! The meta-controller: picks context and adaptation manager variants from
//! device health and swaps them into the running ensemble.

use alloc::vec::Vec;

use crate::afsm::ContextState;
use crate::bus::{Descriptor, Handler, HandlerFault, Message, Outbox, Role, Topic};
use crate::ensemble::{AMVariant, AdaptationManager, CMVariant, ContextManager, Signal};
use crate::knowledge::{keys, Value};
use crate::phone_sim::HealthState;
use crate::runtime::World;
use crate::trace::TraceEvent;

/// Active variants; stored under `ensemble/config`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleConfig {
    pub active_cm: CMVariant,
    pub active_am: AMVariant,
    pub since_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    ContextManager(CMVariant),
    AdaptationManager(AMVariant),
}

/// A reconfiguration rule. Rules a-d choose the context manager, e-h the
/// adaptation manager; each group applies to any currently active variant.
#[derive(Debug, Clone, Copy)]
pub struct MetaRule {
    pub id: char,
    pub name: &'static str,
    pub trigger: fn(&HealthState) -> bool,
    pub target: Target,
}

pub const CONTEXT_MANAGER_RULES: [MetaRule; 4] = [
    MetaRule {
        id: 'a',
        name: "ActivateAllSensors",
        trigger: |h| h.gps_ok && h.bt_ok,
        target: Target::ContextManager(CMVariant::AllSensors),
    },
    MetaRule {
        id: 'b',
        name: "ActivateNoGPS",
        trigger: |h| !h.gps_ok && h.bt_ok,
        target: Target::ContextManager(CMVariant::NoGPS),
    },
    MetaRule {
        id: 'c',
        name: "ActivateNoBluetooth",
        trigger: |h| h.gps_ok && !h.bt_ok,
        target: Target::ContextManager(CMVariant::NoBluetooth),
    },
    MetaRule {
        id: 'd',
        name: "ActivateNoBluetoothNoGPS",
        trigger: |h| !h.gps_ok && !h.bt_ok,
        target: Target::ContextManager(CMVariant::NoGPSNoBluetooth),
    },
];

// Vibration/Audio guards are read as effector availability, not current settings.
pub const ADAPTATION_MANAGER_RULES: [MetaRule; 4] = [
    MetaRule {
        id: 'e',
        name: "ActivateAllEffectors",
        trigger: |h| h.vibration_ok && h.ringtone_ok,
        target: Target::AdaptationManager(AMVariant::AllEffectors),
    },
    MetaRule {
        id: 'f',
        name: "ActivateNoRingtone",
        trigger: |h| h.vibration_ok && !h.ringtone_ok,
        target: Target::AdaptationManager(AMVariant::NoRingtone),
    },
    MetaRule {
        id: 'g',
        name: "ActivateNoVibration",
        trigger: |h| !h.vibration_ok && h.ringtone_ok,
        target: Target::AdaptationManager(AMVariant::NoVibration),
    },
    MetaRule {
        id: 'h',
        name: "ActivateNoRingtoneNoVibration",
        trigger: |h| !h.vibration_ok && !h.ringtone_ok,
        target: Target::AdaptationManager(AMVariant::NoRingtoneNoVibration),
    },
];

fn first_match(rules: &'static [MetaRule; 4], h: &HealthState) -> &'static MetaRule {
    rules
        .iter()
        .find(|r| (r.trigger)(h))
        .expect("rule group covers every health combination")
}

pub fn context_manager_rule(h: &HealthState) -> &'static MetaRule {
    first_match(&CONTEXT_MANAGER_RULES, h)
}

pub fn adaptation_manager_rule(h: &HealthState) -> &'static MetaRule {
    first_match(&ADAPTATION_MANAGER_RULES, h)
}

pub fn select_context_manager(h: &HealthState) -> CMVariant {
    match context_manager_rule(h).target {
        Target::ContextManager(v) => v,
        Target::AdaptationManager(_) => unreachable!("rules a-d target context managers"),
    }
}

pub fn select_adaptation_manager(h: &HealthState) -> AMVariant {
    match adaptation_manager_rule(h).target {
        Target::AdaptationManager(v) => v,
        Target::ContextManager(_) => unreachable!("rules e-h target adaptation managers"),
    }
}

/// Configuration chosen for each of the 16 health combinations.
pub fn config_map() -> Vec<(HealthState, EnsembleConfig)> {
    HealthState::all()
        .map(|h| {
            (
                h,
                EnsembleConfig {
                    active_cm: select_context_manager(&h),
                    active_am: select_adaptation_manager(&h),
                    since_tick: 0,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetaController;

impl MetaController {
    pub const ID: &'static str = "MetaController";

    pub fn descriptor() -> Descriptor {
        Descriptor::new(
            Self::ID,
            Role::MetaController,
            &[Topic::SensorsFailure, Topic::EffectorsFailure],
            &["/sensorsFailure", "/effectorsFailure"],
        )
    }

    /// Reacts to one failure report. Re-selecting the active variant is a no-op.
    pub fn on_failure(
        &self,
        topic: Topic,
        health: &HealthState,
        world: &mut World,
        out: &mut Outbox<World, Signal>,
    ) -> Result<(), HandlerFault> {
        let config = world
            .knowledge
            .ensemble()
            .ok_or_else(|| HandlerFault("no ensemble configuration in knowledge".into()))?;
        let tick = world.tick;
        match topic {
            Topic::SensorsFailure => {
                let rule = context_manager_rule(health);
                let target = select_context_manager(health);
                if target == config.active_cm {
                    return Ok(());
                }
                out.swap(
                    config.active_cm.id(),
                    target.descriptor(),
                    ContextManager::boxed(target),
                );
                let next = EnsembleConfig {
                    active_cm: target,
                    since_tick: tick,
                    ..config
                };
                world
                    .knowledge
                    .put(keys::ENSEMBLE_CONFIG, Value::Ensemble(next), tick)?;
                world.record(TraceEvent::Reconfig {
                    role: Role::ContextManager,
                    rule: rule.id,
                    old: config.active_cm.id().into(),
                    new: target.id().into(),
                });
                let state = world
                    .knowledge
                    .context_state()
                    .unwrap_or(ContextState::General);
                if !target.machine().reachable_states().contains(&state) {
                    out.publish(Topic::RuleChange, Signal::RuleChange);
                }
            }
            Topic::EffectorsFailure => {
                let rule = adaptation_manager_rule(health);
                let target = select_adaptation_manager(health);
                if target == config.active_am {
                    return Ok(());
                }
                out.swap(
                    config.active_am.id(),
                    target.descriptor(),
                    AdaptationManager::boxed(target),
                );
                let next = EnsembleConfig {
                    active_am: target,
                    since_tick: tick,
                    ..config
                };
                world
                    .knowledge
                    .put(keys::ENSEMBLE_CONFIG, Value::Ensemble(next), tick)?;
                world.record(TraceEvent::Reconfig {
                    role: Role::AdaptationManager,
                    rule: rule.id,
                    old: config.active_am.id().into(),
                    new: target.id().into(),
                });
            }
            other => return Err(HandlerFault(alloc::format!("unexpected topic {other}"))),
        }
        Ok(())
    }
}

impl Handler<World, Signal> for MetaController {
    fn handle(
        &self,
        msg: &Message<Signal>,
        world: &mut World,
        out: &mut Outbox<World, Signal>,
    ) -> Result<(), HandlerFault> {
        match &msg.payload {
            Signal::Health(h) => self.on_failure(msg.topic, h, world, out),
            _ => Ok(()),
        }
    }
}
