//! The phone-adapter micro-controllers: context manager variants, adaptation
//! manager variants and the failure manager.
//!
//! None of them keeps mutable state. Everything that must survive between
//! invocations is written to [`Knowledge`](crate::knowledge::Knowledge); the
//! structs below only carry immutable configuration.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::afsm::{build_variant, AfsmDef, ContextState, Output, RuleId};
use crate::bus::{BoxedHandler, Descriptor, HandlerFault, Message, Outbox, Role, Topic};
use crate::knowledge::{keys, Value};
use crate::phone_sim::{Device, EffectorState, HealthState, SensorMask};
use crate::runtime::{Actuation, World};
use crate::trace::{Applied, TraceEvent};

/// Payload carried on the ensemble bus.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Tick(Phase),
    NewContext(ContextUpdate),
    RuleChange,
    Health(HealthState),
}

/// The two halves of a scheduler tick: failure detection first, then sensing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Monitor,
    Sense,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextUpdate {
    pub from: ContextState,
    pub to: ContextState,
    pub rule: RuleId,
    pub output: Output,
    pub conflicts: Vec<RuleId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureStatus {
    Failed,
    Restored,
}

impl fmt::Display for FailureStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureStatus::Failed => "failed",
            FailureStatus::Restored => "restored",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailureRecord {
    pub device: Device,
    pub status: FailureStatus,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnsembleError {
    OperationUnsupported {
        controller: &'static str,
        operation: &'static str,
    },
}

impl fmt::Display for EnsembleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleError::OperationUnsupported {
                controller,
                operation,
            } => write!(f, "{controller} does not provide {operation}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CMVariant {
    AllSensors,
    NoGPS,
    NoBluetooth,
    NoGPSNoBluetooth,
}

impl CMVariant {
    pub const ALL: [CMVariant; 4] = [
        CMVariant::AllSensors,
        CMVariant::NoGPS,
        CMVariant::NoBluetooth,
        CMVariant::NoGPSNoBluetooth,
    ];

    pub fn for_sensors(gps_ok: bool, bt_ok: bool) -> Self {
        match (gps_ok, bt_ok) {
            (true, true) => CMVariant::AllSensors,
            (false, true) => CMVariant::NoGPS,
            (true, false) => CMVariant::NoBluetooth,
            (false, false) => CMVariant::NoGPSNoBluetooth,
        }
    }

    pub fn uses_gps(self) -> bool {
        matches!(self, CMVariant::AllSensors | CMVariant::NoBluetooth)
    }

    pub fn uses_bluetooth(self) -> bool {
        matches!(self, CMVariant::AllSensors | CMVariant::NoGPS)
    }

    pub fn id(self) -> &'static str {
        crate::afsm::variant_name(self.uses_gps(), self.uses_bluetooth())
    }

    pub fn short_name(self) -> &'static str {
        match self {
            CMVariant::AllSensors => "AllSensors",
            CMVariant::NoGPS => "NoGPS",
            CMVariant::NoBluetooth => "NoBluetooth",
            CMVariant::NoGPSNoBluetooth => "NoGPSNoBluetooth",
        }
    }

    /// Accepts either the short name (`NoGPS`) or the full id.
    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.short_name() == s || v.id() == s)
    }

    pub fn mask(self) -> SensorMask {
        SensorMask {
            gps: self.uses_gps(),
            bluetooth: self.uses_bluetooth(),
            calendar: true,
        }
    }

    pub fn machine(self) -> AfsmDef {
        build_variant(self.uses_gps(), self.uses_bluetooth())
    }

    pub fn descriptor(self) -> Descriptor {
        let mut ops = alloc::vec!["/generateContext"];
        if self.uses_bluetooth() {
            ops.push("/sensingBluetooth");
        }
        if self.uses_gps() {
            ops.push("/locationListener");
        }
        Descriptor::new(self.id(), Role::ContextManager, &[Topic::Tick], &ops)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AMVariant {
    AllEffectors,
    NoRingtone,
    NoVibration,
    NoRingtoneNoVibration,
}

impl AMVariant {
    pub const ALL: [AMVariant; 4] = [
        AMVariant::AllEffectors,
        AMVariant::NoRingtone,
        AMVariant::NoVibration,
        AMVariant::NoRingtoneNoVibration,
    ];

    pub fn for_effectors(ringtone_ok: bool, vibration_ok: bool) -> Self {
        match (ringtone_ok, vibration_ok) {
            (true, true) => AMVariant::AllEffectors,
            (false, true) => AMVariant::NoRingtone,
            (true, false) => AMVariant::NoVibration,
            (false, false) => AMVariant::NoRingtoneNoVibration,
        }
    }

    pub fn drives_volume(self) -> bool {
        matches!(self, AMVariant::AllEffectors | AMVariant::NoVibration)
    }

    pub fn drives_vibration(self) -> bool {
        matches!(self, AMVariant::AllEffectors | AMVariant::NoRingtone)
    }

    pub fn id(self) -> &'static str {
        match self {
            AMVariant::AllEffectors => "AdaptationManagerAllEffectors",
            AMVariant::NoRingtone => "AdaptationManagerNoRingtone",
            AMVariant::NoVibration => "AdaptationManagerNoVibration",
            AMVariant::NoRingtoneNoVibration => "AdaptationManagerNoRingtoneNoVibration",
        }
    }

    pub fn short_name(self) -> &'static str {
        &self.id()["AdaptationManager".len()..]
    }

    pub fn descriptor(self) -> Descriptor {
        Descriptor::new(
            self.id(),
            Role::AdaptationManager,
            &[Topic::NewContext, Topic::RuleChange],
            &["/processNewContext", "/processRuleChange"],
        )
    }
}

type Ctx = World;
type Out = Outbox<World, Signal>;

#[derive(Debug, Clone)]
pub struct ContextManager {
    variant: CMVariant,
    machine: AfsmDef,
}

impl ContextManager {
    pub fn new(variant: CMVariant) -> Self {
        ContextManager {
            variant,
            machine: variant.machine(),
        }
    }

    pub fn variant(&self) -> CMVariant {
        self.variant
    }

    pub fn boxed(variant: CMVariant) -> BoxedHandler<World, Signal> {
        Box::new(Self::new(variant))
    }

    /// `/generateContext`: sense, step the machine from the stored context, and
    /// announce the new context if a rule fired.
    pub fn generate_context(&self, world: &mut Ctx, out: &mut Out) -> Result<(), HandlerFault> {
        let tick = world.tick;
        let snapshot = world.sim.read_sensors(self.variant.mask());
        world.knowledge.put(
            keys::SENSORS_SNAPSHOT,
            Value::Sensors(snapshot.clone()),
            tick,
        )?;
        let from = world
            .knowledge
            .context_state()
            .unwrap_or(ContextState::General);
        let step = self.machine.step(from, &snapshot);
        let (Some(rule), Some(output)) = (step.fired, step.output) else {
            return Ok(());
        };
        world
            .knowledge
            .put(keys::CONTEXT_STATE, Value::Context(step.new_state), tick)?;
        world.record(TraceEvent::ContextChange {
            rule,
            from,
            to: step.new_state,
            output,
        });
        if !step.conflicts.is_empty() {
            world.record(TraceEvent::Conflict {
                state: from,
                fired: rule,
                others: step.conflicts.clone(),
            });
        }
        out.publish(
            Topic::NewContext,
            Signal::NewContext(ContextUpdate {
                from,
                to: step.new_state,
                rule,
                output,
                conflicts: step.conflicts,
            }),
        );
        Ok(())
    }

    /// `/sensingBluetooth`
    pub fn sensing_bluetooth(&self, world: &mut Ctx) -> Result<BTreeSet<String>, EnsembleError> {
        if !self.variant.uses_bluetooth() {
            return Err(EnsembleError::OperationUnsupported {
                controller: self.variant.id(),
                operation: "/sensingBluetooth",
            });
        }
        let mask = SensorMask {
            bluetooth: true,
            ..SensorMask::NONE
        };
        Ok(world.sim.read_sensors(mask).bluetooth)
    }

    /// `/locationListener`: (latitude, longitude).
    pub fn location_listener(&self, world: &mut Ctx) -> Result<(f64, f64), EnsembleError> {
        if !self.variant.uses_gps() {
            return Err(EnsembleError::OperationUnsupported {
                controller: self.variant.id(),
                operation: "/locationListener",
            });
        }
        let mask = SensorMask {
            gps: true,
            ..SensorMask::NONE
        };
        let gps = world.sim.read_sensors(mask).gps;
        Ok((gps.lat, gps.lon))
    }
}

impl crate::bus::Handler<World, Signal> for ContextManager {
    fn handle(
        &self,
        msg: &Message<Signal>,
        world: &mut World,
        out: &mut Out,
    ) -> Result<(), HandlerFault> {
        match msg.payload {
            Signal::Tick(Phase::Sense) => self.generate_context(world, out),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptationManager {
    variant: AMVariant,
}

impl AdaptationManager {
    pub fn new(variant: AMVariant) -> Self {
        AdaptationManager { variant }
    }

    pub fn variant(&self) -> AMVariant {
        self.variant
    }

    pub fn boxed(variant: AMVariant) -> BoxedHandler<World, Signal> {
        Box::new(Self::new(variant))
    }

    /// `/processNewContext`
    pub fn process_new_context(
        &self,
        update: &ContextUpdate,
        world: &mut Ctx,
    ) -> Result<(), HandlerFault> {
        self.apply(update.output.volume, update.output.vibration, world)
    }

    /// `/processRuleChange`: back to the General context and its settings.
    pub fn process_rule_change(&self, world: &mut Ctx) -> Result<(), HandlerFault> {
        let from = world
            .knowledge
            .context_state()
            .unwrap_or(ContextState::General);
        world.knowledge.put(
            keys::CONTEXT_STATE,
            Value::Context(ContextState::General),
            world.tick,
        )?;
        world.record(TraceEvent::RuleChange {
            from,
            to: ContextState::General,
        });
        let general = EffectorState::default();
        self.apply(general.volume, general.vibration, world)
    }

    fn apply(
        &self,
        volume: u8,
        vibration: crate::phone_sim::Vibration,
        world: &mut Ctx,
    ) -> Result<(), HandlerFault> {
        let by = self.variant.id();
        if self.variant.drives_volume() {
            let result = world.sim.set_volume(volume);
            world.log_actuation(by);
            result?;
        }
        if self.variant.drives_vibration() {
            let result = world.sim.set_vibration(vibration);
            world.log_actuation(by);
            result?;
        }
        let state = world.sim.effectors();
        world
            .knowledge
            .put(keys::EFFECTORS_STATE, Value::Effectors(state), world.tick)?;
        world.record(TraceEvent::EffectorSet {
            by: String::from(by),
            applied: Applied {
                volume: self.variant.drives_volume(),
                vibration: self.variant.drives_vibration(),
            },
            state,
        });
        Ok(())
    }
}

impl crate::bus::Handler<World, Signal> for AdaptationManager {
    fn handle(
        &self,
        msg: &Message<Signal>,
        world: &mut World,
        _: &mut Out,
    ) -> Result<(), HandlerFault> {
        match &msg.payload {
            Signal::NewContext(update) => self.process_new_context(update, world),
            Signal::RuleChange => self.process_rule_change(world),
            _ => Ok(()),
        }
    }
}

/// Watches device health and reports edges (failed/restored), one message per
/// changed device.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailureManager;

impl FailureManager {
    pub const ID: &'static str = "FailureManager";

    pub fn descriptor() -> Descriptor {
        Descriptor::new(
            Self::ID,
            Role::FailureManager,
            &[Topic::Tick],
            &["/verifySensors", "/verifyEffectors"],
        )
    }

    /// `/verifySensors`
    pub fn verify_sensors(&self, world: &mut Ctx, out: &mut Out) -> Result<(), HandlerFault> {
        self.verify(
            &[Device::Gps, Device::Bluetooth],
            Topic::SensorsFailure,
            world,
            out,
        )
    }

    /// `/verifyEffectors`
    pub fn verify_effectors(&self, world: &mut Ctx, out: &mut Out) -> Result<(), HandlerFault> {
        self.verify(
            &[Device::Ringtone, Device::Vibration],
            Topic::EffectorsFailure,
            world,
            out,
        )
    }

    fn verify(
        &self,
        devices: &[Device],
        topic: Topic,
        world: &mut Ctx,
        out: &mut Out,
    ) -> Result<(), HandlerFault> {
        let probed = world.sim.probe_health();
        let mut known = world.knowledge.health().unwrap_or(HealthState::HEALTHY);
        for &device in devices {
            let ok = probed.is_ok(device);
            if ok == known.is_ok(device) {
                continue;
            }
            known.set(device, ok);
            let status = if ok {
                FailureStatus::Restored
            } else {
                FailureStatus::Failed
            };
            let tick = world.tick;
            world
                .knowledge
                .put(keys::HEALTH, Value::Health(known), tick)?;
            world.knowledge.put(
                keys::FAILURES_LATEST,
                Value::Failure(FailureRecord {
                    device,
                    status,
                    tick,
                }),
                tick,
            )?;
            world.record(TraceEvent::Failure { device, status });
            out.publish(topic, Signal::Health(known));
        }
        Ok(())
    }
}

impl crate::bus::Handler<World, Signal> for FailureManager {
    fn handle(
        &self,
        msg: &Message<Signal>,
        world: &mut World,
        out: &mut Out,
    ) -> Result<(), HandlerFault> {
        match msg.payload {
            Signal::Tick(Phase::Monitor) => {
                self.verify_sensors(world, out)?;
                self.verify_effectors(world, out)
            }
            _ => Ok(()),
        }
    }
}

impl World {
    fn log_actuation(&mut self, by: &'static str) {
        if let Some(call) = self.sim.effector_calls().last().copied() {
            self.actuations.push(Actuation { by, call });
        }
    }
}
