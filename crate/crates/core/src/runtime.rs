//! Tick-driven runner wiring the phone, the knowledge store and the
//! micro-controller ensemble together.
//!
//! Each tick runs a fixed schedule: injected events are applied, then a
//! monitor tick lets the failure manager report health edges (and the
//! meta-controller swap variants), then a sense tick lets the active context
//! manager step its machine and the adaptation manager actuate.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::afsm::ContextState;
use crate::bus::{Bus, BusError, Descriptor, HandlerFault, Message, Outbox, Role, Topic};
use crate::ensemble::{
    AMVariant, AdaptationManager, CMVariant, ContextManager, FailureManager, Phase, Signal,
};
use crate::knowledge::{keys, Knowledge, KnowledgeError, Value};
use crate::meta::{EnsembleConfig, MetaController};
use crate::phone_sim::{
    EffectorCall, EffectorState, HealthState, InjectedEvent, PhoneSim, SimError,
};
use crate::trace::{TraceEvent, TraceRecord};

pub const KNOWLEDGE_ID: &str = "Knowledge";

/// An effector call together with the controller that made it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Actuation {
    pub by: &'static str,
    pub call: EffectorCall,
}

/// Everything the handlers may touch while a message is delivered.
#[derive(Debug, Default)]
pub struct World {
    pub knowledge: Knowledge,
    pub sim: PhoneSim,
    pub trace: Vec<TraceRecord>,
    pub tick: u64,
    pub actuations: Vec<Actuation>,
}

impl World {
    pub fn record(&mut self, event: TraceEvent) {
        self.trace.push(TraceRecord {
            tick: self.tick,
            event,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeFault {
    Event { tick: u64, error: SimError },
    Bus(BusError),
    Knowledge(KnowledgeError),
}

impl fmt::Display for RuntimeFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeFault::Event { tick, error } => write!(f, "event at tick {tick}: {error}"),
            RuntimeFault::Bus(e) => write!(f, "{e}"),
            RuntimeFault::Knowledge(e) => write!(f, "{e}"),
        }
    }
}

impl From<BusError> for RuntimeFault {
    fn from(e: BusError) -> Self {
        RuntimeFault::Bus(e)
    }
}

impl From<KnowledgeError> for RuntimeFault {
    fn from(e: KnowledgeError) -> Self {
        RuntimeFault::Knowledge(e)
    }
}

fn knowledge_descriptor() -> Descriptor {
    Descriptor::new(
        KNOWLEDGE_ID,
        Role::Knowledge,
        &[],
        &["/NewSensorContext", "/NewEffectorData"],
    )
}

// Knowledge is written directly by the handlers; its registration only gives
// the scheduler a sender identity.
fn knowledge_handler(
    _: &Message<Signal>,
    _: &mut World,
    _: &mut Outbox<World, Signal>,
) -> Result<(), HandlerFault> {
    Ok(())
}

pub struct Runtime {
    bus: Bus<World, Signal>,
    world: World,
}

impl fmt::Debug for Runtime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runtime")
            .field(
                "ensemble",
                &self
                    .bus
                    .descriptors()
                    .map(|d| d.id.as_str())
                    .collect::<Vec<_>>(),
            )
            .field("world", &self.world)
            .finish()
    }
}

impl Default for Runtime {
    fn default() -> Self {
        Self::new()
    }
}

impl Runtime {
    /// Healthy phone, General context, AllSensors + AllEffectors active.
    pub fn new() -> Self {
        let config = EnsembleConfig {
            active_cm: CMVariant::AllSensors,
            active_am: AMVariant::AllEffectors,
            since_tick: 0,
        };
        let mut world = World::default();
        let seed = [
            (keys::CONTEXT_STATE, Value::Context(ContextState::General)),
            (keys::HEALTH, Value::Health(HealthState::HEALTHY)),
            (
                keys::EFFECTORS_STATE,
                Value::Effectors(EffectorState::default()),
            ),
            (keys::ENSEMBLE_CONFIG, Value::Ensemble(config)),
        ];
        for (key, value) in seed {
            world
                .knowledge
                .put(key, value, 0)
                .expect("static keys are well formed");
        }

        let mut bus = Bus::new();
        let registrations: [(Descriptor, crate::bus::BoxedHandler<World, Signal>); 5] = [
            (knowledge_descriptor(), Box::new(knowledge_handler)),
            (FailureManager::descriptor(), Box::new(FailureManager)),
            (MetaController::descriptor(), Box::new(MetaController)),
            (
                config.active_cm.descriptor(),
                ContextManager::boxed(config.active_cm),
            ),
            (
                config.active_am.descriptor(),
                AdaptationManager::boxed(config.active_am),
            ),
        ];
        for (descriptor, handler) in registrations {
            bus.register(descriptor, handler)
                .expect("initial ensemble is consistent");
        }
        Runtime { bus, world }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn bus(&self) -> &Bus<World, Signal> {
        &self.bus
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.world.trace
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.world.knowledge
    }

    pub fn sim(&self) -> &PhoneSim {
        &self.world.sim
    }

    pub fn config(&self) -> EnsembleConfig {
        self.world
            .knowledge
            .ensemble()
            .expect("ensemble/config is seeded at construction")
    }

    /// Runs one full tick at logical time `tick`.
    pub fn tick<'a, I>(&mut self, tick: u64, events: I) -> Result<(), RuntimeFault>
    where
        I: IntoIterator<Item = &'a InjectedEvent>,
    {
        self.world.tick = tick;
        for event in events {
            self.world
                .sim
                .apply_event(event)
                .map_err(|error| RuntimeFault::Event { tick, error })?;
        }
        for phase in [Phase::Monitor, Phase::Sense] {
            self.bus
                .publish(Topic::Tick, Signal::Tick(phase), KNOWLEDGE_ID)?;
            self.bus.dispatch(&mut self.world)?;
        }
        Ok(())
    }

    /// Publishes `payload` on `topic` as `sender` and dispatches to idle.
    pub fn inject(
        &mut self,
        topic: Topic,
        payload: Signal,
        sender: &str,
    ) -> Result<usize, RuntimeFault> {
        self.bus.publish(topic, payload, sender)?;
        Ok(self.bus.dispatch(&mut self.world)?)
    }

    /// Drops the active context and adaptation managers and registers fresh
    /// instances of the configured variants.
    pub fn recreate_controllers(&mut self) -> Result<(), RuntimeFault> {
        let config = self.config();
        self.bus.unregister(config.active_cm.id())?;
        self.bus.unregister(config.active_am.id())?;
        self.bus.register(
            config.active_cm.descriptor(),
            ContextManager::boxed(config.active_cm),
        )?;
        self.bus.register(
            config.active_am.descriptor(),
            AdaptationManager::boxed(config.active_am),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    EventOutOfRange { tick: u64, ticks: u64 },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::EventOutOfRange { tick, ticks } => {
                write!(f, "event at tick {tick} outside a {ticks}-tick run")
            }
        }
    }
}

/// Timed input events; ticks run from 0 to `ticks - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub ticks: u64,
    events: Vec<(u64, InjectedEvent)>,
}

impl Scenario {
    /// Sorts events by tick, keeping the given order within a tick.
    pub fn new(
        name: &str,
        ticks: u64,
        mut events: Vec<(u64, InjectedEvent)>,
    ) -> Result<Self, ScenarioError> {
        if let Some(&(tick, _)) = events.iter().find(|(t, _)| *t >= ticks) {
            return Err(ScenarioError::EventOutOfRange { tick, ticks });
        }
        events.sort_by_key(|(t, _)| *t);
        Ok(Scenario {
            name: name.to_string(),
            ticks,
            events,
        })
    }

    pub fn events(&self) -> &[(u64, InjectedEvent)] {
        &self.events
    }

    pub fn events_at(&self, tick: u64) -> impl Iterator<Item = &InjectedEvent> {
        self.events
            .iter()
            .filter(move |(t, _)| *t == tick)
            .map(|(_, e)| e)
    }

    pub fn last_event_tick(&self) -> Option<u64> {
        self.events.last().map(|(t, _)| *t)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the scenario's tick count.
    pub ticks: Option<u64>,
    /// Re-instantiate the context and adaptation managers before every tick.
    pub recreate_between_ticks: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub runtime: Runtime,
    pub fault: Option<RuntimeFault>,
}

impl RunOutcome {
    pub fn trace(&self) -> &[TraceRecord] {
        self.runtime.trace()
    }
}

/// Runs a scenario to completion or to the first fault. A fault is also
/// appended to the trace.
pub fn run(scenario: &Scenario, options: RunOptions) -> RunOutcome {
    let mut runtime = Runtime::new();
    let ticks = options.ticks.unwrap_or(scenario.ticks);
    let mut fault = None;
    for tick in 0..ticks {
        let result = if options.recreate_between_ticks && tick > 0 {
            runtime.recreate_controllers()
        } else {
            Ok(())
        };
        if let Err(e) = result.and_then(|()| runtime.tick(tick, scenario.events_at(tick))) {
            runtime.world.tick = tick;
            runtime.world.record(TraceEvent::Fault {
                message: e.to_string(),
            });
            fault = Some(e);
            break;
        }
    }
    RunOutcome { runtime, fault }
}
