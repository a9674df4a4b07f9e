//! In-process topic bus connecting the micro-controllers, plus the lifecycle
//! operations (register, unregister, swap) used to restructure the ensemble.
//!
//! Dispatch is single-threaded and deterministic. Messages are delivered in
//! global sequence order; each message goes to every subscribed registration
//! in registration order. A registration receives a message only if it was
//! registered before the message was published and is still registered when
//! delivery reaches it.
//!
//! Handlers never touch the bus directly. They queue publishes and lifecycle
//! requests in an [`Outbox`], which the dispatcher applies after the handler
//! returns and before the next delivery.

use alloc::boxed::Box;
use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    ContextManager,
    AdaptationManager,
    FailureManager,
    MetaController,
    Knowledge,
}

impl Role {
    /// Roles with at most one active registration.
    pub fn is_exclusive(self) -> bool {
        matches!(self, Role::ContextManager | Role::AdaptationManager)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::ContextManager => "ContextManager",
            Role::AdaptationManager => "AdaptationManager",
            Role::FailureManager => "FailureManager",
            Role::MetaController => "MetaController",
            Role::Knowledge => "Knowledge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Topic {
    NewContext,
    RuleChange,
    SensorsFailure,
    EffectorsFailure,
    Tick,
}

impl Topic {
    pub fn name(self) -> &'static str {
        match self {
            Topic::NewContext => "newContext",
            Topic::RuleChange => "ruleChange",
            Topic::SensorsFailure => "sensorsFailure",
            Topic::EffectorsFailure => "effectorsFailure",
            Topic::Tick => "tick",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub id: String,
    pub role: Role,
    pub subscriptions: BTreeSet<Topic>,
    /// Operation names, e.g. `/generateContext`.
    pub operations: BTreeSet<String>,
}

impl Descriptor {
    pub fn new(id: &str, role: Role, subscriptions: &[Topic], operations: &[&str]) -> Self {
        Descriptor {
            id: String::from(id),
            role,
            subscriptions: subscriptions.iter().copied().collect(),
            operations: operations.iter().map(|s| String::from(*s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message<P> {
    pub topic: Topic,
    pub payload: P,
    pub sender: String,
    pub seq: u64,
}

/// A handler-reported failure; surfaces from dispatch as [`BusError::HandlerFault`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandlerFault(pub String);

impl<T: fmt::Display> From<T> for HandlerFault {
    fn from(e: T) -> Self {
        HandlerFault(alloc::format!("{e}"))
    }
}

pub trait Handler<C, P> {
    fn handle(
        &self,
        msg: &Message<P>,
        ctx: &mut C,
        out: &mut Outbox<C, P>,
    ) -> Result<(), HandlerFault>;
}

impl<C, P, F> Handler<C, P> for F
where
    F: Fn(&Message<P>, &mut C, &mut Outbox<C, P>) -> Result<(), HandlerFault>,
{
    fn handle(
        &self,
        msg: &Message<P>,
        ctx: &mut C,
        out: &mut Outbox<C, P>,
    ) -> Result<(), HandlerFault> {
        self(msg, ctx, out)
    }
}

pub type BoxedHandler<C, P> = Box<dyn Handler<C, P>>;

enum Lifecycle<C, P> {
    Register(Descriptor, BoxedHandler<C, P>),
    Unregister(String),
    Swap(String, Descriptor, BoxedHandler<C, P>),
}

/// Requests queued by a handler during one delivery.
pub struct Outbox<C, P> {
    publishes: Vec<(Topic, P)>,
    lifecycle: Vec<Lifecycle<C, P>>,
}

impl<C, P> Default for Outbox<C, P> {
    fn default() -> Self {
        Outbox {
            publishes: Vec::new(),
            lifecycle: Vec::new(),
        }
    }
}

impl<C, P> Outbox<C, P> {
    pub fn publish(&mut self, topic: Topic, payload: P) {
        self.publishes.push((topic, payload));
    }

    pub fn register(&mut self, descriptor: Descriptor, handler: BoxedHandler<C, P>) {
        self.lifecycle
            .push(Lifecycle::Register(descriptor, handler));
    }

    pub fn unregister(&mut self, id: &str) {
        self.lifecycle.push(Lifecycle::Unregister(String::from(id)));
    }

    pub fn swap(&mut self, old_id: &str, descriptor: Descriptor, handler: BoxedHandler<C, P>) {
        self.lifecycle
            .push(Lifecycle::Swap(String::from(old_id), descriptor, handler));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BusError {
    DuplicateId(String),
    RoleOccupied { role: Role, active: String },
    UnknownId(String),
    RoleMismatch { expected: Role, found: Role },
    UnknownSender(String),
    NoOperations(String),
    HandlerFault { id: String, reason: String },
}

impl fmt::Display for BusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BusError::DuplicateId(id) => write!(f, "`{id}` is already registered"),
            BusError::RoleOccupied { role, active } => {
                write!(f, "role {role} is already held by `{active}`")
            }
            BusError::UnknownId(id) => write!(f, "`{id}` is not registered"),
            BusError::RoleMismatch { expected, found } => {
                write!(f, "swap needs role {expected}, got {found}")
            }
            BusError::UnknownSender(id) => write!(f, "sender `{id}` is not registered"),
            BusError::NoOperations(id) => write!(f, "`{id}` declares no operations"),
            BusError::HandlerFault { id, reason } => write!(f, "handler `{id}` failed: {reason}"),
        }
    }
}

/// One handler invocation, as reported by [`Bus::step`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub seq: u64,
    pub topic: Topic,
    pub receiver: String,
}

struct Slot<C, P> {
    descriptor: Descriptor,
    handler: BoxedHandler<C, P>,
    /// First sequence number this registration may receive.
    since_seq: u64,
}

struct InFlight<P> {
    msg: Message<P>,
    next_slot: usize,
}

pub struct Bus<C, P> {
    slots: Vec<Option<Slot<C, P>>>,
    queue: VecDeque<Message<P>>,
    in_flight: Option<InFlight<P>>,
    next_seq: u64,
}

impl<C, P> Default for Bus<C, P> {
    fn default() -> Self {
        Bus {
            slots: Vec::new(),
            queue: VecDeque::new(),
            in_flight: None,
            next_seq: 1,
        }
    }
}

impl<C, P> Bus<C, P> {
    pub fn new() -> Self {
        Self::default()
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.as_ref().is_some_and(|s| s.descriptor.id == id))
    }

    pub fn is_registered(&self, id: &str) -> bool {
        self.position(id).is_some()
    }

    pub fn descriptor(&self, id: &str) -> Option<&Descriptor> {
        self.position(id)
            .and_then(|i| self.slots[i].as_ref())
            .map(|s| &s.descriptor)
    }

    /// The first active registration holding `role`.
    pub fn active(&self, role: Role) -> Option<&Descriptor> {
        self.descriptors().find(|d| d.role == role)
    }

    /// Registered descriptors in registration order.
    pub fn descriptors(&self) -> impl Iterator<Item = &Descriptor> {
        self.slots.iter().flatten().map(|s| &s.descriptor)
    }

    pub fn register(
        &mut self,
        descriptor: Descriptor,
        handler: BoxedHandler<C, P>,
    ) -> Result<(), BusError> {
        if self.is_registered(&descriptor.id) {
            return Err(BusError::DuplicateId(descriptor.id));
        }
        if descriptor.operations.is_empty() {
            return Err(BusError::NoOperations(descriptor.id));
        }
        if descriptor.role.is_exclusive() {
            if let Some(active) = self.active(descriptor.role) {
                return Err(BusError::RoleOccupied {
                    role: descriptor.role,
                    active: active.id.clone(),
                });
            }
        }
        self.slots.push(Some(Slot {
            descriptor,
            handler,
            since_seq: self.next_seq,
        }));
        Ok(())
    }

    pub fn unregister(&mut self, id: &str) -> Result<(), BusError> {
        let idx = self
            .position(id)
            .ok_or_else(|| BusError::UnknownId(String::from(id)))?;
        self.slots[idx] = None;
        Ok(())
    }

    /// Replaces the registration `old_id` in place. Dispatch cannot interleave
    /// with the switch, so every message, queued or in flight, reaches exactly
    /// one of the two handlers.
    pub fn swap(
        &mut self,
        old_id: &str,
        descriptor: Descriptor,
        handler: BoxedHandler<C, P>,
    ) -> Result<(), BusError> {
        let idx = self
            .position(old_id)
            .ok_or_else(|| BusError::UnknownId(String::from(old_id)))?;
        let slot = self.slots[idx]
            .as_mut()
            .expect("position() found a live slot");
        if descriptor.role != slot.descriptor.role {
            return Err(BusError::RoleMismatch {
                expected: slot.descriptor.role,
                found: descriptor.role,
            });
        }
        if descriptor.operations.is_empty() {
            return Err(BusError::NoOperations(descriptor.id));
        }
        if descriptor.id != old_id && self.is_registered(&descriptor.id) {
            return Err(BusError::DuplicateId(descriptor.id));
        }
        let slot = self.slots[idx].as_mut().expect("checked above");
        slot.descriptor = descriptor;
        slot.handler = handler;
        Ok(())
    }

    pub fn publish(&mut self, topic: Topic, payload: P, sender: &str) -> Result<u64, BusError> {
        if !self.is_registered(sender) {
            return Err(BusError::UnknownSender(String::from(sender)));
        }
        Ok(self.enqueue(topic, payload, String::from(sender)))
    }

    fn enqueue(&mut self, topic: Topic, payload: P, sender: String) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push_back(Message {
            topic,
            payload,
            sender,
            seq,
        });
        seq
    }

    /// Messages published but not yet fully delivered.
    pub fn pending(&self) -> usize {
        self.queue.len() + usize::from(self.in_flight.is_some())
    }

    /// Performs at most one handler invocation. Returns `None` when idle.
    pub fn step(&mut self, ctx: &mut C) -> Result<Option<Delivery>, BusError> {
        loop {
            if self.in_flight.is_none() {
                match self.queue.pop_front() {
                    Some(msg) => self.in_flight = Some(InFlight { msg, next_slot: 0 }),
                    None => return Ok(None),
                }
            }
            let flight = self.in_flight.as_mut().expect("set above");
            let (seq, topic) = (flight.msg.seq, flight.msg.topic);
            let next = (flight.next_slot..self.slots.len()).find(|&i| {
                self.slots[i].as_ref().is_some_and(|s| {
                    s.since_seq <= seq && s.descriptor.subscriptions.contains(&topic)
                })
            });
            let Some(idx) = next else {
                self.in_flight = None;
                continue;
            };
            flight.next_slot = idx + 1;

            let flight = self.in_flight.as_ref().expect("set above");
            let slot = self.slots[idx].as_ref().expect("filtered live");
            let receiver = slot.descriptor.id.clone();
            let mut out = Outbox::default();
            let result = slot.handler.handle(&flight.msg, ctx, &mut out);
            if let Err(HandlerFault(reason)) = result {
                return Err(BusError::HandlerFault {
                    id: receiver,
                    reason,
                });
            }
            self.apply(out, &receiver)?;
            return Ok(Some(Delivery {
                seq,
                topic,
                receiver,
            }));
        }
    }

    /// Steps until no message is pending. Returns the number of deliveries.
    pub fn dispatch(&mut self, ctx: &mut C) -> Result<usize, BusError> {
        let mut count = 0;
        while self.step(ctx)?.is_some() {
            count += 1;
        }
        Ok(count)
    }

    fn apply(&mut self, out: Outbox<C, P>, sender: &str) -> Result<(), BusError> {
        for op in out.lifecycle {
            match op {
                Lifecycle::Register(d, h) => self.register(d, h)?,
                Lifecycle::Unregister(id) => self.unregister(&id)?,
                Lifecycle::Swap(old, d, h) => self.swap(&old, d, h)?,
            }
        }
        for (topic, payload) in out.publishes {
            self.enqueue(topic, payload, String::from(sender));
        }
        Ok(())
    }

    /// Number of active registrations per exclusive role never exceeds one.
    pub fn exclusive_roles_hold(&self) -> bool {
        [Role::ContextManager, Role::AdaptationManager]
            .into_iter()
            .all(|role| self.descriptors().filter(|d| d.role == role).count() <= 1)
    }
}
