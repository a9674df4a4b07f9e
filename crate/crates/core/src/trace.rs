//! Records emitted while a scenario runs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::afsm::{ContextState, Output, RuleId};
use crate::bus::Role;
use crate::ensemble::FailureStatus;
use crate::phone_sim::{Device, EffectorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    ContextChange,
    EffectorSet,
    Failure,
    Reconfig,
    Conflict,
    RuleChange,
    Fault,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::ContextChange => "context_change",
            TraceKind::EffectorSet => "effector_set",
            TraceKind::Failure => "failure",
            TraceKind::Reconfig => "reconfig",
            TraceKind::Conflict => "conflict",
            TraceKind::RuleChange => "rule_change",
            TraceKind::Fault => "fault",
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which settings an adaptation manager actually wrote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applied {
    pub volume: bool,
    pub vibration: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    ContextChange {
        rule: RuleId,
        from: ContextState,
        to: ContextState,
        output: Output,
    },
    /// `state` is the state the rules were evaluated in.
    Conflict {
        state: ContextState,
        fired: RuleId,
        others: Vec<RuleId>,
    },
    /// `state` is the effector state after the write.
    EffectorSet {
        by: String,
        applied: Applied,
        state: EffectorState,
    },
    Failure {
        device: Device,
        status: FailureStatus,
    },
    Reconfig {
        role: Role,
        rule: char,
        old: String,
        new: String,
    },
    RuleChange {
        from: ContextState,
        to: ContextState,
    },
    Fault {
        message: String,
    },
}

impl TraceEvent {
    pub fn kind(&self) -> TraceKind {
        match self {
            TraceEvent::ContextChange { .. } => TraceKind::ContextChange,
            TraceEvent::Conflict { .. } => TraceKind::Conflict,
            TraceEvent::EffectorSet { .. } => TraceKind::EffectorSet,
            TraceEvent::Failure { .. } => TraceKind::Failure,
            TraceEvent::Reconfig { .. } => TraceKind::Reconfig,
            TraceEvent::RuleChange { .. } => TraceKind::RuleChange,
            TraceEvent::Fault { .. } => TraceKind::Fault,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub tick: u64,
    pub event: TraceEvent,
}

impl TraceRecord {
    pub fn kind(&self) -> TraceKind {
        self.event.kind()
    }
}
