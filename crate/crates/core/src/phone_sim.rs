//! Simulated phone: GPS, Bluetooth and calendar sensors, volume and vibration
//! effectors, per-device health and fault injection.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Last minute of the day. Used as the "no meeting scheduled" calendar value.
pub const END_OF_DAY: u16 = 1439;

/// Distinguished Bluetooth peers referenced by the contextual rules.
pub const CAR_HANDSFREE: &str = "car_handsfree";
pub const HOME_PC: &str = "home_pc";
pub const OFFICE_PC: &str = "office_pc";

/// Symbolic GPS location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Home,
    Office,
    Other,
    Unknown,
}

impl Location {
    pub fn name(self) -> &'static str {
        match self {
            Location::Home => "home",
            Location::Office => "office",
            Location::Other => "other",
            Location::Unknown => "unknown",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "home" => Location::Home,
            "office" => Location::Office,
            "other" => Location::Other,
            "unknown" => Location::Unknown,
            _ => return None,
        })
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vibration {
    On,
    Off,
}

impl Vibration {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "ON" => Some(Vibration::On),
            "OFF" => Some(Vibration::Off),
            _ => None,
        }
    }
}

impl fmt::Display for Vibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vibration::On => "ON",
            Vibration::Off => "OFF",
        })
    }
}

/// A sensor family, as seen by a context manager's read mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sensor {
    Gps,
    Bluetooth,
    Calendar,
}

/// Any device whose health is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Device {
    Gps,
    Bluetooth,
    Ringtone,
    Vibration,
}

impl Device {
    pub const ALL: [Device; 4] = [
        Device::Gps,
        Device::Bluetooth,
        Device::Ringtone,
        Device::Vibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Device::Gps => "gps",
            Device::Bluetooth => "bluetooth",
            Device::Ringtone => "ringtone",
            Device::Vibration => "vibration",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SimError> {
        Ok(match s {
            "gps" => Device::Gps,
            "bluetooth" | "bt" => Device::Bluetooth,
            "ringtone" => Device::Ringtone,
            "vibration" => Device::Vibration,
            other => return Err(SimError::UnknownDevice(other.to_string())),
        })
    }

    pub fn is_sensor(self) -> bool {
        matches!(self, Device::Gps | Device::Bluetooth)
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsReading {
    pub valid: bool,
    pub location: Location,
    /// km/h
    pub speed: f64,
    pub lat: f64,
    pub lon: f64,
}

impl GpsReading {
    /// What a failed (or masked-out) GPS reports.
    pub const SENTINEL: GpsReading = GpsReading {
        valid: false,
        location: Location::Unknown,
        speed: 0.0,
        lat: 0.0,
        lon: 0.0,
    };
}

/// One observation of every sensor the caller asked for.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSnapshot {
    pub gps: GpsReading,
    pub bluetooth: BTreeSet<String>,
    /// Minutes since midnight.
    pub time: u16,
    pub meeting_start: u16,
    pub meeting_end: u16,
}

impl SensorSnapshot {
    /// Every sensor at its sentinel value.
    pub fn quiet() -> Self {
        SensorSnapshot {
            gps: GpsReading::SENTINEL,
            bluetooth: BTreeSet::new(),
            time: 0,
            meeting_start: END_OF_DAY,
            meeting_end: END_OF_DAY,
        }
    }

    pub fn bt_count(&self) -> usize {
        self.bluetooth.len()
    }

    pub fn with_bluetooth<I, S>(mut self, devices: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.bluetooth = devices.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_gps(mut self, valid: bool, location: Location, speed: f64) -> Self {
        self.gps = GpsReading {
            valid,
            location,
            speed,
            lat: 0.0,
            lon: 0.0,
        };
        self
    }
}

/// Which sensors a read is allowed to touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorMask {
    pub gps: bool,
    pub bluetooth: bool,
    pub calendar: bool,
}

impl SensorMask {
    pub const ALL: SensorMask = SensorMask {
        gps: true,
        bluetooth: true,
        calendar: true,
    };
    pub const NONE: SensorMask = SensorMask {
        gps: false,
        bluetooth: false,
        calendar: false,
    };

    pub fn includes(&self, sensor: Sensor) -> bool {
        match sensor {
            Sensor::Gps => self.gps,
            Sensor::Bluetooth => self.bluetooth,
            Sensor::Calendar => self.calendar,
        }
    }
}

/// Per-sensor read counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SensorAccess {
    pub gps: u64,
    pub bluetooth: u64,
    pub calendar: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EffectorState {
    pub volume: u8,
    pub vibration: Vibration,
}

impl Default for EffectorState {
    /// The General-context settings.
    fn default() -> Self {
        EffectorState {
            volume: 50,
            vibration: Vibration::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HealthState {
    pub gps_ok: bool,
    pub bt_ok: bool,
    pub ringtone_ok: bool,
    pub vibration_ok: bool,
}

impl HealthState {
    pub const HEALTHY: HealthState = HealthState {
        gps_ok: true,
        bt_ok: true,
        ringtone_ok: true,
        vibration_ok: true,
    };

    pub fn is_ok(&self, device: Device) -> bool {
        match device {
            Device::Gps => self.gps_ok,
            Device::Bluetooth => self.bt_ok,
            Device::Ringtone => self.ringtone_ok,
            Device::Vibration => self.vibration_ok,
        }
    }

    pub fn set(&mut self, device: Device, ok: bool) {
        match device {
            Device::Gps => self.gps_ok = ok,
            Device::Bluetooth => self.bt_ok = ok,
            Device::Ringtone => self.ringtone_ok = ok,
            Device::Vibration => self.vibration_ok = ok,
        }
    }

    /// All 16 combinations, enumerated as a 4-bit counter (gps is the high bit).
    pub fn all() -> impl Iterator<Item = HealthState> {
        (0u8..16).map(|bits| HealthState {
            gps_ok: bits & 0b1000 == 0,
            bt_ok: bits & 0b0100 == 0,
            ringtone_ok: bits & 0b0010 == 0,
            vibration_ok: bits & 0b0001 == 0,
        })
    }
}

impl Default for HealthState {
    fn default() -> Self {
        HealthState::HEALTHY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InjectedEvent {
    GpsFix {
        valid: bool,
        location: Location,
        speed: f64,
        lat: f64,
        lon: f64,
    },
    BtConnect(String),
    BtDisconnect(String),
    ClockSet(u16),
    CalendarSet {
        meeting_start: u16,
        meeting_end: u16,
    },
    Fail(Device),
    Restore(Device),
}

/// One attempted effector write, recorded whether or not it succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectorCall {
    SetVolume { volume: u8, ok: bool },
    SetVibration { vibration: Vibration, ok: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    UnknownDevice(String),
    DisconnectNotConnected(String),
    EffectorFailed(Device),
    VolumeOutOfRange(u8),
    TimeOutOfRange(u16),
    InvalidSpeed,
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::UnknownDevice(d) => write!(f, "unknown device `{d}`"),
            SimError::DisconnectNotConnected(d) => {
                write!(f, "bluetooth device `{d}` is not connected")
            }
            SimError::EffectorFailed(d) => write!(f, "effector {d} has failed"),
            SimError::VolumeOutOfRange(v) => write!(f, "volume {v} outside 0..=100"),
            SimError::TimeOutOfRange(t) => write!(f, "minute-of-day {t} outside 0..=1439"),
            SimError::InvalidSpeed => f.write_str("speed must be a finite value >= 0"),
        }
    }
}

/// The target system. Holds the ground truth that sensors expose and effectors mutate.
#[derive(Debug, Clone)]
pub struct PhoneSim {
    gps: GpsReading,
    bluetooth: BTreeSet<String>,
    time: u16,
    meeting_start: u16,
    meeting_end: u16,
    effectors: EffectorState,
    health: HealthState,
    access: SensorAccess,
    calls: Vec<EffectorCall>,
}

impl Default for PhoneSim {
    fn default() -> Self {
        Self::new()
    }
}

impl PhoneSim {
    pub fn new() -> Self {
        PhoneSim {
            gps: GpsReading::SENTINEL,
            bluetooth: BTreeSet::new(),
            time: 0,
            meeting_start: END_OF_DAY,
            meeting_end: END_OF_DAY,
            effectors: EffectorState::default(),
            health: HealthState::HEALTHY,
            access: SensorAccess::default(),
            calls: Vec::new(),
        }
    }

    pub fn apply_event(&mut self, event: &InjectedEvent) -> Result<(), SimError> {
        match event {
            InjectedEvent::GpsFix {
                valid,
                location,
                speed,
                lat,
                lon,
            } => {
                if !speed.is_finite() || *speed < 0.0 {
                    return Err(SimError::InvalidSpeed);
                }
                self.gps = GpsReading {
                    valid: *valid,
                    location: *location,
                    speed: *speed,
                    lat: *lat,
                    lon: *lon,
                };
            }
            InjectedEvent::BtConnect(device) => {
                self.bluetooth.insert(device.clone());
            }
            InjectedEvent::BtDisconnect(device) => {
                if !self.bluetooth.remove(device) {
                    return Err(SimError::DisconnectNotConnected(device.clone()));
                }
            }
            InjectedEvent::ClockSet(t) => {
                check_minute(*t)?;
                self.time = *t;
            }
            InjectedEvent::CalendarSet {
                meeting_start,
                meeting_end,
            } => {
                check_minute(*meeting_start)?;
                check_minute(*meeting_end)?;
                self.meeting_start = *meeting_start;
                self.meeting_end = *meeting_end;
            }
            InjectedEvent::Fail(device) => self.health.set(*device, false),
            InjectedEvent::Restore(device) => self.health.set(*device, true),
        }
        Ok(())
    }

    /// Reads the sensors selected by `mask`. Masked-out and failed sensors
    /// report sentinel values; only masked-in sensors count as accessed.
    pub fn read_sensors(&mut self, mask: SensorMask) -> SensorSnapshot {
        let mut snapshot = SensorSnapshot::quiet();
        if mask.gps {
            self.access.gps += 1;
            if self.health.gps_ok {
                snapshot.gps = self.gps.clone();
            }
        }
        if mask.bluetooth {
            self.access.bluetooth += 1;
            if self.health.bt_ok {
                snapshot.bluetooth = self.bluetooth.clone();
            }
        }
        if mask.calendar {
            self.access.calendar += 1;
            snapshot.time = self.time;
            snapshot.meeting_start = self.meeting_start;
            snapshot.meeting_end = self.meeting_end;
        }
        snapshot
    }

    pub fn set_volume(&mut self, volume: u8) -> Result<(), SimError> {
        let result = if !self.health.ringtone_ok {
            Err(SimError::EffectorFailed(Device::Ringtone))
        } else if volume > 100 {
            Err(SimError::VolumeOutOfRange(volume))
        } else {
            self.effectors.volume = volume;
            Ok(())
        };
        self.calls.push(EffectorCall::SetVolume {
            volume,
            ok: result.is_ok(),
        });
        result
    }

    pub fn set_vibration(&mut self, vibration: Vibration) -> Result<(), SimError> {
        let result = if !self.health.vibration_ok {
            Err(SimError::EffectorFailed(Device::Vibration))
        } else {
            self.effectors.vibration = vibration;
            Ok(())
        };
        self.calls.push(EffectorCall::SetVibration {
            vibration,
            ok: result.is_ok(),
        });
        result
    }

    pub fn probe_health(&self) -> HealthState {
        self.health
    }

    pub fn effectors(&self) -> EffectorState {
        self.effectors
    }

    pub fn access(&self) -> SensorAccess {
        self.access
    }

    /// Every effector write attempted so far, in call order.
    pub fn effector_calls(&self) -> &[EffectorCall] {
        &self.calls
    }
}

fn check_minute(t: u16) -> Result<(), SimError> {
    if t > END_OF_DAY {
        Err(SimError::TimeOutOfRange(t))
    } else {
        Ok(())
    }
}
