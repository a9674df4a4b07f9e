use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{AfsmDef, ContextState, RuleId};
use crate::phone_sim::{GpsReading, Location, SensorSnapshot, CAR_HANDSFREE, HOME_PC, OFFICE_PC};

pub const GRID_MEETING_START: u16 = 540;
pub const GRID_MEETING_END: u16 = 600;

/// Several rules enabled in one state for the same snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub state: ContextState,
    pub rules: Vec<RuleId>,
    /// The first grid snapshot producing this enabled set.
    pub witness: SensorSnapshot,
}

/// The finite snapshot grid used for conflict search. One value on each side
/// of every threshold in the rule tables:
///
/// gps valid {f, t} x location {home, office, other} x speed {0, 6, 71}
/// x Bluetooth subsets of {car_handsfree, home_pc, office_pc}
/// x bt_count {0, 3} x time {before, inside, after} the meeting.
///
/// A bt_count of 3 pads the subset with anonymous peers up to three devices;
/// a count of 0 leaves the subset as is.
pub fn snapshot_grid() -> Vec<SensorSnapshot> {
    let named = [CAR_HANDSFREE, HOME_PC, OFFICE_PC];
    let times = [480, 570, 660];
    let mut grid = Vec::with_capacity(864);
    for valid in [false, true] {
        for location in [Location::Home, Location::Office, Location::Other] {
            for speed in [0.0, 6.0, 71.0] {
                for mask in 0u8..8 {
                    for min_count in [0usize, 3] {
                        for time in times {
                            let mut bluetooth: BTreeSet<String> = named
                                .iter()
                                .enumerate()
                                .filter(|(bit, _)| mask & (1 << bit) != 0)
                                .map(|(_, d)| String::from(*d))
                                .collect();
                            let mut pad = 0;
                            while bluetooth.len() < min_count {
                                bluetooth.insert(format!("peer_{pad}"));
                                pad += 1;
                            }
                            grid.push(SensorSnapshot {
                                gps: GpsReading {
                                    valid,
                                    location,
                                    speed,
                                    lat: 0.0,
                                    lon: 0.0,
                                },
                                bluetooth,
                                time,
                                meeting_start: GRID_MEETING_START,
                                meeting_end: GRID_MEETING_END,
                            });
                        }
                    }
                }
            }
        }
    }
    grid
}

/// Every distinct (state, enabled set) with two or more rules over the grid,
/// ordered by state and then by first occurrence.
pub fn detect_conflicts(m: &AfsmDef) -> Vec<Conflict> {
    let grid = snapshot_grid();
    let mut found = Vec::new();
    for state in ContextState::ALL {
        let mut seen: BTreeSet<Vec<RuleId>> = BTreeSet::new();
        for snapshot in &grid {
            let enabled: Vec<RuleId> = m
                .enabled_rules(state, snapshot)
                .iter()
                .map(|r| r.id)
                .collect();
            if enabled.len() >= 2 && seen.insert(enabled.clone()) {
                found.push(Conflict {
                    state,
                    rules: enabled,
                    witness: snapshot.clone(),
                });
            }
        }
    }
    found
}
