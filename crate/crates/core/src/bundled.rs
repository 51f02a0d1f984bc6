//! Scenes shipped with the crate, also addressable by name from the CLI.

use crate::scene::{load_scene, Scene};

macro_rules! bundled {
    ($file:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenes/bundled/", $file))
    };
}

/// Single open room without furniture or clutter.
pub const EMPTY_ROOM: &str = bundled!("empty_room.json");
/// Narrow corridor plugged by two pots; the long way round is blocked only by a toy.
pub const BLOCKED_CORRIDOR: &str = bundled!("blocked_corridor.json");
/// Same layout with a table in the corridor and a free way round.
pub const HEAVY_BLOCKER: &str = bundled!("heavy_blocker.json");
/// Generated four-room apartment with furniture and doors.
pub const FOUR_ROOM: &str = bundled!("four_room.json");

pub const NAMES: [&str; 4] = ["empty_room", "blocked_corridor", "heavy_blocker", "four_room"];

pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "empty_room" => Some(EMPTY_ROOM),
        "blocked_corridor" => Some(BLOCKED_CORRIDOR),
        "heavy_blocker" => Some(HEAVY_BLOCKER),
        "four_room" => Some(FOUR_ROOM),
        _ => None,
    }
}

/// Loads a bundled scene by name.
pub fn scene(name: &str) -> Option<Scene> {
    text(name).map(|t| load_scene(t).expect("bundled scenes are valid"))
}
