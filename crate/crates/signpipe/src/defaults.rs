//! Built-in task vocabulary and tabletop scene used when no files are given.

use signpipe_core::executor::{Gripper, SceneObject};
use signpipe_core::{Dictionary, Scene};

pub const DEFAULT_WORDS: [&str; 12] =
    ["GRAB", "DROP", "MOVE", "PUSH", "PLACE", "APPLE", "BOTTLE", "CUP", "BOX", "BALL", "BLOCK", "PEN"];

pub fn dictionary() -> Dictionary {
    Dictionary::new("builtin", DEFAULT_WORDS.iter().map(|w| w.to_string()).collect()).expect("built-in words are valid")
}

/// 10x10 table, gripper in the corner.
pub fn scene() -> Scene {
    let objects = [
        ("APPLE", [3, 0]),
        ("BOTTLE", [5, 2]),
        ("CUP", [1, 4]),
        ("BOX", [7, 7]),
        ("BALL", [2, 6]),
        ("BLOCK", [6, 5]),
        ("PEN", [8, 1]),
    ];
    Scene {
        bounds: [10, 10],
        gripper: Gripper { pos: [0, 0], holding: None },
        objects: objects.iter().map(|(n, p)| SceneObject { name: n.to_string(), pos: *p, held: false }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        assert_eq!(dictionary().words().len(), DEFAULT_WORDS.len());
        scene().validate().unwrap();
    }
}
