//! Command buffering, instruction synthesis, and a deterministic grid-world
//! executor that stands in for a robot policy behind the instruction boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lexicon::{levenshtein, RefinedWord};

/// Verb arity table and optional per-verb text templates.
///
/// Templates may use `{verb}` and `{object}` placeholders; both are
/// substituted in lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grammar {
    pub arity: BTreeMap<String, usize>,
    pub templates: BTreeMap<String, String>,
}

impl Default for Grammar {
    fn default() -> Self {
        let arity = [("GRAB", 1), ("DROP", 0), ("MOVE", 1), ("PUSH", 1), ("PLACE", 1)]
            .into_iter()
            .map(|(v, n)| (v.to_string(), n))
            .collect();
        Grammar { arity, templates: BTreeMap::new() }
    }
}

impl Grammar {
    pub fn is_verb(&self, word: &str) -> bool {
        self.arity.contains_key(word)
    }

    pub fn render(&self, verb: &str, objects: &[String]) -> String {
        let verb_lc = verb.to_lowercase();
        let object = objects.iter().map(|o| o.to_lowercase()).collect::<Vec<_>>().join(" ");
        match self.templates.get(verb) {
            Some(t) => t.replace("{verb}", &verb_lc).replace("{object}", &object),
            None if object.is_empty() => verb_lc,
            None => format!("{verb_lc} the {object}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("command buffer is empty")]
    EmptyBuffer,
    #[error("unknown verb {0:?}")]
    UnknownVerb(String),
    #[error("word {0:?} was rejected by refinement and cannot enter the command buffer")]
    RejectedWord(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandBuffer {
    pub words: Vec<RefinedWord>,
    pub started_ts: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: u64,
    pub text: String,
    pub words: Vec<String>,
    pub ts_ms: u64,
}

/// Accumulates refined words and synthesizes instructions, numbering them per session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandBuilder {
    grammar: Grammar,
    buffer: CommandBuffer,
    next_id: u64,
}

impl CommandBuilder {
    pub fn new(grammar: Grammar) -> Self {
        CommandBuilder { grammar, buffer: CommandBuffer::default(), next_id: 1 }
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn buffer(&self) -> &CommandBuffer {
        &self.buffer
    }

    pub fn clear(&mut self) {
        self.buffer = CommandBuffer::default();
    }

    /// Appends an accepted word; synthesizes automatically once the verb's arity is met.
    pub fn word_accepted(&mut self, word: RefinedWord, ts_ms: u64) -> Result<Option<Instruction>, CommandError> {
        if !word.accepted {
            return Err(CommandError::RejectedWord(word.raw));
        }
        if self.buffer.words.is_empty() {
            self.buffer.started_ts = Some(ts_ms);
        }
        self.buffer.words.push(word);
        let verb = &self.buffer.words[0].word;
        match self.grammar.arity.get(verb) {
            Some(&n) if self.buffer.words.len() > n => self.synthesize(ts_ms).map(Some),
            _ => Ok(None),
        }
    }

    /// Builds an instruction from the buffer and clears it. On error the buffer is kept.
    pub fn synthesize(&mut self, ts_ms: u64) -> Result<Instruction, CommandError> {
        let first = self.buffer.words.first().ok_or(CommandError::EmptyBuffer)?;
        if !self.grammar.is_verb(&first.word) {
            return Err(CommandError::UnknownVerb(first.word.clone()));
        }
        let words: Vec<String> = self.buffer.words.iter().map(|w| w.word.clone()).collect();
        let text = self.grammar.render(&words[0], &words[1..]);
        let id = self.next_id;
        self.next_id += 1;
        self.clear();
        Ok(Instruction { id, text, words, ts_ms })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub pos: [i64; 2],
    #[serde(default)]
    pub held: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gripper {
    pub pos: [i64; 2],
    #[serde(default)]
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: [i64; 2],
    pub gripper: Gripper,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scene: {0}")]
pub struct SceneError(pub String);

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        let err = |m: String| Err(SceneError(m));
        let [w, h] = self.bounds;
        if w <= 0 || h <= 0 {
            return err(format!("bounds {w}x{h} must be positive"));
        }
        let inside = |p: [i64; 2]| (0..w).contains(&p[0]) && (0..h).contains(&p[1]);
        if !inside(self.gripper.pos) {
            return err(format!("gripper at {:?} outside bounds", self.gripper.pos));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.name.is_empty() || !o.name.bytes().all(|b| b.is_ascii_uppercase()) {
                return err(format!("object name {:?} must be uppercase A-Z", o.name));
            }
            if self.objects[..i].iter().any(|p| p.name == o.name) {
                return err(format!("duplicate object {}", o.name));
            }
            if !inside(o.pos) {
                return err(format!("object {} at {:?} outside bounds", o.name, o.pos));
            }
        }
        let held: Vec<&SceneObject> = self.objects.iter().filter(|o| o.held).collect();
        match (held.as_slice(), &self.gripper.holding) {
            ([], None) => Ok(()),
            ([o], Some(name)) if &o.name == name && o.pos == self.gripper.pos => Ok(()),
            _ => err("held object and gripper disagree".into()),
        }
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    fn object_mut(&mut self, name: &str) -> &mut SceneObject {
        self.objects.iter_mut().find(|o| o.name == name).expect("resolved object exists")
    }

    /// Exact name, else the unique object within edit distance 1.
    pub fn resolve(&self, name: &str) -> Result<String, String> {
        if self.object(name).is_some() {
            return Ok(name.to_string());
        }
        let near: Vec<&SceneObject> = self.objects.iter().filter(|o| levenshtein(&o.name, name) <= 1).collect();
        match near.as_slice() {
            [o] => Ok(o.name.clone()),
            [] => Err(format!("unresolved object {name}: not in scene")),
            _ => Err(format!(
                "ambiguous object {name}: matches {}",
                near.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(", ")
            )),
        }
    }

    /// Walks the gripper (and anything it holds) to `target`; returns steps
    /// taken and the unit direction of the last move.
    fn walk_to(&mut self, target: [i64; 2]) -> (u64, [i64; 2]) {
        let from = self.gripper.pos;
        let dx = target[0] - from[0];
        let dy = target[1] - from[1];
        let steps = dx.unsigned_abs() + dy.unsigned_abs();
        let dir = if dy != 0 {
            [0, dy.signum()]
        } else if dx != 0 {
            [dx.signum(), 0]
        } else {
            [1, 0]
        };
        self.gripper.pos = target;
        if let Some(name) = self.gripper.holding.clone() {
            self.object_mut(&name).pos = target;
        }
        (steps, dir)
    }

    fn in_bounds(&self, p: [i64; 2]) -> bool {
        (0..self.bounds[0]).contains(&p[0]) && (0..self.bounds[1]).contains(&p[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    pub instruction_id: u64,
    pub success: bool,
    pub steps: u64,
    pub reason: String,
    pub final_scene: Scene,
}

pub const EXECUTOR_VERBS: [&str; 5] = ["grab", "drop", "move", "push", "place"];

/// Runs an instruction against a copy of `scene`. Failures are reported in
/// the result; the scene is returned unchanged on failure.
pub fn execute(scene: &Scene, instr: &Instruction) -> ExecResult {
    let mut world = scene.clone();
    let outcome = run(&mut world, &instr.text);
    match outcome {
        Ok(steps) => ExecResult { instruction_id: instr.id, success: true, steps, reason: String::new(), final_scene: world },
        Err(reason) => {
            ExecResult { instruction_id: instr.id, success: false, steps: 0, reason, final_scene: scene.clone() }
        }
    }
}

fn run(world: &mut Scene, text: &str) -> Result<u64, String> {
    world.validate().map_err(|e| e.to_string())?;
    let lower = text.to_lowercase();
    let mut tokens = lower.split_whitespace();
    let verb = tokens.next().ok_or_else(|| "empty instruction".to_string())?;
    if !EXECUTOR_VERBS.contains(&verb) {
        return Err(format!("invalid verb {verb:?}"));
    }
    let object: Vec<&str> = tokens.filter(|t| *t != "the").collect();
    let object = (!object.is_empty()).then(|| object.join(" ").to_uppercase());
    let target = match &object {
        Some(name) => Some(world.resolve(name)?),
        None => None,
    };
    let need_target = || target.clone().ok_or_else(|| format!("{verb} requires an object"));

    match verb {
        "grab" => {
            let name = need_target()?;
            if let Some(h) = &world.gripper.holding {
                return Err(format!("cannot grab {name}: already holding {h}"));
            }
            let pos = world.object(&name).expect("resolved").pos;
            let (steps, _) = world.walk_to(pos);
            world.gripper.holding = Some(name.clone());
            world.object_mut(&name).held = true;
            Ok(steps)
        }
        "drop" => {
            let held = world.gripper.holding.clone().ok_or_else(|| "cannot drop: holding nothing".to_string())?;
            if let Some(name) = &target {
                if *name != held {
                    return Err(format!("cannot drop {name}: holding {held}"));
                }
            }
            let pos = world.gripper.pos;
            let o = world.object_mut(&held);
            o.held = false;
            o.pos = pos;
            world.gripper.holding = None;
            Ok(0)
        }
        "move" => {
            let name = need_target()?;
            if world.gripper.holding.as_deref() == Some(name.as_str()) {
                return Err(format!("cannot move to {name}: it is being held"));
            }
            let pos = world.object(&name).expect("resolved").pos;
            Ok(world.walk_to(pos).0)
        }
        "push" => {
            let name = need_target()?;
            if world.gripper.holding.as_deref() == Some(name.as_str()) {
                return Err(format!("cannot push {name}: it is being held"));
            }
            let pos = world.object(&name).expect("resolved").pos;
            let (steps, dir) = world.walk_to(pos);
            let next = [pos[0] + dir[0], pos[1] + dir[1]];
            if !world.in_bounds(next) {
                return Err(format!("cannot push {name}: blocked by workspace bounds"));
            }
            world.object_mut(&name).pos = next;
            let (last, _) = world.walk_to(next);
            Ok(steps + last)
        }
        "place" => {
            let name = need_target()?;
            let held = world.gripper.holding.clone().ok_or_else(|| format!("cannot place at {name}: holding nothing"))?;
            if held == name {
                return Err(format!("cannot place {name} onto itself"));
            }
            let pos = world.object(&name).expect("resolved").pos;
            let (steps, _) = world.walk_to(pos);
            let o = world.object_mut(&held);
            o.held = false;
            o.pos = pos;
            world.gripper.holding = None;
            Ok(steps)
        }
        _ => unreachable!("verb checked above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(w: &str) -> RefinedWord {
        RefinedWord { raw: w.into(), word: w.into(), distance: 0, accepted: true, candidates: vec![w.into()] }
    }

    fn instr(text: &str) -> Instruction {
        Instruction { id: 7, text: text.into(), words: vec![], ts_ms: 0 }
    }

    fn scene() -> Scene {
        Scene {
            bounds: [10, 10],
            gripper: Gripper { pos: [0, 0], holding: None },
            objects: vec![
                SceneObject { name: "APPLE".into(), pos: [3, 0], held: false },
                SceneObject { name: "BOTTLE".into(), pos: [5, 4], held: false },
                SceneObject { name: "CUP".into(), pos: [9, 9], held: false },
            ],
        }
    }

    #[test]
    fn synthesizes_default_template() {
        let mut b = CommandBuilder::new(Grammar::default());
        assert_eq!(b.word_accepted(word("GRAB"), 10).unwrap(), None);
        assert_eq!(b.buffer().words.len(), 1);
        let i = b.word_accepted(word("APPLE"), 20).unwrap().unwrap();
        assert_eq!(i.text, "grab the apple");
        assert_eq!(i.words, ["GRAB", "APPLE"]);
        assert_eq!(i.id, 1);
        assert!(b.buffer().words.is_empty());
    }

    #[test]
    fn zero_arity_verbs_trigger_immediately() {
        let mut b = CommandBuilder::new(Grammar::default());
        let i = b.word_accepted(word("DROP"), 0).unwrap().unwrap();
        assert_eq!(i.text, "drop");
    }

    #[test]
    fn lone_verb_synthesizes_as_bare_text() {
        let mut b = CommandBuilder::new(Grammar::default());
        b.word_accepted(word("MOVE"), 0).unwrap();
        assert_eq!(b.synthesize(1).unwrap().text, "move");
    }

    #[test]
    fn unknown_verb_keeps_buffer() {
        let mut b = CommandBuilder::new(Grammar::default());
        assert_eq!(b.word_accepted(word("APPLE"), 0).unwrap(), None);
        assert_eq!(b.synthesize(1), Err(CommandError::UnknownVerb("APPLE".into())));
        assert_eq!(b.buffer().words.len(), 1);
        b.clear();
        assert_eq!(b.synthesize(1), Err(CommandError::EmptyBuffer));
    }

    #[test]
    fn rejected_words_refused() {
        let mut b = CommandBuilder::new(Grammar::default());
        let mut w = word("XQZW");
        w.accepted = false;
        assert!(matches!(b.word_accepted(w, 0), Err(CommandError::RejectedWord(_))));
        assert!(b.buffer().words.is_empty());
    }

    #[test]
    fn ids_increase_and_templates_apply() {
        let mut g = Grammar::default();
        g.templates.insert("PLACE".into(), "{verb} it next to the {object}".into());
        let mut b = CommandBuilder::new(g);
        b.word_accepted(word("DROP"), 0).unwrap();
        b.word_accepted(word("PLACE"), 0).unwrap();
        let i = b.word_accepted(word("CUP"), 0).unwrap().unwrap();
        assert_eq!(i.id, 2);
        assert_eq!(i.text, "place it next to the cup");
    }

    #[test]
    fn grab_walks_manhattan_path() {
        let r = execute(&scene(), &instr("grab the apple"));
        assert!(r.success, "{}", r.reason);
        assert_eq!(r.steps, 3);
        assert_eq!(r.final_scene.gripper.holding.as_deref(), Some("APPLE"));
        assert_eq!(r.final_scene.gripper.pos, [3, 0]);
        assert!(r.reason.is_empty());
        assert_eq!(r.instruction_id, 7);
    }

    #[test]
    fn grab_missing_object_fails() {
        let mut s = scene();
        s.objects.remove(0);
        let r = execute(&s, &instr("grab the apple"));
        assert!(!r.success);
        assert!(r.reason.contains("unresolved object"), "{}", r.reason);
        assert_eq!(r.final_scene, s);
    }

    #[test]
    fn drop_places_at_gripper() {
        let held = execute(&scene(), &instr("grab the apple")).final_scene;
        let r = execute(&held, &instr("drop"));
        assert!(r.success);
        assert_eq!(r.steps, 0);
        let apple = r.final_scene.object("APPLE").unwrap();
        assert_eq!(apple.pos, r.final_scene.gripper.pos);
        assert!(!apple.held);
        assert_eq!(r.final_scene.gripper.holding, None);
        let again = execute(&r.final_scene, &instr("drop"));
        assert!(!again.success);
    }

    #[test]
    fn fuzzy_and_ambiguous_resolution() {
        let r = execute(&scene(), &instr("grab the aple"));
        assert!(r.success);
        let mut s = scene();
        s.objects.push(SceneObject { name: "CAP".into(), pos: [1, 1], held: false });
        let r = execute(&s, &instr("grab the cop"));
        assert!(!r.success);
        assert!(r.reason.contains("ambiguous"));
    }

    #[test]
    fn push_and_place() {
        let r = execute(&scene(), &instr("push the apple"));
        assert!(r.success);
        // Moving along +x, so the apple slides one cell further.
        assert_eq!(r.final_scene.object("APPLE").unwrap().pos, [4, 0]);
        assert_eq!(r.steps, 4);
        let r = execute(&scene(), &instr("push the cup"));
        assert!(!r.success, "cup is in the corner");

        let holding = execute(&scene(), &instr("grab the apple")).final_scene;
        let r = execute(&holding, &instr("place the bottle"));
        assert!(r.success);
        assert_eq!(r.steps, 2 + 4);
        assert_eq!(r.final_scene.object("APPLE").unwrap().pos, [5, 4]);
        assert!(!execute(&holding, &instr("place the apple")).success);
        assert!(!execute(&scene(), &instr("place the bottle")).success);
    }

    #[test]
    fn invalid_verbs_and_arity() {
        assert!(!execute(&scene(), &instr("throw the apple")).success);
        assert!(!execute(&scene(), &instr("grab")).success);
        assert!(!execute(&scene(), &instr("")).success);
    }

    #[test]
    fn move_is_motion_only() {
        let r = execute(&scene(), &instr("move the bottle"));
        assert!(r.success);
        assert_eq!(r.steps, 9);
        assert_eq!(r.final_scene.gripper.pos, [5, 4]);
        let r2 = execute(&r.final_scene, &instr("move the bottle"));
        assert_eq!(r2.steps, 0);
    }

    #[test]
    fn scene_validation() {
        let mut s = scene();
        s.objects[1].name = "APPLE".into();
        assert!(s.validate().is_err());
        let mut s = scene();
        s.objects[0].pos = [10, 0];
        assert!(s.validate().is_err());
        let mut s = scene();
        s.objects[0].held = true;
        assert!(s.validate().is_err());
        assert!(scene().validate().is_ok());
    }

    #[test]
    fn execution_is_deterministic_and_conserves_objects() {
        let script = ["grab the apple", "move the cup", "drop", "push the bottle", "grab the bottle", "place the cup"];
        let mut s = scene();
        for text in script {
            let a = execute(&s, &instr(text));
            let b = execute(&s, &instr(text));
            assert_eq!(a, b);
            assert_eq!(a.final_scene.objects.len(), s.objects.len());
            assert!(a.final_scene.validate().is_ok());
            s = a.final_scene;
        }
    }
}
