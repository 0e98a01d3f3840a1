use serde::{Deserialize, Serialize};

use super::{BtError, SkillSpec, SkillState, TickStatus, World};

/// Nested tree description as written in binding configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeSpec {
    Sequence(Vec<NodeSpec>),
    Fallback(Vec<NodeSpec>),
    Action(SkillSpec),
    Condition(String),
}

impl NodeSpec {
    /// Pre-order walk over every skill in the tree.
    pub fn skills(&self) -> Vec<&SkillSpec> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            match n {
                NodeSpec::Sequence(c) | NodeSpec::Fallback(c) => stack.extend(c.iter().rev()),
                NodeSpec::Action(s) => out.push(s),
                NodeSpec::Condition(_) => {}
            }
        }
        out
    }
}

/// One Action that reached a terminal status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub skill: String,
    pub status: TickStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Composite {
    Sequence,
    Fallback,
}

#[derive(Debug, Clone)]
enum Kind {
    Composite { kind: Composite, children: Vec<usize>, cursor: usize },
    Action { skill: SkillSpec, started: bool },
    Condition(String),
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<usize>,
    kind: Kind,
}

/// A tree instance with its execution memory. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct Tree {
    id: String,
    nodes: Vec<Node>,
    last_ticked: usize,
    records: Vec<SkillRecord>,
}

impl Tree {
    pub fn build(id: &str, spec: &NodeSpec) -> Result<Self, BtError> {
        let mut nodes = Vec::new();
        add(&mut nodes, spec, None).map_err(|message| BtError::InvalidTree { tree: id.to_string(), message })?;
        Ok(Self { id: id.to_string(), nodes, last_ticked: 0, records: Vec::new() })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Terminal skills in completion order since the tree was built.
    pub fn records(&self) -> &[SkillRecord] {
        &self.records
    }

    pub fn tick<W: World + ?Sized>(&mut self, world: &mut W) -> TickStatus {
        self.tick_node(0, world)
    }

    /// Forget all execution memory.
    pub fn reset(&mut self) {
        for n in &mut self.nodes {
            match &mut n.kind {
                Kind::Composite { cursor, .. } => *cursor = 0,
                Kind::Action { started, .. } => *started = false,
                Kind::Condition(_) => {}
            }
        }
    }

    /// Slash-separated labels from the root to the most recently ticked
    /// node, e.g. `sequence/1:set_gripper(1)`.
    pub fn node_path(&self) -> String {
        let mut chain = vec![self.last_ticked];
        while let Some(p) = self.nodes[*chain.last().unwrap()].parent {
            chain.push(p);
        }
        chain.reverse();
        let mut parts = Vec::with_capacity(chain.len());
        for (depth, id) in chain.iter().enumerate() {
            let label = self.label(*id);
            if depth == 0 {
                parts.push(label);
            } else {
                let Kind::Composite { children, .. } = &self.nodes[chain[depth - 1]].kind else { unreachable!() };
                let pos = children.iter().position(|c| c == id).unwrap();
                parts.push(format!("{pos}:{label}"));
            }
        }
        parts.join("/")
    }

    fn label(&self, id: usize) -> String {
        match &self.nodes[id].kind {
            Kind::Composite { kind: Composite::Sequence, .. } => "sequence".into(),
            Kind::Composite { kind: Composite::Fallback, .. } => "fallback".into(),
            Kind::Action { skill, .. } => skill.to_string(),
            Kind::Condition(p) => format!("condition({p})"),
        }
    }

    fn tick_node<W: World + ?Sized>(&mut self, id: usize, world: &mut W) -> TickStatus {
        self.last_ticked = id;
        match &self.nodes[id].kind {
            Kind::Composite { kind, .. } => {
                let proceed = if *kind == Composite::Sequence { TickStatus::Success } else { TickStatus::Failure };
                loop {
                    let Kind::Composite { children, cursor, .. } = &self.nodes[id].kind else { unreachable!() };
                    let Some(&child) = children.get(*cursor) else {
                        self.set_cursor(id, 0);
                        return proceed;
                    };
                    let status = self.tick_node(child, world);
                    if status == proceed {
                        self.set_cursor(id, self.cursor(id) + 1);
                        continue;
                    }
                    if status != TickStatus::Running {
                        self.set_cursor(id, 0);
                    }
                    return status;
                }
            }
            Kind::Condition(p) => match world.condition(p) {
                Ok(true) => TickStatus::Success,
                Ok(false) => TickStatus::Failure,
                Err(e) => {
                    let skill = format!("condition({p})");
                    self.records.push(SkillRecord { skill, status: TickStatus::Failure, diagnostic: Some(e) });
                    TickStatus::Failure
                }
            },
            Kind::Action { skill, started } => {
                let skill = skill.clone();
                if !*started {
                    if let Err(e) = world.start_skill(&skill) {
                        self.finish(&skill, TickStatus::Failure, Some(e));
                        return TickStatus::Failure;
                    }
                    self.set_started(id, true);
                }
                match world.poll_skill(&skill) {
                    SkillState::InProgress => TickStatus::Running,
                    SkillState::Done => {
                        self.set_started(id, false);
                        self.finish(&skill, TickStatus::Success, None);
                        TickStatus::Success
                    }
                    SkillState::Fault(e) => {
                        self.set_started(id, false);
                        self.finish(&skill, TickStatus::Failure, Some(e));
                        TickStatus::Failure
                    }
                }
            }
        }
    }

    fn finish(&mut self, skill: &SkillSpec, status: TickStatus, diagnostic: Option<String>) {
        self.records.push(SkillRecord { skill: skill.to_string(), status, diagnostic });
    }

    fn cursor(&self, id: usize) -> usize {
        match &self.nodes[id].kind {
            Kind::Composite { cursor, .. } => *cursor,
            _ => 0,
        }
    }

    fn set_cursor(&mut self, id: usize, value: usize) {
        if let Kind::Composite { cursor, .. } = &mut self.nodes[id].kind {
            *cursor = value;
        }
    }

    fn set_started(&mut self, id: usize, value: bool) {
        if let Kind::Action { started, .. } = &mut self.nodes[id].kind {
            *started = value;
        }
    }
}

fn add(nodes: &mut Vec<Node>, spec: &NodeSpec, parent: Option<usize>) -> Result<usize, String> {
    let id = nodes.len();
    match spec {
        NodeSpec::Sequence(children) | NodeSpec::Fallback(children) => {
            if children.is_empty() {
                return Err("composite node without children".into());
            }
            let kind = if matches!(spec, NodeSpec::Sequence(_)) { Composite::Sequence } else { Composite::Fallback };
            nodes.push(Node { parent, kind: Kind::Composite { kind, children: Vec::new(), cursor: 0 } });
            let ids = children.iter().map(|c| add(nodes, c, Some(id))).collect::<Result<Vec<_>, _>>()?;
            if let Kind::Composite { children, .. } = &mut nodes[id].kind {
                *children = ids;
            }
        }
        NodeSpec::Action(skill) => {
            skill.validate()?;
            nodes.push(Node { parent, kind: Kind::Action { skill: skill.clone(), started: false } });
        }
        NodeSpec::Condition(p) => {
            if p.is_empty() {
                return Err("empty condition id".into());
            }
            nodes.push(Node { parent, kind: Kind::Condition(p.clone()) });
        }
    }
    Ok(id)
}
