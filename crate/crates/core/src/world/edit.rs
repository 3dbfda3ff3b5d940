use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tokens::{CellToken, Color, GridImage, Object, Shape, GRID_CELLS};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum EditOp {
    /// Every cell holding `target` becomes `(target.shape, color)`.
    Recolor { target: Object, color: Color },
    Add { object: Object, cell: usize },
    /// Every cell holding `target` becomes empty.
    Remove { target: Object },
    /// The first (row-major) cell holding `target` moves to `to`.
    Move { target: Object, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditKind {
    Recolor,
    Add,
    Remove,
    Move,
}

impl EditKind {
    pub const ALL: [EditKind; 4] = [EditKind::Recolor, EditKind::Add, EditKind::Remove, EditKind::Move];
}

impl EditOp {
    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::Recolor { .. } => EditKind::Recolor,
            EditOp::Add { .. } => EditKind::Add,
            EditOp::Remove { .. } => EditKind::Remove,
            EditOp::Move { .. } => EditKind::Move,
        }
    }

    pub fn surface(&self) -> String {
        match self {
            EditOp::Recolor { target, color } => format!("recolor {target} {}", color.name()),
            EditOp::Add { object, cell } => format!("add {object} {cell}"),
            EditOp::Remove { target } => format!("remove {target}"),
            EditOp::Move { target, to } => format!("move {target} {to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditInstruction {
    #[serde(flatten)]
    pub op: EditOp,
    pub surface: String,
}

impl From<EditOp> for EditInstruction {
    fn from(op: EditOp) -> Self {
        Self { surface: op.surface(), op }
    }
}

/// What a cell is supposed to become under an applicable instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRole {
    Untouched,
    RecolorTarget,
    AddDestination,
    RemoveTarget,
    MoveSource,
    MoveDestination,
}

/// Per-cell roles. The intended-edit mask is every cell whose role is not `Untouched`.
pub fn cell_roles(source: &GridImage, instr: &EditInstruction) -> Result<[CellRole; GRID_CELLS]> {
    let mut roles = [CellRole::Untouched; GRID_CELLS];
    match instr.op {
        EditOp::Recolor { target, color } => {
            if color == target.color {
                return Err(Error::InvalidEdit(format!("`{}` does not change color", instr.surface)));
            }
            let mut any = false;
            for i in source.positions_of(target) {
                roles[i] = CellRole::RecolorTarget;
                any = true;
            }
            if !any {
                return Err(Error::InvalidEdit(format!("no {target} to recolor")));
            }
        }
        EditOp::Add { cell, .. } => {
            if cell >= GRID_CELLS {
                return Err(Error::InvalidEdit(format!("cell {cell} outside the grid")));
            }
            roles[cell] = CellRole::AddDestination;
        }
        EditOp::Remove { target } => {
            let mut any = false;
            for i in source.positions_of(target) {
                roles[i] = CellRole::RemoveTarget;
                any = true;
            }
            if !any {
                return Err(Error::InvalidEdit(format!("no {target} to remove")));
            }
        }
        EditOp::Move { target, to } => {
            let from = source
                .positions_of(target)
                .next()
                .ok_or_else(|| Error::InvalidEdit(format!("no {target} to move")))?;
            if to >= GRID_CELLS || to == from {
                return Err(Error::InvalidEdit(format!("bad move destination {to}")));
            }
            roles[from] = CellRole::MoveSource;
            roles[to] = CellRole::MoveDestination;
        }
    }
    Ok(roles)
}

/// The token a masked cell should hold after the edit, if any.
pub fn desired_token(role: CellRole, op: &EditOp) -> Option<CellToken> {
    match (role, *op) {
        (CellRole::RecolorTarget, EditOp::Recolor { target, color }) => {
            Some(Object::new(target.shape, color).token())
        }
        (CellRole::AddDestination, EditOp::Add { object, .. }) => Some(object.token()),
        (CellRole::RemoveTarget, _) | (CellRole::MoveSource, _) => Some(CellToken::EMPTY),
        (CellRole::MoveDestination, EditOp::Move { target, .. }) => Some(target.token()),
        _ => None,
    }
}

/// Apply an instruction exactly.
pub fn apply_edit(source: &GridImage, instr: &EditInstruction) -> Result<GridImage> {
    let roles = cell_roles(source, instr)?;
    let mut out = *source;
    for (i, role) in roles.iter().enumerate() {
        if let Some(t) = desired_token(*role, &instr.op) {
            out.set(i, t);
        }
    }
    Ok(out)
}

/// `(following, preserving)` scores of `output` as an edit of `source`.
///
/// Following is the fraction of masked cells holding their intended token.
/// Preserving is the fraction of cells outside the mask left unchanged.
pub fn edit_scores(source: &GridImage, instr: &EditInstruction, output: &GridImage) -> Result<(f64, f64)> {
    let roles = cell_roles(source, instr)?;
    let (mut in_mask, mut followed, mut outside, mut kept) = (0usize, 0usize, 0usize, 0usize);
    for (i, role) in roles.iter().enumerate() {
        match desired_token(*role, &instr.op) {
            Some(t) => {
                in_mask += 1;
                followed += (output.get(i) == t) as usize;
            }
            None => {
                outside += 1;
                kept += (output.get(i) == source.get(i)) as usize;
            }
        }
    }
    let flw = followed as f64 / in_mask as f64;
    let psv = if outside == 0 { 1.0 } else { kept as f64 / outside as f64 };
    Ok((flw, psv))
}

fn random_object(r: &mut rng::Rng) -> Object {
    Object::new(*Shape::ALL.choose(r).unwrap(), *Color::ALL.choose(r).unwrap())
}

/// A random source grid with 3 to 6 objects.
pub fn random_source(r: &mut rng::Rng) -> GridImage {
    let mut g = GridImage::empty();
    let n = r.random_range(3..=6);
    let mut cells: Vec<usize> = (0..GRID_CELLS).collect();
    cells.shuffle(r);
    for &i in &cells[..n] {
        g.set(i, random_object(r).token());
    }
    g
}

/// Draw `(source, instruction, reference)` where the reference is the exact edit.
pub fn gen_edit_task(seed: u64) -> (GridImage, EditInstruction, GridImage) {
    let mut r = rng::rng(seed);
    let source = random_source(&mut r);
    let present: Vec<Object> = source.cells().iter().filter_map(|c| c.object()).collect();
    let empties: Vec<usize> = (0..GRID_CELLS).filter(|&i| source.get(i).is_empty()).collect();
    let op = match r.random_range(0..4) {
        0 => {
            let target = *present.choose(&mut r).unwrap();
            let others: Vec<Color> = Color::ALL.into_iter().filter(|&c| c != target.color).collect();
            EditOp::Recolor { target, color: *others.choose(&mut r).unwrap() }
        }
        1 => EditOp::Add { object: random_object(&mut r), cell: *empties.choose(&mut r).unwrap() },
        2 => EditOp::Remove { target: *present.choose(&mut r).unwrap() },
        _ => EditOp::Move {
            target: *present.choose(&mut r).unwrap(),
            to: *empties.choose(&mut r).unwrap(),
        },
    };
    let instr = EditInstruction::from(op);
    let reference = apply_edit(&source, &instr).expect("generated instruction is applicable");
    (source, instr, reference)
}
