//! The synthetic compositional domain and its exact oracle.

mod edit;
mod oracle;
mod prompt;
mod tokens;

pub mod jsonl;

pub use edit::{
    apply_edit, cell_roles, desired_token, edit_scores, gen_edit_task, random_source, CellRole, EditInstruction,
    EditKind, EditOp,
};
pub use oracle::{
    check_tuple, qa_score, render_reason, satisfied_count, FailureMode, ReasonCode, ReasonItem, ReasonText,
};
pub use prompt::{gen_prompt, parse_surface, surface_of, Category, PromptSpec, SemanticTuple, SpatialRelation};
pub use tokens::{
    col_of, row_of, CellToken, Color, GridImage, Object, Shape, GRID_CELLS, GRID_SIDE, IMAGE_VOCAB, NUM_COLORS,
    NUM_OBJECTS, NUM_SHAPES,
};

use serde::{Deserialize, Serialize};

/// One line of an edit-suite file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTask {
    pub source: GridImage,
    pub instr: EditInstruction,
    pub reference: GridImage,
}

impl EditTask {
    pub fn generate(seed: u64) -> Self {
        let (source, instr, reference) = gen_edit_task(seed);
        Self { source, instr, reference }
    }
}
