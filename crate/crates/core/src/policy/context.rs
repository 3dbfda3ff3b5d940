use serde::{Deserialize, Serialize};

use crate::world::{EditInstruction, GridImage, PromptSpec, ReasonCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    Image,
    Text,
}

/// Text-head vocabulary: verdicts, one token per reason code, end of segment.
pub mod text_vocab {
    use crate::world::ReasonCode;

    pub const YES: u8 = 0;
    pub const NO: u8 = 1;
    pub const FIRST_REASON: u8 = 2;
    pub const EOS: u8 = FIRST_REASON + ReasonCode::COUNT as u8;
    pub const SIZE: usize = EOS as usize + 1;

    pub fn reason(code: ReasonCode) -> u8 {
        FIRST_REASON + code.index() as u8
    }

    pub fn as_reason(tok: u8) -> Option<ReasonCode> {
        if (FIRST_REASON..EOS).contains(&tok) {
            ReasonCode::from_index((tok - FIRST_REASON) as usize)
        } else {
            None
        }
    }

    pub fn is_reason(tok: u8) -> bool {
        (FIRST_REASON..EOS).contains(&tok)
    }
}

/// What the generation is conditioned on besides earlier rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Prompt(PromptSpec),
    Edit { source: GridImage, instr: EditInstruction },
}

/// An earlier rejected round: its image, the implied `NO`, and its reason tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorRound {
    pub image: GridImage,
    pub reason: Vec<ReasonCode>,
}

/// Everything a segment is generated from, except the tokens already
/// emitted within the segment (those are passed as a prefix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub condition: Condition,
    /// The text prompt (or edit instruction) is replaced by padding.
    pub pad: bool,
    pub prior_rounds: Vec<PriorRound>,
    /// Image under self-evaluation; required by the text head.
    pub subject: Option<GridImage>,
    pub head: Head,
}

impl Context {
    pub fn image(prompt: PromptSpec, prior_rounds: Vec<PriorRound>) -> Self {
        Self {
            condition: Condition::Prompt(prompt),
            pad: false,
            prior_rounds,
            subject: None,
            head: Head::Image,
        }
    }

    pub fn text(prompt: PromptSpec, prior_rounds: Vec<PriorRound>, subject: GridImage) -> Self {
        Self {
            condition: Condition::Prompt(prompt),
            pad: false,
            prior_rounds,
            subject: Some(subject),
            head: Head::Text,
        }
    }

    pub fn edit(source: GridImage, instr: EditInstruction) -> Self {
        Self {
            condition: Condition::Edit { source, instr },
            pad: false,
            prior_rounds: Vec::new(),
            subject: None,
            head: Head::Image,
        }
    }

    pub fn padded(mut self) -> Self {
        self.pad = true;
        self
    }

    pub fn prompt(&self) -> Option<&PromptSpec> {
        match &self.condition {
            Condition::Prompt(p) => Some(p),
            Condition::Edit { .. } => None,
        }
    }
}
