use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::world::{gen_prompt, jsonl, Category, EditTask, PromptSpec};

/// Fixed held-out prompts (grouped by category) and editing tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSuite {
    pub prompts: Vec<PromptSpec>,
    pub edit_tasks: Vec<EditTask>,
}

impl EvalSuite {
    /// `per_category` prompts of each category and `edit_tasks` tasks, all
    /// drawn from the evaluation seed streams.
    pub fn generate(per_category: usize, edit_tasks: usize, seed: u64) -> Self {
        let mut prompts = Vec::with_capacity(per_category * Category::ALL.len());
        for c in Category::ALL {
            for i in 0..per_category {
                let s = rng::derive(seed, &[rng::stream::EVAL_PROMPTS, c.index() as u64, i as u64]);
                prompts.push(gen_prompt(c, s));
            }
        }
        let edit_tasks = (0..edit_tasks)
            .map(|i| EditTask::generate(rng::derive(seed, &[rng::stream::EDIT_EVAL, i as u64])))
            .collect();
        Self { prompts, edit_tasks }
    }

    pub fn default_suite() -> Self {
        Self::generate(100, 300, 0)
    }

    /// Write `prompts.jsonl` and `edits.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        jsonl::write(&dir.join("prompts.jsonl"), &self.prompts)?;
        jsonl::write(&dir.join("edits.jsonl"), &self.edit_tasks)
    }

    /// Read a suite directory; `edits.jsonl` may be absent.
    pub fn load(dir: &Path) -> Result<Self> {
        let prompts: Vec<PromptSpec> = jsonl::read(&dir.join("prompts.jsonl"))?;
        for p in &prompts {
            let rebuilt = PromptSpec::new(p.id, p.category, p.tuples.clone())?;
            if rebuilt.surface != p.surface {
                return Err(Error::InvalidInput(format!("prompt {}: surface does not match tuples", p.id)));
            }
        }
        let edits = dir.join("edits.jsonl");
        let edit_tasks = if edits.exists() { jsonl::read(&edits)? } else { Vec::new() };
        Ok(Self { prompts, edit_tasks })
    }

    pub fn by_category(&self, c: Category) -> impl Iterator<Item = &PromptSpec> {
        self.prompts.iter().filter(move |p| p.category == c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_files_round_trip() {
        let s = EvalSuite::generate(3, 4, 2);
        assert_eq!(s.prompts.len(), 18);
        assert!(Category::ALL.iter().all(|&c| s.by_category(c).count() == 3));
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        assert_eq!(EvalSuite::load(dir.path()).unwrap(), s);
        std::fs::remove_file(dir.path().join("edits.jsonl")).unwrap();
        assert!(EvalSuite::load(dir.path()).unwrap().edit_tasks.is_empty());
    }

    #[test]
    fn eval_prompts_do_not_depend_on_other_categories() {
        let a = EvalSuite::generate(2, 0, 5);
        let b = EvalSuite::generate(4, 0, 5);
        for c in Category::ALL {
            let x: Vec<_> = a.by_category(c).collect();
            let y: Vec<_> = b.by_category(c).take(2).collect();
            assert_eq!(x, y);
        }
    }
}
