//! Supervised stage: the scored corpus, the three task streams
//! (text-to-image, self-evaluation, regeneration), the mixed sampler, the
//! teacher-forced loss, and the editing-pair filter.

mod corpus;
mod edit;
mod loss;
mod sampler;
mod tasks;

pub use corpus::{build_corpus, random_image, synthesize, CorpusEntry, GeneratorMix, ScoredImage};
pub use edit::{build_edit_examples, filter_edit_pairs, gen_edit_pairs, EditPair};
pub use loss::{sft_batch_loss_grad, sft_loss_grad};
pub use sampler::{mixed_sampler, MixConfig, MixedSampler};
pub use tasks::{build_task1, build_task2, build_task3, build_tasks, SftExample, SftTarget, SftTask, Thresholds};
