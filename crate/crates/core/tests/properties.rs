mod common;

use proptest::prelude::*;
use reflectgen::grpo::{comp_reward, gen_reward, group_advantages, kl_token};
use reflectgen::introspect::{run_episode, EpisodeConfig, EpisodeMode, Verdict};
use reflectgen::policy::{cfg_combine, text_vocab, read_checkpoint, write_checkpoint, PolicyParams};
use reflectgen::world::{
    edit_scores, gen_prompt, parse_surface, qa_score, render_reason, satisfied_count, surface_of, Category, EditTask,
    GridImage, PromptSpec, IMAGE_VOCAB,
};

fn category() -> impl Strategy<Value = Category> {
    (0..Category::ALL.len()).prop_map(|i| Category::ALL[i])
}

fn image() -> impl Strategy<Value = GridImage> {
    proptest::array::uniform16(0..IMAGE_VOCAB as u8).prop_map(|ids| GridImage::from_ids(&ids).unwrap())
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn qa_is_the_satisfied_fraction(c in category(), seed in any::<u64>(), g in image()) {
        let p = gen_prompt(c, seed);
        let qa = qa_score(&p, &g);
        prop_assert!((0.0..=1.0).contains(&qa));
        prop_assert_eq!(qa, satisfied_count(&p, &g) as f64 / p.tuples.len() as f64);
        prop_assert_eq!(render_reason(&p, &g).is_empty(), qa == 1.0);
    }

    #[test]
    fn surfaces_parse_back(c in category(), seed in any::<u64>()) {
        let p = gen_prompt(c, seed);
        prop_assert!(c.admits(&p.tuples));
        prop_assert_eq!(surface_of(&p.tuples), p.surface.clone());
        prop_assert_eq!(parse_surface(&p.surface).unwrap(), p.tuples.clone());
        let rebuilt = PromptSpec::from_surface(p.id, c, &p.surface).unwrap();
        prop_assert_eq!(rebuilt, p);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), scale in 0.0f64..5.0) {
        let p = common::random_params(seed, scale);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        let q: PolicyParams = read_checkpoint(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(q, p);
    }

    #[test]
    fn rewards_stay_in_range(qa in proptest::collection::vec(0.0f64..=1.0, 1..=3), se in proptest::collection::vec(any::<bool>(), 3)) {
        let t = 3;
        let k = qa.len();
        let g = gen_reward(&qa, t).unwrap();
        let c = comp_reward(&qa, &se[..k], t).unwrap();
        prop_assert!((0.0..=t as f64 + 1e-12).contains(&g));
        prop_assert!((0.0..=t as f64 + 1e-12).contains(&c));
        // A perfect final round is worth at least as much as any other.
        let mut best = qa.clone();
        best[k - 1] = 1.0;
        prop_assert!(gen_reward(&best, t).unwrap() >= g);
    }

    #[test]
    fn advantages_are_centered(xs in proptest::collection::vec(-100.0f64..100.0, 2..=16)) {
        let a = group_advantages(&xs, 1e-8);
        prop_assert_eq!(a.len(), xs.len());
        prop_assert!(a.iter().sum::<f64>().abs() < 1e-9);
        // Order is preserved.
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if xs[i] < xs[j] {
                    prop_assert!(a[i] <= a[j]);
                }
            }
        }
    }

    #[test]
    fn kl_is_nonnegative(new in -30.0f64..0.0, log_r in -20.0f64..20.0) {
        prop_assert!(kl_token(&[new], &[new + log_r])[0] >= 0.0);
    }

    #[test]
    fn unit_guidance_is_the_conditional(cond in proptest::collection::vec(-10.0f64..10.0, 13), uncond in proptest::collection::vec(-10.0f64..10.0, 13)) {
        prop_assert_eq!(cfg_combine(&cond, &uncond, 1.0), cond.clone());
        prop_assert_eq!(cfg_combine(&cond, &uncond, 0.0), uncond);
    }

    #[test]
    fn edit_scores_bound_reference_and_copy(seed in any::<u64>()) {
        let task = EditTask::generate(seed);
        prop_assert_eq!(edit_scores(&task.source, &task.instr, &task.reference).unwrap(), (1.0, 1.0));
        let (flw, psv) = edit_scores(&task.source, &task.instr, &task.source).unwrap();
        prop_assert!((0.0..=1.0).contains(&flw));
        prop_assert_eq!(psv, 1.0);
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn episodes_respect_the_round_cap(c in category(), seed in any::<u64>(), cap in 1usize..=4, scale in 0.0f64..1.5) {
        let p = common::random_params(seed ^ 0x55, scale);
        let prompt = gen_prompt(c, seed);
        let config = EpisodeConfig { rounds: cap, ..EpisodeConfig::default() };
        let t = run_episode(&p, &prompt, &config, seed, EpisodeMode::Rollout);
        prop_assert!((1..=cap).contains(&t.k()));
        prop_assert!(t.rounds[..t.k() - 1].iter().all(|r| r.verdict == Verdict::No));
        if t.k() < cap {
            prop_assert_eq!(t.rounds.last().unwrap().verdict, Verdict::Yes);
        }
        for r in &t.rounds {
            prop_assert_eq!(r.qa, Some(qa_score(&prompt, &r.image)));
            prop_assert_eq!(r.verdict == Verdict::Yes, r.text_tokens[0] == text_vocab::YES);
            prop_assert_eq!(r.text_tokens.last(), Some(&text_vocab::EOS));
            prop_assert_eq!(r.reason.len(), r.text_tokens.len() - 2);
        }
    }
}
