use rayon::prelude::*;

use super::tasks::SftExample;
use crate::policy::{accumulate_segment_grad, PolicyParams, WeightedSegment};

/// Negative log-likelihood of the target segment under the conditional
/// (unguided) policy, and its gradient.
pub fn sft_loss_grad(params: &PolicyParams, example: &SftExample) -> (f64, PolicyParams) {
    let mut grad = params.zeros_like();
    let nll = accumulate_example(params, example, &mut grad);
    (nll, grad)
}

fn accumulate_example(params: &PolicyParams, example: &SftExample, grad: &mut PolicyParams) -> f64 {
    let tokens = example.target.tokens();
    let weights = vec![-1.0; tokens.len()];
    let seg = WeightedSegment { ctx: &example.context, tokens: &tokens, cfg_scale: 1.0, weights: &weights };
    -accumulate_segment_grad(params, &seg, grad).iter().sum::<f64>()
}

/// Summed NLL and gradient over a batch. Per-example terms are computed in
/// parallel and added in batch order.
pub fn sft_batch_loss_grad(params: &PolicyParams, batch: &[SftExample]) -> (f64, PolicyParams) {
    let parts: Vec<(f64, PolicyParams)> = batch.par_iter().map(|ex| sft_loss_grad(params, ex)).collect();
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grad.add_scaled(g, 1.0);
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Context, FeatureConfig};
    use crate::sft::tasks::{SftTarget, SftTask};
    use crate::world::{gen_prompt, Category, GridImage};

    #[test]
    fn zero_params_give_uniform_nll() {
        let p = PolicyParams::zeros(FeatureConfig::default());
        let prompt = gen_prompt(Category::Counting, 1);
        let img = SftExample {
            task: SftTask::I,
            context: Context::image(prompt.clone(), Vec::new()),
            target: SftTarget::Image(GridImage::empty()),
        };
        let (nll, _) = sft_loss_grad(&p, &img);
        assert!((nll - 16.0 * 13f64.ln()).abs() < 1e-9);

        let txt = SftExample {
            task: SftTask::II,
            context: Context::text(prompt, Vec::new(), GridImage::empty()),
            target: SftTarget::Text { yes: true, reason: Vec::new() },
        };
        let (nll, _) = sft_loss_grad(&p, &txt);
        assert!((nll - (2f64.ln() + 9f64.ln())).abs() < 1e-9);

        let (sum, grad) = sft_batch_loss_grad(&p, &[img.clone(), txt.clone()]);
        assert!((sum - (16.0 * 13f64.ln() + 2f64.ln() + 9f64.ln())).abs() < 1e-9);
        let (_, g1) = sft_loss_grad(&p, &img);
        let (_, g2) = sft_loss_grad(&p, &txt);
        let mut g = g1;
        g.add_scaled(&g2, 1.0);
        assert!(grad.distance(&g) < 1e-12);
    }

    #[test]
    fn a_descent_step_lowers_the_loss() {
        let p = PolicyParams::zeros(FeatureConfig::default());
        let ex = SftExample {
            task: SftTask::III,
            context: Context::image(gen_prompt(Category::TwoObj, 5), Vec::new()),
            target: SftTarget::Image(GridImage::from_ids(&[3; 16]).unwrap()),
        };
        let (before, grad) = sft_loss_grad(&p, &ex);
        let mut q = p.clone();
        q.add_scaled(&grad, -0.01);
        assert!(sft_loss_grad(&q, &ex).0 < before);
    }
}
