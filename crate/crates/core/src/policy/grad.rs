use super::context::Context;
use super::features::{dim, featurize_into};
use super::sample::allowed_tokens;
use super::{cfg_combine, log_softmax, PolicyParams};

/// A teacher-forced segment with one weight per token.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSegment<'a> {
    pub ctx: &'a Context,
    pub tokens: &'a [u8],
    pub cfg_scale: f64,
    pub weights: &'a [f64],
}

/// Add `d/dθ Σ_t w_t log π_θ(y_t | ctx, y_<t)` for one segment into `grad`
/// and return the per-token log-probs.
///
/// With guidance the guided logits are `W (s φ_c + (1 - s) φ_u)`, so the
/// softmax gradient `(onehot - p) ⊗ φ` uses the combined features.
pub fn accumulate_segment_grad(params: &PolicyParams, seg: &WeightedSegment<'_>, grad: &mut PolicyParams) -> Vec<f64> {
    assert_eq!(seg.tokens.len(), seg.weights.len(), "one weight per token");
    let ctx = seg.ctx;
    let head = ctx.head;
    let f = dim(head);
    let guided = seg.cfg_scale != 1.0 && !ctx.pad;
    let mut phi_c = vec![0.0; f];
    let mut phi_u = vec![0.0; f];
    let mut phi_g = vec![0.0; f];
    let mut logprobs = Vec::with_capacity(seg.tokens.len());

    for t in 0..seg.tokens.len() {
        let prefix = &seg.tokens[..t];
        featurize_into(ctx, prefix, ctx.pad, &mut phi_c);
        let logits = if guided {
            featurize_into(ctx, prefix, true, &mut phi_u);
            let s = seg.cfg_scale;
            for i in 0..f {
                phi_g[i] = s * phi_c[i] + (1.0 - s) * phi_u[i];
            }
            cfg_combine(
                &params.logits_from_features(head, &phi_c),
                &params.logits_from_features(head, &phi_u),
                s,
            )
        } else {
            phi_g.copy_from_slice(&phi_c);
            params.logits_from_features(head, &phi_c)
        };
        let allowed = allowed_tokens(head, prefix, params.config.max_reason);
        let masked: Vec<f64> = logits
            .iter()
            .zip(&allowed)
            .map(|(&l, &ok)| if ok { l } else { f64::NEG_INFINITY })
            .collect();
        let lp = log_softmax(&masked);
        let y = seg.tokens[t] as usize;
        logprobs.push(lp[y]);

        let w = seg.weights[t];
        if w == 0.0 {
            continue;
        }
        let g = grad.head_mut(head);
        for (v, &lpv) in lp.iter().enumerate() {
            let p = if lpv == f64::NEG_INFINITY { 0.0 } else { lpv.exp() };
            let coeff = w * ((v == y) as u8 as f64 - p);
            if coeff == 0.0 {
                continue;
            }
            let row = &mut g[v * f..(v + 1) * f];
            for (gi, &x) in row.iter_mut().zip(&phi_g) {
                *gi += coeff * x;
            }
        }
    }
    logprobs
}

/// `∂/∂θ Σ_segments Σ_t w_t log π_θ(y_t | ctx_t)`.
pub fn weighted_logprob_grad(params: &PolicyParams, items: &[WeightedSegment<'_>]) -> PolicyParams {
    let mut grad = params.zeros_like();
    for seg in items {
        accumulate_segment_grad(params, seg, &mut grad);
    }
    grad
}
