#![allow(dead_code)]

use ethseq::model::{sequence_loss, sequence_loss_and_grad, DropoutPlan, ModelConfig, ModelParams, PoolEmbedding};
use ethseq::rng;
use ethseq::seqgen::{
    bin_sequence, CounterpartyKind, Direction, MaskedSequence, TxRecord, TxSequence, MASK_ID,
};
use primitive_types::U256;

/// Tiny model with separated views and the token gate, a six-record
/// sequence containing token recipients, and a five-element pool.
pub fn tiny_gradient_fixture() -> (ModelParams<f64>, MaskedSequence, Vec<u32>, DropoutPlan) {
    let mut cfg = ModelConfig::new(14);
    cfg.hidden = 8;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ff_dim = 8;
    cfg.max_len = 6;
    cfg.in_out_separation = true;
    cfg.erc20_gate = true;
    cfg.init_std = 0.4;
    let params = ModelParams::init(&cfg, &mut rng::stream(42, &[1]));
    let dirs = [Direction::Out, Direction::In, Direction::Out, Direction::In, Direction::Out];
    let body = dirs.iter().enumerate().map(|(i, &d)| {
        let mut r = TxRecord::head(4 + i as u32);
        r.direction = d;
        r.counterparty_kind = if i == 2 { CounterpartyKind::Contract } else { CounterpartyKind::Eoa };
        r.raw_timestamp = 10_000 - 1_000 * i as u64;
        r.raw_amount_wei = U256::from(10u64.pow(i as u32 * 3));
        r.agg_count = 1 + i as u32;
        if d == Direction::Out {
            r.token_recipients = vec![10 + i as u32 % 3, 12];
        }
        r
    });
    let mut seq = TxSequence::from_body(3, body);
    bin_sequence(&mut seq);
    // Positions 3 and 5 stay visible so gated records feed the encoder.
    let mut base = seq.clone();
    let masked_positions = vec![1, 2, 4];
    let positives = masked_positions
        .iter()
        .map(|&p| std::mem::replace(&mut base.records[p].counterparty, MASK_ID))
        .collect();
    let masked = MaskedSequence {
        base,
        masked_positions,
        positives,
    };
    let pool = vec![4, 6, 9, 11, 13];
    (params, masked, pool, DropoutPlan { ratio: 0.2, seed: 99 })
}

/// Relative error with a floor on the denominator so that gradients at
/// rounding-noise magnitude do not dominate.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub struct GradCheck {
    pub max_rel: f64,
    pub worst: String,
    pub checked: usize,
    pub groups: Vec<(String, f64)>,
}

/// Compare analytic gradients against central differences for every
/// parameter of the fixture.
pub fn gradient_check(eps: f64) -> GradCheck {
    let (params, masked, pool_ids, drop) = tiny_gradient_fixture();
    let scale = 1.0 / ethseq::model::loss_positions(&masked, true) as f64;
    let pool = PoolEmbedding::gather(&pool_ids, &params.address);
    let (_, grads) = sequence_loss_and_grad(&params, &masked, &pool, scale, drop).unwrap();
    let mut analytic_params = ModelParams::<f64>::zeros(&params.config);
    analytic_params.address = grads.address.to_dense(params.config.vocab_size);
    analytic_params.dense = grads.dense.clone();
    let analytic: Vec<(String, Vec<f64>)> = analytic_params
        .named()
        .into_iter()
        .map(|(n, s)| (n, s.to_vec()))
        .collect();

    let mut report = GradCheck {
        max_rel: 0.0,
        worst: String::new(),
        checked: 0,
        groups: Vec::new(),
    };
    for (t, (name, a)) in analytic.iter().enumerate() {
        let mut group_max: f64 = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            let loss_at = |delta: f64| {
                let mut p = params.clone();
                p.slices_mut()[t][i] += delta;
                sequence_loss(&p, &masked, &pool_ids, scale, drop).unwrap()
            };
            let numeric = (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
            let rel = relative_error(ai, numeric);
            report.checked += 1;
            group_max = group_max.max(rel);
            if rel > report.max_rel {
                report.max_rel = rel;
                report.worst = format!("{name}[{i}]: analytic {ai} numeric {numeric}");
            }
        }
        report.groups.push((name.clone(), group_max));
    }
    report
}
