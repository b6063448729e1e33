use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{attention_received, forward_view, DropoutPlan, Float, ModelParams, View};
use crate::negsample::FrequencyTable;
use crate::par;
use crate::seqgen::{split_long, TxSequence};

/// Upper edges of the rank buckets, as fractions of the ranked addresses.
pub const RANK_BUCKETS: [f64; 6] = [0.01, 0.05, 0.10, 0.25, 0.50, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankBucket {
    pub rank_bucket: String,
    pub mean_attention: f64,
    pub occurrences: u64,
}

fn bucket_label(lo: f64, hi: f64) -> String {
    format!("{}-{}%", lo * 100.0, hi * 100.0)
}

/// Mean attention received by counterparties in layer `layer` (0-based,
/// full-view encoder), grouped by descending-frequency rank percentile.
pub fn attention_by_rank<T: Float>(
    params: &ModelParams<T>,
    sequences: &[TxSequence],
    table: &FrequencyTable,
    layer: usize,
) -> Result<Vec<RankBucket>> {
    if layer >= params.config.layers {
        return Err(Error::invalid(format!("layer {layer} out of range")));
    }
    let max_rank = table.max_rank() as f64;
    let bucket_of = |rank: usize| {
        let q = (rank as f64 + 1.0) / max_rank;
        RANK_BUCKETS.iter().position(|&hi| q <= hi + 1e-12).unwrap_or(RANK_BUCKETS.len() - 1)
    };
    let partial = par::map(sequences, |_, s| -> Result<Vec<(f64, u64)>> {
        let mut acc = vec![(0.0, 0u64); RANK_BUCKETS.len()];
        for piece in split_long(s, params.config.max_len) {
            if piece.len() < 2 {
                continue;
            }
            let t = forward_view(params, &piece, View::Full, DropoutPlan::OFF, 0)?;
            let received = attention_received(&t.encoder, layer);
            for (r, &a) in piece.body().iter().zip(received.iter().skip(1)) {
                if let Some(rank) = table.rank(r.counterparty) {
                    let b = &mut acc[bucket_of(rank)];
                    b.0 += a;
                    b.1 += 1;
                }
            }
        }
        Ok(acc)
    });
    let mut total = vec![(0.0, 0u64); RANK_BUCKETS.len()];
    for p in partial {
        for (t, (a, n)) in total.iter_mut().zip(p?) {
            t.0 += a;
            t.1 += n;
        }
    }
    let mut lo = 0.0;
    Ok(RANK_BUCKETS
        .iter()
        .zip(total)
        .map(|(&hi, (a, n))| {
            let b = RankBucket {
                rank_bucket: bucket_label(lo, hi),
                mean_attention: if n == 0 { 0.0 } else { a / n as f64 },
                occurrences: n,
            };
            lo = hi;
            b
        })
        .collect())
}

pub fn write_buckets_csv<W: std::io::Write>(out: W, buckets: &[RankBucket]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank_bucket", "mean_attention"])?;
    for b in buckets {
        w.write_record([b.rank_bucket.clone(), format!("{}", b.mean_attention)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::negsample::build_frequency_table;
    use crate::rng;
    use crate::seqgen::TxRecord;

    #[test]
    fn identical_tokens_give_flat_attention() {
        let mut c = ModelConfig::new(10);
        c.hidden = 4;
        c.heads = 1;
        c.layers = 1;
        c.ff_dim = 4;
        c.tranx_features = false;
        let mut p = ModelParams::<f64>::init(&c, &mut rng::stream(0, &[]));
        // No position signal and every record the same token.
        p.dense.features.position.fill(0.0);
        let same = p.address.row(4).to_owned();
        p.address.row_mut(3).assign(&same);
        let seq = TxSequence::from_body(3, (0..4).map(|_| TxRecord::head(4)));
        let t = forward_view(&p, &seq, View::Full, DropoutPlan::OFF, 0).unwrap();
        let r = attention_received(&t.encoder, 0);
        assert!(r.iter().all(|&x| (x - 0.2).abs() < 1e-12));
        let table = build_frequency_table(std::slice::from_ref(&seq)).unwrap();
        let b = attention_by_rank(&p, &[seq], &table, 0).unwrap();
        assert!(b.iter().filter(|b| b.occurrences > 0).all(|b| (b.mean_attention - 0.2).abs() < 1e-12));
    }

    #[test]
    fn csv_header() {
        let mut out = Vec::new();
        write_buckets_csv(
            &mut out,
            &[RankBucket {
                rank_bucket: bucket_label(0.0, 0.01),
                mean_attention: 0.5,
                occurrences: 1,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "rank_bucket,mean_attention\n0-1%,0.5\n");
    }
}
