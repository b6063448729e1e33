mod common;

use ethseq::model::{sequence_loss_and_grad, PoolEmbedding};

#[test]
fn every_parameter_matches_central_differences() {
    let r = common::gradient_check(1e-4);
    for (name, err) in &r.groups {
        assert!(*err < 1e-4, "{name}: {err}");
    }
    assert!(r.max_rel < 1e-4, "worst {}", r.worst);
}

#[test]
fn unused_rows_get_no_gradient() {
    let (params, masked, pool, drop) = common::tiny_gradient_fixture();
    let pool = PoolEmbedding::gather(&pool, &params.address);
    let (_, g) = sequence_loss_and_grad(&params, &masked, &pool, 1.0, drop).unwrap();
    // ids 0 (pad) and 2 (unknown) appear nowhere in the fixture.
    assert!(g.address.row(0).is_none());
    assert!(g.address.row(2).is_none());
    assert!(g.all_finite());
}

#[test]
fn gradient_groups_are_all_nonzero() {
    let (params, masked, pool, drop) = common::tiny_gradient_fixture();
    let pool = PoolEmbedding::gather(&pool, &params.address);
    let (_, g) = sequence_loss_and_grad(&params, &masked, &pool, 1.0, drop).unwrap();
    for (name, s) in g.dense.named() {
        if name.contains("account_type") || name.contains("count") || name.contains("amount") || name.contains("time") || name.contains("position") || name.contains("direction") {
            continue;
        }
        assert!(s.iter().any(|&x| x != 0.0), "{name} has an all-zero gradient");
    }
}
