//! Ethereum-ETL CSV ingestion and the intermediate corpus file.

mod corpus;
mod parse;
mod types;

use std::collections::HashMap;

pub use corpus::*;
pub use parse::*;
pub use types::*;

/// Default lower bound on involved transactions.
pub const MIN_TX: usize = 3;
/// Default upper bound on involved transactions.
pub const MAX_TX: usize = 10_000;

/// Keep accounts whose involved-transaction count lies in `[min_tx, max_tx]`
/// and whose label is not excluded. Input order is preserved.
pub fn filter_accounts(
    accounts: &[AccountMeta],
    tx_counts: &HashMap<Address, usize>,
    min_tx: usize,
    max_tx: usize,
    excluded_labels: &[Label],
) -> Vec<AccountMeta> {
    accounts
        .iter()
        .filter(|a| {
            let n = tx_counts.get(&a.address).copied().unwrap_or(0);
            (min_tx..=max_tx).contains(&n) && !excluded_labels.contains(&a.label)
        })
        .copied()
        .collect()
}

/// Involved-transaction count per address (sender or receiver).
pub fn involved_counts(txs: &[RawTransaction]) -> HashMap<Address, usize> {
    let mut counts = HashMap::new();
    for t in txs {
        *counts.entry(t.from_address).or_insert(0) += 1;
        if let Some(to) = t.to_address {
            if to != t.from_address {
                *counts.entry(to).or_insert(0) += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(i: u64, label: Label) -> AccountMeta {
        AccountMeta {
            address: Address::from_index(i),
            kind: AccountKind::Eoa,
            label,
        }
    }

    #[test]
    fn boundaries() {
        let accounts = [meta(1, Label::Normal), meta(2, Label::Normal)];
        let counts: HashMap<_, _> = [(accounts[0].address, 2), (accounts[1].address, 3)].into();
        let kept = filter_accounts(&accounts, &counts, MIN_TX, MAX_TX, &[]);
        assert_eq!(kept, vec![accounts[1]]);
    }

    #[test]
    fn five_account_fixture() {
        let accounts = [
            meta(1, Label::Normal),
            meta(2, Label::Excluded),
            meta(3, Label::Phishing),
            meta(4, Label::Normal),
            meta(5, Label::Normal),
        ];
        let counts: HashMap<_, _> = accounts
            .iter()
            .zip([5, 5, 10, 20_000, 3])
            .map(|(a, n)| (a.address, n))
            .collect();
        let kept = filter_accounts(&accounts, &counts, MIN_TX, MAX_TX, &[Label::Excluded]);
        let ids: Vec<_> = kept.iter().map(|a| a.address).collect();
        assert_eq!(ids, vec![accounts[0].address, accounts[2].address, accounts[4].address]);
    }

    proptest! {
        #[test]
        fn shrinking_bounds_never_adds(counts in proptest::collection::vec(0usize..50, 1..40),
                                       lo in 0usize..20, hi in 20usize..50, dlo in 0usize..5, dhi in 0usize..5) {
            let accounts: Vec<_> = (0..counts.len() as u64).map(|i| meta(i, Label::Normal)).collect();
            let map: HashMap<_, _> = accounts.iter().zip(&counts).map(|(a, &n)| (a.address, n)).collect();
            let wide = filter_accounts(&accounts, &map, lo, hi, &[]);
            let narrow = filter_accounts(&accounts, &map, lo + dlo, hi - dhi, &[]);
            prop_assert!(narrow.iter().all(|a| wide.contains(a)));
        }
    }
}
