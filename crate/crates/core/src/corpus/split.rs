use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::QueryJudgments;
use crate::{Error, Result};

/// A user's favoured items, partitioned into train and test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user: usize,
    pub user_id: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("test fraction must be in (0, 1), got {f}")))
    }
}

/// Split queries into disjoint train and test sets.
///
/// After a seeded shuffle, `floor(n · test_fraction)` queries go to test.
/// The smaller side is taken from the front of the shuffle, so the test
/// sets for fractions `f` and `1 − f` under one seed are complementary.
pub fn split_retrieval(
    queries: &[QueryJudgments],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<QueryJudgments>, Vec<QueryJudgments>)> {
    check_fraction(test_fraction)?;
    let n = queries.len();
    let n_test = (n as f64 * test_fraction).floor() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::Config(format!(
            "retrieval split of {n} queries at fraction {test_fraction} leaves a side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; n];
    if n_test <= n - n_test {
        order[..n_test].iter().for_each(|&i| is_test[i] = true);
    } else {
        order[n - n_test..].iter().for_each(|&i| is_test[i] = true);
    }
    let (test, train): (Vec<_>, Vec<_>) = queries
        .iter()
        .cloned()
        .zip(is_test)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(q, _)| q).collect(),
        test.into_iter().map(|(q, _)| q).collect(),
    ))
}

/// Per-user random train/test partition.
///
/// Users with at least two items keep `ceil(n · (1 − test_fraction))` items
/// for training, clamped so both sides are non-empty. Users with a single
/// item are train-only.
pub fn split_recommendation(
    user_ids: &[String],
    favored: &[Vec<usize>],
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<UserHistory>> {
    check_fraction(test_fraction)?;
    if user_ids.len() != favored.len() {
        return Err(Error::Dimension {
            op: "split_recommendation",
            left: vec![user_ids.len()],
            right: vec![favored.len()],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(favored.len());
    for (user, (user_id, items)) in user_ids.iter().zip(favored).enumerate() {
        let n = items.len();
        let (train, test) = if n < 2 {
            (items.clone(), Vec::new())
        } else {
            let n_train = ((n as f64 * (1.0 - test_fraction)).ceil() as usize).clamp(1, n - 1);
            let picked = index::sample(&mut rng, n, n_train);
            let mut in_train = vec![false; n];
            let train: Vec<usize> = picked
                .into_iter()
                .map(|k| {
                    in_train[k] = true;
                    items[k]
                })
                .collect();
            let test = items
                .iter()
                .zip(&in_train)
                .filter(|(_, t)| !**t)
                .map(|(&i, _)| i)
                .collect();
            (train, test)
        };
        out.push(UserHistory {
            user,
            user_id: user_id.clone(),
            train,
            test,
        });
    }
    Ok(out)
}

/// Keep at most `cap` training items per user. Training items are stored in
/// random order, so truncation keeps a random subset. Test items are left
/// untouched.
pub fn cap_train_items(histories: &mut [UserHistory], cap: usize) {
    for h in histories {
        h.train.truncate(cap.max(1));
    }
}
