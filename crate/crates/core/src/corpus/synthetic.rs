//! Desk-scale stand-in for a product corpus.
//!
//! Each category owns a block of theme terms plus a name term; item text
//! mixes theme terms with shared background terms and mentions the category
//! name only occasionally, so a query built from the category name matches
//! most relevant items only through learned term similarity. Users buy
//! within one or two home categories, and with probability
//! `cross_category_affinity` from the category linked to a home category.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{assemble, build_vocabulary, CorpusBundle, CorpusConfig, CorpusStats, ItemDoc};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub n_categories: usize,
    pub items_per_category: usize,
    pub n_users: usize,
    pub purchases_per_user: usize,
    pub vocab_size: usize,
    pub doc_len: usize,
    pub cross_category_affinity: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_categories: 5,
            items_per_category: 40,
            n_users: 300,
            purchases_per_user: 10,
            vocab_size: 400,
            doc_len: 30,
            cross_category_affinity: 0.3,
        }
    }
}

/// Share of document positions drawn from the item's own theme.
const THEME_SHARE: f64 = 0.5;
/// Probability that an item's text mentions its category name.
const NAME_MENTION: f64 = 0.3;

const NAMES: &[&str] = &[
    "Alvora", "Brenix", "Cadmel", "Dorvane", "Eskali", "Fenwyr", "Galdor", "Hesper", "Ivrane",
    "Jorvik", "Kelmar", "Lunest",
];

/// A generated corpus plus the ground truth it was generated from.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub bundle: CorpusBundle,
    /// Category of each item, by item index.
    pub item_category: Vec<usize>,
    /// Home categories of each user, by user index.
    pub home_categories: Vec<Vec<usize>>,
    pub category_names: Vec<String>,
}

impl SyntheticWorld {
    /// Category linked to `c` for cross-category purchases.
    pub fn linked_category(&self, c: usize) -> usize {
        (c + 1) % self.category_names.len()
    }
}

fn category_name(c: usize) -> String {
    let base = NAMES[c % NAMES.len()];
    match c / NAMES.len() {
        0 => base.to_string(),
        k => format!("{base}{k}"),
    }
}

pub fn generate_synthetic_world(
    params: &SyntheticParams,
    config: &CorpusConfig,
    seed: u64,
) -> Result<SyntheticWorld> {
    let p = params;
    if p.n_categories == 0
        || p.items_per_category == 0
        || p.n_users == 0
        || p.purchases_per_user == 0
        || p.vocab_size == 0
        || p.doc_len == 0
    {
        return Err(Error::Config("synthetic world counts must all be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p.cross_category_affinity) {
        return Err(Error::Config(format!(
            "cross_category_affinity must be in [0, 1], got {}",
            p.cross_category_affinity
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_items = p.n_categories * p.items_per_category;

    let names: Vec<String> = (0..p.n_categories).map(category_name).collect();
    let n_background = (p.vocab_size / 4).max(1);
    let theme_size = ((p.vocab_size - n_background.min(p.vocab_size)) / p.n_categories).max(2);
    let theme = |c: usize, k: usize| format!("{}{}", names[c].to_lowercase(), k);

    let mut item_category = Vec::with_capacity(n_items);
    let mut token_docs: Vec<Vec<String>> = Vec::with_capacity(n_items);
    for (c, name) in names.iter().enumerate() {
        for _ in 0..p.items_per_category {
            let mut doc: Vec<String> = (0..p.doc_len)
                .map(|_| {
                    if rng.random::<f64>() < THEME_SHARE {
                        theme(c, rng.random_range(1..theme_size))
                    } else {
                        format!("common{}", rng.random_range(0..n_background))
                    }
                })
                .collect();
            if rng.random::<f64>() < NAME_MENTION {
                let at = rng.random_range(0..doc.len());
                doc[at] = name.to_lowercase();
            }
            token_docs.push(doc);
            item_category.push(c);
        }
    }

    let vocabulary = build_vocabulary(&token_docs, 1, None)?;
    let items: Vec<ItemDoc> = token_docs
        .iter()
        .enumerate()
        .map(|(i, doc)| ItemDoc {
            item_id: format!("item{i:06}"),
            term_ids: vocabulary.encode(doc),
            category_paths: vec![vec![names[item_category[i]].clone()]],
        })
        .collect();

    let linked = |c: usize| (c + 1) % p.n_categories;
    let per_user = p.purchases_per_user.min(n_items.saturating_sub(1)).max(1);
    let mut home_categories = Vec::with_capacity(p.n_users);
    let mut favored = Vec::with_capacity(p.n_users);
    for _ in 0..p.n_users {
        let n_homes = if p.n_categories > 1 && rng.random_bool(0.5) { 2 } else { 1 };
        let mut homes = vec![rng.random_range(0..p.n_categories)];
        while homes.len() < n_homes {
            let c = rng.random_range(0..p.n_categories);
            if !homes.contains(&c) {
                homes.push(c);
            }
        }
        let mut bought: Vec<usize> = Vec::with_capacity(per_user);
        while bought.len() < per_user {
            let home = homes[rng.random_range(0..homes.len())];
            let c = if rng.random::<f64>() < p.cross_category_affinity {
                linked(home)
            } else {
                home
            };
            let base = c * p.items_per_category;
            let mut pick = None;
            for _ in 0..64 {
                let i = base + rng.random_range(0..p.items_per_category);
                if !bought.contains(&i) {
                    pick = Some(i);
                    break;
                }
            }
            let pick = pick.or_else(|| {
                (base..base + p.items_per_category)
                    .chain(0..n_items)
                    .find(|i| !bought.contains(i))
            });
            match pick {
                Some(i) => bought.push(i),
                None => break,
            }
        }
        home_categories.push(homes);
        favored.push(bought);
    }
    let user_ids: Vec<String> = (0..p.n_users).map(|u| format!("user{u:06}")).collect();

    let stats = CorpusStats {
        reviews: favored.iter().map(Vec::len).sum(),
        ..Default::default()
    };
    let bundle = assemble(vocabulary, items, user_ids, favored, stats, config, seed)?;
    Ok(SyntheticWorld {
        bundle,
        item_category,
        home_categories,
        category_names: names,
    })
}
