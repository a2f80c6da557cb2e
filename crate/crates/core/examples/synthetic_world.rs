//! Generate a synthetic shopping world and print what the corpus holds.

use jsr::corpus::{generate_synthetic_world, CorpusConfig, SyntheticParams};

fn main() -> jsr::Result<()> {
    let config = CorpusConfig { min_count: 1, ..Default::default() };
    let world = generate_synthetic_world(&SyntheticParams::default(), &config, 7)?;
    let c = &world.bundle;
    println!("{} items, {} users, vocabulary {}", c.n_items(), c.n_users(), c.vocabulary.len());
    println!("categories: {}", world.category_names.join(", "));
    for q in c.queries_train.iter().chain(&c.queries_test) {
        let terms: Vec<&str> = q.terms.iter().filter_map(|&t| c.vocabulary.term(t)).collect();
        println!("query {:<12} terms {:?}: {} relevant, {} judged non-relevant", q.query_id, terms, q.relevant.len(), q.non_relevant.len());
    }
    let first = &c.items[0];
    let words: Vec<&str> = first.term_ids.iter().take(12).filter_map(|&t| c.vocabulary.term(t)).collect();
    println!("item {} opens with: {}", first.item_id, words.join(" "));
    let h = &c.histories[0];
    println!("user {} trains on {:?}, tests on {:?}", h.user_id, h.train, h.test);
    Ok(())
}
