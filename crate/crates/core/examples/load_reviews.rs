//! Build a corpus from line-delimited review and category files.

use std::io::Write;

use jsr::corpus::{load_metadata, load_reviews, CorpusBundle, CorpusConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (reviews_path, meta_path) = (dir.path().join("reviews.json"), dir.path().join("meta.json"));
    let mut reviews = std::fs::File::create(&reviews_path)?;
    let mut meta = std::fs::File::create(&meta_path)?;
    let shelves = [("Garden", "hose shovel soil"), ("Kitchen", "knife pan kettle"), ("Camping", "tent lantern stove"), ("Office", "stapler paper pen")];
    for (c, (shelf, words)) in shelves.iter().enumerate() {
        for i in 0..4 {
            writeln!(meta, "{}", serde_json::json!({"asin": format!("{c}{i}"), "categories": [["Home", shelf]]}))?;
        }
        for u in 0..5 {
            for i in 0..3 {
                let text = format!("Great {shelf} gear: the {words} all held up, item {}", (u + i) % 4);
                let line = serde_json::json!({"reviewerID": format!("R{c}{u}"), "asin": format!("{c}{}", (u + i) % 4), "reviewText": text});
                writeln!(reviews, "{line}")?;
            }
        }
    }
    writeln!(reviews, "this line is not JSON")?;
    drop((reviews, meta));

    let loaded = load_reviews(&reviews_path)?;
    let categories = load_metadata(&meta_path)?;
    println!("{} reviews, malformed lines {:?}", loaded.records.len(), loaded.malformed_lines);
    let config = CorpusConfig { min_count: 1, query_test_fraction: 0.25, ..Default::default() };
    let mut corpus = CorpusBundle::from_records(&loaded.records, &categories.records, &config, 0)?;
    corpus.stats.malformed_lines = loaded.malformed_lines.len() + categories.malformed_lines.len();
    println!("{:?}", corpus.stats);
    for q in corpus.queries_train.iter().chain(&corpus.queries_test) {
        println!("query {} -> items {:?}", q.query_id, q.relevant);
    }
    Ok(())
}
