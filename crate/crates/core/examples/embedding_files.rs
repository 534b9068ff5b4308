//! Writes a small embedding set, reads it back and prints a summary.

use fscache::{
    l2_normalize, read_embedding_file, write_embedding_file, EmbeddingRecord, EmbeddingSet,
};

fn main() -> fscache::Result<()> {
    let mut set = EmbeddingSet::new(3, "vit-l-14/block12-cls", 12, true);
    let raw = [
        ("img-0", None, [3.0, 4.0, 0.0]),
        ("img-1", Some("biggan"), [0.0, 1.0, 1.0]),
    ];
    for (id, source, v) in raw {
        let unit: Vec<f32> = l2_normalize(&v)?.iter().map(|&x| x as f32).collect();
        set.records.push(match source {
            Some(s) => EmbeddingRecord::fake(id, s, unit),
            None => EmbeddingRecord::real(id, unit),
        });
    }

    let path = std::env::temp_dir().join("fscache-example.fseb");
    write_embedding_file(&set, &path)?;
    let back = read_embedding_file(&path)?;
    println!(
        "{} records, dimension {}, sources {:?}",
        back.len(),
        back.dimension,
        back.source_counts()
    );
    for r in &back.records {
        println!("{:8} {:6} {:?}", r.id, r.label, r.vector);
    }
    assert_eq!(back, set);
    Ok(())
}
