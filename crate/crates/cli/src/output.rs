use serde::Serialize;

use crate::manifest::RunManifest;

/// `{"manifest": ..., "result": ...}`, pretty-printed.
pub fn json<T: Serialize>(manifest: &RunManifest, result: &T) -> anyhow::Result<Vec<u8>> {
    let doc = serde_json::json!({ "manifest": manifest, "result": result });
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

/// A `# manifest ` comment line followed by a header and one record per row.
/// The header is written even when there are no rows.
pub fn csv<T: Serialize>(manifest: &RunManifest, header: &[&str], rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut out = b"# manifest ".to_vec();
    serde_json::to_writer(&mut out, manifest)?;
    out.push(b'\n');
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))
}
