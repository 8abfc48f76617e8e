use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ModelInput, MultimodalNet};
use crate::dataio::FaultClass;
use crate::error::{Error, Result};

/// Writes one row per input: `segment_id,label,condition,f0..f{W-1}` where
/// `f*` is the fused vector fed to the head.
pub fn export_embeddings<'a>(
    net: &MultimodalNet,
    rows: impl IntoIterator<Item = (usize, FaultClass, &'a str, &'a ModelInput)>,
    path: &Path,
) -> Result<usize> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let width = net.fusion_width();
    let mut header = String::from("segment_id,label,condition");
    for k in 0..width {
        header.push_str(&format!(",f{k}"));
    }
    writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
    let mut n = 0;
    for (id, label, condition, input) in rows {
        let pred = net.predict(input)?;
        let mut line = format!("{id},{},{condition}", label.name());
        for v in &pred.fused {
            line.push_str(&format!(",{v:e}"));
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}
