use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::embed_io::{EmbeddingKind, TokenSubset};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::rdm::{load_rdm, save_rdm, CondensedRdm};

/// Directory of model RDMs keyed by (source matrix, step, kind, metric,
/// token rows), so new hypotheses can reuse RDMs from earlier runs.
#[derive(Debug, Clone)]
pub struct RdmCache {
    dir: PathBuf,
}

impl RdmCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RdmCache { dir: dir.into() }
    }

    fn path(&self, source: &str, step: u64, kind: EmbeddingKind, metric: Metric, subset: &TokenSubset) -> PathBuf {
        let mut h = Sha256::new();
        h.update(source.as_bytes());
        h.update([0u8]);
        for r in subset.rows() {
            h.update(r.to_le_bytes());
        }
        let digest = h.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        self.dir
            .join(format!("rdm_s{step}_{}_{}_{hex}.npy", kind.as_str(), metric.as_str()))
    }

    /// A cached RDM carrying `subset`'s labels, or `None` on a miss. Entries
    /// whose manifest disagrees with the key are treated as misses.
    pub fn get(
        &self,
        source: &str,
        step: u64,
        kind: EmbeddingKind,
        metric: Metric,
        subset: &TokenSubset,
    ) -> Result<Option<CondensedRdm>> {
        let path = self.path(source, step, kind, metric, subset);
        if !path.exists() {
            return Ok(None);
        }
        let (rdm, manifest) = load_rdm(&path)?;
        if manifest.token_ids != subset.rows()
            || manifest.metric != metric
            || manifest.kind != kind
            || manifest.source_step != step
        {
            log::warn!("ignoring stale cache entry {}", path.display());
            return Ok(None);
        }
        CondensedRdm::from_parts(subset.clone(), metric, rdm.values().to_vec()).map(Some)
    }

    pub fn put(&self, source: &str, step: u64, kind: EmbeddingKind, rdm: &CondensedRdm) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path(source, step, kind, rdm.metric(), rdm.subset());
        save_rdm(path, rdm, step, kind)
    }
}
