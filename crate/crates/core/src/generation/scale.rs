use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::corpus::{sample_documents, CorpusSample, Document};

pub const DEFAULT_DOC_COUNTS: [usize; 7] = [8, 16, 32, 64, 128, 256, 803];
pub const DEFAULT_PAIRS_PER_DOC: [usize; 3] = [5, 10, 20];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalePlan {
    pub doc_counts: Vec<usize>,
    pub pairs_per_doc: Vec<usize>,
    pub seeds: Vec<u64>,
}

/// One cell of the plan: a document count, a pair count, and one nested
/// sample per seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleManifest {
    pub name: String,
    pub doc_count: usize,
    pub pairs_per_doc: usize,
    pub samples: Vec<CorpusSample>,
    /// Per seed, parallel to `samples`.
    pub output_dirs: Vec<String>,
}

fn check_axis(name: &str, values: &[usize], strictly_increasing: bool) -> Result<(), GenerationError> {
    if values.is_empty() || values.contains(&0) {
        return Err(GenerationError::Config(format!("{name} must be non-empty and at least 1 each")));
    }
    if strictly_increasing && values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GenerationError::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

/// Cross product of `doc_counts × pairs_per_doc`. For a given seed the
/// sample for a smaller count is a prefix of the sample for a larger one.
pub fn build_scale_plan(
    corpus: &[Document],
    doc_counts: &[usize],
    pairs_per_doc: &[usize],
    seeds: &[u64],
    out_root: &str,
) -> Result<(ScalePlan, Vec<ScaleManifest>), GenerationError> {
    check_axis("doc counts", doc_counts, true)?;
    check_axis("pairs per doc", pairs_per_doc, false)?;
    if seeds.is_empty() {
        return Err(GenerationError::Config("at least one seed is required".into()));
    }
    if let Some(&first) = doc_counts.iter().find(|&&d| d > corpus.len()) {
        return Err(GenerationError::Data(format!("doc count {first} exceeds the corpus size of {}", corpus.len())));
    }
    let mut manifests = Vec::with_capacity(doc_counts.len() * pairs_per_doc.len());
    for &d in doc_counts {
        let samples: Vec<CorpusSample> = seeds
            .iter()
            .map(|&s| sample_documents(corpus, d, s).map_err(|e| GenerationError::Data(e.to_string())))
            .collect::<Result<_, _>>()?;
        for &q in pairs_per_doc {
            let name = format!("docs{d:04}_q{q:02}");
            let output_dirs = seeds.iter().map(|s| format!("{out_root}/{name}/seed{s}")).collect();
            manifests.push(ScaleManifest { name, doc_count: d, pairs_per_doc: q, samples: samples.clone(), output_dirs });
        }
    }
    let plan = ScalePlan { doc_counts: doc_counts.to_vec(), pairs_per_doc: pairs_per_doc.to_vec(), seeds: seeds.to_vec() };
    Ok((plan, manifests))
}
