//! Consensus reranking over hypothesis pools, multi-checkpoint pool
//! construction by block type, and exhaustive checkpoint-combination search.
//!
//! Reranking picks, per sentence, the hypothesis with the highest mean
//! utility against all *other* pool members used as pseudo-references (the
//! candidate itself is never counted). Pools concatenate n-best lists from
//! several checkpoints; duplicates are retained deliberately, which weights
//! the consensus by model agreement. Utilities are computed on the raw
//! stored text; any normalization is internal to the metric.

use std::collections::HashMap;

use crate::corpus::{CheckpointId, Hypothesis, NBestList};
use crate::error::{Error, Result};
use crate::metrics::Utility;
use crate::schedule::BlockType;

/// Hypotheses of many checkpoints, grouped per sentence.
///
/// The pool is rectangular in checkpoints (every sentence as
/// concatenated from the same origins, in the same order) and ragged in
/// per-checkpoint list length.
#[derive(Debug, Clone)]
pub struct HypothesisPool {
    sentences: Vec<Vec<Hypothesis>>,
    origins: Vec<(CheckpointId, BlockType)>,
}

impl HypothesisPool {
    pub fn from_sentences(
        sentences: Vec<Vec<Hypothesis>>,
        origins: Vec<(CheckpointId, BlockType)>,
    ) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::input("hypothesis pool has no sentences"));
        }
        if let Some(idx) = sentences.iter().position(Vec::is_empty) {
            return Err(Error::input(format!("sentence {idx} has an empty pool")));
        }
        Ok(HypothesisPool { sentences, origins })
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn sentence(&self, index: usize) -> &[Hypothesis] {
        &self.sentences[index]
    }

    pub fn origins(&self) -> &[(CheckpointId, BlockType)] {
        &self.origins
    }
}

/// Mean utility of each candidate against all other pool members. A
/// singleton pool scores 1 by definition.
pub fn consensus_scores(pool_sentence: &[Hypothesis], utility: &dyn Utility) -> Result<Vec<f64>> {
    let n = pool_sentence.len();
    if n == 0 {
        return Err(Error::input("empty hypothesis pool"));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut sums = vec![0.0f64; n];
    if utility.is_symmetric() {
        // each unordered pair computed once
        for i in 0..n {
            for j in (i + 1)..n {
                let u = utility.score(&pool_sentence[i].text, &pool_sentence[j].text);
                sums[i] += u;
                sums[j] += u;
            }
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sums[i] += utility.score(&pool_sentence[i].text, &pool_sentence[j].text);
                }
            }
        }
    }
    let denom = (n - 1) as f64;
    Ok(sums.into_iter().map(|s| s / denom).collect())
}

/// Index and consensus score of the selected hypothesis. Ties break to the
/// lowest index, i.e. the highest-ranked hypothesis of the earliest-listed
/// checkpoint.
pub fn mbr_select(pool_sentence: &[Hypothesis], utility: &dyn Utility) -> Result<(usize, f64)> {
    let scores = consensus_scores(pool_sentence, utility)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores[best]))
}

/// The selection made for one sentence, with the full consensus row.
#[derive(Debug, Clone)]
pub struct SentenceSelection {
    pub sentence_index: usize,
    pub chosen_index: usize,
    pub hypothesis: Hypothesis,
    pub consensus: f64,
    pub consensus_row: Vec<f64>,
}

/// Reranking output: one selection per sentence plus the corpus-level mean
/// consensus utility.
#[derive(Debug, Clone)]
pub struct MbrResult {
    pub selections: Vec<SentenceSelection>,
    pub corpus_consensus: f64,
}

impl MbrResult {
    pub fn selected_texts(&self) -> Vec<&str> {
        self.selections
            .iter()
            .map(|s| s.hypothesis.text.as_str())
            .collect()
    }
}

/// Applies [`mbr_select`] to every sentence independently.
pub fn mbr_rerank(pool: &HypothesisPool, utility: &dyn Utility) -> Result<MbrResult> {
    let mut selections = Vec::with_capacity(pool.num_sentences());
    let mut total = 0.0;
    for (sentence_index, sentence) in pool.sentences.iter().enumerate() {
        let row = consensus_scores(sentence, utility)?;
        let mut best = 0;
        for (i, &s) in row.iter().enumerate().skip(1) {
            if s > row[best] {
                best = i;
            }
        }
        total += row[best];
        selections.push(SentenceSelection {
            sentence_index,
            chosen_index: best,
            hypothesis: sentence[best].clone(),
            consensus: row[best],
            consensus_row: row,
        });
    }
    let corpus_consensus = total / selections.len() as f64;
    Ok(MbrResult {
        selections,
        corpus_consensus,
    })
}

/// Checkpoints available per block type, each list sorted best-first (by an
/// external score, descending).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockAvailability {
    pub auth: Vec<CheckpointId>,
    pub bt: Vec<CheckpointId>,
    pub ft: Vec<CheckpointId>,
}

impl BlockAvailability {
    /// Groups checkpoint ids by block type, ordering each group by the
    /// paired score descending (stable for equal scores). Without scores the
    /// given order is kept.
    pub fn from_typed_ids(
        ids: &[(CheckpointId, BlockType)],
        scores: Option<&[f64]>,
    ) -> Result<Self> {
        if let Some(scores) = scores {
            if scores.len() != ids.len() {
                return Err(Error::input(format!(
                    "{} checkpoints but {} scores",
                    ids.len(),
                    scores.len()
                )));
            }
        }
        let mut groups: HashMap<BlockType, Vec<(usize, &CheckpointId)>> = HashMap::new();
        for (pos, (id, block_type)) in ids.iter().enumerate() {
            groups.entry(*block_type).or_default().push((pos, id));
        }
        let mut availability = BlockAvailability::default();
        for (block_type, mut members) in groups {
            if let Some(scores) = scores {
                members.sort_by(|a, b| scores[b.0].total_cmp(&scores[a.0]).then(a.0.cmp(&b.0)));
            }
            let list: Vec<CheckpointId> = members.into_iter().map(|(_, id)| id.clone()).collect();
            match block_type {
                BlockType::Data(crate::corpus::DatasetTag::Auth) => availability.auth = list,
                BlockType::Data(crate::corpus::DatasetTag::Bt) => availability.bt = list,
                BlockType::Data(crate::corpus::DatasetTag::Ft) => availability.ft = list,
                BlockType::Mixed => {
                    return Err(Error::input(
                        "combination search needs auth/bt/ft block types, got 'mixed'",
                    ))
                }
            }
        }
        Ok(availability)
    }
}

/// How many n-best lists to take from each block type, over a fixed
/// availability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationSpec {
    pub n_auth: usize,
    pub n_bt: usize,
    pub n_ft: usize,
    pub available: BlockAvailability,
}

impl CombinationSpec {
    pub fn new(
        n_auth: usize,
        n_bt: usize,
        n_ft: usize,
        available: BlockAvailability,
    ) -> Result<Self> {
        let spec = CombinationSpec {
            n_auth,
            n_bt,
            n_ft,
            available,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.n_auth + self.n_bt + self.n_ft == 0 {
            return Err(Error::input("combination selects no checkpoints"));
        }
        for (count, list, name) in [
            (self.n_auth, &self.available.auth, "auth"),
            (self.n_bt, &self.available.bt, "bt"),
            (self.n_ft, &self.available.ft, "ft"),
        ] {
            if count > list.len() {
                return Err(Error::input(format!(
                    "{count} {name} checkpoints requested but only {} available",
                    list.len()
                )));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_auth, self.n_bt, self.n_ft)
    }

    /// Selected checkpoints: top `n_auth` auth, then top `n_bt` bt, then top
    /// `n_ft` ft — this order defines the pool's checkpoint order.
    pub fn selected(&self) -> Vec<(&CheckpointId, BlockType)> {
        use crate::corpus::DatasetTag;
        let mut out = Vec::new();
        for (count, list, tag) in [
            (self.n_auth, &self.available.auth, DatasetTag::Auth),
            (self.n_bt, &self.available.bt, DatasetTag::Bt),
            (self.n_ft, &self.available.ft, DatasetTag::Ft),
        ] {
            out.extend(list.iter().take(count).map(|id| (id, BlockType::Data(tag))));
        }
        out
    }
}

/// Concatenates the selected checkpoints' n-best lists per sentence,
/// preserving checkpoint order and within-checkpoint rank order. Duplicate
/// hypotheses are retained.
pub fn build_pool(
    spec: &CombinationSpec,
    nbest_store: &HashMap<CheckpointId, NBestList>,
) -> Result<HypothesisPool> {
    spec.validate()?;
    let selected = spec.selected();
    let mut lists = Vec::with_capacity(selected.len());
    let mut num_sentences = None;
    for (id, block_type) in &selected {
        let list = nbest_store
            .get(id)
            .ok_or_else(|| Error::input(format!("no n-best list for checkpoint {id}")))?;
        match num_sentences {
            None => num_sentences = Some(list.num_sentences()),
            Some(count) if count != list.num_sentences() => {
                return Err(Error::input(format!(
                    "checkpoint {id} covers {} sentences but the pool has {count}",
                    list.num_sentences()
                )));
            }
            Some(_) => {}
        }
        lists.push(((*id).clone(), *block_type, list));
    }
    let num_sentences = num_sentences.expect("at least one checkpoint selected");
    let mut sentences = vec![Vec::new(); num_sentences];
    for (id, _, list) in &lists {
        for (sentence_index, group) in list.groups().iter().enumerate() {
            for hyp in group {
                let mut hyp = hyp.clone();
                hyp.origin = Some(id.clone());
                sentences[sentence_index].push(hyp);
            }
        }
    }
    HypothesisPool::from_sentences(
        sentences,
        lists.into_iter().map(|(id, bt, _)| (id, bt)).collect(),
    )
}

/// Enumerates the (n_auth, n_bt, n_ft) compositions of `total_k` bounded by
/// availability; with `allow_fewer` every composition with
/// `1 <= sum <= total_k` is included.
pub fn enumerate_compositions(
    available: &BlockAvailability,
    total_k: usize,
    allow_fewer: bool,
) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for a in 0..=total_k.min(available.auth.len()) {
        for c in 0..=(total_k - a).min(available.bt.len()) {
            let remaining = total_k - a - c;
            if allow_fewer {
                for e in 0..=remaining.min(available.ft.len()) {
                    if a + c + e >= 1 {
                        out.push((a, c, e));
                    }
                }
            } else if remaining <= available.ft.len() {
                out.push((a, c, remaining));
            }
        }
    }
    out
}

/// Builds and reranks a pool for every composition, scoring the selected
/// translations against `eval_refs` with the same utility when references
/// are given, by mean consensus utility otherwise. Returns compositions
/// sorted by score descending, ties broken by lexicographic (a, c, e).
pub fn combination_search(
    available: &BlockAvailability,
    total_k: usize,
    nbest_store: &HashMap<CheckpointId, NBestList>,
    utility: &dyn Utility,
    eval_refs: Option<&[String]>,
    allow_fewer: bool,
) -> Result<Vec<(CombinationSpec, f64)>> {
    if total_k == 0 {
        return Err(Error::input("total_k must be at least 1"));
    }
    let compositions = enumerate_compositions(available, total_k, allow_fewer);
    if compositions.is_empty() {
        return Err(Error::input(format!(
            "no composition of {total_k} fits the available checkpoints ({} auth, {} bt, {} ft)",
            available.auth.len(),
            available.bt.len(),
            available.ft.len()
        )));
    }
    let mut ranked = Vec::with_capacity(compositions.len());
    for (a, c, e) in compositions {
        let spec = CombinationSpec::new(a, c, e, available.clone())?;
        let pool = build_pool(&spec, nbest_store)?;
        if let Some(refs) = eval_refs {
            if refs.len() != pool.num_sentences() {
                return Err(Error::input(format!(
                    "{} references but the pool has {} sentences",
                    refs.len(),
                    pool.num_sentences()
                )));
            }
        }
        let result = mbr_rerank(&pool, utility)?;
        let score = match eval_refs {
            Some(refs) => {
                let total: f64 = result
                    .selections
                    .iter()
                    .zip(refs)
                    .map(|(sel, reference)| utility.score(&sel.hypothesis.text, reference))
                    .sum();
                total / refs.len() as f64
            }
            None => result.corpus_consensus,
        };
        ranked.push((spec, score));
    }
    ranked
        .sort_by(|(sa, xa), (sb, xb)| xb.total_cmp(xa).then_with(|| sa.counts().cmp(&sb.counts())));
    Ok(ranked)
}
