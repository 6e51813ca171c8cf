//! Training-schedule compilation and deterministic batch streaming.
//!
//! A schedule is compiled into a manifest of update ranges, each assigned one
//! dataset. The block regime cycles auth → bt → auth → ft with equal block
//! lengths (the last block may be truncated); the mixed regime is a single
//! range over the shuffled concatenation of all datasets. Checkpoints are
//! tagged with the block that contains their update; a checkpoint falling
//! exactly on a block boundary belongs to the later block (ranges are
//! right-open), except the final checkpoint at the end of training, which
//! belongs to the last block.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{read_utf8, CheckpointId, Corpus, DatasetTag, SentencePair};
use crate::error::{Error, Result};

/// The four-phase dataset cycle of the block regime.
pub const BLOCK_CYCLE: [DatasetTag; 4] = [
    DatasetTag::Auth,
    DatasetTag::Bt,
    DatasetTag::Auth,
    DatasetTag::Ft,
];

pub const DEFAULT_CHECKPOINT_INTERVAL: u64 = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Block,
    Mixed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Block => "block",
            Regime::Mixed => "mixed",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(Regime::Block),
            "mixed" => Ok(Regime::Mixed),
            other => Err(Error::input(format!(
                "unknown regime '{other}' (expected block or mixed)"
            ))),
        }
    }
}

/// Dataset of a schedule block: one of the three training subsets, or the
/// shuffled concatenation of all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockType {
    Data(DatasetTag),
    Mixed,
}

impl BlockType {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockType::Data(tag) => tag.as_str(),
            BlockType::Mixed => "mixed",
        }
    }

    pub fn dataset(self) -> Option<DatasetTag> {
        match self {
            BlockType::Data(tag) => Some(tag),
            BlockType::Mixed => None,
        }
    }
}

impl From<DatasetTag> for BlockType {
    fn from(tag: DatasetTag) -> Self {
        BlockType::Data(tag)
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mixed" {
            return Ok(BlockType::Mixed);
        }
        Ok(BlockType::Data(s.parse()?))
    }
}

/// One contiguous range of updates trained on a single dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub start: u64,
    pub end: u64,
    pub block_type: BlockType,
    pub block_index: u64,
}

impl ScheduleEntry {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, update: u64) -> bool {
        self.start <= update && update < self.end
    }
}

/// Identifies a checkpoint by the block it was saved in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointTag {
    pub checkpoint_id: CheckpointId,
    pub update: u64,
    pub block_type: BlockType,
    pub block_index: u64,
}

/// A compiled training schedule: entries partition `[0, total_updates)`
/// exactly, with no gaps or overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleManifest {
    pub regime: Regime,
    pub block_size: u64,
    pub total_updates: u64,
    pub checkpoint_interval: u64,
    entries: Vec<ScheduleEntry>,
}

impl ScheduleManifest {
    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    /// The entry whose right-open range contains `update`. The end of
    /// training (`update == total_updates`) maps to the last entry.
    pub fn entry_at(&self, update: u64) -> Option<&ScheduleEntry> {
        if update > self.total_updates {
            return None;
        }
        if update == self.total_updates {
            return self.entries.last();
        }
        let idx = self.entries.partition_point(|e| e.end <= update);
        self.entries.get(idx)
    }

    pub fn block_type_at(&self, update: u64) -> Option<BlockType> {
        self.entry_at(update).map(|e| e.block_type)
    }

    /// Tags for every checkpoint, saved at each multiple of
    /// `checkpoint_interval` in `[checkpoint_interval, total_updates]`.
    pub fn checkpoint_tags(&self) -> Vec<CheckpointTag> {
        let mut tags = Vec::new();
        let mut update = self.checkpoint_interval;
        while update <= self.total_updates {
            let entry = self.entry_at(update).expect("update within schedule");
            tags.push(CheckpointTag {
                checkpoint_id: checkpoint_id_at(update),
                update,
                block_type: entry.block_type,
                block_index: entry.block_index,
            });
            update += self.checkpoint_interval;
        }
        tags
    }

    /// Non-fatal schedule problems, e.g. blocks too short to contain a
    /// checkpoint.
    pub fn warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.regime == Regime::Block && self.checkpoint_interval > self.block_size {
            warnings.push(format!(
                "checkpoint interval {} exceeds block size {}; some blocks will contain no checkpoint",
                self.checkpoint_interval, self.block_size
            ));
        }
        warnings
    }

    /// Checks the partition, cycle and length invariants.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::input("manifest has no entries"));
        }
        if self.total_updates == 0 {
            return Err(Error::input("manifest covers zero updates"));
        }
        let mut expected_start = 0;
        for (i, entry) in self.entries.iter().enumerate() {
            if entry.start != expected_start {
                return Err(Error::input(format!(
                    "entry {i} starts at {} but previous entry ended at {expected_start}",
                    entry.start
                )));
            }
            if entry.is_empty() {
                return Err(Error::input(format!("entry {i} is empty")));
            }
            if entry.block_index != i as u64 {
                return Err(Error::input(format!(
                    "entry {i} has block_index {}",
                    entry.block_index
                )));
            }
            expected_start = entry.end;
        }
        if expected_start != self.total_updates {
            return Err(Error::input(format!(
                "entries end at {expected_start} but the manifest declares {} updates",
                self.total_updates
            )));
        }
        match self.regime {
            Regime::Block => {
                let last = self.entries.len() - 1;
                for (i, entry) in self.entries.iter().enumerate() {
                    let expected = BlockType::Data(BLOCK_CYCLE[i % BLOCK_CYCLE.len()]);
                    if entry.block_type != expected {
                        return Err(Error::input(format!(
                            "entry {i} is {} but the cycle expects {expected}",
                            entry.block_type
                        )));
                    }
                    if i < last && entry.len() != self.block_size {
                        return Err(Error::input(format!(
                            "entry {i} has length {} but block size is {}",
                            entry.len(),
                            self.block_size
                        )));
                    }
                    if i == last && entry.len() > self.block_size {
                        return Err(Error::input(format!(
                            "final entry has length {} exceeding block size {}",
                            entry.len(),
                            self.block_size
                        )));
                    }
                }
            }
            Regime::Mixed => {
                for (i, entry) in self.entries.iter().enumerate() {
                    if entry.block_type != BlockType::Mixed {
                        return Err(Error::input(format!(
                            "entry {i} is {} in a mixed manifest",
                            entry.block_type
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Canonical checkpoint id for a given update count.
pub fn checkpoint_id_at(update: u64) -> CheckpointId {
    CheckpointId::new(format!("ckpt-{update:08}"))
}

fn check_positive(value: u64, what: &str) -> Result<()> {
    if value == 0 {
        return Err(Error::input(format!("{what} must be positive")));
    }
    Ok(())
}

/// Compiles a block-regime schedule: equal-length blocks cycling
/// auth → bt → auth → ft, the last block truncated to `total_updates`.
pub fn compile_block_schedule(
    block_size: u64,
    total_updates: u64,
    checkpoint_interval: u64,
) -> Result<ScheduleManifest> {
    check_positive(block_size, "block size")?;
    check_positive(total_updates, "total updates")?;
    check_positive(checkpoint_interval, "checkpoint interval")?;
    let mut entries = Vec::new();
    let mut start = 0;
    while start < total_updates {
        let end = (start + block_size).min(total_updates);
        let index = entries.len() as u64;
        entries.push(ScheduleEntry {
            start,
            end,
            block_type: BlockType::Data(BLOCK_CYCLE[entries.len() % BLOCK_CYCLE.len()]),
            block_index: index,
        });
        start = end;
    }
    let manifest = ScheduleManifest {
        regime: Regime::Block,
        block_size,
        total_updates,
        checkpoint_interval,
        entries,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Compiles a mixed-regime schedule: one entry over the shuffled
/// concatenation of all datasets.
pub fn compile_mixed_schedule(
    total_updates: u64,
    checkpoint_interval: u64,
) -> Result<ScheduleManifest> {
    check_positive(total_updates, "total updates")?;
    check_positive(checkpoint_interval, "checkpoint interval")?;
    let manifest = ScheduleManifest {
        regime: Regime::Mixed,
        block_size: total_updates,
        total_updates,
        checkpoint_interval,
        entries: vec![ScheduleEntry {
            start: 0,
            end: total_updates,
            block_type: BlockType::Mixed,
            block_index: 0,
        }],
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Serializes a manifest: a `#regime=… block_size=… ckpt_interval=…` header
/// followed by `start\tend\tdataset\tblock_index` lines.
pub fn manifest_to_string(manifest: &ScheduleManifest) -> String {
    let mut out = format!(
        "#regime={} block_size={} ckpt_interval={}\n",
        manifest.regime, manifest.block_size, manifest.checkpoint_interval
    );
    for entry in manifest.entries() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            entry.start, entry.end, entry.block_type, entry.block_index
        ));
    }
    out
}

pub fn save_manifest(manifest: &ScheduleManifest, path: &Path) -> Result<()> {
    std::fs::write(path, manifest_to_string(manifest)).map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: &Path) -> Result<ScheduleManifest> {
    let text = read_utf8(path)?;
    let mut lines = text
        .strip_suffix('\n')
        .unwrap_or(&text)
        .split('\n')
        .enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::data(path, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(path, 1, "missing '#regime=…' header"))?;
    let mut regime = None;
    let mut block_size = None;
    let mut checkpoint_interval = None;
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(path, 1, format!("malformed header field '{field}'")))?;
        match key {
            "regime" => {
                regime = Some(
                    value
                        .parse::<Regime>()
                        .map_err(|e| Error::parse(path, 1, e.to_string()))?,
                )
            }
            "block_size" => {
                block_size =
                    Some(value.parse::<u64>().map_err(|_| {
                        Error::parse(path, 1, format!("invalid block_size '{value}'"))
                    })?)
            }
            "ckpt_interval" => {
                checkpoint_interval = Some(value.parse::<u64>().map_err(|_| {
                    Error::parse(path, 1, format!("invalid ckpt_interval '{value}'"))
                })?)
            }
            other => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("unknown header field '{other}'"),
                ))
            }
        }
    }
    let regime = regime.ok_or_else(|| Error::parse(path, 1, "header missing regime"))?;
    let block_size =
        block_size.ok_or_else(|| Error::parse(path, 1, "header missing block_size"))?;
    let checkpoint_interval =
        checkpoint_interval.ok_or_else(|| Error::parse(path, 1, "header missing ckpt_interval"))?;
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let parse_u64 = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::parse(path, line_no, format!("invalid {what} '{s}'")))
        };
        entries.push(ScheduleEntry {
            start: parse_u64(fields[0], "start")?,
            end: parse_u64(fields[1], "end")?,
            block_type: fields[2]
                .parse()
                .map_err(|e: Error| Error::parse(path, line_no, e.to_string()))?,
            block_index: parse_u64(fields[3], "block_index")?,
        });
    }
    let total_updates = entries.last().map(|e| e.end).unwrap_or(0);
    let manifest = ScheduleManifest {
        regime,
        block_size,
        total_updates,
        checkpoint_interval,
        entries,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Serializes checkpoint tags as `checkpoint_id\tupdate\tblock_type\tblock_index`.
pub fn tags_to_string(tags: &[CheckpointTag]) -> String {
    let mut out = String::new();
    for tag in tags {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            tag.checkpoint_id, tag.update, tag.block_type, tag.block_index
        ));
    }
    out
}

pub fn save_checkpoint_tags(tags: &[CheckpointTag], path: &Path) -> Result<()> {
    std::fs::write(path, tags_to_string(tags)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint_tags(path: &Path) -> Result<Vec<CheckpointTag>> {
    let text = read_utf8(path)?;
    if text.is_empty() {
        return Err(Error::data(path, "empty file"));
    }
    let mut tags = Vec::new();
    for (i, line) in text
        .strip_suffix('\n')
        .unwrap_or(&text)
        .split('\n')
        .enumerate()
    {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        tags.push(CheckpointTag {
            checkpoint_id: CheckpointId::new(fields[0]),
            update: fields[1].parse().map_err(|_| {
                Error::parse(path, line_no, format!("invalid update '{}'", fields[1]))
            })?,
            block_type: fields[2]
                .parse()
                .map_err(|e: Error| Error::parse(path, line_no, e.to_string()))?,
            block_index: fields[3].parse().map_err(|_| {
                Error::parse(
                    path,
                    line_no,
                    format!("invalid block_index '{}'", fields[3]),
                )
            })?,
        });
    }
    Ok(tags)
}

/// Deterministic index stream over `0..size`: a seeded permutation per
/// epoch, reshuffled with `seed + epoch` when it wraps around.
#[derive(Debug, Clone)]
pub struct ShuffleCursor {
    size: usize,
    seed: u64,
    epoch: u64,
    pos: usize,
    perm: Vec<usize>,
}

impl ShuffleCursor {
    pub fn new(size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::input("shuffle cursor over an empty collection"));
        }
        let mut cursor = ShuffleCursor {
            size,
            seed,
            epoch: 0,
            pos: 0,
            perm: Vec::new(),
        };
        cursor.reshuffle();
        Ok(cursor)
    }

    fn reshuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(self.epoch));
        self.perm = (0..self.size).collect();
        self.perm.shuffle(&mut rng);
        self.pos = 0;
    }

    pub fn next_index(&mut self) -> usize {
        let index = self.perm[self.pos];
        self.pos += 1;
        if self.pos == self.size {
            self.epoch += 1;
            self.reshuffle();
        }
        index
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

enum StreamSource<'a> {
    /// One cursor per dataset; cursor position persists across blocks of the
    /// same dataset.
    PerTag(BTreeMap<DatasetTag, (ShuffleCursor, &'a Corpus)>),
    /// Mixed regime: one cursor over the concatenation auth ++ bt ++ ft.
    Concatenated {
        cursor: ShuffleCursor,
        segments: Vec<&'a Corpus>,
    },
}

/// Deterministic iterator of `(update_index, batch)` following a manifest.
pub struct BatchStream<'a> {
    manifest: &'a ScheduleManifest,
    source: StreamSource<'a>,
    batch_size: usize,
    update: u64,
}

impl<'a> Iterator for BatchStream<'a> {
    type Item = (u64, Vec<&'a SentencePair>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.update >= self.manifest.total_updates {
            return None;
        }
        let entry = self
            .manifest
            .entry_at(self.update)
            .expect("update within schedule");
        let mut batch = Vec::with_capacity(self.batch_size);
        match &mut self.source {
            StreamSource::PerTag(cursors) => {
                let tag = entry.block_type.dataset().expect("block manifest");
                let (cursor, corpus) = cursors.get_mut(&tag).expect("validated corpus");
                for _ in 0..self.batch_size {
                    batch.push(&corpus.pairs()[cursor.next_index()]);
                }
            }
            StreamSource::Concatenated { cursor, segments } => {
                for _ in 0..self.batch_size {
                    let mut index = cursor.next_index();
                    let segment = segments
                        .iter()
                        .find(|c| {
                            if index < c.size() {
                                true
                            } else {
                                index -= c.size();
                                false
                            }
                        })
                        .expect("index within concatenation");
                    batch.push(&segment.pairs()[index]);
                }
            }
        }
        let update = self.update;
        self.update += 1;
        Some((update, batch))
    }
}

/// Streams batches for a manifest from the given corpora. Every dataset the
/// manifest schedules must be present (all three for the mixed regime);
/// missing or empty corpora fail here, before iteration starts.
pub fn batch_stream<'a>(
    manifest: &'a ScheduleManifest,
    corpora: &'a BTreeMap<DatasetTag, Corpus>,
    batch_size: usize,
    seed: u64,
) -> Result<BatchStream<'a>> {
    if batch_size == 0 {
        return Err(Error::input("batch size must be positive"));
    }
    for (tag, corpus) in corpora {
        if corpus.dataset != *tag {
            return Err(Error::input(format!(
                "corpus registered under {tag} is tagged {}",
                corpus.dataset
            )));
        }
    }
    let source = match manifest.regime {
        Regime::Block => {
            let mut cursors = BTreeMap::new();
            for entry in manifest.entries() {
                let tag = entry.block_type.dataset().expect("block manifest entry");
                if cursors.contains_key(&tag) {
                    continue;
                }
                let corpus = corpora.get(&tag).ok_or_else(|| {
                    Error::input(format!(
                        "manifest schedules {tag} but no such corpus was given"
                    ))
                })?;
                if corpus.size() == 0 {
                    return Err(Error::input(format!("corpus {tag} is empty")));
                }
                cursors.insert(tag, (ShuffleCursor::new(corpus.size(), seed)?, corpus));
            }
            StreamSource::PerTag(cursors)
        }
        Regime::Mixed => {
            let mut segments = Vec::new();
            let mut total = 0;
            for tag in DatasetTag::ALL {
                let corpus = corpora
                    .get(&tag)
                    .ok_or_else(|| Error::input(format!("mixed regime requires corpus {tag}")))?;
                if corpus.size() == 0 {
                    return Err(Error::input(format!("corpus {tag} is empty")));
                }
                total += corpus.size();
                segments.push(corpus);
            }
            StreamSource::Concatenated {
                cursor: ShuffleCursor::new(total, seed)?,
                segments,
            }
        }
    };
    Ok(BatchStream {
        manifest,
        source,
        batch_size,
        update: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(tag: DatasetTag, size: usize) -> Corpus {
        let pairs = (0..size)
            .map(|i| {
                SentencePair::new(format!("src {tag} {i}"), format!("tgt {tag} {i}"), tag).unwrap()
            })
            .collect();
        Corpus::new(format!("{tag}-corpus"), tag, pairs).unwrap()
    }

    #[test]
    fn block_schedule_cycle_20k_80k() {
        let m = compile_block_schedule(20_000, 80_000, 5000).unwrap();
        let spans: Vec<(u64, u64, BlockType)> = m
            .entries()
            .iter()
            .map(|e| (e.start, e.end, e.block_type))
            .collect();
        assert_eq!(
            spans,
            vec![
                (0, 20_000, BlockType::Data(DatasetTag::Auth)),
                (20_000, 40_000, BlockType::Data(DatasetTag::Bt)),
                (40_000, 60_000, BlockType::Data(DatasetTag::Auth)),
                (60_000, 80_000, BlockType::Data(DatasetTag::Ft)),
            ]
        );
    }

    #[test]
    fn single_block_all_checkpoints_auth() {
        let m = compile_block_schedule(40_000, 40_000, 5000).unwrap();
        assert_eq!(m.entries().len(), 1);
        let tags = m.checkpoint_tags();
        assert_eq!(tags.len(), 8);
        assert!(tags
            .iter()
            .all(|t| t.block_type == BlockType::Data(DatasetTag::Auth)));
        assert_eq!(tags.last().unwrap().update, 40_000);
    }

    #[test]
    fn long_run_counts() {
        // 1 440 000 / 40 000 = 36 blocks, / 5 000 = 288 checkpoints
        let m = compile_block_schedule(40_000, 1_440_000, 5000).unwrap();
        assert_eq!(m.entries().len(), 36);
        assert_eq!(m.checkpoint_tags().len(), 288);
    }

    #[test]
    fn truncated_final_block() {
        let m = compile_block_schedule(1000, 2500, 500).unwrap();
        assert_eq!(m.entries().len(), 3);
        assert_eq!(m.entries()[2].len(), 500);
        m.validate().unwrap();
    }

    #[test]
    fn boundary_checkpoint_belongs_to_later_block() {
        let m = compile_block_schedule(100, 400, 100).unwrap();
        // update 100 is the first update range boundary: later block owns it
        assert_eq!(m.block_type_at(100), Some(BlockType::Data(DatasetTag::Bt)));
        // the end of training belongs to the last block
        assert_eq!(m.block_type_at(400), Some(BlockType::Data(DatasetTag::Ft)));
        assert_eq!(m.block_type_at(401), None);
    }

    #[test]
    fn interval_longer_than_block_warns_but_compiles() {
        let m = compile_block_schedule(1000, 8000, 3000).unwrap();
        assert_eq!(m.warnings().len(), 1);
        let ok = compile_block_schedule(4000, 8000, 1000).unwrap();
        assert!(ok.warnings().is_empty());
    }

    #[test]
    fn mixed_schedule_shape() {
        let m = compile_mixed_schedule(10_000, 5000).unwrap();
        assert_eq!(m.entries().len(), 1);
        assert_eq!(m.entries()[0].block_type, BlockType::Mixed);
        assert_eq!(m.checkpoint_tags().len(), 2);
        assert_eq!(
            compile_mixed_schedule(1_440_000, 5000)
                .unwrap()
                .checkpoint_tags()
                .len(),
            288
        );
    }

    #[test]
    fn zero_updates_rejected() {
        assert!(compile_mixed_schedule(0, 5000).is_err());
        assert!(compile_block_schedule(1000, 0, 5000).is_err());
        assert!(compile_block_schedule(0, 1000, 5000).is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let m = compile_block_schedule(20_000, 70_000, 5000).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.tsv");
        save_manifest(&m, &path).unwrap();
        let reloaded = load_manifest(&path).unwrap();
        assert_eq!(m, reloaded);
    }

    #[test]
    fn tags_roundtrip() {
        let m = compile_block_schedule(200, 1000, 100).unwrap();
        let tags = m.checkpoint_tags();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tags.tsv");
        save_checkpoint_tags(&tags, &path).unwrap();
        assert_eq!(load_checkpoint_tags(&path).unwrap(), tags);
    }

    #[test]
    fn one_epoch_exact_coverage() {
        // 4 pairs, batch 2, one 2-update block: each pair exactly once
        let m = compile_block_schedule(2, 2, 1).unwrap();
        let mut corpora = BTreeMap::new();
        corpora.insert(DatasetTag::Auth, corpus(DatasetTag::Auth, 4));
        let stream = batch_stream(&m, &corpora, 2, 7).unwrap();
        let mut seen = Vec::new();
        for (_, batch) in stream {
            for pair in batch {
                seen.push(pair.source.clone());
            }
        }
        seen.sort();
        let mut expected: Vec<String> = (0..4).map(|i| format!("src auth {i}")).collect();
        expected.sort();
        assert_eq!(seen, expected);
    }

    #[test]
    fn stream_is_deterministic() {
        let m = compile_block_schedule(8, 32, 4).unwrap();
        let mut corpora = BTreeMap::new();
        for tag in DatasetTag::ALL {
            corpora.insert(tag, corpus(tag, 5));
        }
        let collect = || {
            batch_stream(&m, &corpora, 3, 42)
                .unwrap()
                .map(|(u, b)| (u, b.iter().map(|p| p.source.clone()).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        };
        assert_eq!(collect(), collect());
    }

    #[test]
    fn missing_corpus_fails_before_iteration() {
        let m = compile_block_schedule(8, 32, 4).unwrap();
        let mut corpora = BTreeMap::new();
        corpora.insert(DatasetTag::Auth, corpus(DatasetTag::Auth, 5));
        assert!(batch_stream(&m, &corpora, 2, 0).is_err());

        let mixed = compile_mixed_schedule(10, 5).unwrap();
        assert!(batch_stream(&mixed, &corpora, 2, 0).is_err());
    }

    #[test]
    fn mixed_stream_one_epoch_coverage() {
        // corpora of sizes 6/3/3, 6 updates × batch 2 = 12 draws = one epoch
        let mixed = compile_mixed_schedule(6, 3).unwrap();
        let mut corpora = BTreeMap::new();
        corpora.insert(DatasetTag::Auth, corpus(DatasetTag::Auth, 6));
        corpora.insert(DatasetTag::Bt, corpus(DatasetTag::Bt, 3));
        corpora.insert(DatasetTag::Ft, corpus(DatasetTag::Ft, 3));
        let stream = batch_stream(&mixed, &corpora, 2, 11).unwrap();
        let mut seen = Vec::new();
        for (_, batch) in stream {
            for pair in batch {
                seen.push(pair.source.clone());
            }
        }
        assert_eq!(seen.len(), 12);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 12, "every pair appears exactly once");
    }

    #[test]
    fn mixed_stream_matches_independent_permutation_replay() {
        let mixed = compile_mixed_schedule(6, 3).unwrap();
        let mut corpora = BTreeMap::new();
        corpora.insert(DatasetTag::Auth, corpus(DatasetTag::Auth, 6));
        corpora.insert(DatasetTag::Bt, corpus(DatasetTag::Bt, 3));
        corpora.insert(DatasetTag::Ft, corpus(DatasetTag::Ft, 3));
        let seed = 11u64;
        let got: Vec<String> = batch_stream(&mixed, &corpora, 2, seed)
            .unwrap()
            .flat_map(|(_, batch)| {
                batch
                    .into_iter()
                    .map(|p| p.source.clone())
                    .collect::<Vec<_>>()
            })
            .collect();

        // independent replay: shuffle 0..12 with the same seeding rule and
        // map indices over the auth ++ bt ++ ft concatenation by hand
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut rng);
        let all: Vec<String> = DatasetTag::ALL
            .iter()
            .flat_map(|t| corpora[t].pairs().iter().map(|p| p.source.clone()))
            .collect();
        let expected: Vec<String> = perm.iter().map(|&i| all[i].clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn cursor_persists_across_blocks_of_same_tag() {
        // two auth blocks with a bt block between; auth sampling must not restart
        let m = compile_block_schedule(2, 6, 2).unwrap();
        let mut corpora = BTreeMap::new();
        corpora.insert(DatasetTag::Auth, corpus(DatasetTag::Auth, 8));
        corpora.insert(DatasetTag::Bt, corpus(DatasetTag::Bt, 4));
        let stream = batch_stream(&m, &corpora, 2, 5).unwrap();
        let auth_sources: Vec<String> = stream
            .filter(|(u, _)| m.block_type_at(*u) == Some(BlockType::Data(DatasetTag::Auth)))
            .flat_map(|(_, b)| b.into_iter().map(|p| p.source.clone()).collect::<Vec<_>>())
            .collect();
        // 2 auth blocks × 2 updates × batch 2 = 8 draws = exactly one epoch of 8
        let mut sorted = auth_sources.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 8, "no pair repeated: cursor persisted");
    }
}
