//! Parameter snapshots and the two ways of combining them: per-update
//! exponential smoothing and consecutive-k checkpoint averaging.
//!
//! Snapshots store values in single precision; all accumulation (smoothing
//! recursion, averaging sums) runs in double precision. Snapshot files use
//! the `PSNAP1` format: a magic line, an ASCII header carrying dimension,
//! update and tag, then little-endian 32-bit floats.

use std::path::Path;

use crate::corpus::CheckpointId;
use crate::error::{Error, Result};
use crate::schedule::CheckpointTag;

const SNAPSHOT_MAGIC: &[u8] = b"PSNAP1\n";

/// Suffix appended to a checkpoint id when an averaging window crossed a
/// block boundary.
pub const SPAN_FLAG: &str = "+span";

/// A flat parameter vector at a given update, optionally tagged with the
/// block it was saved in.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot {
    values: Vec<f32>,
    pub update: u64,
    pub tag: Option<CheckpointTag>,
}

impl ParamSnapshot {
    /// All values must be finite and the vector non-empty.
    pub fn new(values: Vec<f32>, update: u64, tag: Option<CheckpointTag>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("parameter snapshot has dimension 0"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "parameter snapshot has non-finite value at index {pos}"
            )));
        }
        Ok(ParamSnapshot {
            values,
            update,
            tag,
        })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// True when the averaging that produced this snapshot crossed a block
    /// boundary.
    pub fn spans_blocks(&self) -> bool {
        self.tag
            .as_ref()
            .is_some_and(|t| t.checkpoint_id.as_str().ends_with(SPAN_FLAG))
    }
}

/// Online exponential smoothing of a parameter stream:
/// smoothed' = alpha * theta + (1 - alpha) * smoothed.
///
/// The default behaviour initializes the smoothed vector from the first
/// input. With bias correction enabled, the state instead starts at zero and
/// reported snapshots are divided by `1 - (1 - alpha)^t`, the standard
/// zero-init correction; the recursion itself is unchanged.
#[derive(Debug, Clone)]
pub struct SmoothingState {
    alpha: f64,
    smoothed: Option<Vec<f64>>,
    updates_seen: u64,
    bias_correction: bool,
}

impl SmoothingState {
    /// Requires alpha in (0, 1).
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::input(format!(
                "smoothing factor must be in (0, 1), got {alpha}"
            )));
        }
        Ok(SmoothingState {
            alpha,
            smoothed: None,
            updates_seen: 0,
            bias_correction: false,
        })
    }

    /// Degenerate raw-passthrough state (alpha = 1): the smoothed vector
    /// always equals the latest input. Meant for comparisons and tests.
    pub fn with_alpha_one() -> Self {
        SmoothingState {
            alpha: 1.0,
            smoothed: None,
            updates_seen: 0,
            bias_correction: false,
        }
    }

    /// Starts from an explicit initial vector instead of the first input.
    pub fn with_initial(alpha: f64, initial: &ParamSnapshot) -> Result<Self> {
        let mut state = SmoothingState::new(alpha)?;
        state.smoothed = Some(initial.values().iter().map(|&v| f64::from(v)).collect());
        Ok(state)
    }

    /// Zero-initialized state with bias-corrected reporting.
    pub fn with_bias_correction(alpha: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("smoothing state has dimension 0"));
        }
        let mut state = SmoothingState::new(alpha)?;
        state.smoothed = Some(vec![0.0; dim]);
        state.bias_correction = true;
        Ok(state)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn updates_seen(&self) -> u64 {
        self.updates_seen
    }

    pub fn smoothed(&self) -> Option<&[f64]> {
        self.smoothed.as_deref()
    }

    /// Applies one smoothing step. An empty state adopts the input as-is.
    pub fn step(&mut self, theta: &ParamSnapshot) -> Result<()> {
        match &mut self.smoothed {
            None => {
                self.smoothed = Some(theta.values().iter().map(|&v| f64::from(v)).collect());
            }
            Some(smoothed) => {
                if smoothed.len() != theta.dim() {
                    return Err(Error::input(format!(
                        "dimension mismatch: state has {}, input has {}",
                        smoothed.len(),
                        theta.dim()
                    )));
                }
                let alpha = self.alpha;
                for (s, &t) in smoothed.iter_mut().zip(theta.values()) {
                    *s = alpha * f64::from(t) + (1.0 - alpha) * *s;
                }
            }
        }
        self.updates_seen += 1;
        Ok(())
    }

    /// The smoothed parameters as a storable snapshot, bias-corrected when
    /// the state was built that way.
    pub fn snapshot(&self, update: u64, tag: Option<CheckpointTag>) -> Result<ParamSnapshot> {
        let smoothed = self
            .smoothed
            .as_ref()
            .ok_or_else(|| Error::input("smoothing state has seen no parameters"))?;
        let correction = if self.bias_correction && self.updates_seen > 0 {
            1.0 - (1.0 - self.alpha).powi(self.updates_seen as i32)
        } else {
            1.0
        };
        let values = smoothed.iter().map(|&v| (v / correction) as f32).collect();
        ParamSnapshot::new(values, update, tag)
    }
}

/// Elementwise arithmetic mean of the last `k` snapshots. The result carries
/// the update and tag of the newest input; when the window's tags cover more
/// than one block, the result's checkpoint id is flagged with [`SPAN_FLAG`].
pub fn average_consecutive(snapshots: &[ParamSnapshot], k: usize) -> Result<ParamSnapshot> {
    if k == 0 {
        return Err(Error::input("averaging window must be at least 1"));
    }
    if snapshots.len() < k {
        return Err(Error::input(format!(
            "need at least {k} snapshots, got {}",
            snapshots.len()
        )));
    }
    let window = &snapshots[snapshots.len() - k..];
    for pair in window.windows(2) {
        if pair[1].update < pair[0].update {
            return Err(Error::input(format!(
                "snapshots out of order: update {} after {}",
                pair[1].update, pair[0].update
            )));
        }
    }
    let dim = window[0].dim();
    let mut sum = vec![0.0f64; dim];
    for snap in window {
        if snap.dim() != dim {
            return Err(Error::input(format!(
                "dimension mismatch: {} vs {dim}",
                snap.dim()
            )));
        }
        for (acc, &v) in sum.iter_mut().zip(snap.values()) {
            *acc += f64::from(v);
        }
    }
    let values: Vec<f32> = sum.iter().map(|&s| (s / k as f64) as f32).collect();
    let newest = window.last().expect("window non-empty");
    let mut tag = newest.tag.clone();
    let distinct_blocks: std::collections::BTreeSet<u64> = window
        .iter()
        .filter_map(|s| s.tag.as_ref().map(|t| t.block_index))
        .collect();
    if distinct_blocks.len() > 1 {
        if let Some(t) = &mut tag {
            t.checkpoint_id = CheckpointId::new(format!("{}{SPAN_FLAG}", t.checkpoint_id));
        }
    }
    ParamSnapshot::new(values, newest.update, tag)
}

/// Replays smoothing over an ordered stream of per-update snapshots,
/// emitting the smoothed parameters at every multiple of `emit_every` —
/// checkpoint saving of smoothed parameters, after the fact.
///
/// Updates must be consecutive. Alpha may be 1 (degenerate passthrough) for
/// comparisons against the raw stream.
pub fn replay_smoothing<I>(stream: I, alpha: f64, emit_every: u64) -> Result<Vec<ParamSnapshot>>
where
    I: IntoIterator<Item = ParamSnapshot>,
{
    if emit_every == 0 {
        return Err(Error::input("emit interval must be positive"));
    }
    let mut state = if alpha == 1.0 {
        SmoothingState::with_alpha_one()
    } else {
        SmoothingState::new(alpha)?
    };
    let mut emitted = Vec::new();
    let mut prev_update: Option<u64> = None;
    for snap in stream {
        if let Some(prev) = prev_update {
            if snap.update != prev + 1 {
                return Err(Error::input(format!(
                    "stream updates must be consecutive: got {} after {prev}",
                    snap.update
                )));
            }
        }
        prev_update = Some(snap.update);
        state.step(&snap)?;
        if snap.update > 0 && snap.update % emit_every == 0 {
            emitted.push(state.snapshot(snap.update, snap.tag.clone())?);
        }
    }
    Ok(emitted)
}

fn encode_tag(tag: &Option<CheckpointTag>) -> String {
    match tag {
        None => "-".to_string(),
        Some(t) => format!(
            "{}:{}:{}:{}",
            t.checkpoint_id, t.update, t.block_type, t.block_index
        ),
    }
}

fn decode_tag(s: &str, path: &Path) -> Result<Option<CheckpointTag>> {
    if s == "-" {
        return Ok(None);
    }
    let parts: Vec<&str> = s.rsplitn(4, ':').collect();
    if parts.len() != 4 {
        return Err(Error::data(path, format!("malformed tag '{s}'")));
    }
    // rsplitn yields fields in reverse order
    Ok(Some(CheckpointTag {
        checkpoint_id: CheckpointId::new(parts[3]),
        update: parts[2]
            .parse()
            .map_err(|_| Error::data(path, format!("malformed tag update in '{s}'")))?,
        block_type: parts[1]
            .parse()
            .map_err(|e: Error| Error::data(path, e.to_string()))?,
        block_index: parts[0]
            .parse()
            .map_err(|_| Error::data(path, format!("malformed tag block_index in '{s}'")))?,
    }))
}

/// Serializes a snapshot in the `PSNAP1` format.
pub fn snapshot_to_bytes(snapshot: &ParamSnapshot) -> Result<Vec<u8>> {
    let tag = encode_tag(&snapshot.tag);
    if tag.contains(char::is_whitespace) {
        return Err(Error::input(format!("tag '{tag}' contains whitespace")));
    }
    let mut bytes = Vec::with_capacity(64 + snapshot.dim() * 4);
    bytes.extend_from_slice(SNAPSHOT_MAGIC);
    bytes.extend_from_slice(
        format!(
            "dim={} update={} tag={}\n",
            snapshot.dim(),
            snapshot.update,
            tag
        )
        .as_bytes(),
    );
    for v in snapshot.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Ok(bytes)
}

/// Writes a snapshot in the `PSNAP1` format.
pub fn save_snapshot(snapshot: &ParamSnapshot, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot_to_bytes(snapshot)?).map_err(|e| Error::io(path, e))
}

/// Reads a `PSNAP1` snapshot file.
pub fn load_snapshot(path: &Path) -> Result<ParamSnapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let rest = bytes
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| Error::data(path, "not a PSNAP1 file (bad magic)"))?;
    let header_end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::data(path, "unterminated header"))?;
    let header = std::str::from_utf8(&rest[..header_end])
        .map_err(|_| Error::data(path, "header is not UTF-8"))?;
    let mut dim = None;
    let mut update = None;
    let mut tag = None;
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::data(path, format!("malformed header field '{field}'")))?;
        match key {
            "dim" => {
                dim = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| Error::data(path, format!("invalid dim '{value}'")))?,
                )
            }
            "update" => {
                update = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| Error::data(path, format!("invalid update '{value}'")))?,
                )
            }
            "tag" => tag = Some(decode_tag(value, path)?),
            other => return Err(Error::data(path, format!("unknown header field '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::data(path, "header missing dim"))?;
    let update = update.ok_or_else(|| Error::data(path, "header missing update"))?;
    let tag = tag.ok_or_else(|| Error::data(path, "header missing tag"))?;
    let payload = &rest[header_end + 1..];
    if payload.len() != dim * 4 {
        return Err(Error::data(
            path,
            format!(
                "expected {} payload bytes for dim={dim}, got {}",
                dim * 4,
                payload.len()
            ),
        ));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ParamSnapshot::new(values, update, tag).map_err(|e| Error::data(path, e.to_string()))
}
