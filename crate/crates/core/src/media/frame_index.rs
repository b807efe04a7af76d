use serde::{Deserialize, Serialize};

use super::MediaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub ordinal: u32,
    /// Presentation time inside the video file.
    pub media_ms: u64,
    /// Recording time on the zero-based bag timeline.
    pub bag_time_ms: u64,
}

/// Maps video playback time to bag time. The container plays at a constant
/// nominal rate while the recording may not; this table carries the real
/// stamps.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameIndex {
    pub frame_interval_us: u32,
    pub entries: Vec<FrameEntry>,
}

impl FrameIndex {
    /// Builds the index for frames played back every `frame_interval_us`.
    pub fn from_bag_times(frame_interval_us: u32, bag_times_ms: &[u64]) -> FrameIndex {
        let entries = bag_times_ms
            .iter()
            .enumerate()
            .map(|(i, &bag_time_ms)| FrameEntry {
                ordinal: i as u32,
                media_ms: i as u64 * frame_interval_us as u64 / 1000,
                bag_time_ms,
            })
            .collect();
        FrameIndex {
            frame_interval_us,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Bag time of the latest frame shown at or before `media_ms`, clamped to
/// the first and last frames.
pub fn media_time_to_bag_ms(index: &FrameIndex, media_ms: u64) -> Result<u64, MediaError> {
    let first = index.entries.first().ok_or(MediaError::EmptyIndex)?;
    let after = index.entries.partition_point(|e| e.media_ms <= media_ms);
    Ok(match after {
        0 => first.bag_time_ms,
        n => index.entries[n - 1].bag_time_ms,
    })
}

/// Median gap between consecutive stamps; `fallback_us` for fewer than two.
pub fn median_interval_us(bag_times_us: &[u64], fallback_us: u32) -> u32 {
    let mut gaps: Vec<u64> = bag_times_us.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
    if gaps.is_empty() {
        return fallback_us;
    }
    gaps.sort_unstable();
    let n = gaps.len();
    let median = if n % 2 == 1 { gaps[n / 2] } else { (gaps[n / 2 - 1] + gaps[n / 2]) / 2 };
    median.clamp(1, u32::MAX as u64) as u32
}
