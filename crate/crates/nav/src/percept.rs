//! Lidar preprocessing: min-pooling the 1,440-beam scan down to 80 rays,
//! clipping at 4 m, and splitting the result into 10 sectors of
//! robot-centric Cartesian points.

use crate::core::Point2;
use crate::world::{LidarScan, LIDAR_BEAMS};

/// Pooled beam count.
pub const POOLED_BEAMS: usize = 80;
/// Source beams per pooled ray.
pub const POOL_GROUP: usize = LIDAR_BEAMS / POOLED_BEAMS; // 18
/// Clip distance for pooled ranges, meters.
pub const CLIP_RANGE: f64 = 4.0;
/// Number of sectors.
pub const SECTORS: usize = 10;
/// Pooled beams per sector.
pub const BEAMS_PER_SECTOR: usize = POOLED_BEAMS / SECTORS; // 8
/// Numbers per sector fed to the embedding network (8 beams x (x, y)).
pub const SECTOR_WIDTH: usize = 2 * BEAMS_PER_SECTOR; // 16

/// 80 min-pooled, clipped ranges at 4.5 degree resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledScan {
    pub ranges: [f64; POOLED_BEAMS],
}

impl PooledScan {
    /// Pooled ray `k` keeps the angle of its first source beam: 4.5k degrees.
    pub fn beam_angle(k: usize) -> f64 {
        LidarScan::beam_angle(k * POOL_GROUP)
    }
}

/// 10 sectors of 8 Cartesian points each, flattened to 16 numbers per
/// sector as `(x0, y0, x1, y1, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorInput {
    pub sectors: [[f64; SECTOR_WIDTH]; SECTORS],
}

/// Min-pools each group of 18 beams and clips the result at 4 m.
///
/// # Panics
/// Panics unless the scan has exactly 1,440 beams.
pub fn min_pool(scan: &LidarScan) -> PooledScan {
    assert_eq!(scan.ranges.len(), LIDAR_BEAMS, "expected a 1,440-beam scan");
    let mut ranges = [0.0; POOLED_BEAMS];
    for (k, out) in ranges.iter_mut().enumerate() {
        let group = &scan.ranges[k * POOL_GROUP..(k + 1) * POOL_GROUP];
        *out = group.iter().copied().fold(f64::INFINITY, f64::min).min(CLIP_RANGE);
    }
    PooledScan { ranges }
}

/// Splits the pooled scan into 10 contiguous sectors and converts each
/// beam to robot-centric Cartesian coordinates at its beam angle.
pub fn sectorize(pooled: &PooledScan) -> SectorInput {
    let mut sectors = [[0.0; SECTOR_WIDTH]; SECTORS];
    for j in 0..SECTORS {
        for b in 0..BEAMS_PER_SECTOR {
            let k = j * BEAMS_PER_SECTOR + b;
            let a = PooledScan::beam_angle(k);
            let r = pooled.ranges[k];
            sectors[j][2 * b] = r * a.cos();
            sectors[j][2 * b + 1] = r * a.sin();
        }
    }
    SectorInput { sectors }
}

/// Full pipeline from a raw scan to the attention-network input.
pub fn preprocess(scan: &LidarScan) -> SectorInput {
    sectorize(&min_pool(scan))
}

/// Cartesian point of pooled beam `k` in a sector input.
pub fn sector_point(input: &SectorInput, k: usize) -> Point2 {
    let j = k / BEAMS_PER_SECTOR;
    let b = k % BEAMS_PER_SECTOR;
    [input.sectors[j][2 * b], input.sectors[j][2 * b + 1]]
}
