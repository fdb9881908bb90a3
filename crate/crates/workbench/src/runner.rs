//! Parallel drivers for the pulse-level simulator: shards fan out over the
//! rayon pool and merge by index, so the result is identical to the serial
//! run for the same seed.

use anyhow::Result;
use rayon::prelude::*;

use nsaqkd_core::montecarlo::{
    bb84_shard_indices, mdi_shard_indices, simulate_bb84_shard, simulate_mdi_shard,
    Bb84SessionConfig, MdiSessionConfig, ObservedStatisticsBb84, ObservedStatisticsMdi,
};

pub fn simulate_mdi_parallel(cfg: &MdiSessionConfig) -> Result<ObservedStatisticsMdi> {
    let shards = mdi_shard_indices(cfg).map_err(anyhow::Error::msg)?;
    Ok(shards
        .par_iter()
        .map(|&shard| simulate_mdi_shard(cfg, shard))
        .reduce(ObservedStatisticsMdi::default, |mut acc, part| {
            acc.merge(&part);
            acc
        }))
}

pub fn simulate_bb84_parallel(cfg: &Bb84SessionConfig) -> Result<ObservedStatisticsBb84> {
    let shards = bb84_shard_indices(cfg).map_err(anyhow::Error::msg)?;
    Ok(shards
        .par_iter()
        .map(|&shard| simulate_bb84_shard(cfg, shard))
        .reduce(ObservedStatisticsBb84::default, |mut acc, part| {
            acc.merge(&part);
            acc
        }))
}
