//! Replays a recorded trajectory from its event log.

use crate::error::{Error, Result};
use crate::glauber::TrajectoryRecord;
use crate::model::Model;
use crate::spins::SpinConfig;

/// Calls `segment(t0, t1, sigma)` for each maximal interval on which the configuration is constant.
/// Returns the final configuration.
pub fn replay<F>(model: &Model, record: &TrajectoryRecord, mut segment: F) -> Result<SpinConfig>
where
    F: FnMut(f64, f64, &SpinConfig),
{
    let (init, log) = match (&record.initial_spins, &record.event_log) {
        (Some(i), Some(l)) => (i, l),
        _ => return Err(Error::MissingEventLog),
    };
    let mut sigma = SpinConfig::new(init.clone(), &model.kernel)?;
    let mut last = 0.0;
    for &(t, x) in log {
        segment(last, t, &sigma);
        sigma.flip(x as usize, &model.kernel);
        last = t;
    }
    segment(last, record.horizon, &sigma);
    Ok(sigma)
}

pub fn initial_config(model: &Model, record: &TrajectoryRecord) -> Result<SpinConfig> {
    match &record.initial_spins {
        Some(i) => SpinConfig::new(i.clone(), &model.kernel),
        None => Err(Error::MissingEventLog),
    }
}
