use salstream_core::live::LatencyModel;
use salstream_core::model::VideoRecord;
use salstream_core::rater::{HttpOracle, MockOracle, Oracle};
use salstream_core::rng::{derive_seed, tags};

use crate::config::{ExperimentConfig, OracleKind};
use crate::error::CliError;

/// A fresh oracle for one video. Mock seeds derive from the experiment
/// seed and the video's position, so results do not depend on worker count.
pub fn for_video(
    cfg: &ExperimentConfig,
    video: &VideoRecord,
    position: usize,
    latency: Option<LatencyModel>,
) -> Result<Box<dyn Oracle + Send>, CliError> {
    match cfg.oracle.kind {
        OracleKind::Mock => {
            let mut m = cfg.oracle.mock.clone();
            m.rng_seed = derive_seed(cfg.seed, tags::RATE_CALL, position as u64);
            if let Some(l) = latency {
                m.latency_mean_s = l.mean_s;
                m.latency_std_s = l.std_s;
            }
            Ok(Box::new(MockOracle::for_video(video, m)?))
        }
        OracleKind::Http => Ok(Box::new(HttpOracle::new(cfg.oracle.http.clone())?)),
    }
}
