//! Episodes, sweeps, random-stream governance and CSV output.
//!
//! Every random quantity is drawn from a stream derived from the scenario
//! seed and a label tuple, never from a shared generator. Policies that are
//! compared within one sweep therefore see identical drops, channel
//! trajectories and receiver noise, and results do not depend on the
//! number of worker threads.

mod episode;
mod output;
mod stats;
mod stream;
mod sweep;

pub use episode::{
    deteq_episode, run_episode, run_episode_on, BlockRecord, EpisodeLabels, EpisodeOptions,
    EpisodeResult,
};
pub use output::{write_episode_csv, write_sweep_csv, CSV_HEADER};
pub use stats::{mean, pairwise_sum, std_error};
pub use stream::{derive_stream, Purpose, Stream};
pub use sweep::{
    drop_for, sweep_density, sweep_tau, tau_grid, SweepResult, SweepRow, SweepSpec,
};
