//! Shared fixtures for the criterion benches.

use reallocate_core::rng::Stream;
use reallocate_core::sim::generate_sample;
use reallocate_core::Sample;

/// A non-degenerate draw from the simulation generating mechanism.
pub fn bench_sample(n: usize, beta: f64, seed: u64) -> Sample {
    for attempt in 0..1000 {
        let mut stream = Stream::for_replicate(seed, 0, attempt);
        if let Ok((sample, _)) = generate_sample(n, beta, &mut stream) {
            return sample;
        }
    }
    unreachable!("no non-degenerate draw in 1000 attempts")
}
