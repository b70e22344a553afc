//! Benchmark fixtures shared by the criterion targets.

use tsauc::Statokinesigram;

/// Deterministic pseudo-random walk sampled at `rate_hz` for `secs` seconds.
pub fn walk(rate_hz: f64, secs: f64) -> Statokinesigram {
    let n = (rate_hz * secs) as usize;
    let mut state = 0x9e37_79b9_7f4a_7c15_u64;
    let mut step = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut px, mut py) = (0.0, 0.0);
    for _ in 0..n {
        px += step();
        py += step();
        x.push(px);
        y.push(py);
    }
    Statokinesigram::new("bench", rate_hz, x, y).expect("walk is well formed")
}
