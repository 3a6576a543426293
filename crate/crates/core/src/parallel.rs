use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Result;

/// Independent random stream `stream` derived from `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f` on a dedicated pool of `jobs` threads, or on the global pool
/// when `jobs == 0`.
pub(crate) fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

/// Lexicographic `(cost, generation)` minimum. NaN costs never win.
pub(crate) fn better(a: (f64, u64), b: (f64, u64)) -> bool {
    let ka = if a.0.is_nan() { f64::INFINITY } else { a.0 };
    let kb = if b.0.is_nan() { f64::INFINITY } else { b.0 };
    match ka.total_cmp(&kb) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    }
}
