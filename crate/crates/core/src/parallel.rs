//! Thread-count control for the rayon-backed inner loops.

use std::env;

pub const THREADS_ENV: &str = "HEARTCAST_THREADS";

/// Reads `HEARTCAST_THREADS`; unset, empty, zero or unparsable means "no cap".
pub fn thread_cap_from_env() -> Option<usize> {
    env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}
