//! Thread-pool executor for ensemble harnesses.

use grwlab_core::experiments::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{IoError, Result};

pub const THREADS_ENV: &str = "GRWLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl Threads {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Threads::Auto),
            n => match n.parse::<usize>() {
                Ok(k) if k > 0 => Ok(Threads::Fixed(k)),
                _ => Err(IoError::Config(format!("threads must be a positive integer or \"auto\", got {s:?}"))),
            },
        }
    }

    /// `--threads` if given, else `GRWLAB_THREADS`, else `auto`.
    pub fn resolve(flag: Option<&str>) -> Result<Self> {
        match flag {
            Some(s) => Threads::parse(s),
            None => match std::env::var(THREADS_ENV) {
                Ok(s) => Threads::parse(&s),
                Err(_) => Ok(Threads::Auto),
            },
        }
    }

    pub fn count(self) -> usize {
        match self {
            Threads::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Threads::Fixed(n) => n,
        }
    }
}

/// Runs tasks on a private rayon pool; results keep index order.
pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| IoError::Config(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }
}

impl Executor for RayonExecutor {
    fn width(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn map_init<W, T, I, F>(&self, n: usize, init: I, task: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> W + Sync + Send,
        F: Fn(&mut W, usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..n).into_par_iter().map_init(&init, |w, i| task(w, i)).collect())
    }
}
