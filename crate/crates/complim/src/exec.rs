//! Order-preserving map over independent jobs.
//!
//! Results always come back in input order, so output never depends on
//! scheduling or thread count.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's global thread count.
    #[default]
    Parallel,
    Threads(usize),
}

impl Execution {
    /// Parallel unless COMPLIM_THREADS is set; "1" means sequential.
    pub fn from_env(default_threads: usize) -> Self {
        match std::env::var("COMPLIM_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(0) | None => Execution::Threads(default_threads.max(1)),
            Some(1) => Execution::Sequential,
            Some(n) => Execution::Threads(n),
        }
    }

    pub fn map_ordered<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel => parallel_map(items, f, None),
            Execution::Threads(n) => parallel_map(items, f, Some(n)),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], f: F, threads: Option<usize>) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if threads == Some(1) || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        // pool creation can fail under resource limits; fall back to sequential
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], f: F, _threads: Option<usize>) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
