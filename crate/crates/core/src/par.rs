//! Order-preserving map over independent work items, data-parallel when the
//! `parallel` feature is enabled.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Serial,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }
}

/// `items.iter().map(f)` collected in input order. `Parallel` falls back to
/// serial execution when the crate is built without the `parallel` feature.
pub fn map<T, R, F>(mode: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Sizes the global worker pool. Only the first call takes effect.
pub fn set_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidPlan("thread count must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidPlan(format!("thread pool: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_in_both_modes() {
        let items: Vec<u64> = (0..1000).collect();
        let serial = map(Execution::Serial, &items, |x| x * x);
        let parallel = map(Execution::Parallel, &items, |x| x * x);
        assert_eq!(serial, parallel);
        assert_eq!(serial[999], 999 * 999);
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(set_threads(0).is_err());
    }
}
