//! Grid sweep engine.
//!
//! Cells are pure functions of their index, evaluated on the rayon pool when
//! the `parallel` feature is on and sequentially otherwise. Results are always
//! merged in index order, so output never depends on the worker count.

use crate::error::Result;

/// Evaluates `f(0..len)` sequentially.
pub fn map_sequential<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

/// Evaluates `f(0..len)` on the default backend.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(len, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(len, f)
    }
}

/// Like [`map_indexed`], returning the error of the lowest failing index.
pub fn try_map_indexed<T, F>(len: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(len, f).into_iter().collect()
}

/// Runs `f` with at most `workers` threads (`None` keeps the global pool).
/// Without the `parallel` feature this simply calls `f`.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(k) = workers {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .expect("thread pool");
            return pool.install(f);
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn results_are_in_index_order() {
        let v = with_workers(Some(3), || map_indexed(100, |i| i * i));
        assert_eq!(v, map_sequential(100, |i| i * i));
    }

    #[test]
    fn lowest_error_wins() {
        let r: Result<Vec<usize>> = try_map_indexed(50, |i| {
            if i % 7 == 3 {
                Err(Error::Undefined(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        match r {
            Err(Error::Undefined(s)) => assert_eq!(s, "3"),
            other => panic!("{other:?}"),
        }
    }
}
