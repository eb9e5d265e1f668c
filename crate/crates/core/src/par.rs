// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature (default) items run on the rayon pool;
//! without it, or with [`Execution::Sequential`], they run in order on the
//! calling thread. Results are always returned in input order, so output
//! never depends on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Applies `f` to every item, stopping at the first error in index order.
pub fn try_map<T, R, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Sum in a fixed binary-tree order, independent of how the terms were
/// produced.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => x[0],
        2 => x[0] + x[1],
        n => {
            let (a, b) = x.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_errors() {
        let v: Vec<u64> = (0..1000).collect();
        let seq = try_map(Execution::Sequential, &v, |x| Ok::<_, ()>(x * x)).unwrap();
        let par = try_map(Execution::Parallel, &v, |x| Ok::<_, ()>(x * x)).unwrap();
        assert_eq!(seq, par);
        let err = try_map(Execution::Parallel, &v, |&x| if x == 10 { Err(x) } else { Ok(x) });
        assert_eq!(err, Err(10));
    }

    #[test]
    fn pairwise() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0, 5.0]), 15.0);
    }
}
