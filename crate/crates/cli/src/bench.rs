//! Wall-clock timing of range-structure build plus sigma table.

use std::time::{Duration, Instant};

use cardauct_core::instances::{random_instance, RandomSpec};
use cardauct_core::sigma::sigma_table_with;
use cardauct_core::{sigma_table_naive, Error, Instance, Money, RangeStructure, Result, TieK};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Serialize, Debug)]
pub struct SizeRow {
    pub n: usize,
    pub median_ms: f64,
    pub naive_median_ms: Option<f64>,
    /// `false` flags a size where the quadratic reference beat the fast path.
    pub fast_not_slower: Option<bool>,
}

#[derive(Serialize, Debug)]
pub struct ScalingRow {
    pub from: usize,
    pub to: usize,
    pub time_ratio: f64,
    /// What `n log² n` growth alone would predict.
    pub n_log2_ratio: f64,
}

#[derive(Serialize, Debug)]
pub struct BenchReport {
    pub seed: u64,
    pub reps: usize,
    pub threads: usize,
    pub sizes: Vec<SizeRow>,
    pub ratios: Vec<ScalingRow>,
}

fn instance(n: usize, seed: u64) -> Result<Instance> {
    random_instance(&RandomSpec::new(n, seed).step(Money::from_micros(1)).levels(1_000_000))
}

fn time_fast(inst: &Instance, tie: TieK) -> Duration {
    let start = Instant::now();
    let rs = RangeStructure::build(inst).expect("instance already validated");
    std::hint::black_box(sigma_table_with(&rs, tie));
    start.elapsed()
}

fn time_naive(inst: &Instance, tie: TieK) -> Duration {
    let start = Instant::now();
    std::hint::black_box(sigma_table_naive(inst, inst.len(), tie).expect("instance already validated"));
    start.elapsed()
}

fn median_ms(mut xs: Vec<Duration>) -> f64 {
    xs.sort();
    xs[xs.len() / 2].as_secs_f64() * 1e3
}

fn n_log2(n: usize) -> f64 {
    let n = n.max(2) as f64;
    n * n.log2().powi(2)
}

/// Single-threaded, the sizes are interleaved inside each repetition so that
/// background noise hits them alike. With `threads > 1` the repetitions of
/// one size run concurrently on distinct seeded instances, so medians include
/// contention.
pub fn bench(
    sizes: &[usize],
    seed: u64,
    reps: usize,
    naive_max: usize,
    threads: Option<usize>,
    tie: TieK,
) -> Result<BenchReport> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("bench sizes must be ascending".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::Input("bench sizes must be positive".into()));
    }
    let reps = reps.max(3);
    let threads = threads.unwrap_or(1).max(1);
    let mut fast = vec![Vec::with_capacity(reps); sizes.len()];
    let mut naive = vec![Vec::new(); sizes.len()];

    if threads == 1 {
        let insts = sizes.iter().map(|&n| instance(n, seed)).collect::<Result<Vec<_>>>()?;
        for _ in 0..reps {
            for (j, inst) in insts.iter().enumerate() {
                fast[j].push(time_fast(inst, tie));
                if inst.len() <= naive_max {
                    naive[j].push(time_naive(inst, tie));
                }
            }
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        for (j, &n) in sizes.iter().enumerate() {
            let insts = pool.install(|| {
                (0..reps as u64).into_par_iter().map(|r| instance(n, seed.wrapping_add(r))).collect::<Result<Vec<_>>>()
            })?;
            fast[j] = pool.install(|| insts.par_iter().map(|i| time_fast(i, tie)).collect());
            if n <= naive_max {
                naive[j] = pool.install(|| insts.par_iter().map(|i| time_naive(i, tie)).collect());
            }
        }
    }

    let rows: Vec<SizeRow> = sizes
        .iter()
        .zip(fast.into_iter().zip(naive))
        .map(|(&n, (f, nv))| {
            let median = median_ms(f);
            let naive_median = (!nv.is_empty()).then(|| median_ms(nv));
            SizeRow { n, median_ms: median, naive_median_ms: naive_median, fast_not_slower: naive_median.map(|m| median <= m) }
        })
        .collect();
    let ratios = rows
        .windows(2)
        .map(|w| ScalingRow {
            from: w[0].n,
            to: w[1].n,
            time_ratio: w[1].median_ms / w[0].median_ms,
            n_log2_ratio: n_log2(w[1].n) / n_log2(w[0].n),
        })
        .collect();
    Ok(BenchReport { seed, reps, threads, sizes: rows, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sizes_give_empty_report() {
        let r = bench(&[], 1, 3, 10, None, TieK::default()).unwrap();
        assert!(r.sizes.is_empty() && r.ratios.is_empty());
    }

    #[test]
    fn unsorted_sizes_rejected() {
        assert!(matches!(bench(&[20, 10], 1, 3, 0, None, TieK::default()), Err(Error::Input(_))));
    }

    #[test]
    fn rows_and_ratios_line_up() {
        for threads in [None, Some(2)] {
            let r = bench(&[50, 100, 200], 3, 3, 100, threads, TieK::default()).unwrap();
            assert_eq!(r.sizes.iter().map(|s| s.n).collect::<Vec<_>>(), [50, 100, 200]);
            assert_eq!(r.ratios.len(), 2);
            assert!(r.sizes[0].naive_median_ms.is_some() && r.sizes[2].naive_median_ms.is_none());
            assert!(r.ratios[0].n_log2_ratio > 2.0);
        }
    }
}
