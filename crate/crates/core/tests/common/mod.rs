//! Independent enumeration oracles for graded dimensions. Weights are counted in half-units so
//! everything stays in plain integers.
#![allow(dead_code)]

/// Number of ways to write each total (0..=max) as a multiset of the given part sizes; parts
/// flagged `distinct` may be used at most once.
pub fn count_partitions(parts: &[(u32, bool)], max: u32) -> Vec<u64> {
    let mut ways = vec![0u64; max as usize + 1];
    ways[0] = 1;
    for &(size, distinct) in parts {
        if size == 0 || size > max {
            continue;
        }
        let size = size as usize;
        if distinct {
            for total in (size..ways.len()).rev() {
                ways[total] += ways[total - size];
            }
        } else {
            for total in size..ways.len() {
                ways[total] += ways[total - size];
            }
        }
    }
    ways
}

/// Integer partitions p(0..=max), by brute-force enumeration of non-increasing sequences.
pub fn partition_numbers(max: u32) -> Vec<u64> {
    fn count(rest: u32, largest: u32) -> u64 {
        if rest == 0 {
            return 1;
        }
        (1..=largest.min(rest)).map(|p| count(rest - p, p)).sum()
    }
    (0..=max).map(|n| count(n, n)).collect()
}

/// Partitions of w/2 (w = 0..=max_half) into parts 1/2, 3/2, 5/2, ...
pub fn odd_half_partitions(max_half: u32) -> Vec<u64> {
    let parts: Vec<(u32, bool)> = (0..).map(|k| 2 * k + 1).take_while(|p| *p <= max_half).map(|p| (p, false)).collect();
    count_partitions(&parts, max_half)
}

/// Partitions of w/2 into distinct parts from `sizes` (half-units).
pub fn distinct_partitions(sizes: impl IntoIterator<Item = u32>, max_half: u32) -> Vec<u64> {
    let parts: Vec<(u32, bool)> = sizes.into_iter().map(|p| (p, true)).collect();
    count_partitions(&parts, max_half)
}
