//! Incremental robust statistics over a sliding window.
//!
//! Streaming consumers need the current median and MAD after every new
//! sample without re-sorting the whole window. `RobustWindow` maintains a
//! sorted copy of the window alongside arrival order: pushes use binary
//! insertion, evictions use binary search, and the MAD is recovered from
//! the sorted values with a two-pointer walk outward from the median
//! rather than materializing and sorting the deviation array.

use std::collections::VecDeque;

/// Fixed-capacity sliding window with O(capacity) median/MAD per update.
#[derive(Debug, Clone)]
pub struct RobustWindow {
    capacity: usize,
    arrivals: VecDeque<f64>,
    sorted: Vec<f64>,
}

impl RobustWindow {
    /// Creates an empty window. `capacity` must be at least 1.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be >= 1");
        Self {
            capacity,
            arrivals: VecDeque::with_capacity(capacity),
            sorted: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.arrivals.len() == self.capacity
    }

    /// Pushes a sample, evicting the oldest one if the window is full.
    pub fn push(&mut self, value: f64) {
        if self.arrivals.len() == self.capacity {
            let old = self.arrivals.pop_front().expect("non-empty at capacity");
            let idx = self
                .sorted
                .binary_search_by(|probe| probe.total_cmp(&old))
                .expect("evicted value present in sorted buffer");
            self.sorted.remove(idx);
        }
        self.arrivals.push_back(value);
        let idx = match self.sorted.binary_search_by(|probe| probe.total_cmp(&value)) {
            Ok(i) | Err(i) => i,
        };
        self.sorted.insert(idx, value);
    }

    /// Current median, or `None` while empty.
    pub fn median(&self) -> Option<f64> {
        let n = self.sorted.len();
        if n == 0 {
            return None;
        }
        Some(if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            (self.sorted[n / 2 - 1] + self.sorted[n / 2]) / 2.0
        })
    }

    /// Median absolute deviation about the current median, or `None` while
    /// empty. Equal to `median(|x - median|)` over the window contents.
    pub fn mad(&self) -> Option<f64> {
        let n = self.sorted.len();
        if n == 0 {
            return None;
        }
        let center = self.median().expect("non-empty");

        // The deviations |x - center| split into two runs that are each
        // already sorted: values below the center (descending deviation
        // toward the center) and values at/above it. Selecting the k-th
        // smallest deviation is a merge walk from the center outward.
        let split = self.sorted.partition_point(|&v| v < center);
        let take = |k: usize| -> f64 {
            // k-th smallest deviation (0-based) via two-pointer merge.
            let mut lo = split; // next candidate below center: sorted[lo-1]
            let mut hi = split; // next candidate at/above center: sorted[hi]
            let mut current = 0.0;
            for _ in 0..=k {
                let below = if lo > 0 {
                    Some(center - self.sorted[lo - 1])
                } else {
                    None
                };
                let above = if hi < n {
                    Some(self.sorted[hi] - center)
                } else {
                    None
                };
                current = match (below, above) {
                    (Some(b), Some(a)) => {
                        if b <= a {
                            lo -= 1;
                            b
                        } else {
                            hi += 1;
                            a
                        }
                    }
                    (Some(b), None) => {
                        lo -= 1;
                        b
                    }
                    (None, Some(a)) => {
                        hi += 1;
                        a
                    }
                    (None, None) => unreachable!("ran out of samples before k"),
                };
            }
            current
        };

        Some(if n % 2 == 1 {
            take(n / 2)
        } else {
            (take(n / 2 - 1) + take(n / 2)) / 2.0
        })
    }
}
