//! Shared test support: an independent textbook rainflow reference and a
//! small deterministic RNG. The reference is a literal transliteration of
//! the standard three-point counting procedure (compare the two most recent
//! ranges; extract the earlier one as a full cycle unless it touches the
//! current start, which yields a half cycle) and shares no code with the
//! library's four-point implementation.

/// xorshift64* generator; good enough for test-case generation and fully
/// deterministic across platforms.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [0, 1).
    pub fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.f64()
    }

    pub fn usize_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Reduces a series to alternating turning points. Written independently of
/// the library: first dedup within the same matching tolerance, then keep
/// sign changes of the difference sequence.
fn reference_turning_points(series: &[f64]) -> Vec<f64> {
    let mut dedup: Vec<f64> = Vec::new();
    for &x in series {
        match dedup.last() {
            Some(&last) if (x - last).abs() <= 1e-12 => {}
            _ => dedup.push(x),
        }
    }
    if dedup.len() <= 2 {
        return dedup;
    }
    let mut out = vec![dedup[0]];
    for i in 1..dedup.len() - 1 {
        let prev = dedup[i - 1];
        let here = dedup[i];
        let next = dedup[i + 1];
        if (here > prev && here > next) || (here < prev && here < next) {
            out.push(here);
        }
    }
    out.push(*dedup.last().unwrap());
    out
}

/// Standard-procedure rainflow count: returns (depth, weight) pairs, weight 1
/// for full cycles and 0.5 for half cycles.
pub fn reference_rainflow(series: &[f64]) -> Vec<(f64, f64)> {
    let points = reference_turning_points(series);
    let mut counts: Vec<(f64, f64)> = Vec::new();
    let mut buffer: Vec<f64> = Vec::new();

    for &p in &points {
        buffer.push(p);
        loop {
            if buffer.len() < 3 {
                break;
            }
            let n = buffer.len();
            let x = (buffer[n - 1] - buffer[n - 2]).abs();
            let y = (buffer[n - 2] - buffer[n - 3]).abs();
            if x < y {
                break;
            }
            if n == 3 {
                // Y contains the current starting point: half cycle, drop the
                // start and re-anchor.
                counts.push((y, 0.5));
                buffer.remove(0);
            } else {
                // Full cycle: drop both points of Y.
                counts.push((y, 1.0));
                buffer.remove(n - 3);
                buffer.remove(n - 3);
            }
        }
    }
    // Remaining ranges count as half cycles.
    for pair in buffer.windows(2) {
        counts.push(((pair[1] - pair[0]).abs(), 0.5));
    }
    counts
}

/// Sorts (depth, weight) pairs into a canonical order for multiset
/// comparison.
pub fn sorted_cycles(mut cycles: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    cycles.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
    });
    cycles
}
