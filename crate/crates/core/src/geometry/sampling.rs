//! Deterministic low-discrepancy sampling (Halton sequence).

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Default number of accepted samples per overlap.
pub const DEFAULT_SAMPLES: usize = 256;
/// Default starting index into the Halton sequence.
pub const DEFAULT_SEED: u64 = 1;
/// Chart boxes are shrunk by this much on every side.
pub const DOMAIN_MARGIN: f64 = 1e-6;

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Halton point number `index` in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton sampling supports up to 6 dimensions");
    PRIMES[..dim].iter().map(|&p| radical_inverse(index, p)).collect()
}

/// Iterator over Halton points mapped into a box, starting at `seed`.
pub struct BoxSampler<'a> {
    lower: &'a [f64],
    upper: &'a [f64],
    index: u64,
}

impl<'a> BoxSampler<'a> {
    pub fn new(lower: &'a [f64], upper: &'a [f64], seed: u64) -> Self {
        Self {
            lower,
            upper,
            index: seed,
        }
    }
}

impl Iterator for BoxSampler<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let u = halton(self.index, self.lower.len());
        self.index += 1;
        Some(
            u.iter()
                .zip(self.lower.iter().zip(self.upper))
                .map(|(t, (lo, hi))| {
                    let lo = lo + DOMAIN_MARGIN;
                    let hi = hi - DOMAIN_MARGIN;
                    lo + t * (hi - lo)
                })
                .collect(),
        )
    }
}
