use std::sync::atomic::{AtomicU64, Ordering};

/// Formats a message id: `env-<source>-<counter>-<hex entropy>`.
pub fn make_id(source: &str, counter: u64, entropy: [u8; 4]) -> String {
    format!(
        "env-{source}-{counter}-{:02x}{:02x}{:02x}{:02x}",
        entropy[0], entropy[1], entropy[2], entropy[3]
    )
}

/// Per-endpoint id source. Safe to share between threads.
///
/// Uniqueness within a session comes from the counter; the entropy suffix
/// only makes ids from different process runs unlikely to collide.
#[derive(Debug)]
pub struct IdGenerator {
    source: String,
    counter: AtomicU64,
    seed: u64,
}

impl IdGenerator {
    /// Seeds the entropy suffix from the process clock and address space.
    pub fn new(source: impl Into<String>) -> Self {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let local = 0u8;
        let addr = &local as *const u8 as u64;
        Self::seeded(source, nanos ^ addr.rotate_left(32))
    }

    /// Fully deterministic generator.
    pub fn seeded(source: impl Into<String>, seed: u64) -> Self {
        IdGenerator {
            source: source.into(),
            counter: AtomicU64::new(0),
            seed,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn next_id(&self) -> String {
        let counter = self.counter.fetch_add(1, Ordering::Relaxed);
        let mixed = splitmix64(self.seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        make_id(&self.source, counter, (mixed as u32).to_be_bytes())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
