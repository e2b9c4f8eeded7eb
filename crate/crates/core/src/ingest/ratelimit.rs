use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// NCBI's ceiling for anonymous clients, requests per second.
pub const EUTILS_RATE_ANONYMOUS: f64 = 3.0;
/// NCBI's ceiling with an API key, requests per second.
pub const EUTILS_RATE_WITH_KEY: f64 = 10.0;

/// Token bucket shared by every request issued through one client.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    capacity: f64,
    state: Mutex<Bucket>,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Instant,
}

impl RateLimiter {
    /// `rate` tokens per second with a burst of `capacity`.
    pub fn new(rate: f64, capacity: f64) -> Self {
        assert!(
            rate > 0.0 && capacity >= 1.0,
            "invalid token bucket ({rate}/s, burst {capacity})"
        );
        RateLimiter {
            rate,
            capacity,
            state: Mutex::new(Bucket {
                tokens: capacity,
                last: Instant::now(),
            }),
        }
    }

    /// One-second burst at the given per-second rate.
    pub fn per_second(rate: f64) -> Self {
        Self::new(rate, rate.max(1.0))
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Blocks until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut bucket = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let refill = now.duration_since(bucket.last).as_secs_f64() * self.rate;
                bucket.tokens = (bucket.tokens + refill).min(self.capacity);
                bucket.last = now;
                if bucket.tokens >= 1.0 {
                    bucket.tokens -= 1.0;
                    return;
                }
                (1.0 - bucket.tokens) / self.rate
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}
