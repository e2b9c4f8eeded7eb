use std::thread;
use std::time::Duration;

use log::warn;

use crate::error::Result;

/// Exponential backoff for retryable failures.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_delay: Duration::ZERO,
        }
    }

    /// Runs `op`, retrying retryable errors up to `max_retries` times.
    pub fn run<T>(&self, what: &str, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let delay = self.base_delay * 2u32.pow(attempt);
                    attempt += 1;
                    warn!(
                        "{what}: {e}; retry {attempt}/{} in {delay:?}",
                        self.max_retries
                    );
                    thread::sleep(delay);
                }
                other => return other,
            }
        }
    }
}

/// First `n` characters of a response body, for error messages.
pub(crate) fn excerpt(body: &str) -> String {
    const N: usize = 200;
    let mut s: String = body.chars().take(N).collect();
    if body.chars().count() > N {
        s.push_str("...");
    }
    s
}
