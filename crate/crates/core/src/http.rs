//! Retry-with-backoff shared by the remote embedder and the remote LM client.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the first retry; doubled for every further retry.
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }
}

#[derive(Debug)]
pub enum Failure<E> {
    Retryable(E),
    Permanent(E),
}

/// Runs `op` until it succeeds, fails permanently, or the attempt budget is
/// spent. Returns the value and the number of retries that were needed.
pub fn with_retries<T, E: std::fmt::Debug>(
    policy: RetryPolicy,
    mut op: impl FnMut() -> Result<T, Failure<E>>,
) -> Result<(T, u32), E> {
    let attempts = policy.max_attempts.max(1);
    let mut retry = 0;
    loop {
        match op() {
            Ok(value) => return Ok((value, retry)),
            Err(Failure::Permanent(e)) => return Err(e),
            Err(Failure::Retryable(e)) if retry + 1 >= attempts => return Err(e),
            Err(Failure::Retryable(e)) => {
                log::warn!("retryable failure on attempt {}: {e:?}", retry + 1);
                thread::sleep(policy.delay(retry));
                retry += 1;
            }
        }
    }
}

/// True for HTTP statuses worth retrying.
pub fn is_retryable_status(status: u16) -> bool {
    status == 429 || status == 408 || (500..600).contains(&status)
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
