use std::time::Duration;

use super::{BackendError, ChatResponse, GatewayError};

/// Bounded exponential backoff for rate limits and transient failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub attempts: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base: Duration::from_secs(1),
            cap: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests.
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base: Duration::ZERO,
            cap: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32, hint: Option<Duration>) -> Duration {
        let exp = self.base.saturating_mul(1u32.checked_shl(retry).unwrap_or(u32::MAX));
        hint.unwrap_or(exp).min(self.cap)
    }

    pub(crate) fn run(
        &self,
        provider: &str,
        mut attempt: impl FnMut() -> Result<ChatResponse, BackendError>,
    ) -> Result<ChatResponse, GatewayError> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for n in 0..attempts {
            match attempt() {
                Ok(r) => return Ok(r),
                Err(e @ (BackendError::RateLimited { .. } | BackendError::Transient(_))) => {
                    if n + 1 < attempts {
                        let hint = match &e {
                            BackendError::RateLimited {
                                retry_after_secs: Some(s),
                            } => Some(Duration::from_secs(*s)),
                            _ => None,
                        };
                        let wait = self.delay(n, hint);
                        log::warn!("{provider}: {e}; retrying in {wait:?}");
                        std::thread::sleep(wait);
                    }
                    last = Some(e);
                }
                Err(BackendError::Auth(detail)) => {
                    return Err(GatewayError::Auth {
                        provider: provider.into(),
                        detail,
                    })
                }
                Err(BackendError::Malformed(detail)) => {
                    return Err(GatewayError::Malformed {
                        provider: provider.into(),
                        detail,
                    })
                }
                Err(BackendError::Other(detail)) => {
                    return Err(GatewayError::Transport {
                        provider: provider.into(),
                        attempts: n + 1,
                        detail,
                    })
                }
            }
        }
        Err(match last {
            Some(BackendError::Transient(detail)) => GatewayError::Transport {
                provider: provider.into(),
                attempts,
                detail,
            },
            _ => GatewayError::RateLimited {
                provider: provider.into(),
                attempts,
            },
        })
    }
}
