//! Client-side request pacing.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};

/// Token bucket refilled continuously at `rate` tokens per second up to
/// `capacity`.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, capacity: f64, now: Instant) -> Self {
        assert!(rate_per_sec > 0.0 && capacity >= 1.0, "rate must be positive and capacity at least 1");
        Self { rate: rate_per_sec, capacity, state: Mutex::new((capacity, now)) }
    }

    /// Takes a token if one is available at `now`; otherwise returns how long
    /// until one will be.
    pub fn try_acquire_at(&self, now: Instant) -> Result<(), Duration> {
        let mut state = self.state.lock().expect("bucket lock");
        let (tokens, last) = *state;
        let elapsed = now.saturating_duration_since(last).as_secs_f64();
        let tokens = (tokens + elapsed * self.rate).min(self.capacity);
        if tokens >= 1.0 {
            *state = (tokens - 1.0, now.max(last));
            Ok(())
        } else {
            *state = (tokens, now.max(last));
            Err(Duration::from_secs_f64((1.0 - tokens) / self.rate))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire_at(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}

/// Bounds concurrent requests and, optionally, the request rate of a
/// wrapped backend.
pub struct Throttled<B> {
    inner: B,
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
    bucket: Option<TokenBucket>,
}

impl<B: ChatBackend> Throttled<B> {
    /// `requests_per_sec` of `None` or a non-positive value disables rate
    /// limiting.
    pub fn new(inner: B, max_in_flight: usize, requests_per_sec: Option<f64>) -> Self {
        let bucket = requests_per_sec
            .filter(|r| *r > 0.0)
            .map(|r| TokenBucket::new(r, r.max(1.0), Instant::now()));
        Self { inner, max_in_flight: max_in_flight.max(1), in_flight: Mutex::new(0), released: Condvar::new(), bucket }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ChatBackend> ChatBackend for Throttled<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        {
            let mut n = self.in_flight.lock().expect("in-flight lock");
            while *n >= self.max_in_flight {
                n = self.released.wait(n).expect("in-flight lock");
            }
            *n += 1;
        }
        if let Some(bucket) = &self.bucket {
            bucket.acquire();
        }
        let result = self.inner.complete(request);
        *self.in_flight.lock().expect("in-flight lock") -= 1;
        self.released.notify_one();
        result
    }

    fn id(&self) -> &str {
        self.inner.id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ChatMessage, Usage};
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn bucket_refills_at_rate() {
        let t0 = Instant::now();
        let bucket = TokenBucket::new(2.0, 2.0, t0);
        assert!(bucket.try_acquire_at(t0).is_ok());
        assert!(bucket.try_acquire_at(t0).is_ok());
        let wait = bucket.try_acquire_at(t0).unwrap_err();
        assert!((wait.as_secs_f64() - 0.5).abs() < 1e-9);
        assert!(bucket.try_acquire_at(t0 + Duration::from_millis(499)).is_err());
        assert!(bucket.try_acquire_at(t0 + Duration::from_millis(1000)).is_ok());
    }

    #[test]
    fn bucket_caps_burst() {
        let t0 = Instant::now();
        let bucket = TokenBucket::new(10.0, 3.0, t0);
        let later = t0 + Duration::from_secs(60);
        for _ in 0..3 {
            assert!(bucket.try_acquire_at(later).is_ok());
        }
        assert!(bucket.try_acquire_at(later).is_err());
    }

    struct Probe {
        current: AtomicUsize,
        peak: AtomicUsize,
    }

    impl ChatBackend for Probe {
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, BackendError> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.current.fetch_sub(1, Ordering::SeqCst);
            Ok(ChatResponse { text: "ok".into(), reasoning_content: None, usage: Usage::default(), backend_id: "probe".into() })
        }

        fn id(&self) -> &str {
            "probe"
        }
    }

    #[test]
    fn in_flight_bound_holds() {
        let throttled = Throttled::new(Probe { current: AtomicUsize::new(0), peak: AtomicUsize::new(0) }, 3, None);
        let req = ChatRequest::new("m", vec![ChatMessage::user("x")]);
        std::thread::scope(|s| {
            for _ in 0..12 {
                s.spawn(|| throttled.complete(&req).unwrap());
            }
        });
        let peak = throttled.inner().peak.load(Ordering::SeqCst);
        assert!((1..=3).contains(&peak), "peak {peak}");
    }
}
