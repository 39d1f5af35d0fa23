//! Minimal blocking HTTP layer with retry.

use std::time::Duration;

use rand::Rng;
use tradesim_core::ingest::FetchPolicy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    fn is_retryable(&self) -> bool {
        self.status == 429 || self.status >= 500
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
}

pub type Headers<'a> = &'a [(&'a str, String)];

pub trait Http: Send + Sync {
    fn get(&self, url: &str, headers: Headers<'_>) -> Result<HttpResponse, HttpError>;
    fn post_json(&self, url: &str, headers: Headers<'_>, body: &str) -> Result<HttpResponse, HttpError>;
}

impl<T: Http + ?Sized> Http for std::sync::Arc<T> {
    fn get(&self, url: &str, headers: Headers<'_>) -> Result<HttpResponse, HttpError> {
        (**self).get(url, headers)
    }

    fn post_json(&self, url: &str, headers: Headers<'_>, body: &str) -> Result<HttpResponse, HttpError> {
        (**self).post_json(url, headers, body)
    }
}

/// [`Http`] over a `ureq` agent. Non-2xx statuses are returned, not raised.
pub struct UreqHttp {
    agent: ureq::Agent,
}

impl UreqHttp {
    pub fn new(timeout: Duration, user_agent: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .user_agent(user_agent)
            .http_status_as_error(false)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn from_policy(policy: &FetchPolicy) -> Self {
        Self::new(Duration::from_secs(policy.timeout_secs), &policy.user_agent)
    }
}

fn map_err(e: ureq::Error) -> HttpError {
    match e {
        ureq::Error::Timeout(_) => HttpError::Timeout,
        other => HttpError::Transport(other.to_string()),
    }
}

fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<HttpResponse, HttpError> {
    let mut resp = resp.map_err(map_err)?;
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().map_err(map_err)?;
    Ok(HttpResponse { status, body })
}

impl Http for UreqHttp {
    fn get(&self, url: &str, headers: Headers<'_>) -> Result<HttpResponse, HttpError> {
        let mut req = self.agent.get(url);
        for (k, v) in headers {
            req = req.header(*k, v.as_str());
        }
        finish(req.call())
    }

    fn post_json(&self, url: &str, headers: Headers<'_>, body: &str) -> Result<HttpResponse, HttpError> {
        let mut req = self.agent.post(url).header("content-type", "application/json");
        for (k, v) in headers {
            req = req.header(*k, v.as_str());
        }
        finish(req.send(body))
    }
}

/// Runs `attempt` up to `policy.attempts()` times. Timeouts, transport errors,
/// 429 and 5xx are retried after `policy.delay_ms(n, u)`; other statuses fail
/// at once.
pub fn with_retry<F, S, R>(
    policy: &FetchPolicy,
    rng: &mut R,
    mut sleep: S,
    mut attempt: F,
) -> Result<String, HttpError>
where
    F: FnMut() -> Result<HttpResponse, HttpError>,
    S: FnMut(Duration),
    R: Rng + ?Sized,
{
    let attempts = policy.attempts();
    let mut last = HttpError::Transport("no attempt made".into());
    for n in 1..=attempts {
        match attempt() {
            Ok(resp) if resp.is_success() => return Ok(resp.body),
            Ok(resp) => {
                let retry = resp.is_retryable();
                last = HttpError::Status {
                    status: resp.status,
                    body: resp.body.chars().take(200).collect(),
                };
                if !retry {
                    return Err(last);
                }
            }
            Err(e) => last = e,
        }
        if n < attempts {
            sleep(Duration::from_millis(policy.delay_ms(n, rng.random::<f64>())));
        }
    }
    Err(last)
}

#[cfg(test)]
pub(crate) mod testing {
    use std::collections::VecDeque;
    use std::sync::Mutex;

    use super::*;

    type Request = (String, Vec<(String, String)>, Option<String>);

    /// Serves canned responses in order and remembers requests.
    #[derive(Default)]
    pub struct CannedHttp {
        pub responses: Mutex<VecDeque<Result<HttpResponse, HttpError>>>,
        pub requests: Mutex<Vec<Request>>,
    }

    impl CannedHttp {
        pub fn with(responses: Vec<Result<HttpResponse, HttpError>>) -> Self {
            Self {
                responses: Mutex::new(responses.into()),
                requests: Mutex::default(),
            }
        }

        pub fn ok(body: &str) -> Result<HttpResponse, HttpError> {
            Ok(HttpResponse {
                status: 200,
                body: body.to_string(),
            })
        }

        fn next(&self, url: &str, headers: Headers<'_>, body: Option<&str>) -> Result<HttpResponse, HttpError> {
            self.requests.lock().unwrap().push((
                url.to_string(),
                headers.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
                body.map(str::to_string),
            ));
            self.responses
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or(Err(HttpError::Transport("no canned response".into())))
        }
    }

    impl Http for CannedHttp {
        fn get(&self, url: &str, headers: Headers<'_>) -> Result<HttpResponse, HttpError> {
            self.next(url, headers, None)
        }

        fn post_json(&self, url: &str, headers: Headers<'_>, body: &str) -> Result<HttpResponse, HttpError> {
            self.next(url, headers, Some(body))
        }
    }
}
