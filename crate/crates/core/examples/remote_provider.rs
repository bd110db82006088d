//! The chat-completion client against an in-process transport that fails
//! twice before answering.
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use smart_audit::hypothesis::HypothesisProvider;
use smart_audit::remote::{HttpRequest, HttpResponse, RemoteClient, RemoteConfig, Transport};

struct Flaky {
    calls: AtomicUsize,
}

impl Transport for Flaky {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        println!("POST {} attempt {}", request.url, n + 1);
        match n {
            0 => Err("connection reset".into()),
            1 => Ok(HttpResponse { status: 503, body: "busy".into() }),
            _ => Ok(HttpResponse {
                status: 200,
                body: r#"{"choices":[{"message":{"role":"assistant","content":"Yes"}}]}"#.into(),
            }),
        }
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::var_os("SMART_API_KEY").is_none() {
        // SAFETY: single-threaded at this point
        unsafe { std::env::set_var("SMART_API_KEY", "example-key") };
    }
    let config = RemoteConfig {
        retry_backoff: vec![Duration::from_millis(10)],
        ..RemoteConfig::default()
    };
    let client = RemoteClient::with_transport(config, Box::new(Flaky { calls: AtomicUsize::new(0) }))?;
    let mut provider = HypothesisProvider::remote(client);
    let reply = provider.complete("You are a careful analyst.", "Could accuracy differ by age? Answer Yes or No.")?;
    println!("reply: {reply}");
    println!("transcript digest {}", provider.transcript_digest());
    Ok(())
}
