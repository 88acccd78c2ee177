mod support;

use std::time::{Duration, Instant};

use ontogen::llm::{ApiKind, CompletionRequest, ExperimentKey, Gateway, LlmError, Mode, ProviderProfile, RetryPolicy};
use ontogen::prompt::Technique;
use support::stub::{anthropic_ok, error, gemini_ok, openai_ok, Stub};

fn profile(api: ApiKind, base: &str) -> ProviderProfile {
    let (name, model, path) = match api {
        ApiKind::Openai => ("gpt", "gpt-4-turbo-2024-04-09", "/v1/chat/completions"),
        ApiKind::Anthropic => ("claude", "claude-3-opus-20240229", "/v1/messages"),
        ApiKind::Gemini => ("gemini", "gemini-1.0-pro", "/v1beta/models/{model}:generateContent"),
    };
    ProviderProfile {
        name: name.into(),
        model_id: model.into(),
        context_window: 128_000,
        input_rate: 0.01,
        output_rate: 0.03,
        endpoint: format!("{base}{path}"),
        auth_env_var: "STUB_KEY".into(),
        api,
        requests_per_minute: 0,
    }
}

fn request(p: ProviderProfile, prompt: &str) -> CompletionRequest {
    let provider = p.name.clone();
    CompletionRequest {
        provider: p,
        prompt: prompt.into(),
        temperature: 0.0,
        max_output_tokens: 4096,
        experiment_key: ExperimentKey::new("C1", Technique::Zero, &provider),
    }
}

fn gateway() -> Gateway {
    Gateway::new(Mode::Live, "unused")
        .with_retry(RetryPolicy {
            attempts: 3,
            base_delay_ms: 10,
        })
        .with_timeout(Duration::from_secs(10))
        .with_env(|k| (k == "STUB_KEY").then(|| "sk-test".to_string()))
}

#[test]
fn openai_request_shape_and_usage() {
    let stub = Stub::start(vec![openai_ok("@prefix : <urn:x#> .", 1200, 345)]);
    let p = profile(ApiKind::Openai, &stub.base);
    let r = gateway().complete(&request(p.clone(), "describe C1")).unwrap();

    let reqs = stub.requests();
    assert_eq!(reqs.len(), 1);
    let q = &reqs[0];
    assert_eq!(q.method, "POST");
    assert_eq!(q.path, "/v1/chat/completions");
    assert_eq!(q.headers["authorization"], "Bearer sk-test");
    assert_eq!(q.body["model"], "gpt-4-turbo-2024-04-09");
    assert_eq!(q.body["temperature"], 0.0);
    assert_eq!(q.body["max_tokens"], 4096);
    assert_eq!(q.body["messages"][0]["content"], "describe C1");

    assert_eq!(r.text, "@prefix : <urn:x#> .");
    assert_eq!((r.input_tokens, r.output_tokens), (1200, 345));
    assert_eq!(r.cost, 1200.0 * 0.01 / 1000.0 + 345.0 * 0.03 / 1000.0);
    assert_eq!(r.mode, Mode::Live);
    assert_eq!(r.retries, 0);
    assert_eq!(r.model_id, "gpt-4-turbo-2024-04-09");
}

#[test]
fn anthropic_and_gemini_headers() {
    let stub = Stub::start(vec![anthropic_ok("ok", 10, 2)]);
    let r = gateway().complete(&request(profile(ApiKind::Anthropic, &stub.base), "p")).unwrap();
    let q = &stub.requests()[0];
    assert_eq!(q.path, "/v1/messages");
    assert_eq!(q.headers["x-api-key"], "sk-test");
    assert!(q.headers.contains_key("anthropic-version"));
    assert_eq!(q.body["temperature"], 0.0);
    assert_eq!((r.text.as_str(), r.input_tokens, r.output_tokens), ("ok", 10, 2));

    let stub = Stub::start(vec![gemini_ok("ok", 7, 3)]);
    let r = gateway().complete(&request(profile(ApiKind::Gemini, &stub.base), "p")).unwrap();
    let q = &stub.requests()[0];
    assert_eq!(q.path, "/v1beta/models/gemini-1.0-pro:generateContent");
    assert_eq!(q.headers["x-goog-api-key"], "sk-test");
    assert_eq!(q.body["generationConfig"]["temperature"], 0.0);
    assert_eq!((r.input_tokens, r.output_tokens), (7, 3));
}

#[test]
fn server_error_is_retried() {
    let stub = Stub::start(vec![error(503), openai_ok("done", 5, 1)]);
    let r = gateway().complete(&request(profile(ApiKind::Openai, &stub.base), "p")).unwrap();
    assert_eq!(r.retries, 1);
    assert_eq!(r.text, "done");
    assert_eq!(stub.requests().len(), 2);
}

#[test]
fn rate_limit_honours_retry_after() {
    let stub = Stub::start(vec![error(429).header("Retry-After", "1"), openai_ok("done", 5, 1)]);
    let t0 = Instant::now();
    let r = gateway().complete(&request(profile(ApiKind::Openai, &stub.base), "p")).unwrap();
    assert_eq!(r.retries, 1);
    let reqs = stub.requests();
    assert!(reqs[1].at - reqs[0].at >= Duration::from_secs(1));
    assert!(t0.elapsed() >= Duration::from_secs(1));
}

#[test]
fn client_error_is_not_retried() {
    let stub = Stub::start(vec![error(400)]);
    let e = gateway().complete(&request(profile(ApiKind::Openai, &stub.base), "p")).unwrap_err();
    assert!(matches!(e, LlmError::Provider { status: 400, .. }), "{e}");
    assert_eq!(stub.requests().len(), 1);
}

#[test]
fn retries_are_bounded() {
    let stub = Stub::start(vec![error(502)]);
    let e = gateway().complete(&request(profile(ApiKind::Openai, &stub.base), "p")).unwrap_err();
    assert!(matches!(e, LlmError::RetriesExhausted { attempts: 3, .. }), "{e}");
    let reqs = stub.requests();
    assert_eq!(reqs.len(), 3);
    // backoff 10 ms then 20 ms
    assert!(reqs[2].at - reqs[1].at >= Duration::from_millis(20));
}

#[test]
fn guard_and_missing_key_send_nothing() {
    let stub = Stub::start(vec![openai_ok("x", 1, 1)]);
    let mut p = profile(ApiKind::Openai, &stub.base);
    p.context_window = 5000;
    let e = gateway().complete(&request(p, &"x".repeat(8000))).unwrap_err();
    assert!(matches!(e, LlmError::Guard(_)), "{e}");

    let no_key = Gateway::new(Mode::Live, "unused").with_env(|_| None);
    let e = no_key.complete(&request(profile(ApiKind::Openai, &stub.base), "p")).unwrap_err();
    assert!(matches!(e, LlmError::MissingCredentials { ref env_var, .. } if env_var == "STUB_KEY"), "{e}");

    std::thread::sleep(Duration::from_millis(50));
    assert!(stub.requests().is_empty());
}

#[test]
fn requests_to_one_provider_are_spaced() {
    let stub = Stub::start(vec![openai_ok("x", 1, 1)]);
    let mut p = profile(ApiKind::Openai, &stub.base);
    p.requests_per_minute = 600;
    let g = gateway();
    g.complete(&request(p.clone(), "a")).unwrap();
    g.complete(&request(p, "b")).unwrap();
    let reqs = stub.requests();
    assert!(reqs[1].at - reqs[0].at >= Duration::from_millis(95));
}
