mod support;

use ragcov::corpus::DocumentChunk;
use ragcov::embed::{build_provider, embed_texts, EmbedError, EmbeddingCache, ProviderConfig, ProviderKind};
use ragcov::gaps::{build_backend, ConceptBackendConfig, ConceptBackendKind};
use support::{embedding_reply, MockServer};

fn config(server: &MockServer, key_env: &str) -> ProviderConfig {
    std::env::set_var(key_env, "sk-test");
    ProviderConfig {
        api_key_env: key_env.into(),
        base_url: Some(server.base_url.clone()),
        retry_initial_delay_ms: 1,
        batch_size: 2,
        max_in_flight: 1,
        ..ProviderConfig::for_kind(ProviderKind::OpenAi)
    }
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("text number {i}")).collect()
}

#[test]
fn retries_rate_limits_and_server_errors() {
    let server = MockServer::start(|n, req| match n {
        0 => (429, "{}".into()),
        1 => (503, "{}".into()),
        _ => (200, embedding_reply(&req.body, 4)),
    });
    let cfg = config(&server, "RAGCOV_TEST_KEY_RETRY");
    let provider = build_provider(&cfg).unwrap();
    let m = embed_texts(&texts(2), provider.as_ref(), &cfg, None).unwrap();
    assert_eq!((m.n_rows(), m.dim()), (2, 4));
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs.len(), 3);
    assert_eq!(reqs[0].path, "/embeddings");
    assert_eq!(reqs[0].authorization.as_deref(), Some("Bearer sk-test"));
    assert_eq!(reqs[2].body["model"], "text-embedding-3-small");
}

#[test]
fn gives_up_after_max_retries() {
    let server = MockServer::start(|_, _| (500, r#"{"error":"boom"}"#.into()));
    let cfg = ProviderConfig { max_retries: 2, ..config(&server, "RAGCOV_TEST_KEY_GIVEUP") };
    let provider = build_provider(&cfg).unwrap();
    let err = embed_texts(&texts(1), provider.as_ref(), &cfg, None).unwrap_err();
    assert!(matches!(err, EmbedError::Provider { .. }), "{err}");
    assert!(err.to_string().contains("500"), "{err}");
    assert_eq!(server.count(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(|_, _| (400, r#"{"error":"bad input"}"#.into()));
    let cfg = config(&server, "RAGCOV_TEST_KEY_400");
    let provider = build_provider(&cfg).unwrap();
    assert!(embed_texts(&texts(1), provider.as_ref(), &cfg, None).is_err());
    assert_eq!(server.count(), 1);
}

#[test]
fn batches_and_cache_hits() {
    let server = MockServer::start(|_, req| (200, embedding_reply(&req.body, 3)));
    let cfg = config(&server, "RAGCOV_TEST_KEY_CACHE");
    let provider = build_provider(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = EmbeddingCache::open(dir.path()).unwrap();

    let first = embed_texts(&texts(5), provider.as_ref(), &cfg, Some(&cache)).unwrap();
    assert_eq!(server.count(), 3, "five texts in batches of two");
    let again = embed_texts(&texts(5), provider.as_ref(), &cfg, Some(&cache)).unwrap();
    assert_eq!(server.count(), 3, "second run is served from the cache");
    assert_eq!(first, again);

    let mut more = texts(5);
    more.push("a new text".into());
    embed_texts(&more, provider.as_ref(), &cfg, Some(&cache)).unwrap();
    assert_eq!(server.count(), 4);
}

#[test]
fn missing_key_is_reported_by_name() {
    let cfg = ProviderConfig {
        api_key_env: "RAGCOV_TEST_KEY_NEVER_SET".into(),
        ..ProviderConfig::for_kind(ProviderKind::Voyage)
    };
    match build_provider(&cfg) {
        Err(EmbedError::MissingApiKey(name)) => assert_eq!(name, "RAGCOV_TEST_KEY_NEVER_SET"),
        other => panic!("expected a missing key error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn llm_backend_parses_json_lists() {
    let server = MockServer::start(|_, req| {
        let prompt = req.body["messages"][1]["content"].as_str().unwrap_or("").to_string();
        let content = if prompt.contains("key concepts") {
            r#"["Heron Habitats", "Migration"]"#
        } else {
            "```json\n[\"Where do herons nest?\"]\n```"
        };
        (200, serde_json::json!({"choices": [{"message": {"content": content}}]}).to_string())
    });
    std::env::set_var("RAGCOV_TEST_KEY_LLM", "sk-llm");
    let backend = build_backend(&ConceptBackendConfig {
        backend: ConceptBackendKind::Llm,
        api_key_env: "RAGCOV_TEST_KEY_LLM".into(),
        base_url: Some(server.base_url.clone()),
        retry_initial_delay_ms: 1,
        ..ConceptBackendConfig::default()
    })
    .unwrap();
    let chunk = DocumentChunk {
        index: 0,
        doc_id: "birds".into(),
        text: "Herons nest in colonies near water.".into(),
        token_count: 6,
        start: 0,
        end: 35,
    };
    let themes = backend.extract_themes(&[&chunk], std::slice::from_ref(&chunk)).unwrap();
    assert_eq!(themes, vec!["Heron Habitats", "Migration"]);
    let qs = backend.suggest_questions(&themes, &[&chunk]).unwrap();
    assert_eq!(qs, vec!["Where do herons nest?"]);
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs[0].path, "/chat/completions");
    assert_eq!(reqs[0].authorization.as_deref(), Some("Bearer sk-llm"));
}
