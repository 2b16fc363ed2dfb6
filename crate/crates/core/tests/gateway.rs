mod gateway {
    use explorer_core::gateway::*;
    use std::sync::Arc;
    use std::time::Duration;
    use async_trait::async_trait;
    use explorer_core::config::RunConfig;
    use explorer_core::trace::TraceSink;
    use explorer_core::Usd;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        fail_first: u32,
        calls: AtomicU32,
        err: BackendError,
    }

    #[async_trait]
    impl ChatBackend for Flaky {
        async fn complete(&self, _r: &ChatRequest) -> Result<ChatResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(self.err.clone());
            }
            Ok(ChatResponse {
                message: Message::assistant("ok"),
                usage: Usage {
                    input_tokens: 10,
                    output_tokens: 5,
                },
                finish_kind: FinishKind::Stop,
            })
        }
        fn describe(&self) -> String {
            "flaky".into()
        }
    }

    fn gateway(backend: Flaky) -> (Gateway, Arc<Flaky>) {
        let b = Arc::new(backend);
        let g = Gateway::new(b.clone(), &RunConfig::default(), TraceSink::disabled()).with_retry(
            RetryPolicy {
                max_attempts: 3,
                base_delay: Duration::from_millis(1),
                max_delay: Duration::from_millis(5),
            },
        );
        (g, b)
    }

    fn req() -> ChatRequest {
        ChatRequest::new("scripted", vec![Message::system("s")], CallContext::default())
    }

    #[tokio::test]
    async fn retries_then_succeeds_and_charges_once() {
        let (g, b) = gateway(Flaky {
            fail_first: 2,
            calls: AtomicU32::new(0),
            err: BackendError::HttpStatus(502, "bad gateway".into()),
        });
        let c = g.complete(&req()).await.unwrap();
        assert_eq!(c.attempts, 3);
        assert_eq!(c.cost, Usd::from_micros(15));
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn gives_up_after_three_attempts() {
        let (g, b) = gateway(Flaky {
            fail_first: 10,
            calls: AtomicU32::new(0),
            err: BackendError::RateLimited {
                retry_after: Some(Duration::from_millis(1)),
            },
        });
        let err = g.complete(&req()).await.unwrap_err();
        assert_eq!(err.attempts, 3);
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn rejects_request_without_system_prompt() {
        let (g, b) = gateway(Flaky {
            fail_first: 0,
            calls: AtomicU32::new(0),
            err: BackendError::Timeout,
        });
        let r = ChatRequest::new("scripted", vec![Message::user("hi")], CallContext::default());
        assert!(g.complete(&r).await.is_err());
        assert_eq!(b.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn critic_note_is_a_user_message_on_the_wire() {
        assert_eq!(Role::CriticNote.wire_name(), "user");
        let d1 = Message::critic_note("x").digest();
        let d2 = Message::user("x").digest();
        assert_eq!(d1, d2);
    }

    #[test]
    fn backoff_is_exponential_and_capped() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_for(1), Duration::from_millis(500));
        assert_eq!(p.delay_for(2), Duration::from_millis(1000));
        assert_eq!(p.delay_for(3), Duration::from_millis(2000));
        assert_eq!(p.delay_for(20), Duration::from_secs(30));
    }
}

mod wire {
    use explorer_core::gateway::wire::*;
    use serde_json::json;
    use explorer_core::gateway::{ChatRequest, FinishKind, Message, Usage, BackendError};
    use explorer_core::gateway::{CallContext, ToolSchema};

    #[test]
    fn request_has_only_documented_fields() {
        let mut req = ChatRequest::new(
            "m",
            vec![Message::system("s"), Message::critic_note("pivot")],
            CallContext::default(),
        );
        req.tools.push(ToolSchema {
            name: "finish".into(),
            description: "d".into(),
            parameters: json!({"type": "object"}),
        });
        let v = encode_request(&req);
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["max_tokens", "messages", "model", "temperature", "tools"]);
        assert_eq!(v["messages"][1]["role"], "user");
    }

    #[test]
    fn decodes_tool_calls_with_string_arguments() {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
                {"id": "c1", "type": "function", "function": {"name": "submit_flag", "arguments": "{\"flag\":\"x\"}"}}
            ]}, "finish_reason": "tool_calls"}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 7}
        });
        let r = decode_response(&body).unwrap();
        assert_eq!(r.usage, Usage { input_tokens: 12, output_tokens: 7 });
        assert_eq!(r.message.tool_calls[0].arguments, json!({"flag": "x"}));
        assert_eq!(r.finish_kind, FinishKind::ToolCalls);
    }

    #[test]
    fn missing_usage_is_malformed() {
        let body = json!({"choices": [{"message": {"content": "hi"}}]});
        assert!(matches!(decode_response(&body), Err(BackendError::MalformedResponse(_))));
    }
}

mod playbook {
    use explorer_core::gateway::playbook::*;
    use explorer_core::domain::Caller;
    use explorer_core::gateway::{ChatRequest, FinishKind, Message};
    use explorer_core::domain::{EntryPoint, ServiceKind};
    use explorer_core::gateway::CallContext;

    fn req(caller: Caller, agent: u32, round: u32, msgs: &[&str]) -> ChatRequest {
        let mut messages = vec![Message::system("sys")];
        messages.extend(msgs.iter().map(|m| Message::user(*m)));
        let mut ctx = CallContext::new(caller);
        ctx.agent_index = Some(agent);
        ctx.round = Some(round);
        ctx.entrypoint = Some(EntryPoint::new("127.0.0.1", 8040, ServiceKind::Http));
        ChatRequest::new("scripted", messages, ctx)
    }

    #[test]
    fn empty_playbook_defaults_to_finish() {
        let pb = Playbook::parse(r#"{"default": "finish"}"#).unwrap();
        let r = pb.respond(&req(Caller::Agent, 0, 0, &[]));
        assert_eq!(r.finish_kind, FinishKind::Stop);
        assert!(r.message.tool_calls.is_empty());
    }

    #[test]
    fn permission_denied_observation_triggers_wildcard_payload() {
        let pb = Playbook::parse(
            r#"{"rows": [{"when": {"last_contains": "Permission denied"},
                "reply": {"tool_calls": [{"name": "http_request",
                  "arguments": {"url": "http://{{target}}/?format=%27%3B/bin/c%3Ft%20/fl*%3B%27"}}]}}]}"#,
        )
        .unwrap();
        let r = pb.respond(&req(Caller::Agent, 5, 1, &["sh: 3: : Permission denied"]));
        assert_eq!(
            r.message.tool_calls[0].arguments["url"],
            "http://127.0.0.1:8040/?format=%27%3B/bin/c%3Ft%20/fl*%3B%27"
        );
        assert_eq!(r.finish_kind, FinishKind::ToolCalls);
    }

    #[test]
    fn captures_substitute_into_arguments() {
        let pb = Playbook::parse(
            r#"{"rows": [{"when": {"conversation_regex": "(HTB\\{[^}]*\\})"},
                "reply": {"tool_calls": [{"name": "submit_flag", "arguments": {"flag": "$1"}}]}}]}"#,
        )
        .unwrap();
        let r = pb.respond(&req(Caller::Agent, 0, 3, &["body HTB{abc}sh: 1: x"]));
        assert_eq!(r.message.tool_calls[0].arguments["flag"], "HTB{abc}");
    }

    #[test]
    fn unreachable_row_warns_but_loads() {
        let pb = Playbook::parse(
            r#"{"rows": [
                {"when": {"caller": "agent"}, "reply": {"content": "a"}},
                {"when": {"caller": "agent", "round": 2}, "reply": {"content": "b"}}
            ]}"#,
        )
        .unwrap();
        assert_eq!(pb.warnings.len(), 1);
        assert!(pb.warnings[0].contains("row 1"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Playbook::parse("{\n  \"rows\": [\n    {\"when\": {\"last_regex\": \"(\"}, \"reply\": {}}\n  ]\n}")
            .unwrap_err();
        match err {
            PlaybookError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = Playbook::parse("{\"rows\": [{\"reply\": {\"tool_calls\": [{\"name\": \"rm\"}]}}]}")
            .unwrap_err();
        assert!(matches!(err, PlaybookError::Parse { line: 1, .. }));
    }

    #[test]
    fn per_caller_defaults() {
        let pb = Playbook::parse(
            r#"{"defaults": {"decision": {"content": "HANDOFF"}}, "default": {"content": "x"}}"#,
        )
        .unwrap();
        assert_eq!(pb.respond(&req(Caller::Decision, 0, 0, &[])).message.content, "HANDOFF");
        assert_eq!(pb.respond(&req(Caller::Critic, 0, 0, &[])).message.content, "x");
    }
}

mod stochastic {
    use explorer_core::gateway::stochastic::*;
    use explorer_core::domain::Caller;
    use explorer_core::gateway::{ChatBackend, ChatRequest, Message};
    use explorer_core::domain::{EntryPoint, ServiceKind};
    use explorer_core::gateway::CallContext;

    fn req(round: u32, observations: &[&str]) -> ChatRequest {
        let mut msgs = vec![Message::system("s"), Message::user("go")];
        for o in observations {
            msgs.push(Message::tool("c", *o));
        }
        let mut ctx = CallContext::new(Caller::Agent);
        ctx.round = Some(round);
        ctx.agent_index = Some(0);
        ctx.entrypoint = Some(EntryPoint::new("127.0.0.1", 9000, ServiceKind::Http));
        ChatRequest::new("scripted", msgs, ctx)
    }

    #[tokio::test]
    async fn identical_requests_get_identical_responses() {
        let b = Stochastic::new(7, 0.5);
        for r in 0..6 {
            let a = b.complete(&req(r, &["<a href=\"?format=%H\">"])).await.unwrap();
            let c = b.complete(&req(r, &["<a href=\"?format=%H\">"])).await.unwrap();
            assert_eq!(a, c);
        }
    }

    #[tokio::test]
    async fn submits_observed_flag() {
        let b = Stochastic::new(1, 0.0);
        let r = b.complete(&req(2, &["HTB{x}sh: 1: : Permission denied"])).await.unwrap();
        assert_eq!(r.message.tool_calls[0].name, "submit_flag");
        assert_eq!(r.message.tool_calls[0].arguments["flag"], "HTB{x}");
    }

    #[test]
    fn family_detection() {
        assert_eq!(Family::detect("href=\"?format=%H\""), Family::CommandInjection);
        assert_eq!(Family::detect("<a href=\"?file=a.txt\">"), Family::PathTraversal);
        assert_eq!(Family::detect("curl 'http://h/?format=%24(id)'"), Family::Unknown);
        assert_eq!(Family::detect("nothing"), Family::Unknown);
    }
}
