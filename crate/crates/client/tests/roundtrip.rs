use tokprune_client::{Client, ClientError};
use tokprune_core::api::{CalibrateRequest, RunRequest, SessionRequest, VerifyRequest};
use tokprune_core::config::RunConfig;
use tokprune_core::report::{forward_artifacts, schedule_artifacts};
use tokprune_core::verify::VerifyOptions;
use tokprune_core::{Matrix, Segment};

async fn spawn() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(tokprune_server::serve(listener));
    Client::new(format!("http://{addr}/"))
}

#[tokio::test]
async fn remote_artifacts_match_local() {
    let client = spawn().await;
    assert!(client.health().await.unwrap());

    let req =
        RunRequest { embed_dim: Some(8), num_heads: Some(2), seed: Some(3), ..RunRequest::preset("sutrack224-utp") };
    let remote = client.forward(&req).await.unwrap();
    let (_, local) = forward_artifacts(&req.label(), &req.resolve().unwrap()).unwrap();
    assert_eq!(remote.artifacts, local);

    let sched = client.schedule(&RunRequest::preset("ostrack256-utp")).await.unwrap();
    let (_, local) = schedule_artifacts("ostrack256-utp", &RunConfig::preset("ostrack256-utp").unwrap()).unwrap();
    assert_eq!(sched.artifacts, local);
    assert_eq!(sched.report.cmp_vis_tok, 135);
}

#[tokio::test]
async fn api_errors_carry_the_message() {
    let client = spawn().await;
    match client.schedule(&RunRequest::preset("bogus")).await {
        Err(ClientError::Api { status, message }) => {
            assert_eq!(status, 400);
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("expected an API error, got {other:?}"),
    }
    assert!(matches!(client.frame("nope", 1, 0.9).await, Err(ClientError::Api { status: 404, .. })));
}

#[tokio::test]
async fn calibrate_verify_sessions_penalty() {
    let client = spawn().await;
    let cal = client
        .calibrate(&CalibrateRequest {
            preset: "sutrack224".into(),
            segment: Segment::Dt,
            target: 11,
            event_layers: None,
        })
        .await
        .unwrap();
    assert_eq!(cal.event_layers, vec![9, 15, 21]);
    assert!(cal.solutions.iter().any(|s| s.keep_ratio == 0.6));

    let v = client
        .verify(&VerifyRequest { options: VerifyOptions { keep_ratio_sr: None, instances: 3, samples: 20 } })
        .await
        .unwrap();
    assert_eq!(v.report.criteria.len(), 10);
    let token_tables = &v.report.criteria[0];
    assert!(token_tables.passed);

    let s = client.create_session(&SessionRequest::default()).await.unwrap();
    let fired: Vec<bool> = send_frames(&client, &s.id).await;
    assert_eq!(fired, vec![false, true, false]);
    client.close_session(&s.id).await.unwrap();
    assert!(client.close_session(&s.id).await.is_err());

    let out = client.penalty(Matrix::new(1, 1, vec![0.5]).unwrap()).await.unwrap();
    assert_eq!(out.data(), &[0.5]);
}

async fn send_frames(client: &Client, id: &str) -> Vec<bool> {
    let mut out = Vec::new();
    for (frame, conf) in [(24, 0.9), (50, 0.71), (75, 0.7)] {
        out.push(client.frame(id, frame, conf).await.unwrap().update);
    }
    out
}
