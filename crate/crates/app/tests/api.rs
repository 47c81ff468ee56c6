use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use clap::Parser;
use cohort_app::api::{router, AppState};
use cohort_app::cli::{run, Cli};
use cohort_app::store::RosterStore;
use cohort_core::instance::ws_instance;
use cohort_core::{Behavior, Node, NodeId, Partition, SocialNetwork, SolveResult, Tie, TieStrength};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    let store = RosterStore::open(dir.path().join("data")).unwrap();
    (dir, router(AppState::new(store, 2)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, net: &SocialNetwork) -> String {
    let (status, body) = call(app, Method::POST, "/rosters", Some(json!({"name": "cohort", "network": net}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

fn pair() -> SocialNetwork {
    SocialNetwork::new(
        vec![
            Node { id: NodeId::new("u"), behavior: Behavior::User },
            Node { id: NodeId::new("n"), behavior: Behavior::NonUser },
        ],
        vec![],
    )
}

#[tokio::test]
async fn health() {
    let (_d, app) = app();
    assert_eq!(call(&app, Method::GET, "/healthz", None).await, (StatusCode::OK, json!({"status": "ok"})));
}

#[tokio::test]
async fn roster_crud_and_versioning() {
    let (_d, app) = app();
    let net = ws_instance(14, 3).unwrap();
    let id = create(&app, &net).await;

    let (s, got) = call(&app, Method::GET, &format!("/rosters/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_value::<SocialNetwork>(got["network"].clone()).unwrap(), net);
    assert_eq!(got["version"], 1);

    let (s, list) = call(&app, Method::GET, "/rosters", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["participants"], 14);

    let other = ws_instance(14, 4).unwrap();
    let (s, upd) = call(&app, Method::PUT, &format!("/rosters/{id}"), Some(json!({"version": 1, "network": other}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(upd["version"], 2);
    let (s, err) = call(&app, Method::PUT, &format!("/rosters/{id}"), Some(json!({"version": 1, "network": net}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["code"], "conflicting_update");
    assert_eq!(err["details"]["current_version"], 2);

    let (s, _) = call(&app, Method::DELETE, &format!("/rosters/{id}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, err) = call(&app, Method::GET, &format!("/rosters/{id}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "not_found");
    assert!(err["message"].is_string());
}

#[tokio::test]
async fn forced_pair_reports_deviancy() {
    let (_d, app) = app();
    let id = create(&app, &pair()).await;
    let body = json!({
        "algo": "exact",
        "params": {"capacity": {"lo": 1, "hi": 2}, "include_facilitator": false},
        "constraints": {"must_link": [["u", "n"]]}
    });
    let (s, r) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{r}");
    assert_eq!(r["result"]["evaluation"]["success"].as_f64().unwrap(), -0.25);
    assert_eq!(r["deviancy_warning"], true);

    // stored and listed in history
    let rid = r["result_id"].as_str().unwrap();
    let (s, stored) = call(&app, Method::GET, &format!("/rosters/{id}/results/{rid}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stored["result"], r["result"]);
    let (_, roster) = call(&app, Method::GET, &format!("/rosters/{id}"), None).await;
    assert_eq!(roster["history"][0]["result_id"], rid);
    assert_eq!(roster["history"][0]["algorithm"], "exact");

    // kept apart, the pair does no harm
    let (_, apart) = call(
        &app,
        Method::POST,
        &format!("/rosters/{id}/solve"),
        Some(json!({"algo": "exact", "params": {"capacity": {"lo": 1, "hi": 2}, "include_facilitator": false}})),
    )
    .await;
    assert_eq!(apart["deviancy_warning"], false);
}

#[tokio::test]
async fn evaluate_endpoint() {
    let (_d, app) = app();
    let id = create(&app, &pair()).await;
    let together = Partition::from_groups([vec!["u", "n"]]);
    let (s, ev) = call(
        &app,
        Method::POST,
        &format!("/rosters/{id}/evaluate"),
        Some(json!({"partition": together, "params": {"capacity": {"lo": 1, "hi": 2}, "include_facilitator": false}})),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{ev}");
    assert_eq!(ev["success"].as_f64().unwrap(), -0.25);
    assert_eq!(ev["deviancy_warning"], true);
    assert!(ev["flips"]["per_node"]["n"].is_object());

    let missing = Partition::from_groups([vec!["u"]]);
    let (s, err) = call(
        &app,
        Method::POST,
        &format!("/rosters/{id}/evaluate"),
        Some(json!({"partition": missing, "params": {"capacity": {"lo": 1, "hi": 2}, "include_facilitator": false}})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "invalid_partition");
}

#[tokio::test]
async fn error_statuses() {
    let (_d, app) = app();
    let (s, e) = call(&app, Method::POST, "/rosters/nope/solve", Some(json!({}))).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let id = create(&app, &pair()).await;
    // two people cannot fill groups of at least 3
    let (s, e) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(json!({"algo": "exact"}))).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("infeasible_bounds")));

    let body = json!({
        "algo": "exact",
        "params": {"capacity": {"lo": 1, "hi": 2}, "include_facilitator": false},
        "constraints": {"must_link": [["u", "n"]], "cannot_link": [["n", "u"]]}
    });
    let (s, e) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(body)).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::CONFLICT, Some("unsatisfiable_constraints")));

    let mut bad = pair();
    let tie = Tie { from: "u".into(), to: "n".into(), strength: TieStrength::Weak };
    bad.ties = vec![tie.clone(), tie];
    let (s, e) = call(&app, Method::POST, "/rosters", Some(json!({"name": "x", "network": bad}))).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_network")));
    assert_eq!(e["details"].as_array().unwrap().len(), 1);

    let (s, e) = call(&app, Method::POST, "/rosters", Some(json!({"name": 3}))).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let (s, e) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(json!({"absent": ["zed"]}))).await;
    assert_eq!((s, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));

    let (s, _) = call(&app, Method::GET, &format!("/rosters/{id}/results/missing"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

fn result_of(v: &Value) -> SolveResult {
    serde_json::from_value(v["result"].clone()).unwrap()
}

/// A member whose group stays within bounds after they leave.
fn removable(p: &Partition, lo: usize) -> NodeId {
    let groups = p.groups();
    groups.iter().find(|g| g.len() > lo).expect("some group above the minimum")[0].clone()
}

#[tokio::test]
async fn absent_member_keeps_everyone_else_in_place() {
    let (_d, app) = app();
    let net = ws_instance(20, 5).unwrap();
    let id = create(&app, &net).await;
    let opts = json!({"algo": "lns", "seed": 3, "restarts": 5});
    let (s, first) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(opts)).await;
    assert_eq!(s, StatusCode::CREATED, "{first}");
    let before = result_of(&first).partition;
    let gone = removable(&before, 3);

    // client-side pins of every remaining member
    let pins: serde_json::Map<String, Value> = net
        .nodes
        .iter()
        .filter(|n| n.id != gone)
        .map(|n| (n.id.as_str().to_string(), json!(before.group_of(&n.id).unwrap())))
        .collect();
    let body = json!({"algo": "lns", "seed": 4, "restarts": 3, "absent": [gone], "constraints": {"pinned": pins}});
    let (s, second) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{second}");
    let after = result_of(&second).partition;
    assert_eq!(after.group_of(&gone), None);
    for n in net.nodes.iter().filter(|n| n.id != gone) {
        assert_eq!(after.group_of(&n.id), before.group_of(&n.id), "{}", n.id);
    }

    // the same without explicit pins, from the roster's latest result
    let body = json!({"algo": "lns", "seed": 5, "restarts": 3, "absent": [gone]});
    let (s, third) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{third}");
    let auto = result_of(&third).partition;
    for n in net.nodes.iter().filter(|n| n.id != gone) {
        assert_eq!(auto.group_of(&n.id), before.group_of(&n.id));
    }

    let body = json!({"algo": "lns", "seed": 5, "restarts": 3, "absent": [gone], "reoptimize": true});
    let (s, fresh) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(body)).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(result_of(&fresh).partition.assignment.len(), 19);
}

#[tokio::test]
async fn cli_and_api_agree() {
    let (dir, app) = app();
    let net = ws_instance(18, 9).unwrap();
    let net_path = dir.path().join("net.json");
    let out = dir.path().join("result.json");
    let cons = dir.path().join("constraints.json");
    std::fs::write(&net_path, serde_json::to_string(&net).unwrap()).unwrap();
    std::fs::write(&cons, r#"{"pinned": {"v000": 0}, "cannot_link": [["v001", "v002"]]}"#).unwrap();
    let args = [
        "cohort",
        "solve",
        net_path.to_str().unwrap(),
        "--algo",
        "lns",
        "--seed",
        "7",
        "--restarts",
        "4",
        "--constraints",
        cons.to_str().unwrap(),
        "--omega-user-given-non",
        "0.75",
        "--out",
        out.to_str().unwrap(),
        "--json",
    ];
    run(Cli::try_parse_from(args).unwrap()).unwrap();
    let from_cli: SolveResult = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let id = create(&app, &net).await;
    let body = json!({
        "algo": "lns",
        "seed": 7,
        "restarts": 4,
        "params": {"omega_user_given_non": 0.75},
        "constraints": {"pinned": {"v000": 0}, "cannot_link": [["v001", "v002"]]}
    });
    let (s, r) = call(&app, Method::POST, &format!("/rosters/{id}/solve"), Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{r}");
    assert_eq!(result_of(&r).without_timings(), from_cli);
}
