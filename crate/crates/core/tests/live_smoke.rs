//! Runs the four example missions against a real chat-completions endpoint.
//! Needs PLANNER_LLM_ENDPOINT, PLANNER_LLM_MODEL and usually
//! PLANNER_LLM_API_KEY; run with `cargo test --test live_smoke -- --ignored`.

use mrta_planner::llm::{run_planning_session, LiveBackend, LiveConfig, DEFAULT_MAX_TURNS};
use mrta_planner::model::Fleet;

#[test]
#[ignore = "needs network access and an LLM endpoint"]
fn missions_build_complete_trees() {
    let config = LiveConfig {
        endpoint: std::env::var("PLANNER_LLM_ENDPOINT").expect("PLANNER_LLM_ENDPOINT"),
        model: std::env::var("PLANNER_LLM_MODEL").expect("PLANNER_LLM_MODEL"),
        timeout_seconds: 120,
    };
    let fleet = Fleet::table_i();
    for mission in [
        "Reunite mom with her lost child",
        "Help the woman walking with heavy luggage",
        "Save the city from the monster destroying it",
        "Rescue cat trapped in a building on fire",
    ] {
        let mut backend = LiveBackend::new(config.clone()).unwrap();
        let out = run_planning_session(mission, &fleet, &mut backend, DEFAULT_MAX_TURNS).unwrap();
        assert!(out.report.complete, "{mission}: {}", out.report.summary());
    }
}
