//! Browser bindings. Every entry point takes and returns JSON text so the
//! page needs no glue beyond `JSON.parse`.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use zerocluster::bounds::{min_on_sphere, realify_system, BoundOptions};
use zerocluster::certify::{
    oracle_solve, run_pipeline, verify_cluster_certificate, ClusterCertificate, PipelineError, PipelineOptions,
};
use zerocluster::io::parse_input;

/// Smaller than the native default: the page runs on one thread.
const DEMO_MAX_BOXES: usize = 50_000;
const BOUNDARY_POINTS: usize = 240;

#[derive(Serialize)]
struct Plot {
    boundary: Vec<[f64; 2]>,
    zeros: Vec<[f64; 2]>,
    center: [f64; 2],
}

fn plot(f: &zerocluster::poly::PolySystem, cert: &ClusterCertificate) -> Option<Plot> {
    let ball = cert.region();
    let boundary = ball.region_boundary(BOUNDARY_POINTS).ok()?;
    let zeros = oracle_solve(f, &ball, 5);
    let t = &cert.map.translation;
    Some(Plot {
        boundary: boundary.iter().map(|p| [p[0].re, p[1].re]).collect(),
        zeros: zeros.iter().map(|z| [z.point[0].re, z.point[1].re]).collect(),
        center: [t[0].re, t[1].re],
    })
}

/// Runs the pipeline on `{"system": [...], "point": [...]}`.
pub fn certify_json(input: &str) -> String {
    let input = match parse_input(input) {
        Ok(i) => i,
        Err(e) => return json!({"status": "error", "message": e.to_string()}).to_string(),
    };
    let Some(y) = input.point.as_ref() else {
        return json!({"status": "error", "message": "input has no \"point\" field"}).to_string();
    };
    let opts = PipelineOptions { max_boxes: DEMO_MAX_BOXES, ..PipelineOptions::default() };
    match run_pipeline(&input.system, y, &opts) {
        Ok(cert) => json!({
            "status": "certified",
            "certificate": cert.to_json(),
            "plot": plot(&input.system, &cert),
        })
        .to_string(),
        Err(PipelineError::Invalid(e)) => json!({"status": "error", "message": e.to_string()}).to_string(),
        Err(PipelineError::Failed(report)) => json!({
            "status": "failed",
            "message": report.to_string(),
            "report": report,
        })
        .to_string(),
    }
}

/// Re-verifies a certificate (JSON) against the input system.
pub fn check_json(input: &str, certificate: &str) -> String {
    let input = match parse_input(input) {
        Ok(i) => i,
        Err(e) => return json!({"status": "error", "message": e.to_string()}).to_string(),
    };
    let cert = match ClusterCertificate::from_json_str(certificate) {
        Ok(c) => c,
        Err(e) => return json!({"status": "error", "message": e.to_string()}).to_string(),
    };
    match verify_cluster_certificate(&input.system, &cert) {
        Ok(()) => json!({"status": "verified", "multiplicity": cert.multiplicity}).to_string(),
        Err(r) => json!({"status": "rejected", "check": r.check, "message": r.to_string()}).to_string(),
    }
}

/// Lower-bounds `|Q|` on the unit sphere for a homogeneous quadratic system.
pub fn bound_json(input: &str, max_boxes: usize) -> String {
    let result = parse_input(input).and_then(|i| realify_system(&i.system));
    match result {
        Ok(rq) => {
            let opts = BoundOptions { max_boxes: max_boxes.clamp(1, DEMO_MAX_BOXES), ..BoundOptions::default() };
            json!({"status": "ok", "bound": min_on_sphere(&rq, &opts)}).to_string()
        }
        Err(e) => json!({"status": "error", "message": e.to_string()}).to_string(),
    }
}

#[wasm_bindgen]
pub fn certify(input: &str) -> String {
    certify_json(input)
}

#[wasm_bindgen]
pub fn check(input: &str, certificate: &str) -> String {
    check_json(input, certificate)
}

#[wasm_bindgen]
pub fn bound(input: &str, max_boxes: usize) -> String {
    bound_json(input, max_boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const WORKED: &str = include_str!("../../core/tests/data/worked.json");
    const WORKED_Q: &str = include_str!("../../core/tests/data/worked_q.json");

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn certify_then_check() {
        let out = parse(&certify_json(WORKED));
        assert_eq!(out["status"], "certified");
        assert_eq!(out["certificate"]["multiplicity"], 2);
        assert_eq!(out["plot"]["zeros"].as_array().unwrap().len(), 2);
        assert_eq!(out["plot"]["boundary"].as_array().unwrap().len(), BOUNDARY_POINTS);

        let cert = out["certificate"].to_string();
        assert_eq!(parse(&check_json(WORKED, &cert))["status"], "verified");

        let mut bad = out["certificate"].clone();
        bad["c"] = json!(bad["c"].as_f64().unwrap() * 2.0);
        assert_eq!(parse(&check_json(WORKED, &bad.to_string()))["status"], "rejected");
    }

    #[test]
    fn failures_are_reported() {
        let far = WORKED.replace("[[0.001, 0.0], [-0.001, 0.0]]", "[[10.0, 0.0], [10.0, 0.0]]");
        let out = parse(&certify_json(&far));
        assert_eq!(out["status"], "failed");
        assert_eq!(out["report"]["step"], 6);
        assert_eq!(parse(&certify_json("{"))["status"], "error");
    }

    #[test]
    fn bound_of_the_worked_quadratic_part() {
        let out = parse(&bound_json(WORKED_Q, 5000));
        assert_eq!(out["status"], "ok");
        let q = out["bound"]["q_lower"].as_f64().unwrap();
        assert!(q > 0.2 && q <= 0.2222, "{q}");
        assert_eq!(parse(&bound_json(WORKED, 100))["status"], "error");
    }
}
