use hofa_web::{consistency_size_json, gowers_profile_json, tester_rate_json};
use serde_json::Value;

#[test]
fn gowers_profile_of_x1x2() {
    let poly = r#"{"p":2,"n":2,"alpha":{"num":0,"depth":0},"terms":[{"exps":[1,1],"k":0,"c":1}]}"#;
    let v: Value = serde_json::from_str(&gowers_profile_json(poly, 3).unwrap()).unwrap();
    assert_eq!(v["profile"][0]["norm"], 0.707106781187);
    assert_eq!(v["profile"][1]["norm"], 1.0);
}

#[test]
fn gowers_profile_of_table() {
    let v: Value = serde_json::from_str(&gowers_profile_json(r#"{"p":3,"n":1,"values":[1,1,1]}"#, 2).unwrap()).unwrap();
    assert_eq!(v["profile"][0]["norm"], 1.0);
    assert!(gowers_profile_json(r#"{"p":3,"n":1,"values":[1]}"#, 2).is_err());
}

#[test]
fn tester_on_linear_and_quadratic() {
    let lin = r#"{"p":2,"n":3,"colors":["0","1"],"values":[0,1,0,1,0,1,0,1]}"#;
    let v: Value = serde_json::from_str(&tester_rate_json(lin, "linearity", 2, 2000, 1, false).unwrap()).unwrap();
    assert_eq!(v["rejects"], 0);
    let quad = r#"{"p":2,"n":3,"colors":["0","1"],"values":[0,0,0,1,0,0,0,1]}"#;
    let v: Value = serde_json::from_str(&tester_rate_json(quad, "linearity", 2, 4000, 2, false).unwrap()).unwrap();
    let exact = v["exact"].as_f64().unwrap();
    assert!(v["ci"][0].as_f64().unwrap() <= exact && exact <= v["ci"][1].as_f64().unwrap());
    let v: Value = serde_json::from_str(&tester_rate_json(quad, "degree:2", 2, 500, 3, true).unwrap()).unwrap();
    assert_eq!(v["rejects"], 0);
    assert!(tester_rate_json(quad, "nonsense", 2, 10, 0, false).is_err());
}

#[test]
fn consistency_of_three_term_progressions() {
    let v: Value =
        serde_json::from_str(&consistency_size_json(r#"{"p":3,"l":2,"rows":[[1,0],[0,1],[1,1]]}"#, 1, 0, 3).unwrap()).unwrap();
    assert_eq!(v["size"], "9");
    assert_eq!(v["stabilized"], true);
}
