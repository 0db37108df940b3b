//! Fixture-level examples: small textbook models and hand-derived checks.

mod common;

use backdoor_core::enumerate::{enumerate_and_fit, enumerate_orientations, orientation_label, EffectQuery, Skeleton};
use backdoor_core::fit::{fit, fit_from_data};
use backdoor_core::graph::{CausalGraph, Edge, NodeName, Relation};
use backdoor_core::io::{parse_correlation_csv, parse_dag, read_dataset_csv, write_dataset_csv, Report};
use backdoor_core::paths::{
    adjustment_sets, all_paths, backdoor_paths, directed_paths, path_status, PathLimits, VariableRole,
    DEFAULT_PATH_CAP,
};
use backdoor_core::sem::{
    attach_weights, correlation_decomposition, do_surgery, expected_regression, implied_correlations,
    predict_intervention, regress, total_effect, Coefficients, CorrelationMatrix, ImpliedMethod,
};
use backdoor_core::simulate::{select, simulate};
use backdoor_core::Error;
use common::{close, fixture, load_model};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const NONE: &[&str] = &[];

fn limits(g: &CausalGraph) -> PathLimits {
    PathLimits::complete(g, DEFAULT_PATH_CAP)
}

fn texts(paths: &[backdoor_core::paths::Path]) -> Vec<String> {
    paths.iter().map(ToString::to_string).collect()
}

fn names(v: &[&str]) -> Vec<NodeName> {
    v.iter().map(|n| NodeName::new(*n).unwrap()).collect()
}

fn weighted(edges: &[(Edge, f64)]) -> backdoor_core::sem::WeightedModel {
    let g = CausalGraph::from_names(&[], edges.iter().map(|(e, _)| e.clone()).collect()).unwrap();
    attach_weights(&g, &edges.iter().cloned().collect()).unwrap()
}

fn d(a: &str, b: &str) -> Edge {
    Edge::parse_directed(a, b)
}

fn sample_corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

// graph structure

#[test]
fn graph_construction() {
    let mediated = load_model("mediated.dag");
    assert_eq!(mediated.graph().topological_order(), names(&["X", "Z", "Y"]));
    assert!(matches!(
        CausalGraph::from_names(&[], vec![d("A", "B"), d("B", "A")]),
        Err(Error::Cycle(_))
    ));
    let lagged = parse_dag(&fixture("cross_lagged.dag")).unwrap().graph;
    assert!(lagged.has_bidirected());
    let bare = CausalGraph::from_names(&["B", "A"], vec![]).unwrap();
    assert_eq!(bare.topological_order(), names(&["B", "A"]));
    assert_eq!(mediated.graph().relatives("X", Relation::Descendants).unwrap(), names(&["Z", "Y"]));
    assert_eq!(mediated.graph().relatives("Y", Relation::Parents).unwrap(), names(&["X", "Z"]));
    assert!(matches!(mediated.graph().relatives("Q", Relation::Parents), Err(Error::UnknownNode(_))));
}

// paths

#[test]
fn path_listings() {
    let mediated = load_model("mediated.dag");
    let g = mediated.graph();
    assert_eq!(texts(&all_paths(g, "X", "Y", &limits(g)).unwrap()), ["X -> Z -> Y", "X -> Y"]);

    let collider = load_model("collider.dag");
    let cg = collider.graph();
    assert_eq!(texts(&all_paths(cg, "X", "Z", &limits(cg)).unwrap()), ["X -> Y <- Z"]);

    let m4 = load_model("identity_model4.dag");
    let g4 = m4.graph();
    let causal = texts(&directed_paths(g4, "PR", "Identity", &limits(g4)).unwrap());
    assert_eq!(causal.len(), 4);
    for p in ["PR -> Identity", "PR -> INT -> Identity", "PR -> SE -> Identity", "PR -> SE -> INT -> Identity"] {
        assert!(causal.contains(&p.to_string()), "{p}");
    }
    // the only other connection runs through the collider at INT
    let all = texts(&all_paths(g4, "PR", "Identity", &limits(g4)).unwrap());
    assert_eq!(all.len(), 5);
    assert!(all.contains(&"PR -> INT <- SE -> Identity".to_string()));
    // the tracing sum over the causal paths reproduces the stated totals
    let total = total_effect(&m4, "PR", "Identity", NONE).unwrap().total;
    assert!(close(total, 0.59 + 0.47 * 0.23 + 0.67 * (0.13 + 0.26 * 0.23), 1e-12));
}

#[test]
fn path_blocking() {
    let chain = CausalGraph::from_names(&[], vec![d("X", "Y"), d("Y", "Z")]).unwrap();
    let p = &all_paths(&chain, "X", "Z", &limits(&chain)).unwrap()[0];
    assert!(!path_status(&chain, p, &["Y"]).unwrap().open);
    assert!(path_status(&chain, p, NONE).unwrap().open);

    let collider = CausalGraph::from_names(&[], vec![d("X", "Y"), d("Z", "Y"), d("Y", "W")]).unwrap();
    let p = &all_paths(&collider, "X", "Z", &limits(&collider)).unwrap()[0];
    assert!(!path_status(&collider, p, NONE).unwrap().open);
    assert!(path_status(&collider, p, &["Y"]).unwrap().open);
    assert!(path_status(&collider, p, &["W"]).unwrap().open);
    assert!(matches!(path_status(&collider, p, &["X"]), Err(Error::InvalidQuery(_))));
}

#[test]
fn adjusting_a_collider_descendant_associates_its_causes() {
    let m = weighted(&[(d("X", "Y"), 0.5), (d("Z", "Y"), 0.5), (d("Y", "W"), 0.8)]);
    let data = simulate(&m, 200_000, 7).unwrap();
    let stratum = select(&data, &"W>1".parse().unwrap()).unwrap();
    let r = sample_corr(stratum.column("X").unwrap(), stratum.column("Z").unwrap());
    assert!(r < -0.05, "corr(X, Z | W > 1) = {r}");
    let full = sample_corr(data.column("X").unwrap(), data.column("Z").unwrap());
    assert!(full.abs() < 0.01);
}

#[test]
fn backdoor_listings() {
    let mediated = load_model("mediated.dag");
    let g = mediated.graph();
    assert_eq!(texts(&backdoor_paths(g, "Z", "Y", &limits(g)).unwrap()), ["Z <- X -> Y"]);
    assert!(backdoor_paths(g, "X", "Y", &limits(g)).unwrap().is_empty());

    let conf = load_model("confounded.dag");
    let cg = conf.graph();
    assert_eq!(
        texts(&backdoor_paths(cg, "X", "Y", &limits(cg)).unwrap()),
        ["X <- C1 -> Y", "X <- C2 -> Y", "X <- C3 -> Y"]
    );
}

#[test]
fn adjustment_reports() {
    let mediated = load_model("mediated.dag");
    let g = mediated.graph();
    let zy = adjustment_sets(g, "Z", "Y", DEFAULT_PATH_CAP).unwrap();
    assert_eq!(zy.minimal_sets, vec![names(&["X"])]);
    let xy = adjustment_sets(g, "X", "Y", DEFAULT_PATH_CAP).unwrap();
    assert_eq!(xy.minimal_sets, vec![Vec::<NodeName>::new()]);
    assert!(!xy.valid_sets.contains(&names(&["Z"])));

    let conf = load_model("confounded.dag");
    let report = adjustment_sets(conf.graph(), "X", "Y", DEFAULT_PATH_CAP).unwrap();
    assert_eq!(report.minimal_sets, vec![names(&["C1", "C2", "C3"])]);
}

#[test]
fn roles_in_the_three_elementary_structures() {
    let role = |edges: Vec<Edge>, x: &str, y: &str, v: &str| {
        let g = CausalGraph::from_names(&[], edges).unwrap();
        let report = adjustment_sets(&g, x, y, DEFAULT_PATH_CAP).unwrap();
        report.variable_roles.into_iter().find(|r| r.node.as_str() == v).unwrap().roles
    };
    assert_eq!(role(vec![d("X", "M"), d("M", "Y")], "X", "Y", "M"), [VariableRole::Mediator]);
    assert_eq!(role(vec![d("C", "X"), d("C", "Y")], "X", "Y", "C"), [VariableRole::Confounder]);
    assert_eq!(
        role(vec![d("X", "K"), d("Y", "K"), d("X", "Y")], "X", "Y", "K"),
        [VariableRole::Collider]
    );
}

// weighted models

#[test]
fn standardization() {
    let mediated = load_model("mediated.dag");
    // Var(Z) = 0.2^2 + e_Z = 1
    assert!(close(mediated.error_var("Z").unwrap(), 1.0 - 0.2 * 0.2, 1e-15));
    let g = CausalGraph::from_names(&[], vec![d("X", "Y")]).unwrap();
    let c: Coefficients = [(d("X", "Y"), 1.5)].into_iter().collect();
    assert!(matches!(attach_weights(&g, &c), Err(Error::InfeasibleStandardization { .. })));
    let lagged = load_model("cross_lagged.dag");
    assert!(lagged.error_var("P2").unwrap() > 0.0);
}

#[test]
fn implied_correlations_of_fixtures() {
    let mediated = load_model("mediated.dag");
    let r = implied_correlations(&mediated, ImpliedMethod::Tracing).unwrap();
    assert!(close(r.get("X", "Y").unwrap(), 0.35 + 0.2 * 0.65, 1e-12));
    assert!(close(r.get("Z", "Y").unwrap(), 0.65 + 0.2 * 0.35, 1e-12));
    assert!(close(r.get("X", "Z").unwrap(), 0.2, 1e-12));
    assert!(close(r.get("X", "Y").unwrap(), 0.48, 1e-12));
    assert!(close(r.get("Z", "Y").unwrap(), 0.72, 1e-12));

    let bare = attach_weights(&CausalGraph::from_names(&["A", "B", "C"], vec![]).unwrap(), &Coefficients::new()).unwrap();
    let r = implied_correlations(&bare, ImpliedMethod::Matrix).unwrap();
    assert_eq!(r, CorrelationMatrix::identity(names(&["A", "B", "C"])));

    let m1 = weighted(&[(d("A", "B"), 0.5), (d("A", "C"), -4.0 / 15.0), (d("B", "C"), 14.0 / 15.0)]);
    let r = implied_correlations(&m1, ImpliedMethod::Matrix).unwrap();
    let table = parse_correlation_csv(&fixture("triangle.cor.csv")).unwrap();
    assert!(r.max_abs_diff(&table).unwrap() < 1e-12);
}

#[test]
fn regressions_on_the_mediated_model() {
    let mediated = load_model("mediated.dag");
    let r = implied_correlations(&mediated, ImpliedMethod::Matrix).unwrap();
    let y_x = regress(&r, "Y", &["X"]).unwrap();
    assert!(close(y_x.beta("X").unwrap(), 0.48, 1e-12));
    assert!(close(y_x.r_squared, 0.2304, 1e-12));
    let z_xy = regress(&r, "Z", &["X", "Y"]).unwrap();
    // two-predictor normal equations solved by hand
    let (rzx, rzy, rxy) = (0.2, 0.72, 0.48);
    let bx = (rzx - rzy * rxy) / (1.0 - rxy * rxy);
    let by = (rzy - rzx * rxy) / (1.0 - rxy * rxy);
    assert!(close(z_xy.beta("X").unwrap(), bx, 1e-12));
    assert!(close(z_xy.beta("Y").unwrap(), by, 1e-12));
    assert!(close(bx, -0.1892, 5e-5) && close(by, 0.8108, 5e-5));

    let ident = CorrelationMatrix::identity(names(&["P", "Q"]));
    let res = regress(&ident, "P", &["Q"]).unwrap();
    assert_eq!((res.beta("Q").unwrap(), res.r_squared), (0.0, 0.0));
}

#[test]
fn omitted_variable_bias_in_the_lab_study() {
    let m = load_model("lab_instruction.dag");
    let both = expected_regression(&m, "Post", &["Major", "Instr", "Pre"]).unwrap();
    assert!(close(both.beta("Major").unwrap(), 0.115, 1e-12));
    assert!(close(both.beta("Instr").unwrap(), 0.505, 1e-12));
    assert!(close(both.beta("Pre").unwrap(), 0.56, 1e-12));
    let no_instr = expected_regression(&m, "Post", &["Major", "Pre"]).unwrap();
    assert!(close(no_instr.beta("Major").unwrap(), 0.115 + 0.574 * 0.505, 1e-12));
    assert!(close(no_instr.beta("Major").unwrap(), 0.405, 0.001));
    let no_major = expected_regression(&m, "Post", &["Instr", "Pre"]).unwrap();
    assert!(close(no_major.beta("Instr").unwrap(), 0.505 + 0.574 * 0.115, 1e-12));
    assert!(close(no_major.beta("Instr").unwrap(), 0.571, 0.001));
}

#[test]
fn total_effects() {
    let mediated = load_model("mediated.dag");
    let e = total_effect(&mediated, "X", "Y", NONE).unwrap();
    assert!(close(e.total, 0.48, 1e-12) && close(e.direct, 0.35, 1e-12) && close(e.indirect, 0.13, 1e-12));

    let m1 = weighted(&[(d("A", "B"), 0.5), (d("A", "C"), -4.0 / 15.0), (d("B", "C"), 14.0 / 15.0)]);
    assert!(close(total_effect(&m1, "A", "C", &["B"]).unwrap().total, -4.0 / 15.0, 1e-12));

    let m4 = weighted(&[(d("C", "A"), 0.2), (d("C", "B"), 0.8), (d("A", "B"), 0.1)]);
    let e = total_effect(&m4, "A", "C", NONE).unwrap();
    assert_eq!((e.total, e.per_path.len()), (0.0, 0));
}

#[test]
fn correlation_decompositions() {
    let lagged = load_model("cross_lagged.dag");
    let dec = correlation_decomposition(&lagged, "SE1", "P2").unwrap();
    assert!(close(dec.total, 0.071, 1e-12));
    assert!(close(dec.non_causal.unwrap(), 0.316 * 0.560, 1e-12));
    assert!(close(dec.correlation.unwrap(), 0.248, 0.001));

    let mediated = load_model("mediated.dag");
    let dec = correlation_decomposition(&mediated, "Z", "Y").unwrap();
    assert!(close(dec.total, 0.65, 1e-12) && close(dec.non_causal.unwrap(), 0.07, 1e-12));

    let apart = attach_weights(&CausalGraph::from_names(&["U", "V"], vec![]).unwrap(), &Coefficients::new()).unwrap();
    let dec = correlation_decomposition(&apart, "U", "V").unwrap();
    assert!(dec.per_path.is_empty());
    assert_eq!(dec.correlation, Some(0.0));
}

#[test]
fn surgery() {
    let conf = load_model("confounded.dag");
    let cut = do_surgery(&conf, "X").unwrap();
    let y_x = expected_regression(&cut, "Y", &["X"]).unwrap();
    assert!(close(y_x.beta("X").unwrap(), 0.4, 1e-12));
    assert!(close(cut.error_var("X").unwrap(), 1.0, 1e-15));

    let mediated = load_model("mediated.dag");
    assert_eq!(do_surgery(&mediated, "X").unwrap(), mediated);
    let cut_z = do_surgery(&mediated, "Z").unwrap();
    assert!(close(total_effect(&cut_z, "X", "Y", NONE).unwrap().total, 0.35, 1e-12));
    assert!(matches!(do_surgery(&mediated, "Q"), Err(Error::UnknownNode(_))));
}

#[test]
fn intervention_cascades() {
    let m4 = load_model("identity_model4.dag");
    let r = predict_intervention(&m4, "PR", 1.0).unwrap();
    assert!(close(r.change("Identity").unwrap(), 0.8253, 1e-4));
    assert!(close(r.change("SE").unwrap(), 0.67, 1e-12));
    // PR reaches INT both directly and through SE
    assert!(close(r.change("INT").unwrap(), 0.47 + 0.67 * 0.26, 1e-12));

    for file in ["identity_model1.dag", "identity_model2.dag", "identity_model3.dag"] {
        let m = load_model(file);
        let r = predict_intervention(&m, "PR", 1.0).unwrap();
        assert!(close(r.change("Identity").unwrap(), 0.59, 1e-12), "{file}");
        assert_eq!((r.change("SE").unwrap(), r.change("INT").unwrap()), (0.0, 0.0), "{file}");
        assert!(!r.removed_edges.is_empty(), "{file}");
    }

    let zero = predict_intervention(&m4, "PR", 0.0).unwrap();
    assert!(zero.changes.iter().all(|c| c.change == 0.0));
}

// fitting

#[test]
fn fitting_the_triangle_table() {
    let table = parse_correlation_csv(&fixture("triangle.cor.csv")).unwrap();
    let g1 = CausalGraph::from_names(&[], vec![d("A", "B"), d("A", "C"), d("B", "C")]).unwrap();
    let g2 = CausalGraph::from_names(&[], vec![d("B", "A"), d("A", "C"), d("B", "C")]).unwrap();
    let f1 = fit(&g1, &table).unwrap().model;
    let f2 = fit(&g2, &table).unwrap().model;
    assert!(close(f1.coefficient(&d("A", "C")).unwrap(), -0.2667, 5e-5));
    assert!(close(f1.coefficient(&d("B", "C")).unwrap(), 0.9333, 5e-5));
    for (a, b) in f1.coefficient_list().iter().zip(f2.coefficient_list()) {
        assert!(close(*a, *b, 1e-12));
    }

    let mediated = load_model("mediated.dag");
    let implied = implied_correlations(&mediated, ImpliedMethod::Matrix).unwrap();
    let back = fit(mediated.graph(), &implied).unwrap().model;
    for (e, c) in mediated.coefficients() {
        assert!(close(back.coefficient(&e).unwrap(), c, 1e-10));
    }
}

#[test]
fn residual_covariance_survives_simulation() {
    let m = weighted(&[
        (d("A", "B"), 0.4),
        (d("A", "C"), 0.3),
        (Edge::parse_bidirected("B", "C"), 0.3),
    ]);
    let data = simulate(&m, 200_000, 5).unwrap();
    let f = fit_from_data(m.graph(), &data).unwrap();
    let omega = f.model.coefficient(&Edge::parse_bidirected("B", "C")).unwrap();
    assert!(close(omega, 0.3, 0.01), "{omega}");
}

#[test]
fn data_must_cover_the_graph() {
    let data = read_dataset_csv("X,Y\n1,2\n2,1\n3,3\n4,0\n").unwrap();
    let g = CausalGraph::from_names(&[], vec![d("X", "Q")]).unwrap();
    assert!(matches!(fit_from_data(&g, &data), Err(Error::UnknownNode(n)) if n == "Q"));
}

// simulation

#[test]
fn collider_selection_matches_truncated_gaussian() {
    let m = load_model("collider.dag");
    let data = simulate(&m, 400_000, 2024).unwrap();
    let kept = select(&data, &"Y>1".parse().unwrap()).unwrap();
    let observed = sample_corr(kept.column("X").unwrap(), kept.column("Z").unwrap());

    // Selecting Y > t shrinks Var(Y) to v; with Y standardized the other
    // moments follow: Cov(X,Z) -> -r_XY r_ZY (1 - v), Var(X) -> 1 - r_XY^2 (1 - v).
    let n = Normal::standard();
    let t = 1.0;
    let lambda = n.pdf(t) / (1.0 - n.cdf(t));
    let v = 1.0 + t * lambda - lambda * lambda;
    let (rxy, rzy) = (0.5, 0.5);
    let cov = -rxy * rzy * (1.0 - v);
    let expected = cov / ((1.0 - rxy * rxy * (1.0 - v)) * (1.0 - rzy * rzy * (1.0 - v))).sqrt();
    assert!(close(observed, expected, 0.01), "{observed} vs {expected}");
    assert!(observed < -0.05);
}

// enumeration

#[test]
fn orientation_counts() {
    let count = |s: &str| enumerate_orientations(&s.parse::<Skeleton>().unwrap(), 100_000).unwrap().len();
    assert_eq!(count("complete:A,B,C"), 6);
    assert_eq!(count("A-B"), 2);
    // every orientation of a complete graph is induced by exactly one node order
    let four = enumerate_orientations(&"complete:A,B,C,D".parse().unwrap(), 100).unwrap();
    let mut labels: Vec<String> = four.iter().map(orientation_label).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 24);
    assert_eq!(count("complete:A,B,C,D,E"), 120);
}

#[test]
fn triangle_effect_tables() {
    let table = parse_correlation_csv(&fixture("triangle.cor.csv")).unwrap();
    let queries = [EffectQuery::new("A", "C", &[]).unwrap(), EffectQuery::new("A", "C", &["B"]).unwrap()];
    let res = enumerate_and_fit(&"complete:A,B,C".parse().unwrap(), &table, &queries, 100).unwrap();
    let totals: Vec<f64> = res.models.iter().map(|m| m.effects[0].total).collect();
    for (got, want) in totals.iter().zip([0.2, -0.27, 0.2, 0.0, 0.0, 0.0]) {
        assert!(close(*got, want, 0.005), "{totals:?}");
    }
    assert!(close(res.models[0].effects[1].total, -0.27, 0.005));
    assert!(close(res.models[2].effects[1].total, 0.20, 0.005));
    for m in &res.models {
        assert!(m.fit.max_abs_residual < 1e-9);
    }
}

// formats

#[test]
fn dataset_csv_round_trip() {
    let mediated = load_model("mediated.dag");
    let data = simulate(&mediated, 10, 1).unwrap();
    let back = read_dataset_csv(&write_dataset_csv(&data)).unwrap();
    assert_eq!(back.columns(), data.columns());
    assert_eq!(back.names(), data.names());
}

#[test]
fn effect_report_document() {
    let text = fixture("mediated.dag");
    let doc = parse_dag(&text).unwrap();
    let m = attach_weights(&doc.graph, doc.coefficients.as_ref().unwrap()).unwrap();
    let effect = total_effect(&m, "X", "Y", NONE).unwrap();
    let report = Report::new("effect", &serde_json::json!({"exposure": "X", "outcome": "Y"}), &effect).input("graph", &text);
    let json = report.to_json();
    assert_eq!(json, report.to_json());
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(close(v["result"]["total"].as_f64().unwrap(), 0.48, 1e-12));
    let paths: Vec<&str> = v["result"]["per_path"].as_array().unwrap().iter().map(|p| p["path"]["text"].as_str().unwrap()).collect();
    assert_eq!(paths, ["X -> Z -> Y", "X -> Y"]);

    let apart = attach_weights(&CausalGraph::from_names(&["U", "V"], vec![]).unwrap(), &Coefficients::new()).unwrap();
    let dec = correlation_decomposition(&apart, "U", "V").unwrap();
    let v: serde_json::Value = serde_json::from_str(&Report::new("decompose", &serde_json::json!({}), &dec).to_json()).unwrap();
    assert_eq!(v["result"]["per_path"], serde_json::json!([]));
    assert_eq!(v["result"]["correlation"], serde_json::json!(0.0));
}
