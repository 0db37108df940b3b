//! Human-readable rendering of report documents for `--table`.

use serde_json::Value;

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{:.4}", x + 0.0),
        None => "-".into(),
    }
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn list(v: &Value) -> Vec<Value> {
    v.as_array().cloned().unwrap_or_default()
}

fn names(v: &Value) -> String {
    let items: Vec<String> = list(v).iter().map(text).collect();
    if items.is_empty() {
        "{}".into()
    } else {
        format!("{{{}}}", items.join(", "))
    }
}

fn edge(v: &Value) -> String {
    let arrow = if v["kind"] == "bidirected" { "<->" } else { "->" };
    format!("{} {arrow} {}", text(&v["source"]), text(&v["target"]))
}

/// Left-aligned columns separated by two spaces; numeric-looking cells are
/// right-aligned.
fn grid(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| if numeric(c) { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out += &line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

fn matrix(m: &Value) -> String {
    let names: Vec<String> = list(&m["names"]).iter().map(text).collect();
    let mut headers = vec![""];
    headers.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = list(&m["values"])
        .iter()
        .zip(&names)
        .map(|(row, name)| std::iter::once(name.clone()).chain(list(row).iter().map(num)).collect())
        .collect();
    grid(&headers, &rows)
}

fn effect(r: &Value) -> String {
    let mut out = format!("{} on {}", text(&r["exposure"]), text(&r["outcome"]));
    if !list(&r["fixed"]).is_empty() {
        out += &format!(", holding {} fixed", names(&r["fixed"]));
    }
    out += "\n";
    let mut summary = vec![
        vec!["total".to_string(), num(&r["total"])],
        vec!["direct".to_string(), num(&r["direct"])],
        vec!["indirect".to_string(), num(&r["indirect"])],
    ];
    if !r["non_causal"].is_null() {
        summary.push(vec!["non-causal".into(), num(&r["non_causal"])]);
        summary.push(vec!["correlation".into(), num(&r["correlation"])]);
    }
    out += &grid(&["quantity", "value"], &summary);
    out += "\n";
    let rows: Vec<Vec<String>> = list(&r["per_path"])
        .iter()
        .map(|p| vec![text(&p["path"]["text"]), text(&p["kind"]), num(&p["product"])])
        .collect();
    out + &grid(&["path", "kind", "product"], &rows)
}

fn fit(r: &Value) -> String {
    let m = &r["model"];
    let rows: Vec<Vec<String>> = list(&m["edges"]).iter().map(|e| vec![edge(e), num(&e["coef"])]).collect();
    let mut out = grid(&["edge", "coef"], &rows);
    out += "\n";
    let rows: Vec<Vec<String>> = list(&m["error_var"])
        .iter()
        .map(|e| vec![text(&e["node"]), num(&e["value"])])
        .collect();
    out += &grid(&["node", "error var"], &rows);
    out + &format!("\nmax |residual|  {}\n", num(&r["max_abs_residual"]))
}

/// Renders `doc` according to its `kind`; unknown kinds fall back to JSON.
pub fn render(doc: &Value) -> String {
    let r = &doc["result"];
    match doc["kind"].as_str().unwrap_or("") {
        "paths" => {
            let rows: Vec<Vec<String>> = list(&r["paths"])
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let blockers: Vec<String> = list(&p["blockers"])
                        .iter()
                        .map(|b| format!("{} ({})", text(&b["node"]), text(&b["reason"]).replace('_', " ")))
                        .collect();
                    vec![
                        (i + 1).to_string(),
                        text(&p["path"]["text"]),
                        if p["open"] == true { "open" } else { "blocked" }.to_string(),
                        blockers.join(", "),
                    ]
                })
                .collect();
            grid(&["#", "path", "status", "blocked by"], &rows)
        }
        "adjust" => {
            let mut out = format!("{} on {}\n\nbackdoor paths\n", text(&r["exposure"]), text(&r["outcome"]));
            for p in list(&r["backdoor_paths"]) {
                out += &format!("  {}\n", text(&p["text"]));
            }
            out += "\nminimal sets\n";
            for s in list(&r["minimal_sets"]) {
                out += &format!("  {}\n", names(&s));
            }
            out += "\nvalid sets\n";
            for s in list(&r["valid_sets"]) {
                out += &format!("  {}\n", names(&s));
            }
            let rows: Vec<Vec<String>> = list(&r["variable_roles"])
                .iter()
                .map(|v| {
                    let roles: Vec<String> = list(&v["roles"]).iter().map(text).collect();
                    vec![text(&v["node"]), roles.join(", ")]
                })
                .collect();
            out + "\n" + &grid(&["node", "roles"], &rows)
        }
        "effect" | "decompose" => effect(r),
        "regress" => {
            let rows: Vec<Vec<String>> = list(&r["coefficients"])
                .iter()
                .map(|c| vec![text(&c["predictor"]), num(&c["beta"])])
                .collect();
            format!("{} ({})\n", text(&r["outcome"]), text(&r["source"]))
                + &grid(&["predictor", "beta"], &rows)
                + &format!("\nR^2  {}\n", num(&r["r_squared"]))
        }
        "implied" => {
            let mut out = matrix(&r["correlations"]);
            if !r["max_abs_residual"].is_null() {
                out += &format!("\nmax |observed - implied|  {}\n", num(&r["max_abs_residual"]));
            }
            out
        }
        "fit" => fit(r),
        "intervene" => {
            let rows: Vec<Vec<String>> = list(&r["changes"])
                .iter()
                .map(|c| vec![text(&c["node"]), num(&c["change"])])
                .collect();
            let removed: Vec<String> = list(&r["removed_edges"]).iter().map(edge).collect();
            format!("set {} by {} SD\n", text(&r["target"]), num(&r["delta"]))
                + &format!("cut: {}\n", if removed.is_empty() { "-".into() } else { removed.join(", ") })
                + &grid(&["node", "change"], &rows)
        }
        "simulate" => {
            let mut out = format!("n = {}, seed = {}\n", text(&r["n"]), text(&r["seed"]));
            for line in list(&r["provenance"]) {
                out += &format!("# {}\n", text(&line));
            }
            if !r["correlations"].is_null() {
                out += "\n";
                out += &matrix(&r["correlations"]);
            }
            if !r["fit"].is_null() {
                out += "\n";
                out += &fit(&r["fit"]);
            }
            out
        }
        "enumerate" => {
            let models = list(&r["models"]);
            let effect_names: Vec<String> = models
                .first()
                .map(|m| {
                    list(&m["effects"])
                        .iter()
                        .map(|e| {
                            let mut s = format!("{}->{}", text(&e["exposure"]), text(&e["outcome"]));
                            if !list(&e["fixed"]).is_empty() {
                                s += &format!(" | {}", names(&e["fixed"]));
                            }
                            s
                        })
                        .collect()
                })
                .unwrap_or_default();
            let mut headers = vec!["model", "order"];
            headers.extend(effect_names.iter().map(String::as_str));
            headers.push("max |residual|");
            let rows: Vec<Vec<String>> = models
                .iter()
                .map(|m| {
                    let mut row = vec![text(&m["id"]), text(&m["label"])];
                    row.extend(list(&m["effects"]).iter().map(|e| num(&e["total"])));
                    row.push(num(&m["fit"]["max_abs_residual"]));
                    row
                })
                .collect();
            grid(&headers, &rows)
        }
        _ => serde_json::to_string_pretty(doc).unwrap_or_default() + "\n",
    }
}
