use acbc::bounds::delta_schedule;
use acbc::geometry::{box_intersect, reach_box};
use acbc::instance::InstanceSpec;
use acbc::mesh::{build_meshes, verify_meshes};
use acbc::oracle::coverage_probe;
use acbc::solver::backward_induction;

fn load(name: &str) -> InstanceSpec {
    let path = format!("{}/../../instances/{name}", env!("CARGO_MANIFEST_DIR"));
    InstanceSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn brute_force_probes_agree_with_the_verifier() {
    for (name, eps) in [
        ("three_node.json", 1.0),
        ("tiny_square.json", 0.2),
        ("nested.json", 0.4),
    ] {
        let spec = load(name);
        let schedule = delta_schedule(eps, 1.0, 1.0, spec.horizon()).unwrap();
        let meshes = build_meshes(&spec, &schedule).unwrap();
        assert!(verify_meshes(&spec, &schedule, &meshes).is_pass(), "{name}");

        let probe = coverage_probe(&meshes, 0, spec.domain(), schedule.delta[0], 300, 1).unwrap();
        assert!(probe.slack >= 0.0, "{name}: domain {probe:?}");
        for t in 1..=spec.horizon() {
            // a spread of predecessors, including the mesh corners
            let prev = meshes.step(t - 1).unwrap();
            for v in (0..prev.len()).step_by((prev.len() / 40).max(1)) {
                let x = prev.vertex(v);
                for &i in spec.active_nodes(t - 1) {
                    if !spec.body(t - 1, i).unwrap().contains(x) {
                        continue;
                    }
                    let reach = reach_box(x, spec.rho(), spec.domain()).unwrap();
                    for &j in spec.graph().neighbors(i).unwrap() {
                        let region = box_intersect(&reach, spec.body(t, j).unwrap()).unwrap().unwrap();
                        let p = coverage_probe(&meshes, t, &region, schedule.delta[t], 50, v as u64).unwrap();
                        assert!(p.slack >= 0.0, "{name} t={t} vertex {v} node {j}: {p:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn removing_a_vertex_never_lowers_values() {
    let spec = load("three_node.json");
    let schedule = delta_schedule(1.0, 1.0, 1.0, spec.horizon()).unwrap();
    let full = build_meshes(&spec, &schedule).unwrap();
    let tables = backward_induction(&spec, &full).unwrap();
    // drop the equilibrium's first move so the change actually matters
    let removed = tables.initial(tables.root().best).unwrap().best;
    let coarse = full.without_vertex(0, removed).unwrap();
    let coarse_tables = backward_induction(&spec, &coarse).unwrap();
    assert!(coarse_tables.game_value() >= tables.game_value());
    for i in 0..spec.node_count() {
        if let (Some(a), Some(b)) = (tables.initial(i), coarse_tables.initial(i)) {
            assert!(b.value >= a.value);
        }
    }
    // later stages are keyed by X̂_0 vertices, whose ids shift past the removed one
    for t in 1..=spec.horizon() {
        for (v, j, e) in tables.stage(t).unwrap().player_entries() {
            let w = match (t, v) {
                (1, v) if v == removed => continue,
                (1, v) if v > removed => v - 1,
                _ => v,
            };
            let coarse_entry = coarse_tables.player(t, w, j).unwrap();
            assert!(coarse_entry.value >= e.value, "t={t} v={v} j={j}");
        }
    }
}
