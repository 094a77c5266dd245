use horowalk::config::parse_config_str;
use horowalk::lattice::Observable;
use horowalk::results::{emit_results, parse_results, Payload, Provenance, RecordKind, ResultRecord};
use horowalk::walk::{run_ensemble, run_trial, WalkConfig};

#[test]
fn default_walk_does_not_diverge() {
    let mut cfg = parse_config_str("[walk]\nsteps = 60\ntrials = 400\nseed = 21\n")
        .unwrap()
        .walk_config()
        .unwrap();
    cfg.observables = vec![Observable::ShortestLog];
    cfg.record_all();
    let res = run_ensemble(&cfg).unwrap();
    for (r, n) in cfg.record.iter().enumerate() {
        let short = res
            .traces
            .iter()
            .filter(|t| t.values[r][0].is_none_or(|v| v < 0.05f64.ln()))
            .count();
        assert!(short * 10 <= res.traces.len(), "step {n}: {short} short lattices");
    }
    assert!(res.traces.iter().all(|t| !t.drift_flag));
}

#[test]
fn walk_from_a_skewed_start_equidistributes_the_constant() {
    let cfg = parse_config_str(
        "[walk]\nsteps = 10\ntrials = 50\nstart = [[4.0, 0.0], [0.0, 0.25]]\n\
         [[observables]]\nkind = \"constant\"\nvalue = 2.5\n",
    )
    .unwrap()
    .walk_config()
    .unwrap();
    assert_eq!(cfg.start.basis()[(0, 0)], 4.0);
    let res = run_ensemble(&cfg).unwrap();
    for e in &res.estimates {
        assert_eq!((e.mean, e.stderr, e.trials), (2.5, 0.0, 50));
    }
}

#[test]
fn config_to_result_file() {
    let text = "[walk]\nsteps = 6\ntrials = 30\nrecord = [2, 6]\n[[observables]]\nkind = \"siegel_count\"\nradius = 1.0\n\
                [[observables]]\nkind = \"shortest_bump\"\ncenter = 0.8\nwidth = 0.5\n";
    let exp = parse_config_str(text).unwrap();
    let cfg: WalkConfig = exp.walk_config().unwrap();
    let res = run_ensemble(&cfg).unwrap();
    let prov = Provenance::new(exp.hash(), exp.walk.seed);
    let records: Vec<ResultRecord> = res
        .estimates
        .iter()
        .cloned()
        .map(|e| ResultRecord::new(&prov, Payload::Estimate(e)))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("estimates.csv");
    emit_results(RecordKind::Estimate, &records, exp.output.format, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(names, ["shortest_bump_c0.8_w0.5", "siegel_count_r1", "shortest_bump_c0.8_w0.5", "siegel_count_r1"]);
    let back = parse_results(RecordKind::Estimate, exp.output.format, &path).unwrap();
    assert_eq!(back, records);
    assert_eq!(back[0].provenance.config_hash, exp.hash());
}

#[test]
fn trial_zero_matches_its_ensemble_entry() {
    let cfg = parse_config_str("[walk]\nsteps = 8\ntrials = 5\nseed = 77\n").unwrap().walk_config().unwrap();
    let res = run_ensemble(&cfg).unwrap();
    for t in 0..5 {
        assert_eq!(run_trial(&cfg, t), res.traces[t as usize]);
    }
    assert_ne!(res.traces[0].values, res.traces[1].values);
}
