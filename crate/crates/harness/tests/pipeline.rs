use std::path::{Path, PathBuf};
use std::process::Command;

use rampmerge::cli::{cmd_compare, cmd_eval, cmd_train, CompareArgs, ConfigArgs, EvalArgs, TrainArgs, EPISODES_FILE};
use rampmerge::compare::{COLUMNS, COMPARE_CSV, DELTAS_CSV, SUMMARY_FILE};
use rampmerge::metrics::{read_episodes_csv, RunSummary};
use rampmerge::rollout::{trace_episode, Actor, TRACE_COLUMNS};
use rampmerge::training::{CONFIG_FILE, POLICY_FILE, SELECTION_FILE, TRAIN_LOG_FILE};
use rampmerge::RunConfig;
use rampmerge_core::{Approach, EnvConfig};
use rampmerge_sac::load_policy;
use tempfile::TempDir;

fn small_sac() -> Vec<String> {
    ["sac.warmup_steps=300", "sac.batch_size=32", "sac.hidden=[16,16]", "sac.buffer_capacity=5000"]
        .map(String::from)
        .to_vec()
}

fn train_args(approach: Approach, steps: u64, seed: u64, out: PathBuf) -> TrainArgs {
    TrainArgs {
        approach,
        steps: Some(steps),
        seed: Some(seed),
        repeats: None,
        out,
        config: ConfigArgs { config: None, overrides: small_sac() },
    }
}

fn eval_args(policy: Option<PathBuf>, approach: Option<Approach>, episodes: usize, out: PathBuf) -> EvalArgs {
    EvalArgs {
        random: policy.is_none(),
        policy,
        approach,
        episodes: Some(episodes),
        seed: Some(77),
        stochastic: false,
        threads: Some(2),
        out,
        config: ConfigArgs::default(),
    }
}

#[test]
fn smoke_training_writes_three_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let mut args = train_args(Approach::Coop, 1000, 3, out.clone());
    args.config.overrides = vec![];
    cmd_train(&args).unwrap();
    for f in [POLICY_FILE, TRAIN_LOG_FILE, CONFIG_FILE] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let header = std::fs::read_to_string(out.join(TRAIN_LOG_FILE)).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "env_step,episode,undiscounted_return,critic_loss,actor_loss,alpha,entropy"
    );
    let snap: RunConfig = serde_json::from_str(&std::fs::read_to_string(out.join(CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(snap.train.steps, 1000);
    assert_eq!(snap.approach(), Approach::Coop);
}

#[test]
fn identical_seed_and_config_give_identical_logs() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    cmd_train(&train_args(Approach::SeqPower, 2500, 11, a.clone())).unwrap();
    cmd_train(&train_args(Approach::SeqPower, 2500, 11, b.clone())).unwrap();
    cmd_train(&train_args(Approach::SeqPower, 2500, 12, c.clone())).unwrap();
    let read = |p: &Path| std::fs::read(p.join(TRAIN_LOG_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(std::fs::read(a.join(POLICY_FILE)).unwrap(), std::fs::read(b.join(POLICY_FILE)).unwrap());
}

#[test]
fn accel_approach_checkpoint_has_eleven_inputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("seq2");
    cmd_train(&train_args(Approach::SeqAccel, 800, 1, out.clone())).unwrap();
    let (policy, header) = load_policy(&out.join(POLICY_FILE)).unwrap();
    assert_eq!((header.obs_dim, policy.obs_dim()), (11, 11));
    assert_eq!(header.action_dim, 1);
    assert_eq!(header.meta.approach, "seq2");
}

/// Independent one-pass aggregation over the per-episode CSV.
fn hand_aggregate(csv_path: &Path) -> [f64; 11] {
    let text = std::fs::read_to_string(csv_path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let names = [
        "saturated", "collided", "stopped", "succeeded", "truncated", "fuel_cost", "electricity_cost",
        "combined_cost", "mean_abs_jerk", "merged_behind", "undiscounted_return",
    ];
    let idx: Vec<usize> = names.iter().map(|n| col(n)).collect();
    let mut sums = [0.0; 11];
    let mut n = 0.0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        for (k, &i) in idx.iter().enumerate() {
            sums[k] += match cells[i] {
                "true" => 1.0,
                "false" => 0.0,
                x => x.parse::<f64>().unwrap(),
            };
        }
        n += 1.0;
    }
    sums.map(|s| s / n)
}

#[test]
fn summary_matches_hand_aggregation_of_episode_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("eval");
    let s = cmd_eval(&eval_args(None, Some(Approach::SeqAccel), 300, out.clone())).unwrap();
    let h = hand_aggregate(&out.join(EPISODES_FILE));
    let got = [
        s.saturation_rate,
        s.collision_rate,
        s.stop_rate,
        s.success_rate,
        s.truncation_rate,
        s.avg_fuel_cost,
        s.avg_electricity_cost,
        s.avg_combined_cost,
        s.avg_jerk,
        s.merge_behind_rate,
        s.avg_return,
    ];
    for (g, e) in got.iter().zip(&h) {
        assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "{got:?} vs {h:?}");
    }
    assert_eq!(s.n_episodes, 300);
    assert_eq!(RunSummary::read(&out.join(SUMMARY_FILE)).unwrap(), s);

    for e in read_episodes_csv(&out.join(EPISODES_FILE)).unwrap() {
        let outcomes = [e.collided, e.stopped, e.succeeded, e.truncated];
        assert_eq!(outcomes.iter().filter(|&&x| x).count(), 1, "{e:?}");
        assert!((e.combined_cost - (e.fuel_cost + e.electricity_cost)).abs() <= 1e-12);
    }
}

#[test]
fn saturation_by_approach() {
    let dir = TempDir::new().unwrap();
    let rate = |a: Approach| {
        cmd_eval(&eval_args(None, Some(a), 400, dir.path().join(a.name()))).unwrap().saturation_rate
    };
    assert_eq!(rate(Approach::Coop), 0.0);
    assert_eq!(rate(Approach::SeqPower), 0.0);
    assert!(rate(Approach::SeqAccel) > 0.0);

    // trained policies of the limit-box approaches cannot saturate either
    let run = dir.path().join("coop_run");
    cmd_train(&train_args(Approach::Coop, 1500, 2, run.clone())).unwrap();
    let s = cmd_eval(&eval_args(Some(run.join(POLICY_FILE)), None, 100, dir.path().join("coop_eval"))).unwrap();
    assert_eq!(s.saturation_rate, 0.0);
    assert_eq!(s.approach, "coop");
    assert!(s.deterministic);
}

#[test]
fn mismatched_checkpoint_is_refused() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("seq1");
    cmd_train(&train_args(Approach::SeqPower, 600, 0, run.clone())).unwrap();
    let policy = run.join(POLICY_FILE);
    let err = cmd_eval(&eval_args(Some(policy.clone()), Some(Approach::Coop), 5, dir.path().join("x"))).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");

    // same approach, different power limits: the action scaling would differ
    let mut args = eval_args(Some(policy), None, 5, dir.path().join("y"));
    args.config.overrides = vec!["env.phev.p_eng_max=60000".into()];
    let err = cmd_eval(&args).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn compare_tabulates_and_annotates_against_seq1() {
    let dir = TempDir::new().unwrap();
    let mut runs = Vec::new();
    for a in Approach::ALL {
        let out = dir.path().join(a.name());
        cmd_eval(&eval_args(None, Some(a), 60, out.clone())).unwrap();
        runs.push(out);
    }
    let out = dir.path().join("cmp");
    let cmp = cmd_compare(&CompareArgs { runs: runs.clone(), out: out.clone() }).unwrap();
    assert!(!cmp.mixed_configs);
    assert_eq!(cmp.runs[cmp.baseline].approach, "seq1");
    assert_eq!(cmp.cost_delta_pct[cmp.baseline], Some(0.0));

    let mut r = csv::Reader::from_path(out.join(COMPARE_CSV)).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), COLUMNS.to_vec());
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|row| row.len() == 9));

    let seq1 = RunSummary::read(&runs[1].join(SUMMARY_FILE)).unwrap();
    let coop = RunSummary::read(&runs[0].join(SUMMARY_FILE)).unwrap();
    let expected = 100.0 * (coop.avg_combined_cost - seq1.avg_combined_cost) / seq1.avg_combined_cost.abs();
    assert!((cmp.cost_delta_pct[0].unwrap() - expected).abs() < 1e-9);
    assert!(out.join(DELTAS_CSV).is_file());
}

#[test]
fn identical_runs_give_zero_deltas_and_mixed_configs_are_flagged() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_eval(&eval_args(None, Some(Approach::SeqPower), 40, a.clone())).unwrap();
    cmd_eval(&eval_args(None, Some(Approach::SeqPower), 40, b.clone())).unwrap();
    let cmp = cmd_compare(&CompareArgs { runs: vec![a.clone(), b], out: dir.path().join("cmp") }).unwrap();
    assert!(cmp.cost_delta_pct.iter().chain(&cmp.jerk_delta_pct).all(|d| *d == Some(0.0)));

    let c = dir.path().join("c");
    let mut args = eval_args(None, Some(Approach::Coop), 40, c.clone());
    args.config.overrides = vec!["env.road.spawn_prob_per_s=0.3".into()];
    cmd_eval(&args).unwrap();
    let cmp = cmd_compare(&CompareArgs { runs: vec![a, c], out: dir.path().join("cmp2") }).unwrap();
    assert!(cmp.mixed_configs);
    assert!(cmp.markdown().contains("Warning"));
}

#[test]
fn compare_needs_two_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    cmd_eval(&eval_args(None, Some(Approach::SeqPower), 5, a.clone())).unwrap();
    let err = cmd_compare(&CompareArgs { runs: vec![a], out: dir.path().join("cmp") }).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

fn read_trace(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn trace_columns_and_jerk_definition() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("trace.csv");
    let vehicles = dir.path().join("vehicles.csv");
    let cfg = EnvConfig::default().with_approach(Approach::SeqAccel);
    let m = trace_episode(&cfg, &Actor::Random, 4, &path, Some(&vehicles)).unwrap();
    let (header, rows) = read_trace(&path);
    assert_eq!(header, TRACE_COLUMNS.map(String::from).to_vec());
    for needed in ["d", "v", "a", "j", "d_p2", "d_p1", "d_f1", "d_f2", "p_d", "p_eng", "p_mg", "p_fbk", "p_b", "soc", "cost"]
    {
        assert!(header.iter().any(|h| h == needed), "{needed}");
    }
    assert_eq!(rows.len() as u64, m.episode_steps);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (ia, ij) = (col("a"), col("j"));
    let mut prev = 0.0;
    for row in &rows {
        let a: f64 = row[ia].parse().unwrap();
        let j: f64 = row[ij].parse().unwrap();
        assert!((j - (a - prev) / cfg.road.dt).abs() <= 1e-9 * j.abs().max(1.0));
        prev = a;
    }
    let veh = std::fs::read_to_string(&vehicles).unwrap();
    assert_eq!(veh.lines().next().unwrap(), "step,vehicle_id,lane,d,v,a");
    assert!(veh.lines().count() > rows.len());
}

#[test]
fn gentle_coop_episode_never_uses_friction_brake() {
    let dir = TempDir::new().unwrap();
    let cfg = EnvConfig::default();
    // engine off, mild positive combined power: u maps linearly onto the action box
    let bounds = rampmerge_core::action_space(Approach::Coop, &cfg.phev, &cfg.road);
    let p_cb: f64 = 2_000.0;
    let u_cb = 2.0 * (p_cb - bounds.low[1]) / (bounds.high[1] - bounds.low[1]) - 1.0;
    for seed in 0..5 {
        let path = dir.path().join(format!("trace{seed}.csv"));
        trace_episode(&cfg, &Actor::Constant(vec![-1.0, u_cb]), seed, &path, None).unwrap();
        let (header, rows) = read_trace(&path);
        let fbk = header.iter().position(|h| h == "p_fbk").unwrap();
        assert!(rows.iter().all(|r| r[fbk].parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn repeats_write_selection_and_keep_the_best() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rep");
    let mut args = train_args(Approach::SeqPower, 700, 5, out.clone());
    args.repeats = Some(2);
    args.config.overrides.push("train.selection_episodes=20".into());
    let report = cmd_train(&args).unwrap();
    let sel = report.selection.unwrap();
    assert_eq!(sel.scores.len(), 2);
    assert!(out.join(SELECTION_FILE).is_file());
    let chosen = out.join(format!("repeat_{}", sel.chosen));
    assert_eq!(std::fs::read(out.join(POLICY_FILE)).unwrap(), std::fs::read(chosen.join(POLICY_FILE)).unwrap());
    assert_eq!(report.seed, 5 + u64::from(sel.chosen));
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rampmerge"));
    c.env("RAMPMERGE_LOG", "off");
    c
}

#[test]
fn exit_codes_by_category() {
    let dir = TempDir::new().unwrap();
    let status = |c: &mut Command| c.status().unwrap().code();
    assert_eq!(status(bin().args(["train", "--approach", "bogus", "--out"]).arg(dir.path())), Some(2));
    assert_eq!(status(bin().arg("frobnicate")), Some(2));
    assert_eq!(
        status(bin().args(["train", "--approach", "coop", "--set", "env.phev.q_max=-1", "--out"]).arg(dir.path())),
        Some(2)
    );
    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(status(bin().args(["eval", "--policy"]).arg(&junk).arg("--out").arg(dir.path().join("o"))), Some(3));
    assert_eq!(
        status(bin().args(["eval", "--random", "--approach", "seq2", "--episodes", "3", "--out"]).arg(dir.path().join("ok"))),
        Some(0)
    );
    assert_eq!(status(bin().arg("--help")), Some(0));
}
