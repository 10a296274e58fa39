use std::path::Path;

use flowgen_vqe::config::{AnsatzChoice, CostInput, GeometryInput, Mode, RunConfig, TfimGrid, WarmInit};
use flowgen_vqe::cost::cost_report;
use flowgen_vqe::experiments::{
    generate_pes, tfim_instances, train_flow, warm_start_post_train, Instance, WarmStart,
};
use flowgen_vqe::geometry::{geometry, to_xyz, Molecule};
use flowgen_vqe::metrics::{read_jsonl, summarize, MetricsRecord};
use flowgen_vqe::{run, HarnessError, Summary};
use flowvqe_core::ansatz::AnsatzSpec;
use flowvqe_core::baselines::{Method, OptimizerConfig};
use flowvqe_core::flow::FlowModel;
use flowvqe_core::hamiltonian::{Hamiltonian, PauliTerm};
use flowvqe_core::training::TrainConfig;

fn small_flow_cfg(mode: Mode, dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(mode);
    cfg.tfim = Some(TfimGrid {
        n: 3,
        j: 1.0,
        g: vec![0.6, 1.2],
    });
    cfg.ansatz = Some(AnsatzChoice::Hea { layers: 1 });
    cfg.flow.layers = Some(2);
    cfg.flow.mixture_size = 8;
    cfg.flow.embed_dim = 4;
    cfg.flow.hidden_width = 16;
    cfg.flow.hidden_layers = 1;
    cfg.train = TrainConfig {
        epochs: 40,
        learning_rate: 1e-3,
        ..Default::default()
    };
    cfg.output_dir = dir.to_path_buf();
    cfg.seed = 3;
    cfg
}

fn check_stream(records: &[MetricsRecord]) {
    let mut runs: Vec<&str> = records.iter().map(|r| r.run_id.as_str()).collect();
    runs.dedup();
    for run_id in runs {
        let stream: Vec<&MetricsRecord> = records.iter().filter(|r| r.run_id == run_id).collect();
        for w in stream.windows(2) {
            assert!(w[1].cumulative_evaluations > w[0].cumulative_evaluations, "{run_id}");
        }
        let mut labels: Vec<&str> = stream.iter().map(|r| r.instance_label.as_str()).collect();
        labels.sort();
        labels.dedup();
        for label in labels {
            let mut prev = f64::INFINITY;
            for r in stream.iter().filter(|r| r.instance_label == label) {
                assert!(r.best_energy <= prev);
                prev = r.best_energy;
            }
        }
    }
}

fn strip_wall(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_ms");
            v
        })
        .collect()
}

#[test]
fn vqe_mode_streams_are_consistent_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(Mode::Vqe);
    cfg.tfim = Some(TfimGrid {
        n: 3,
        j: 1.0,
        g: vec![0.5, 1.0],
    });
    cfg.ansatz = Some(AnsatzChoice::Hea { layers: 1 });
    cfg.optimizer = OptimizerConfig {
        max_iters: 150,
        ..Default::default()
    };
    cfg.threshold = 5e-2;
    cfg.output_dir = dir.path().join("a");
    let art = run(&cfg, true).unwrap();
    let jsonl = art.metrics_path.clone().unwrap();
    let records = read_jsonl(&jsonl).unwrap();
    check_stream(&records);

    let Summary::Vqe { instances, .. } = &art.summary else {
        panic!("wrong summary kind")
    };
    assert_eq!(instances.len(), 2);
    assert_eq!(instances, &summarize(&records, cfg.threshold));
    // independent recomputation from the raw lines
    for s in instances {
        let stream: Vec<&MetricsRecord> = records.iter().filter(|r| r.instance_label == s.instance_label).collect();
        let first = stream.iter().find(|r| r.error_vs_exact.unwrap() <= cfg.threshold);
        assert_eq!(s.n_ca, first.map(|r| r.cumulative_evaluations));
        let min = stream.iter().map(|r| r.error_vs_exact.unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(s.min_error, Some(min));
        // 1 + 2dN accounting with d = 6
        if let Some(n) = s.n_ca {
            assert_eq!((n - 1) % 12, 0);
        }
    }
    assert!(art.csv_path.as_ref().unwrap().is_file());
    let csv_text = std::fs::read_to_string(art.csv_path.unwrap()).unwrap();
    assert_eq!(csv_text.lines().count(), records.len() + 1);
    assert!(csv_text.starts_with("run_id,mode,instance_label,step,energy,best_energy"));

    cfg.output_dir = dir.path().join("b");
    let again = run(&cfg, false).unwrap();
    assert_eq!(strip_wall(&jsonl), strip_wall(&again.metrics_path.unwrap()));
}

#[test]
fn flow_modes_write_checkpoints_and_consistent_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_flow_cfg(Mode::FlowM, &dir.path().join("m"));
    let art = run(&cfg, false).unwrap();
    let records = read_jsonl(art.metrics_path.as_ref().unwrap()).unwrap();
    check_stream(&records);
    assert_eq!(records.len(), 2 * 40);
    assert_eq!(records.last().unwrap().cumulative_evaluations, 2 * 2 * 40);
    let Summary::FlowM {
        checkpoint,
        evaluations,
        instances,
        ..
    } = &art.summary
    else {
        panic!("wrong summary kind")
    };
    assert_eq!(*evaluations, 160);
    assert_eq!(instances, &summarize(&records, cfg.threshold));
    let model = FlowModel::load(checkpoint).unwrap();
    assert_eq!(model.config().layers, 2);
    assert_eq!(model.term_order().len(), 5);

    let again = run(&small_flow_cfg(Mode::FlowM, &dir.path().join("m2")), false).unwrap();
    assert_eq!(
        strip_wall(art.metrics_path.as_ref().unwrap()),
        strip_wall(again.metrics_path.as_ref().unwrap())
    );

    let mut single = small_flow_cfg(Mode::FlowS, &dir.path().join("s"));
    assert!(matches!(run(&single, false), Err(HarnessError::Config { field: "hamiltonians", .. })));
    single.tfim.as_mut().unwrap().g = vec![0.8];
    let art = run(&single, false).unwrap();
    assert!(matches!(art.summary, Summary::FlowS { epochs: 40, evaluations: 80, .. }));
}

#[test]
fn generation_counts_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let trained = run(&small_flow_cfg(Mode::FlowM, &dir.path().join("m")), false).unwrap();
    let Summary::FlowM { checkpoint, .. } = trained.summary else {
        panic!()
    };
    let mut cfg = RunConfig::new(Mode::Generate);
    cfg.tfim = Some(TfimGrid {
        n: 3,
        j: 1.0,
        g: vec![0.7, 0.9, 1.1],
    });
    cfg.ansatz = Some(AnsatzChoice::Hea { layers: 1 });
    cfg.checkpoint = Some(checkpoint.clone());
    cfg.output_dir = dir.path().join("g");
    let art = run(&cfg, false).unwrap();
    let Summary::Generate { points, evaluations, .. } = &art.summary else {
        panic!()
    };
    assert_eq!(*evaluations, 3 * 16);
    let exact: Vec<f64> = tfim_instances(cfg.tfim.as_ref().unwrap())
        .unwrap()
        .iter()
        .map(|i| i.hamiltonian.exact_reference().unwrap())
        .collect();
    for (p, x) in points.iter().zip(&exact) {
        assert_eq!(p.evaluations, 16);
        assert_eq!(p.energies.len(), 16);
        assert!(p.e_min <= p.e_mean);
        assert!(p.energies.iter().all(|e| *e >= x - 1e-9));
        assert_eq!(p.error_min, Some((p.e_min - x).abs()));
    }

    // a family with a term the checkpoint never saw
    let model = FlowModel::load(&checkpoint).unwrap();
    let spec = AnsatzSpec::hea(3, 1).unwrap();
    let stray = Instance {
        label: "stray".into(),
        hamiltonian: Hamiltonian::new(3, vec![PauliTerm::new("YYI", 1.0)], "other", "stray").unwrap(),
    };
    assert!(generate_pes(&model, &spec, &[stray], 4, 0, "x").is_err());
}

#[test]
fn warm_start_sources() {
    let grid = TfimGrid {
        n: 3,
        j: 1.0,
        g: vec![0.9],
    };
    let inst = tfim_instances(&grid).unwrap().remove(0);
    let spec = AnsatzSpec::hea(3, 2).unwrap();
    let opt = OptimizerConfig {
        method: Method::Adam,
        max_iters: 600,
        threshold: 1e-2,
        ..Default::default()
    };
    let zero = warm_start_post_train(&WarmStart::HfZero, &spec, &inst.hamiltonian, &opt, 0).unwrap();
    assert_eq!(zero.init_evaluations, 0);
    assert_eq!(zero.theta0, vec![0.0; 9]);
    let n_zero = zero.n_ca.unwrap_or_else(|| panic!("zero init min error {:?}", zero.min_error));

    // restarting from the converged point is already within the threshold
    let again = warm_start_post_train(&WarmStart::Transferred(&zero.run.theta), &spec, &inst.hamiltonian, &opt, 0).unwrap();
    assert_eq!(again.n_ca, Some(1));
    assert!(n_zero > 1);
    assert!(warm_start_post_train(&WarmStart::Transferred(&[0.0; 5]), &spec, &inst.hamiltonian, &opt, 0).is_err());

    let instances = vec![inst.clone()];
    let settings = small_flow_cfg(Mode::FlowS, Path::new("unused")).flow;
    let fr = train_flow(
        &spec,
        &instances,
        &settings,
        2,
        &TrainConfig {
            epochs: 30,
            ..Default::default()
        },
        "w",
        "flow-s",
    )
    .unwrap();
    let flow = warm_start_post_train(
        &WarmStart::Flow {
            model: &fr.model,
            samples: 5,
        },
        &spec,
        &inst.hamiltonian,
        &opt,
        0,
    )
    .unwrap();
    assert_eq!(flow.init_evaluations, 5);
    assert_eq!(flow.evaluations, 5 + flow.run.evaluations);
    assert_eq!(flow.n_ca, flow.run.n_ca.map(|n| n + 5));
}

#[test]
fn published_cost_break_even() {
    let nh3 = cost_report(12000, &[2527], &[5265]).unwrap();
    assert_eq!(nh3.break_even, Some(5));
    let c6h6 = cost_report(24000, &[2153], &[10787]).unwrap();
    assert_eq!(c6h6.break_even, Some(3));
    assert_eq!(nh3.total_warm_at(0), 12000.0);
    assert!(cost_report(1, &[], &[2]).is_err());
    assert!(cost_report(1, &[2], &[]).is_err());
    assert_eq!(cost_report(10, &[5, 7], &[4]).unwrap().break_even, None);
    let r = cost_report(100, &[10, 30], &[40, 60]).unwrap();
    assert_eq!((r.c_post_bar, r.c_vqe_bar, r.n_test), (20.0, 50.0, 2));
    // smallest n with 100 + 20n < 50n is 4
    assert_eq!(r.break_even, Some(4));
}

#[test]
fn geometry_formulas() {
    let h4 = geometry(Molecule::H4, 1.0);
    let xs: Vec<f64> = h4.iter().map(|a| a.x).collect();
    assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0]);
    assert!(h4.iter().all(|a| a.y == 0.0 && a.z == 0.0));

    let bz = geometry(Molecule::C6H6, 0.3);
    assert_eq!(bz.len(), 12);
    assert!((bz[6].x - 2.7810).abs() < 1e-12);
    assert_eq!(bz[6].element, "H");

    for d in [0.8, 1.0, 1.3] {
        let w = geometry(Molecule::H2O, d);
        assert_eq!(w[0].element, "O");
        assert_eq!((w[0].x, w[0].y, w[0].z), (0.0, 0.0, 0.0));
        assert_eq!(w[1].x, -w[2].x);
        assert_eq!((w[1].y, w[1].z), (w[2].y, w[2].z));
        // bond lengths and the H-O-H angle from the coordinates themselves
        let len = |a: &flowgen_vqe::geometry::Atom| (a.x * a.x + a.y * a.y + a.z * a.z).sqrt();
        assert!((len(&w[1]) - d).abs() < 1e-12 && (len(&w[2]) - d).abs() < 1e-12);
        let dot = w[1].x * w[2].x + w[1].y * w[2].y + w[1].z * w[2].z;
        assert!(((dot / (d * d)).acos().to_degrees() - 104.5).abs() < 1e-9);
        // half-angle identities: sin^2(a/2) = (1 - cos a)/2, cos^2(a/2) = (1 + cos a)/2
        let c = 104.5f64.to_radians().cos();
        assert!((w[1].x - d * ((1.0 - c) / 2.0).sqrt()).abs() < 1e-6);
        assert!((w[1].z - d * ((1.0 + c) / 2.0).sqrt()).abs() < 1e-6);
    }

    let nh3 = geometry(Molecule::NH3, 0.4);
    assert_eq!((nh3[0].element.as_str(), nh3[0].z), ("N", 0.4));
    for a in &nh3[1..] {
        assert!(((a.x * a.x + a.y * a.y).sqrt() - 1.0).abs() < 1e-12);
    }

    let xyz = to_xyz(&h4, "chain");
    let lines: Vec<&str> = xyz.lines().collect();
    assert_eq!(lines[0], "4");
    assert_eq!(lines[1], "chain");
    let last: Vec<f64> = lines[5].split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
    assert_eq!(last, vec![3.0, 0.0, 0.0]);
    assert_eq!(Molecule::parse("nh3"), Some(Molecule::NH3));
    assert_eq!(Molecule::parse("CH4"), None);
}

#[test]
fn report_modes_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(Mode::CostReport);
    cfg.output_dir = dir.path().join("c");
    cfg.cost = Some(CostInput {
        c_pre: 24000,
        post: vec![2153],
        vqe: vec![10787],
    });
    let art = run(&cfg, false).unwrap();
    assert!(art.metrics_path.is_none());
    let text = std::fs::read_to_string(&art.summary_path).unwrap();
    let back: Summary = serde_json::from_str(&text).unwrap();
    assert!(matches!(back, Summary::CostReport { report } if report.break_even == Some(3)));

    let mut cfg = RunConfig::new(Mode::Geometry);
    cfg.output_dir = dir.path().join("geo");
    cfg.geometry = Some(GeometryInput {
        molecule: Molecule::H2O,
        distances: vec![0.9, 1.1],
    });
    let art = run(&cfg, false).unwrap();
    let Summary::Geometry { files, .. } = art.summary else {
        panic!()
    };
    assert_eq!(files.len(), 2);
    assert!(std::fs::read_to_string(&files[0]).unwrap().starts_with("3\n"));
}

#[test]
fn validation_names_the_missing_field() {
    let field = |cfg: &RunConfig| match cfg.validate() {
        Err(HarnessError::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert_eq!(field(&RunConfig::new(Mode::Vqe)), "hamiltonians");
    let mut cfg = RunConfig::new(Mode::Vqe);
    cfg.tfim = Some(TfimGrid {
        n: 3,
        j: 1.0,
        g: vec![1.0],
    });
    assert_eq!(field(&cfg), "ansatz");
    assert_eq!(field(&RunConfig::new(Mode::CostReport)), "cost");
    assert_eq!(field(&RunConfig::new(Mode::Geometry)), "geometry");
    assert_eq!(field(&RunConfig::new(Mode::GenTfim)), "tfim");
    let mut cfg = RunConfig::new(Mode::WarmStart);
    cfg.tfim = Some(TfimGrid {
        n: 3,
        j: 1.0,
        g: vec![1.0],
    });
    cfg.ansatz = Some(AnsatzChoice::Hea { layers: 1 });
    assert_eq!(field(&cfg), "warm_init");
    cfg.warm_init = Some(WarmInit::Flow);
    assert_eq!(field(&cfg), "checkpoint");
    cfg.checkpoint = Some("/nonexistent/model.ckpt".into());
    assert_eq!(field(&cfg), "checkpoint");
    cfg.warm_init = Some(WarmInit::Transferred);
    assert_eq!(field(&cfg), "transfer_theta");
    let mut cfg = RunConfig::new(Mode::Exact);
    cfg.hamiltonians = vec!["/nonexistent/h.json".into()];
    assert_eq!(field(&cfg), "hamiltonians");
}
