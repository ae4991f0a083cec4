//! Acceptance gate: nine quantitative criteria covering the measurement
//! identities, the capacity solver, the merge machinery, planted-structure
//! recovery, selection optimality, the scaling law, interpretation
//! identities, and determinism. Each criterion prints exactly one PASS or
//! FAIL line (directly to the process stderr, bypassing test capture) and
//! fails its test on any violation.

use std::io::Write as _;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use geodiv_cli::bench::bench;
use geodiv_cli::pipeline::{run_pipeline, RunConfig, Stage};
use geodiv_cli::synth::{synth, write_synth, SynthSpec, Topology, VolumeLaw};
use geodiv_core::cluster::{
    merge, phase1, retained_mi, two_phase, weighted_diversity, ClusterNode,
};
use geodiv_core::info::{entropy, mutual_information, LogBase};
use geodiv_core::informative::{
    blahut_arimoto, channel_from_traffic, select_informative, SelectionRule,
};
use geodiv_core::interpret::{
    demo_conditional, incidence_avg, significance_demographics, significance_services,
    DemoWeighting, DemographicsAssignment,
};
use geodiv_core::model::{build_joint, ServiceSubset, TrafficMatrix};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

/// Runs one criterion and writes its single PASS/FAIL line to the real
/// stderr so the line survives libtest's output capture.
fn criterion(n: usize, name: &str, f: impl FnOnce() -> Check + std::panic::UnwindSafe) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(f);
    let secs = start.elapsed().as_secs_f64();
    let mut err = std::io::stderr();
    match outcome {
        Ok(Ok(())) => {
            let _ = writeln!(err, "criterion {n} ({name}): PASS [{secs:.2}s]");
        }
        Ok(Err(msg)) => {
            let _ = writeln!(err, "criterion {n} ({name}): FAIL: {msg} [{secs:.2}s]");
            panic!("criterion {n} ({name}) failed: {msg}");
        }
        Err(panic) => {
            let _ = writeln!(err, "criterion {n} ({name}): FAIL: panic [{secs:.2}s]");
            std::panic::resume_unwind(panic);
        }
    }
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// KL divergence in nats, skipping zero terms of `a`.
fn kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y).ln())
        .sum()
}

#[test]
fn criterion_1_information_measure_oracles() {
    criterion(1, "information measure oracles", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for trial in 0..1000 {
            let n_c = rng.gen_range(1..=5);
            let n_s = rng.gen_range(1..=5);
            let mut volumes: Vec<f64> = (0..n_c * n_s)
                .map(|_| {
                    if rng.gen::<f64>() < 0.25 {
                        0.0
                    } else {
                        rng.gen::<f64>() * 10.0
                    }
                })
                .collect();
            if volumes.iter().all(|&v| v == 0.0) {
                volumes[0] = 1.0;
            }
            let t = TrafficMatrix::new(ids("a", n_c), ids("s", n_s), volumes).unwrap();
            let m = build_joint(&t).unwrap();
            let mi = mutual_information(&m).unwrap().value();

            let p_s = m.service_marginal();
            let mut double_sum = 0.0;
            for i in 0..m.n_areas() {
                let w = m.area_weights()[i];
                for (j, &c) in m.conditional_row(i).iter().enumerate() {
                    if c > 0.0 {
                        double_sum += w * c * (c / p_s[j]).ln();
                    }
                }
            }
            ensure!(
                (mi - double_sum).abs() <= 1e-12,
                "trial {trial}: entropy form {mi} vs double sum {double_sum}"
            );

            let h_c = entropy(m.area_weights()).unwrap().value();
            let h_s = entropy(p_s).unwrap().value();
            ensure!(mi >= 0.0, "trial {trial}: negative mi {mi}");
            ensure!(
                mi <= h_c.min(h_s) + 1e-9,
                "trial {trial}: mi {mi} above bound {}",
                h_c.min(h_s)
            );
        }
        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 5.0, "took {secs:.2}s, budget 5s");
        Ok(())
    });
}

/// Builds a channel whose row j is `rows[j]` by laying the rows out as
/// traffic columns.
fn channel_from_target_rows(rows: &[Vec<f64>]) -> geodiv_core::informative::Channel {
    let n_areas = rows[0].len();
    let n_services = rows.len();
    let mut volumes = vec![0.0; n_areas * n_services];
    for (j, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            volumes[i * n_services + j] = v;
        }
    }
    let t = TrafficMatrix::new(ids("a", n_areas), ids("s", n_services), volumes).unwrap();
    channel_from_traffic(&t).unwrap()
}

#[test]
fn criterion_2_capacity_solver() {
    criterion(2, "capacity solver", || {
        let start = Instant::now();

        let identity = channel_from_target_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let cap = blahut_arimoto(&identity, 1e-10, 10_000).map_err(|e| e.to_string())?;
        ensure!(
            (cap.capacity.value() - std::f64::consts::LN_2).abs() <= 1e-9,
            "identity capacity {} != ln 2",
            cap.capacity.value()
        );

        let bsc = channel_from_target_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]);
        let cap = blahut_arimoto(&bsc, 1e-10, 10_000).map_err(|e| e.to_string())?;
        let closed_form = std::f64::consts::LN_2 + 0.1 * 0.1f64.ln() + 0.9 * 0.9f64.ln();
        ensure!(
            (cap.capacity.value() - closed_form).abs() <= 1e-6,
            "BSC(0.1) capacity {} vs closed form {closed_form}",
            cap.capacity.value()
        );
        ensure!(cap.converged, "BSC run did not converge");
        ensure!(
            cap.final_delta < 1e-10,
            "BSC bracket width {} at convergence",
            cap.final_delta
        );

        let skew = channel_from_target_rows(&[
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.25, 0.25, 0.5],
        ]);
        let cap = blahut_arimoto(&skew, 1e-12, 10_000).map_err(|e| e.to_string())?;
        for (i, w) in cap.history.windows(2).enumerate() {
            ensure!(
                w[1] >= w[0] - 1e-12,
                "capacity decreased at iteration {}: {} -> {}",
                i + 1,
                w[0],
                w[1]
            );
        }
        ensure!(cap.converged, "skewed channel did not converge");
        ensure!(
            cap.final_delta < 1e-10,
            "skewed bracket width {} at convergence",
            cap.final_delta
        );

        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 1.0, "took {secs:.2}s, budget 1s");
        Ok(())
    });
}

#[test]
fn criterion_3_weighted_diversity() {
    criterion(3, "weighted diversity identities", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for trial in 0..1000 {
            let n_s = rng.gen_range(2..=4);
            let mut dist = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let mut d: Vec<f64> = (0..n_s).map(|_| rng.gen::<f64>() + 0.05).collect();
                if rng.gen::<f64>() < 0.2 {
                    let z = rng.gen_range(0..n_s);
                    d[z] = 0.0;
                }
                let sum: f64 = d.iter().sum();
                d.iter_mut().for_each(|x| *x /= sum);
                d
            };
            let dist_a = dist(&mut rng);
            let dist_b = dist(&mut rng);
            let w_a = rng.gen_range(0.05..0.45);
            let w_b = rng.gen_range(0.05..0.45);
            let w_rest = 1.0 - w_a - w_b;

            let a = ClusterNode::new(vec![0], w_a, dist_a.clone()).unwrap();
            let b = ClusterNode::new(vec![1], w_b, dist_b.clone()).unwrap();
            let d = weighted_diversity(&a, &b).map_err(|e| e.to_string())?.value();
            ensure!(d >= 0.0, "trial {trial}: diversity {d} negative beyond clamp");

            let w_ab = w_a + w_b;
            let mix: Vec<f64> = dist_a
                .iter()
                .zip(&dist_b)
                .map(|(&x, &y)| (w_a * x + w_b * y) / w_ab)
                .collect();
            let jsd = w_a * kl(&dist_a, &mix) + w_b * kl(&dist_b, &mix);
            ensure!(
                (d - jsd).abs() <= 1e-12,
                "trial {trial}: diversity {d} vs weighted JSD {jsd}"
            );

            let uniform_row: Vec<f64> = vec![w_rest / n_s as f64; n_s];
            let mut before = Vec::new();
            before.extend(dist_a.iter().map(|&x| w_a * x));
            before.extend(dist_b.iter().map(|&x| w_b * x));
            before.extend(uniform_row.iter().copied());
            let t_before =
                TrafficMatrix::new(ids("a", 3), ids("s", n_s), before).unwrap();
            let mi_before = mutual_information(&build_joint(&t_before).unwrap())
                .unwrap()
                .value();

            let mut after = Vec::new();
            after.extend(
                dist_a
                    .iter()
                    .zip(&dist_b)
                    .map(|(&x, &y)| w_a * x + w_b * y),
            );
            after.extend(uniform_row.iter().copied());
            let t_after = TrafficMatrix::new(ids("a", 2), ids("s", n_s), after).unwrap();
            let mi_after = mutual_information(&build_joint(&t_after).unwrap())
                .unwrap()
                .value();

            let global_drop = mi_before - mi_after;
            ensure!(
                (d - global_drop).abs() <= 1e-9,
                "trial {trial}: diversity {d} vs global drop {global_drop}"
            );
        }
        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 5.0, "took {secs:.2}s, budget 5s");
        Ok(())
    });
}

#[test]
fn criterion_4_telescoping_hierarchy() {
    criterion(4, "telescoping merge hierarchy", || {
        let spec = SynthSpec {
            topology: Topology::Grid {
                width: 20,
                height: 20,
            },
            block_dists: vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            volume_law: VolumeLaw::Constant(1.0),
            noise: 0.1,
        };
        let out = synth(&spec, 4).map_err(|e| e.to_string())?;
        let m = build_joint(&out.traffic).unwrap();
        let (c, trace) = phase1(&m, &out.graph, 1).map_err(|e| e.to_string())?;
        ensure!(c.n_clusters() == 1, "expected 1 cluster, got {}", c.n_clusters());
        ensure!(trace.steps.len() == 399, "expected 399 merges, got {}", trace.steps.len());

        for (i, w) in trace.steps.windows(2).enumerate() {
            ensure!(
                w[1].retained_mi.value() <= w[0].retained_mi.value() + 1e-15,
                "retained MI increased at step {}: {} -> {}",
                i + 2,
                w[0].retained_mi.value(),
                w[1].retained_mi.value()
            );
        }

        let h_s = entropy(m.service_marginal()).unwrap().value();
        let mut nodes: Vec<ClusterNode> = (0..m.n_areas())
            .map(|i| {
                ClusterNode::new(vec![i], m.area_weights()[i], m.conditional_row(i).to_vec())
                    .unwrap()
            })
            .collect();
        for (i, step) in trace.steps.iter().enumerate() {
            let ia = nodes
                .iter()
                .position(|n| n.min_member() == step.rep_a)
                .ok_or_else(|| format!("step {}: representative {} missing", i + 1, step.rep_a))?;
            let ib = nodes
                .iter()
                .position(|n| n.min_member() == step.rep_b)
                .ok_or_else(|| format!("step {}: representative {} missing", i + 1, step.rep_b))?;
            ensure!(ia != ib, "step {}: merged a cluster with itself", i + 1);
            let merged = merge(&nodes[ia], &nodes[ib]).map_err(|e| e.to_string())?;
            let (lo, hi) = (ia.min(ib), ia.max(ib));
            nodes.remove(hi);
            nodes.remove(lo);
            nodes.push(merged);

            let h_cond: f64 = nodes.iter().map(|n| n.weight() * n.dist_entropy()).sum();
            let oracle = h_s - h_cond;
            ensure!(
                (oracle - step.retained_mi.value()).abs() <= 1e-6,
                "step {}: trace retained {} vs recomputed {}",
                i + 1,
                step.retained_mi.value(),
                oracle
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_5_planted_recovery() {
    criterion(5, "planted structure recovery", || {
        let start = Instant::now();
        let dist_a = vec![0.6, 0.2, 0.1, 0.1];
        let dist_b = vec![0.1, 0.1, 0.2, 0.6];
        let spec = SynthSpec {
            topology: Topology::Grid {
                width: 50,
                height: 50,
            },
            block_dists: vec![dist_a.clone(), dist_b.clone(), dist_a, dist_b],
            volume_law: VolumeLaw::Constant(1.0),
            noise: 0.0,
        };
        let out = synth(&spec, 5).map_err(|e| e.to_string())?;
        let m = build_joint(&out.traffic).unwrap();
        ensure!(m.n_areas() == 2500, "expected 2500 areas");

        let subset = ServiceSubset::full(4).unwrap();
        let (c, _t1, _t2) = two_phase(&out.traffic, &out.graph, &subset, 4, 2)
            .map_err(|e| e.to_string())?;
        ensure!(c.n_clusters() == 2, "expected 2 clusters, got {}", c.n_clusters());

        let (_, fraction) = retained_mi(&c, &m).map_err(|e| e.to_string())?;
        ensure!(
            (fraction - 1.0).abs() <= 1e-9,
            "retained fraction {fraction} не 1"
        );

        // Ground truth up to label permutation: cluster label must be a
        // bijection of the block parity (strips 0,2 share one distribution,
        // 1,3 the other).
        let mut label_of_parity = [usize::MAX; 2];
        for (area, &label) in c.assignment().iter().enumerate() {
            let parity = out.truth[area] % 2;
            if label_of_parity[parity] == usize::MAX {
                label_of_parity[parity] = label;
            }
            ensure!(
                label_of_parity[parity] == label,
                "area {area}: parity {parity} split across clusters"
            );
        }
        ensure!(
            label_of_parity[0] != label_of_parity[1],
            "both parities landed in one cluster"
        );

        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 10.0, "took {secs:.2}s, budget 10s");
        Ok(())
    });
}

/// Two services anchored to opposite strips plus eight spatially uniform
/// ones; every area keeps every service positive.
fn diverse_pair_spec() -> SynthSpec {
    let mut dist_a = vec![0.0875; 10];
    dist_a[0] = 0.26;
    dist_a[1] = 0.04;
    let mut dist_b = vec![0.0875; 10];
    dist_b[0] = 0.04;
    dist_b[1] = 0.26;
    SynthSpec {
        topology: Topology::Grid {
            width: 6,
            height: 6,
        },
        block_dists: vec![dist_a, dist_b],
        volume_law: VolumeLaw::Constant(1.0),
        noise: 0.0,
    }
}

#[test]
fn criterion_6_informative_selection() {
    criterion(6, "informative service selection", || {
        let start = Instant::now();
        let out = synth(&diverse_pair_spec(), 6).map_err(|e| e.to_string())?;
        let t = &out.traffic;

        let ch = channel_from_traffic(t).map_err(|e| e.to_string())?;
        let cap = blahut_arimoto(&ch, 1e-10, 10_000).map_err(|e| e.to_string())?;
        let set = select_informative(&cap, SelectionRule::Gap).map_err(|e| e.to_string())?;

        let mut top2: Vec<usize> = set.ranked[..2].iter().map(|r| r.channel_index).collect();
        top2.sort_unstable();
        ensure!(
            top2 == [0, 1],
            "top-ranked services are {top2:?}, expected the diverse pair [0, 1]"
        );
        let mut selected = set.subset.indices().to_vec();
        selected.sort_unstable();
        ensure!(
            selected == [0, 1],
            "gap rule selected {selected:?}, expected exactly [0, 1]"
        );

        let restricted_mi = |mask: u32| -> f64 {
            let indices: Vec<usize> = (0..10).filter(|j| mask & (1 << j) != 0).collect();
            let subset = ServiceSubset::new(indices).unwrap();
            let m = build_joint(&t.select_services(&subset).unwrap()).unwrap();
            mutual_information(&m).unwrap().value()
        };
        let pair_mi = restricted_mi(0b11);
        for mask in 1u32..(1 << 10) {
            if mask == 0b11 {
                continue;
            }
            let other = restricted_mi(mask);
            ensure!(
                pair_mi + 1e-12 >= other,
                "subset {mask:#b} has restricted MI {other}, above the pair's {pair_mi}"
            );
        }

        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 30.0, "took {secs:.2}s, budget 30s");
        Ok(())
    });
}

#[test]
fn criterion_7_scaling_law() {
    criterion(7, "tau and evaluation scaling", || {
        let start = Instant::now();
        let report = bench(&[10, 20, 40, 80], 0).map_err(|e| e.to_string())?;

        ensure!(
            (report.tau_exponent + 0.5).abs() <= 0.05,
            "tau exponent {} outside -0.5 +/- 0.05",
            report.tau_exponent
        );

        // Each ladder step quadruples the area count, i.e. two doublings;
        // linear growth within 20 percent per doubling compounds to
        // [0.8^2, 1.2^2] on the normalized consecutive ratio.
        for (i, pair) in report.rows.windows(2).enumerate() {
            let eval_ratio =
                pair[1].edge_evaluations as f64 / pair[0].edge_evaluations as f64;
            let area_ratio = pair[1].n_areas as f64 / pair[0].n_areas as f64;
            let normalized = eval_ratio / area_ratio;
            ensure!(
                (0.64..=1.44).contains(&normalized),
                "step {}: evaluation growth {normalized:.3}x the area growth, outside [0.64, 1.44]",
                i + 1
            );
        }

        let secs = start.elapsed().as_secs_f64();
        ensure!(secs < 120.0, "took {secs:.2}s, budget 2 min");
        Ok(())
    });
}

#[test]
fn criterion_8_interpretation_identities() {
    criterion(8, "interpretation identities", || {
        // Three vertical strips, each leaning on its own service, with the
        // planted block id as the demographic level.
        let spec = SynthSpec {
            topology: Topology::Grid {
                width: 9,
                height: 3,
            },
            block_dists: vec![
                vec![0.7, 0.15, 0.15],
                vec![0.15, 0.7, 0.15],
                vec![0.15, 0.15, 0.7],
            ],
            volume_law: VolumeLaw::Constant(1.0),
            noise: 0.0,
        };
        let out = synth(&spec, 8).map_err(|e| e.to_string())?;
        let m = build_joint(&out.traffic).unwrap();
        let (c, _) = phase1(&m, &out.graph, 3).map_err(|e| e.to_string())?;
        ensure!(c.n_clusters() == 3, "expected the 3 strips");

        let labels: Vec<String> = (1..=3).map(|l| l.to_string()).collect();
        let by_area: Vec<Option<usize>> = out.truth.iter().map(|&b| Some(b)).collect();
        let da = DemographicsAssignment::new(labels, by_area).unwrap();
        let demo_rows =
            demo_conditional(&c, &da, &m, DemoWeighting::Traffic).map_err(|e| e.to_string())?;

        let mut mats = Vec::new();
        let mut manual_sum = vec![vec![0.0; 3]; 3];
        for k in 0..3 {
            let sd = significance_demographics(&demo_rows, k).map_err(|e| e.to_string())?;
            let ss = significance_services(&c, k).map_err(|e| e.to_string())?;
            for sig in [&sd, &ss] {
                let total: f64 = sig.values.iter().sum();
                ensure!(
                    total.abs() <= 1e-9,
                    "cluster {k}: significance sums to {total}"
                );
                for &v in &sig.values {
                    ensure!(
                        (-1.0 - 1e-12..=1.0 + 1e-12).contains(&v),
                        "cluster {k}: significance value {v} outside [-1, 1]"
                    );
                }
            }
            for (d, &sv) in sd.values.iter().enumerate() {
                for (j, &jv) in ss.values.iter().enumerate() {
                    manual_sum[d][j] += sv * jv;
                }
            }
            mats.push(geodiv_core::interpret::incidence(&sd, &ss));
        }

        let avg = incidence_avg(&mats).map_err(|e| e.to_string())?;
        for d in 0..3 {
            for j in 0..3 {
                let manual = manual_sum[d][j] / 3.0;
                ensure!(
                    (avg.get(d, j) - manual).abs() <= 1e-12,
                    "incidence[{d}][{j}] = {} vs mean of outer products {manual}",
                    avg.get(d, j)
                );
            }
        }

        // Block k's distinctive service is service k; its level row must
        // peak there in magnitude, with positive sign.
        for level in 0..3 {
            let row = avg.row(level);
            let best = (0..3)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
                .unwrap();
            ensure!(
                best == level,
                "level {level} peaks at service {best}, expected {level}"
            );
            ensure!(
                row[level] > 0.0,
                "level {level} pairs with its service at sign {}",
                row[level]
            );
        }
        Ok(())
    });
}

fn read_dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

/// Writes the traffic file with each area's services in reversed order, so
/// first-appearance service order is permuted while content is unchanged.
fn write_permuted_traffic(path: &std::path::Path, t: &TrafficMatrix) {
    let mut text = String::from("area_id,service_id,volume\n");
    for i in 0..t.n_areas() {
        for j in (0..t.n_services()).rev() {
            text.push_str(&format!(
                "{},{},{}\n",
                t.area_ids()[i],
                t.service_ids()[j],
                geodiv_cli::io::fmt_f64(t.volume(i, j))
            ));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn criterion_9_determinism() {
    criterion(9, "determinism and order independence", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = synth(&diverse_pair_spec(), 9).map_err(|e| e.to_string())?;
        write_synth(dir.path(), &out).map_err(|e| e.to_string())?;
        write_permuted_traffic(&dir.path().join("traffic_perm.csv"), &out.traffic);

        let cfg = |traffic: &str, out_dir: &str| RunConfig {
            traffic: dir.path().join(traffic),
            adjacency: Some(dir.path().join("adjacency.csv")),
            demographics: vec![dir.path().join("demographics.csv")],
            stage: Stage::Interpret,
            rule: SelectionRule::Gap,
            n_k1: Some(8),
            n_k2: Some(2),
            k_max: None,
            log_base: LogBase::E,
            weighting: DemoWeighting::Traffic,
            seed: 77,
            out_dir: dir.path().join(out_dir),
        };

        run_pipeline(&cfg("traffic.csv", "run_a")).map_err(|e| e.to_string())?;
        run_pipeline(&cfg("traffic.csv", "run_b")).map_err(|e| e.to_string())?;
        let a = read_dir_bytes(&dir.path().join("run_a"));
        let b = read_dir_bytes(&dir.path().join("run_b"));
        ensure!(
            a.iter().map(|(n, _)| n).eq(b.iter().map(|(n, _)| n)),
            "repeated runs wrote different file sets"
        );
        for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
            ensure!(
                bytes_a == bytes_b,
                "{name} differs between identical runs"
            );
        }

        run_pipeline(&cfg("traffic_perm.csv", "run_p")).map_err(|e| e.to_string())?;
        let partition = |out_dir: &str| -> std::collections::BTreeSet<Vec<String>> {
            let text =
                std::fs::read_to_string(dir.path().join(out_dir).join("assignment.csv")).unwrap();
            let mut groups: std::collections::BTreeMap<String, Vec<String>> =
                std::collections::BTreeMap::new();
            for line in text.lines().skip(1) {
                let (area, cluster) = line.split_once(',').unwrap();
                groups
                    .entry(cluster.to_string())
                    .or_default()
                    .push(area.to_string());
            }
            groups
                .into_values()
                .map(|mut g| {
                    g.sort();
                    g
                })
                .collect()
        };
        ensure!(
            partition("run_a") == partition("run_p"),
            "permuting service input order changed the clustering"
        );
        Ok(())
    });
}
