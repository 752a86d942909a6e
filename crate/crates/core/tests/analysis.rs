use lagrange_sync::analysis::{
    consensus_basis, contraction_residual, fit_rate, reduced_model_compare, sync_error,
    tracking_error, ErrorSeries, FitWindow, Reduction,
};
use lagrange_sync::controllers::{AnalyticTrajectory, Harmonic, JointProfile, Law, Trajectory};
use lagrange_sync::dynamics::{LagrangianModel, TwoLinkArm};
use lagrange_sync::simulator::{
    run, GroupLog, Group, Reference, RobotTrack, Scenario, SimConfig, TrajectoryLog,
};
use lagrange_sync::topology::{CouplingGraph, Gains};
use nalgebra::DVector;
use proptest::prelude::*;

/// A log holding only positions, one group of `qs.len()` robots.
fn position_log(qs: Vec<Vec<DVector<f64>>>, dt: f64) -> TrajectoryLog {
    let len = qs[0].len();
    let robots = qs
        .into_iter()
        .enumerate()
        .map(|(member, q)| {
            let zeros = vec![DVector::zeros(q[0].len()); len];
            RobotTrack {
                group: 0,
                member,
                qdot: zeros.clone(),
                qd: zeros.clone(),
                qd_dot: zeros.clone(),
                s: zeros.clone(),
                tau: zeros,
                a_hat: Vec::new(),
                q,
            }
        })
        .collect::<Vec<_>>();
    TrajectoryLog {
        dt,
        decimation: 1,
        t: (0..len).map(|k| k as f64 * dt).collect(),
        groups: vec![GroupLog {
            name: "g".into(),
            robots: 0..robots.len(),
            law: Law::TrackingSync,
        }],
        robots,
        flags: Vec::new(),
    }
}

fn positions(p: usize, n: usize, len: usize) -> impl Strategy<Value = Vec<Vec<DVector<f64>>>> {
    prop::collection::vec(
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), len),
        p,
    )
    .prop_map(|robots| {
        robots
            .into_iter()
            .map(|r| r.into_iter().map(DVector::from_vec).collect())
            .collect()
    })
}

fn arm_ring(p: usize, k1: f64, k2: f64, lambda: f64) -> Scenario {
    use std::f64::consts::PI;
    let traj = AnalyticTrajectory::new(&[
        JointProfile {
            harmonics: vec![Harmonic::new(1.0, PI, -PI / 2.0)],
            ..JointProfile::default()
        },
        JointProfile {
            offset: 2.0,
            harmonics: vec![Harmonic::new(-2.0, 0.6 * PI, 0.0)],
            ..JointProfile::default()
        },
    ])
    .unwrap();
    let group = Group::uniform(
        "arms",
        LagrangianModel::two_link_arm(TwoLinkArm::default()),
        CouplingGraph::ring(p).unwrap(),
        Gains::scalar(2, k1, k2, lambda).unwrap(),
        Law::TrackingSync,
        Reference::Trajectory(Trajectory::Analytic(traj)),
    )
    .unwrap();
    Scenario::single(group).unwrap()
}

fn sim(dt: f64, t_final: f64, decimation: usize) -> SimConfig {
    SimConfig {
        dt,
        t_final,
        decimation,
        seed: 3,
        ..SimConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sync_error_ignores_a_common_shift(
        (p, n, qs, shift) in (2usize..=5, 1usize..=3).prop_flat_map(|(p, n)| {
            (Just(p), Just(n), positions(p, n, 6), prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), 6))
        })
    ) {
        let basis = consensus_basis(p, n).unwrap();
        let base = position_log(qs.clone(), 0.1);
        let moved = position_log(
            qs.into_iter()
                .map(|r| r.into_iter().zip(&shift).map(|(q, c)| q + DVector::from_column_slice(c)).collect())
                .collect(),
            0.1,
        );
        let a = sync_error(&base, 0..p, &basis).unwrap();
        let b = sync_error(&moved, 0..p, &basis).unwrap();
        for (x, y) in a.value.iter().zip(&b.value) {
            prop_assert!((x - y).abs() < 1e-12 * (1.0 + x));
        }
    }

    #[test]
    fn two_robot_sync_error_is_half_the_gap(qs in positions(2, 2, 4)) {
        let log = position_log(qs.clone(), 0.1);
        let e = sync_error(&log, 0..2, &consensus_basis(2, 2).unwrap()).unwrap();
        for k in 0..4 {
            let expect = (&qs[0][k] - &qs[1][k]).norm() / 2f64.sqrt();
            prop_assert!((e.value[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_recovers_exact_rates(lambda in 0.1f64..5.0, amplitude in 1e-3f64..1e3) {
        let t: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let value = t.iter().map(|t| amplitude * (-lambda * t).exp()).collect();
        let fit = fit_rate(&ErrorSeries { t, value }, FitWindow::Default).unwrap();
        prop_assert!((fit.lambda - lambda).abs() < 1e-6 * lambda, "{} vs {}", fit.lambda, lambda);
        prop_assert!(fit.r_squared > 0.9999 && fit.r_squared <= 1.0);
    }
}

#[test]
fn identical_robots_have_zero_sync_error() {
    let q = vec![DVector::from_vec(vec![0.3, -1.2]); 5];
    let log = position_log(vec![q; 4], 0.1);
    let e = sync_error(&log, 0..4, &consensus_basis(4, 2).unwrap()).unwrap();
    assert!(e.value.iter().all(|v| *v == 0.0));
}

#[test]
fn robot_on_its_trajectory_has_zero_tracking_error() {
    let q = vec![DVector::from_vec(vec![0.3, -1.2]); 5];
    let mut log = position_log(vec![q.clone()], 0.1);
    log.robots[0].qd = q;
    assert!(tracking_error(&log)[0].value.iter().all(|v| *v == 0.0));
}

#[test]
fn contraction_residual_is_second_order_in_the_step() {
    let scenario = arm_ring(3, 5.0, 2.0, 5.0);
    let worst = |dt: f64| {
        let log = run(&sim(dt, 2.0, 1), &scenario).unwrap();
        let r = contraction_residual(&log, &scenario, 0, 1e-8).unwrap();
        r.t.iter()
            .zip(&r.absolute)
            .filter(|(t, _)| **t <= 0.5)
            .map(|(_, a)| *a)
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (worst(2e-3), worst(1e-3));
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.2, "order {order} ({e1:e}, {e2:e})");
}

#[test]
fn composite_sum_vanishes_for_stable_gains() {
    let p = 3;
    let scenario = arm_ring(p, 20.0, 5.0, 5.0);
    let log = run(&sim(1e-3, 6.0, 10), &scenario).unwrap();
    let common = |k: usize| {
        let sum = log.robots.iter().fold(DVector::zeros(2), |acc, r| acc + &r.s[k]);
        (sum / (p as f64).sqrt()).norm()
    };
    let (first, last) = (common(0), common(log.len() - 1));
    assert!(first > 1e-2, "{first}");
    assert!(last < 1e-8, "{last}");
}

#[test]
fn reduction_is_not_applicable_before_synchronization() {
    let scenario = arm_ring(3, 5.0, 2.0, 5.0);
    let log = run(&sim(1e-3, 0.05, 10), &scenario).unwrap();
    assert!(matches!(
        reduced_model_compare(&log, &scenario, 0, 1e-6).unwrap(),
        Reduction::NotApplicable(_)
    ));
}
