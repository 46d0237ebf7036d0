//! One closed-loop trial: sense, estimate, recover, repeat.
//!
//! A trial draws a landmark uniformly from its box, draws a starting state
//! from the slice of the initial box in contact with it, and then runs the
//! loop for a fixed number of steps. Contact steps feed the estimator and
//! hand control to the configured policy; the first miss synthesizes a probe
//! plan from the last in-contact state estimate, and the plan drives the
//! input until contact resumes or the plan runs out.
//!
//! Guarantees are checked as the trial runs and recorded as violation
//! strings rather than panics, so a batch reports every broken trial instead
//! of dying on the first one.

use super::config::{PolicyConfig, ValidatedScenario};
use super::trace::{StepRecord, TrialTrace};
use crate::estimator::EstimatorState;
use crate::geometry::{jung_radius, min_enclosing_ball, EstimateSet, Polytope};
use crate::recovery::RecoveryPlan;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Slack for the per-step cloud-diameter monotonicity check.
const EPS_MONOTONE: f64 = 1e-12;

/// Slack for the per-step contraction-bound check.
const EPS_BOUND: f64 = 1e-6;

/// Cloud size a state-estimate snapshot is topped up to before its
/// enclosing ball is taken.
const SNAPSHOT_CLOUD_TARGET: usize = 64;

/// Single-bit proximity measurement. Exact comparison, no epsilon: the
/// estimator's enclosures already absorb floating-point slack on their side,
/// and the sensor itself is the ground truth being simulated.
pub fn sense(x: &DVector<f64>, m: &DVector<f64>, r: f64) -> bool {
    (x - m).norm() <= r
}

fn sample_box<R: Rng>(rng: &mut R, b: &Polytope) -> DVector<f64> {
    let (lo, hi) = b.aabb();
    DVector::from_fn(lo.len(), |i, _| lo[i] + rng.gen::<f64>() * (hi[i] - lo[i]))
}

/// Draws (x0, m) with m uniform in its box and x0 uniform in the part of its
/// box within sensing range of m, so every trial starts in contact.
fn sample_start<R: Rng>(
    rng: &mut R,
    scenario: &ValidatedScenario,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let r = scenario.config.r;
    for _ in 0..10_000 {
        let m = sample_box(rng, &scenario.m_box);
        for _ in 0..1_000 {
            let x0 = sample_box(rng, &scenario.x0_box);
            if sense(&x0, &m, r) {
                return Some((x0, m));
            }
        }
    }
    None
}

/// Enclosing ball for a state-estimate snapshot, used as the launch set of a
/// probe plan. Taken over the sample cloud, with the radius clipped to the
/// ball that the cloud diameter guarantees can enclose it; the clip only
/// trims floating-point excess. An empty cloud falls back to the bounding
/// box of the snapshot's constraints.
fn launch_ball(snap: &EstimateSet) -> (DVector<f64>, f64) {
    if snap.cloud_len() > 0 {
        let ball = min_enclosing_ball(snap.cloud()).expect("nonempty cloud has an enclosing ball");
        let cap =
            jung_radius(snap.cloud_diameter(), snap.dim()).expect("finite nonnegative diameter");
        (ball.center, ball.radius.min(cap))
    } else {
        let (lo, hi) = snap.constraint_aabb();
        ((lo + hi) / 2.0, (hi - lo).norm() / 2.0)
    }
}

/// Runs one trial to completion. `trial` indexes the RNG stream, so trials
/// are independent of each other and of how many run.
pub fn run_trial(scenario: &ValidatedScenario, trial: usize) -> TrialTrace {
    let mut rng = stream_rng(scenario.config.seed, trial as u64 + 1);
    let Some((x0, m)) = sample_start(&mut rng, scenario) else {
        let n = scenario.sys.state_dim();
        return TrialTrace {
            trial,
            steps: Vec::new(),
            violations: vec!["could not draw a starting state in contact with the landmark".into()],
            max_gap: 0,
            x0_true: DVector::zeros(n),
            m_true: DVector::zeros(n),
            recovery_events: 0,
        };
    };
    run_loop(scenario, x0, m, trial, &mut rng)
}

/// Runs the closed loop from an explicit start. Deterministic given the
/// config seed and the start; trial numbering plays no part.
pub fn active_localize(
    scenario: &ValidatedScenario,
    x0: &DVector<f64>,
    m: &DVector<f64>,
) -> TrialTrace {
    let mut rng = stream_rng(scenario.config.seed, 0);
    run_loop(scenario, x0.clone(), m.clone(), 0, &mut rng)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_loop(
    scenario: &ValidatedScenario,
    x0_true: DVector<f64>,
    m_true: DVector<f64>,
    trial: usize,
    rng: &mut ChaCha8Rng,
) -> TrialTrace {
    let cfg = &scenario.config;
    let n_inputs = scenario.sys.input_dim();
    let window = scenario.recovery_window();
    let mut trace = TrialTrace {
        trial,
        steps: Vec::with_capacity(cfg.max_steps),
        violations: Vec::new(),
        max_gap: 0,
        x0_true: x0_true.clone(),
        m_true: m_true.clone(),
        recovery_events: 0,
    };

    let mut state = match EstimatorState::new(
        scenario.sys.clone(),
        scenario.x0_box.clone(),
        scenario.m_box.clone(),
        cfg.r,
        cfg.grid_resolution,
    ) {
        Ok(s) => s,
        Err(e) => {
            trace
                .violations
                .push(format!("estimator setup failed: {e}"));
            return trace;
        }
    };

    let mut x = x0_true.clone();
    let mut prev_u = DVector::zeros(n_inputs);
    let mut plan: Option<RecoveryPlan> = None;
    let mut last_snapshot: Option<EstimateSet> = None;
    let mut zero_run = 0usize;
    // Cloud diameters only move when a measurement is ingested, so they are
    // cached between positives instead of recomputed every step.
    let mut diam_x0 = state.x0_estimate().cloud_diameter();
    let mut diam_m = state.m_estimate().cloud_diameter();
    let mut prev_diam_x0 = f64::INFINITY;
    let mut prev_diam_m = f64::INFINITY;

    for k in 0..cfg.max_steps {
        let y = sense(&x, &m_true, cfg.r);
        let mut diam_xk = None;

        if y {
            plan = None;
            trace.max_gap = trace.max_gap.max(zero_run);
            zero_run = 0;

            match state.observe_positive() {
                Ok(mut snap) => {
                    if snap.cloud_len() < 2 {
                        snap.resample_cloud(SNAPSHOT_CLOUD_TARGET, rng);
                    }
                    diam_xk = Some(snap.cloud_diameter());
                    if !state.x0_estimate().contains(&x0_true) {
                        trace
                            .violations
                            .push(format!("step {k}: initial-state estimate lost the true x0"));
                    }
                    if !state.m_estimate().contains(&m_true) {
                        trace.violations.push(format!(
                            "step {k}: landmark estimate lost the true landmark"
                        ));
                    }
                    if !snap.contains(&x) {
                        trace
                            .violations
                            .push(format!("step {k}: state estimate lost the true state"));
                    }
                    if (state.max_separation() as i64) < k as i64 - window as i64 {
                        trace.violations.push(format!(
                            "step {k}: widest hit pair spans {} < {}",
                            state.max_separation(),
                            k as i64 - window as i64,
                        ));
                    }
                    diam_x0 = state.x0_estimate().cloud_diameter();
                    diam_m = state.m_estimate().cloud_diameter();
                    last_snapshot = Some(snap);
                }
                Err(e) => {
                    trace.violations.push(format!(
                        "step {k}: estimator rejected a positive measurement: {e}"
                    ));
                    break;
                }
            }
        } else {
            zero_run += 1;
            if plan.is_none() {
                let Some(snap) = &last_snapshot else {
                    trace.violations.push(format!(
                        "step {k}: missed before the estimator ever saw contact"
                    ));
                    break;
                };
                let (c0, r0) = launch_ball(snap);
                match RecoveryPlan::new(
                    &scenario.sys,
                    scenario.svp.basis(),
                    &c0,
                    r0,
                    cfg.r,
                    &prev_u,
                ) {
                    Ok(p) => {
                        plan = Some(p);
                        trace.recovery_events += 1;
                    }
                    Err(e) => {
                        trace
                            .violations
                            .push(format!("step {k}: probe plan synthesis failed: {e}"));
                        break;
                    }
                }
            }
        }

        let mut recovery_step_index = None;
        let u = if let Some(p) = plan.as_mut() {
            recovery_step_index = Some(p.issued());
            match p.next_control() {
                Some(u) => u,
                None => {
                    trace.violations.push(format!(
                        "step {k}: probe plan exhausted its {window} steps without contact"
                    ));
                    break;
                }
            }
        } else {
            match cfg.arbitrary_control_policy {
                PolicyConfig::Zero => DVector::zeros(n_inputs),
                PolicyConfig::BoundedRandom { scale } => {
                    DVector::from_fn(n_inputs, |_, _| rng.gen_range(-scale..=scale))
                }
            }
        };

        if diam_x0 > prev_diam_x0 + EPS_MONOTONE {
            trace.violations.push(format!(
                "step {k}: initial-estimate cloud grew from {prev_diam_x0} to {diam_x0}"
            ));
        }
        if diam_m > prev_diam_m + EPS_MONOTONE {
            trace.violations.push(format!(
                "step {k}: landmark cloud grew from {prev_diam_m} to {diam_m}"
            ));
        }
        let bound = scenario.theoretical_bound(k);
        if diam_x0 > bound + EPS_BOUND {
            trace.violations.push(format!(
                "step {k}: initial-estimate cloud {diam_x0} exceeds the guaranteed {bound}"
            ));
        }
        prev_diam_x0 = diam_x0;
        prev_diam_m = diam_m;

        trace.steps.push(StepRecord {
            k,
            y,
            in_recovery: !y,
            recovery_step_index,
            diam_x0_cloud: diam_x0,
            diam_x0_bound: state.diam_bound(),
            diam_m_cloud: diam_m,
            diam_xk_cloud: diam_xk,
            x: x.clone(),
            u: u.clone(),
        });

        x = scenario.sys.step(&x, &u);
        state.record_control(&u);
        prev_u = u;
    }

    trace.max_gap = trace.max_gap.max(zero_run);
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;

    fn small_scenario(policy_random: bool) -> ValidatedScenario {
        let mut cfg = ScenarioConfig::from_toml_str(
            r#"
seed = 11
trials = 1
max_steps = 200
r = 2.0
grid_resolution = 41

[system]
a = [[1.014, 0.0], [0.0, 1.014]]
b = [[1.0, 0.0], [0.0, 1.0]]

[x0_box]
center = [0.2, -0.2]
side = 3.5

[m_box]
center = [0.5, 0.5]
side = 1.0
"#,
        )
        .unwrap();
        if policy_random {
            cfg.arbitrary_control_policy = PolicyConfig::BoundedRandom { scale: 0.05 };
        }
        cfg.validate().unwrap()
    }

    #[test]
    fn sense_is_an_exact_threshold() {
        let m = DVector::from_column_slice(&[0.0, 0.0]);
        assert!(sense(&DVector::from_column_slice(&[2.0, 0.0]), &m, 2.0));
        assert!(!sense(
            &DVector::from_column_slice(&[2.0 + 1e-12, 0.0]),
            &m,
            2.0
        ));
    }

    #[test]
    fn trial_runs_clean_and_keeps_contact_guarantees() {
        let scenario = small_scenario(false);
        let trace = run_trial(&scenario, 0);
        assert!(trace.violations.is_empty(), "{:?}", trace.violations);
        assert_eq!(trace.steps.len(), 200);
        assert!(trace.steps[0].y, "trials start in contact");
        assert!(trace.max_gap <= scenario.recovery_window());
        assert!(sense(&trace.x0_true, &trace.m_true, 2.0));
        assert!(scenario.x0_box.contains(&trace.x0_true));
        assert!(scenario.m_box.contains(&trace.m_true));
        // The plant is unstable and the policy is zero, so the state drifts
        // out of contact at some point and a probe plan has to bring it back.
        assert!(trace.recovery_events > 0);
        assert!(trace.steps.iter().any(|s| !s.y));
        assert!(trace.steps.iter().any(|s| s.y && s.k > 0));
    }

    #[test]
    fn trials_are_reproducible_and_streams_differ() {
        let scenario = small_scenario(true);
        let a = run_trial(&scenario, 3);
        let b = run_trial(&scenario, 3);
        assert_eq!(a.x0_true, b.x0_true);
        assert_eq!(a.steps.len(), b.steps.len());
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.u, sb.u);
            assert_eq!(sa.y, sb.y);
        }
        let c = run_trial(&scenario, 4);
        assert_ne!(a.x0_true, c.x0_true);
    }

    #[test]
    fn diameters_shrink_and_respect_the_curve() {
        let scenario = small_scenario(false);
        let trace = run_trial(&scenario, 1);
        assert!(trace.violations.is_empty(), "{:?}", trace.violations);
        let first = trace.steps.first().unwrap();
        let last = trace.steps.last().unwrap();
        assert!(last.diam_x0_cloud <= first.diam_x0_cloud);
        assert!(last.diam_m_cloud <= first.diam_m_cloud);
        for s in &trace.steps {
            assert!(s.diam_x0_cloud <= scenario.theoretical_bound(s.k) + 1e-6);
            assert!(s.diam_x0_cloud <= s.diam_x0_bound + 1e-9);
            assert_eq!(s.diam_xk_cloud.is_some(), s.y);
        }
    }

    #[test]
    fn explicit_start_runs_one_step_and_ignores_trial_numbering() {
        let mut scenario = small_scenario(false);
        scenario.config.max_steps = 1;
        let x0 = DVector::from_column_slice(&[0.4, 0.3]);
        let m = DVector::from_column_slice(&[0.6, 0.5]);
        let trace = active_localize(&scenario, &x0, &m);
        assert!(trace.violations.is_empty(), "{:?}", trace.violations);
        assert_eq!(trace.steps.len(), 1);
        let s = &trace.steps[0];
        assert!(s.y && !s.in_recovery && s.recovery_step_index.is_none());
        // One measurement pins nothing about x0 beyond the prior box, and
        // the landmark estimate is the prior cut to within r of the start box.
        assert!((s.diam_x0_cloud - scenario.x0_box.diameter()).abs() < 0.2);
        assert!(s.diam_m_cloud <= scenario.m_box.diameter());
        let again = active_localize(&scenario, &x0, &m);
        assert_eq!(trace.steps[0].u, again.steps[0].u);
    }

    #[test]
    fn recovery_steps_are_flagged_and_bounded() {
        let scenario = small_scenario(false);
        let trace = run_trial(&scenario, 2);
        assert!(trace.violations.is_empty(), "{:?}", trace.violations);
        let mut run = 0usize;
        for s in &trace.steps {
            assert_eq!(s.in_recovery, !s.y);
            if s.y {
                assert_eq!(s.recovery_step_index, None);
                run = 0;
            } else {
                assert_eq!(s.recovery_step_index, Some(run));
                run += 1;
                assert!(run <= scenario.recovery_window());
            }
        }
    }
}
