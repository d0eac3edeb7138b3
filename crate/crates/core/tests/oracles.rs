//! Independent oracles for the physics, the tabular checks and the
//! conjugation rules.

use nalgebra::{DMatrix, DVector};

use revrl::dynamics::{explicit_euler_step, leapfrog_step, rk4_step, round_trip_defect, total_energy, HarmonicOscillator};
use revrl::envs::manipulator::{manipulator_dynamics, mass_matrix};
use revrl::envs::velocity_chain::{build_velocity_chain, ACCELERATIONS, COAST_ACTION};
use revrl::envs::{make_env, Cartpole, CartpoleParams, EnvOverrides, Manipulator, ManipulatorParams, Pendulum, PendulumParams, TorqueTier};
use revrl::dynamics::HamiltonianSystem;
use revrl::reversibility::{
    check_darmdp, check_detailed_balance, check_dynamic_reversibility, check_dynamic_reversibility_with,
    darmdp_residual, detailed_balance_residual, stationary_distribution, DEFAULT_TOLERANCE,
};
use revrl::{conjugate_transition, Action, Environment, RngStream, StateVector, Transition};

fn sv(q: &[f64], v: &[f64]) -> StateVector {
    StateVector::new(q.to_vec(), v.to_vec()).unwrap()
}

#[test]
fn cartpole_conjugate_transition_by_hand() {
    let env = Cartpole::new(CartpoleParams::default()).unwrap();
    let t = Transition {
        state: sv(&[0.0, 3.0], &[0.1, -0.2]),
        action: Action(vec![0.5]),
        reward: 0.3,
        next_state: sv(&[0.001, 2.998], &[0.12, -0.21]),
        terminal: false,
    };
    let c = conjugate_transition(&t, &env).unwrap();
    assert_eq!(c.state, sv(&[0.001, 2.998], &[-0.12, 0.21]));
    assert_eq!(c.action, Action(vec![0.5]));
    assert_eq!(c.next_state, sv(&[0.0, 3.0], &[-0.1, 0.2]));
    assert_eq!(c.reward, env.reward(&c.next_state));
    assert!(!c.terminal);
}

#[test]
fn velocity_chain_conjugate_transition_by_hand() {
    let env = make_env("velocity-chain", &EnvOverrides::default()).unwrap();
    let s = sv(&[0.0], &[1.0]);
    let out = env.step(&s, &Action(vec![0.0])).unwrap();
    assert_eq!(out.next, sv(&[1.0], &[1.0]));
    let t = Transition {
        state: s,
        action: Action(vec![0.0]),
        reward: out.reward,
        next_state: out.next,
        terminal: false,
    };
    let c = conjugate_transition(&t, env.as_ref()).unwrap();
    assert_eq!(c.state, sv(&[1.0], &[-1.0]));
    assert_eq!(c.next_state, sv(&[0.0], &[-1.0]));
    assert_eq!(c.reward, 1.0);
    // The reversed step really lands there.
    assert_eq!(env.step(&c.state, &c.action).unwrap().next, c.next_state);
}

#[test]
fn pendulum_reset_distribution() {
    let env = Pendulum::new(PendulumParams::default()).unwrap();
    let mut rng = RngStream::new(11, 0);
    let (mut tmin, mut tmax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for _ in 0..10_000 {
        let s = env.reset(&mut rng);
        tmin = tmin.min(s.config[0]);
        tmax = tmax.max(s.config[0]);
        vmin = vmin.min(s.velocity[0]);
        vmax = vmax.max(s.velocity[0]);
    }
    let pi = std::f64::consts::PI;
    assert!(tmin >= pi - 0.1 && tmax <= pi + 0.1);
    assert!(tmin < pi - 0.099 && tmax > pi + 0.099);
    assert!(vmin >= -0.05 && vmax <= 0.05);
    assert!(vmin < -0.049 && vmax > 0.049);

    let a = env.reset(&mut RngStream::new(5, 0));
    let b = env.reset(&mut RngStream::new(5, 0));
    assert_eq!(a, b);
    let mut r0 = RngStream::new(5, 0);
    let mut r1 = RngStream::new(5, 1);
    let collisions = (0..1000).filter(|_| env.reset(&mut r0) == env.reset(&mut r1)).count();
    assert_eq!(collisions, 0);
}

#[test]
fn one_leapfrog_step_nearly_conserves_energy() {
    let osc = HarmonicOscillator::default();
    let (q, p) = leapfrog_step(&[1.0], &[0.0], 0.01, |q| osc.generalized_force(q, &[0.0], &[])).unwrap();
    assert!((total_energy(&osc, &q, &p) - 0.5).abs() < 1e-4);
}

#[test]
fn rk4_drifts_where_leapfrog_oscillates() {
    let osc = HarmonicOscillator::default();
    let dt = 0.01;
    let (mut q, mut p) = (vec![1.0], vec![0.0]);
    let mut x = vec![1.0, 0.0];
    let mut leapfrog_early: f64 = 0.0;
    let mut leapfrog_late: f64 = 0.0;
    let mut rk4_drift = Vec::new();
    for k in 0..100_000 {
        let (q1, p1) = leapfrog_step(&q, &p, dt, |q| osc.generalized_force(q, &[0.0], &[])).unwrap();
        q = q1;
        p = p1;
        let err = (total_energy(&osc, &q, &p) - 0.5).abs();
        if k < 10_000 {
            leapfrog_early = leapfrog_early.max(err);
        } else if k >= 90_000 {
            leapfrog_late = leapfrog_late.max(err);
        }
        x = rk4_step(&x, dt, |x| vec![x[1], -x[0]]).unwrap();
        if k % 10_000 == 9_999 {
            rk4_drift.push((total_energy(&osc, &x[..1], &x[1..]) - 0.5).abs());
        }
    }
    assert!(rk4_drift.windows(2).all(|w| w[1] > w[0]), "{rk4_drift:?}");
    assert!(rk4_drift.iter().all(|&d| d > 0.0));
    // Leapfrog's error is a bounded O(dt^2) oscillation with no growth.
    assert!(leapfrog_early < 1.3e-5);
    assert!(leapfrog_late <= leapfrog_early * 1.001);
    // RK4's drift is secular: ten times the run, ten times the loss.
    let first = rk4_drift[0];
    let last = *rk4_drift.last().unwrap();
    assert!((last / first - 10.0).abs() < 0.1, "{first:e} {last:e}");
}

#[test]
fn explicit_euler_gains_energy() {
    let osc = HarmonicOscillator::default();
    let mut x = vec![1.0, 0.0];
    for _ in 0..1000 {
        x = explicit_euler_step(&x, 0.01, |x| vec![x[1], -x[0]]).unwrap();
    }
    // Each step multiplies the energy by exactly 1 + dt^2.
    let expected = 0.5 * (1.0f64 + 1e-4).powi(1000);
    assert!((total_energy(&osc, &x[..1], &x[1..]) - expected).abs() < 1e-10);
}

#[test]
fn equilibrium_round_trip_is_exact() {
    let env = Pendulum::new(PendulumParams::default()).unwrap();
    // Upright, where sin(theta) is exactly zero in floating point.
    let s = sv(&[0.0], &[0.0]);
    assert_eq!(round_trip_defect(&env, &s, &[Action(vec![0.0])]).unwrap(), 0.0);
    assert!(round_trip_defect(&env, &s, &[]).is_err());
}

fn random_cartpole_state(rng: &mut RngStream) -> StateVector {
    sv(
        &[rng.uniform(-1.0, 1.0), rng.uniform(-3.2, 3.2)],
        &[rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0)],
    )
}

#[test]
fn cartpole_single_step_round_trip() {
    let smooth = Cartpole::new(CartpoleParams {
        friction_multiplier: 0.0,
        ..Default::default()
    })
    .unwrap();
    let sticky = Cartpole::new(CartpoleParams {
        friction_multiplier: 2000.0,
        ..Default::default()
    })
    .unwrap();
    let mut rng = RngStream::new(21, 0);
    for _ in 0..200 {
        let s = random_cartpole_state(&mut rng);
        let a = [Action(vec![rng.uniform(-1.0, 1.0)])];
        assert!(round_trip_defect(&smooth, &s, &a).unwrap() < 1e-6);
        // Viscous friction only acts on a moving cart.
        let mut moving = s.clone();
        moving.velocity[0] = if rng.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 } * rng.uniform(0.5, 1.0);
        assert!(round_trip_defect(&sticky, &moving, &a).unwrap() > 1e-3);
    }
}

#[test]
fn any_friction_beats_frictionless_defect() {
    let multipliers = [0.0, 1.0, 10.0, 100.0, 1000.0, 2000.0];
    let envs: Vec<Cartpole> = multipliers
        .iter()
        .map(|&m| {
            Cartpole::new(CartpoleParams {
                friction_multiplier: m,
                ..Default::default()
            })
            .unwrap()
        })
        .collect();
    let mut rng = RngStream::new(22, 0);
    for _ in 0..20 {
        let s = random_cartpole_state(&mut rng);
        let actions: Vec<Action> = (0..100).map(|_| Action(vec![rng.uniform(-1.0, 1.0)])).collect();
        let defects: Vec<f64> = envs.iter().map(|e| round_trip_defect(e, &s, &actions).unwrap()).collect();
        assert!(defects[1..].iter().all(|&d| d > defects[0]), "{defects:?}");
    }
}

#[test]
fn manipulator_mirror_symmetry() {
    let env = Manipulator::new(ManipulatorParams::new(2, TorqueTier::Intermediate)).unwrap();
    let mut s = sv(&[0.4, -0.3], &[0.2, 0.5]);
    let mut m = sv(&[-0.4, 0.3], &[-0.2, -0.5]);
    let mut rng = RngStream::new(23, 0);
    for _ in 0..200 {
        let a = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        s = env.step(&s, &Action(a.to_vec())).unwrap().next;
        m = env.step(&m, &Action(vec![-a[0], -a[1]])).unwrap().next;
        for i in 0..2 {
            assert!((s.config[i] + m.config[i]).abs() < 1e-12);
            assert!((s.velocity[i] + m.velocity[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn manipulator_energy_conserved_without_torque() {
    let mut rng = RngStream::new(25, 0);
    for n in 2..=4 {
        let env = Manipulator::new(ManipulatorParams::new(n, TorqueTier::Over)).unwrap();
        let zero = Action::zeros(n);
        for _ in 0..5 {
            let mut s = env.reset(&mut rng);
            let e0 = total_energy(&env, &s.config, &s.velocity);
            for _ in 0..1000 {
                s = env.step(&s, &zero).unwrap().next;
            }
            let e1 = total_energy(&env, &s.config, &s.velocity);
            assert!((e1 - e0).abs() < 1e-4, "n={n}: {e0} -> {e1}");
        }
    }
}

/// Zero-torque energy drift over 20 s of a large release, integrated at `dt`.
fn release_drift(n: usize, dt: f64) -> f64 {
    let p = ManipulatorParams::new(n, TorqueTier::Over);
    let env = Manipulator::new(p.clone()).unwrap();
    let q0: Vec<f64> = (0..n).map(|i| 0.9 - 0.3 * i as f64).collect();
    let mut x = [q0, vec![0.0; n]].concat();
    let e0 = total_energy(&env, &x[..n], &x[n..]);
    let zero = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for _ in 0..(20.0 / dt).round() as usize {
        x = rk4_step(&x, dt, |y| {
            let acc = manipulator_dynamics(&y[..n], &y[n..], &zero, &p).unwrap();
            [y[n..].to_vec(), acc].concat()
        })
        .unwrap();
        worst = worst.max((total_energy(&env, &x[..n], &x[n..]) - e0).abs());
    }
    worst
}

#[test]
fn manipulator_drift_is_integration_error() {
    // A consistent model loses energy only through truncation, which falls
    // quickly with the step size.
    for n in 2..=4 {
        let coarse = release_drift(n, 0.002);
        let fine = release_drift(n, 0.001);
        assert!(fine * 8.0 < coarse, "n={n}: {coarse:e} vs {fine:e}");
    }
}

/// Gravity torques from a central difference of the potential energy.
fn gravity_torque(env: &Manipulator, q: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..q.len())
        .map(|i| {
            let mut up = q.to_vec();
            let mut down = q.to_vec();
            up[i] += h;
            down[i] -= h;
            (env.potential_energy(&up) - env.potential_energy(&down)) / (2.0 * h)
        })
        .collect()
}

/// Quasi-static lift from hanging to upright: gravity compensation plus PD
/// tracking of a slowly ramped target, saturated at the actuator limits.
fn direct_lift_final_reward(n: usize, tier: TorqueTier) -> f64 {
    let env = Manipulator::new(ManipulatorParams::new(n, tier)).unwrap();
    let limits = env.torque_limits().to_vec();
    let hold = env.params().holding_torques();
    let mut s = sv(&vec![0.0; n], &vec![0.0; n]);
    let mut late = Vec::new();
    for step in 0..1000 {
        let frac = (step as f64 / 500.0).min(1.0);
        let target0 = std::f64::consts::PI * frac;
        let g = gravity_torque(&env, &s.config);
        let action: Vec<f64> = (0..n)
            .map(|i| {
                let target = if i == 0 { target0 } else { 0.0 };
                let tau = g[i] + hold[i] * (2.0 * (target - s.config[i]) - 0.05 * s.velocity[i]);
                (tau / limits[i]).clamp(-1.0, 1.0)
            })
            .collect();
        let out = env.step(&s, &Action(action)).unwrap();
        if step >= 900 {
            late.push(out.reward);
        }
        s = out.next;
    }
    late.iter().sum::<f64>() / late.len() as f64
}

#[test]
fn direct_lift_needs_authority() {
    for n in 2..=4 {
        let over = direct_lift_final_reward(n, TorqueTier::Over);
        let under = direct_lift_final_reward(n, TorqueTier::Under);
        assert!(over > 0.95, "n={n} oM lift reward {over}");
        assert!(under < 0.1, "n={n} uM lift reward {under}");
    }
}

#[test]
fn actuation_acceleration_grows_with_tier() {
    let mut rng = RngStream::new(24, 0);
    for n in 2..=4 {
        let under = ManipulatorParams::new(n, TorqueTier::Under);
        let over = ManipulatorParams::new(n, TorqueTier::Over);
        for _ in 0..100 {
            let q: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let m = mass_matrix(&q, &under).cholesky().unwrap();
            let tu = DVector::from_iterator(n, under.torque_limits().iter().zip(&a).map(|(l, a)| l * a));
            let to = DVector::from_iterator(n, over.torque_limits().iter().zip(&a).map(|(l, a)| l * a));
            assert!(m.solve(&tu).norm() <= m.solve(&to).norm());
        }
    }
}

/// Brute-force enumeration of the lattice rule, written out independently.
fn lattice_oracle(halfwidth: i64, breaking: bool) -> (f64, Option<String>) {
    let ring = 2 * halfwidth;
    #[derive(Clone, Copy, PartialEq, Debug)]
    enum S {
        Lat(i64, i64),
        Crash,
    }
    let step = |s: S, a: i64| -> S {
        match s {
            S::Crash => S::Crash,
            S::Lat(x, v) => {
                if breaking && x == 0 && v.abs() == 2 {
                    return S::Crash;
                }
                let w = v + a;
                if w.abs() <= 2 {
                    S::Lat((x + v + a / 2).rem_euclid(ring), w)
                } else {
                    S::Lat(x, -v)
                }
            }
        }
    };
    let flip = |s: S| match s {
        S::Lat(x, v) => S::Lat(x, -v),
        S::Crash => S::Crash,
    };
    let mut states: Vec<S> = (0..ring).flat_map(|x| (-2..=2).map(move |v| S::Lat(x, v))).collect();
    if breaking {
        states.push(S::Crash);
    }
    let mut worst = 0.0;
    let mut witness = None;
    for &s in &states {
        for a in [-2, 0, 2] {
            for &t in &states {
                let forward: f64 = if step(s, a) == t { 1.0 } else { 0.0 };
                let backward = if step(flip(t), a) == flip(s) { 1.0 } else { 0.0 };
                let d = (forward - backward).abs();
                if d > worst {
                    worst = d;
                    witness = Some(format!("{s:?} {a} {t:?}"));
                }
            }
        }
    }
    (worst, witness)
}

#[test]
fn velocity_chain_matches_enumeration() {
    for hw in [2usize, 3, 4, 6] {
        for breaking in [false, true] {
            let (oracle, witness) = lattice_oracle(hw as i64, breaking);
            let report = check_darmdp(&build_velocity_chain(hw, breaking).unwrap(), DEFAULT_TOLERANCE).unwrap();
            assert_eq!(report.max_violation, oracle);
            if breaking {
                assert_eq!(oracle, 1.0);
                assert!(witness.unwrap().contains("Crash"));
            } else {
                assert_eq!(oracle, 0.0);
            }
        }
    }
}

#[test]
fn breaking_witness_touches_the_crash() {
    let mdp = build_velocity_chain(4, true).unwrap();
    let crash = mdp.n_states - 1;
    let w = check_darmdp(&mdp, DEFAULT_TOLERANCE).unwrap().witness.unwrap();
    assert!(w.state == crash || w.next_state == crash);
    assert_eq!(darmdp_residual(&mdp, w.state, w.action.unwrap(), w.next_state), 1.0);
}

#[test]
fn coasting_slice_is_dynamically_reversible() {
    let mdp = build_velocity_chain(4, false).unwrap();
    let slice = &mdp.kernel[COAST_ACTION];
    let n = mdp.n_states;
    let uniform = vec![1.0 / n as f64; n];
    let with_flip = check_dynamic_reversibility_with(slice, &uniform, &mdp.state_involution, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(with_flip.max_violation, 0.0);
    let identity: Vec<usize> = (0..n).collect();
    let without = check_dynamic_reversibility_with(slice, &uniform, &identity, DEFAULT_TOLERANCE).unwrap();
    assert!(!without.passed);
    assert_eq!(ACCELERATIONS[COAST_ACTION], 0);
}

fn random_kernel(n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| rng.uniform(0.05, 1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

#[test]
fn stationary_matches_linear_solve() {
    let mut rng = RngStream::new(31, 0);
    for n in [2, 3, 5, 8] {
        for _ in 0..20 {
            let k = random_kernel(n, &mut rng);
            // Solve (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
            let mut a = DMatrix::from_fn(n, n, |i, j| k[j][i] - if i == j { 1.0 } else { 0.0 });
            let mut b = DVector::zeros(n);
            for j in 0..n {
                a[(n - 1, j)] = 1.0;
            }
            b[n - 1] = 1.0;
            let exact = a.lu().solve(&b).unwrap();
            let pi = stationary_distribution(&k).unwrap();
            for i in 0..n {
                assert!((pi[i] - exact[i]).abs() < 1e-10, "{pi:?} vs {exact}");
            }
        }
    }
}

#[test]
fn birth_death_chains_are_reversible() {
    let mut rng = RngStream::new(32, 0);
    for n in 2..10 {
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            let up = if i + 1 < n { rng.uniform(0.05, 0.45) } else { 0.0 };
            let down = if i > 0 { rng.uniform(0.05, 0.45) } else { 0.0 };
            if i + 1 < n {
                k[i][i + 1] = up;
            }
            if i > 0 {
                k[i][i - 1] = down;
            }
            k[i][i] = 1.0 - up - down;
        }
        let r = check_detailed_balance(&k, DEFAULT_TOLERANCE).unwrap();
        assert!(r.passed, "n={n}: {}", r.max_violation);
    }
}

#[test]
fn permutation_without_flip_fails() {
    // Deterministic 3-cycle: forward arrows have no reverse under the identity.
    let k = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
    let r = check_dynamic_reversibility(&k, &[0, 1, 2], DEFAULT_TOLERANCE).unwrap();
    assert!(!r.passed);
    let pi = stationary_distribution(&k).unwrap();
    let w = r.witness.unwrap();
    assert_eq!(detailed_balance_residual(&k, &pi, w.state, w.next_state), r.max_violation);
}
