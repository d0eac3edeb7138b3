"""Smoke test for the revrl_py extension.

Build and install it first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/*.whl
"""

import math

import revrl_py as rv


def check_envs():
    assert "pendulum" in rv.env_names and "velocity-chain" in rv.env_names
    env = rv.Env("cartpole", [("friction_multiplier", 0.0)])
    assert (env.dof, env.action_dim, env.observation_dim) == (2, 1, 5)
    s = env.reset(0)
    assert env.reset(0) == s
    nxt, reward, terminal = env.step(s, [0.5])
    assert 0.0 <= reward <= 1.0 and not terminal
    assert env.conjugate(env.conjugate(nxt)) == nxt
    c_state, c_action, c_reward, c_next, c_terminal = env.conjugate_transition(s, [0.5], nxt)
    assert c_state == env.conjugate(nxt) and c_next == env.conjugate(s)
    assert c_action == [0.5] and c_reward == env.reward(c_next) and not c_terminal
    assert env.round_trip_defect(s, [[0.3]] * 50) < 1e-5
    pend = rv.Env("pendulum")
    assert pend.round_trip_defect(pend.reset(3), [[1.0], [-0.5]] * 50) < 1e-9
    try:
        rv.Env("pendulum", [("pole_mass", 1.0)])
    except ValueError as e:
        assert "pole_mass" in str(e)
    else:
        raise AssertionError("foreign override accepted")


def check_reversibility():
    pi = rv.stationary_distribution([[0.5, 0.5], [0.1, 0.9]])
    assert abs(pi[0] - 1 / 6) < 1e-12 and abs(pi[1] - 5 / 6) < 1e-12
    assert rv.check_detailed_balance([[0.5, 0.5], [0.1, 0.9]]).passed
    cycle = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]
    report = rv.check_dynamic_reversibility(cycle, [0, 2, 1])
    assert report.passed and report.max_violation == 0.0
    assert not rv.check_dynamic_reversibility(cycle, [0, 1, 2]).passed
    lines = rv.verify_velocity_chain()
    assert lines[0].startswith("CHECK darmdp passed max_violation=0e0")
    broken = rv.verify_velocity_chain(breaking=True)
    assert "max_violation=1e0" in broken[0] and "crash" in broken[0]


def check_training():
    assert rv.capacity_for(1000, True) == 2000 and rv.capacity_for(1000, False) == 1000
    config = """
[env]
name = "pendulum"
[run]
total_env_steps = 1000
eval_interval = 500
eval_episodes = 1
warmup_env_steps = 200
tsda = true
record_wall_clock = false
[learner]
hidden_sizes = [8, 8]
"""
    out = rv.train(config, 0)
    assert out.failure is None and out.buffer_len == 2000
    assert [r.env_step for r in out.rows] == [500, 1000]
    again = rv.train(config, 0)
    assert [r.mean_return for r in again.rows] == [r.mean_return for r in out.rows]
    mean, std = out.policy.evaluate(rv.Env("pendulum"), episodes=2)
    assert math.isfinite(mean) and std >= 0.0
    action = out.policy.act([1.0, 0.0, 0.0])
    assert len(action) == 1 and abs(action[0]) < 1.0
    try:
        rv.train(config.replace("[learner]", "[learner]\nbogus = 1"), 0)
    except ValueError as e:
        assert "learner.bogus" in str(e)
    else:
        raise AssertionError("unknown key accepted")


if __name__ == "__main__":
    check_envs()
    check_reversibility()
    check_training()
    print("smoke test passed")
