import math

import numpy as np
import pytest

from pushrl.env import (
    START_DEPTH,
    Action,
    EnvConfig,
    Goal,
    ModelState,
    PushEnv,
    Workspace,
    bearing,
    reward,
    reward_batch,
)
from pushrl.geometry import Pose2, wrap_angle
from pushrl.objects import get_object
from pushrl.rng import stream

SQ = get_object("square-0.075")


def make_env(seed=0, **cfg_kwargs):
    return PushEnv(EnvConfig(**cfg_kwargs), SQ.shape, SQ.slider, seed=seed)


def test_reset_invariants():
    env = make_env()
    obs, state = env.reset(seed=1)
    face_x = env.pusher.tip_radius - START_DEPTH
    assert env.pusher_pose == Pose2(0.0, 0.0, 0.0)
    assert env.contact.depth == pytest.approx(START_DEPTH)
    assert env.contact.point == pytest.approx((face_x, 0.0))
    # contact frame straight ahead of the pusher, aligned with it
    assert obs.x_po == pytest.approx(face_x)
    assert obs.y_po == pytest.approx(0.0, abs=1e-12)
    assert obs.theta_po == pytest.approx(0.0, abs=1e-12)
    assert state.x_o == pytest.approx(face_x)
    # -x face of the square starts exactly at the contact
    assert env.object_pose.x == pytest.approx(face_x + SQ.shape.inradius)


def test_goal_saved_and_observed():
    env = make_env()
    obs, state = env.reset(seed=1, goal=Goal(0.3, 0.1))
    assert env.goal == Goal(0.3, 0.1)
    frame_x = env.pusher.tip_radius - START_DEPTH
    assert obs.x_og == pytest.approx(0.3 - frame_x)
    assert obs.y_og == pytest.approx(0.1)
    assert obs.theta_og == pytest.approx(math.atan2(0.1, 0.3 - frame_x))


def test_sample_goal_stays_in_edge_band():
    env = make_env()
    gen = stream(3, "test-goals")
    ws = env.config.workspace
    w = env.config.goal_band_width
    for _ in range(500):
        g = env.sample_goal(gen)
        assert ws.contains(g.x, g.y)
        in_core = (ws.x_min + w < g.x < ws.x_max - w) and (ws.y_min + w < g.y < ws.y_max - w)
        assert not in_core


def test_reset_rejects_goal_outside_workspace():
    env = make_env()
    with pytest.raises(ValueError):
        env.reset(seed=0, goal=Goal(0.5, 0.0))


def test_reset_seed_reproducible():
    env = make_env()
    env.reset(seed=9)
    g1 = env.goal
    env.reset(seed=9)
    assert env.goal == g1
    env.reset()
    assert env.goal != g1  # stream advances without a reseed


def test_straight_push_succeeds():
    env = make_env()
    env.reset(seed=0, goal=Goal(0.35, 0.0))
    result = None
    for _ in range(env.config.max_steps):
        result = env.step(Action(0.0, 0.0))
        if result.terminated or result.failed or result.truncated:
            break
    assert result.terminated
    assert not result.failed and not result.truncated
    assert result.info["distance"] <= env.config.success_tolerance
    with pytest.raises(RuntimeError):
        env.step(Action(0.0, 0.0))


def test_constant_sideways_push_loses_contact():
    env = make_env()
    env.reset(seed=0, goal=Goal(0.35, 0.0))
    result = None
    for _ in range(env.config.max_steps):
        result = env.step(Action(0.001, 0.0))
        if result.terminated or result.failed or result.truncated:
            break
    assert result.failed and not result.terminated
    assert env.contact.depth <= 0.0


def test_contact_loss_ablation_keeps_running():
    env = make_env(contact_loss_terminates=False, max_steps=400)
    env.reset(seed=0, goal=Goal(0.35, 0.0))
    failed_any = False
    result = None
    for _ in range(400):
        result = env.step(Action(0.001, 0.0))
        failed_any = failed_any or result.failed
        if result.terminated or result.failed or result.truncated:
            break
    assert not failed_any
    assert result.truncated
    # the object stopped moving once the pusher came off it
    sep_steps = 0
    env2 = make_env(contact_loss_terminates=False, max_steps=400)
    env2.reset(seed=0, goal=Goal(0.35, 0.0))
    last_obj = env2.object_pose
    for _ in range(400):
        r = env2.step(Action(0.001, 0.0))
        if r.info["contact_mode"] == "Separated":
            sep_steps += 1
            assert env2.object_pose == last_obj
        last_obj = env2.object_pose
        if r.truncated:
            break
    assert sep_steps > 0


def test_truncation_at_step_budget():
    env = make_env(max_steps=5)
    env.reset(seed=0, goal=Goal(0.35, 0.0))
    for _ in range(4):
        r = env.step(Action(0.0, 0.0))
        assert not (r.terminated or r.failed or r.truncated)
    r = env.step(Action(0.0, 0.0))
    assert r.truncated and not r.terminated and not r.failed


def test_actions_are_clamped():
    a = make_env()
    b = make_env()
    a.reset(seed=0, goal=Goal(0.3, 0.1))
    b.reset(seed=0, goal=Goal(0.3, 0.1))
    ra = a.step(Action(0.5, 2.0))
    rb = b.step(Action(a.config.dy_max, a.config.dtheta_max))
    assert ra.model_state.as_array() == pytest.approx(rb.model_state.as_array(), abs=0)
    assert ra.reward == rb.reward


def test_deterministic_step_sequence():
    gen = stream(5, "actions")
    acts = [Action(float(d), float(t)) for d, t in
            zip(gen.uniform(-0.001, 0.001, 200), gen.uniform(-0.017, 0.017, 200))]

    def run():
        env = make_env()
        env.reset(seed=4, goal=Goal(0.3, -0.05))
        out = []
        for act in acts:
            r = env.step(act)
            out.append(np.concatenate([r.model_state.as_array(), [r.reward]]))
            if r.terminated or r.failed or r.truncated:
                break
        return np.array(out)

    first, second = run(), run()
    assert first.shape == second.shape
    assert np.array_equal(first, second)  # bit-identical


def test_model_state_is_goal_free():
    acts = [Action(0.0005, 0.002)] * 50
    outs = []
    for goal in (Goal(0.35, 0.0), Goal(0.05, 0.28)):
        env = make_env()
        env.reset(seed=0, goal=goal)
        states = []
        for act in acts:
            r = env.step(act)
            states.append(r.model_state.as_array())
        outs.append(np.array(states))
    assert np.array_equal(outs[0], outs[1])


def test_model_state_pusher_pose_round_trip():
    env = make_env()
    env.reset(seed=2, goal=Goal(0.3, 0.1))
    gen = stream(6, "acts")
    for _ in range(30):
        r = env.step(Action(float(gen.uniform(-0.001, 0.001)),
                            float(gen.uniform(-0.017, 0.017))))
        p = r.model_state.pusher_pose()
        assert p.x == pytest.approx(env.pusher_pose.x, abs=1e-12)
        assert p.y == pytest.approx(env.pusher_pose.y, abs=1e-12)
        assert wrap_angle(p.theta - env.pusher_pose.theta) == pytest.approx(0.0, abs=1e-12)


def test_model_state_array_round_trip():
    s = ModelState(0.1, -0.2, 0.3, 0.4, 0.5, -0.6)
    assert ModelState.from_array(s.as_array()) == s


def test_reward_zones():
    cfg = EnvConfig()
    goal = Goal(0.3, 0.0)
    # far zone: aligned everything gives zero penalty regardless of distance
    frame = Pose2(0.0, 0.0, 0.0)
    assert reward(frame, 0.0, goal, cfg) == pytest.approx(0.0)
    # near zone: distance term dominates
    frame = Pose2(0.25, 0.0, 0.0)
    assert reward(frame, 0.0, goal, cfg) == pytest.approx(-0.05)
    # misaligned pusher always penalized
    frame = Pose2(0.25, 0.0, 0.0)
    assert reward(frame, math.pi / 2.0, goal, cfg) == pytest.approx(-(0.05 + 1.0))


def test_reward_far_zone_monotone_in_bearing_error():
    cfg = EnvConfig()
    goal = Goal(0.3, 0.0)
    prev = None
    for deg in range(0, 181):
        frame = Pose2(0.0, 0.0, math.radians(deg))
        r = reward(frame, frame.theta, goal, cfg)
        if prev is not None:
            assert r <= prev + 1e-15
        prev = r


def test_reward_batch_matches_scalar():
    cfg = EnvConfig()
    goal = Goal(0.22, -0.13)
    gen = stream(8, "reward")
    states = np.column_stack([
        gen.uniform(-0.05, 0.05, 300),
        gen.uniform(-0.05, 0.05, 300),
        gen.uniform(-math.pi, math.pi, 300),
        gen.uniform(0.0, 0.4, 300),
        gen.uniform(-0.3, 0.3, 300),
        gen.uniform(-math.pi, math.pi, 300),
    ])
    batch = reward_batch(states, goal, cfg)
    for i in range(300):
        frame = Pose2(states[i, 3], states[i, 4], states[i, 5])
        pusher_theta = states[i, 5] - states[i, 2]
        assert batch[i] == pytest.approx(reward(frame, pusher_theta, goal, cfg), abs=1e-12)


def test_bearing_coincident_is_zero():
    assert bearing((0.1, 0.2), (0.1, 0.2)) == 0.0


def test_disturbed_reset_keeps_contact():
    offset = math.radians(20.0)
    env = PushEnv(EnvConfig(), SQ.shape, SQ.slider, seed=0, contact_angle_offset=offset)
    env.reset(seed=0, goal=Goal(0.3, 0.0))
    face_x = env.pusher.tip_radius - START_DEPTH
    expect_depth = env.pusher.tip_radius - face_x * math.cos(offset)
    assert env.contact.depth == pytest.approx(expect_depth, abs=1e-12)
    assert env.object_pose.theta == pytest.approx(offset)


def test_env_config_validation_and_round_trip():
    cfg = EnvConfig(max_steps=77, dy_max=0.0008)
    back = EnvConfig.from_dict(cfg.to_dict())
    assert back == cfg
    with pytest.raises(ValueError):
        EnvConfig.from_dict({**cfg.to_dict(), "bogus": 1})
    with pytest.raises(ValueError):
        EnvConfig(success_tolerance=-1.0)
    with pytest.raises(ValueError):
        EnvConfig(dx_fixed=0.002, dy_max=0.0015)  # per-step motion above 2 mm
    with pytest.raises(ValueError):
        EnvConfig(max_steps=0)


def test_workspace_contains():
    ws = Workspace(0.0, 0.4, -0.3, 0.3)
    assert ws.contains(0.2, 0.0)
    assert ws.contains(0.0, -0.3)
    assert not ws.contains(-0.01, 0.0)
    assert not ws.contains(0.2, 0.31)


def test_success_cannot_be_overridden_by_contact_loss():
    # reward/termination read the post-step frame; drive to the goal and make
    # sure the success flag wins on the final step even if depth dips
    env = make_env()
    env.reset(seed=0, goal=Goal(0.35, 0.0))
    last = None
    for _ in range(env.config.max_steps):
        last = env.step(Action(0.0, 0.0))
        if last.terminated or last.failed or last.truncated:
            break
    assert last.terminated and not last.failed
