"""Fast end-to-end verification suite (also exposed as `pushrl selfcheck`).

Each check returns (name, passed, detail). The whole suite is sized to run in
well under a minute on one core.
"""

from __future__ import annotations

import math
import os
import tempfile

import numpy as np

from . import rng as rng_mod
from .autodiff import Tensor, concat, minimum
from .checkpoint import load_checkpoint, save_checkpoint
from .env import Action, EnvConfig, Goal, PushEnv, reward
from .geometry import Pose2, rotate, wrap_angle
from .networks import Mlp, gaussian_head, gaussian_nll
from .objects import load_object_library
from .physics import Contact, ContactMode, SliderParams, quasi_static_solve, quasi_static_step
from .planning import CemConfig, MppiConfig, cem_optimize, mppi_optimize


# -- randomized physics cases ----------------------------------------------------


def random_solve_case(gen: np.random.Generator, approach: bool = True) -> dict:
    """A random well-posed quasi-static solve: contact, slider, motion.

    The solver is shape-free (it consumes the contact directly), so cases are
    built from a random contact point/normal and a random COF.
    """
    pose = Pose2(gen.uniform(-0.2, 0.4), gen.uniform(-0.3, 0.3), gen.uniform(-math.pi, math.pi))
    # contact somewhere near the object origin with a unit normal
    ang = gen.uniform(-math.pi, math.pi)
    nx, ny = math.cos(ang), math.sin(ang)  # outward normal (toward pusher)
    lever = gen.uniform(0.005, 0.055)
    off = gen.uniform(-0.04, 0.04)
    px = pose.x + lever * nx - off * ny
    py = pose.y + lever * ny + off * nx
    depth = gen.uniform(0.0005, 0.003)
    contact = Contact(
        point=(px, py), normal=(nx, ny), depth=depth, edge_index=0, mode=ContactMode.STICKING
    )
    slider = SliderParams(
        mu_contact=gen.uniform(0.15, 0.6),
        c_ls=gen.uniform(0.02, 0.05),
        cof_offset=(gen.uniform(-0.01, 0.01), gen.uniform(-0.01, 0.01)),
    )
    pusher_pose = Pose2(
        px + (0.005 - depth) * nx, py + (0.005 - depth) * ny, gen.uniform(-math.pi, math.pi)
    )
    while True:
        r = gen.uniform(0.0, 0.002)
        a = gen.uniform(-math.pi, math.pi)
        dx, dy = r * math.cos(a), r * math.sin(a)
        ux, uy = rotate(pusher_pose.theta, dx, dy)
        un = -(ux * nx + uy * ny)  # inward normal is -(outward)
        if not approach:
            break
        if un > 1e-6:
            break
    dth = gen.uniform(-math.pi / 180.0, math.pi / 180.0)
    return {
        "object_pose": pose,
        "slider": slider,
        "contact": contact,
        "motion": (dx, dy, dth),
        "pusher_pose": pusher_pose,
    }


def solve_case(case: dict):
    return quasi_static_solve(
        case["object_pose"], case["slider"], case["contact"], case["motion"], case["pusher_pose"]
    )


def mirror_case(case: dict) -> dict:
    """Reflect a solve case across the x axis."""
    p, c, s = case["pusher_pose"], case["contact"], case["slider"]
    o = case["object_pose"]
    dx, dy, dth = case["motion"]
    return {
        "object_pose": Pose2(o.x, -o.y, -o.theta),
        "slider": SliderParams(s.mu_contact, s.c_ls, (s.cof_offset[0], -s.cof_offset[1])),
        "contact": Contact(
            point=(c.point[0], -c.point[1]),
            normal=(c.normal[0], -c.normal[1]),
            depth=c.depth,
            edge_index=c.edge_index,
            mode=c.mode,
        ),
        "motion": (dx, -dy, -dth),
        "pusher_pose": Pose2(p.x, -p.y, -p.theta),
    }


_MIRROR_MODE = {
    ContactMode.STICKING: ContactMode.STICKING,
    ContactMode.SEPARATED: ContactMode.SEPARATED,
    ContactMode.SLIDING_LEFT: ContactMode.SLIDING_RIGHT,
    ContactMode.SLIDING_RIGHT: ContactMode.SLIDING_LEFT,
}


def check_physics_invariants(cases: int = 10_000, seed: int = 2024) -> tuple[bool, str]:
    gen = rng_mod.stream(seed, "physics-cases")
    worst_vel = worst_cone = 0.0
    for i in range(cases):
        case = random_solve_case(gen)
        sol = solve_case(case)
        c = case["contact"]
        nx, ny = -c.normal[0], -c.normal[1]
        tx, ty = -ny, nx
        dx, dy, _ = case["motion"]
        ux, uy = rotate(case["pusher_pose"].theta, dx, dy)
        if sol.mode is ContactMode.SEPARATED:
            if ux * nx + uy * ny > 1e-9:
                return False, f"case {i}: approaching motion reported Separated"
            continue
        fx, fy = sol.force
        fn = fx * nx + fy * ny
        ft = fx * tx + fy * ty
        mu = case["slider"].mu_contact
        worst_cone = max(worst_cone, -fn, abs(ft) - mu * fn - 1e-12)
        if fn <= 0.0 or abs(ft) > mu * fn + 1e-9:
            return False, f"case {i}: force outside the friction cone (fn={fn:.3e}, ft={ft:.3e})"
        cof = case["object_pose"].transform(*case["slider"].cof_offset)
        rx, ry = c.point[0] - cof[0], c.point[1] - cof[1]
        vx, vy, om = sol.twist
        cvx = vx - om * ry
        cvy = vy + om * rx
        if sol.mode is ContactMode.STICKING:
            err = math.hypot(cvx - ux, cvy - uy)
            worst_vel = max(worst_vel, err)
            if err > 1e-9:
                return False, f"case {i}: sticking contact velocity mismatch {err:.2e}"
        else:
            sigma = 1.0 if sol.mode is ContactMode.SLIDING_LEFT else -1.0
            if abs(ft - sigma * mu * fn) > 1e-9 * max(1.0, abs(fn)):
                return False, f"case {i}: sliding force not on the cone edge"
            if (cvx * nx + cvy * ny) - (ux * nx + uy * ny) > 1e-9:
                return False, f"case {i}: sliding normal velocity mismatch"
            if sol.slip * sigma < -1e-12:
                return False, f"case {i}: slip direction contradicts the sliding mode"
    return True, f"{cases} cases; worst velocity residual {worst_vel:.2e}"


def check_physics_mirror(cases: int = 10_000, seed: int = 2025) -> tuple[bool, str]:
    gen = rng_mod.stream(seed, "mirror-cases")
    for i in range(cases):
        case = random_solve_case(gen)
        sol = solve_case(case)
        msol = solve_case(mirror_case(case))
        if msol.mode is not _MIRROR_MODE[sol.mode]:
            return False, f"case {i}: mirror mode {msol.mode} != {_MIRROR_MODE[sol.mode]}"
        vx, vy, om = sol.twist
        mvx, mvy, mom = msol.twist
        err = max(abs(mvx - vx), abs(mvy + vy), abs(mom + om))
        if err > 1e-12:
            return False, f"case {i}: mirrored twist differs by {err:.2e}"
    return True, f"{cases} cases mirrored exactly"


def check_physics_no_pull(cases: int = 10_000, seed: int = 2026) -> tuple[bool, str]:
    gen = rng_mod.stream(seed, "pull-cases")
    tested = 0
    for i in range(cases):
        case = random_solve_case(gen, approach=False)
        c = case["contact"]
        dx, dy, _ = case["motion"]
        ux, uy = rotate(case["pusher_pose"].theta, dx, dy)
        if ux * (-c.normal[0]) + uy * (-c.normal[1]) > 0.0:
            continue  # approaching; covered elsewhere
        tested += 1
        pose, mode = quasi_static_step(
            case["object_pose"], case["slider"], c, case["motion"], case["pusher_pose"]
        )
        if mode is not ContactMode.SEPARATED or pose != case["object_pose"]:
            return False, f"case {i}: withdrawing motion moved the object"
    return True, f"{tested} withdrawing motions left the object untouched"


def check_physics_zero_rotation(cases: int = 10_000, seed: int = 2027) -> tuple[bool, str]:
    gen = rng_mod.stream(seed, "axial-cases")
    for i in range(cases):
        pose = Pose2(gen.uniform(-0.2, 0.4), gen.uniform(-0.3, 0.3), gen.uniform(-math.pi, math.pi))
        ang = gen.uniform(-math.pi, math.pi)
        nx, ny = math.cos(ang), math.sin(ang)
        lever = gen.uniform(0.005, 0.05)
        px, py = pose.x + lever * nx, pose.y + lever * ny  # COF directly behind the contact
        contact = Contact((px, py), (nx, ny), gen.uniform(0.001, 0.003), 0, ContactMode.STICKING)
        slider = SliderParams(
            mu_contact=gen.uniform(0.15, 0.6), c_ls=gen.uniform(0.02, 0.05), cof_offset=(0.0, 0.0)
        )
        heading = gen.uniform(-math.pi, math.pi)
        mag = gen.uniform(1e-4, 0.002)
        dx, dy = rotate(-heading, -mag * nx, -mag * ny)  # push straight along the inward normal
        sol = quasi_static_solve(pose, slider, contact, (dx, dy, 0.0), Pose2(px, py, heading))
        if sol.mode is not ContactMode.STICKING:
            return False, f"case {i}: normal push through the COF should stick"
        if abs(sol.twist[2]) > 1e-12:
            return False, f"case {i}: normal push through the COF rotated by {sol.twist[2]:.2e}"
        cross = sol.twist[0] * (-ny) - (-nx) * sol.twist[1]
        if abs(cross) > 1e-12:
            return False, f"case {i}: translation not along the push direction"
    return True, f"{cases} centered pushes translated without rotation"


# -- other checks -----------------------------------------------------------------


def check_gradients(pairs: int = 100, seed: int = 7, tol: float = 1e-4) -> tuple[bool, str]:
    """Autodiff vs central finite differences over random small nets."""
    gen = rng_mod.stream(seed, "gradcheck")
    worst = 0.0
    h = 1e-5

    def fd(loss_fn, params):
        for p in params:
            flat = p.data.ravel()
            g = np.empty_like(flat)
            for j in range(flat.size):
                old = flat[j]
                flat[j] = old + h
                fp = loss_fn()
                flat[j] = old - h
                fm = loss_fn()
                flat[j] = old
                g[j] = (fp - fm) / (2.0 * h)
            yield g.reshape(p.data.shape)

    for i in range(pairs):
        kind = i % 4
        act = "tanh" if (i // 4) % 2 == 0 else "relu"
        din = int(gen.integers(2, 5))
        dout = int(gen.integers(1, 4))
        width = int(gen.integers(4, 9))
        batch = int(gen.integers(2, 6))
        x = gen.standard_normal((batch, din))
        if kind == 0:  # plain MLP, mean square output
            net = Mlp([din, width, dout], activation=act, rng=gen)
            loss = lambda: float((net.forward(Tensor(x)) ** 2).mean().data)
            out = (net.forward(Tensor(x)) ** 2).mean()
            params = net.parameters()
        elif kind == 1:  # Gaussian NLL
            net = Mlp([din, width, 2 * dout], activation=act, rng=gen)
            t = gen.standard_normal((batch, dout))
            loss = lambda: float(gaussian_nll(gaussian_head(net.forward(Tensor(x))), t).data)
            out = gaussian_nll(gaussian_head(net.forward(Tensor(x))), t)
            params = net.parameters()
        elif kind == 2:  # actor-style: tanh sample, entropy-ish loss
            net = Mlp([din, width, 2 * dout], activation=act, rng=gen)
            eps = gen.standard_normal((batch, dout))

            def actor_loss(net=net, x=x, eps=eps, dout=dout):
                o = net.forward(Tensor(x))
                mu, ls = o[:, :dout], o[:, dout:].clamp(-5.0, 2.0)
                z = mu + ls.exp() * eps
                a = z.tanh()
                return (a * a).mean() + (ls * 0.1).sum() + ((z * -2.0).softplus()).mean()

            loss = lambda: float(actor_loss().data)
            out = actor_loss()
            params = net.parameters()
        else:  # twin-critic minimum with concatenated input
            q1 = Mlp([din + dout, width, 1], activation=act, rng=gen)
            q2 = Mlp([din + dout, width, 1], activation=act, rng=gen)
            a = gen.standard_normal((batch, dout))

            def critic_loss(q1=q1, q2=q2, x=x, a=a):
                q = minimum(q1.forward(concat([Tensor(x), Tensor(a)], axis=1)),
                            q2.forward(concat([Tensor(x), Tensor(a)], axis=1)))
                return (q * q).mean()

            loss = lambda: float(critic_loss().data)
            out = critic_loss()
            params = q1.parameters() + q2.parameters()
        out.backward()
        for p, g in zip(params, fd(loss, params)):
            rel = np.abs(p.grad - g) / np.maximum(np.maximum(np.abs(g), np.abs(p.grad)), 1e-3)
            worst = max(worst, float(rel.max()))
        if worst > tol:
            return False, f"pair {i}: relative gradient error {worst:.2e} > {tol}"
    return True, f"{pairs} net/loss pairs; worst relative error {worst:.2e}"


def check_reward_algebra(cases: int = 1000, seed: int = 11) -> tuple[bool, str]:
    """Package reward vs an independently written twin of the contract."""
    gen = rng_mod.stream(seed, "reward")
    cfg = EnvConfig()

    def oracle(cx, cy, cth, pth, gx, gy):
        d = math.sqrt((gx - cx) ** 2 + (gy - cy) ** 2)
        misalign = 1.0 - math.cos(pth - cth)
        if d > cfg.approach_distance:
            aim = math.atan2(gy - cy, gx - cx)
            return -((1.0 - math.cos(cth - aim)) + misalign)
        return -(d + misalign)

    worst = 0.0
    for i in range(cases):
        cx, cy = gen.uniform(0, 0.4), gen.uniform(-0.3, 0.3)
        cth, pth = gen.uniform(-math.pi, math.pi), gen.uniform(-math.pi, math.pi)
        gx, gy = gen.uniform(0, 0.4), gen.uniform(-0.3, 0.3)
        got = reward(Pose2(cx, cy, cth), pth, Goal(gx, gy), cfg)
        want = oracle(cx, cy, cth, pth, gx, gy)
        worst = max(worst, abs(got - want))
        if worst > 1e-12:
            return False, f"case {i}: reward differs by {worst:.2e}"
    # boundary and degenerate cases
    for d in (cfg.approach_distance - 1e-9, cfg.approach_distance, cfg.approach_distance + 1e-9):
        got = reward(Pose2(0.1, 0.0, 0.0), 0.0, Goal(0.1 + d, 0.0), cfg)
        want = oracle(0.1, 0.0, 0.0, 0.0, 0.1 + d, 0.0)
        if abs(got - want) > 1e-12:
            return False, f"zone boundary mismatch at distance {d}"
    if abs(reward(Pose2(0.2, 0.1, 0.3), 0.3, Goal(0.2, 0.1), cfg)) > 1e-12:
        return False, "coincident goal should score 0 at perfect alignment"
    return True, f"{cases} cases within 1e-12 (worst {worst:.2e})"


def check_cem_quadratic(seed: int = 21) -> tuple[bool, str]:
    target = np.array([0.31, -0.62])

    def objective(batch):
        return -((batch - target) ** 2).sum(axis=(1, 2))

    cfg = CemConfig(horizon=5, population=500, elites=50, iterations=10, alpha=0.1,
                    low=(-1.0, -1.0), high=(1.0, 1.0))
    plan, info = cem_optimize(objective, cfg, rng_mod.stream(seed, "cem"))
    err = float(np.abs(plan - target).max())
    curve = info["elite_mean_returns"]
    monotone = all(b >= a - 1e-9 for a, b in zip(curve, curve[1:]))
    if err > 1e-2:
        return False, f"CEM missed the optimum by {err:.3e}"
    if not monotone:
        return False, f"elite mean returns not monotone: {curve}"
    return True, f"optimum recovered to {err:.1e}; elite returns monotone over {len(curve)} iters"


def check_mppi_quadratic(seed: int = 22) -> tuple[bool, str]:
    target = np.array([0.31, -0.62])

    def objective(batch):
        return -((batch - target) ** 2).sum(axis=(1, 2))

    cfg = MppiConfig(horizon=5, samples=1000, iterations=8, temperature=0.05,
                     sigma=(0.5, 0.5), sigma_decay=0.6, low=(-1.0, -1.0), high=(1.0, 1.0))
    plan, _ = mppi_optimize(objective, cfg, rng_mod.stream(seed, "mppi"))
    err = float(np.abs(plan - target).max())
    if err > 5e-2:
        return False, f"MPPI missed the optimum by {err:.3e}"
    return True, f"optimum recovered to {err:.1e}"


def check_env_determinism(seed: int = 31) -> tuple[bool, str]:
    lib = load_object_library()
    spec = lib["square-0.075"]

    def run():
        env = PushEnv(EnvConfig(), spec.shape, spec.slider, seed=seed)
        obs, state = env.reset(seed=seed)
        gen = rng_mod.stream(seed, "actions")
        trace = [tuple(state.as_array())]
        for _ in range(200):
            a = Action(float(gen.uniform(-1e-3, 1e-3)), float(gen.uniform(-0.017, 0.017)))
            res = env.step(a)
            trace.append((res.reward, *res.model_state.as_array()))
            if res.terminated or res.failed or res.truncated:
                break
        return trace

    a, b = run(), run()
    if a != b:
        return False, "two identical runs diverged"
    return True, f"{len(a)} steps bit-identical across reruns"


def check_checkpoint_roundtrip(seed: int = 41) -> tuple[bool, str]:
    gen = rng_mod.stream(seed, "ckpt")
    arrays = [gen.standard_normal((3, 4)), gen.standard_normal(7), np.array(2.5)]
    meta = {"kind": "test", "note": "roundtrip"}
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.ckpt")
        save_checkpoint(path, meta, arrays)
        meta2, arrays2 = load_checkpoint(path)
        with open(path, "rb") as f:
            blob1 = f.read()
        save_checkpoint(path, meta2, arrays2)
        with open(path, "rb") as f:
            blob2 = f.read()
    if meta2 != meta:
        return False, "meta changed in round trip"
    if any(not np.array_equal(a, b) for a, b in zip(arrays, arrays2)):
        return False, "arrays changed in round trip"
    if blob1 != blob2:
        return False, "re-saving a loaded checkpoint changed its bytes"
    return True, "bit-exact round trip"


ALL_CHECKS = [
    ("gradients-vs-finite-differences", check_gradients),
    ("physics-sticking-and-cone", check_physics_invariants),
    ("physics-mirror-symmetry", check_physics_mirror),
    ("physics-no-pull", check_physics_no_pull),
    ("physics-centered-push", check_physics_zero_rotation),
    ("reward-algebra", check_reward_algebra),
    ("cem-quadratic", check_cem_quadratic),
    ("mppi-quadratic", check_mppi_quadratic),
    ("env-determinism", check_env_determinism),
    ("checkpoint-roundtrip", check_checkpoint_roundtrip),
]


def run_selfcheck(out=None) -> bool:
    ok = True
    for name, fn in ALL_CHECKS:
        passed, detail = fn()
        ok = ok and passed
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        if out is not None:
            print(line, file=out)
        else:
            print(line)
    return ok
