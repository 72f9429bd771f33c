"""Command line interface: train, eval, rollout, plot, selfcheck.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime
failure (including selfcheck failures), 4 missing input file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import rng as rng_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .ensemble import ensemble_arrays, ensemble_meta
from .env import EnvConfig, Goal, PushEnv
from .harness import (
    ScenarioSpec,
    build_agent,
    build_env,
    export_results,
    import_results,
    run_scenario,
    scenario_goals,
)
from .objects import get_object, load_object_library
from .pets import PetsConfig, PetsLogRow, pets_train
from .planning import CemConfig, planner_config_from_dict, planner_config_to_dict
from .plotting import render_svg
from .sac import SacConfig, SacLogRow, policy_arrays, policy_meta, sac_train
from .selfcheck import run_selfcheck

ENV_SEED_VAR = "PUSHRL_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Training run description; the JSON schema mirrors the field names."""

    seed: int = 0
    object: str = "square-0.075"
    agent: str = "mb"
    total_env_steps: int | None = None  # overrides the per-agent default budget
    env: dict = field(default_factory=dict)
    pets: dict = field(default_factory=dict)
    sac: dict = field(default_factory=dict)
    planner: dict | None = None

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except FileNotFoundError:
            raise
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(
                f"{path}: unknown fields: {', '.join(sorted(unknown))}; known: {', '.join(sorted(known))}"
            )
        cfg = cls(**data)
        cfg.validate(path)
        return cfg

    def validate(self, source: str = "config") -> None:
        if self.agent not in ("mb", "mf"):
            raise ConfigError(f"{source}: agent must be 'mb' or 'mf', got {self.agent!r}")
        for section, builder in (
            ("env", self._env_config),
            ("pets", self._pets_config),
            ("sac", self._sac_config),
        ):
            try:
                builder()
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{source}: {section}: {exc}") from exc
        if self.planner is not None:
            try:
                self.planner_config(self._env_config())
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{source}: planner: {exc}") from exc

    def _env_config(self) -> EnvConfig:
        base = EnvConfig().to_dict()
        base.update(self.env)
        return EnvConfig.from_dict(base)

    def _pets_config(self) -> PetsConfig:
        data = dict(self.pets)
        if self.total_env_steps is not None:
            data["total_env_steps"] = self.total_env_steps
        return PetsConfig.from_dict(data)

    def _sac_config(self) -> SacConfig:
        return SacConfig.from_dict(self.sac)

    def planner_config(self, env_config: EnvConfig):
        if self.planner is None:
            return CemConfig.from_env(env_config)
        data = dict(self.planner)
        kind = data.pop("kind", "cem")
        lo = (-env_config.dy_max, -env_config.dtheta_max)
        hi = (env_config.dy_max, env_config.dtheta_max)
        data.setdefault("low", list(lo))
        data.setdefault("high", list(hi))
        return planner_config_from_dict({"kind": kind, **data})


def _resolve_seed(args, config_seed: int) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env_seed = os.environ.get(ENV_SEED_VAR)
    if env_seed is not None:
        try:
            return int(env_seed)
        except ValueError:
            raise ConfigError(f"{ENV_SEED_VAR} must be an integer, got {env_seed!r}")
    return config_seed


def _write_lines(path: Path, header: str, rows) -> None:
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(row.to_csv() + "\n")


def cmd_train(args) -> int:
    config = RunConfig.from_file(args.config)
    seed = _resolve_seed(args, config.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env_config = config._env_config()
    obj = get_object(config.object)

    def env_factory():
        return PushEnv(env_config, obj.shape, obj.slider, seed=seed)

    if args.steps is not None:
        config.total_env_steps = args.steps

    if config.agent == "mb":
        pets_config = config._pets_config()
        planner = config.planner_config(env_config)
        ensemble, rows = pets_train(env_factory, pets_config, planner, seed)
        save_checkpoint(out / "ensemble.ckpt", ensemble_meta(ensemble), ensemble_arrays(ensemble))
        (out / "planner.json").write_text(
            json.dumps(planner_config_to_dict(planner), indent=1, sort_keys=True) + "\n"
        )
        _write_lines(out / "training_log.csv", PetsLogRow.CSV_HEADER, rows)
        recent = rows[-10:]
        rate = sum(r.success for r in recent) / len(recent)
        print(f"trained mb agent: {rows[-1].env_steps} env steps, "
              f"success rate over last {len(recent)} episodes: {rate:.2f}")
    else:
        sac_config = config._sac_config()
        budget = config.total_env_steps if config.total_env_steps is not None else 100_000
        agent, rows = sac_train(env_factory, sac_config, budget, seed)
        save_checkpoint(out / "policy.ckpt", policy_meta(agent), policy_arrays(agent))
        _write_lines(out / "training_log.csv", SacLogRow.CSV_HEADER, rows)
        evals = [r for r in rows if r.kind == "eval"]
        if evals:
            print(f"trained mf agent: {budget} env steps, "
                  f"last eval success rate: {evals[-1].success_rate:.2f}")
        else:
            print(f"trained mf agent: {budget} env steps (no eval interval reached)")
    (out / "config.json").write_text(
        json.dumps({**{f.name: getattr(config, f.name) for f in fields(RunConfig)},
                    "seed": seed}, indent=1, sort_keys=True) + "\n"
    )
    return 0


def _spec_from_args(args) -> ScenarioSpec:
    if args.scenario is not None:
        try:
            data = json.loads(Path(args.scenario).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.scenario}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        try:
            spec = ScenarioSpec.from_dict(data)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{args.scenario}: {exc}") from exc
    else:
        grid = None
        if args.grid is not None:
            grid = {"counts": args.grid, "min_distance": args.min_distance}
        spec = ScenarioSpec(
            name=args.name,
            object=args.object,
            agent=args.agent,
            checkpoint=args.checkpoint,
            grid=grid,
            trials=args.trials,
            seed=0,
        )
    if getattr(args, "seed", None) is not None or os.environ.get(ENV_SEED_VAR) is not None:
        spec = ScenarioSpec.from_dict({**spec.to_dict(), "seed": _resolve_seed(args, spec.seed)})
    if getattr(args, "checkpoint", None) and spec.checkpoint != args.checkpoint:
        spec = ScenarioSpec.from_dict({**spec.to_dict(), "checkpoint": args.checkpoint})
    return spec


def cmd_eval(args) -> int:
    spec = _spec_from_args(args)
    if spec.agent in ("mb", "mf") and spec.checkpoint is None:
        raise ConfigError(f"agent {spec.agent!r} needs --checkpoint")

    done = 0

    def progress(log):
        nonlocal done
        done += 1
        if args.verbose:
            print(f"episode {log.episode_id}: {log.status} in {log.n_steps} steps "
                  f"(return {log.episode_return:.2f})")

    logs, stats = run_scenario(spec, progress=progress)
    print(f"{spec.name}: {stats.episodes} episodes, success rate {stats.success_rate:.3f}, "
          f"mean return {stats.mean_return:.2f}")
    if args.out is not None:
        out = Path(args.out)
        export_results(out, spec, logs, stats)
        env = build_env(spec)
        goals = scenario_goals(spec, env)
        render_svg(logs, goals, env.config.workspace, out / "trajectories.svg")
        print(f"results written to {out}")
    return 0


def cmd_rollout(args) -> int:
    spec = ScenarioSpec(
        name="rollout",
        object=args.object,
        agent=args.agent,
        checkpoint=args.checkpoint,
        goals=((args.goal[0], args.goal[1]),),
        trials=1,
        seed=_resolve_seed(args, 0),
    )
    logs, stats = run_scenario(spec)
    log = logs[0]
    print(f"goal ({args.goal[0]:.3f}, {args.goal[1]:.3f}): {log.status} "
          f"in {log.n_steps} steps, return {log.episode_return:.2f}")
    if args.out is not None:
        out = Path(args.out)
        export_results(out, spec, logs, stats)
        env = build_env(spec)
        render_svg(logs, [Goal(*g) for g in spec.goals], env.config.workspace,
                   out / "trajectories.svg")
        print(f"results written to {out}")
    return 0


def cmd_plot(args) -> int:
    spec, logs, _ = import_results(args.results)
    env = build_env(spec)
    goals = scenario_goals(spec, env)
    render_svg(logs, goals, env.config.workspace, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_selfcheck(args) -> int:
    ok = run_selfcheck()
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pushrl", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train an agent from a run config")
    t.add_argument("--config", required=True, help="run config JSON")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--steps", type=int, default=None, help="override the env-step budget")
    t.add_argument("--threads", type=int, default=1,
                   help="worker cap (runs are serial; kept for interface stability)")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="run a goal-grid evaluation scenario")
    e.add_argument("--scenario", default=None, help="full ScenarioSpec JSON")
    e.add_argument("--name", default="eval")
    e.add_argument("--object", default="square-0.075")
    e.add_argument("--agent", default="straight", choices=["mb", "mf", "random", "straight"])
    e.add_argument("--checkpoint", default=None)
    e.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"), default=None)
    e.add_argument("--min-distance", type=float, default=0.0)
    e.add_argument("--trials", type=int, default=1)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", default=None, help="directory for episodes.csv / summary.json / svg")
    e.add_argument("--verbose", action="store_true")
    e.add_argument("--threads", type=int, default=1,
                   help="worker cap (runs are serial; kept for interface stability)")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("rollout", help="run one episode to an explicit goal")
    r.add_argument("--goal", type=float, nargs=2, metavar=("X", "Y"), required=True)
    r.add_argument("--object", default="square-0.075")
    r.add_argument("--agent", default="straight", choices=["mb", "mf", "random", "straight"])
    r.add_argument("--checkpoint", default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    r.set_defaults(fn=cmd_rollout)

    g = sub.add_parser("plot", help="render an exported results directory to SVG")
    g.add_argument("--results", required=True, help="directory with episodes.csv + summary.json")
    g.add_argument("--out", required=True, help="output .svg path")
    g.set_defaults(fn=cmd_plot)

    s = sub.add_parser("selfcheck", help="run the built-in verification suite")
    s.set_defaults(fn=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
