"""Command-line entry point.

Exit status: 0 on success, 1 on bad usage, 2 when a command fails at run time.
Log verbosity comes from ``LYMDO_LOG_LEVEL`` (default ``WARNING``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import _core
from .allocators import AllocProblem, allocate_all, bandwidth_objective, edge_cpu_objective, local_cpu_objective
from .environment import default_config, load_config
from .harness import ExperimentSpec, desk_hyper, evaluate, load_checkpoint, run_baseline, train_lymdo
from .queue_sim import md1_formula, simulate_md1, utilisation_sweep

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("lymdo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _config(path):
    return default_config() if path is None else load_config(path)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_train(args) -> None:
    spec = ExperimentSpec(
        config=_config(args.config), policy=args.policy, episodes=args.episodes,
        slots=args.slots, seeds=(args.seed,), out_dir=Path(args.out), hyper=desk_hyper(),
    )
    _, mlog = train_lymdo(spec)
    rewards = mlog.episode_rewards()
    _print_json({"policy": args.policy, "episodes": args.episodes, "seed": args.seed,
                 "final_episode_reward": float(rewards[-1]), "out": str(args.out)})


def cmd_eval(args) -> None:
    _, policy, cfg = load_checkpoint(args.checkpoint)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    spec = ExperimentSpec(config=cfg, policy=policy, lambda_sweep=args.lambda_sweep,
                          seeds=args.seeds, eval_episodes=args.episodes, out_dir=out)
    summary = evaluate(args.checkpoint, spec)
    _print_json(summary["sweep"])


def cmd_baseline(args) -> None:
    out = Path(args.out) if args.out else None
    spec = ExperimentSpec(config=_config(args.config), policy=args.policy, episodes=args.episodes,
                          slots=args.slots, seeds=args.seeds, eval_episodes=args.episodes, out_dir=out)
    if args.lambda_sweep is None:
        mlog = run_baseline(spec)
        _print_json({"policy": args.policy, "mean_reward": float(mlog.episode_rewards().mean()),
                     "mean_e2e": float(mlog.per_ue("t_e2e").mean())})
    else:
        spec.lambda_sweep = args.lambda_sweep
        _print_json(evaluate(None, spec)["sweep"])


def cmd_solve(args) -> None:
    with open(args.problem) as fh:
        prob = AllocProblem.from_dict(json.load(fh))
    alloc, stable = allocate_all(prob)
    local = sum(local_cpu_objective(prob, i, alloc.f_ue[i]) for i in range(prob.n) if prob.d_ue[i] > 0)
    _print_json({
        "alpha": alloc.alpha.tolist(),
        "f_ue": alloc.f_ue.tolist(),
        "f_es": alloc.f_es.tolist(),
        "stable": stable.tolist(),
        "objective": {
            "local": local,
            "edge": edge_cpu_objective(prob, alloc.f_es),
            "bandwidth": bandwidth_objective(prob, alloc.alpha),
        },
        "backend": _core.BACKEND,
    })


def cmd_simulate_queue(args) -> None:
    if args.lam is not None:
        sim = simulate_md1(args.lam, args.mu, args.arrivals, args.seed)
        ref = md1_formula(args.lam, args.mu)
        rows = [{"utilisation": args.lam / args.mu, "simulated": sim, "formula": ref,
                 "rel_err": abs(sim - ref) / ref}]
    else:
        rows = [dict(asdict(c), rel_err=c.rel_err)
                for c in utilisation_sweep(mu=args.mu, n_arrivals=args.arrivals, seed=args.seed)]
    _print_json(rows)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lymdo", description="DNN partitioning and resource allocation for edge inference.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a learned policy")
    t.add_argument("--config", help="SystemConfig JSON (default: bundled default_system.json)")
    t.add_argument("--policy", choices=("lymdo", "ppo-joint"), default="lymdo")
    t.add_argument("--episodes", type=int, default=400)
    t.add_argument("--slots", type=int, help="slots per episode (default from config)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint over pinned arrival rates")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--lambda-sweep", type=_float_list, default=(0.5, 1.0, 1.5, 2.0, 2.5))
    e.add_argument("--seeds", type=_int_list, default=(0, 1, 2))
    e.add_argument("--episodes", type=int, default=50)
    e.add_argument("--out", help="output directory (default: next to the checkpoint)")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("baseline", help="roll out a fixed policy")
    b.add_argument("--policy", choices=("local", "edge", "random"), required=True)
    b.add_argument("--config")
    b.add_argument("--episodes", type=int, default=50)
    b.add_argument("--slots", type=int)
    b.add_argument("--seeds", type=_int_list, default=(0,))
    b.add_argument("--lambda-sweep", type=_float_list, help="evaluate at pinned arrival rates instead")
    b.add_argument("--out")
    b.set_defaults(func=cmd_baseline)

    s = sub.add_parser("solve", help="solve one allocation problem")
    s.add_argument("--problem", required=True, help="AllocProblem JSON")
    s.set_defaults(func=cmd_solve)

    q = sub.add_parser("simulate-queue", help="compare the M/D/1 formula with simulation")
    q.add_argument("--lam", type=float, help="single arrival rate (default: utilisation sweep)")
    q.add_argument("--mu", type=float, default=1.0)
    q.add_argument("--arrivals", type=int, default=1_000_000)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_simulate_queue)
    return p


def _check_counts(args) -> None:
    for name in ("episodes", "slots", "arrivals"):
        val = getattr(args, name, None)
        if val is not None and val < 1:
            raise UsageError(f"--{name} must be >= 1")


def main(argv=None) -> int:
    level = os.environ.get("LYMDO_LOG_LEVEL", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        print(f"lymdo: error: LYMDO_LOG_LEVEL={level!r} is not a logging level", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_counts(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lymdo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, FloatingPointError, json.JSONDecodeError) as exc:
        log.debug("command failed", exc_info=True)
        print(f"lymdo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
