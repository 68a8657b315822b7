"""Command-line front end.

Every command prints a run record: a short table by default, or one JSON
document with ``--json``. Exit status is 0 on success, 2 on usage errors and
1 on domain or convergence errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import datetime, timezone
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import bdd
from .core import (
    Model,
    MixedThreshold,
    PiecewiseLinear,
    Regime,
    Threshold,
    evaluate_rule,
    kstar,
    mmr_rule,
    nature_best_response,
    regime,
)
from .errors import MMRError
from .game import GameConfig, rule_distance, solve
from .numerics import uniform_draw

THREADS_ENV = "MMRKIT_THREADS"


class UsageError(Exception):
    pass


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` -> ``n`` evenly spaced points on ``[lo, hi]``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:n, got {text!r}")
    lo, hi = _finite(parts[0]), _finite(parts[1])
    n = _positive_int(parts[2])
    if n > 1 and not lo < hi:
        raise argparse.ArgumentTypeError(f"grid needs lo < hi, got {text!r}")
    return np.linspace(lo, hi, n)


def worker_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def rule_dict(rule) -> dict[str, Any]:
    if isinstance(rule, Threshold):
        return {"type": "Threshold", "t": rule.t}
    if isinstance(rule, PiecewiseLinear):
        return {"type": "PiecewiseLinear", "lo": rule.lo, "hi": rule.hi}
    if isinstance(rule, MixedThreshold):
        return {"type": "MixedThreshold", "thresholds": list(rule.thresholds),
                "weights": list(rule.weights)}
    raise TypeError(rule)


def _model(args) -> Model:
    if args.sigma <= 0:
        raise UsageError("--sigma must be > 0")
    if args.k < 0:
        raise UsageError("--k must be >= 0")
    return Model(args.k, args.sigma)


def _exact_summary(model: Model) -> dict[str, Any]:
    reg = regime(model)
    out: dict[str, Any] = {"regime": reg.value}
    if reg is Regime.RANDOMIZED_OPTIMAL:
        out["kstar"] = kstar(model)
    out["rule"] = rule_dict(mmr_rule(model))
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> tuple[dict, dict]:
    model = _model(args)
    out = _exact_summary(model)
    report = nature_best_response(mmr_rule(model), model, grid_n=args.br_grid_n)
    out["worst_regret"] = report.worst_regret
    out["argmax_mu"] = report.argmax_state.mu
    out["argmax_mu_star"] = report.argmax_state.mu_star
    return {"k": model.k, "sigma": model.sigma, "br_grid_n": args.br_grid_n}, out


def cmd_decide(args) -> tuple[dict, dict]:
    model = _model(args)
    out = _exact_summary(model)
    out["action"] = float(evaluate_rule(mmr_rule(model), args.mu_hat))
    inputs = {"k": model.k, "sigma": model.sigma, "mu_hat": args.mu_hat}
    if args.seed is not None:
        u = uniform_draw(args.seed, 0)
        out["uniform_draw"] = u
        out["realized_action"] = int(u <= out["action"])
        inputs["seed"] = args.seed
    return inputs, out


def _game_config(args, model: Model) -> GameConfig:
    if args.thresholds is not None:
        grid = args.thresholds
    else:
        half = model.k + args.span * model.sigma
        grid = np.linspace(-half, half, args.grid_n)
    return GameConfig(model, tuple(grid), learning_rate=args.eta,
                      iterations=args.iterations, br_grid_n=args.br_grid_n)


def _game_outputs(model: Model, sol, grid: np.ndarray) -> dict[str, Any]:
    return {
        "lower_bound": sol.lower_bound,
        "upper_bound": sol.upper_bound,
        "gap": sol.gap,
        "iterations_run": sol.iterations_run,
        "distance_to_exact": rule_distance(sol.rule, mmr_rule(model), grid),
        "history": [[c.iteration, c.lower, c.upper, c.gap, c.increased] for c in sol.history],
        "rule": rule_dict(sol.rule),
    }


def cmd_game(args) -> tuple[dict, dict]:
    model = _model(args)
    config = _game_config(args, model)
    sol = solve(config)
    half = model.k + 4 * model.sigma
    out = _exact_summary(model)
    out.update(_game_outputs(model, sol, np.linspace(-half, half, 801)))
    inputs = {"k": model.k, "sigma": model.sigma, "iterations": config.iterations,
              "eta": config.eta(), "grid_size": len(config.threshold_grid),
              "grid_lo": config.threshold_grid[0], "grid_hi": config.threshold_grid[-1],
              "br_grid_n": config.br_grid_n}
    if args.history is not None:
        with open(args.history, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "lower", "upper", "gap", "increased"])
            for c in sol.history:
                w.writerow([c.iteration, repr(c.lower), repr(c.upper), repr(c.gap), int(c.increased)])
        out["history_path"] = args.history
    return inputs, out


def emit_curve(model: Model, grid: np.ndarray, path: str, game_config: GameConfig | None = None):
    """Write ``mu_hat,d_exact[,d_numeric]`` records over ``grid`` to ``path``."""
    exact = evaluate_rule(mmr_rule(model), grid)
    cols = [grid, np.atleast_1d(exact)]
    header = ["mu_hat", "d_exact"]
    sol = None
    if game_config is not None:
        sol = solve(game_config)
        cols.append(np.atleast_1d(evaluate_rule(sol.rule, grid)))
        header.append("d_numeric")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return sol


def cmd_curve(args) -> tuple[dict, dict]:
    model = _model(args)
    grid = args.grid if args.grid is not None else np.linspace(
        -(model.k + 4 * model.sigma), model.k + 4 * model.sigma, 401)
    config = _game_config(args, model) if args.game else None
    sol = emit_curve(model, grid, args.output, config)
    out = _exact_summary(model)
    out["output"] = args.output
    out["points"] = int(grid.size)
    if sol is not None:
        out.update(lower_bound=sol.lower_bound, upper_bound=sol.upper_bound, gap=sol.gap,
                   distance_to_exact=rule_distance(sol.rule, mmr_rule(model), grid))
    inputs = {"k": model.k, "sigma": model.sigma, "grid_lo": float(grid[0]),
              "grid_hi": float(grid[-1]), "grid_n": int(grid.size), "game": bool(args.game)}
    return inputs, out


def _policy(args):
    cfg = bdd.load_config(args.config)
    overrides = {"delta": args.delta, "c": args.c, "b": args.b, "C": args.C, "V": args.V,
                 "mu_hat_override": args.mu_hat, "anchors": args.anchors, "norm": args.norm}
    params = bdd.resolve_params(cfg, overrides)
    inp = bdd.ingest(args.data, params)
    return inp, params


def cmd_bdd(args) -> tuple[dict, dict]:
    inp, params = _policy(args)
    anchors = bdd.read_anchors(params["anchors"]) if params.get("anchors") else None
    norm = params.get("norm") or "euclidean"
    res = bdd.assess(inp, params.get("mu_hat_override"), anchors=anchors, norm=norm)
    out = res.as_dict()
    out["identified_effect"] = bdd.identified_effect(inp)
    out["not_randomized"] = bdd.not_randomized(inp)
    model = Model(res.k, res.sigma)
    if regime(model) is Regime.RANDOMIZED_OPTIMAL:
        out["kstar"] = kstar(model)
    inputs = {key: params.get(key) for key in bdd.SCALAR_KEYS + bdd.OPTIONAL_KEYS}
    inputs.update(data=args.data, units=len(inp.units))
    return inputs, out


def cmd_bounds(args) -> tuple[dict, dict]:
    inp, params = _policy(args)
    path = params.get("anchors")
    if not path:
        raise UsageError("bounds needs --anchors (or 'anchors' in the config file)")
    anchors = bdd.read_anchors(path)
    norm = params.get("norm") or "euclidean"
    lo, hi = bdd.tight_bounds(inp, anchors, norm=norm)
    mu = bdd.identified_effect(inp)
    k = bdd.identification_width(inp)
    out = {"tight_lo": lo, "tight_hi": hi, "identified_effect": mu, "k": k,
           "directional_lo": mu - k, "directional_hi": mu + k}
    inputs = {key: params.get(key) for key in bdd.SCALAR_KEYS + bdd.OPTIONAL_KEYS}
    inputs.update(data=args.data, units=len(inp.units), anchors_count=len(anchors))
    return inputs, out


COMMANDS = {
    "solve": cmd_solve,
    "decide": cmd_decide,
    "game": cmd_game,
    "curve": cmd_curve,
    "bdd": cmd_bdd,
    "bounds": cmd_bounds,
}


# ---------------------------------------------------------------------------
# parser and output


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="print one JSON document")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--k", type=_finite, required=True, help="identification half-width")
    model.add_argument("--sigma", type=_finite, required=True, help="signal standard deviation")

    game = argparse.ArgumentParser(add_help=False)
    game.add_argument("--thresholds", type=parse_grid, default=None,
                      help="threshold grid lo:hi:n (default: --grid-n points over k + span*sigma)")
    game.add_argument("--grid-n", type=_positive_int, default=401)
    game.add_argument("--span", type=_finite, default=5.0,
                      help="grid half-width beyond k, in sigmas")
    game.add_argument("--iterations", type=_positive_int, default=2000)
    game.add_argument("--eta", type=_finite, default=None, help="learning rate")
    game.add_argument("--br-grid-n", type=_positive_int, default=801)

    policy = argparse.ArgumentParser(add_help=False)
    policy.add_argument("--data", required=True, help="CSV with x1,x2,weight,tau_hat_proj")
    policy.add_argument("--config", default=None, help="JSON file with delta, c, b, C, V")
    for name in ("delta", "c", "b", "C", "V"):
        policy.add_argument(f"--{name}", type=_finite, default=None)
    policy.add_argument("--mu-hat", type=_finite, default=None, help="override for mu_hat")
    policy.add_argument("--anchors", default=None, help="CSV with x2,tau_hat")
    policy.add_argument("--norm", choices=["euclidean", "max", "l1"], default=None)

    parser = _Parser(prog="mmrkit", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"mmrkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common, model], help="exact MMR rule and its worst-case regret")
    p.add_argument("--br-grid-n", type=_positive_int, default=801)

    p = sub.add_parser("decide", parents=[common, model], help="MMR action at an observed signal")
    p.add_argument("--mu-hat", type=_finite, required=True)
    p.add_argument("--seed", type=int, default=None, help="draw a realized action with this seed")

    p = sub.add_parser("game", parents=[common, model, game], help="numerical MMR rule by game solving")
    p.add_argument("--grid", dest="thresholds", type=parse_grid, default=argparse.SUPPRESS,
                   help="alias of --thresholds")
    p.add_argument("--history", default=None, help="write convergence history CSV here")

    p = sub.add_parser("curve", parents=[common, model, game], help="write rule curves for plotting")
    p.add_argument("--grid", type=parse_grid, default=None,
                   help="evaluation grid lo:hi:n (default: 401 points over k + 4 sigma)")
    p.add_argument("--output", required=True)
    p.add_argument("--game", action="store_true", help="add the numerical rule as d_numeric")

    sub.add_parser("bdd", parents=[common, policy], help="assess a threshold change")
    sub.add_parser("bounds", parents=[common, policy], help="Lipschitz-envelope payoff bounds")
    return parser


def _fmt(key: str, value) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        if key in {"action", "uniform_draw"}:
            return f"{value:.4f}"
        if key in {"mu_hat", "k", "sigma", "tight_lo", "tight_hi", "identified_effect",
                   "directional_lo", "directional_hi", "kstar"} and abs(value) >= 100:
            return f"{value:.1f}"
        return f"{value:.6g}"
    if isinstance(value, dict):
        return json.dumps(value if value.get("type") != "MixedThreshold"
                          else {"type": "MixedThreshold", "support": len(value["thresholds"])})
    if isinstance(value, list):
        return f"[{len(value)} entries]"
    return str(value)


def render_table(record: dict) -> str:
    lines = [f"mmrkit {record['command']}"]
    for section in ("inputs", "outputs"):
        lines.append(f"  {section}:")
        items = record[section]
        width = max((len(k) for k in items), default=0)
        for key, value in items.items():
            lines.append(f"    {key:<{width}}  {_fmt(key, value)}")
    return "\n".join(lines)


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.json = getattr(args, "json", False)
        threads = worker_cap()
        inputs, outputs = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mmrkit: usage error: {exc}", file=stderr)
        return 2
    except MMRError as exc:
        print(f"mmrkit: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    except OSError as exc:
        print(f"mmrkit: IOError: {exc}", file=stderr)
        return 1
    record = {
        "command": args.command,
        "argv": argv,
        "inputs": inputs,
        "outputs": outputs,
        "threads": threads,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if args.json:
        json.dump(record, stdout, indent=2)
        stdout.write("\n")
    else:
        stdout.write(render_table(record) + "\n")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
