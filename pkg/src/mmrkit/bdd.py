"""Policy evaluation for raising the ability threshold in a boundary
discontinuity design.

Units are covariate points ``(x1, x2)`` in the region that loses eligibility,
``0 <= x1 < delta`` and ``x2 >= 0``, each carrying an empirical weight and the
estimated boundary effect at its projection ``(0, x2)``. The payoff of the
change is ``c - b * (weighted mean effect)``; a Lipschitz bound ``C`` on the
effect along ``x1`` turns the point-identified boundary average into an
interval of half-width ``k``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence

import numpy as np

from .core import SQRT_HALF_PI, Model, Regime, evaluate_rule, mmr_rule, regime
from .errors import ConstraintError, DomainError, MissingParameterError, ParseError

Norm = Literal["euclidean", "max", "l1"]

UNIT_COLUMNS = ("x1", "x2", "weight", "tau_hat_proj")
ANCHOR_COLUMNS = ("x2", "tau_hat")
SCALAR_KEYS = ("delta", "c", "b", "C", "V")
OPTIONAL_KEYS = ("mu_hat_override", "anchors", "norm")


@dataclass(frozen=True)
class Unit:
    x1: float
    x2: float
    weight: float
    tau_hat_proj: float


@dataclass(frozen=True)
class BoundaryAnchor:
    x2: float
    tau_hat: float


@dataclass(frozen=True)
class PolicyInput:
    units: tuple[Unit, ...]
    delta: float
    c: float
    b: float
    C: float
    V: float

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if not self.units:
            raise DomainError("at least one unit is required")
        _require(self.delta > 0, "delta must be > 0", "delta > 0")
        _require(self.b > 0, "b must be > 0", "b > 0")
        _require(self.C >= 0, "C must be >= 0", "C >= 0")
        _require(self.V > 0, "V must be > 0", "V > 0")
        _require(math.isfinite(self.c), "c must be finite", "c finite")
        for i, u in enumerate(self.units, start=1):
            _check_unit(u, self.delta, i)
        if not self.total_weight > 0:
            raise DomainError("total weight must be > 0")

    @property
    def total_weight(self) -> float:
        return float(sum(u.weight for u in self.units))

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: np.array([getattr(u, name) for u in self.units], dtype=float)
                for name in UNIT_COLUMNS}


@dataclass(frozen=True)
class PolicyAssessment:
    mu_hat: float
    k: float
    sigma: float
    action: float
    regime: Regime
    tight_lo: float | None = None
    tight_hi: float | None = None

    def as_dict(self) -> dict[str, Any]:
        out = {
            "mu_hat": self.mu_hat,
            "k": self.k,
            "sigma": self.sigma,
            "action": self.action,
            "regime": self.regime.value,
        }
        if self.tight_lo is not None:
            out["tight_lo"] = self.tight_lo
            out["tight_hi"] = self.tight_hi
        return out


def _require(ok: bool, message: str, constraint: str, row: int | None = None):
    if not ok:
        raise ConstraintError(message, row=row, constraint=constraint)


def _check_unit(u: Unit, delta: float, row: int | None):
    for name in UNIT_COLUMNS:
        _require(math.isfinite(getattr(u, name)), f"{name} must be finite", f"{name} finite", row)
    _require(0 <= u.x1 < delta, f"x1={u.x1} outside [0, delta={delta}) of the policy region",
             "0 <= x1 < delta", row)
    _require(u.x2 >= 0, f"x2={u.x2} is negative; the policy region needs x2 >= 0", "x2 >= 0", row)
    _require(u.weight > 0, f"weight={u.weight} must be > 0", "weight > 0", row)
    _require(abs(u.tau_hat_proj) <= 1, f"|tau_hat_proj|={abs(u.tau_hat_proj)} exceeds 1",
             "|tau_hat_proj| <= 1", row)


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    total = weights.sum()
    if not total > 0:
        raise DomainError("total weight must be > 0")
    return float(np.dot(weights, values) / total)


def identified_effect(inp: PolicyInput) -> float:
    """``c - b * BATE``, the point-identified centre of the payoff interval."""
    a = inp.arrays()
    return inp.c - inp.b * _weighted_mean(a["tau_hat_proj"], a["weight"])


def identification_width(inp: PolicyInput) -> float:
    """``b * C * (weighted mean of x1)``; ``x1`` is the distance to the projection."""
    a = inp.arrays()
    return inp.b * inp.C * _weighted_mean(a["x1"], a["weight"])


def not_randomized(inp: PolicyInput) -> bool:
    """Un-normalized form of the no-randomization condition,
    ``b C sum(w x1) <= sqrt(V pi / 2) sum(w)``."""
    a = inp.arrays()
    lhs = inp.b * inp.C * float(np.dot(a["weight"], a["x1"]))
    rhs = math.sqrt(inp.V) * SQRT_HALF_PI * float(a["weight"].sum())
    return lhs <= rhs


def assess(inp: PolicyInput, mu_hat_override: float | None = None,
           anchors: Sequence[BoundaryAnchor] | None = None,
           norm: Norm = "euclidean") -> PolicyAssessment:
    sigma = math.sqrt(inp.V)
    mu_hat = identified_effect(inp) if mu_hat_override is None else float(mu_hat_override)
    k = identification_width(inp)
    model = Model(k, sigma)
    reg = regime(model)
    # Both sides are the same inequality; rounding can only split them at the boundary.
    if not_randomized(inp) != (reg is Regime.THRESHOLD_OPTIMAL):
        ratio = k / (sigma * SQRT_HALF_PI)
        if abs(ratio - 1.0) > 1e-12:
            raise AssertionError("non-randomization check disagrees with regime")
    action = float(evaluate_rule(mmr_rule(model), mu_hat))
    tight_lo = tight_hi = None
    if anchors:
        tight_lo, tight_hi = tight_bounds(inp, anchors, norm=norm)
    return PolicyAssessment(mu_hat, k, sigma, action, reg, tight_lo, tight_hi)


def assess_from_summary(mu_hat: float, V: float, k: float) -> PolicyAssessment:
    """Assessment when ``(mu_hat, V, k)`` are already known, as in a published table."""
    sigma = math.sqrt(V)
    model = Model(k, sigma)
    return PolicyAssessment(mu_hat, k, sigma, float(evaluate_rule(mmr_rule(model), mu_hat)),
                            regime(model))


def _distances(x1: np.ndarray, x2: np.ndarray, anchor_x2: np.ndarray, norm: Norm) -> np.ndarray:
    dx = np.abs(x1)[:, None]
    dy = np.abs(x2[:, None] - anchor_x2[None, :])
    if norm == "euclidean":
        return np.hypot(dx, dy)
    if norm == "max":
        return np.maximum(dx, dy)
    if norm == "l1":
        return dx + dy
    raise DomainError(f"unknown norm {norm!r}")


def lipschitz_envelopes(inp: PolicyInput, anchors: Sequence[BoundaryAnchor],
                        norm: Norm = "euclidean", own_projection: bool = False,
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Upper and lower McShane-Whitney extensions of the anchor values to the
    units, capped to [-1, 1].

    With ``own_projection`` each unit is constrained only by the anchor at its
    own ``x2``, which reproduces the directional interval.
    """
    if not anchors:
        raise DomainError("at least one boundary anchor is required")
    ax2 = np.array([a.x2 for a in anchors], dtype=float)
    atau = np.array([a.tau_hat for a in anchors], dtype=float)
    if np.any(np.abs(atau) > 1):
        raise DomainError("anchor tau_hat values must lie in [-1, 1]")
    if np.unique(ax2).size != ax2.size:
        raise DomainError("anchors must have distinct x2 values")
    a = inp.arrays()
    dist = _distances(a["x1"], a["x2"], ax2, norm)
    up = atau[None, :] + inp.C * dist
    down = atau[None, :] - inp.C * dist
    if own_projection:
        own = a["x2"][:, None] == ax2[None, :]
        if not np.all(own.any(axis=1)):
            raise DomainError("own_projection needs an anchor at every unit's x2")
        up = np.where(own, up, np.inf)
        down = np.where(own, down, -np.inf)
    upper = np.minimum(1.0, up.min(axis=1))
    lower = np.maximum(-1.0, down.max(axis=1))
    if np.any(lower > upper + 1e-12):
        raise DomainError("anchors are not C-Lipschitz consistent; the constraint set is empty")
    return upper, lower


def tight_bounds(inp: PolicyInput, anchors: Sequence[BoundaryAnchor],
                 norm: Norm = "euclidean", own_projection: bool = False) -> tuple[float, float]:
    """Bounds on the payoff over all effect functions that match the anchors,
    are C-Lipschitz, and lie in [-1, 1], evaluated on the sample units.

    The payoff decreases in the effect, so the upper envelope gives ``lo``.
    """
    upper, lower = lipschitz_envelopes(inp, anchors, norm, own_projection)
    w = inp.arrays()["weight"]
    lo = inp.c - inp.b * _weighted_mean(upper, w)
    hi = inp.c - inp.b * _weighted_mean(lower, w)
    return lo, hi


def self_anchors(inp: PolicyInput) -> list[BoundaryAnchor]:
    """One anchor per distinct projection, taken from the units themselves."""
    seen: dict[float, float] = {}
    for u in inp.units:
        if u.x2 in seen and seen[u.x2] != u.tau_hat_proj:
            raise DomainError(f"units at x2={u.x2} disagree on tau_hat_proj")
        seen[u.x2] = u.tau_hat_proj
    return [BoundaryAnchor(x2, tau) for x2, tau in seen.items()]


# ---------------------------------------------------------------------------
# file ingestion


def _read_table(path: str | Path, columns: Sequence[str]) -> list[tuple[int, dict[str, float]]]:
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty; a header row is required", line=1) from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(f"header lacks required columns {missing}", line=1)
        index = {c: header.index(c) for c in columns}
        for raw in reader:
            line = reader.line_num
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(raw)}", line=line)
            values = {}
            for col, j in index.items():
                cell = raw[j].strip()
                try:
                    values[col] = float(cell)
                except ValueError:
                    raise ParseError(f"not a number: {cell!r}", line=line, column=col) from None
            rows.append((line, values))
    return rows


def read_units(path: str | Path, delta: float) -> list[Unit]:
    units = []
    for line, v in _read_table(path, UNIT_COLUMNS):
        u = Unit(v["x1"], v["x2"], v["weight"], v["tau_hat_proj"])
        _check_unit(u, delta, line)
        units.append(u)
    if not units:
        raise ParseError("no data rows found")
    return units


def read_anchors(path: str | Path) -> list[BoundaryAnchor]:
    anchors = []
    seen = set()
    for line, v in _read_table(path, ANCHOR_COLUMNS):
        if abs(v["tau_hat"]) > 1:
            raise ConstraintError(f"|tau_hat|={abs(v['tau_hat'])} exceeds 1", row=line,
                                  constraint="|tau_hat| <= 1")
        if v["x2"] in seen:
            raise ConstraintError(f"duplicate anchor x2={v['x2']}", row=line,
                                  constraint="distinct x2")
        seen.add(v["x2"])
        anchors.append(BoundaryAnchor(v["x2"], v["tau_hat"]))
    if not anchors:
        raise ParseError("no anchor rows found")
    return anchors


def load_config(path: str | Path | None) -> dict[str, Any]:
    """Read a JSON object of scalar parameters. ``None`` gives an empty dict."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    unknown = set(data) - set(SCALAR_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise ParseError(f"unknown config keys {sorted(unknown)}")
    return data


def resolve_params(config: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Merge config-file values with overrides (overrides win, ``None`` ignored)."""
    params = dict(config)
    params.update({k: v for k, v in overrides.items() if v is not None})
    for key in SCALAR_KEYS:
        if key not in params:
            raise MissingParameterError(key)
        try:
            params[key] = float(params[key])
        except (TypeError, ValueError):
            raise ParseError(f"parameter {key!r} is not a number: {params[key]!r}") from None
    if params.get("mu_hat_override") is not None:
        params["mu_hat_override"] = float(params["mu_hat_override"])
    return params


def ingest(path: str | Path, config: str | Path | Mapping[str, Any] | None = None,
           **overrides) -> PolicyInput:
    """Load units from ``path`` and scalars from ``config`` plus ``overrides``."""
    cfg = config if isinstance(config, Mapping) else load_config(config)
    params = resolve_params(cfg, overrides)
    units = read_units(path, params["delta"])
    return PolicyInput(tuple(units), params["delta"], params["c"], params["b"],
                       params["C"], params["V"])


def with_scalars(inp: PolicyInput, **changes) -> PolicyInput:
    return replace(inp, **changes)
