"""Scenario configs: one JSON file per scenario, sweeps expanded to a cross product.

Example::

    {
      "problem": "ceding",
      "rho": 0.5,
      "measure": {"kind": "cvar", "alpha": 0.9},
      "premium": {"kind": "wang", "beta": 3.6},
      "loss": {"kind": "exponential", "rate": 1.0},
      "sweep": {"alpha": [0.9, 0.95, 0.99], "beta": [0.5, 3.6]}
    }

``alpha`` replaces the parameter of the solving party's own measure (the
insurer's for ceding and social problems, the reinsurer's for reinsurer
problems).  ``beta`` replaces the parameter of the premium, or of the
reinsurer's measure in a social problem.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

from . import dist_model
from . import distortion as dm
from .errors import ValidationError
from .solver import ReinsuranceProblem, build_ceding, build_reinsurer, build_social

KINDS = ("ceding", "reinsurer", "social")
SWEEP_AXES = ("alpha", "beta", "rho")


@dataclass(frozen=True)
class Cell:
    """One point of a sweep: concrete parties and the labels that produced them."""

    kind: str
    rho: float
    insurer: dm.Distortion | None
    reinsurer: dm.Distortion | None
    premium: dm.Distortion | None
    loss: dist_model.LossDistribution
    alpha: float | None
    beta: float | None

    def problem(self, kind: str | None = None) -> ReinsuranceProblem:
        kind = kind or self.kind
        if kind == "ceding":
            return build_ceding(self.rho, _need(self.insurer, "insurer measure"), _need(self.premium, "premium"), self.loss)
        if kind == "reinsurer":
            return build_reinsurer(
                self.rho, _need(self.reinsurer, "reinsurer measure"), _need(self.premium, "premium"), self.loss
            )
        return build_social(_need(self.insurer, "insurer measure"), _need(self.reinsurer, "reinsurer measure"), self.loss)

    def labels(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "rho": self.rho}


def _need(value, what):
    if value is None:
        raise ValidationError(f"config is missing the {what}")
    return value


@dataclass
class Scenario:
    kind: str
    rho: float
    insurer: dm.Distortion | None
    reinsurer: dm.Distortion | None
    premium: dm.Distortion | None
    loss: dist_model.LossDistribution
    sweep: dict = field(default_factory=dict)
    tail_eps: float = dist_model.TAIL_EPS
    grid_points: int = 2048

    def _alpha_target(self) -> str:
        return "reinsurer" if self.kind == "reinsurer" else "insurer"

    def _beta_target(self) -> str:
        return "reinsurer" if self.kind == "social" else "premium"

    def cells(self) -> list[Cell]:
        """Cross product of the sweep axes, in ``alpha``, ``beta``, ``rho`` order."""
        base = {"insurer": self.insurer, "reinsurer": self.reinsurer, "premium": self.premium}
        axes = [self.sweep.get(a, [None]) for a in SWEEP_AXES]
        out = []
        for alpha, beta, rho in itertools.product(*axes):
            parties = dict(base)
            if alpha is not None:
                key = self._alpha_target()
                parties[key] = dm.with_parameter(_need(parties[key], f"{key} distortion"), alpha)
            if beta is not None:
                key = self._beta_target()
                parties[key] = dm.with_parameter(_need(parties[key], f"{key} distortion"), beta)
            a_label = _param(parties[self._alpha_target()])
            b_label = _param(parties[self._beta_target()])
            out.append(
                Cell(
                    self.kind,
                    self.rho if rho is None else float(rho),
                    parties["insurer"],
                    parties["reinsurer"],
                    parties["premium"],
                    self.loss,
                    a_label,
                    b_label,
                )
            )
        return out


def _param(d: dm.Distortion | None):
    if d is None or d.parameter is None:
        return None
    return float(getattr(d, d.parameter))


def _distortion(raw, name):
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ValidationError(f"{name} must be a distortion record")
    return dm.from_spec(raw)


def parse(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    kind = str(data.get("problem", "ceding")).lower()
    if kind not in KINDS:
        raise ValidationError(f"problem must be one of {KINDS}, got {kind!r}")
    rho = float(data.get("rho", 0.0))
    if not (math.isfinite(rho) and rho >= 0):
        raise ValidationError(f"rho must be a nonnegative number, got {rho}")
    insurer = _distortion(data.get("insurer_measure", data.get("measure") if kind != "reinsurer" else None), "insurer_measure")
    reinsurer = _distortion(
        data.get("reinsurer_measure", data.get("measure") if kind == "reinsurer" else None), "reinsurer_measure"
    )
    premium = _distortion(data.get("premium"), "premium")
    if "loss" not in data:
        raise ValidationError("config needs a loss record")
    loss = dist_model.from_spec(data["loss"])

    sweep = data.get("sweep", {}) or {}
    if not isinstance(sweep, dict):
        raise ValidationError("sweep must be an object of lists")
    clean = {}
    for axis, values in sweep.items():
        if axis not in SWEEP_AXES:
            raise ValidationError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
        if not isinstance(values, list) or not values:
            raise ValidationError(f"sweep axis {axis!r} must be a nonempty list")
        clean[axis] = [float(v) for v in values]

    tail_eps = float(data.get("tail_eps", dist_model.TAIL_EPS))
    if not 0.0 < tail_eps < 1.0:
        raise ValidationError("tail_eps must lie in (0, 1)")
    grid_points = int(data.get("grid_points", 2048))
    if grid_points < 2:
        raise ValidationError("grid_points must be at least 2")
    scenario = Scenario(kind, rho, insurer, reinsurer, premium, loss, clean, tail_eps, grid_points)
    # fail early if a cell cannot be built
    for cell in scenario.cells():
        cell.problem()
    return scenario


def load(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse(data)
