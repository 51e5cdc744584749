"""Storage-size x epsilon sweeps and their reports.

A scenario JSON looks like::

    {
      "data": {"synth": {"n": 8928, "seed": 0, "model": {"step_h": 0.0833, ...}}},
      "batteries": [null, {"energy_mwh": 100}, {"energy_mwh": 200, "eta_ch": 0.95}],
      "epsilons": [0.0, 0.01, {"f0": 50, "f_db": 0.02, "delta_f_allow": 0.2, "mhc_per_pg": 0.01}],
      "methods": ["alg2", "convex"],
      "cost": "linear",
      "soc_band": "0.4:0.8",
      "lambda": [0.5, 1.0, 5.0]
    }

``data`` may instead be ``{"csv": "path.csv", "col_delta": ..., "col_pg": ...,
"col_time": ..., "p_g_const": ..., "step_h": ..., "resample_h": ...}``; a
relative path is resolved against the scenario file.  ``null`` (or
``"none"``) in ``batteries`` is the no-storage baseline.  Battery objects take
``energy_mwh`` plus optional ``c_charge``, ``c_discharge``, ``eta_ch``,
``eta_dis`` and ``soc0`` (initial SoC, default 0.5).

With a ``soc_band`` the optimizers add the SoC-band penalty with weight
``lambda`` (default 1).  A list of weights turns the sweep into a
sensitivity study: every weight becomes one more dimension of the optimizer
cells (the no-storage and threshold-controller cells do not depend on it).

Every (battery, epsilon, method) cell is solved independently; reliability
indices are always reported at the cell's epsilon, whatever the method
optimised.  A failing cell is recorded with its error and skipped.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import metrics, myopic, opt_convex, opt_mccormick
from .battery import BatterySpec
from .problem import ProblemSpec, SocBand, SocPenalty
from .response import ResponseModel
from .timeseries import ImbalanceSeries, SynthModel, load_csv, resample, synth

METHODS = ("alg1", "alg2", "alg3", "convex", "mip")
DEFAULT_LAMBDA = 1.0
# solver statistics that vary run to run and would break byte-identical output
_VOLATILE = ("wall_time", "node_log")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class BatteryChoice:
    """One entry of a scenario battery list; ``energy_mwh == 0`` is no storage."""

    energy_mwh: float = 0.0
    c_charge: float = 1.0
    c_discharge: float = 1.0
    eta_ch: float = 1.0
    eta_dis: float = 1.0
    soc0: float = 0.5

    @classmethod
    def from_json(cls, obj) -> "BatteryChoice":
        if obj is None or obj == "none" or obj == 0:
            return cls()
        if isinstance(obj, (int, float)):
            return cls(float(obj))
        unknown = set(obj) - {"energy_mwh", "c_charge", "c_discharge", "eta_ch", "eta_dis", "soc0"}
        if unknown:
            raise ScenarioError(f"unknown battery fields {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in obj.items()})

    @property
    def is_none(self) -> bool:
        return self.energy_mwh == 0

    @property
    def label(self) -> str:
        return "none" if self.is_none else f"{self.energy_mwh:g}MWh"

    def spec(self) -> BatterySpec:
        return BatterySpec.from_c_rating(self.energy_mwh, self.c_charge, self.c_discharge,
                                         self.eta_ch, self.eta_dis)


@dataclass
class Scenario:
    """A sweep over batteries x epsilons x methods on one imbalance series."""

    series: ImbalanceSeries
    batteries: list
    epsilons: list
    methods: list
    cost: str = "linear"
    response_aware: bool = True
    soc_band: Optional[SocBand] = None
    lam: object = None  # float, list of floats, or None for the default
    max_horizon: int = opt_mccormick.DEFAULT_MAX_HORIZON
    workers: int = 1

    def __post_init__(self):
        if not self.batteries or not self.epsilons or not self.methods:
            raise ScenarioError("batteries, epsilons and methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ScenarioError(f"unknown methods {bad}; choose from {METHODS}")
        if "alg3" in self.methods and self.soc_band is None:
            raise ScenarioError("alg3 needs soc_band")
        self.batteries = [b if isinstance(b, BatteryChoice) else BatteryChoice.from_json(b)
                          for b in self.batteries]
        self.epsilons = [e if isinstance(e, ResponseModel) else _response(e) for e in self.epsilons]
        if self.soc_band is None or not self.response_aware:
            self.lambdas = [None]
        elif self.lam is None:
            self.lambdas = [DEFAULT_LAMBDA]
        else:
            lams = self.lam if isinstance(self.lam, (list, tuple)) else [self.lam]
            if not lams or any(float(v) < 0 for v in lams):
                raise ScenarioError("lambda must be a nonnegative number or a nonempty list")
            self.lambdas = [float(v) for v in lams]

    @classmethod
    def from_dict(cls, d: dict, base: Union[str, Path] = ".") -> "Scenario":
        known = {"data", "batteries", "epsilons", "methods", "cost", "response_aware",
                 "soc_band", "lambda", "max_horizon", "workers"}
        unknown = set(d) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields {sorted(unknown)}")
        if "data" not in d:
            raise ScenarioError("scenario needs a data source")
        band = d.get("soc_band")
        return cls(series=load_data(d["data"], base), batteries=list(d.get("batteries", [])),
                   epsilons=list(d.get("epsilons", [])), methods=list(d.get("methods", [])),
                   cost=d.get("cost", "linear"), response_aware=d.get("response_aware", True),
                   soc_band=None if band is None else SocBand.parse(band),
                   lam=d.get("lambda"), max_horizon=d.get("max_horizon", opt_mccormick.DEFAULT_MAX_HORIZON),
                   workers=d.get("workers", 1))

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "Scenario":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base=path.parent)

    def cells(self) -> list:
        # the weight only enters the optimizers' objective; the baseline and
        # the threshold controllers are solved once
        return [(b, e, m, lam) for b in self.batteries for e in self.epsilons for m in self.methods
                for lam in (self.lambdas if m in ("convex", "mip") and not b.is_none else [None])]


def _response(obj) -> ResponseModel:
    if isinstance(obj, (int, float)):
        return ResponseModel(epsilon=float(obj))
    return ResponseModel.from_dict(obj)


def load_data(src: dict, base: Union[str, Path] = ".") -> ImbalanceSeries:
    """Series from a scenario ``data`` block (``csv`` or ``synth``)."""
    if "synth" in src:
        cfg = dict(src["synth"])
        n = int(cfg.pop("n"))
        seed = int(cfg.pop("seed", 0))
        return synth(n, SynthModel.from_dict(cfg.pop("model", {})), seed)
    if "csv" in src:
        path = Path(src["csv"])
        if not path.is_absolute():
            path = Path(base) / path
        series = load_csv(path, col_delta=src.get("col_delta", "delta"),
                          col_pg=src.get("col_pg", "p_g"), col_time=src.get("col_time"),
                          p_g_const=src.get("p_g_const"), step_h=src.get("step_h"),
                          negate_delta=src.get("negate_delta", False))
        if "resample_h" in src:
            series = resample(series, float(src["resample_h"]))
        return series
    raise ScenarioError("data must hold either 'csv' or 'synth'")


@dataclass
class SweepResult:
    """Per-cell reports plus the marginal-benefit series."""

    cells: list
    marginal: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [c for c in self.cells if c.get("error")]

    def ok_cells(self) -> list:
        return [c for c in self.cells if not c.get("error")]

    @property
    def lambdas(self) -> list:
        return sorted({c["lambda"] for c in self.cells}, key=_lam_key)

    def ri(self, method: str, epsilon: float, lam: Optional[float] = None) -> list:
        """(energy_mwh, ri_eps_mod) pairs for one method and epsilon, by size
        (and one SoC penalty weight, when given)."""
        pts = [(c["energy_mwh"], c["report"]["ri_eps_mod"]) for c in self.ok_cells()
               if c["method"] == method and c["epsilon"] == epsilon
               and (lam is None or c["lambda"] in (lam, None))]
        return sorted(pts)


def _lam_key(v):
    return -1.0 if v is None else v


def _problem(sc: Scenario, bc: BatteryChoice, resp: ResponseModel, lam) -> ProblemSpec:
    bt = bc.spec()
    pen = None if lam is None else SocPenalty(lam, sc.soc_band)
    return ProblemSpec(sc.series, bt, sc.cost, sc.response_aware, resp, pen,
                       b0=bc.soc0 * bt.b_rated)


def run_cell(sc: Scenario, bc: BatteryChoice, resp: ResponseModel, method: str,
             lam: Optional[float] = None) -> dict:
    """Solve one cell; errors become an ``error`` entry instead of raising."""
    cell = {"battery": bc.label, "energy_mwh": bc.energy_mwh, "epsilon": None, "method": method,
            "lambda": lam}
    try:
        eps = resp.eps
        cell["epsilon"] = eps
        if bc.is_none:
            rep = metrics.report(sc.series, sc.series.delta, None, eps)
            cell.update(report=rep.to_dict(), summary={"method": "none", "objective": None})
            return cell
        spec = _problem(sc, bc, resp, lam)
        if method in myopic.POLICIES:
            res = myopic.run_policy(method, spec, band=sc.soc_band)
        elif method == "convex":
            res = opt_convex.optimize(spec)
        else:
            res = opt_mccormick.optimize(spec, max_horizon=sc.max_horizon)
        rep = metrics.report(sc.series, res.residuals, res.soc, eps)
        summary = res.summary()
        summary.pop("report", None)
        summary["solver_stats"] = {k: v for k, v in summary["solver_stats"].items()
                                   if k not in _VOLATILE}
        cell.update(report=rep.to_dict(), summary=summary)
    except Exception as exc:  # a failed cell never aborts the sweep
        cell["error"] = f"{type(exc).__name__}: {exc}"
    return cell


def _run_packed(args):
    return run_cell(*args)


def marginal_benefit(cells: list) -> list:
    """Finite differences of ri_eps_mod over battery size, per (epsilon, method,
    lambda).

    Several battery entries of the same size (e.g. different efficiencies)
    are not comparable by size alone; only the first of each size is used.
    The no-storage cell starts every lambda's curve.
    """
    out = []
    groups = {}
    ok = [c for c in cells if not c.get("error")]
    for c in ok:
        if c["energy_mwh"] > 0 or c["lambda"] is None:
            key = (c["epsilon"], METHODS.index(c["method"]), _lam_key(c["lambda"]))
            groups.setdefault(key, {}).setdefault(c["energy_mwh"], c)
    for c in ok:
        if c["energy_mwh"] == 0:
            for key, by_size in groups.items():
                if key[:2] == (c["epsilon"], METHODS.index(c["method"])):
                    by_size.setdefault(0.0, c)
    for key, by_size in sorted(groups.items()):
        eps, method = key[0], METHODS[key[1]]
        lam = None if key[2] == _lam_key(None) else key[2]
        sizes = sorted(by_size)
        for lo, hi in zip(sizes, sizes[1:]):
            d_ri = by_size[hi]["report"]["ri_eps_mod"] - by_size[lo]["report"]["ri_eps_mod"]
            out.append({"epsilon": eps, "method": method, "lambda": lam,
                        "battery_from": lo, "battery_to": hi,
                        "delta_ri": d_ri, "marginal_ri_per_mwh": d_ri / (hi - lo)})
    return out


def run_scenario(sc: Scenario) -> SweepResult:
    jobs = [(sc, b, e, m, lam) for b, e, m, lam in sc.cells()]
    if sc.workers > 1:
        with ProcessPoolExecutor(max_workers=sc.workers) as pool:
            cells = list(pool.map(_run_packed, jobs))
    else:
        cells = [_run_packed(j) for j in jobs]
    cells.sort(key=lambda c: (c["energy_mwh"], c["battery"], _lam_key(c["epsilon"]),
                              METHODS.index(c["method"]), _lam_key(c["lambda"])))
    return SweepResult(cells, marginal_benefit(cells))


def _cell_name(c: dict) -> str:
    eps = "err" if c["epsilon"] is None else f"{c['epsilon']:.6g}"
    lam = "" if c["lambda"] is None else f"_lam{c['lambda']:g}"
    return f"{c['battery']}_eps{eps}_{c['method']}{lam}.json"


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def table_text(result: SweepResult) -> str:
    rows = []
    several = len(result.lambdas) > 1
    for c in result.ok_cells():
        rep = metrics.ReliabilityReport(**c["report"])
        label = f"{c['battery']} {c['method']}"
        if several and c["lambda"] is not None:
            label += f" lam={c['lambda']:g}"
        rows.append((label, rep))
    return metrics.format_table(rows)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    return repr(float(v)) if v is not None and math.isfinite(v) else ""


def emit_report(result: SweepResult, out: Union[str, Path], formats=("json", "table", "csv")) -> list:
    """Write the sweep to ``out``; returns the written paths (sorted)."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ScenarioError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def put(path, text):
        try:
            path.write_text(text)
        except OSError as exc:
            raise ScenarioError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    if "json" in formats:
        (out / "cells").mkdir(exist_ok=True)
        for c in result.cells:
            put(out / "cells" / _cell_name(c), _json(c))
    if "table" in formats:
        put(out / "summary.table.txt", table_text(result))
    if "csv" in formats:
        ok = sorted(result.ok_cells(), key=lambda c: (c["energy_mwh"], c["battery"],
                                                       METHODS.index(c["method"]),
                                                       _lam_key(c["lambda"]), c["epsilon"]))
        rows = [(c["battery"], _num(c["energy_mwh"]), c["method"], _num(c["lambda"]),
                 _num(c["epsilon"]), _num(c["report"]["ri_eps_mod"]),
                 _num(c["report"]["saidi_eps_mod"])) for c in ok]
        put(out / "ri_vs_eps.csv",
            _csv(("battery", "energy_mwh", "method", "lambda", "epsilon", "ri_eps_mod",
                  "saidi_eps_mod"), rows))
        mrows = [(_num(m["epsilon"]), m["method"], _num(m["lambda"]), _num(m["battery_from"]),
                  _num(m["battery_to"]), _num(m["delta_ri"]), _num(m["marginal_ri_per_mwh"]))
                 for m in result.marginal]
        put(out / "marginal.csv",
            _csv(("epsilon", "method", "lambda", "battery_from", "battery_to", "delta_ri",
                  "marginal_ri_per_mwh"), mrows))
    return sorted(written)
