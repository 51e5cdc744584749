"""Reliability-aware battery dispatch against grid power imbalance.

Modules by concern: :mod:`timeseries` (ingestion and synthesis),
:mod:`battery` (storage dynamics), :mod:`response` (tolerable imbalance
band), :mod:`metrics` (SAIDI-style reliability indices), :mod:`myopic`
(threshold controllers), :mod:`opt_convex` and :mod:`opt_mccormick` (horizon
optimizers), :mod:`oracle` (brute-force reference) and :mod:`scenario`
(battery x epsilon sweeps).  :mod:`estimators` wraps the solvers in a
scikit-learn transformer.
"""
from .battery import BatterySpec, BoundViolation, simulate
from .metrics import ReliabilityReport, report
from .opt_mccormick import HorizonTooLong
from .problem import DispatchResult, ProblemSpec, SocBand, SocPenalty
from .qp import NonConvergence
from .response import ResponseModel
from .scenario import Scenario, run_scenario
from .timeseries import ImbalanceSeries, IngestionError, SynthModel, load_csv, synth, write_csv

__version__ = "0.1.0"

__all__ = [
    "BatterySpec", "BoundViolation", "DispatchResult", "HorizonTooLong", "ImbalanceSeries",
    "IngestionError", "NonConvergence", "ProblemSpec", "ReliabilityReport", "ResponseModel",
    "Scenario", "SocBand", "SocPenalty", "SynthModel", "load_csv", "report", "run_scenario",
    "simulate", "synth", "write_csv", "__version__",
]
