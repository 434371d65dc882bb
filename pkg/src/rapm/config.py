"""Run configuration files for the command-line front end.

A configuration is a JSON document checked against ``config.schema.json``
(shipped with the package).  Unknown keys are rejected.  Manifests written
by a run embed the fully resolved configuration under ``"config"`` and can
be loaded back with :func:`load_config`.
"""

import copy
import json
import os
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import problems
from .oracles import ProblemSpec, SmoothOracle
from .solvers import BudgetScaled, Fixed, MaxStep, Scaled, SolverConfig, WeakSharp

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "schema", "MANIFEST_VERSION"]

MANIFEST_VERSION = 1


class ConfigError(ValueError):
    """Configuration could not be read or is invalid."""


def schema():
    with resources.files("rapm").joinpath("config.schema.json").open() as fh:
        return json.load(fh)


def _path_of(err):
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _best_error(errors):
    # descend into oneOf/anyOf context so the message names the offending key
    err = jsonschema.exceptions.best_match(errors)
    while err.context:
        err = jsonschema.exceptions.best_match(err.context)
    return err


@dataclass
class RunConfig:
    data: dict
    base_dir: str = "."

    @property
    def problem(self):
        return self.data["problem"]

    @property
    def output_dir(self):
        return self.data["output_dir"]

    def solver_configs(self):
        x0 = self.data.get("x0")
        out = []
        for s in self.data["solvers"]:
            em = s["eta_mode"]
            if em["kind"] == "fixed":
                eta_mode = Fixed(em["value"])
            elif em["kind"] == "budget_scaled":
                eta_mode = BudgetScaled()
            else:
                eta_mode = WeakSharp()
            gr = s["gamma_rule"]
            gamma_rule = MaxStep() if gr["kind"] == "max_step" else Scaled(gr["fraction"])
            out.append(
                SolverConfig(
                    variant=s["variant"],
                    K=s["K"],
                    eta_mode=eta_mode,
                    gamma_rule=gamma_rule,
                    x0=None if x0 is None else np.array(x0, dtype=np.float64),
                    record_every=s["record_every"],
                    seed=self.problem.get("seed", 0),
                    eta0=s.get("eta0", 1.0),
                )
            )
        return out

    def resolve_path(self, p):
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(self.base_dir, p))

    def build_problem(self):
        pr = self.problem
        kind = pr["kind"]
        if kind == "weak_sharp_box":
            if "c" in pr:
                n = pr.get("n", len(pr["c"]))
                p = problems.make_weak_sharp_box(n, pr["c"], pr["p"])
            else:
                p = problems.random_weak_sharp_box(pr["n"], pr["n_positive"], pr["seed"])
        elif kind == "sparse_regression":
            p = problems.make_sparse_regression(
                pr["m_tr"], pr["m_val"], pr["n"], pr["k_sparse"], pr["noise_sigma"], pr["radius"], pr["seed"]
            )
        else:
            p = problems.load_regression_csv(
                self.resolve_path(pr["A_tr"]),
                self.resolve_path(pr["b_tr"]),
                self.resolve_path(pr["A_val"]),
                self.resolve_path(pr["b_val"]),
                pr["radius"],
            )
        if self.data["debug"].get("nonconvex_upper"):
            p = _nonconvex_upper(p)
        return p


def _nonconvex_upper(p):
    # test hook: subtract L ||x||^2 so the upper level loses convexity
    L = p.upper.lipschitz or 1.0
    up = p.upper
    bad = SmoothOracle(
        value=lambda x: up.value(x) - L * float(x @ x),
        gradient=lambda x: up.gradient(x) - 2.0 * L * x,
        lipschitz=L,
    )
    return ProblemSpec(
        upper=bad,
        lower=p.lower,
        nonsmooth=p.nonsmooth,
        dimension=p.dimension,
        ground_truth=None,
        key=p.key + "+nonconvex",
        data=p.data,
    )


def _resolve(data):
    d = copy.deepcopy(data)
    for s in d["solvers"]:
        s.setdefault("eta_mode", {"kind": "budget_scaled"})
        s.setdefault("gamma_rule", {"kind": "max_step"})
        s.setdefault("record_every", 1)
        if s["variant"] == "aIRG":
            s.setdefault("eta0", 1.0)
    d.setdefault("x0", None)
    d.setdefault("output_dir", "rapm_out")
    d.setdefault("reference_budget", 10 * max(s["K"] for s in d["solvers"]))
    d.setdefault("include_timings", False)
    cert = d.setdefault("certify", {})
    for k in ("lemma_chain", "rate_envelopes", "budget_bounds", "weak_sharpness"):
        cert.setdefault(k, True)
    val = d.setdefault("validation", {})
    val.setdefault("n_samples", 20)
    val.setdefault("seed", 0)
    dbg = d.setdefault("debug", {})
    dbg.setdefault("nonconvex_upper", False)
    dbg.setdefault("corrupt_iterate", None)
    return d


def parse_config(data, base_dir=".", output_dir=None, seed=None):
    """Validate a config mapping and fill in defaults; returns a :class:`RunConfig`."""
    if isinstance(data, dict) and "manifest_version" in data:
        data = data.get("config")
    validator = jsonschema.Draft202012Validator(schema())
    errors = list(validator.iter_errors(data))
    if errors:
        err = _best_error(errors)
        raise ConfigError(f"invalid config at {_path_of(err)}: {err.message}")
    d = _resolve(data)
    if output_dir is not None:
        d["output_dir"] = output_dir
    if seed is not None and "seed" in d["problem"]:
        d["problem"]["seed"] = int(seed)
    cfg = RunConfig(d, base_dir)
    if d["problem"]["kind"] == "csv":
        for key in ("A_tr", "b_tr", "A_val", "b_val"):
            path = cfg.resolve_path(d["problem"][key])
            if not os.path.exists(path):
                raise ConfigError(f"invalid config at problem.{key}: file not found: {path}")
            d["problem"][key] = os.path.abspath(path)
    if d["x0"] is not None and d["problem"].get("n") not in (None, len(d["x0"])):
        raise ConfigError(f"invalid config at x0: length {len(d['x0'])} does not match problem.n")
    return cfg


def load_config(path, output_dir=None, seed=None):
    """Read a config (or a run manifest) from ``path``."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    return parse_config(data, os.path.dirname(os.path.abspath(path)), output_dir, seed)
