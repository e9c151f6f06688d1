"""Accuracy metrics, the regularization grid and the Monte-Carlo benchmark harness.

Regularization is selected with access to the ground truth: every value on
the grid is tried and the one with the smallest relative error is kept.
This measures how well a method can do, not how to tune it in practice.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .cgl import estimate_cgl
from .core import (
    ConnectivityMask,
    LaplaceLearnError,
    LaplacianClass,
    RegularizationMatrix,
    ValidationError,
    build_statistic,
)
from .ggl import EstimatorConfig, estimate_ggl
from .synthetic import GraphSpec, generate_graph, perturb_connectivity, sample_gmrf, trial_rng

logger = logging.getLogger(__name__)

EDGE_TOL = 1e-8
DEFAULT_K_OVER_N = (0.5, 1, 2, 5, 10, 30, 100, 250, 1000)

# substream purposes under each trial index
_GRAPH, _SAMPLES, _MASK = 0, 1, 2


def relative_error(theta_hat, theta_star) -> float:
    """``||theta_hat - theta_star||_F / ||theta_star||_F``."""
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta_star, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    denom = np.linalg.norm(b)
    if denom == 0.0:
        raise ValidationError("ground truth is the zero matrix")
    return float(np.linalg.norm(a - b) / denom)


def edge_confusion(theta_hat, theta_star, edge_tol: float = EDGE_TOL):
    """``(tp, fp, fn)`` counts of upper-triangle edges (entries below ``-edge_tol``)."""
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta_star, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    iu = np.triu_indices(a.shape[0], 1)
    est = a[iu] < -edge_tol
    true = b[iu] < -edge_tol
    return int(np.sum(est & true)), int(np.sum(est & ~true)), int(np.sum(~est & true))


def f_score(theta_hat, theta_star, edge_tol: float = EDGE_TOL) -> float:
    """``2 tp / (2 tp + fn + fp)``; 1 when neither matrix has edges."""
    tp, fp, fn = edge_confusion(theta_hat, theta_star, edge_tol)
    denom = 2 * tp + fn + fp
    return 1.0 if denom == 0 else 2.0 * tp / denom


def alpha_grid(s, k: int) -> list:
    """Zero followed by ``0.75^r s_max sqrt(ln(n) / k)`` for ``r = 14..1``, ascending.

    ``s_max`` is the largest off-diagonal magnitude of ``s``.  Duplicate
    values (all of them when ``s_max = 0``) are dropped.
    """
    s = getattr(s, "s", s)
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if k < 1:
        raise ValidationError("k must be positive")
    if n < 2:
        raise ValidationError("n must be at least 2")
    off = np.abs(s[~np.eye(n, dtype=bool)])
    s_max = float(off.max())
    base = s_max * np.sqrt(np.log(n) / k)
    values = [0.0] + [0.75**r * base for r in range(14, 0, -1)]
    return sorted(set(values))


@dataclass(frozen=True)
class Method:
    """Estimator plus the mask it is given.

    ``mask`` is ``"true"`` (ground-truth connectivity), ``"full"`` (all
    pairs) or ``"perturbed"`` (ground truth with a ``mismatch`` fraction of
    edges swapped).
    """

    problem: str
    mask: str = "true"
    mismatch: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "problem", LaplacianClass.parse(self.problem).value)
        if self.mask not in ("true", "full", "perturbed"):
            raise ValidationError(f"unknown mask mode {self.mask!r}")

    @property
    def label(self) -> str:
        if self.mask == "full":
            return self.problem
        if self.mask == "true":
            return f"{self.problem}(A)"
        return f"{self.problem}(A{round(100 * self.mismatch)}%)"

    @classmethod
    def parse(cls, text: str) -> "Method":
        """Parse ``GGL``, ``GGL(A)`` or ``GGL(A25%)`` style labels."""
        m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*A\s*(?:(\d+(?:\.\d+)?)\s*%)?\s*\))?\s*", text)
        if not m:
            raise ValidationError(f"cannot parse method {text!r}")
        problem, pct = m.group(1), m.group(2)
        if "(" not in text:
            return cls(problem, "full")
        if pct is None:
            return cls(problem, "true")
        return cls(problem, "perturbed", float(pct) / 100.0)


@dataclass
class TrialRecord:
    spec: str
    method: str
    trial: int
    seed: int
    k_over_n: float
    k: int
    alpha: float | None
    relative_error: float | None
    f_score: float | None
    cycles: int | None
    seconds: float
    error: str | None = None
    ascents: int = 0
    max_ascent: float = 0.0


@dataclass
class CellSummary:
    spec: str
    method: str
    k_over_n: float
    trials: int
    failures: int
    mean_re: float
    std_re: float
    mean_fs: float
    std_fs: float


@dataclass
class ExperimentReport:
    records: list = field(default_factory=list)
    seed: int = 0
    version: str = __version__
    config: dict = field(default_factory=dict)

    def aggregate(self) -> list:
        cells = {}
        for r in sorted(self.records, key=lambda r: (r.spec, r.method, r.k_over_n, r.trial)):
            cells.setdefault((r.spec, r.method, r.k_over_n), []).append(r)
        out = []
        for (spec, method, kn), recs in cells.items():
            ok = [r for r in recs if r.error is None]
            re_ = np.array([r.relative_error for r in ok], dtype=float)
            fs = np.array([r.f_score for r in ok], dtype=float)
            out.append(
                CellSummary(
                    spec,
                    method,
                    kn,
                    len(recs),
                    len(recs) - len(ok),
                    float(re_.mean()) if ok else float("nan"),
                    float(re_.std()) if ok else float("nan"),
                    float(fs.mean()) if ok else float("nan"),
                    float(fs.std()) if ok else float("nan"),
                )
            )
        return out

    def cell(self, method: str, k_over_n: float, spec: str | None = None) -> CellSummary:
        for c in self.aggregate():
            if c.method == method and c.k_over_n == k_over_n and (spec is None or c.spec == spec):
                return c
        raise KeyError((method, k_over_n, spec))

    def to_json(self, path=None) -> str:
        payload = {
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "trials": [asdict(r) for r in self.records],
            "aggregate": [asdict(c) for c in self.aggregate()],
        }
        text = json.dumps(payload, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path) -> None:
        names = list(TrialRecord.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for r in self.records:
                writer.writerow([getattr(r, k) for k in names])

    def curve_csv(self, path) -> None:
        """Plot-ready rows ``spec, method, k_over_n, mean_re, mean_fs``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["spec", "method", "k_over_n", "mean_re", "mean_fs"])
            for c in self.aggregate():
                writer.writerow([c.spec, c.method, c.k_over_n, c.mean_re, c.mean_fs])


def estimate(problem: str, s, mask, alpha: float, cfg: EstimatorConfig):
    """Run the estimator for ``problem`` with the ``l1`` regularization ``alpha``."""
    problem = LaplacianClass.parse(problem)
    h = RegularizationMatrix.l1(s.n, alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if problem is LaplacianClass.CGL:
            return estimate_cgl(s, mask, h, cfg)
        cfg = EstimatorConfig(**{**asdict(cfg), "target_class": problem.value})
        return estimate_ggl(s, mask, h, cfg)


def sweep_alpha(problem, s, k, mask, theta_star, cfg, alphas=None):
    """Best-RE estimate over ``alphas`` (default: the regularization grid).

    Returns ``(alpha, re, fs, cycles, violations)`` where ``violations``
    collects the objective increases recorded over every grid point (only
    populated when ``cfg.debug`` is set).
    """
    best = None
    last_error = None
    violations = []
    for alpha in alpha_grid(s, k) if alphas is None else alphas:
        try:
            res = estimate(problem, s, mask, alpha, cfg)
        except LaplaceLearnError as exc:
            last_error = exc
            continue
        violations.extend(res.descent_violations)
        re_ = relative_error(res.theta.theta, theta_star)
        if best is None or re_ < best[1]:
            best = (alpha, re_, f_score(res.theta.theta, theta_star), res.cycles)
    if best is None:
        raise last_error or ValidationError("empty regularization grid")
    return (*best, violations)


def _mask_for(method: Method, true_mask: ConnectivityMask, seed: int, trial: int, index: int):
    if method.mask == "full":
        return ConnectivityMask.full(true_mask.n)
    if method.mask == "true":
        return true_mask
    return perturb_connectivity(true_mask, method.mismatch, trial_rng(seed, trial, _MASK, index))


def run_trial(spec: GraphSpec, k_over_n, methods, trial: int, seed: int, cfg: EstimatorConfig, fixed_alpha=None) -> list:
    """All records of one trial: one ground truth, one sample set per k/n."""
    theta_star, true_mask = generate_graph(spec, trial_rng(seed, trial, _GRAPH))
    masks = [_mask_for(m, true_mask, seed, trial, i) for i, m in enumerate(methods)]
    records = []
    for ki, kn in enumerate(k_over_n):
        k = max(1, int(round(kn * spec.n)))
        x = sample_gmrf(theta_star, k, trial_rng(seed, trial, _SAMPLES, ki))
        s = build_statistic(x)
        for method, mask in zip(methods, masks):
            t0 = time.perf_counter()
            try:
                alpha, re_, fs, cycles, viol = sweep_alpha(
                    method.problem, s, k, mask, theta_star.theta, cfg, None if fixed_alpha is None else [fixed_alpha]
                )
                rec = TrialRecord(spec.label(), method.label, trial, seed, kn, k, alpha, re_, fs, cycles, 0.0)
                rec.ascents = len(viol)
                rec.max_ascent = max((v.relative_increase for v in viol), default=0.0)
            except LaplaceLearnError as exc:
                rec = TrialRecord(spec.label(), method.label, trial, seed, kn, k, None, None, None, None, 0.0, str(exc))
            rec.seconds = time.perf_counter() - t0
            records.append(rec)
    return records


def run_benchmark(
    spec: GraphSpec,
    k_over_n=DEFAULT_K_OVER_N,
    methods=("GGL(A)",),
    trials: int = 10,
    seed: int = 0,
    jobs: int = 1,
    cfg: EstimatorConfig | None = None,
    alpha: float | None = None,
) -> ExperimentReport:
    """Monte-Carlo accuracy study.

    Parameters
    ----------
    spec : GraphSpec
        Ground-truth model.
    k_over_n : sequence of float
        Sample counts as multiples of ``n``.
    methods : sequence of Method or str
        For example ``"GGL(A)"`` (true mask), ``"GGL"`` (no mask) or
        ``"GGL(A25%)"`` (25% of edges swapped).
    trials : int
        Independent ground truths; trial ``t`` draws from substream ``t`` of
        ``seed``.
    jobs : int
        Worker processes; results do not depend on it.
    alpha : float, optional
        Fixed regularization weight.  By default each estimate is the
        best-RE point of the regularization grid.

    Returns
    -------
    ExperimentReport
        Trial failures are recorded with an error message.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    methods = [m if isinstance(m, Method) else Method.parse(m) for m in methods]
    if not methods:
        raise ValidationError("at least one method is required")
    k_over_n = [float(v) for v in k_over_n]
    if not k_over_n or any(v <= 0 for v in k_over_n):
        raise ValidationError("k/n values must be positive")
    cfg = cfg or EstimatorConfig()
    if alpha is not None and alpha < 0:
        raise ValidationError("alpha must be nonnegative")
    args = [(spec, k_over_n, methods, t, seed, cfg, alpha) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_trial_args, args))
    else:
        chunks = [_run_trial_args(a) for a in args]
    records = [r for chunk in chunks for r in chunk]
    config = {
        "spec": spec.as_dict(),
        "k_over_n": k_over_n,
        "methods": [m.label for m in methods],
        "trials": trials,
        "epsilon": cfg.epsilon,
        "alpha": "grid" if alpha is None else alpha,
    }
    return ExperimentReport(records, seed, __version__, config)


def _run_trial_args(args):
    return run_trial(*args)
