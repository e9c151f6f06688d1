"""Ground-truth graphs, Gaussian Markov random field samples and mask perturbation.

Random streams come from numpy's PCG64 seeded through ``SeedSequence``.
Experiments derive one independent substream per trial with
:func:`trial_rng`, so a trial's draws do not depend on how many other
trials run or in which order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import ConnectivityMask, LaplacianClass, LaplacianMatrix, ValidationError, validate_class

TOPOLOGIES = ("grid", "er", "modular")
MAX_REDRAWS = 100


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream ``key`` (for example a trial index) of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class GraphSpec:
    """Random graph model.

    Attributes
    ----------
    topology : {"grid", "er", "modular"}
        ``grid`` places ``n`` (a perfect square) vertices on a lattice with
        4-neighbour edges; ``er`` joins each pair with probability ``p``;
        ``modular`` splits vertices into ``modules`` equal groups joined with
        probability ``p2`` inside a group and ``p1`` across groups.
    vertex_weights : {"uniform", "zero"}
        ``uniform`` gives a DDGL ground truth, ``zero`` a CGL.
    """

    topology: str
    n: int
    p: float = 0.1
    p1: float = 0.1
    p2: float = 0.3
    modules: int = 4
    weight_low: float = 0.1
    weight_high: float = 3.0
    vertex_weights: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValidationError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if self.n < 2:
            raise ValidationError("n must be at least 2")
        for name in ("p", "p1", "p2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.topology == "grid" and round(np.sqrt(self.n)) ** 2 != self.n:
            raise ValidationError(f"grid topology needs a perfect square n, got {self.n}")
        if self.topology == "modular" and not 1 <= self.modules <= self.n:
            raise ValidationError("modules must lie between 1 and n")
        if not 0.0 <= self.weight_low <= self.weight_high:
            raise ValidationError("weight bounds must satisfy 0 <= low <= high")
        if self.vertex_weights not in ("uniform", "zero"):
            raise ValidationError("vertex_weights must be 'uniform' or 'zero'")

    @property
    def laplacian_class(self) -> LaplacianClass:
        return LaplacianClass.DDGL if self.vertex_weights == "uniform" else LaplacianClass.CGL

    def label(self) -> str:
        if self.topology == "grid":
            return f"grid({self.n})"
        if self.topology == "er":
            return f"er({self.n},{self.p:g})"
        return f"modular({self.n},{self.p1:g},{self.p2:g})"

    def as_dict(self) -> dict:
        return asdict(self)


def grid_mask(n: int) -> np.ndarray:
    side = int(round(np.sqrt(n)))
    a = np.zeros((n, n), dtype=np.int8)
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                a[v, v + 1] = a[v + 1, v] = 1
            if r + 1 < side:
                a[v, v + side] = a[v + side, v] = 1
    return a


def _random_mask(spec: GraphSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    iu, ju = np.triu_indices(n, 1)
    if spec.topology == "er":
        prob = np.full(iu.size, spec.p)
    else:
        group = np.empty(n, dtype=np.int64)
        for g, idx in enumerate(np.array_split(np.arange(n), spec.modules)):
            group[idx] = g
        prob = np.where(group[iu] == group[ju], spec.p2, spec.p1)
    keep = rng.random(iu.size) < prob
    a = np.zeros((n, n), dtype=np.int8)
    a[iu[keep], ju[keep]] = 1
    return a | a.T


def generate_graph(spec: GraphSpec, seed=None):
    """Draw a ground-truth Laplacian and its connectivity mask.

    Parameters
    ----------
    spec : GraphSpec
    seed : int, SeedSequence or Generator, optional
        Overrides ``spec.seed``.

    Returns
    -------
    (LaplacianMatrix, ConnectivityMask)

    Raises
    ------
    ValidationError
        If a CGL is requested and every one of 100 draws is disconnected.
    """
    rng = _rng(spec.seed if seed is None else seed)
    kind = spec.laplacian_class
    for _ in range(MAX_REDRAWS):
        a = grid_mask(spec.n) if spec.topology == "grid" else _random_mask(spec, rng)
        mask = ConnectivityMask(a)
        if kind is LaplacianClass.DDGL or mask.is_connected():
            break
    else:
        raise ValidationError(f"no connected {spec.label()} graph in {MAX_REDRAWS} draws")
    iu, ju = np.nonzero(np.triu(mask.entries, 1))
    w = rng.uniform(spec.weight_low, spec.weight_high, size=iu.size)
    theta = np.zeros((spec.n, spec.n))
    theta[iu, ju] = -w
    theta[ju, iu] = -w
    degrees = -theta.sum(axis=1)
    if kind is LaplacianClass.DDGL:
        vw = rng.uniform(spec.weight_low, spec.weight_high, size=spec.n)
    else:
        vw = np.zeros(spec.n)
    theta[np.diag_indices(spec.n)] = degrees + vw
    return LaplacianMatrix(theta, kind), mask


def sample_gmrf(l, k: int, seed=None) -> np.ndarray:
    """Draw ``k`` samples from the zero-mean Gaussian with covariance ``pinv(L)``.

    Returns a ``k x n`` array.  Eigenvalues below ``1e-10`` times the largest
    are treated as zero, so samples from a CGL have no component along the
    constant vector.
    """
    t = l.theta if isinstance(l, LaplacianMatrix) else np.asarray(l, dtype=float)
    if k < 1:
        raise ValidationError("sample count must be positive")
    ev, u = np.linalg.eigh(0.5 * (t + t.T))
    top = max(float(ev[-1]), 0.0)
    if ev[0] < -1e-9 * max(top, 1.0):
        raise ValidationError(f"matrix is indefinite (smallest eigenvalue {ev[0]:.3g})")
    keep = ev > 1e-10 * top
    scale = np.zeros_like(ev)
    scale[keep] = 1.0 / np.sqrt(ev[keep])
    b = u * scale
    z = _rng(seed).standard_normal((k, t.shape[0]))
    return z @ b.T


def laplacian_quadratic_form(l, x) -> float:
    """``x^T L x``."""
    t = l.theta if isinstance(l, LaplacianMatrix) else np.asarray(l, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != (t.shape[0],):
        raise ValidationError(f"vector of length {t.shape[0]} expected, got shape {x.shape}")
    return float(x @ t @ x)


def laplacian_quadratic_form_edges(l, x) -> float:
    """The same quadratic form summed over vertex weights and edges."""
    lm = l if isinstance(l, LaplacianMatrix) else LaplacianMatrix(np.asarray(l, dtype=float))
    x = np.asarray(x, dtype=float)
    w = lm.edge_weights
    iu, ju = np.triu_indices(lm.n, 1)
    return float(np.sum(lm.vertex_weights * x**2) + np.sum(w[iu, ju] * (x[iu] - x[ju]) ** 2))


def perturb_connectivity(a, fraction: float, seed=None) -> ConnectivityMask:
    """Swap ``round(fraction * edges)`` present edges with absent vertex pairs.

    The edge count is preserved.  Counting uses the upper triangle.
    """
    mask = a if isinstance(a, ConnectivityMask) else ConnectivityMask(np.asarray(a))
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError("fraction must lie in [0, 1]")
    n = mask.n
    iu, ju = np.triu_indices(n, 1)
    present = mask.entries[iu, ju] == 1
    ones = np.flatnonzero(present)
    zeros = np.flatnonzero(~present)
    r = int(np.floor(fraction * ones.size + 0.5))
    if r > zeros.size:
        raise ValidationError(f"cannot swap {r} edges: only {zeros.size} absent pairs")
    rng = _rng(seed)
    drop = rng.choice(ones, size=r, replace=False)
    add = rng.choice(zeros, size=r, replace=False)
    out = mask.entries.copy()
    out[iu[drop], ju[drop]] = 0
    out[iu[add], ju[add]] = 1
    out = np.triu(out, 1)
    return ConnectivityMask(out + out.T)
