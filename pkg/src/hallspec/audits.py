"""Empirical audits of dyadic product and commutator estimates.

Each audit draws random band-limited pairs, evaluates both sides of an
estimate on the lattice and reports the distribution of LHS/RHS. The
constants in such estimates are existential, so the audit only reports
them; stability of the maximum across resolutions is what gets asserted.
"""
from dataclasses import asdict, dataclass, field
import csv
import json
import math

import numpy as np

from . import hall_mhd as H
from . import spectral as S
from .errors import ParameterError
from .fields import relative_difference
from .littlewood_paley import (BesovIndex, besov_norm, build_partition, commutator_blocks,
                               lr_sum, paraproduct_T, remainder_R)

LAWS = ("pl_2", "pl_1", "pl_minus_half", "pl_minus_3quarters", "ns_bilinear")


class PairEnsemble:
    """Reproducible stream of random real field pairs on one grid.

    Each field has Gaussian coefficients with amplitude ``|k|^slope`` filling
    the grid's exact product band; ``slope`` is drawn uniformly from
    ``slope_range`` independently per field, so the ensemble mixes rough and
    smooth data. ``vector=True`` yields divergence-free vector fields.
    """

    def __init__(self, grid, n_pairs=100, seed=0, vector=False, slope_range=(-3.0, -1.5)):
        self.grid = grid
        self.n_pairs = int(n_pairs)
        self.seed = int(seed)
        self.vector = bool(vector)
        self.slope_range = tuple(float(x) for x in slope_range)

    def __len__(self):
        return self.n_pairs

    def __iter__(self):
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_pairs):
            pair = []
            for _ in range(2):
                slope = rng.uniform(*self.slope_range)
                pair.append(S.random_field(self.grid, rng, vector=self.vector, slope=slope,
                                           divergence_free=self.vector))
            yield tuple(pair)

    def describe(self):
        return {"N": self.grid.N, "L": self.grid.L, "n_pairs": self.n_pairs, "seed": self.seed,
                "vector": self.vector, "slope_range": list(self.slope_range),
                "spectrum": "gaussian coefficients, amplitude |k|^slope, product band"}


@dataclass
class AuditResult:
    law: str
    s: float
    p: float
    r: float
    n_samples: int
    n_skipped: int
    max_ratio: float
    p95_ratio: float
    median_ratio: float
    grid: int
    params: dict = field(default_factory=dict)
    ratios: list = field(default_factory=list, repr=False)

    def row(self):
        return {"law": self.law, "s": self.s, "p": _num(self.p), "r": _num(self.r),
                "n_samples": self.n_samples, "max_ratio": self.max_ratio,
                "p95_ratio": self.p95_ratio, "grid": self.grid}

    def summary(self):
        d = asdict(self)
        d.pop("ratios")
        d["p"], d["r"] = _num(self.p), _num(self.r)
        return d


def _num(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def _statistics(law, s, p, r, ratios, skipped, grid, params):
    arr = np.asarray(ratios, dtype=float)
    if arr.size == 0:
        mx = p95 = med = float("nan")
    else:
        mx, p95, med = float(arr.max()), float(np.percentile(arr, 95)), float(np.median(arr))
    return AuditResult(law, s, p, r, int(arr.size), int(skipped), mx, p95, med, grid.N,
                       params, arr.tolist())


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------
def _law_pl_2(part, u, v, p=2.0, r=2.0):
    if not 1 <= p < 6:
        raise ParameterError(f"pl_2 requires 1 <= p < 6, got {p}")
    s = 3.0 / p - 1.0
    lhs = besov_norm(part, S.pointwise_product(u, v), BesovIndex(s, p, r))
    linf = S.lp_norm(v, math.inf)
    rhs = besov_norm(part, u, BesovIndex(s, p, r)) * (
        besov_norm(part, v, BesovIndex(3.0 / p, p, math.inf)) + linf)
    return lhs, rhs, (s, p, r)


def _law_pl_1(part, u, v, p=2.0, r=1.0, r1=2.0, r2=2.0):
    if not 1 <= p < 3:
        raise ParameterError(f"pl_1 requires 1 <= p < 3, got {p}")
    if not math.isclose(1.0 / r, 1.0 / r1 + 1.0 / r2, rel_tol=1e-12):
        raise ParameterError("pl_1 requires 1/r = 1/r1 + 1/r2")
    lhs = besov_norm(part, S.pointwise_product(u, v), BesovIndex(3.0 / p - 2.0, p, r))
    rhs = (besov_norm(part, u, BesovIndex(3.0 / p - 1.0, p, r1))
           * besov_norm(part, v, BesovIndex(3.0 / p - 1.0, p, r2)))
    return lhs, rhs, (3.0 / p - 2.0, p, r)


def _law_minus_half(part, u, v, r=2.0):
    lhs = besov_norm(part, S.pointwise_product(u, v), BesovIndex(-0.5, 2, r))
    rhs = besov_norm(part, u, BesovIndex(0.5, 2, r)) * besov_norm(part, v, BesovIndex(0.5, 2, r))
    return lhs, rhs, (-0.5, 2.0, r)


def _law_minus_3quarters(part, u, v, r=2.0):
    lhs = besov_norm(part, S.pointwise_product(u, v), BesovIndex(-0.75, 2, r))
    rhs = (besov_norm(part, u, BesovIndex(-0.5, 2, r))
           * besov_norm(part, v, BesovIndex(1.25, 2, r)))
    return lhs, rhs, (-0.75, 2.0, r)


def _law_ns(part, u, v, r=2.0, mu=1.0):
    if not 1.5 < r <= 2:
        raise ParameterError(f"ns_bilinear law requires 3/2 < r <= 2, got {r}")
    from .illposedness import ns_bilinear
    lhs = besov_norm(part, ns_bilinear(u, v, mu), BesovIndex(0.0, 3, r))
    rhs = S.lp_norm(u, 3) * S.lp_norm(v, 3)
    return lhs, rhs, (0.0, 3.0, r)


_LAWS = {
    "pl_2": (_law_pl_2, False),
    "pl_1": (_law_pl_1, False),
    "pl_minus_half": (_law_minus_half, False),
    "pl_minus_3quarters": (_law_minus_3quarters, False),
    "ns_bilinear": (_law_ns, True),
}


def law_uses_vectors(law):
    return _LAWS[law][1]


def audit_product_law(ensemble, law, part=None, **params):
    """Ratio statistics of a product law over an ensemble of pairs.

    Pairs whose right-hand side vanishes are skipped and counted.
    ``params`` override the law's exponents (for example ``p`` or ``r``).
    """
    if law not in _LAWS:
        raise ParameterError(f"unknown law {law!r}; expected one of {LAWS}")
    func, _ = _LAWS[law]
    pairs = list(ensemble) if not isinstance(ensemble, PairEnsemble) else ensemble
    ratios, skipped = [], 0
    grid = None
    s = p = r = float("nan")
    for u, v in pairs:
        grid = u.grid
        part = part if part is not None and part.grid == grid else build_partition(grid)
        lhs, rhs, (s, p, r) = func(part, u, v, **params)
        if rhs == 0:
            skipped += 1
            continue
        ratios.append(lhs / rhs)
    return _statistics(law, s, p, r, ratios, skipped, grid, dict(params))


def check_commutator_indices(s, r, rho1, rho2):
    s = float(s)
    if not -1.5 < s <= 1.5:
        raise ParameterError(f"commutator estimate needs s in (-3/2, 3/2], got {s}")
    r = _exp(r, "r")
    rho1 = _exp(rho1, "rho1")
    rho2 = _exp(rho2, "rho2")
    if not rho1 > 2:
        raise ParameterError(f"rho1 must lie in (2, inf], got {rho1}")
    return s, r, rho1, rho2


def _exp(x, name):
    try:
        return BesovIndex(0, x, 1).p
    except ParameterError:
        raise ParameterError(f"{name} must lie in [1, inf], got {x}") from None


def commutator_sides(part, b, a, s, r, rho1, rho2):
    """Left and right sides of the commutator estimate for one pair."""
    blocks = commutator_blocks(part, b, a)
    vol = part.grid.volume
    terms = [2.0 ** (j * s) * math.sqrt(vol * float(np.sum(np.abs(c) ** 2)))
             for j, c in blocks.items()]
    lhs = lr_sum(terms, r)
    i1 = 0.0 if math.isinf(rho1) else 2.0 / rho1
    i2 = 0.0 if math.isinf(rho2) else 2.0 / rho2
    rhs = (besov_norm(part, b, BesovIndex(i1 + 1.5, 2, math.inf))
           * besov_norm(part, a, BesovIndex(s - i1, 2, r))
           + besov_norm(part, b, BesovIndex(s + 1.5 + i2, 2, r))
           * besov_norm(part, a, BesovIndex(-i2, 2, math.inf)))
    return lhs, rhs


def audit_commutator(ensemble, s, r, rho1, rho2, part=None):
    """Ratio statistics for ``l^r_j 2^{js} ||[Delta_j, b] a||_2`` against its two-term bound."""
    s, r, rho1, rho2 = check_commutator_indices(s, r, rho1, rho2)
    ratios, skipped = [], 0
    grid = None
    for b, a in ensemble:
        grid = b.grid
        part = part if part is not None and part.grid == grid else build_partition(grid)
        lhs, rhs = commutator_sides(part, b, a, s, r, rho1, rho2)
        if rhs == 0:
            skipped += 1
            continue
        ratios.append(lhs / rhs)
    return _statistics("commutator", s, 2.0, r, ratios, skipped, grid,
                       {"rho1": _num(rho1), "rho2": _num(rho2)})


# ---------------------------------------------------------------------------
# exact identities
# ---------------------------------------------------------------------------
IDENTITY_CHECKS = ("leray_idempotence", "leray_divergence", "curl_biot_savart", "div_curl",
                   "bony_residual", "hall_energy", "lorentz_work", "v_transport")


def identity_checks(grid, rng, hall=1.0):
    """Normalized defects of exact operator identities for one random draw.

    Every value is a relative quantity that vanishes in exact arithmetic.
    """
    u = S.random_field(grid, rng, vector=True)
    w = S.random_field(grid, rng, vector=True, divergence_free=True)
    Pu = S.leray_project(u)
    out = {
        "leray_idempotence": relative_difference(S.leray_project(Pu), Pu),
        "leray_divergence": Pu.divergence_defect(),
        "curl_biot_savart": relative_difference(S.curl(S.biot_savart(w)), w),
    }
    du = S.divergence(S.curl(u))
    scale = float(np.sqrt(np.sum(grid.xi_sq * np.abs(u.coeffs) ** 2)))
    out["div_curl"] = float(np.linalg.norm(du.coeffs.ravel())) / scale if scale else 0.0
    part = build_partition(grid)
    a = S.random_field(grid, rng)
    b = S.random_field(grid, rng)
    ab = S.pointwise_product(a, b)
    rest = (paraproduct_T(part, a, b).coeffs + paraproduct_T(part, b, a).coeffs
            + remainder_R(part, a, b).coeffs)
    out["bony_residual"] = relative_difference(ab.coeffs, rest)
    B = S.random_field(grid, rng, vector=True, divergence_free=True)
    v = w * hall
    out.update(H.cancellation_check(B, v))
    return out


def identity_suite(grids, seeds, tol=1e-10):
    """Worst defect of each identity over all grids and seeds.

    Returns ``{name: {"max": value, "tol": tol, "passed": bool}}``.
    """
    worst = {name: 0.0 for name in IDENTITY_CHECKS}
    for grid in grids:
        for seed in seeds:
            vals = identity_checks(grid, np.random.default_rng(seed))
            for name, val in vals.items():
                worst[name] = max(worst[name], val)
    return {name: {"max": val, "tol": tol, "passed": bool(val <= tol)}
            for name, val in worst.items()}


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------
CSV_COLUMNS = ["law", "s", "p", "r", "n_samples", "max_ratio", "p95_ratio", "grid"]


def write_audit_csv(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for res in results:
            w.writerow(res.row())


def write_audit_json(path, results, extra=None):
    payload = {"results": [r.summary() for r in results]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_num)
