"""Mean-field theory for the block-model election.

Blocks ``0..b-2`` are fully seeded (by default block ``k`` for candidate
``k``) and every undecided voter lives in the last block, where each
candidate may add extra seeds. Replacing each voter's combined influence by
its block average makes every undecided voter see the same scaled influence

    n z_k = (1 / D) * [ r_k p_out + (s_k + r_u h_k) p_in
                        - beta * (r_k lam_k lam_b + (s_k + r_u h_k) lam_b^2) / D ],

with ``lam_i = rho_i p_in + (1 - rho_i) p_out``, ``D = sum_i rho_i lam_i``,
``r_k`` the fraction of n in blocks seeded whole by ``k``, ``s_k`` its extra
seed fraction in the undecided block and ``r_u`` the undecided fraction.
Every ``z_k`` is affine in every seed fraction, which makes percolation
thresholds a matter of intersecting half-lines.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModelError, ParameterError
from .graph import BlockModelParams

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class MeanFieldScenario:
    params: BlockModelParams
    beta: float
    theta: float = 20.0
    seed_fractions: tuple[float, ...] | None = None
    initial_h: tuple[float, ...] | None = None
    whole_block_seeds: Mapping[int, int] | None = None

    def __post_init__(self) -> None:
        b = self.params.b
        if b < 2:
            raise ParameterError("need at least one seeded block and one undecided block")
        K = b - 1
        if not self.beta >= 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta!r}")
        if not self.theta > 0:
            raise ParameterError(f"theta must be > 0, got {self.theta!r}")
        seeds = tuple(float(x) for x in (self.seed_fractions or (0.0,) * K))
        h0 = tuple(float(x) for x in (self.initial_h or (1.0 / K,) * K))
        wbs = dict(self.whole_block_seeds) if self.whole_block_seeds is not None else {i: i for i in range(K)}
        if len(seeds) != K or any(s < 0 for s in seeds):
            raise ParameterError(f"seed_fractions must be {K} nonnegative numbers")
        if len(h0) != K or any(x < 0 for x in h0) or abs(sum(h0) - 1) > 1e-9:
            raise ParameterError(f"initial_h must be a length-{K} probability vector")
        if sorted(wbs) != list(range(K)) or any(not 0 <= k < K for k in wbs.values()):
            raise ParameterError("whole_block_seeds must map every block but the last to a candidate")
        if sum(seeds) > self.params.rho[-1] + FEAS_TOL:
            raise ParameterError(
                f"block_seed_fractions: seeds {sum(seeds):.6g} exceed the undecided block fraction {self.params.rho[-1]:.6g}"
            )
        object.__setattr__(self, "seed_fractions", seeds)
        object.__setattr__(self, "initial_h", h0)
        object.__setattr__(self, "whole_block_seeds", wbs)

    @property
    def K(self) -> int:
        return self.params.b - 1

    @property
    def undecided_fraction(self) -> float:
        return self.params.rho[-1] - sum(self.seed_fractions)

    def with_seeds(self, seeds) -> MeanFieldScenario:
        return MeanFieldScenario(self.params, self.beta, self.theta, tuple(seeds), self.initial_h, self.whole_block_seeds)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "n": p.n, "b": p.b, "p_in": p.p_in, "p_out": p.p_out, "rho": list(p.rho),
            "beta": self.beta, "theta": self.theta,
            "seed_fractions": list(self.seed_fractions),
            "initial_h": list(self.initial_h),
            "whole_block_seeds": {str(b): k for b, k in sorted(self.whole_block_seeds.items())},
        }


def lambda_vector(params: BlockModelParams) -> np.ndarray:
    """Normalised expected degree per block: rho_i p_in + (1 - rho_i) p_out."""
    rho = np.asarray(params.rho)
    return rho * params.p_in + (1.0 - rho) * params.p_out


def _parts(sc: MeanFieldScenario):
    p = sc.params
    lam = lambda_vector(p)
    rho = np.asarray(p.rho)
    denom = float(rho @ lam)
    if denom <= 0:
        raise DegenerateModelError("sum_i rho_i lambda_i is zero; every edge probability vanishes")
    lam_b = lam[-1]
    # a_k: influence of the whole blocks seeded by k
    a = np.zeros(sc.K)
    for blk, k in sc.whole_block_seeds.items():
        a[k] += rho[blk] * p.p_out - sc.beta * rho[blk] * lam[blk] * lam_b / denom
    margin = p.p_in - sc.beta * lam_b**2 / denom
    return a, margin, denom


def meanfield_z(sc: MeanFieldScenario, h=None) -> np.ndarray:
    """Scaled combined influence n z_k seen by every undecided voter."""
    h = np.asarray(sc.initial_h if h is None else h, dtype=float)
    a, margin, denom = _parts(sc)
    mass = np.asarray(sc.seed_fractions) + sc.undecided_fraction * h
    return (a + margin * mass) / denom


@dataclass(frozen=True)
class ConditionReport:
    margin: float
    holds: bool


def nonnegativity_condition(sc: MeanFieldScenario) -> ConditionReport:
    """Margin p_in - beta lam_b^2 / sum rho lam of the nonnegative-influence assumption."""
    _, margin, _ = _parts(sc)
    return ConditionReport(float(margin), bool(margin >= 0))


@dataclass
class ThresholdResult:
    k_star: int
    threshold: float | None
    feasible: bool
    capacity: float
    condition_margin: float
    assumptions_met: bool
    k_star_initially_top: bool
    affine_coefficients: dict[int, tuple[float, float]]
    scenario: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """JSON form; candidates are numbered from 1."""
        return {
            "scenario": self.scenario,
            "k_star": self.k_star + 1,
            "threshold": self.threshold,
            "feasible": self.feasible,
            "capacity": self.capacity,
            "condition_margin": self.condition_margin,
            "assumptions_met": self.assumptions_met,
            "k_star_initially_top": self.k_star_initially_top,
            "affine_coefficients": {
                str(k + 1): {"intercept": c[0], "slope": c[1]} for k, c in sorted(self.affine_coefficients.items())
            },
        }


def affine_coefficients(sc: MeanFieldScenario, k_star: int, rivals_fixed: Mapping[int, float] | None = None):
    """(intercept, slope) of every n z_j as a function of candidate ``k_star``'s seed fraction x.

    Rival seed fractions are held at ``rivals_fixed`` (default: the values
    in ``sc``); ``h`` is held at the scenario's initial PPV.
    """
    K = sc.K
    if not 0 <= k_star < K:
        raise ParameterError(f"k_star {k_star} out of range")
    fixed = list(sc.seed_fractions)
    for j, v in (rivals_fixed or {}).items():
        if j == k_star:
            raise ParameterError("k_star cannot also be a fixed rival")
        fixed[j] = float(v)
    fixed[k_star] = 0.0
    a, margin, denom = _parts(sc)
    h = np.asarray(sc.initial_h)
    free = sc.params.rho[-1] - sum(fixed)
    coeffs = {}
    for j in range(K):
        intercept = (a[j] + margin * (fixed[j] + free * h[j])) / denom
        slope = margin * ((1.0 if j == k_star else 0.0) - h[j]) / denom
        coeffs[j] = (float(intercept), float(slope))
    return coeffs, free


def percolation_threshold(
    sc: MeanFieldScenario,
    k_star: int,
    rivals_fixed: Mapping[int, float] | None = None,
) -> ThresholdResult:
    """Smallest seed fraction of ``k_star`` in the undecided block that makes its z the largest.

    Solves z_{k*}(x) >= z_j(x) for every rival j over x in [0, capacity],
    where capacity is what is left of the undecided block after the rivals'
    seeds. Infeasibility is reported, not raised. ``assumptions_met`` is false
    when the nonnegative-influence margin is negative.
    """
    coeffs, capacity = affine_coefficients(sc, k_star, rivals_fixed)
    a_star, b_star = coeffs[k_star]
    lo, hi = 0.0, capacity
    feasible = capacity >= -FEAS_TOL
    for j, (a_j, b_j) in coeffs.items():
        if j == k_star:
            continue
        slope = b_star - b_j
        gap = a_j - a_star  # need slope * x >= gap
        if slope > 0:
            lo = max(lo, gap / slope)
        elif slope < 0:
            hi = min(hi, gap / slope)
        elif gap > FEAS_TOL:
            feasible = False
    if lo > hi + FEAS_TOL:
        feasible = False
    cond = nonnegativity_condition(sc)
    z0 = np.array([coeffs[j][0] for j in range(sc.K)])
    h0 = np.asarray(sc.initial_h)
    return ThresholdResult(
        k_star=k_star,
        threshold=float(min(lo, max(capacity, 0.0))) if feasible else None,
        feasible=bool(feasible),
        capacity=float(capacity),
        condition_margin=cond.margin,
        assumptions_met=cond.holds,
        k_star_initially_top=bool(h0[k_star] >= h0.max()),
        affine_coefficients=coeffs,
        scenario=sc.to_dict(),
    )


@dataclass
class MeanFieldTrajectory:
    h: np.ndarray
    z: np.ndarray
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.h) - 1


def meanfield_trajectory(sc: MeanFieldScenario, max_iters: int = 1_000_000, eps: float = 1e-8) -> MeanFieldTrajectory:
    """Iterate h <- softmax_update(h, n z(h), theta / n), one step per unit of time.

    Stops after ``max_iters`` steps or once no component moves by ``eps``.
    Row ``t`` of ``h`` is the average undecided PPV after ``t`` steps and row
    ``t`` of ``z`` the scaled influence that drove step ``t + 1``.
    """
    theta_eff = sc.theta / sc.params.n
    a, margin, denom = _parts(sc)
    # plain floats: K is tiny and numpy call overhead dominates otherwise
    a = a.tolist()
    seeds = list(sc.seed_fractions)
    r_u = sc.undecided_fraction
    K = sc.K
    h = [float(x) for x in sc.initial_h]
    hs = [h]
    zs = []
    converged = False
    exp = math.exp
    for _ in range(max_iters):
        z = [(a[k] + margin * (seeds[k] + r_u * h[k])) / denom for k in range(K)]
        zs.append(z)
        shift = max(theta_eff * z[k] for k in range(K) if h[k] > 0)
        w = [exp(theta_eff * z[k] - shift) * h[k] if h[k] > 0 else 0.0 for k in range(K)]
        total = sum(w)
        new = [x / total for x in w]
        hs.append(new)
        step = max(abs(new[k] - h[k]) for k in range(K))
        h = new
        if step < eps:
            converged = True
            break
    zs.append([(a[k] + margin * (seeds[k] + r_u * h[k])) / denom for k in range(K)])
    return MeanFieldTrajectory(np.asarray(hs), np.asarray(zs), converged)
