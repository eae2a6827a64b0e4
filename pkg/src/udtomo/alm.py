"""Augmented Lagrangian search for low-fidelity states with a prescribed
measurement vector, and the UDP / UDA verdicts built on top of it.

The outer loop follows the usual multiplier scheme: minimize

    L = alpha * f + beta * <lambda, g> + (mu / 2) * |g|^2

over the ensemble parameters (V, q) with Adam, then either grow the penalty
mu (while gamma * mu <= mu_max) or, once mu is saturated, shrink the
objective weight alpha and afterwards the multiplier weight beta.

Many independent problems (restarts, or different targets sharing a
framework) are advanced in lockstep as one batch so that numpy does the
looping; every batch element keeps its own multipliers, penalty, weights,
step size and random stream, and results do not depend on which other
problems share the batch except through floating-point summation order.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DimensionError, InfeasibleError
from .frameworks import MeasurementFramework
from .rank import RankBudget, RankSource, pure_rank, symmetric_uda_rank, uda_rank_bound
from .states import EnsembleParams, ensemble_density, evaluate, symmetric_coefficients

log = logging.getLogger(__name__)

_TINY = 1e-300


@dataclass(frozen=True)
class AdamConfig:
    step_size: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class ALMConfig:
    """Solver hyperparameters.

    ``step_decay``/``min_step`` shrink the Adam step after every outer
    iteration that ends infeasible (never below ``min_step``), and
    ``feasible_step_decay`` shrinks it after an outer iteration that is
    feasible but still moving the fidelity by more than
    ``fidelity_change_tol``. ``max_attempts`` caps the number of runs per
    target, retries of non-converged runs included. Retries start from
    penalty ``retry_mu0`` instead of ``mu0``: with a weak initial penalty
    the first outer iteration chases low fidelity and, for some targets,
    every seed falls into the same infeasible basin. A run whose penalty
    has reached ``mu_max`` is abandoned once ``stall_window`` outer
    iterations pass without a 10% drop in its best constraint violation.
    """

    gamma: float = 2.0
    delta: float = 0.01
    mu0: float = 1.0
    mu_max: float = 1e6
    alpha_min: float = 1e-4
    beta_min: float = 1e-4
    constraint_tol: float = 1e-6
    fidelity_change_tol: float = 1e-8
    inner_iters: int = 500
    adam: AdamConfig = field(default_factory=AdamConfig)
    n_restarts: int = 5
    max_outer_iters: int = 200
    seed: int = 0
    step_decay: float = 0.8
    min_step: float = 1e-4
    feasible_step_decay: float = 0.1
    max_attempts: int = 10
    retry_mu0: float = 100.0
    stall_window: int = 20

    def __post_init__(self):
        checks = [
            (self.gamma > 1, "gamma must exceed 1"),
            (0 < self.delta < 1, "delta must lie in (0, 1)"),
            (self.mu0 > 0, "mu0 must be positive"),
            (self.mu_max >= self.mu0, "mu_max must be at least mu0"),
            (0 < self.retry_mu0 <= self.mu_max, "retry_mu0 must lie in (0, mu_max]"),
            (0 < self.alpha_min <= 1, "alpha_min must lie in (0, 1]"),
            (0 < self.beta_min <= 1, "beta_min must lie in (0, 1]"),
            (self.constraint_tol > 0, "constraint_tol must be positive"),
            (self.fidelity_change_tol > 0, "fidelity_change_tol must be positive"),
            (self.inner_iters >= 1, "inner_iters must be positive"),
            (self.n_restarts >= 1, "n_restarts must be positive"),
            (self.max_outer_iters >= 1, "max_outer_iters must be positive"),
            (self.adam.step_size > 0, "Adam step size must be positive"),
            (0 <= self.adam.beta1 < 1 and 0 <= self.adam.beta2 < 1, "Adam betas must lie in [0, 1)"),
            (0 < self.step_decay <= 1 and 0 < self.feasible_step_decay <= 1, "step decays must lie in (0, 1]"),
            (self.min_step > 0, "min_step must be positive"),
            (self.stall_window >= 1, "stall_window must be positive"),
            (self.max_attempts >= self.n_restarts, "max_attempts must be at least n_restarts"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def replace(self, **changes) -> "ALMConfig":
        return replace(self, **changes)


@dataclass
class SolveResult:
    """Outcome of one optimizer run.

    ``converged`` means both stopping tests passed; ``early_stop`` means the
    run was cut short because it already reached a feasible point with
    fidelity at or below the requested threshold.
    """

    fidelity: float
    constraint_inf_norm: float
    params: EnsembleParams
    outer_iters: int
    converged: bool
    restarts_used: int = 0
    early_stop: bool = False
    feasible: bool = False
    seed: int | None = None

    def density(self) -> np.ndarray:
        return ensemble_density(self.params)


class Category(enum.Enum):
    UDA = "A"
    UDP_NOT_UDA = "B"
    NOT_UDP = "C"


@dataclass
class UniquenessVerdict:
    """``category`` is None only for targets left unresolved by
    :func:`classify_many` with ``strict=False``."""

    category: Category | None
    udp_result: SolveResult | None
    uda_result: SolveResult | None = None
    witness: np.ndarray | None = None
    udp_runs: int = 0
    uda_runs: int = 0


# --- objective ----------------------------------------------------------------


def augmented_objective(params: EnsembleParams, lam, mu: float, alpha: float, beta: float,
                        target, fw: MeasurementFramework):
    """Value of L and its gradient ``(grad_V, grad_q)`` (same conventions as
    :func:`udtomo.states.evaluate`)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    ev = evaluate(params, target, fw)
    lam = np.asarray(lam, dtype=float)
    g = ev.constraint
    value = alpha * ev.fidelity + beta * float(lam @ g) + 0.5 * mu * float(g @ g)
    weights = beta * lam + mu * g
    d, r = params.V.shape
    jac = weights @ ev.constraint_jacobian
    grad_V = alpha * ev.grad_V + jac[: d * r].reshape(d, r) + 1j * jac[d * r: 2 * d * r].reshape(d, r)
    grad_q = alpha * ev.grad_q + jac[2 * d * r:]
    return value, grad_V, grad_q


class _Problem:
    """Framework data laid out for batched evaluation.

    For Hermitian A and rho, Tr(A rho) is the dot product of the interleaved
    (re, im) views of A and rho, so measurement vectors and the weighted
    operator sum_j w_j A_j are both plain real matrix products.
    """

    def __init__(self, fw: MeasurementFramework, targets: np.ndarray):
        A = np.ascontiguousarray(fw.observables)
        self.m, self.d = A.shape[0], A.shape[1]
        self.A_flat = A.reshape(self.m, -1).view(np.float64)  # (m, 2 d^2)
        self.psi = np.ascontiguousarray(targets, dtype=np.complex128)
        rho_t = np.einsum("bi,bj->bij", self.psi, self.psi.conj())
        self.target_vals = rho_t.reshape(len(self.psi), -1).view(np.float64) @ self.A_flat.T

    def values(self, V, q, idx):
        """Fidelity and constraint residuals for batch rows ``idx``."""
        n = np.maximum(np.sum(V.real**2 + V.imag**2, axis=1), _TINY)
        p = q * q
        p /= np.maximum(p.sum(axis=1, keepdims=True), _TINY)
        pn = p / n
        b = V.shape[0]
        rho = (V * pn[:, None, :]) @ V.conj().transpose(0, 2, 1)
        g = rho.reshape(b, -1).view(np.float64) @ self.A_flat.T - self.target_vals[idx]
        ov = np.einsum("bd,bdr->br", self.psi[idx].conj(), V)
        f = np.sum(pn * (ov.real**2 + ov.imag**2), axis=1)
        return f, g

    def lagrangian_grad(self, V, q, idx, lam, mu, alpha, beta):
        b = V.shape[0]
        n = np.maximum(np.sum(V.real**2 + V.imag**2, axis=1), _TINY)
        qq = q * q
        Q = np.maximum(qq.sum(axis=1, keepdims=True), _TINY)
        p = qq / Q
        pn = p / n
        rho = (V * pn[:, None, :]) @ V.conj().transpose(0, 2, 1)
        g = rho.reshape(b, -1).view(np.float64) @ self.A_flat.T - self.target_vals[idx]
        w = beta[:, None] * lam + mu[:, None] * g
        W = np.ascontiguousarray(w @ self.A_flat).view(np.complex128).reshape(b, self.d, self.d)
        WV = W @ V
        psi = self.psi[idx]
        ov = np.einsum("bd,bdr->br", psi.conj(), V)
        WV += alpha[:, None, None] * psi[:, :, None] * ov[:, None, :]
        h = np.sum(V.real * WV.real + V.imag * WV.imag, axis=1) / n
        grad_V = 2 * pn[:, None, :] * (WV - h[:, None, :] * V)
        grad_q = 2 * q / Q * (h - np.sum(p * h, axis=1, keepdims=True))
        return grad_V, grad_q


def _random_params(rng: np.random.Generator, d: int, r: int):
    V = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    q = rng.standard_normal(r)
    return V / np.linalg.norm(V, axis=0), q / np.linalg.norm(q)


def _adam_inner(prob: _Problem, V, q, idx, lam, mu, alpha, beta, step, cfg: ALMConfig):
    """Run ``cfg.inner_iters`` Adam steps in place on V (as real pairs) and q."""
    b1, b2, eps = cfg.adam.beta1, cfg.adam.beta2, cfg.adam.epsilon
    X = V.view(np.float64)
    mX = np.zeros_like(X)
    vX = np.zeros_like(X)
    mq = np.zeros_like(q)
    vq = np.zeros_like(q)
    sX = step[:, None, None]
    sq = step[:, None]
    for t in range(1, cfg.inner_iters + 1):
        gV, gq = prob.lagrangian_grad(V, q, idx, lam, mu, alpha, beta)
        GX = gV.view(np.float64)
        mX *= b1
        mX += (1 - b1) * GX
        vX *= b2
        vX += (1 - b2) * (GX * GX)
        mq *= b1
        mq += (1 - b1) * gq
        vq *= b2
        vq += (1 - b2) * (gq * gq)
        c1 = 1 - b1**t
        c2 = 1 - b2**t
        X -= (sX / c1) * mX / (np.sqrt(vX / c2) + eps)
        q -= (sq / c1) * mq / (np.sqrt(vq / c2) + eps)


def solve_batch(targets, fw: MeasurementFramework, rank: int, cfg: ALMConfig,
                seeds: Sequence[int], stop_below: float | None = None,
                mu0: Sequence[float] | None = None) -> list[SolveResult]:
    """Run one optimizer attempt per entry of ``seeds`` (paired with the
    corresponding row of ``targets``) and return the final states.
    ``mu0`` optionally overrides the initial penalty per run.

    With ``stop_below`` set, a run also stops as soon as an outer iteration
    ends feasible with fidelity <= ``stop_below``.
    """
    psi = np.atleast_2d(np.asarray(targets, dtype=np.complex128))
    B = len(seeds)
    if psi.shape[0] != B:
        raise DimensionError("need one target row per seed")
    d = fw.dimension
    if psi.shape[1] != d:
        raise DimensionError("target dimension does not match the framework")
    if rank < 1:
        raise ValueError("rank must be at least 1")
    prob = _Problem(fw, psi)
    m = prob.m
    rngs = [np.random.default_rng(int(s)) for s in seeds]
    V = np.empty((B, d, rank), dtype=np.complex128)
    q = np.empty((B, rank))
    for i, rng in enumerate(rngs):
        V[i], q[i] = _random_params(rng, d, rank)

    lam = np.zeros((B, m))
    mu = np.full(B, cfg.mu0) if mu0 is None else np.asarray(mu0, dtype=float).copy()
    if mu.shape != (B,):
        raise DimensionError("need one initial penalty per seed")
    alpha = np.ones(B)
    beta = np.ones(B)
    step = np.full(B, cfg.adam.step_size)
    f_prev = np.full(B, np.inf)
    f_last = np.full(B, np.nan)
    g_last = np.full(B, np.inf)
    outer = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    early = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    best_g = np.full(B, np.inf)
    last_gain = np.zeros(B, dtype=int)
    tol, ftol = cfg.constraint_tol, cfg.fidelity_change_tol

    for _ in range(cfg.max_outer_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Vs = np.ascontiguousarray(V[idx])
        qs = q[idx].copy()
        lam_s, mu_s, al_s, be_s = lam[idx], mu[idx], alpha[idx], beta[idx]
        _adam_inner(prob, Vs, qs, idx, lam_s, mu_s, al_s, be_s, step[idx], cfg)

        # gauge-fix: unit columns and unit q change neither f nor g
        norms = np.sqrt(np.sum(Vs.real**2 + Vs.imag**2, axis=1))
        qn = np.linalg.norm(qs, axis=1)
        for k in np.flatnonzero((norms < 1e-12).any(axis=1) | (qn < 1e-12)):
            rng = rngs[idx[k]]
            bad = norms[k] < 1e-12
            Vs[k][:, bad] = rng.standard_normal((d, bad.sum())) + 1j * rng.standard_normal((d, bad.sum()))
            norms[k][bad] = np.linalg.norm(Vs[k][:, bad], axis=0)
            if qn[k] < 1e-12:
                qs[k] = rng.standard_normal(rank)
                qn[k] = np.linalg.norm(qs[k])
        Vs /= norms[:, None, :]
        qs /= qn[:, None]
        V[idx], q[idx] = Vs, qs

        f, g = prob.values(Vs, qs, idx)
        ginf = np.max(np.abs(g), axis=1)
        feas = ginf < tol
        done_early = feas & (f <= stop_below) if stop_below is not None else np.zeros_like(feas)
        conv = feas & (np.abs(f - f_prev[idx]) < ftol) & ~done_early
        outer[idx] += 1
        gain = ginf < 0.9 * best_g[idx]
        best_g[idx] = np.minimum(best_g[idx], ginf)
        last_gain[idx[gain]] = outer[idx[gain]]
        stalled = ~feas & (mu_s >= cfg.mu_max) & (outer[idx] - last_gain[idx] >= cfg.stall_window)
        finished = conv | done_early | stalled
        f_last[idx], g_last[idx] = f, ginf
        converged[idx[conv]] = True
        early[idx[done_early]] = True
        f_prev[idx] = f

        # multiplier / penalty / weight update for runs that continue
        go = ~finished
        lam_new = lam_s + mu_s[:, None] * g
        grow = go & (cfg.gamma * mu_s <= cfg.mu_max)
        shrink_a = go & ~grow & (al_s / cfg.gamma >= cfg.alpha_min)
        shrink_b = go & ~grow & ~shrink_a
        lam_s = np.where(grow[:, None], lam_new,
                         np.where((shrink_a | shrink_b)[:, None], lam_new / cfg.gamma, lam_s))
        lam[idx] = lam_s
        mu[idx] = np.where(grow, np.minimum(cfg.gamma * mu_s, cfg.mu_max), mu_s)
        alpha[idx] = np.where(shrink_a, np.maximum(al_s / cfg.gamma, cfg.alpha_min), al_s)
        beta[idx] = np.where(shrink_b, np.maximum(be_s / cfg.gamma, cfg.beta_min), be_s)
        st = step[idx]
        step[idx] = np.where(feas, st * cfg.feasible_step_decay, np.maximum(st * cfg.step_decay, cfg.min_step))
        active[idx[finished]] = False

    results = []
    for i in range(B):
        results.append(SolveResult(
            fidelity=float(f_last[i]),
            constraint_inf_norm=float(g_last[i]),
            params=EnsembleParams(V[i].copy(), q[i].copy()),
            outer_iters=int(outer[i]),
            converged=bool(converged[i]),
            early_stop=bool(early[i]),
            feasible=bool(g_last[i] < tol),
            seed=int(seeds[i]),
        ))
    return results


def alm_solve(target, fw: MeasurementFramework, r: int, cfg: ALMConfig | None = None,
              stop_below: float | None = None) -> SolveResult:
    """Minimize the fidelity with ``target`` over rank-<= r states that share
    its measurement vector. Attempt k uses seed ``cfg.seed + k``; a new
    attempt is started whenever one ends without converging, and attempts
    from the second on use ``cfg.retry_mu0``."""
    cfg = cfg or ALMConfig()
    psi = np.asarray(target, dtype=np.complex128)
    best = None
    for k in range(cfg.n_restarts):
        mu0 = cfg.mu0 if k == 0 else cfg.retry_mu0
        res = solve_batch(psi[None], fw, r, cfg, [cfg.seed + k], stop_below, [mu0])[0]
        res.restarts_used = k
        if res.converged or res.early_stop:
            return res
        if best is None or res.constraint_inf_norm < best.constraint_inf_norm:
            best = res
    raise InfeasibleError(f"no feasible solution after {cfg.n_restarts} attempts", best=best)


# --- verdicts -------------------------------------------------------------------


@dataclass
class _Tally:
    next_run: int = 0
    confirmed: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    witness: SolveResult | None = None
    decided: bool = False
    unique: bool | None = None


def _determine_many(targets: np.ndarray, fw: MeasurementFramework, r: int, cfg: ALMConfig,
                    base_seeds: Sequence[int]) -> list[_Tally]:
    """Confirmation protocol for many targets at once.

    A target is declared unique once ``n_restarts`` converged runs all end
    with fidelity > 1 - delta, and non-unique as soon as any run reaches a
    feasible point with fidelity <= 1 - delta. Non-converged runs are
    replaced by fresh ones (run k uses seed base + k, and runs past the
    first ``n_restarts`` start from ``retry_mu0``) until ``max_attempts``
    runs have been spent; if that happens with at least one converged run
    the verdict rests on the runs available.
    """
    threshold = 1 - cfg.delta
    tallies = [_Tally() for _ in range(len(targets))]
    while True:
        rows, seeds, owners = [], [], []
        for i, t in enumerate(tallies):
            if t.decided:
                continue
            want = min(cfg.n_restarts - len(t.confirmed), cfg.max_attempts - t.next_run)
            for _ in range(want):
                rows.append(i)
                seeds.append(int(base_seeds[i]) + t.next_run)
                owners.append(t.next_run)
                t.next_run += 1
        if not rows:
            break
        mu0 = [cfg.mu0 if k < cfg.n_restarts else cfg.retry_mu0 for k in owners]
        results = solve_batch(targets[rows], fw, r, cfg, seeds, stop_below=threshold, mu0=mu0)
        for i, k, res in zip(rows, owners, results):
            res.restarts_used = k
            t = tallies[i]
            if res.feasible and res.fidelity <= threshold and (res.early_stop or res.converged):
                if t.witness is None or res.fidelity < t.witness.fidelity:
                    t.witness = res
            elif res.converged:
                t.confirmed.append(res)
            else:
                t.failed.append(res)
        for t in tallies:
            if t.decided:
                continue
            if t.witness is not None:
                t.decided, t.unique = True, False
            elif len(t.confirmed) >= cfg.n_restarts:
                t.decided, t.unique = True, True
            elif t.next_run >= cfg.max_attempts:
                t.decided = True
                t.unique = True if t.confirmed else None
                if t.confirmed:
                    log.warning("verdict rests on %d of %d confirmation runs", len(t.confirmed), cfg.n_restarts)
    return tallies


def _representative(t: _Tally) -> SolveResult | None:
    if t.witness is not None:
        return t.witness
    if t.confirmed:
        return min(t.confirmed, key=lambda r: r.fidelity)
    if t.failed:
        return min(t.failed, key=lambda r: r.constraint_inf_norm)
    return None


def _raise_if_unresolved(t: _Tally, what: str, partial=None):
    if t.unique is None:
        raise InfeasibleError(f"{what}: no run converged in {t.next_run} attempts",
                              best=_representative(t), partial=partial)


def determine_udp(target, fw: MeasurementFramework, cfg: ALMConfig | None = None):
    """Return ``(is_udp, result)``; ``result`` is the witness run when the
    answer is negative and the lowest-fidelity confirmation run otherwise."""
    cfg = cfg or ALMConfig()
    t = _determine_many(np.asarray(target, dtype=np.complex128)[None], fw, 1, cfg, [cfg.seed])[0]
    _raise_if_unresolved(t, "UDP")
    return t.unique, _representative(t)


def determine_uda(target, fw: MeasurementFramework, cfg: ALMConfig | None = None,
                  budget: RankBudget | None = None):
    cfg = cfg or ALMConfig()
    psi = np.asarray(target, dtype=np.complex128)
    budget = budget or default_uda_budget(fw, psi)
    r = min(budget.max_rank, fw.dimension)
    t = _determine_many(psi[None], fw, r, cfg, [cfg.seed])[0]
    _raise_if_unresolved(t, "UDA")
    return t.unique, _representative(t)


def default_uda_budget(fw: MeasurementFramework, target) -> RankBudget:
    """Rank 5 for symmetric c0/c2/c4 targets under the 66-operator 2-local
    Pauli framework, the generic m-based bound otherwise."""
    if fw.dimension == 16 and len(fw) == 66:
        try:
            symmetric_coefficients(target)
            return symmetric_uda_rank()
        except ValueError:
            pass
    return uda_rank_bound(len(fw))


def classify_many(targets, fw: MeasurementFramework, cfg: ALMConfig | None = None,
                  budget: RankBudget | None = None, seeds: Sequence[int] | None = None,
                  strict: bool = True) -> list[UniquenessVerdict]:
    """Classify each target as UDA, UDP but not UDA, or not UDP.

    The UDA stage only runs for targets that passed the UDP stage, since a
    state that is not UDP cannot be UDA. ``seeds`` gives each target its own
    base seed (default: ``cfg.seed`` for all). With ``strict=False`` targets
    that never produced a converged run get ``category=None`` instead of
    raising :class:`InfeasibleError`.
    """
    cfg = cfg or ALMConfig()
    psi = np.atleast_2d(np.asarray(targets, dtype=np.complex128))
    n = len(psi)
    seeds = [cfg.seed] * n if seeds is None else list(seeds)
    udp = _determine_many(psi, fw, pure_rank().max_rank, cfg, seeds)
    verdicts: list[UniquenessVerdict] = []
    for i, t in enumerate(udp):
        v = UniquenessVerdict(None, _representative(t), udp_runs=t.next_run)
        if t.unique is False:
            v.category = Category.NOT_UDP
            v.witness = t.witness.density()
        elif t.unique is None and strict:
            _raise_if_unresolved(t, "UDP", partial=v)
        verdicts.append(v)

    pending = [i for i, t in enumerate(udp) if t.unique]
    if pending:
        groups: dict[int, list[int]] = {}
        for i in pending:
            b = budget or default_uda_budget(fw, psi[i])
            groups.setdefault(min(b.max_rank, fw.dimension), []).append(i)
        for r, members in groups.items():
            uda = _determine_many(psi[members], fw, r, cfg, [seeds[i] for i in members])
            for i, t in zip(members, uda):
                v = verdicts[i]
                v.uda_result = _representative(t)
                v.uda_runs = t.next_run
                if t.unique is None:
                    if strict:
                        _raise_if_unresolved(t, "UDA", partial=v)
                    continue
                if t.unique:
                    v.category = Category.UDA
                else:
                    v.category = Category.UDP_NOT_UDA
                    v.witness = t.witness.density()
    return verdicts


def classify(target, fw: MeasurementFramework, cfg: ALMConfig | None = None,
             budget: RankBudget | None = None) -> UniquenessVerdict:
    return classify_many(np.asarray(target)[None], fw, cfg, budget)[0]


__all__ = [
    "ALMConfig", "AdamConfig", "Category", "RankSource", "SolveResult", "UniquenessVerdict",
    "alm_solve", "augmented_objective", "classify", "classify_many", "default_uda_budget",
    "determine_uda", "determine_udp", "solve_batch",
]
