"""Drift-plus-penalty baseline: greedy per-slot minimization over the two
action simplexes.

Each slot solves

    min_{alpha, beta}  sum_i q_i (a_i - alpha_i f_E/w_i - beta_i B)
                       + V' [C_E(alpha) + C_C(alpha, beta)]

(optionally plus the quadratic drift term) by multi-start projected gradient
descent with an analytic subgradient and exact Euclidean simplex projection.
The discontinuous per-core cloud cost has no usable gradient, so the solver
refuses it outright instead of returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .env import (Action, EdgeCloudEnv, Trace, cloud_cost, compute_offload,
                  edge_cost)


class UnsupportedObjectiveError(RuntimeError):
    """Objective the gradient solver cannot minimize (discontinuous cost)."""


class SolverDivergedError(RuntimeError):
    """Non-finite objective or gradient during descent."""


OBJECTIVE_KINDS = ("linear-drift", "full-bound")


@dataclass(frozen=True)
class DppConfig:
    penalty_weight: float = 0.0          # V'
    objective_kind: str = "linear-drift"
    iterations: int = 200
    step_size: float = 0.5
    restarts: int = 8                    # random starts beside uniform + idle
    tolerance: float = 1e-8              # relative objective-change stop

    def __post_init__(self):
        if self.objective_kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.objective_kind!r}")
        if self.iterations < 1 or self.restarts < 1 or self.tolerance <= 0:
            raise ValueError("iterations >= 1, restarts >= 1, tolerance > 0 required")


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} by iterative active-set
    removal: shift the active coordinates to sum to one, drop any that went
    nonpositive, repeat. Exact in at most n passes."""
    v = np.asarray(v, dtype=float)
    active = np.ones(v.size, dtype=bool)
    n_active = v.size
    tau = (v.sum() - 1.0) / n_active
    for _ in range(v.size):
        keep = active & (v > tau)
        n_keep = int(keep.sum())
        if n_keep == n_active or n_keep == 0:
            break
        active = keep
        n_active = n_keep
        tau = (v[active].sum() - 1.0) / n_active
    return np.maximum(v - tau, 0.0)


def dpp_objective(q, a, action: Action, cfg: SystemConfig,
                  dpp_cfg: DppConfig) -> float:
    """Drift-plus-penalty value of one candidate action at observed (q, a)."""
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)
    d = a - action.alpha_eff * cfg.edge_clock / cfg.workloads \
        - action.beta_eff * cfg.bandwidth
    value = float(np.dot(q, d))
    if dpp_cfg.objective_kind == "full-bound":
        value += 0.5 * float(np.dot(d, d))
    if dpp_cfg.penalty_weight != 0.0:
        o = compute_offload(q + a, action, cfg)
        value += dpp_cfg.penalty_weight * (edge_cost(action, cfg)
                                           + cloud_cost(o, cfg))
    return value


def _objective_and_gradient(q, a, alpha, beta, cfg: SystemConfig,
                            dpp_cfg: DppConfig):
    """Value plus subgradient w.r.t. the full (N+1)-vectors; the dummy slack
    coordinates never enter the objective, so their gradient is zero."""
    n = cfg.n_queues
    s = cfg.edge_clock / cfg.workloads          # bits served per unit alpha
    B = cfg.bandwidth
    ae, be = alpha[:n], beta[:n]
    d = a - ae * s - be * B

    value = float(np.dot(q, d))
    g_alpha = np.zeros(n + 1)
    g_beta = np.zeros(n + 1)
    g_alpha[:n] = -q * s
    g_beta[:n] = -q * B
    if dpp_cfg.objective_kind == "full-bound":
        value += 0.5 * float(np.dot(d, d))
        g_alpha[:n] += -s * d
        g_beta[:n] += -B * d

    Vp = dpp_cfg.penalty_weight
    if Vp != 0.0:
        ghz = 1e9
        sum_alpha = float(ae.sum())
        per_core = cfg.edge_clock * sum_alpha / cfg.edge_cores / ghz
        value += Vp * cfg.edge_cores * per_core ** 3
        g_alpha[:n] += Vp * 3.0 * per_core ** 2 * cfg.edge_clock / ghz

        remaining = q + a - ae * s
        o = np.maximum(0.0, np.minimum(be * B, remaining))
        W = float(np.dot(cfg.workloads, o))
        if W > 0.0:
            value += Vp * cfg.cloud_cores * (W / cfg.cloud_cores / ghz) ** 3
            dC_dW = 3.0 * (W / cfg.cloud_cores / ghz) ** 2 / ghz
            # min() subgradient: bandwidth-limited branch wins at ties
            bw_branch = (remaining > 0.0) & (be * B <= remaining)
            bl_branch = (remaining > 0.0) & ~bw_branch
            g_beta[:n] += np.where(bw_branch, Vp * dC_dW * cfg.workloads * B, 0.0)
            g_alpha[:n] += np.where(bl_branch, -Vp * dC_dW * cfg.workloads * s, 0.0)
    return value, g_alpha, g_beta


def _descend(q, a, alpha, beta, cfg, dpp_cfg):
    """Projected gradient descent from one start; objective never increases."""
    f, g_a, g_b = _objective_and_gradient(q, a, alpha, beta, cfg, dpp_cfg)
    step = dpp_cfg.step_size
    for _ in range(dpp_cfg.iterations):
        if not (np.isfinite(f) and np.all(np.isfinite(g_a)) and np.all(np.isfinite(g_b))):
            raise SolverDivergedError(
                f"non-finite objective/gradient: f={f}, "
                f"|g|={np.max(np.abs(np.concatenate([g_a, g_b])))}")
        trial = min(2.0 * step, dpp_cfg.step_size)
        accepted = False
        for _ in range(60):
            na = project_simplex(alpha - trial * g_a)
            nb = project_simplex(beta - trial * g_b)
            fn = dpp_objective(q, a, Action(na, nb), cfg, dpp_cfg)
            if fn < f:
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            break
        step = trial
        done = (f - fn) <= dpp_cfg.tolerance * max(1.0, abs(fn))
        alpha, beta, f = na, nb, fn
        if done:
            break
        _, g_a, g_b = _objective_and_gradient(q, a, alpha, beta, cfg, dpp_cfg)
    return f, alpha, beta


def dpp_step_optimize(q, a, cfg: SystemConfig, dpp_cfg: DppConfig,
                      rng: np.random.Generator,
                      extra_starts: tuple = ()) -> Action:
    """Best feasible action over uniform, all-idle, any extra, and
    dpp_cfg.restarts random simplex starts."""
    if cfg.cloud_cost_kind != "cubic":
        raise UnsupportedObjectiveError(
            f"cloud cost kind {cfg.cloud_cost_kind!r} is discontinuous; "
            "the gradient-based drift-plus-penalty solver does not support it")
    q = np.asarray(q, dtype=float)
    a = np.asarray(a, dtype=float)
    n = cfg.n_queues

    starts = [Action.uniform(n), Action.idle(n)]
    starts.extend(extra_starts)
    ones = np.ones(n + 1)
    for _ in range(dpp_cfg.restarts):
        starts.append(Action(rng.dirichlet(ones), rng.dirichlet(ones)))

    best = None
    for start in starts:
        f, alpha, beta = _descend(q, a, start.alpha.copy(), start.beta.copy(),
                                  cfg, dpp_cfg)
        if best is None or f < best[0]:
            best = (f, alpha, beta)
    return Action(alpha=best[1], beta=best[2])


class DppController:
    """Per-slot solver wrapper usable wherever a policy is expected."""

    def __init__(self, cfg: SystemConfig, dpp_cfg: DppConfig,
                 rng: np.random.Generator, warm_start: bool = True):
        self.cfg = cfg
        self.dpp_cfg = dpp_cfg
        self.rng = rng
        self.warm_start = warm_start
        self._last: Action | None = None

    def act(self, state) -> Action:
        extra = (self._last,) if (self.warm_start and self._last is not None) else ()
        action = dpp_step_optimize(state.queue, state.arrival, self.cfg,
                                   self.dpp_cfg, self.rng, extra_starts=extra)
        self._last = action
        return action


def run_dpp_episode(cfg: SystemConfig, dpp_cfg: DppConfig, T: int,
                    rng: np.random.Generator) -> tuple[Trace, dict]:
    """Observe -> optimize -> step for T slots from empty queues; returns the
    step trace plus the average penalty and average queue length."""
    env = EdgeCloudEnv(cfg, rng=rng)
    controller = DppController(cfg, dpp_cfg, rng)
    state = env.reset()
    trace = Trace(n_queues=cfg.n_queues)
    for t in range(T):
        try:
            action = controller.act(state)
        except (SolverDivergedError, UnsupportedObjectiveError) as exc:
            raise type(exc)(f"slot {t}: {exc}") from exc
        outcome, _ = env.step(action)
        trace.append(t, state.queue, state.arrival, action,
                     outcome.departures, outcome.offloads,
                     outcome.edge_cost, outcome.cloud_cost)
        state = outcome.next_state
    metrics = {
        "avg_penalty": float(trace.penalties.mean()),
        "avg_queue": float(trace.queue_totals.mean()),
    }
    return trace, metrics
