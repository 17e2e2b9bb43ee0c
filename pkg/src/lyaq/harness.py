"""Experiment harness: episode runners, training loop, V-sweeps, comparisons.

All runs are keyed by (command, config, seed): every random stream descends
from one SeedSequence, so identical inputs give byte-identical metric CSVs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SystemConfig, config_to_dict
from .dpp import DppConfig, DppController, UnsupportedObjectiveError
from .env import Action, EdgeCloudEnv, Trace
from .rewards import RewardSpec, compute_reward
from .sac import SacAgent, SacConfig


# ---------------------------------------------------------------------------
# Controllers


class IdleController:
    """All-dummy action: no CPU, no offloading."""

    def __init__(self, n_queues: int):
        self._action = Action.idle(n_queues)

    def act(self, state) -> Action:
        return self._action


class UniformController:
    """Uniform split over each (N+1)-simplex."""

    def __init__(self, n_queues: int):
        self._action = Action.uniform(n_queues)

    def act(self, state) -> Action:
        return self._action


class SacController:
    """Deterministic (mean-logit) policy of a trained agent."""

    def __init__(self, agent: SacAgent):
        self.agent = agent

    def act(self, state) -> Action:
        return self.agent.act(state, deterministic=True)


def make_controller(kind: str, cfg: SystemConfig, rng: np.random.Generator,
                    dpp_cfg: DppConfig | None = None,
                    agent: SacAgent | None = None):
    if kind == "idle":
        return IdleController(cfg.n_queues)
    if kind == "uniform":
        return UniformController(cfg.n_queues)
    if kind == "dpp":
        return DppController(cfg, dpp_cfg or DppConfig(), rng)
    if kind == "sac":
        if agent is None:
            raise ValueError("sac controller needs a trained agent")
        return SacController(agent)
    raise ValueError(f"unknown controller kind {kind!r}")


# ---------------------------------------------------------------------------
# Episode running and metrics


def run_episode(controller, cfg: SystemConfig, rng: np.random.Generator,
                T: int | None = None, reward_spec: RewardSpec | None = None):
    """One T-slot episode from empty queues; returns (trace, reward_sum,
    queue_trajectory) where the trajectory holds sum_i q_i(t) for t = 0..T."""
    T = T or cfg.episode_length
    env = EdgeCloudEnv(cfg, rng=rng)
    state = env.reset()
    trace = Trace(n_queues=cfg.n_queues)
    reward_sum = 0.0
    queue_traj = [float(state.queue.sum())]
    for t in range(T):
        action = controller.act(state)
        outcome, inputs = env.step(action)
        if reward_spec is not None:
            reward_sum += compute_reward(inputs, T, reward_spec)
        trace.append(t, state.queue, state.arrival, action,
                     outcome.departures, outcome.offloads,
                     outcome.edge_cost, outcome.cloud_cost)
        queue_traj.append(float(outcome.queue_after.sum()))
        state = outcome.next_state
    return trace, reward_sum, np.array(queue_traj)


def metrics_from_trace(trace: Trace) -> dict:
    """The two headline averages, recomputable from any exported trace."""
    return {
        "avg_penalty": float(trace.penalties.mean()),
        "avg_queue": float(trace.queue_totals.mean()),
    }


def queue_slope_ok(queue_traj, mean_load_bits: float, frac: float = 0.01) -> bool:
    """No positive linear trend: the least-squares slope of the total queue
    over the last half of the episode must stay below frac of the mean
    arriving bits per slot (the natural per-slot growth scale).
    """
    q = np.asarray(queue_traj, dtype=float)
    tail = q[len(q) // 2:]
    t = np.arange(len(tail), dtype=float)
    slope = float(np.polyfit(t, tail, 1)[0]) if len(tail) > 1 else 0.0
    return slope <= 0.0 or slope < frac * mean_load_bits


def default_reward_spec(cfg: SystemConfig, kind: str = "diff") -> RewardSpec:
    return RewardSpec(kind=kind, exponent=cfg.reward_exponent, rho=cfg.rho,
                      penalty_weight=cfg.penalty_weight,
                      mean_arrival_bits=cfg.mean_bits_per_slot)


@dataclass
class RunRecord:
    run_id: str
    controller: str
    V: float
    nu: float
    reward_kind: str
    seed: int
    episode_reward_sum: float
    avg_penalty: float
    avg_queue: float
    queue_trajectory: np.ndarray
    config_snapshot: dict = field(default_factory=dict)
    trace: Trace | None = None

    def check_metrics(self, tol: float = 1e-9) -> bool:
        """Summary metrics must equal recomputation from the stored trace."""
        if self.trace is None:
            return True
        m = metrics_from_trace(self.trace)
        return (abs(m["avg_penalty"] - self.avg_penalty) <= tol * max(1.0, abs(self.avg_penalty))
                and abs(m["avg_queue"] - self.avg_queue) <= tol * max(1.0, abs(self.avg_queue)))


def evaluate(controller, cfg: SystemConfig, episodes: int, seed: int,
             reward_spec: RewardSpec | None = None, controller_name: str = "",
             keep_traces: bool = True) -> list[RunRecord]:
    """Deterministic-policy evaluation episodes with full bookkeeping."""
    reward_spec = reward_spec or default_reward_spec(cfg)
    records = []
    streams = np.random.SeedSequence(seed).spawn(episodes)
    for ep, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        trace, reward_sum, traj = run_episode(controller, cfg, rng,
                                              reward_spec=reward_spec)
        m = metrics_from_trace(trace)
        records.append(RunRecord(
            run_id=f"{controller_name or 'eval'}-s{seed}-e{ep}",
            controller=controller_name,
            V=reward_spec.penalty_weight,
            nu=reward_spec.exponent,
            reward_kind=reward_spec.kind,
            seed=seed,
            episode_reward_sum=reward_sum,
            avg_penalty=m["avg_penalty"],
            avg_queue=m["avg_queue"],
            queue_trajectory=traj,
            config_snapshot=config_to_dict(cfg),
            trace=trace if keep_traces else None,
        ))
    return records


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainResult:
    agent: SacAgent
    curve: list            # dicts: steps, reward_sum, avg_penalty, avg_queue
    best_agent: SacAgent   # best eval reward over the final 20% of training
    reward_scale: float
    reward_spec: RewardSpec

    def write_curve_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["steps", "reward_sum", "avg_penalty", "avg_queue"])
            for row in self.curve:
                writer.writerow([row["steps"], repr(row["reward_sum"]),
                                 repr(row["avg_penalty"]), repr(row["avg_queue"])])


def _snapshot(agent: SacAgent) -> SacAgent:
    clone = SacAgent.__new__(SacAgent)
    clone.sac_cfg = agent.sac_cfg
    clone.state_dim = agent.state_dim
    clone.action_dim = agent.action_dim
    clone.state_aux = agent.state_aux
    clone.reward_scale = agent.reward_scale
    clone.update_count = agent.update_count
    for name in SacAgent._NETS:
        setattr(clone, name, getattr(agent, name).clone())
    for name in SacAgent._OPTS:
        setattr(clone, name, getattr(agent, name))  # read-only use
    clone.buffer = agent.buffer
    clone.normalizer = agent.normalizer
    return clone


def train(cfg: SystemConfig, sac_cfg: SacConfig, total_steps: int, seed: int,
          reward_spec: RewardSpec | None = None, episodes_per_cycle: int = 4,
          updates_per_step: float = 1.0, progress=None) -> TrainResult:
    """Mirror of the paper's schedule: repeatedly collect four episodes from
    empty queues into the buffer, take gradient steps, then log one
    deterministic evaluation episode (undiscounted reward sum).
    """
    reward_spec = reward_spec or default_reward_spec(cfg)
    T = cfg.episode_length
    ss = np.random.SeedSequence(seed)
    env_ss, agent_ss, update_ss, eval_ss = ss.spawn(4)
    env_rng = np.random.default_rng(env_ss)
    update_rng = np.random.default_rng(update_ss)
    collect_rng = np.random.default_rng(agent_ss.spawn(1)[0])

    agent = SacAgent(cfg, sac_cfg, rng=np.random.default_rng(agent_ss))
    env = EdgeCloudEnv(cfg, rng=env_rng)
    aux = cfg.state_aux

    def eval_record(steps: int) -> dict:
        rng = np.random.default_rng(eval_ss.spawn(1)[0])
        trace, reward_sum, traj = run_episode(SacController(agent), cfg, rng,
                                              reward_spec=reward_spec)
        m = metrics_from_trace(trace)
        return {"steps": steps, "reward_sum": reward_sum,
                "avg_penalty": m["avg_penalty"], "avg_queue": m["avg_queue"]}

    curve = [eval_record(0)]
    best = None  # best eval over the final 20% of the step budget
    steps_done = 0
    scale_set = False

    while steps_done < total_steps:
        pending = []
        for _ in range(episodes_per_cycle):
            state = env.reset()
            s_norm = agent.normalizer.normalize(state.as_vector(aux))
            for _ in range(T):
                flat, _ = agent.policy_sample(s_norm, rng=collect_rng)
                outcome, inputs = env.step(Action.from_flat(flat))
                r = compute_reward(inputs, T, reward_spec)
                s2_norm = agent.normalizer.normalize(
                    outcome.next_state.as_vector(aux))
                pending.append((s_norm, flat, r, s2_norm))
                s_norm = s2_norm
                steps_done += 1
        if not scale_set:
            typical = float(np.mean(np.abs([p[2] for p in pending[:T]])))
            agent.reward_scale = 1.0 / typical if typical > 0 else 1.0
            scale_set = True
        for s_n, a_f, r, s2_n in pending:
            agent.store_transition(s_n, a_f, r * agent.reward_scale, s2_n)

        n_updates = int(round(len(pending) * updates_per_step
                              * agent.sac_cfg.gradient_steps))
        if len(agent.buffer) >= sac_cfg.batch_size:
            for _ in range(n_updates):
                agent.update(update_rng)

        record = eval_record(steps_done)
        curve.append(record)
        if not np.isfinite(record["reward_sum"]):
            raise FloatingPointError(
                f"non-finite evaluation reward at step {steps_done}")
        if steps_done >= 0.8 * total_steps and (best is None
                                                or record["reward_sum"] >= best[0]):
            best = (record["reward_sum"], _snapshot(agent))
        if progress is not None:
            progress(record)

    if best is None:
        best = (curve[-1]["reward_sum"], _snapshot(agent))
    return TrainResult(agent=agent, curve=curve, best_agent=best[1],
                       reward_scale=agent.reward_scale, reward_spec=reward_spec)


# ---------------------------------------------------------------------------
# Sweeps and comparison


def _sweep_csv_rows(path) -> set:
    done = set()
    try:
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                done.add((row["V"], row["seed"]))
    except FileNotFoundError:
        pass
    return done


def sweep(controller_kind: str, cfg: SystemConfig, V_grid, seeds,
          out_csv=None, dpp_cfg: DppConfig | None = None,
          sac_cfg: SacConfig | None = None, total_steps: int = 20000,
          reward_kind: str = "diff", episodes: int = 5,
          progress=None) -> list[dict]:
    """Trade-off sweep: one (V, seed) per row, appended idempotently, plus
    per-V means. DPP reads V as its own weighting factor V'."""
    if not len(list(V_grid)):
        raise ValueError("V grid must be non-empty")
    rows = []
    done = _sweep_csv_rows(out_csv) if out_csv else set()
    fieldnames = ["controller", "V", "seed", "avg_queue", "avg_penalty",
                  "reward_sum", "status"]
    writer = None
    if out_csv:
        f = open(out_csv, "a", newline="")
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        if not done:
            writer.writeheader()

    try:
        for V in V_grid:
            for seed in seeds:
                key = (repr(float(V)), str(seed))
                if key in done:
                    continue
                row = {"controller": controller_kind, "V": repr(float(V)),
                       "seed": seed, "status": "ok"}
                try:
                    rec = _sweep_entry(controller_kind, cfg, float(V), int(seed),
                                       dpp_cfg, sac_cfg, total_steps,
                                       reward_kind, episodes)
                    row.update(avg_queue=repr(rec["avg_queue"]),
                               avg_penalty=repr(rec["avg_penalty"]),
                               reward_sum=repr(rec["reward_sum"]))
                except UnsupportedObjectiveError as exc:
                    row.update(avg_queue="", avg_penalty="", reward_sum="",
                               status=f"unsupported-objective: {exc}")
                except Exception as exc:  # record, keep sweeping
                    row.update(avg_queue="", avg_penalty="", reward_sum="",
                               status=f"error: {exc}")
                rows.append(row)
                if writer:
                    writer.writerow(row)
                if progress is not None:
                    progress(row)
    finally:
        if writer:
            f.close()
    return rows


def _sweep_entry(controller_kind, cfg, V, seed, dpp_cfg, sac_cfg, total_steps,
                 reward_kind, episodes) -> dict:
    """Means over `episodes` evaluation episodes for one grid point."""
    cfg = replace(cfg, penalty_weight=V)
    spec = default_reward_spec(cfg, kind=reward_kind)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    if controller_kind == "dpp":
        controller = DppController(cfg, replace(dpp_cfg or DppConfig(),
                                                penalty_weight=V), rng)
    elif controller_kind == "sac":
        result = train(cfg, sac_cfg or SacConfig(), total_steps, seed, spec)
        controller = SacController(result.best_agent)
    else:
        controller = make_controller(controller_kind, cfg, rng)
    records = evaluate(controller, cfg, episodes, seed, spec,
                       controller_name=controller_kind, keep_traces=False)
    return {
        "avg_queue": float(np.mean([r.avg_queue for r in records])),
        "avg_penalty": float(np.mean([r.avg_penalty for r in records])),
        "reward_sum": float(np.mean([r.episode_reward_sum for r in records])),
    }


def sweep_means(rows) -> list[dict]:
    """Per-V means of the ok rows, in grid order (the plotted line)."""
    means = []
    seen = []
    for row in rows:
        if row["V"] not in seen:
            seen.append(row["V"])
    for V in seen:
        group = [r for r in rows if r["V"] == V and r["status"] == "ok"]
        if group:
            means.append({
                "V": V,
                "avg_queue": float(np.mean([float(r["avg_queue"]) for r in group])),
                "avg_penalty": float(np.mean([float(r["avg_penalty"]) for r in group])),
                "n": len(group),
            })
    return means


def compare(cfg: SystemConfig, dpp_cfg: DppConfig, sac_cfg: SacConfig,
            seed: int = 0, total_steps: int = 20000,
            reward_kind: str = "diff", progress=None) -> list[dict]:
    """Both controllers on both cloud-cost kinds. On the discontinuous
    per-core cost the DPP row records its structured refusal while the
    learner's row reports the learning-curve improvement."""
    rows = []
    for cost_kind in ("cubic", "per-core"):
        cfg_k = replace(cfg, cloud_cost_kind=cost_kind)
        spec = default_reward_spec(cfg_k, kind=reward_kind)

        row = {"controller": "dpp", "cost_kind": cost_kind, "status": "ok",
               "avg_queue": "", "avg_penalty": "", "reward_first": "",
               "reward_final": ""}
        try:
            rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
            controller = DppController(cfg_k, dpp_cfg, rng)
            recs = evaluate(controller, cfg_k, 1, seed, spec,
                            controller_name="dpp", keep_traces=False)
            row.update(avg_queue=repr(recs[0].avg_queue),
                       avg_penalty=repr(recs[0].avg_penalty))
        except UnsupportedObjectiveError as exc:
            row["status"] = f"unsupported-objective: {exc}"
        rows.append(row)
        if progress is not None:
            progress(row)

        result = train(cfg_k, sac_cfg, total_steps, seed, spec)
        recs = evaluate(SacController(result.best_agent), cfg_k, 1, seed, spec,
                        controller_name="sac", keep_traces=False)
        rows.append({
            "controller": "sac", "cost_kind": cost_kind, "status": "ok",
            "avg_queue": repr(recs[0].avg_queue),
            "avg_penalty": repr(recs[0].avg_penalty),
            "reward_first": repr(result.curve[0]["reward_sum"]),
            "reward_final": repr(max(r["reward_sum"] for r in result.curve[1:])
                                 if len(result.curve) > 1
                                 else result.curve[0]["reward_sum"]),
        })
        if progress is not None:
            progress(rows[-1])
    return rows


def write_compare_csv(rows, path) -> None:
    fieldnames = ["controller", "cost_kind", "status", "avg_queue",
                  "avg_penalty", "reward_first", "reward_final"]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
