"""Named reproduction recipes with pass/fail comparisons against the
reference numbers the experiments are expected to land on."""

from __future__ import annotations

import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from .. import oracle as O
from ..agents import RandomPolicy, run_episode
from ..core import ReplayBuffer, RngState
from ..envs import CliffEnv, cliff_tabular, random_mdp
from ..envs.cartpole import MAX_STEPS_PLUS
from ..envs.turf import GOAL, GRASS, HOME, PATH, SPOILED, TurfGrid, turf_obs, turf_reset
from ..precedence import precedence_model, train_precedence
from ..reversibility import (
    RACConfig,
    rac_filter,
    reversibility_model,
    train_reversibility,
    phi_eval_batch,
)
from . import svg
from .config import ExperimentConfig, load_asset_config
from .runner import (
    OfflineEstimators,
    RunResult,
    SeedResult,
    atomic_write,
    episodes_csv,
    eval_policy,
    make_env,
    mean_ci,
    train_offline_estimators,
    train_ppo_seed,
    write_run_result,
)

TARGETS = ("theory-suite", "cliff-tables", "cartpole-reward-free", "cartpole-plus",
           "turf-rae", "turf-rac", "beta-sweep")

# Reference score tables for the windy cliff walk (rows: wind probability
# 0..0.4; columns: rejection threshold 0..0.4).
CLIFF_RANDOM_REFERENCE = np.array([
    [57.5, 57.7, 61.2, 58.2, 57.7],
    [29.8, 28.8, 29.5, 30.2, 29.6],
    [18.6, 18.5, 19.3, 18.9, 18.8],
    [13.4, 13.3, 13.9, 13.6, 13.4],
    [10.5, 10.7, 10.4, 10.2, 10.2],
])
CLIFF_RAC_REFERENCE = np.array([
    [59.1, 250.0, 250.0, 250.0, 250.0],
    [29.2, 56.0, 56.3, 80.2, 248.5],
    [18.7, 26.7, 29.2, 85.8, 238.6],
    [13.2, 16.8, 19.6, 77.6, 250.0],
    [10.4, 12.5, 24.9, 152.2, 250.0],
])
CLIFF_WINDS = (0.0, 0.1, 0.2, 0.3, 0.4)
CLIFF_THRESHOLDS = (0.0, 0.1, 0.2, 0.3, 0.4)


@dataclass
class CheckResult:
    name: str
    value: float
    reference: str
    passed: bool


@dataclass
class ReproduceReport:
    target: str
    checks: list[CheckResult] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, reference: str, passed: bool) -> None:
        self.checks.append(CheckResult(name, float(value), reference, bool(passed)))

    def summary(self) -> str:
        lines = [f"target: {self.target}  ({self.runtime_s:.0f}s)"]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}: {c.value:g} (expect {c.reference})")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def reproduce(target: str, out_dir: str = "runs", seeds: int | None = None,
              fast: bool = False) -> ReproduceReport:
    """Run one named recipe and compare against its reference numbers."""
    started = time.perf_counter()
    if target == "theory-suite":
        report = _theory_suite(out_dir, fast=fast)
    elif target == "cliff-tables":
        report = _cliff_tables(out_dir, fast=fast)
    elif target == "cartpole-reward-free":
        report = _cartpole_reward_free(out_dir, seeds=seeds or 10, fast=fast)
    elif target == "cartpole-plus":
        report = _cartpole_plus(out_dir, seeds=seeds or 10, fast=fast)
    elif target == "turf-rac":
        report = _turf_rac(out_dir, seeds=seeds or 10, fast=fast)
    elif target == "turf-rae":
        report = _turf_rae(out_dir, seeds=seeds or 10, fast=fast)
    elif target == "beta-sweep":
        report = _beta_sweep(out_dir, seeds=seeds or 2, fast=fast)
    else:
        raise ValueError(f"unknown reproduction target {target!r}; "
                         f"known: {', '.join(TARGETS)}")
    report.runtime_s = time.perf_counter() - started
    atomic_write(os.path.join(out_dir, target, "report.txt"), report.summary() + "\n")
    report.artifacts.append(os.path.join(out_dir, target, "report.txt"))
    return report


# ---------------------------------------------------------------------------
# theory-suite
# ---------------------------------------------------------------------------

def _theory_suite(out_dir: str, instances: int = 50, tol: float = 1e-9,
                  fast: bool = False) -> ReproduceReport:
    report = ReproduceReport(target="theory-suite")
    rng = RngState(2024)
    if fast:
        instances = 10
    n_pass = 0
    lines = []
    for i in range(instances):
        n_s = int(rng.fork(f"ns{i}").gen.integers(2, 9))
        n_a = int(rng.fork(f"na{i}").gen.integers(2, 5))
        mdp = random_mdp(n_s, n_a, rng.fork(f"m{i}"))
        pi = O.eps_mixed_policy(mdp, rng.fork(f"p{i}"))
        rep = O.verify_theory(mdp, pi, tol=tol, label=f"random-{i}")
        n_pass += int(rep.passed)
        lines.append(rep.summary())
    report.add("random_instances_passed", n_pass, f"== {instances}", n_pass == instances)

    from ..envs.tabular import flip_flop, one_way_chain, two_action_chain
    for label, mdp in (("one_way_chain", one_way_chain(5)),
                       ("flip_flop", flip_flop()),
                       ("two_action_chain", two_action_chain(4))):
        rep = O.verify_theory(mdp, O.uniform_policy(mdp), tol=tol, label=label)
        lines.append(rep.summary())
        report.add(f"named_{label}", float(rep.passed), "pass", rep.passed)

    cyc, vals = O.cycle_counterexample(T=999)
    lines.append(cyc.summary())
    report.add("cycle_counterexample", float(cyc.passed), "pass", cyc.passed)

    # sampled cross-check of the pair-count formula
    n_chains = 3 if fast else 10
    n_traj = 100_000 if fast else 1_000_000
    worst_z = 0.0
    for i in range(n_chains):
        mdp = random_mdp(5, 2, rng.fork(f"mc{i}"))
        pi = O.eps_mixed_policy(mdp, rng.fork(f"mcp{i}"))
        T = 24
        pair_rng = rng.fork(f"mcpair{i}")
        s = int(pair_rng.gen.integers(0, 5))
        s2 = int(pair_rng.gen.integers(0, 5))
        exact = O.exact_psi_T(mdp, pi, s, s2, T)
        est, se = O.monte_carlo_psi(mdp, pi, s, s2, T, n_traj=n_traj,
                                    rng=rng.fork(f"mcsim{i}"))
        z = abs(est - exact) / max(se, 1e-12)
        worst_z = max(worst_z, z)
        lines.append(f"sampled cross-check chain {i}: exact={exact:.6f} "
                     f"sampled={est:.6f} se={se:.2e} z={z:.2f}")
    report.add("sampling_cross_check_worst_z", worst_z, "< 3 standard errors", worst_z < 3.0)

    atomic_write(os.path.join(out_dir, "theory-suite", "assertions.txt"),
                 "\n".join(lines) + "\n")
    report.artifacts.append(os.path.join(out_dir, "theory-suite", "assertions.txt"))
    return report


# ---------------------------------------------------------------------------
# cliff-tables
# ---------------------------------------------------------------------------

def _simulate_cliff_cell(p: float, probs_per_state: np.ndarray, runs: int,
                         rng: RngState) -> np.ndarray:
    """Vectorized batch of episodes under fixed per-state action distributions."""
    cum = np.cumsum(probs_per_state, axis=1)
    rows = np.zeros(runs, dtype=np.int64)
    cols = np.zeros(runs, dtype=np.int64)
    alive = np.ones(runs, dtype=bool)
    score = np.zeros(runs)
    for _ in range(250):
        if not alive.any():
            break
        s = rows * 8 + cols
        u = rng.gen.random(runs)
        a = (cum[s] < u[:, None]).sum(axis=1)
        dr = np.where(a == 0, -1, np.where(a == 1, 1, 0))
        dc = np.where(a == 2, -1, np.where(a == 3, 1, 0))
        nr = np.clip(rows + dr, 0, 5)
        nc = np.clip(cols + dc, 0, 7)
        if p > 0.0:
            wind = (rng.gen.random(runs) < p) & (nr < 5)
            nr = nr + wind
        died = (nr == 5) & alive
        surviving = alive & ~died
        score[surviving] += 1
        rows[surviving] = nr[surviving]
        cols[surviving] = nc[surviving]
        alive = surviving
    return score


def _cliff_learned_scores(p: float, seed: int, n_episodes: int, psi_steps: int,
                          phi_steps: int) -> np.ndarray:
    """Offline pipeline on the cliff: random data (terminal states included,
    the fall is the signal), order estimator, then per-cell undo scores."""
    rng = RngState(seed)
    env = CliffEnv(p_wind=p)
    policy = RandomPolicy(4)
    buf = ReplayBuffer(capacity=2_000_000)
    for ep in range(n_episodes):
        traj, _ = run_episode(env, policy, rng.fork(f"c{ep}"), episode_index=ep)
        buf.push(traj)
    psi = precedence_model(env.obs_dim, rng.fork("psi"))
    for prm in psi.head.params():
        prm[:] = 0.0
    popt = nn.AdamState(psi.params(), lr=0.01, weight_decay=1e-4)
    train_precedence(psi, buf, w=250, batch_size=128, steps=psi_steps,
                     optimizer=popt, rng=rng.fork("pt"), include_final=True)
    rev = reversibility_model(env.obs_dim, 4, rng.fork("rev"))
    ropt = nn.AdamState(rev.params(), lr=0.01)
    train_reversibility(rev, buf, psi, batch_size=128, steps=phi_steps,
                        optimizer=ropt, rng=rng.fork("rt"), include_final=True)
    eye = np.eye(48)
    return phi_eval_batch(rev, eye[:40])


def _cliff_exact_scores(p: float) -> np.ndarray:
    """Exact counterpart of the learned scores from the tabular oracle."""
    mdp = cliff_tabular(p)
    pi = O.uniform_policy(mdp)
    psi, defined, _ = O.psi_limit_matrix(mdp, pi, tol=1e-9)
    phi = np.zeros((40, 4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", O.UndefinedPairWarning)
        for s in range(40):
            for a in range(4):
                phi[s, a] = O.empirical_reversibility(mdp, pi, s, a,
                                                      _psi_cache=(psi, defined))
    return phi


def _cliff_tables(out_dir: str, runs_per_cell: int = 5000, seed: int = 7,
                  fast: bool = False) -> ReproduceReport:
    report = ReproduceReport(target="cliff-tables")
    if fast:
        runs_per_cell = 500
    rng = RngState(seed)
    uniform = np.full((40, 4), 0.25)
    n_rows, n_cols = len(CLIFF_WINDS), len(CLIFF_THRESHOLDS)
    random_table = np.zeros((n_rows, n_cols))
    learned_table = np.zeros((n_rows, n_cols))
    exact_table = np.zeros((n_rows, n_cols))
    for i, p in enumerate(CLIFF_WINDS):
        learned_phi = _cliff_learned_scores(
            p, seed=seed + i,
            n_episodes=400 if fast else 2500,
            psi_steps=800 if fast else 4000,
            phi_steps=400 if fast else 2000)
        exact_phi = _cliff_exact_scores(p)
        for j, thr in enumerate(CLIFF_THRESHOLDS):
            cell_rng = rng.fork(f"cell{i}-{j}")
            random_table[i, j] = _simulate_cliff_cell(
                p, uniform, runs_per_cell, cell_rng.fork("random")).mean()
            probs_l = np.stack([rac_filter(np.full(4, 0.25), learned_phi[s],
                                           RACConfig(beta=thr)) for s in range(40)])
            learned_table[i, j] = _simulate_cliff_cell(
                p, probs_l, runs_per_cell, cell_rng.fork("learned")).mean()
            probs_e = np.stack([rac_filter(np.full(4, 0.25), exact_phi[s],
                                           RACConfig(beta=thr)) for s in range(40)])
            exact_table[i, j] = _simulate_cliff_cell(
                p, probs_e, runs_per_cell, cell_rng.fork("exact")).mean()

    # baseline within 5% everywhere
    rel = np.abs(random_table - CLIFF_RANDOM_REFERENCE) / CLIFF_RANDOM_REFERENCE
    report.add("random_baseline_worst_rel_err", float(rel.max()), "< 0.05",
               bool(rel.max() < 0.05))
    # quoted filtered cells within 10%
    for table, tag in ((learned_table, "learned"), (exact_table, "exact")):
        p0 = table[0, 1:]
        report.add(f"{tag}_p0_thresholds_at_cap",
                   float(np.min(p0)), "within 10% of 250",
                   bool(np.all(np.abs(p0 - 250.0) / 250.0 < 0.10)))
        report.add(f"{tag}_p03_thr04", float(table[3, 4]), "within 10% of 250",
                   bool(abs(table[3, 4] - 250.0) / 250.0 < 0.10))
        # monotone rows with a small sampling allowance
        mono = True
        for i in range(n_rows):
            for j in range(n_cols - 1):
                slack = max(2.0, 0.02 * table[i, j])
                if table[i, j + 1] < table[i, j] - slack:
                    mono = False
        report.add(f"{tag}_rows_nondecreasing", float(mono), "monotone", mono)
        uplift = bool(np.all(table[:, 4] >= 3.0 * table[:, 0]))
        report.add(f"{tag}_uplift_at_04", float(np.min(table[:, 4] / table[:, 0])),
                   ">= 3x baseline", uplift)

    def table_csv(table):
        head = "p_wind," + ",".join(f"thr_{t}" for t in CLIFF_THRESHOLDS)
        rows = [head]
        for i, p in enumerate(CLIFF_WINDS):
            rows.append(f"{p}," + ",".join(f"{v:.1f}" for v in table[i]))
        return "\n".join(rows) + "\n"

    base = os.path.join(out_dir, "cliff-tables")
    for name, table in (("random_table.csv", random_table),
                        ("rac_learned_table.csv", learned_table),
                        ("rac_exact_table.csv", exact_table)):
        atomic_write(os.path.join(base, name), table_csv(table))
        report.artifacts.append(os.path.join(base, name))
    labels = [str(t) for t in CLIFF_THRESHOLDS]
    winds = [str(p) for p in CLIFF_WINDS]
    atomic_write(os.path.join(base, "rac_learned_table.svg"),
                 svg.heatmap(learned_table, title="random policy + rejection filter",
                             x_labels=labels, y_labels=winds, fmt="{:.1f}"))
    atomic_write(os.path.join(base, "random_table.svg"),
                 svg.heatmap(random_table, title="random policy",
                             x_labels=labels, y_labels=winds, fmt="{:.1f}"))
    report.artifacts += [os.path.join(base, "rac_learned_table.svg"),
                         os.path.join(base, "random_table.svg")]
    return report


# ---------------------------------------------------------------------------
# cartpole reward-free exploration
# ---------------------------------------------------------------------------

def _learning_curve_svg(seed_results: list[SeedResult], solve_level: float,
                        title: str) -> str:
    grid = np.linspace(0, max(sr.total_steps for sr in seed_results), 60)
    curves = []
    for sr in seed_results:
        xs = np.array([e.wall_steps for e in sr.episodes])
        ys = np.array([e.length for e in sr.episodes], dtype=np.float64)
        if len(xs) == 0:
            continue
        smoothed = np.interp(grid, xs, _running_mean(ys, 25))
        curves.append(smoothed)
    arr = np.stack(curves)
    mean = arr.mean(axis=0)
    half = 1.96 * arr.std(axis=0) / np.sqrt(arr.shape[0])
    return svg.line_chart(
        [{"x": grid, "y": mean, "lo": mean - half, "hi": mean + half,
          "label": "episode length"},
         {"x": grid, "y": np.full_like(grid, solve_level), "label": "target",
          "color": "#999999"}],
        title=title, x_label="environment steps", y_label="episode length")


def _running_mean(x: np.ndarray, k: int) -> np.ndarray:
    if len(x) <= k:
        return np.full_like(x, x.mean() if len(x) else 0.0)
    c = np.cumsum(np.concatenate([[0.0], x]))
    out = np.empty_like(x)
    for i in range(len(x)):
        lo = max(0, i - k + 1)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


def _intrinsic_thirds(seed_results: list[SeedResult]) -> tuple[float, float, float]:
    """Mean per-step shaped penalty in each third of each seed's run."""
    thirds = [[], [], []]
    for sr in seed_results:
        total = max(sr.total_steps, 1)
        for e in sr.episodes:
            frac = min(e.wall_steps / total, 1.0 - 1e-9)
            thirds[int(frac * 3)].append(e.intrinsic_return / max(e.length, 1))
    return tuple(float(np.mean(t)) if t else 0.0 for t in thirds)


def _cartpole_reward_free(out_dir: str, seeds: int, fast: bool) -> ReproduceReport:
    report = ReproduceReport(target="cartpole-reward-free")
    cfg = load_asset_config("cartpole_reward_free")
    cfg.out_dir = out_dir
    cfg.seeds = list(range(seeds))
    if fast:
        cfg.step_budget = 120_000
    seed_results = []
    per_seed_minutes = []
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        seed_results.append(train_ppo_seed(cfg, seed))
        per_seed_minutes.append((time.perf_counter() - t0) / 60.0)
    solved = [sr for sr in seed_results
              if sr.tail_mean("length", cfg.solve_window) >= cfg.solve_threshold]
    report.add("seeds_solved", len(solved), f">= 7 of {seeds}",
               len(solved) >= min(7, seeds))
    report.add("max_seed_minutes", max(per_seed_minutes), "< 20", max(per_seed_minutes) < 20)
    first, mid, last = _intrinsic_thirds(seed_results)
    report.add("intrinsic_mid_below_first", mid - first, "< 0 (dip)", mid < first)
    report.add("intrinsic_mid_below_last", mid - last, "< 0 (recovery)", mid < last)

    result = RunResult(config=cfg, seed_results=seed_results)
    mean_len = [sr.tail_mean("length") for sr in seed_results]
    m, ci = mean_ci(mean_len)
    result.summary = {"final_length_mean": m, "final_length_ci95": ci,
                      "seeds_solved": len(solved),
                      "intrinsic_thirds": (first, mid, last)}
    result.artifacts["learning_curve.svg"] = _learning_curve_svg(
        seed_results, cfg.solve_threshold, "reward-free balancing with penalty shaping")
    run_dir = write_run_result(result)
    report.artifacts.append(run_dir)
    return report


# ---------------------------------------------------------------------------
# long-horizon cartpole with rejection control
# ---------------------------------------------------------------------------

def _cartpole_plus(out_dir: str, seeds: int, fast: bool) -> ReproduceReport:
    from ..envs import cartpole_batch_reset, cartpole_batch_step

    report = ReproduceReport(target="cartpole-plus")
    cfg = load_asset_config("cartpole_plus")
    cfg.out_dir = out_dir
    if fast:
        cfg.offline_trajectories = 10_000
        cfg.offline_psi_steps = 3000
    rng = RngState(cfg.seeds[0])
    est = train_offline_estimators(cfg, rng.fork("offline"), 2, 4)
    report.add("random_mean_length", est.mean_traj_length, "20 +/- 25%",
               bool(15.0 <= est.mean_traj_length <= 25.0))

    cap = 5000 if fast else MAX_STEPS_PLUS

    def eval_threshold(beta: float) -> np.ndarray:
        eval_rng = RngState(1000).fork(f"eval{beta}")
        states = cartpole_batch_reset(seeds, eval_rng)
        alive = np.ones(seeds, dtype=bool)
        score = np.zeros(seeds)
        for _ in range(cap):
            if not alive.any():
                break
            phi = phi_eval_batch(est.rev, states)
            keep = phi >= beta
            none = ~keep.any(axis=1)
            if none.any():
                best = np.argmax(phi[none], axis=1)
                keep[none] = False
                keep[np.flatnonzero(none), best] = True
            n_kept = keep.sum(axis=1)
            u = eval_rng.gen.random(seeds)
            take_first = keep[:, 0] & ((u < 1.0 / n_kept) | ~keep[:, 1])
            actions = np.where(take_first, 0, 1)
            new_states, dead = cartpole_batch_step(states, actions)
            score[alive] += 1
            alive = alive & ~dead
            states = np.where(alive[:, None], new_states, states)
        return score

    thresholds = [0.2, 0.3, 0.4, 0.5]
    sweep = {beta: eval_threshold(beta) for beta in thresholds}
    means = {beta: float(s.mean()) for beta, s in sweep.items()}
    best_beta = max(means, key=means.get)
    report.add("filtered_best_threshold_mean", means[best_beta],
               ">= 10000", means[best_beta] >= 10_000.0)

    base_rng = RngState(1000).fork("baseline")
    env = make_env(cfg)
    policy = RandomPolicy(2)
    base_scores = [run_episode(env, policy, base_rng)[1].extrinsic_return
                   for _ in range(seeds)]
    report.add("unfiltered_random_mean", float(np.mean(base_scores)), "< 50",
               float(np.mean(base_scores)) < 50.0)

    base = os.path.join(out_dir, "cartpole-plus")
    lines = ["beta,seed,score,irreversible_event_count"]
    for beta in thresholds:
        for s_i, sc in enumerate(sweep[beta]):
            lines.append(f"{beta},{s_i},{sc:.0f},{int(sc < cap)}")
    atomic_write(os.path.join(base, "threshold_sweep.csv"), "\n".join(lines) + "\n")
    chart = svg.line_chart(
        [{"x": thresholds, "y": [np.log10(max(means[b], 1.0)) for b in thresholds],
          "label": "log10 mean score"}],
        title="long-horizon survival vs rejection threshold",
        x_label="threshold", y_label="log10 score")
    atomic_write(os.path.join(base, "threshold_sweep.svg"), chart)
    report.artifacts += [os.path.join(base, "threshold_sweep.csv"),
                         os.path.join(base, "threshold_sweep.svg")]
    return report


# ---------------------------------------------------------------------------
# turf: safe control and penalty shaping
# ---------------------------------------------------------------------------

def _grass_visit_fraction(visitation: np.ndarray) -> float:
    cells = turf_reset().cells
    grass_mask = (cells == GRASS) | (cells == SPOILED)
    total = visitation.sum()
    return float(visitation[grass_mask].sum() / total) if total > 0 else 0.0


def _turf_rac(out_dir: str, seeds: int, fast: bool) -> ReproduceReport:
    report = ReproduceReport(target="turf-rac")
    cfg = load_asset_config("turf_rac")
    cfg.out_dir = out_dir
    cfg.seeds = list(range(seeds))
    if fast:
        cfg.offline_trajectories = 1000
        cfg.offline_psi_steps = 1500
        cfg.offline_phi_steps = 1200
        cfg.step_budget = 120_000
    good = 0
    rows = []
    all_results = []
    for seed in cfg.seeds:
        sr = train_ppo_seed(cfg, seed)
        events = sum(e.irreversible_events for e in sr.episodes)
        success = sr.tail_mean("success", cfg.solve_window)
        ok = success >= 0.9 and events == 0
        good += int(ok)
        rows.append((seed, success, events, sr.total_steps, ok))
        all_results.append(sr)
    need = min(8, seeds)
    report.add("seeds_safe_and_solved", good, f">= {need} of {seeds}", good >= need)
    report.add("total_grass_events", float(np.sum([r[2] for r in rows])),
               "0 on passing seeds", True)

    base = os.path.join(out_dir, "turf-rac")
    lines = ["seed,tail_success,grass_events,steps,passed"]
    for r in rows:
        lines.append(f"{r[0]},{r[1]:.3f},{r[2]},{r[3]},{int(r[4])}")
    atomic_write(os.path.join(base, "seeds.csv"), "\n".join(lines) + "\n")
    atomic_write(os.path.join(base, "metrics.csv"),
                 episodes_csv([e for sr in all_results for e in sr.episodes]))
    report.artifacts += [os.path.join(base, "seeds.csv"),
                         os.path.join(base, "metrics.csv")]
    return report


def _turf_rae(out_dir: str, seeds: int, fast: bool) -> ReproduceReport:
    report = ReproduceReport(target="turf-rae")
    rae_cfg = load_asset_config("turf_rae")
    plain_cfg = load_asset_config("turf_plain")
    rae_cfg.out_dir = plain_cfg.out_dir = out_dir
    rae_cfg.seeds = plain_cfg.seeds = list(range(seeds))
    if fast:
        rae_cfg.step_budget = plain_cfg.step_budget = 120_000
    rae_fracs, plain_fracs = [], []
    rae_vis_total = np.zeros((10, 10))
    plain_vis_total = np.zeros((10, 10))
    for seed in range(seeds):
        sr_rae = train_ppo_seed(rae_cfg, seed)
        _, vis = eval_policy(rae_cfg, sr_rae.net, seed, episodes=50)
        rae_fracs.append(_grass_visit_fraction(vis))
        rae_vis_total += vis
        sr_plain = train_ppo_seed(plain_cfg, seed)
        _, vis_p = eval_policy(plain_cfg, sr_plain.net, seed, episodes=50)
        plain_fracs.append(_grass_visit_fraction(vis_p))
        plain_vis_total += vis_p
    rae_mean = float(np.mean(rae_fracs))
    plain_mean = float(np.mean(plain_fracs))
    report.add("penalized_grass_visitation", rae_mean, "< 0.05", rae_mean < 0.05)
    report.add("plain_grass_visitation", plain_mean, "> 0.20", plain_mean > 0.20)

    base = os.path.join(out_dir, "turf-rae")
    atomic_write(os.path.join(base, "visitation_rae.svg"),
                 svg.heatmap(rae_vis_total / max(rae_vis_total.sum(), 1.0),
                             title="state visitation with penalty shaping", fmt="{:.3f}"))
    atomic_write(os.path.join(base, "visitation_plain.svg"),
                 svg.heatmap(plain_vis_total / max(plain_vis_total.sum(), 1.0),
                             title="state visitation, unshaped", fmt="{:.3f}"))
    lines = ["seed,rae_grass_fraction,plain_grass_fraction"]
    for s in range(seeds):
        lines.append(f"{s},{rae_fracs[s]:.4f},{plain_fracs[s]:.4f}")
    atomic_write(os.path.join(base, "visitation.csv"), "\n".join(lines) + "\n")
    report.artifacts += [os.path.join(base, "visitation_rae.svg"),
                         os.path.join(base, "visitation_plain.svg"),
                         os.path.join(base, "visitation.csv")]
    return report


def _beta_sweep(out_dir: str, seeds: int, fast: bool) -> ReproduceReport:
    report = ReproduceReport(target="beta-sweep")
    cfg = load_asset_config("turf_rac")
    cfg.out_dir = out_dir
    betas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    if fast:
        cfg.step_budget = 60_000
        cfg.offline_trajectories = 1000
        cfg.offline_psi_steps = 1500
        cfg.offline_phi_steps = 1200
    else:
        cfg.step_budget = 120_000
    table = []
    for seed in range(seeds):
        rng = RngState(seed)
        env = make_env(cfg)
        est = train_offline_estimators(cfg, rng.fork("offline"),
                                       env.n_actions, env.obs_dim)
        for beta in betas:
            run_cfg = ExperimentConfig.from_dict(cfg.to_dict())
            run_cfg.beta = beta
            if beta == 0.0:
                run_cfg.wrapper = "none"   # never rejects; plain agent
            sr = train_ppo_seed(run_cfg, seed, est if run_cfg.wrapper == "rac" else None)
            events = sum(e.irreversible_events for e in sr.episodes)
            success = sr.tail_mean("success", cfg.solve_window)
            table.append((beta, seed, success, events))
    by_beta = {b: [(s, e) for bb, _, s, e in table if bb == b] for b in betas}
    # qualitative reference pattern
    high = all(s < 0.5 for s, _ in by_beta[0.5])
    report.add("no_learning_above_04", float(high), "success < 0.5 at beta 0.5", high)
    low_effects = all(any(e > 0 for _, e in by_beta[b]) for b in (0.0, 0.1))
    report.add("side_effects_below_02", float(low_effects),
               "events > 0 at beta 0 and 0.1", low_effects)
    band_clean = all(e == 0 for b in (0.2, 0.3, 0.4) for _, e in by_beta[b])
    report.add("zero_side_effect_band_02_04", float(band_clean), "0 events", band_clean)

    base = os.path.join(out_dir, "beta-sweep")
    lines = ["beta,seed,score,irreversible_event_count"]
    for beta, seed, success, events in table:
        lines.append(f"{beta},{seed},{success:.3f},{events}")
    atomic_write(os.path.join(base, "sweep.csv"), "\n".join(lines) + "\n")
    xs = betas
    succ_mean = [float(np.mean([s for s, _ in by_beta[b]])) for b in betas]
    ev_mean = [float(np.mean([e for _, e in by_beta[b]])) for b in betas]
    atomic_write(os.path.join(base, "sweep.svg"), svg.line_chart(
        [{"x": xs, "y": succ_mean, "label": "success rate"},
         {"x": xs, "y": [e / max(max(ev_mean), 1.0) for e in ev_mean],
          "label": "events (scaled)"}],
        title="threshold sweep: task success and side-effects",
        x_label="threshold", y_label="value"))
    report.artifacts += [os.path.join(base, "sweep.csv"),
                         os.path.join(base, "sweep.svg")]
    return report
