"""Acceptance gate: seven primary criteria, one pass/fail line each.

Criteria 4, 5, and 7 share one desk-scale experiment per parameter
(500 trajectories, 100k training steps), run once per session. Expect the
full gate to take roughly 45 minutes on a desktop-class CPU.
"""

import csv
import time

import numpy as np
import pytest

from battcal import cli, nn
from battcal.battery import (BatteryConfig, DegradationParams, LoadProfile,
                             PERFECT_PARAMS, Q_MAX_REF, R_O_REF, init_state,
                             simulate, step)
from battcal.env import CalibEnv, EnvConfig, params_to_action
from battcal.lac import LacAgent, LacConfig, lyapunov_target

import test_env
import test_lac

rollout_cost = test_env.rollout_cost
check_critic_fd = test_lac.TestCriticLoss._check_critic_fd
check_actor_fd = test_lac.TestActorLoss._check_actor_fd


def report_line(criterion, description, passed):
    print(f"\n[PRIMARY {criterion}] {description}: "
          f"{'PASS' if passed else 'FAIL'}")


def check(criterion, description, condition):
    report_line(criterion, description, bool(condition))
    assert condition, f"criterion {criterion}: {description}"


# -- shared desk-scale experiment -------------------------------------------

DESK_CONFIG = """
run.target = {target}
supervised.dtype = float32
"""


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    """Generate + train (RL and supervised) + evaluate for each parameter."""
    results = {}
    for target in ("r_o", "q_max"):
        out = tmp_path_factory.mktemp(f"desk_{target}")
        cfg = out / "run.cfg"
        cfg.write_text(DESK_CONFIG.format(target=target))
        base = ["--config", str(cfg), "--out", str(out), "--desk",
                "--seed", "1"]
        t0 = time.time()
        assert cli.main(["generate", *base]) == 0
        assert cli.main(["train-rl", *base]) == 0
        assert cli.main(["train-supervised", *base]) == 0
        assert cli.main(["evaluate", *base, "--mode", "rl",
                         "--checkpoint", str(out / "rl_checkpoint.json")]) == 0
        assert cli.main(["evaluate", *base, "--mode", "supervised",
                         "--checkpoint",
                         str(out / "supervised_checkpoint.json")]) == 0
        results[target] = {"out": out, "minutes": (time.time() - t0) / 60.0}
    return results


def aggregate_metric(out, mode, param, metric):
    with open(out / f"eval_report_{mode}.csv") as fh:
        for row in csv.DictReader(fh):
            if row["trajectory_id"] == "aggregate" and row["param"] == param:
                return float(row[metric])
    raise AssertionError(f"aggregate row for {param} missing")


def training_log(out):
    with open(out / "rl_training_log.csv") as fh:
        return list(csv.DictReader(fh))


# -- criterion 1: numerical core --------------------------------------------

class TestCriterion1:
    def test_numerical_core(self):
        t0 = time.time()
        rng = np.random.default_rng(100)

        # network gradients at 10 random points
        net = nn.Mlp([2, 3, 1]).init(rng)
        for _ in range(10):
            x = rng.standard_normal((4, 2))
            y, cache = net.forward_cache(x)
            ana, _ = net.backward(cache, 2.0 * y / y.size)
            ana = np.concatenate([g.ravel() for g in ana])
            num = self._fd(net, x)
            assert np.max(np.abs(ana - num)
                          / np.maximum(np.abs(num), 1e-3)) < 1e-4

        # critic and actor loss gradients at 10 random points each
        for i in range(10):
            agent = LacAgent(6, 2, LacConfig(hidden=(12, 12), seed=200 + i))
            check_critic_fd(agent, np.random.default_rng(300 + i))
            check_actor_fd(agent, np.random.default_rng(400 + i))

        # squashed-Gaussian density integrates to one
        grid = np.linspace(-1.0 + 1e-9, 1.0 - 1e-9, 200001)
        u = np.arctanh(grid)
        mean, log_std = 0.1, -0.4
        eps = (u - mean) / np.exp(log_std)
        _, logp = nn.squash_sample(np.full_like(grid, mean)[:, None],
                                   np.full_like(grid, log_std)[:, None],
                                   eps[:, None])
        mass = float(np.trapezoid(np.exp(logp), grid))
        elapsed = time.time() - t0
        check(1, "numerical core (gradient checks, density quadrature, "
                 f"{elapsed:.0f}s)",
              abs(mass - 1.0) <= 1e-3 and elapsed < 60.0)

    @staticmethod
    def _fd(net, x, h=1e-5):
        flat0 = net.get_flat()
        num = np.zeros_like(flat0)
        for i in range(flat0.size):
            fp = flat0.copy()
            fp[i] += h
            net.set_flat(fp)
            up = float(np.mean(net.forward(x) ** 2))
            fp[i] -= 2 * h
            net.set_flat(fp)
            dn = float(np.mean(net.forward(x) ** 2))
            num[i] = (up - dn) / (2 * h)
        net.set_flat(flat0)
        return num


# -- criterion 2: battery physics -------------------------------------------

class TestCriterion2:
    def test_battery_physics(self):
        t0 = time.time()
        config = BatteryConfig()

        # charge conservation over 1e4 steps
        traj = simulate(PERFECT_PARAMS, LoadProfile(np.full(10_000, 1.0)),
                        config)
        totals = traj.states[:, :4].sum(axis=1)
        conserved = bool(np.all(np.abs(totals - totals[0])
                                <= 1e-9 * Q_MAX_REF))

        # zero-load fixed point
        s0 = init_state(PERFECT_PARAMS, config)
        s1, _ = step(s0, 0.0, PERFECT_PARAMS, config)
        fixed = bool(np.array_equal(s1.as_array(), s0.as_array()))

        # EOD monotone in q_max over a 5-point grid
        loads = LoadProfile(np.full(10_800, 2.0))
        eods = [simulate(DegradationParams(q, R_O_REF), loads, config).eod_index
                for q in np.linspace(5000.0, 7600.0, 5)]
        eod_monotone = (all(e is not None for e in eods)
                        and all(a <= b for a, b in zip(eods, eods[1:])))

        # voltage monotone decreasing in r_o over a 5-point grid
        volts = []
        for r_o in np.linspace(0.117215, 0.30, 5):
            params = DegradationParams(Q_MAX_REF, float(r_o))
            s = init_state(params, config)
            v = None
            for _ in range(200):
                s, v = step(s, 2.0, params, config)
            volts.append(v)
        volt_monotone = all(a > b for a, b in zip(volts, volts[1:]))

        elapsed = time.time() - t0
        check(2, f"battery physics suite ({elapsed:.0f}s)",
              conserved and fixed and eod_monotone and volt_monotone
              and elapsed < 60.0)


# -- criterion 3: MDP soundness ---------------------------------------------

class TestCriterion3:
    def test_mdp_soundness(self):
        t0 = time.time()
        config = EnvConfig(target="r_o")
        rng = np.random.default_rng(500)

        # cost = 0 iff exact state match: the true action keeps cost at 0,
        # any perturbed action does not
        params = DegradationParams(Q_MAX_REF, 0.2)
        traj = simulate(params, LoadProfile(np.full(200, 2.0)),
                        config.battery)
        true_action = params_to_action(params, config)
        env = CalibEnv(config)
        env.reset(traj)
        _, c_true, _ = env.step(true_action)
        env.reset(traj)
        _, c_off, _ = env.step(true_action + 0.05)
        zero_gap = c_true <= 1e-12 and c_off > 1e-6

        # oracle-action optimality on 20 trajectories vs 20 random constants
        oracle_ok = True
        for k in range(20):
            p = DegradationParams(Q_MAX_REF, float(rng.uniform(0.117215, 0.30)))
            currents = np.repeat(rng.uniform(1.0, 3.0, 12), 50)
            t = simulate(p, LoadProfile(currents), config.battery)
            oracle_cost = rollout_cost(t, params_to_action(p, config), config)
            for _ in range(20):
                if oracle_cost > rollout_cost(t, rng.uniform(-1, 1, 1),
                                              config) + 1e-12:
                    oracle_ok = False

        # tabular critic fixed point vs brute-force value iteration
        gamma = 0.9
        nxt = np.array([[1, 2], [2, 0], [2, 2]])
        cost = np.array([[1.0, 0.5], [0.2, 2.0], [0.0, 0.0]])
        terminal = np.array([False, False, True])
        v = np.zeros(3)
        for _ in range(2000):
            nv = np.zeros(3)
            for s in range(3):
                if not terminal[s]:
                    nv[s] = cost[s, 0] + gamma * v[nxt[s, 0]]
            v = nv
        table = np.zeros(3)
        for _ in range(2000):
            new = np.zeros(3)
            for s in range(3):
                if not terminal[s]:
                    s2 = nxt[s, 0]
                    done = terminal[s2]
                    new[s] = lyapunov_target(cost[s, 0], gamma,
                                             1.0 if done else 0.0,
                                             0.0 if done else table[s2])
            table = new
        tabular_ok = bool(np.max(np.abs(table - v)) < 1e-6)

        elapsed = time.time() - t0
        check(3, f"MDP soundness ({elapsed:.0f}s)",
              zero_gap and oracle_ok and tabular_ok and elapsed < 120.0)


# -- criteria 4, 5, 7: desk-scale experiment --------------------------------

class TestCriterion4:
    def test_desk_scale_rl_tracking(self, desk_runs):
        r_o_err = aggregate_metric(desk_runs["r_o"]["out"], "rl", "r_o",
                                   "mean_rel_error")
        q_max_err = aggregate_metric(desk_runs["q_max"]["out"], "rl", "q_max",
                                     "mean_rel_error")
        minutes = sum(r["minutes"] for r in desk_runs.values())
        check(4, f"desk-scale RL tracking (r_o {r_o_err:.2%}, "
                 f"q_max {q_max_err:.2%}, {minutes:.0f} min)",
              r_o_err <= 0.05 and q_max_err <= 0.10)


class TestCriterion5:
    def test_desk_scale_supervised_baseline(self, desk_runs):
        q_max_err = aggregate_metric(desk_runs["q_max"]["out"], "supervised",
                                     "q_max", "mean_rel_error")
        # the bias metric must be reported for both methods
        biases = [aggregate_metric(desk_runs[t]["out"], mode, t, "bias")
                  for t in ("r_o", "q_max") for mode in ("rl", "supervised")]
        check(5, f"desk-scale supervised baseline (q_max {q_max_err:.2%}, "
                 "bias reported for both methods)",
              q_max_err <= 0.05 and all(np.isfinite(b) for b in biases))


class TestCriterion7:
    def test_multiplier_behavior(self, desk_runs):
        in_bounds = True
        sign_ok = True
        target_entropy = -1.0  # one action component per run
        # the logged entropy is a per-episode Monte Carlo mean (~2000
        # samples, SE ~0.015); a window only counts as above-target when
        # both endpoints clear the target by more than estimation noise
        margin = 0.05
        for target in ("r_o", "q_max"):
            rows = training_log(desk_runs[target]["out"])
            for row in rows:
                if not (0.0 <= float(row["beta"]) <= 10.0
                        and 0.0 <= float(row["lambda"]) <= 10.0):
                    in_bounds = False
            for prev, cur in zip(rows, rows[1:]):
                e_prev = float(prev["entropy"])
                e_cur = float(cur["entropy"])
                if (np.isfinite(e_prev) and np.isfinite(e_cur)
                        and e_prev > target_entropy + margin
                        and e_cur > target_entropy + margin):
                    if float(cur["beta"]) > float(prev["beta"]) * (1 + 1e-9):
                        sign_ok = False
        check(7, "multiplier behavior (bounds and entropy sign rule)",
              in_bounds and sign_ok)


# -- criterion 6: reproducibility -------------------------------------------

SMALL_CONFIG = """
run.target = r_o
dataset.count = 10
dataset.max_steps = 400
lac.total_steps = 400
lac.warmup_steps = 100
lac.batch_size = 32
lac.hidden = 24, 24
lac.buffer_capacity = 5000
supervised.epochs = 2
supervised.hidden = 24, 24
"""


class TestCriterion6:
    def test_reproducibility(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SMALL_CONFIG)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            base = ["--config", str(cfg), "--out", str(out), "--seed", "7"]
            assert cli.main(["generate", *base]) == 0
            assert cli.main(["train-rl", *base]) == 0
            assert cli.main(["evaluate", *base, "--mode", "rl",
                             "--checkpoint",
                             str(out / "rl_checkpoint.json")]) == 0
            outs.append(out)
        a, b = outs
        files = ("dataset.csv", "manifest.json", "rl_training_log.csv",
                 "rl_checkpoint.json", "eval_report_rl.csv",
                 "tracking_rl.csv")
        identical = all((a / f).read_bytes() == (b / f).read_bytes()
                        for f in files)

        # checkpoint round-trip preserves evaluation bit-exactly
        from battcal import checkpoint
        agent, _ = checkpoint.load_rl(a / "rl_checkpoint.json")
        checkpoint.save_rl(a / "resaved.json", agent)
        agent2, _ = checkpoint.load_rl(a / "resaved.json")
        obs = np.random.default_rng(0).standard_normal(15)
        roundtrip = bool(np.array_equal(agent.act(obs), agent2.act(obs)))
        check(6, "reproducibility (byte-identical reruns, checkpoint "
                 "round-trip)", identical and roundtrip)
