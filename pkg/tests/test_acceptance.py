"""Acceptance gate: one test, and one PASS/FAIL line, per criterion.

Training-heavy criteria share module-scoped fits.  A full run takes the
better part of an hour on one core; ``pytest tests/test_acceptance.py -s``
streams the criterion lines as they are decided.
"""

import io
import itertools
import math
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from w1ot import autodiff as ad, datasets
from w1ot.cli import main as cli_main
from w1ot.config import RunConfig, load_checkpoint, save_checkpoint
from w1ot.dual import DualTrainConfig, NetworkConfig, train_potential
from w1ot.lipschitz import PotentialNet, lipschitz_audit
from w1ot.metrics import evaluate, gradient_norm_stats, mmd_rbf, monotonicity_violation_rate, r2_feature_means
from w1ot.oracle import data_diameter, w1_1d, w1_matching
from w1ot.stepsize import GanTrainConfig, TransportMap, fit_w1ot, train_stepsize

from gradcases import op_catalogue

SEEDS3 = (0, 1, 2)
SEEDS5 = (0, 1, 2, 3, 4)
TOY_N = 256
BOOKSHELF_N = 1024
MARKERS = np.column_stack([np.linspace(0.1, 0.9, 5), np.zeros(5)])


def _box(*arrays, margin=0.1):
    pts = np.vstack(arrays)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * np.maximum(hi - lo, 1e-6)
    return lo - pad, hi + pad


@pytest.fixture(scope="module")
def bookshelf_runs():
    runs = {}
    for seed in SEEDS5:
        src, tgt = datasets.gen_bookshelf(BOOKSHELF_N, seed=seed)
        t0 = time.process_time()
        tmap = fit_w1ot(src.features, tgt.features, DualTrainConfig(seed=seed), GanTrainConfig(seed=seed))
        runs[seed] = (tmap, src.features, tgt.features, time.process_time() - t0)
    return runs


@pytest.fixture(scope="module")
def toy_potentials():
    fits = {}
    for name in datasets.TOY_DATASETS:
        for seed in SEEDS3:
            src, tgt = datasets.generate(name, TOY_N, seed=seed)
            f, hist = train_potential(src.features, tgt.features, DualTrainConfig(seed=seed))
            fits[name, seed] = (f, hist, src.features, tgt.features)
    return fits


@pytest.fixture(scope="module")
def toy_maps(toy_potentials):
    maps = {}
    for name in ("moons", "swiss_roll", "circles"):
        for seed in SEEDS3:
            f, hist, X, Y = toy_potentials[name, seed]
            eta, gan_hist = train_stepsize(f, X, Y, GanTrainConfig(seed=seed))
            maps[name, seed] = (TransportMap(f, eta, dual_history=hist, gan_history=gan_hist), X, Y)
    return maps


@pytest.fixture(scope="module")
def bjorck_potential():
    src, tgt = datasets.generate("moons", TOY_N, seed=0)
    net = NetworkConfig(method="bjorck")
    f, hist = train_potential(src.features, tgt.features, DualTrainConfig(seed=0), net=net)
    return f, src.features, tgt.features


def test_ac01_bookshelf_dual_accuracy(acceptance, bookshelf_runs):
    duals = {s: r[0].dual_history.final_dual for s, r in bookshelf_runs.items()}
    secs = {s: r[3] for s, r in bookshelf_runs.items()}
    ok = all(1.90 <= d <= 2.05 for d in duals.values()) and max(secs.values()) <= 300
    detail = ("duals " + ", ".join(f"{d:.4f}" for d in duals.values())
              + f" in [1.90, 2.05]; max CPU {max(secs.values()):.0f}s <= 300s")
    acceptance(1, "dual accuracy (bookshelf, 5 seeds)", ok, detail)


def test_ac02_weak_duality(acceptance, toy_potentials):
    worst = (-math.inf, None)
    for (name, seed), (f, hist, X, Y) in toy_potentials.items():
        exact = w1_matching(X, Y).cost
        slack = 1e-3 * data_diameter(X, Y)
        for it, value in zip(hist.full_iterations, hist.full_dual):
            if it % 1000 == 0:
                excess = value - (exact + slack)
                if excess > worst[0]:
                    worst = (excess, f"{name} seed {seed} iter {it}: dual {value:.5f} vs W1 {exact:.5f}")
    acceptance(2, "weak duality (4 toys x 3 seeds, every 1000 its)", worst[0] <= 0,
               f"max(dual - W1 - slack) = {worst[0]:.2e} at {worst[1]}")


def test_ac03_lipschitz(acceptance, toy_potentials, bjorck_potential):
    ratios = {}
    for method in ("cayley", "bjorck"):
        for seed in SEEDS3:
            f = PotentialNet(2, method=method, seed=seed)
            ratios[f"untrained {method} {seed}"] = lipschitz_audit(f, 10_000, (-3, 3), seed=seed).max_ratio
    for (name, seed), (f, _, X, Y) in toy_potentials.items():
        ratios[f"trained cayley {name} {seed}"] = lipschitz_audit(f, 10_000, _box(X, Y), seed=seed).max_ratio
    f, X, Y = bjorck_potential
    ratios["trained bjorck moons 0"] = lipschitz_audit(f, 10_000, _box(X, Y)).max_ratio
    worst = max(ratios, key=ratios.get)
    acceptance(3, "Lipschitz <= 1.001 over 1e4 pairs", ratios[worst] <= 1.001,
               f"{len(ratios)} potentials, worst {ratios[worst]:.6f} ({worst})")


def test_ac04_orthonormality(acceptance, toy_potentials, bjorck_potential):
    defects = {f"cayley {k[0]} {k[1]}": max(v[0].layer_defects()) for k, v in toy_potentials.items()}
    bj = bjorck_potential[0]
    defects[f"bjorck moons 0 ({bj.bjorck_iters} iters)"] = max(bj.layer_defects())
    worst = max(defects, key=defects.get)
    acceptance(4, "orthonormality defect <= 1e-3 after training", defects[worst] <= 1e-3,
               f"worst layer {defects[worst]:.2e} ({worst}); bjorck worst {max(bj.layer_defects()):.2e}")


def test_dual_trend_first_half(toy_potentials):
    # 500-iteration moving average, read at non-overlapping window ends
    drops = {}
    for (name, seed), (_, hist, _, _) in toy_potentials.items():
        half = np.asarray(hist.dual_estimate[: len(hist.dual_estimate) // 2])
        means = half[: len(half) // 500 * 500].reshape(-1, 500).mean(axis=1)
        drops[f"{name} {seed}"] = float(-np.diff(means).min())
    bad = {k: round(v, 5) for k, v in drops.items() if v > 0}
    print(f"dual trend: {len(drops) - len(bad)}/{len(drops)} runs non-decreasing; largest drops {bad}")
    assert not bad


def test_ac05_monotonicity(acceptance, bookshelf_runs, toy_maps):
    kept = 0
    for tmap, *_ in bookshelf_runs.values():
        x = tmap(MARKERS)[:, 0]
        kept += bool(np.all(np.diff(x) > 0))
    rates = [monotonicity_violation_rate(toy_maps["circles", s][0], toy_maps["circles", s][1], 10_000, seed=s)
             for s in SEEDS3]
    ok = kept == len(bookshelf_runs) and max(rates) <= 0.01
    acceptance(5, "monotone transport (bookshelf markers, circles audit)", ok,
               f"markers ordered in {kept}/{len(bookshelf_runs)} seeds; circles violation rates "
               + ", ".join(f"{r:.4f}" for r in rates) + " <= 0.01")


def test_ac06_alignment(acceptance, toy_maps):
    parts, ok = [], True
    for name in ("moons", "swiss_roll"):
        for seed in SEEDS3:
            tmap, X, Y = toy_maps[name, seed]
            TX = tmap(X)
            ratio = mmd_rbf(TX, Y) / mmd_rbf(X, Y)
            r2 = r2_feature_means(TX, Y)
            ok &= ratio <= 0.1 and r2 >= 0.95
            parts.append(f"{name}/{seed} mmd ratio {ratio:.4f} r2 {r2:.4f}")
    acceptance(6, "distribution alignment (moons, swiss roll)", ok, "; ".join(parts))


def test_ac07_gradient_norm(acceptance, bookshelf_runs):
    means = [gradient_norm_stats(bookshelf_runs[s][0].potential, bookshelf_runs[s][1])[0] for s in SEEDS3]
    acceptance(7, "mean |grad f| >= 0.8 on separated data (bookshelf)", min(means) >= 0.8,
               "means " + ", ".join(f"{m:.6f}" for m in means))


def _brute_force(X, Y):
    D = np.linalg.norm(X[:, None] - Y[None], axis=-1)
    perms = np.array(list(itertools.permutations(range(len(X)))))
    return D[np.arange(len(X)), perms].mean(axis=1).min()


def test_ac08_oracle(acceptance):
    rng = np.random.default_rng(2024)
    err2d = max(abs(w1_matching(X, Y).cost - _brute_force(X, Y))
                for X, Y in (rng.standard_normal((2, 7, 2)) for _ in range(50)))
    err1d = 0.0
    for n in rng.integers(1, 200, size=50):
        x, y = rng.standard_normal(n), rng.standard_normal(n) * 3 + 1
        err1d = max(err1d, abs(w1_1d(x, y) - w1_matching(x, y).cost))
    acceptance(8, "oracle correctness", err2d <= 1e-9 and err1d <= 1e-10,
               f"7-point brute force max err {err2d:.1e} (<=1e-9) over 50; 1-D sort vs matching {err1d:.1e} (<=1e-10)")


def test_ac09_autodiff(acceptance):
    worst = (0.0, None)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((3, 3))
        x[np.abs(x) < 0.05] += 0.1
        for name, fn in op_catalogue(np.random.default_rng(seed + 100)).items():
            worst = max(worst, (ad.grad_check(fn, x), f"{name} seed {seed}"), key=lambda t: t[0])
        for method in ("cayley", "bjorck"):
            f = PotentialNet(3, (8, 8), group_size=4, method=method, seed=seed)
            w = f.frozen_weights()
            err = ad.grad_check(lambda a: ad.sum(f.apply(a, w)), rng.standard_normal((4, 3)))
            worst = max(worst, (err, f"groupsort net {method} seed {seed}"), key=lambda t: t[0])
    acceptance(9, "grad_check <= 1e-5 (every op + GroupSort nets, 20 seeds)", worst[0] <= 1e-5,
               f"worst {worst[0]:.2e} ({worst[1]})")


def test_ac10_bench(acceptance):
    buf = io.StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        code = cli_main(["-q", "bench", "--dims", "2,48,1000", "--iters", "10000"])
    wall = time.perf_counter() - t0
    rows = [line.split(",") for line in buf.getvalue().strip().splitlines()[1:]]
    ms = {int(d): float(v) for d, v in rows}
    monotone = ms[2] <= ms[48] <= ms[1000]
    total_1000 = ms[1000] * 10  # 10 windows of 1000 iterations
    ok = code == 0 and monotone and total_1000 < 30 * 60 * 1000
    acceptance(10, "bench scaling", ok,
               "ms/1000 its " + ", ".join(f"d={d}: {v:.0f}" for d, v in ms.items())
               + f"; d=1000 run ~{total_1000 / 60000:.1f} min (< 30); sweep wall {wall / 60:.1f} min")


def _short_run(tmp_path, tag):
    src, tgt = datasets.generate("moons", 128, seed=7)
    cfg = RunConfig.from_dict({"dual": {"iterations": 300}, "gan": {"iterations": 200}, "seed": 7})
    tmap = fit_w1ot(src.features, tgt.features, cfg.dual, cfg.gan, cfg.network)
    path = tmp_path / f"{tag}.json"
    save_checkpoint(tmap, path, cfg)
    TX = tmap(src.features)
    report = evaluate(TX, tgt.features, transport=tmap, potential=tmap.potential, source=src.features, n_pairs=2000)
    reloaded = load_checkpoint(path)[0](src.features)
    return tmap, path.read_bytes(), report.to_json(), TX, reloaded


def test_ac11_determinism(acceptance, tmp_path):
    a, ckpt_a, rep_a, tx_a, re_a = _short_run(tmp_path, "a")
    b, ckpt_b, rep_b, tx_b, _ = _short_run(tmp_path, "b")
    ha, hb = a.dual_history, b.dual_history
    checks = {
        "dual history": (ha.dual_estimate, ha.lr, ha.full_iterations, ha.full_dual)
        == (hb.dual_estimate, hb.lr, hb.full_iterations, hb.full_dual),
        "gan history": (a.gan_history.gen_loss, a.gan_history.disc_loss)
        == (b.gan_history.gen_loss, b.gan_history.disc_loss),
        "checkpoint bytes": ckpt_a == ckpt_b,
        "metrics json": rep_a == rep_b,
        "transport": np.array_equal(tx_a, tx_b),
        "checkpoint round trip": np.array_equal(re_a, tx_a),
    }
    acceptance(11, "determinism", all(checks.values()),
               ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in checks.items()))
