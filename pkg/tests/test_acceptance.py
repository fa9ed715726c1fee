"""Acceptance suite: one test per criterion.

Every test prints a ``criterion NN: PASS|FAIL`` line (collected again in the
terminal summary by ``conftest.py``) before asserting. The two training
experiments (ordering and horizon matrix) take roughly an hour on one CPU
core; they are marked ``slow``.
"""

import hashlib
import math
from fractions import Fraction
import time

import numpy as np
import pytest
import torch

from rivertraj import kernels
from rivertraj.baselines import KINDS, build_speed_table, predict_baseline, predict_baselines
from rivertraj.cli import main
from rivertraj.evaluation import ate, horizon_stats, per_step_error, target_positions
from rivertraj.geometry import reconstruct, reconstruct_array, steps_from_positions
from rivertraj.models import (
    ModelConfig,
    build_model,
    classification_loss,
    hybrid_loss,
    predict_greedy,
    regression_loss,
    to_tensors,
    train,
)
from rivertraj.pipeline import DiscretizationSpec, build_samples, dediscretize_array, split
from rivertraj.river import context_length
from rivertraj.synth import FleetSpec, SyntheticRiverSpec, generate_fleet, generate_river

# Dataset and training budget shared by the two model experiments.
RIVER = SyntheticRiverSpec(min_radius=500.0)
FLEET = FleetSpec(vessels=150, base_speed=(2.0, 5.5), curvature_slowdown=(0.2, 0.7), noise_scale=(0.01, 0.03))
BUDGET_SECONDS = 600.0
# the time cap leaves room for the epoch in progress and for greedy decoding of the test set
TRAINING = dict(max_epochs=200, patience=8, max_train_seconds=520.0)
SPLIT_SEED = 0


@pytest.fixture(scope="module")
def river():
    return generate_river(RIVER)


@pytest.fixture(scope="module")
def records(river):
    return generate_fleet(river, FLEET)


# ---------------------------------------------------------------- geometry


def test_c01_round_trip(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(3, 40))
        lengths = rng.uniform(1.0, 500.0, k)
        headings = rng.uniform(0.0, 2 * math.pi, k)
        pts = np.vstack([[0.0, 0.0], np.cumsum(np.column_stack([np.sin(headings), np.cos(headings)]) * lengths[:, None], 0)])
        pts += rng.uniform(-1e4, 1e4, 2)
        seed_cog, steps = steps_from_positions(pts)
        back = np.array(reconstruct(pts[0], seed_cog, steps))
        worst = max(worst, float(np.abs(back - pts[1:]).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 5.0
    verdict(1, ok, f"max deviation {worst:.2e} m, {elapsed:.2f} s")
    assert ok


def brute_cog_diff(c1, c2):
    """Shortest rotation by scanning both directions; a half turn is clockwise."""
    cw = (c2 - c1) % 360
    ccw = (c1 - c2) % 360
    return cw if cw <= ccw else -ccw


def test_c02_cog_diff_laws(verdict):
    t0 = time.perf_counter()
    grid = np.arange(360.0)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    a, b = a.ravel(), b.ravel()
    d = kernels.cog_diff(a, b)
    oracle = np.array([brute_cog_diff(x, y) for x, y in zip(a.tolist(), b.tolist())])
    agree = bool(np.array_equal(d, oracle))
    in_range = bool(np.all((d >= -180) & (d <= 180)))
    half = np.abs(d) == 180
    anti = bool(np.array_equal(kernels.cog_diff(b, a)[~half], -d[~half]))
    wrap = all(
        np.array_equal(kernels.cog_diff(a + s, b), d) and np.array_equal(kernels.cog_diff(a, b + s), d)
        for s in (-720.0, -360.0, 360.0, 720.0)
    )
    elapsed = time.perf_counter() - t0
    ok = agree and in_range and anti and wrap and elapsed < 10.0 and len(d) == 129_600
    verdict(2, ok, f"{len(d)} pairs, oracle={agree} range={in_range} antisym={anti} wrap={wrap}, {elapsed:.2f} s")
    assert ok


def test_c03_context_length(verdict, river):
    got = {}
    for n, m in ((5, 15), (10, 15), (10, 30)):
        got[(n, m)] = (context_length(n, m), len(river.context_window(river.axis.hm_min, n, m)))
    ok = got == {(5, 15): (93, 93), (10, 15): (116, 116), (10, 30): (185, 185)}
    verdict(3, ok, f"{got}")
    assert ok


# ---------------------------------------------------------------- data


def _first_vessels(records, count):
    keep = sorted({r.vessel_id for r in records})[:count]
    return [r for r in records if r.vessel_id in keep]


def test_c04_discretization_error(verdict, river, records):
    # 1 m / 1 degree over 40 steps so later step batches can be compared
    spec = DiscretizationSpec(distance_resolution=1.0, cog_resolution=1.0)
    samples, _ = build_samples(_first_vessels(records, 30), river, 10, 30, spec)
    labels = np.stack([s.labels for s in samples])
    recon = reconstruct_array(
        np.stack([s.seed_pos for s in samples]),
        np.array([s.seed_cog for s in samples]),
        dediscretize_array(labels, spec),
    )
    truth = np.stack([s.positions[1:41] for s in samples])
    dev = np.linalg.norm(recon - truth, axis=2).mean(0)
    at = {k: float(dev[k - 1]) for k in (10, 20, 30, 40)}
    scale_ok = at[20] <= 40.0
    sublinear = at[20] < 2 * at[10] and at[40] < 2 * at[20]
    ok = scale_ok and sublinear
    detail = ", ".join(f"{k} steps {v:.1f} m" for k, v in at.items())
    verdict(4, ok, f"{len(samples)} samples: {detail}; <=40 m at 20: {scale_ok}, sub-linear: {sublinear}")
    assert ok


# ---------------------------------------------------------------- models


@pytest.fixture(scope="module")
def small_samples(river, records):
    samples, _ = build_samples(_first_vessels(records, 10), river, 10, 15, DiscretizationSpec.for_horizon(15))
    return samples[:512]


def test_c05_untrained_loss(verdict, small_samples):
    data = to_tensors(small_samples)
    expected = 0.5 * math.log(465) + 0.5 * math.log(361)
    ratios = {}
    for arch in ("transformer", "lstm"):
        torch.manual_seed(0)
        model = build_model(ModelConfig.desk(arch)).eval()
        with torch.no_grad():
            out = model(data.src, data.tgt, data.context)
            ratios[arch] = classification_loss(out["distance"], out["cog"], data.tgt).item() / expected
    ok = all(abs(r - 1) < 0.05 for r in ratios.values())
    verdict(5, ok, " ".join(f"{a} {r:.4f}x" for a, r in ratios.items()) + f" of {expected:.4f}")
    assert ok


def _grad_check(arch):
    cfg = ModelConfig(
        architecture=arch, n=2, m=2, distance_vocab=5, cog_vocab=5, distance_embed=4, cog_embed=4,
        hidden_size=8, encoder_layers=1, decoder_layers=1, attention_heads=2, context_embed=2,
        curvature_bins=5, dropout=0.0,
    )
    torch.manual_seed(0)
    model = build_model(cfg).double().eval()
    g = torch.Generator().manual_seed(0)
    src = torch.randint(0, 5, (4, 2, 2), generator=g)
    tgt = torch.randint(0, 5, (4, 2, 2), generator=g)
    ctx = ((torch.rand(4, context_length(2, 2), generator=g) - 0.5) * 0.006).double()

    def loss_fn():
        out = model(src, tgt, ctx)
        return classification_loss(out["distance"], out["cog"], tgt)

    model.zero_grad()
    loss_fn().backward()
    flat = [(p, i) for p in model.parameters() if p.grad is not None for i in range(p.numel())]
    picks = np.random.default_rng(0).choice(len(flat), size=min(150, len(flat)), replace=False)
    eps, worst = 1e-6, 0.0
    with torch.no_grad():
        for k in picks:
            p, i = flat[k]
            view = p.view(-1)
            orig = view[i].item()
            view[i] = orig + eps
            up = loss_fn().item()
            view[i] = orig - eps
            down = loss_fn().item()
            view[i] = orig
            numeric = (up - down) / (2 * eps)
            analytic = p.grad.view(-1)[i].item()
            worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6))
    return len(picks), worst


def test_c06_gradient_check(verdict):
    results = {arch: _grad_check(arch) for arch in ("transformer", "lstm")}
    ok = all(k >= 100 and w < 1e-3 for k, w in results.values())
    verdict(6, ok, " ".join(f"{a}: {k} params, max rel {w:.1e}" for a, (k, w) in results.items()))
    assert ok


# ---------------------------------------------------------------- baselines and metrics


def _exact_mean(values):
    """Mean via an exact rational sum, rounded once."""
    values = list(values)
    return float(sum(map(Fraction, values), Fraction(0))) / len(values)


def _naive_table(samples):
    groups = {}
    for s in samples:
        for t in range(s.n + s.m):
            groups.setdefault(int(math.floor(s.hms[t] * 10 + 1e-9)), []).append(s.steps[t, 0])
    return {b: _exact_mean(v) for b, v in groups.items()}


def _naive_lookup(table, h):
    b = int(math.floor(h * 10 + 1e-9))
    if b in table:
        return table[b]
    return table[min(table, key=lambda k: (abs(k - b), k))]


def _naive_baseline(kind, s, table, axis):
    h = s.hms[s.n]
    obs = _exact_mean(s.steps[t, 0] for t in range(s.n))
    dev = _exact_mean(s.steps[t, 0] - _naive_lookup(table, s.hms[t]) for t in range(s.n))
    out = []
    for _ in range(s.m):
        if kind == "AVGObs":
            d = obs
        elif kind == "AVGData":
            d = _naive_lookup(table, h)
        else:
            d = _naive_lookup(table, h) + dev
        h = min(h + max(d, 0.1) / 1000, axis.hm[-1])
        i = min(max(int(np.searchsorted(axis.hm, h, side="right")) - 1, 0), len(axis.hm) - 2)
        u = (h - axis.hm[i]) / (axis.hm[i + 1] - axis.hm[i])
        out.append(axis.xy[i] + u * (axis.xy[i + 1] - axis.xy[i]))
    return np.array(out)


def test_c07_baseline_oracle(verdict, river, small_samples):
    train_set, test_set = small_samples[:400], small_samples[400:500]
    table = build_speed_table(train_set)
    naive = _naive_table(train_set)
    mismatches = {}
    for kind in KINDS:
        mismatches[kind] = sum(
            not np.array_equal(predict_baseline(kind, s, table, river)[0], _naive_baseline(kind, s, naive, river.axis))
            for s in test_set
        )
    ok = len(test_set) == 100 and not any(mismatches.values())
    verdict(7, ok, f"mismatches over {len(test_set)} samples: {mismatches}")
    assert ok


def test_c08_metric_oracles(verdict):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        B, m = int(rng.integers(1, 20)), int(rng.integers(1, 31))
        p = rng.uniform(-5000, 5000, (B, m, 2))
        t = rng.uniform(-5000, 5000, (B, m, 2))
        e = [[math.hypot(p[i, k, 0] - t[i, k, 0], p[i, k, 1] - t[i, k, 1]) for k in range(m)] for i in range(B)]
        brute_step = [sum(e[i][k] for i in range(B)) / B for k in range(m)]
        flat = [x for row in e for x in row]
        brute_ate = math.sqrt(sum(x * x for x in flat) / len(flat))
        final = sorted(row[-1] for row in e)
        mu = sum(final) / B
        brute_stats = (
            mu,
            math.sqrt(sum((x - mu) ** 2 for x in final) / B),
            final[B // 2] if B % 2 else (final[B // 2 - 1] + final[B // 2]) / 2,
        )
        got_stats = horizon_stats([row[-1] for row in e])
        worst = max(
            worst,
            float(np.abs(per_step_error(p, t) - brute_step).max()),
            abs(ate(p, t) - brute_ate),
            max(abs(g - b) for g, b in zip(got_stats, brute_stats)),
        )
    q = rng.uniform(-5000, 5000, (10, 15, 2))
    offset = ate(q, q + np.array([3.0, 4.0]))
    ok = worst <= 1e-9 and offset == 5.0
    verdict(8, ok, f"max deviation from brute force {worst:.1e}, constant-offset ATE {offset!r}")
    assert ok


def test_c10_hybrid_limits(verdict):
    g = torch.Generator().manual_seed(10)
    exact_one = exact_zero = 0
    for _ in range(100):
        B, m = int(torch.randint(1, 9, (1,), generator=g)), int(torch.randint(1, 31, (1,), generator=g))
        d, c = torch.randn(B, m, 465, generator=g), torch.randn(B, m, 361, generator=g)
        t = torch.stack([torch.randint(0, 465, (B, m), generator=g), torch.randint(0, 361, (B, m), generator=g)], -1)
        reg, tn = torch.rand(B, m, 2, generator=g), torch.rand(B, m, 2, generator=g)
        exact_one += torch.equal(hybrid_loss(d, c, reg, t, tn, 1.0), classification_loss(d, c, t))
        exact_zero += torch.equal(hybrid_loss(d, c, reg, t, tn, 0.0), regression_loss(reg, tn))
    ok = exact_one == 100 and exact_zero == 100
    verdict(10, ok, f"alpha=1 bit-exact {exact_one}/100, alpha=0 bit-exact {exact_zero}/100")
    assert ok


# ---------------------------------------------------------------- training experiments


def _dataset(river, records, n, m):
    spec = DiscretizationSpec.for_horizon(m)
    samples, _ = build_samples(records, river, n, m, spec)
    return spec, split(samples, seed=SPLIT_SEED, by_trajectory=True)


def _fit(data, arch, mode, n, m):
    spec, sp = data
    torch.set_num_threads(1)
    cfg = ModelConfig.desk(arch, context_mode=mode, n=n, m=m, distance_vocab=spec.distance_vocab, **TRAINING)
    t0 = time.process_time()
    result = train(sp, cfg)
    pred = predict_greedy(result.model, sp.test, spec, keep_probabilities=False)
    cpu = time.process_time() - t0
    errors = per_step_error(pred.positions, target_positions(sp.test, spec))
    return {"errors": errors, "cpu": cpu, "epochs": len(result.curves), "best_epoch": result.best_epoch}


@pytest.fixture(scope="module")
def data_10_15(river, records):
    return _dataset(river, records, 10, 15)


@pytest.fixture(scope="module")
def ordering(river, data_10_15):
    spec, sp = data_10_15
    targets = target_positions(sp.test, spec)
    table = build_speed_table(sp.train, (river.axis.hm_min, river.axis.hm_max))
    out = {"samples": len(sp.train) + len(sp.validation) + len(sp.test), "baselines": {}, "models": {}}
    for kind in KINDS:
        pred, _ = predict_baselines(kind, sp.test, table, river)
        out["baselines"][kind] = per_step_error(pred, targets)
    for arch in ("transformer", "lstm"):
        for mode in ("curvature", "agnostic"):
            out["models"][(arch, mode)] = _fit(data_10_15, arch, mode, 10, 15)
    return out


def _growth(errors):
    """Mean per-step increase of the error over the horizon."""
    return float((errors[-1] - errors[0]) / (len(errors) - 1))


@pytest.mark.slow
def test_c09_ordering(verdict, ordering):
    base = ordering["baselines"]
    models = ordering["models"]
    best_baseline = min(float(e[-1]) for e in base.values())
    lines = [f"{k} {float(e[-1]):.1f}" for k, e in base.items()]
    checks = {"budget": True, "a": True, "b": True, "c": True}
    for arch in ("transformer", "lstm"):
        ctx, agn = models[(arch, "curvature")], models[(arch, "agnostic")]
        for mode, r in ((arch + "-curv", ctx), (arch + "-agn", agn)):
            lines.append(f"{mode} {float(r['errors'][-1]):.1f} ({r['cpu']:.0f} s cpu)")
        checks["budget"] &= ctx["cpu"] <= BUDGET_SECONDS and agn["cpu"] <= BUDGET_SECONDS
        checks["a"] &= float(ctx["errors"][-1]) < best_baseline
        checks["b"] &= float(ctx["errors"][-1]) < float(agn["errors"][-1])
        checks["c"] &= _growth(agn["errors"]) > _growth(ctx["errors"])
    ok = ordering["samples"] >= 5000 and all(checks.values())
    verdict(9, ok, f"{ordering['samples']} samples; 15-step mean error: " + ", ".join(lines) + f"; {checks}")
    assert ok


@pytest.mark.slow
def test_c11_horizon_matrix(verdict, river, records, ordering):
    at15 = {(10, 15): float(ordering["models"][("lstm", "curvature")]["errors"][14])}
    for n, m in ((5, 15), (10, 30)):
        at15[(n, m)] = float(_fit(_dataset(river, records, n, m), "lstm", "curvature", n, m)["errors"][14])
    ok = at15[(5, 15)] >= at15[(10, 15)] and at15[(5, 15)] >= at15[(10, 30)]
    verdict(11, ok, "error at step 15: " + ", ".join(f"{k} {v:.1f} m" for k, v in at15.items()))
    assert ok


# ---------------------------------------------------------------- end to end


def _pipeline(root):
    syn, data, model, ev = (root / d for d in ("synth", "data", "model", "eval"))
    assert main(["synth", "--out", str(syn), "--length-km", "15", "--bend-count", "6", "--vessels", "10"]) == 0
    assert main(["preprocess", "--river", str(syn), "--ais", str(syn / "ais.csv"), "--out", str(data),
                 "--n", "5", "--m", "15"]) == 0
    assert main(["train", "--data", str(data), "--out", str(model), "--architecture", "transformer", "--desk",
                 "--max-epochs", "2", "--model-id", "trans"]) == 0
    assert main(["evaluate", "--data", str(data), "--river", str(syn), "--out", str(ev),
                 "--models", str(model / "model.pt")]) == 0
    return ev


def test_c12_determinism(verdict, tmp_path):
    first, second = _pipeline(tmp_path / "a"), _pipeline(tmp_path / "b")
    names = ("per_step_errors.csv", "stats.csv", "histogram.csv", "crossovers.csv", "speed_table.csv")
    same = {
        name: hashlib.sha256((first / name).read_bytes()).hexdigest()
        == hashlib.sha256((second / name).read_bytes()).hexdigest()
        for name in names
    }
    ok = all(same.values())
    verdict(12, ok, f"identical metrics files: {same}")
    assert ok
