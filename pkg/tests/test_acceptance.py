"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line with its measured
numbers; the lines are repeated in the pytest terminal summary.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from divattn.config import Hyperparams, RunSettings, echo_lines, loads_config
from divattn.core import make_rng
from divattn.errors import FormatError
from divattn.evaluation import Gallery, average_precision, cmc, mean_ap
from divattn.enhancement import EnhancementParams, forward as enhance_forward
from divattn.gradcheck import grad_check, random_instance
from divattn.io import checkpoint_bytes, parse_checkpoint
from divattn.model import forward, init_params, mean_pool_baseline_loss
from divattn.oim import OimState
from divattn.spatial import diversity_q
from divattn.synthetic import SyntheticSpec
from divattn.temporal import forward as temporal_forward
from divattn.train import embed_videos, load_splits, train

ACCEPTANCE_SEED = 20240


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@lru_cache(maxsize=None)
def trained(noise=0.05, p_occ=0.0, **hyper):
    """Train on the default synthetic dataset; returns (last row, held-out fields)."""
    h = Hyperparams(**hyper)
    run = RunSettings(synthetic=SyntheticSpec(noise=noise, p_occ=p_occ))
    splits = load_splits(run, h)
    result = train(h, splits)
    _, fields = embed_videos(splits.probes + splits.gallery, result.params)
    return result.rows[-1], np.concatenate(fields)


def max_cell_mass(S):
    return float(S.max(axis=-1).mean())


def test_c1_gradient_correctness():
    rng = make_rng(ACCEPTANCE_SEED)
    start = time.perf_counter()
    worst, where = 0.0, None
    for i in range(20):
        inst = random_instance(rng, penalty="Q", lambda_div=0.1)
        errs = grad_check(inst.params, inst, 1e-5, seed=i)
        name = max(errs, key=errs.get)
        if errs[name] > worst:
            worst, where = errs[name], (i, name)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 60
    report("1", ok, f"20 instances, max rel err {worst:.2e} (instance {where[0]}, {where[1]}) < 1e-4, "
                    f"{elapsed:.1f}s < 60s")
    assert worst < 1e-4
    assert elapsed < 60


def test_c2_hellinger_algebra():
    rng = make_rng(ACCEPTANCE_SEED)
    worst_h = 0.0
    for _ in range(1000):
        L = int(rng.integers(2, 33))
        p, q = rng.dirichlet(np.ones(L)), rng.dirichlet(np.ones(L))
        h_root = np.linalg.norm(np.sqrt(p) - np.sqrt(q)) / np.sqrt(2)
        h_bc = np.sqrt(1 - np.sum(np.sqrt(p * q)))
        worst_h = max(worst_h, abs(h_root - h_bc))
    worst_q = 0.0
    for _ in range(1000):
        K, L = int(rng.integers(1, 9)), int(rng.integers(2, 33))
        S = rng.dirichlet(np.ones(L), size=K)
        pair = 0.0
        for i in range(K):
            for j in range(i + 1, K):
                h2 = np.sum((np.sqrt(S[i]) - np.sqrt(S[j])) ** 2) / 2
                pair += (1 - h2) ** 2
        worst_q = max(worst_q, abs(diversity_q(S) - 2 * pair))
    ok = worst_h <= 1e-12 and worst_q <= 1e-10
    report("2", ok, f"Hellinger forms differ by {worst_h:.1e} <= 1e-12; Q identity off by {worst_q:.1e} <= 1e-10")
    assert worst_h <= 1e-12
    assert worst_q <= 1e-10


@pytest.mark.slow
def test_c3_diversity_effect():
    start = time.perf_counter()
    with_q, _ = trained(penalty="Q", lambda_div=0.1, epochs=30)
    without, _ = trained(penalty="none", epochs=30)
    bc_q, bc_none = with_q["mean_bhattacharyya"], without["mean_bhattacharyya"]
    elapsed = time.perf_counter() - start
    ok = bc_q <= 0.7 * bc_none
    report("3", ok, f"BC(Q, lambda 0.1) = {bc_q:.4f} <= 0.7 x BC(none) = {0.7 * bc_none:.4f} "
                    f"(BC(none) = {bc_none:.4f}); {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_c4_q_vs_qprime_contrast():
    # Both runs share every setting. With the default penalty weight and
    # epoch budget the Q' fields have not yet left the near-uniform region,
    # so the pair is trained with lambda_div = 1 for 90 epochs; the default
    # numbers are reported alongside.
    _, fields_q = trained(penalty="Q", lambda_div=1.0, epochs=90)
    _, fields_p = trained(penalty="Qprime", lambda_div=1.0, epochs=90)
    row_q, _ = trained(penalty="Q", lambda_div=1.0, epochs=90)
    row_p, _ = trained(penalty="Qprime", lambda_div=1.0, epochs=90)
    mass_q, mass_p = max_cell_mass(fields_q), max_cell_mass(fields_p)
    bc_q, bc_p = row_q["mean_bhattacharyya"], row_p["mean_bhattacharyya"]
    d_q, dfq = trained(penalty="Q", lambda_div=0.1, epochs=30)
    d_p, dfp = trained(penalty="Qprime", lambda_div=0.1, epochs=30)
    ok = mass_p > mass_q
    report("4", ok, f"lambda 1, 90 epochs: max-cell mass Q' {mass_p:.3f} > Q {mass_q:.3f}; "
                    f"BC Q {bc_q:.4f} vs Q' {bc_p:.4f}. Defaults (lambda 0.1, 30 epochs): "
                    f"mass Q' {max_cell_mass(dfp):.3f}, Q {max_cell_mass(dfq):.3f}; "
                    f"BC Q' {d_p['mean_bhattacharyya']:.4f}, Q {d_q['mean_bhattacharyya']:.4f}")
    assert ok


@pytest.mark.slow
def test_c5_retrieval_sanity():
    clean, _ = trained(noise=0.0, p_occ=0.0)
    full, _ = trained(p_occ=0.4)
    base, _ = trained(p_occ=0.4, K=1, spatial_mode="uniform", temporal_mode="average",
                      enhancement=False, penalty="none")
    ok = clean["rank1"] >= 0.95 and full["rank1"] >= base["rank1"]
    report("5", ok, f"noiseless rank-1 {clean['rank1']:.3f} >= 0.95; p_occ 0.4: full model "
                    f"{full['rank1']:.3f} >= baseline {base['rank1']:.3f}")
    assert clean["rank1"] >= 0.95
    assert full["rank1"] >= base["rank1"]


def test_c6_structural_reductions():
    rng = make_rng(ACCEPTANCE_SEED)
    worst_base = 0.0
    for _ in range(20):
        N, D, E, C = int(rng.integers(2, 7)), int(rng.integers(3, 9)), int(rng.integers(2, 6)), 4
        h = Hyperparams(N=N, K=1, grid_h=2, grid_w=3, D=D, d=3, E=E, spatial_mode="uniform",
                        temporal_mode="average", enhancement=True, penalty="Q")
        params = init_params(h, seed=int(rng.integers(1000)))
        params.arrays["embed.b"] = rng.standard_normal(E)
        table = rng.standard_normal((C, E))
        state = OimState(table / np.linalg.norm(table, axis=1, keepdims=True))
        grids = rng.standard_normal((N, 6, D))
        label = int(rng.integers(C))
        got = forward(grids, params, state, label)[0].total
        want = mean_pool_baseline_loss(grids, params["embed.W"], params["embed.b"], state, label)
        worst_base = max(worst_base, abs(got - want))
    Xhat = rng.standard_normal((5, 3, 4))
    T_att, x_att, _ = temporal_forward(Xhat, np.zeros((3, 4)), rng.standard_normal(3), "attention", "softmax")
    T_avg, x_avg, _ = temporal_forward(Xhat, rng.standard_normal((3, 4)), np.zeros(3), "average", "softmax")
    worst_avg = float(np.max(np.abs(x_att - x_avg)))
    X = rng.standard_normal((5, 3, 4))
    p = EnhancementParams.zeros(5, 4)
    p.W_pos, p.b_pos = rng.standard_normal((5, 5)), rng.standard_normal(5)
    identity = np.array_equal(enhance_forward(X, p)[0], X)
    ok = worst_base <= 1e-10 and worst_avg <= 1e-12 and identity
    report("6", ok, f"baseline loss gap {worst_base:.1e} <= 1e-10; uniform-response temporal gap "
                    f"{worst_avg:.1e} <= 1e-12; zero-FCN enhancement exact identity: {identity}")
    assert worst_base <= 1e-10
    assert worst_avg <= 1e-12
    assert identity


def _brute_force(probe_emb, probe_label, gallery_emb, gallery_labels):
    sims = [float(np.dot(g, probe_emb)) for g in gallery_emb]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    hits, first, precisions = 0, None, []
    for rank, i in enumerate(order, 1):
        if gallery_labels[i] == probe_label:
            hits += 1
            precisions.append(hits / rank)
            if first is None:
                first = rank
    return first, math.fsum(precisions) / len(precisions)


def test_c7_evaluation_oracles():
    rng = make_rng(ACCEPTANCE_SEED)
    mismatches = 0
    for _ in range(100):
        M, P, E = int(rng.integers(2, 51)), int(rng.integers(1, 8)), 4
        ids = int(rng.integers(1, min(M, 6) + 1))
        g_labels = rng.integers(0, ids, size=M)
        # Quantized embeddings produce exact similarity ties.
        g_emb = rng.integers(-2, 3, size=(M, E)).astype(float)
        p_labels = rng.choice(g_labels, size=P)
        p_emb = rng.integers(-2, 3, size=(P, E)).astype(float)
        probes, gallery = Gallery(p_emb, p_labels), Gallery(g_emb, g_labels)
        firsts, aps = zip(*(_brute_force(p_emb[i], p_labels[i], g_emb, g_labels) for i in range(P)))
        want_cmc = np.array([np.mean([f <= k for f in firsts]) for k in range(1, M + 1)])
        if not (np.array_equal(cmc(probes, gallery), want_cmc) and mean_ap(probes, gallery) == math.fsum(aps) / len(aps)):
            mismatches += 1
    hand = average_precision(np.array([False, True, False]))
    ok = mismatches == 0 and hand == 0.5
    report("7", ok, f"{mismatches}/100 mismatches against brute force; hand case AP = {hand}")
    assert mismatches == 0
    assert hand == 0.5


def test_c8_determinism_and_io(tmp_path):
    text = "epochs = 3\nidentities = 8\ntrain_identities = 4\nmin_frames = 6\nframes = 10\nseed = 7\n"
    outputs = []
    for trial in range(2):
        h, run = loads_config(text)
        path = tmp_path / f"metrics{trial}.csv"
        res = train(h, load_splits(run, h), run, metrics_path=path)
        outputs.append((checkpoint_bytes(res.params, res.state), path.read_bytes(), res))
    same_ckpt = outputs[0][0] == outputs[1][0]
    same_csv = outputs[0][1] == outputs[1][1]
    blob = outputs[0][0]
    back = parse_checkpoint(blob)
    res = outputs[0][2]
    round_trip = checkpoint_bytes(back.params, back.state) == blob and all(
        np.array_equal(back.params[n], res.params[n]) for n in res.params.names()
    ) and back.hyper == res.params.hyper
    corrupt = bytearray(blob)
    corrupt[len(blob) // 2] ^= 0x10
    try:
        parse_checkpoint(bytes(corrupt))
        rejected = False
    except FormatError:
        rejected = True
    ok = same_ckpt and same_csv and round_trip and rejected
    report("8", ok, f"identical checkpoints {same_ckpt}, identical metrics CSV {same_csv}, "
                    f"bit-exact round trip {round_trip}, corrupted checkpoint rejected {rejected}")
    assert same_ckpt and same_csv and round_trip and rejected


def test_c9_hyperparameter_fidelity():
    h = Hyperparams()
    echoed = echo_lines(h, RunSettings())
    drop = h.drop_epoch()
    schedule = [h.lr_at(e) for e in range(h.epochs)]
    checks = {
        "N = 6": h.N == 6 and "N = 6" in echoed,
        "K = 6": h.K == 6 and "K = 6" in echoed,
        "lr 0.1 -> 0.01": h.lr == 0.1 and h.lr_drop == 0.01 and "lr = 0.1" in echoed
        and "lr_drop = 0.01" in echoed and schedule[0] == 0.1 and schedule[-1] == 0.01
        and schedule[drop - 1] == 0.1 and schedule[drop] == 0.01,
    }
    rng = make_rng(ACCEPTANCE_SEED)
    params = init_params(Hyperparams(), seed=0)
    from divattn.model import describe
    desc, _, _ = describe(rng.standard_normal((6, 32, 64)), params)
    checks["unit embedding"] = abs(np.linalg.norm(desc.embedding) - 1) < 1e-12
    ok = all(checks.values())
    report("9", ok, ", ".join(f"{k}: {v}" for k, v in checks.items()))
    assert ok
