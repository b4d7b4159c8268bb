import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdftopo.cubical import betti_at, persistence_call_count, persistence_diagram
from sdftopo.distance import sdf
from sdftopo.fixtures import gen_fixture
from sdftopo.metrics import soft_dice_loss
from sdftopo.oracles import (betti_matching_dim0, brute_wasserstein, central_difference,
                             distinct_image)
from sdftopo.refine import AdapterParams, adapter_forward
from sdftopo.topo_loss import (LossConfig, betti_loss_grad, betti_matching, combined_loss,
                               pad_frame, wasserstein_loss_grad, wasserstein_matching)

WM = LossConfig(loss_kind="wasserstein")
BM = LossConfig(loss_kind="betti")


def random_diagram(rng, k):
    b = rng.random(k)
    return np.stack([b, b + rng.random(k)], axis=1)


def covers(m, n1, n2):
    left = [i for i, _ in m.matched] + m.pred_to_diagonal
    right = [j for _, j in m.matched] + m.target_to_diagonal
    return sorted(left) == list(range(n1)) and sorted(right) == list(range(n2))


# -- config and padding ------------------------------------------------------


def test_config_validation():
    for bad in (dict(alpha=1.5), dict(p=1), dict(padding_width=1), dict(dims=(2,)),
                dict(dims=()), dict(loss_kind="l2")):
        with pytest.raises(ValueError):
            LossConfig(**bad)
    assert LossConfig(dims=[1, 0, 1]).dims == (0, 1)


def test_pad_frame():
    g = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(pad_frame(g, 0), g)
    p = pad_frame(g, 2)
    assert p.shape == (6, 7)
    assert np.array_equal(p[2:-2, 2:-2], g)
    frame = np.ones_like(p, bool)
    frame[2:-2, 2:-2] = False
    assert np.all(p[frame] == 1.0)
    with pytest.raises(ValueError):
        pad_frame(g, -1)


def test_padding_adds_frame_features():
    dgm = persistence_diagram(pad_frame(np.zeros((8, 8)), 2), "superlevel")
    assert [(p.dim, p.birth, p.death, p.essential) for p in dgm] == \
        [(0, 1.0, -math.inf, True), (1, 1.0, 0.0, False)]
    assert len(persistence_diagram(np.zeros((8, 8)), "superlevel")) == 1


# -- Wasserstein matching ------------------------------------------------------


def test_identical_diagrams(rng):
    d = random_diagram(rng, 5)
    m, dist = wasserstein_matching(d, d)
    assert dist == 0 and sorted(m.matched) == [(i, i) for i in range(5)]


def test_single_point_to_diagonal():
    m, dist = wasserstein_matching([[0.0, 1.0]], np.empty((0, 2)))
    assert abs(dist - math.sqrt(0.5)) <= 1e-12
    assert m.pred_to_diagonal == [0] and not m.matched


def test_empty_diagrams():
    m, dist = wasserstein_matching(np.empty((0, 2)), np.empty((0, 2)))
    assert dist == 0 and covers(m, 0, 0)


def test_matches_enumeration(rng):
    for _ in range(40):
        a, b = random_diagram(rng, rng.integers(0, 6)), random_diagram(rng, rng.integers(0, 6))
        m, dist = wasserstein_matching(a, b)
        assert abs(dist - brute_wasserstein(a, b)) <= 1e-9
        assert covers(m, len(a), len(b))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_diagram(rng, rng.integers(0, 5)) for _ in range(3))
    ab = wasserstein_matching(a, b)[1]
    assert abs(ab - wasserstein_matching(b, a)[1]) <= 1e-9
    assert ab <= wasserstein_matching(a, c)[1] + wasserstein_matching(c, b)[1] + 1e-9


def test_nearest_point_assignment():
    a = np.array([[0.0, 1.0], [0.2, 0.9], [0.1, 0.6]])
    b = a[[2, 0, 1]] + 0.01
    m, _ = wasserstein_matching(a, b)
    assert sorted(m.matched) == [(0, 1), (1, 2), (2, 0)]


def test_diagram_matching_splits_by_dimension(rng):
    p = persistence_diagram(distinct_image(rng, 6), "superlevel")
    q = persistence_diagram(distinct_image(rng, 6), "superlevel")
    m, _ = wasserstein_matching(p, q)
    assert covers(m, len(p), len(q))
    for i, j in m.matched:
        assert p.pairs[i].dim == q.pairs[j].dim
        assert p.pairs[i].essential == q.pairs[j].essential


# -- Wasserstein loss ------------------------------------------------------------


@pytest.mark.parametrize("cfg", [WM, BM])
def test_perfect_prediction_zero_loss(cfg):
    gt = gen_fixture("grid", 16)
    lg = (wasserstein_loss_grad if cfg is WM else betti_loss_grad)(gt.astype(float), gt, cfg)
    assert lg.value == 0 and not lg.grad.any()


def _fd_check(loss_fn, pred, gt, cfg):
    lg = loss_fn(pred, gt, cfg)
    nz = np.argwhere(lg.grad != 0)
    assert len(nz) > 0
    for idx in map(tuple, nz):
        fd = central_difference(lambda x: loss_fn(x, gt, cfg).value, pred, idx)
        assert abs(fd - lg.grad[idx]) <= 1e-3 * abs(lg.grad[idx])


@pytest.mark.parametrize("loss_fn,cfg", [(wasserstein_loss_grad, WM), (betti_loss_grad, BM),
                                         (wasserstein_loss_grad, LossConfig(dims=(1,))),
                                         (betti_loss_grad, LossConfig(loss_kind="betti",
                                                                      padding_width=0))])
def test_finite_differences(rng, loss_fn, cfg):
    for _ in range(3):
        pred = distinct_image(rng, 12)
        gt = (rng.random((12, 12)) < 0.4).astype(np.uint8)
        _fd_check(loss_fn, pred, gt, cfg)


def test_gradient_support_is_critical_vertices(rng):
    for loss_fn, cfg in ((wasserstein_loss_grad, WM), (betti_loss_grad, BM)):
        pred = distinct_image(rng, 10)
        gt = (rng.random((10, 10)) < 0.5).astype(np.uint8)
        lg = loss_fn(pred, gt, cfg)
        dgm = persistence_diagram(pad_frame(pred, 2), "superlevel")
        crit = {p.birth_cell.critical_vertex for p in dgm}
        crit |= {p.death_cell.critical_vertex for p in dgm if not p.essential}
        support = {(r + 2, c + 2) for r, c in np.argwhere(lg.grad != 0)}
        assert support <= crit


def test_broken_ring_gradient_at_gap():
    gt = gen_fixture("ring", 32)
    broken = gen_fixture("broken-ring", 32)
    pred = adapter_forward(sdf(broken), AdapterParams(1.0, -1.9))
    lg = wasserstein_loss_grad(pred, gt, WM)
    gap = (gt == 1) & (broken == 0)
    dgm = persistence_diagram(pad_frame(pred, 2), "superlevel")
    loop = max(dgm.in_dim(1)[1:], key=lambda p: p.persistence)
    r, c = loop.birth_cell.critical_vertex
    assert gap[r - 2, c - 2]
    # the loop is pulled towards (1, 0): its birth pixel is pushed up
    assert lg.grad[r - 2, c - 2] < 0
    support = {tuple(x) for x in np.argwhere(lg.grad != 0)}
    crit = {(p.birth_cell.critical_vertex[0] - 2, p.birth_cell.critical_vertex[1] - 2)
            for p in dgm}
    crit |= {(p.death_cell.critical_vertex[0] - 2, p.death_cell.critical_vertex[1] - 2)
             for p in dgm if not p.essential}
    assert support <= crit


# -- Betti matching ------------------------------------------------------------------


def test_betti_matching_identity(rng):
    p = distinct_image(rng, 8)
    m = betti_matching(p, p)
    assert not m.pred_to_diagonal and not m.target_to_diagonal
    assert sorted(m.matched) == [(i, i) for i in range(len(m.pred))]
    assert betti_loss_grad(p, (p > 0.5).astype(np.uint8), BM).value >= 0


def test_spurious_component_goes_to_diagonal():
    gt = np.zeros((7, 7))
    gt[1:3, 1:6] = 1.0
    pred = gt * 0.9
    pred[5, 5] = 0.8
    m = betti_matching(pred, gt)
    diag = [m.pred.pairs[i].birth_cell.critical_vertex for i in m.pred_to_diagonal]
    assert diag == [(5, 5)]


def test_dim0_matching_oracle(rng):
    for _ in range(20):
        p, g = distinct_image(rng, 8), distinct_image(rng, 8)
        m = betti_matching(p, g)
        got = {m.pred.pairs[i].birth_cell.critical_vertex: m.target.pairs[j].birth_cell.critical_vertex
               for i, j in m.matched if m.pred.pairs[i].dim == 0}
        want, unmatched = betti_matching_dim0(p, g)
        assert got == want
        diag = sorted(m.pred.pairs[i].birth_cell.critical_vertex
                      for i in m.pred_to_diagonal if m.pred.pairs[i].dim == 0)
        assert diag == unmatched
        assert covers(m, len(m.pred), len(m.target))


def test_betti_loss_hand_expansion():
    pred = np.full((5, 5), 0.1)
    pred[2, 2] = 0.7
    gt = np.zeros((5, 5), np.uint8)
    lg = betti_loss_grad(pred, gt, BM)
    # spurious component (0.7, 0.1) -> (b - d)^2; frame loop (1, 0.1) vs (1, 0) -> 2 * 0.1^2
    assert lg.value == pytest.approx((0.7 - 0.1) ** 2 + 2 * 0.1 ** 2, abs=1e-15)
    assert lg.terms["n_matched"] == 1 and lg.terms["n_diagonal"] == 1
    wm = wasserstein_loss_grad(pred, gt, WM)
    assert wm.value == pytest.approx(0.5 * 0.6 ** 2 + 0.1 ** 2, abs=1e-15)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        wasserstein_loss_grad(np.zeros((3, 3)), np.zeros((3, 4), np.uint8), WM)
    with pytest.raises(ValueError):
        betti_matching(np.zeros((3, 3)), np.zeros((4, 3)))


# -- combined loss -----------------------------------------------------------------


def test_alpha_one_skips_topology(rng):
    pred = rng.random((10, 10))
    gt = (rng.random((10, 10)) < 0.5).astype(np.uint8)
    before = persistence_call_count()
    lg = combined_loss(pred, gt, LossConfig(alpha=1.0))
    assert persistence_call_count() == before
    d = soft_dice_loss(pred, gt)
    assert lg.value == d.value and np.array_equal(lg.grad, d.grad)
    combined_loss(pred, gt, LossConfig(alpha=0.9))
    assert persistence_call_count() > before


@pytest.mark.parametrize("kind", ["wasserstein", "betti"])
def test_weighted_sum(rng, kind):
    pred = distinct_image(rng, 9)
    gt = (rng.random((9, 9)) < 0.5).astype(np.uint8)
    cfg = LossConfig(alpha=0.9, loss_kind=kind)
    lg = combined_loss(pred, gt, cfg)
    t = (wasserstein_loss_grad if kind == "wasserstein" else betti_loss_grad)(pred, gt, cfg)
    d = soft_dice_loss(pred, gt)
    assert lg.value == pytest.approx(0.9 * d.value + 0.1 * t.value, rel=1e-15)
    assert np.allclose(lg.grad, 0.9 * d.grad + 0.1 * t.grad, rtol=0, atol=1e-15)
    assert lg.terms["topo_term"] == t.value and lg.terms["dice_term"] == d.value


def test_alpha_zero_perfect():
    gt = gen_fixture("ring", 16)
    lg = combined_loss(gt.astype(float), gt, LossConfig(alpha=0.0))
    assert lg.value == 0


@pytest.mark.parametrize("kind", ["wasserstein", "betti"])
def test_grad_is_unpadded(rng, kind):
    pred = rng.random((7, 9))
    gt = (rng.random((7, 9)) < 0.5).astype(np.uint8)
    assert combined_loss(pred, gt, LossConfig(loss_kind=kind)).grad.shape == (7, 9)


def test_padding_changes_topology_seen_by_loss():
    pred = np.zeros((6, 6))
    gt = np.zeros((6, 6), np.uint8)
    for w in (0, 2):
        cfg = LossConfig(padding_width=w)
        dgm = persistence_diagram(pad_frame(pred, w), "superlevel")
        assert tuple(betti_at(dgm, 0.5)) == ((0, 0) if w == 0 else (1, 1))
        assert wasserstein_loss_grad(pred, gt, cfg).value == 0
