import io
import json
import os
import shutil
import subprocess

import numpy as np
import pytest

from sdftopo import __version__
from sdftopo.cli import dumps, main
from sdftopo.cubical import diagram_from_csv, persistence_diagram
from sdftopo.distance import sdf
from sdftopo.fixtures import gen_fixture
from sdftopo.grid import load_image, read_field, save_image, write_gray8


def run(argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture
def pair(tmp_path):
    gt, pred = tmp_path / "gt.png", tmp_path / "pred.png"
    save_image(gt, gen_fixture("ring", 24), "mask")
    save_image(pred, gen_fixture("broken-ring", 24), "mask")
    return pred, gt


def test_gen_and_manifest(tmp_path):
    out = tmp_path / "g.pgm"
    code, text = run(["gen", "grid", "--size", 20, "--cells", 2, "--seed", 4, "-o", out])
    assert code == 0
    doc = json.loads(text)
    m = doc["manifest"]
    assert m["subcommand"] == "gen" and m["version"] == __version__ and m["seed"] == 4
    assert m["config"] == {"kind": "grid", "size": 20, "cells": 2, "output": str(out)}
    assert np.array_equal(load_image(out, "mask"), gen_fixture("grid", 20, 4, 2))


def test_metrics_json_and_csv(pair):
    pred, gt = pair
    code, text = run(["metrics", pred, gt])
    doc = json.loads(text)
    assert code == 0 and doc["betti_error_dim1"] == 1 and doc["betti_error_dim0"] == 0
    assert doc["manifest"]["inputs"] == [str(pred), str(gt)]
    code, text = run(["metrics", "--csv", "--header", pred, gt])
    header, row = text.splitlines()
    assert header == "dice,iou,pa,cl_dice,voi,betti_error_dim0,betti_error_dim1"
    assert row.split(",")[0] == format(doc["dice"], ".9g")


def test_loss_default_configuration(pair, tmp_path):
    pred, gt = pair
    g = tmp_path / "grad.sdf"
    code, text = run(["loss", "--kind", "wm", "--alpha", 0.9, "--pad", 2, pred, gt,
                      "--grad-out", g])
    doc = json.loads(text)
    assert code == 0
    assert set(doc) == {"manifest", "value", "dice_term", "topo_term", "grad_l1_norm",
                        "n_matched", "n_diagonal"}
    assert doc["manifest"]["config"]["alpha"] == 0.9
    assert doc["manifest"]["config"]["padding_width"] == 2
    assert read_field(g).shape == (24, 24)
    assert doc["grad_l1_norm"] == pytest.approx(np.abs(read_field(g)).sum(), rel=1e-6)


def test_loss_betti_and_dims(pair):
    pred, gt = pair
    code, text = run(["loss", "--kind", "bm", "--dims", "1", pred, gt])
    assert code == 0 and json.loads(text)["manifest"]["config"]["dims"] == [1]


def test_sdf_command(tmp_path):
    m = tmp_path / "m.png"
    save_image(m, gen_fixture("line", 12), "mask")
    code, text = run(["sdf", m, tmp_path / "f.sdf", "--png", tmp_path / "f.png"])
    assert code == 0
    assert np.array_equal(read_field(tmp_path / "f.sdf"),
                          sdf(gen_fixture("line", 12)).astype(np.float32))
    vis = load_image(tmp_path / "f.png")
    assert vis.min() == 0 and vis.max() == 255


def test_diagram_command(tmp_path):
    img = tmp_path / "a.png"
    px = np.array([[1, 1, 2], [2, 5, 2], [2, 1, 1]], np.uint8)
    write_gray8(img, px)
    code, text = run(["diagram", img])
    assert code == 0
    dgm = diagram_from_csv(text)
    assert sorted((p.dim, p.birth, p.death) for p in dgm) == \
        [(0, 1.0, 2.0), (0, 1.0, float("inf")), (1, 2.0, 5.0)]
    code, text = run(["diagram", img, "--direction", "superlevel", "-o", tmp_path / "d.csv"])
    assert code == 0 and json.loads(text)["pairs_dim1"] == 0
    back = diagram_from_csv((tmp_path / "d.csv").read_text())
    assert len(back) == len(persistence_diagram(px.astype(float), "superlevel"))


def test_refine_command(pair, tmp_path):
    pred, gt = pair
    out = tmp_path / "run"
    code, text = run(["refine", pred, gt, out, "--iters1", 5, "--iters2", 3, "--warm", "both"])
    assert code == 0
    doc = json.loads(text)
    assert set(doc) == {"manifest", "sdf", "cold"}
    assert json.loads((out / "summary.json").read_text()) == doc
    for mode in ("sdf", "cold"):
        assert (out / f"trace_{mode}.csv").read_text().startswith("iter,loss,dice,")
        assert load_image(out / f"mask_{mode}.png", "mask").shape == (24, 24)
    assert len((out / "trace_sdf.csv").read_text().splitlines()) == 9


def test_oracle_command(tmp_path):
    code, text = run(["oracle", "--suite", "persistence", "--n", 5, "--size", 5, "--seed", 7,
                      "--json", tmp_path / "r.json"])
    assert code == 0 and text == "PASS persistence n=5 size=5\n"
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["manifest"]["seed"] == 7 and doc["suites"]["persistence"]["status"] == "PASS"


def test_exit_codes(tmp_path, pair):
    pred, gt = pair
    assert run(["metrics", tmp_path / "nope.png", gt])[0] == 2
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"garbage")
    assert run(["metrics", junk, gt])[0] == 2
    assert run(["loss", "--bogus", pred, gt])[0] == 1
    assert run(["loss", "--alpha", 1.5, pred, gt])[0] == 1
    assert run(["frobnicate"])[0] == 1
    grey = tmp_path / "grey.png"
    write_gray8(grey, np.full((24, 24), 37, np.uint8))
    assert run(["metrics", pred, grey])[0] == 1
    small = tmp_path / "small.png"
    save_image(small, np.zeros((5, 5), np.uint8), "mask")
    assert run(["metrics", pred, small])[0] == 1


def test_nine_significant_digits():
    text = dumps({"x": 1 / 3, "y": [2 / 3, float("inf")], "z": np.float64(np.pi)})
    assert json.loads(text) == {"x": 0.333333333, "y": [0.666666667, "inf"], "z": 3.14159265}


def test_byte_identical_reruns(pair, tmp_path):
    pred, gt = pair
    for argv in (["metrics", pred, gt],
                 ["loss", "--kind", "bm", pred, gt, "--grad-out", tmp_path / "g.sdf"],
                 ["refine", pred, gt, tmp_path / "r", "--iters1", 4, "--iters2", 2],
                 ["diagram", pred, "--kind", "likelihood", "--direction", "superlevel"],
                 ["gen", "random-blobs", "--seed", 9, "-o", tmp_path / "b.png"]):
        first = run(argv)
        files = {p: p.read_bytes() for p in tmp_path.rglob("*") if p.is_file()}
        second = run(argv)
        assert first == second
        assert files == {p: p.read_bytes() for p in tmp_path.rglob("*") if p.is_file()}


@pytest.mark.skipif(shutil.which("sdftopo") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["sdftopo", "gen", "ring", "-o", str(tmp_path / "r.png")],
                         capture_output=True, text=True, env=os.environ)
    assert res.returncode == 0 and '"subcommand": "gen"' in res.stdout
    res = subprocess.run(["sdftopo", "--help"], capture_output=True, text=True)
    for sub in ("sdf", "diagram", "loss", "metrics", "refine", "oracle", "gen"):
        assert sub in res.stdout
