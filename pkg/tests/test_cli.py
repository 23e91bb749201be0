import numpy as np
import pytest

from tinymask import modelio
from tinymask.cli import main
from tinymask.datakit import write_image
from tinymask.modelio import FloatModel
from tinymask.netgraph import Dense, Flatten, NetworkConfig


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Synthetic train/test folders and a 2-epoch tinymask model, built through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--n", "300", "--seed", "1", "--out", str(d / "train")]) == 0
    assert main(["synth", "--n", "120", "--seed", "2", "--out", str(d / "test")]) == 0
    assert main(["train", "--dataset", str(d / "train"), "--epochs", "2", "--seed", "0", "--out", str(d / "f.tqm")]) == 0
    return d


def test_train_outputs(workdir):
    assert modelio.read_header((workdir / "f.tqm").read_bytes())["flavor"] == "float32"
    hist = (workdir / "f.history.csv").read_text().splitlines()
    assert hist[0].startswith("epoch") and len(hist) == 3


def test_train_rerun_identical_history(workdir, capsys):
    code, out, _ = run(capsys, "train", "--dataset", workdir / "train", "--epochs", "2", "--seed", "0",
                       "--out", workdir / "g.tqm")
    assert code == 0 and "best_val_acc" in out
    assert (workdir / "g.history.csv").read_text() == (workdir / "f.history.csv").read_text()
    assert (workdir / "g.tqm").read_bytes() == (workdir / "f.tqm").read_bytes()


def test_train_bad_path(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--dataset", tmp_path / "nope", "--out", tmp_path / "m.tqm")
    assert code == 2 and "nope" in err


def test_quantize(workdir, capsys):
    code, out, _ = run(capsys, "quantize", "--model", workdir / "f.tqm", "--test-set", workdir / "test",
                       "--out", workdir / "q.tqm", "--seed", "4")
    assert code == 0
    assert "budget: PASS" in out
    size = (workdir / "q.tqm").stat().st_size
    assert size <= 150 * 1024
    first = (workdir / "q.tqm").read_bytes()
    run(capsys, "quantize", "--model", workdir / "f.tqm", "--test-set", workdir / "test",
        "--out", workdir / "q2.tqm", "--seed", "4")
    assert (workdir / "q2.tqm").read_bytes() == first


def test_quantize_csv(workdir, capsys):
    code, out, _ = run(capsys, "quantize", "--model", workdir / "f.tqm", "--test-set", workdir / "test",
                       "--out", workdir / "q3.tqm", "--format", "csv", "--budget-kb", "100")
    header, row = out.strip().splitlines()
    assert header.startswith("float32_bytes,int8_bytes")
    assert row.endswith(",0")  # over a 100 KB budget


def test_quantize_zero_rep_samples(workdir):
    with pytest.raises(SystemExit) as exc:
        main(["quantize", "--model", str(workdir / "f.tqm"), "--test-set", str(workdir / "test"),
              "--out", str(workdir / "x.tqm"), "--rep-samples", "0"])
    assert exc.value.code == 2


def test_quantize_needs_float(workdir, capsys):
    test_quantize(workdir, capsys)
    code, _, err = run(capsys, "quantize", "--model", workdir / "q.tqm", "--test-set", workdir / "test",
                       "--out", workdir / "x.tqm")
    assert code == 2 and "float32" in err


def test_eval_both_flavors(workdir, capsys):
    test_quantize(workdir, capsys)
    code, out, _ = run(capsys, "eval", "--model", workdir / "f.tqm", "--model", workdir / "q.tqm",
                       "--test-set", workdir / "test")
    assert code == 0
    assert "float32 classification report" in out and "int8 classification report" in out
    assert "delta (int8 - float32)" in out


def test_eval_two_int8_is_format_error(workdir, capsys):
    test_quantize(workdir, capsys)
    code, _, err = run(capsys, "eval", "--model", workdir / "q.tqm", "--model", workdir / "q.tqm",
                       "--test-set", workdir / "test")
    assert code == 2


def test_eval_empty_dir(workdir, tmp_path, capsys):
    (tmp_path / "mask").mkdir()
    (tmp_path / "no_mask").mkdir()
    code, _, _ = run(capsys, "eval", "--model", workdir / "f.tqm", "--test-set", tmp_path)
    assert code == 2


def test_bench_tinymask(workdir, capsys):
    test_quantize(workdir, capsys)
    code, out, _ = run(capsys, "bench", "--model", workdir / "q.tqm", "--trials", "5")
    assert code == 0
    assert "median of 5" in out
    peak = int(next(l for l in out.splitlines() if l.startswith("arena_peak_bytes")).split(": ")[1])
    assert peak <= 496 * 1024
    assert "not measured" in out


def test_bench_rejects_float(workdir, capsys):
    code, _, _ = run(capsys, "bench", "--model", workdir / "f.tqm")
    assert code == 2


def test_info(workdir, capsys):
    code, out, _ = run(capsys, "info", "--model", workdir / "f.tqm")
    assert code == 0 and "magic: TQM1" in out and "params: 128193" in out


@pytest.fixture()
def color_toy(tmp_path):
    """Red means Mask, blue means No-Mask; a 1x1x3 dense model separates them perfectly."""
    cfg = NetworkConfig((1, 1, 3), [Flatten(), Dense(1, "sigmoid")], name="color-toy")
    params = {"dense1.w": np.array([[8.0], [0.0], [-8.0]], np.float32), "dense1.b": np.zeros(1, np.float32)}
    modelio.save(FloatModel(cfg, params), tmp_path / "toy.tqm")
    for cls, color in (("mask", (230, 20, 20)), ("no_mask", (20, 20, 230))):
        (tmp_path / "data" / cls).mkdir(parents=True)
        for i in range(4):
            write_image(tmp_path / "data" / cls / f"{i}.png", np.full((6, 6, 3), color, np.uint8))
    return tmp_path


def test_eval_perfect_toy(color_toy, capsys):
    code, out, _ = run(capsys, "eval", "--model", color_toy / "toy.tqm", "--test-set", color_toy / "data",
                       "--format", "csv")
    assert code == 0
    rows = [r.split(",") for r in out.splitlines()[2:4]]
    assert all(r[1:4] == ["1.0000"] * 3 for r in rows)


def test_bench_dense_toy_macs(color_toy, capsys):
    run(capsys, "quantize", "--model", color_toy / "toy.tqm", "--test-set", color_toy / "data",
        "--out", color_toy / "toy_q.tqm", "--rep-samples", "8")
    code, out, _ = run(capsys, "bench", "--model", color_toy / "toy_q.tqm", "--trials", "3", "--format", "csv")
    assert code == 0
    assert "dense1,3" in out and "total,3" in out


def test_augment(tmp_path, capsys):
    for cls in ("mask", "no_mask"):
        (tmp_path / "in" / cls).mkdir(parents=True)
        write_image(tmp_path / "in" / cls / "a.png", np.full((40, 40, 3), 90, np.uint8))
    code, out, _ = run(capsys, "augment", "--dataset", tmp_path / "in", "--out", tmp_path / "out")
    assert code == 0
    assert "mask: 1 -> 5" in out
    assert len(list((tmp_path / "out" / "mask").glob("*.png"))) == 5
    code, _, _ = run(capsys, "augment", "--dataset", tmp_path / "missing", "--out", tmp_path / "o2")
    assert code == 2


def test_unknown_arch(workdir, capsys):
    code, _, err = run(capsys, "train", "--dataset", workdir / "train", "--arch", "resnet", "--out", workdir / "r.tqm")
    assert code == 2 and "resnet" in err
