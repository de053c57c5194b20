import subprocess
from pathlib import Path

import numpy as np

import ptomo


def run(cli, *args):
    return subprocess.run([cli, *args], capture_output=True, text=True)


def read_manifest(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def test_geometry_writes_manifest(cli, tmp_path):
    r = run(cli, "geometry", "--scale", "quarter", "--seed", "4", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    m = read_manifest(tmp_path / "manifest.txt")
    assert m["run.subcommand"] == "geometry"
    assert m["run.status"] == "ok"
    assert m["seed"] == "4"


def test_geometry_hash_is_reproducible(cli, tmp_path):
    hashes = []
    for name in ("a", "b"):
        assert run(cli, "geometry", "--scale", "quarter", "--out", str(tmp_path / name)).returncode == 0
        hashes.append(read_manifest(tmp_path / name / "manifest.txt")["run.operator_hash"])
    assert hashes[0] == hashes[1]
    assert (tmp_path / "a" / "operator.ptop").read_bytes() == (tmp_path / "b" / "operator.ptop").read_bytes()


def test_validation_errors_exit_1(cli, tmp_path):
    r = run(cli, "geometry", "--override", "cameras.vertical.count=0", "--out", str(tmp_path / "a"))
    assert r.returncode == 1
    assert run(cli, "geometry", "--override", "no.such.key=1", "--out", str(tmp_path / "b")).returncode == 1
    assert run(cli, "geometry", "--scale", "huge", "--out", str(tmp_path / "c")).returncode == 1
    assert run(cli, "train", "--dataset", str(tmp_path / "missing.ptds"), "--out", str(tmp_path / "d")).returncode == 1


def test_gen_train_reconstruct_and_divergence(cli, tmp_path):
    gen = tmp_path / "gen"
    r = run(cli, "gen", "--scale", "quarter", "--seed", "2", "--override", "gen.count=30", "--out", str(gen))
    assert r.returncode == 0, r.stderr
    ds = ptomo.Dataset.load(str(gen / "dataset.ptds"))
    assert len(ds) == 30
    assert len(ds.split("train")) == 24

    train = tmp_path / "train"
    r = run(cli, "train", "--scale", "quarter", "--seed", "2", "--dataset", str(gen / "dataset.ptds"),
            "--override", "train.max_epochs=2", "--out", str(train))
    assert r.returncode == 0, r.stderr
    ck = ptomo.Checkpoint.load(str(train / "checkpoint.ptck"))
    assert ck.dataset_hash == ds.hash
    out = ck.reconstruct(ds.readings(ds.split("test")))
    assert out.shape == (3, 50, 30)
    assert np.isfinite(out).all()

    for name in ("again1", "again2"):
        r = run(cli, "train", "--scale", "quarter", "--seed", "7", "--threads", "1",
                "--dataset", str(gen / "dataset.ptds"), "--override", "train.max_epochs=2", "--out", str(tmp_path / name))
        assert r.returncode == 0, r.stderr
    assert (tmp_path / "again1" / "history.csv").read_bytes() == (tmp_path / "again2" / "history.csv").read_bytes()

    ev = tmp_path / "eval"
    r = run(cli, "eval", "--dataset", str(gen / "dataset.ptds"), "--checkpoint", str(train / "checkpoint.ptck"),
            "--override", "eval.self_check=true", "--out", str(ev))
    assert r.returncode == 0, r.stderr
    rows = (ev / "metrics.csv").read_text().splitlines()
    assert rows[0] == "dataset,id,ssim,psnr_db,nrmse"
    assert all(float(line.split(",")[2]) == 1.0 for line in rows[1:])
    summary = (ev / "metrics_summary.csv").read_text().splitlines()
    assert summary[0] == "metric,mean,best,worst"
    assert [line.split(",")[0] for line in summary[1:]] == ["ssim", "psnr_db", "nrmse"]

    other = tmp_path / "gen_other"
    assert run(cli, "gen", "--scale", "quarter", "--seed", "3", "--override", "gen.count=30",
               "--out", str(other)).returncode == 0
    r = run(cli, "eval", "--dataset", str(other / "dataset.ptds"), "--checkpoint", str(train / "checkpoint.ptck"),
            "--out", str(tmp_path / "mismatch"))
    assert r.returncode == 1

    bench = tmp_path / "bench"
    r = run(cli, "bench", "--checkpoint", str(train / "checkpoint.ptck"), "--override", "bench.batch=1",
            "--override", "bench.duration=0.5", "--out", str(bench))
    assert r.returncode == 0, r.stderr
    header, row = (bench / "bench.csv").read_text().splitlines()[:2]
    fields = dict(zip(header.split(","), map(float, row.split(","))))
    assert fields["reconstructions_per_s"] > 0
    assert fields["p50_ms"] <= fields["p99_ms"]
    assert abs(fields["ratio_to_5khz"] - fields["reconstructions_per_s"] / 5000.0) <= 1e-5 * fields["ratio_to_5khz"]

    bad = tmp_path / "diverge"
    r = run(cli, "train", "--scale", "quarter", "--seed", "2", "--dataset", str(gen / "dataset.ptds"),
            "--override", "train.lr=1e30", "--override", "train.max_epochs=2", "--out", str(bad))
    assert r.returncode == 2
    assert read_manifest(bad / "manifest.txt")["run.status"] == "failed"
