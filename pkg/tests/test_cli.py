import json

import numpy as np
import pytest

from iot_eclipse.cli import main
from iot_eclipse.pcap import build_pcap
from iot_eclipse.trace import ClassLabel, parse_csv_trace

MAC = "aa:bb:cc:dd:ee:01"
OTHER = "aa:bb:cc:dd:ee:02"


def eth(dst, n):
    return bytes.fromhex(dst.replace(":", "")) + b"\x00" * (n - 6)


def write_config(path, **kw):
    doc = {"seed": 7, "window": {"size": 40},
           "forest": {"n_trees": 5, "k_folds": 3}, **kw}
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--benchmark", "detection", "--packets", "1500",
                 "--seed", "3", "--out", str(out)]) == 0
    return out


class TestIngest:
    def test_pcap(self, tmp_path, capsys):
        frames = [(0.5, eth(MAC, 200)), (0.75, eth(OTHER, 90)), (1.0, eth(MAC, 1500))]
        src = tmp_path / "cap.pcap"
        src.write_bytes(build_pcap(frames, linktype=1))
        dst = tmp_path / "out.csv"
        code = main(["ingest", "--pcap", str(src), "--mac", MAC, "--label", "Echo/News",
                     "--out", str(dst)])
        assert code == 0
        tr = parse_csv_trace(dst)
        assert tr.timestamps.tolist() == [0.0, 0.5] and tr.sizes.tolist() == [200, 1500]
        assert "2 kept" in capsys.readouterr().err

    def test_csv_with_map(self, tmp_path):
        src = tmp_path / "raw.csv"
        src.write_text("t,proto,len\n10.0,6,300\n10.25,17,400\n")
        dst = tmp_path / "out.csv"
        assert main(["ingest", "--csv", str(src), "--map", "time=col0,size=col2",
                     "--out", str(dst)]) == 0
        tr = parse_csv_trace(dst)
        assert tr.timestamps.tolist() == [0.0, 0.25] and tr.sizes.tolist() == [300, 400]

    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "nope.pcap"
        assert main(["ingest", "--pcap", str(missing), "--mac", MAC,
                     "--out", str(tmp_path / "x.csv")]) == 2
        assert str(missing) in capsys.readouterr().err

    def test_malformed_csv(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("timestamp,size\n0.0,10\n0.5,abc\n")
        assert main(["ingest", "--csv", str(src), "--out", str(tmp_path / "x.csv")]) == 1
        assert "line 3" in capsys.readouterr().err

    def test_bad_map(self, tmp_path):
        src = tmp_path / "raw.csv"
        src.write_text("a,b\n0,1\n")
        assert main(["ingest", "--csv", str(src), "--map", "speed=col1",
                     "--out", str(tmp_path / "x.csv")]) == 2


def test_synth_manifest(synth_dir):
    manifest = json.loads((synth_dir / "traces.json").read_text())
    assert manifest["seed"] == 3 and len(manifest["traces"]) == 5
    assert manifest["noise"]["label"] == "Noise/None"
    tr = parse_csv_trace(synth_dir / manifest["traces"][0]["path"])
    assert len(tr) == 1500


def test_config_requires_seed(tmp_path, synth_dir, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"manifest": str(synth_dir / "traces.json")}))
    assert main(["features", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


def test_features(tmp_path, synth_dir):
    cfg = write_config(tmp_path / "c.json", manifest=str(synth_dir / "traces.json"))
    assert main(["features", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "features.csv").read_text().splitlines()
    assert lines[0] == "# iot-eclipse 0.1.0" and lines[1].startswith("# config-sha256 ")
    header = next(l for l in lines if not l.startswith("#"))
    assert header.split(",")[:3] == ["label", "window_index", "size_mean"]


def test_identify_is_deterministic(tmp_path, synth_dir, capsys):
    cfg = write_config(tmp_path / "c.json", manifest=str(synth_dir / "traces.json"),
                       sweep={"window_sizes": [20, 40, 2000]})
    outs = []
    for name in ("a", "b"):
        assert main(["identify", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        outs.append({f: (tmp_path / name / f).read_bytes()
                     for f in ("confusion.csv", "summary.txt", "window_sweep.csv")})
    assert outs[0] == outs[1]
    sweep = outs[0]["window_sweep.csv"].decode().splitlines()
    assert sweep[-1].startswith("2000,,0,")      # too large: skipped with a warning
    assert "accuracy" in capsys.readouterr().out


def test_identify_seed_override_changes_header(tmp_path, synth_dir):
    cfg = write_config(tmp_path / "c.json", manifest=str(synth_dir / "traces.json"))
    assert main(["identify", "--config", str(cfg), "--seed", "11",
                 "--out", str(tmp_path / "o")]) == 0
    assert "# seed 11" in (tmp_path / "o" / "summary.txt").read_text()


def test_raw_baseline(tmp_path, synth_dir, capsys):
    cfg = write_config(tmp_path / "c.json", manifest=str(synth_dir / "traces.json"))
    assert main(["identify", "--config", str(cfg), "--raw-baseline", "size", "--raw-cap", "60",
                 "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "raw_baseline_confusion.csv").exists()
    assert "caveat" in capsys.readouterr().out


def test_detect(tmp_path, synth_dir):
    cfg = write_config(tmp_path / "c.json", manifest=str(synth_dir / "traces.json"))
    assert main(["detect", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = [l for l in (tmp_path / "o" / "detection.csv").read_text().splitlines()
            if not l.startswith("#")]
    assert rows[0] == "Device,Service,TPR,FPR,Accuracy" and len(rows) == 6
    assert len(list((tmp_path / "o" / "detectors").glob("*.json"))) == 5


def test_detect_short_noise_fails(tmp_path, synth_dir, capsys):
    manifest = json.loads((synth_dir / "traces.json").read_text())
    noise = parse_csv_trace(synth_dir / manifest["noise"]["path"])
    short = tmp_path / "noise.csv"
    short.write_text("timestamp,size\n" + "".join(
        f"{t:.6f},{s}\n" for t, s in zip(noise.timestamps[:500], noise.sizes[:500])))
    cfg = write_config(tmp_path / "c.json",
                       traces=[{"path": str(synth_dir / manifest["traces"][0]["path"]),
                                "label": manifest["traces"][0]["label"]}],
                       noise={"path": str(short)})
    assert main(["detect", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "short by 1000" in capsys.readouterr().err


def test_eclipse_and_reingest(tmp_path, synth_dir):
    cfg = write_config(tmp_path / "c.json", manifest=str(synth_dir / "traces.json"))
    assert main(["eclipse", "--config", str(cfg), "--delay", "0", "--delay", "0.001",
                 "--out", str(tmp_path / "o")]) == 0
    curve = [l for l in (tmp_path / "o" / "eclipse_curve.csv").read_text().splitlines()
             if not l.startswith("#")]
    assert curve[0] == "delay_s,acc_clean_model,acc_retrained" and len(curve) == 3
    shaped = sorted((tmp_path / "o" / "reshaped").glob("*.csv"))
    assert len(shaped) == 5
    dst = tmp_path / "again.csv"
    assert main(["ingest", "--csv", str(shaped[0]), "--out", str(dst)]) == 0
    tr = parse_csv_trace(dst)
    assert len(tr) == 1500 and len(set(tr.sizes.tolist())) == 1
    assert np.all(np.diff(tr.timestamps) >= 0)


def test_missing_trace_in_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", traces=[{"path": "gone.csv", "label": "Echo/Music"}])
    assert main(["identify", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "gone.csv" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and "0.1.0" in capsys.readouterr().out
