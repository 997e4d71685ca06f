import subprocess
import sys

import numpy as np
import pytest

from beamdiar.cli import main
from beamdiar.diarization import uniform_segments
from beamdiar.formats import read_matrix, read_segments, write_matrix
from beamdiar.fsb import FilterBank
from beamdiar.osd import AfsbWeights
from beamdiar.scoring import compute_der, parse_rttm
from beamdiar.simulator import synthesize_xvectors

SCENE = """duration 24
source 40 noise 0.5 13.5 1.0 alice
source 220 noise 10.5 23.5 1.0 bob
"""


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "scene.txt").write_text(SCENE)
    assert main(["simulate", "--scene", str(d / "scene.txt"), "--seed", "3", "--out-prefix", str(d / "s")]) == 0
    assert main(["design-filters", "--directions", "36", "--order", "64", "--out", str(d / "bank.fsb")]) == 0
    return d


def test_simulate_outputs(simulated):
    d = simulated
    (ann,) = parse_rttm(d / "s.rttm")
    assert ann.recording_id == "scene" and ann.speakers == ["alice", "bob"]
    assert (d / "s.ovl").read_text() == "10.500 13.500\n"
    assert [(a, b) for _, a, b in read_segments(d / "s.segments")["scene"]] == [(0.5, 23.5)]
    assert FilterBank.load(d / "bank.fsb").shape == (36, 8, 64)


def test_simulate_diarize_score(simulated, capsys):
    d = simulated
    seg = ["--segments", str(d / "s.segments"), "--time-scale", "1.5:0.75"]
    assert main(["extract-svector", "--wav", str(d / "s.wav"), "--bank", str(d / "bank.fsb"), *seg,
                 "--segments-out", str(d / "used.seg"), "--out", str(d / "s.svec")]) == 0
    S = read_matrix(d / "s.svec")
    speech = [(a, b) for _, a, b in read_segments(d / "s.segments")["scene"]]
    tiles = uniform_segments(speech, 1.5, 0.75)
    assert S.shape == (len(tiles), 36)
    assert [(a, b) for _, a, b in read_segments(d / "used.seg")["scene"]] == tiles.intervals

    # stand-in x-vectors drawn around one centroid per talker
    (ref,) = parse_rttm(d / "s.rttm")
    write_matrix(d / "s.xvec", synthesize_xvectors(ref, tiles.intervals, 32, 0.3, 0))
    assert main(["diarize", "--xvec", str(d / "s.xvec"), "--svec", str(d / "s.svec"), *seg,
                 "--overlaps", str(d / "s.ovl"), "--out", str(d / "hyp.rttm")]) == 0
    (hyp,) = parse_rttm(d / "hyp.rttm")
    assert compute_der(ref, hyp).der <= 0.02

    capsys.readouterr()
    assert main(["score", "--ref", str(d / "s.rttm"), "--hyp", str(d / "hyp.rttm")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["recording", "DER%", "MS%", "FA%", "SC%"] and out[-1].startswith("TOTAL")

    assert main(["fuse", str(d / "hyp.rttm"), str(d / "hyp.rttm"), str(d / "s.rttm"),
                 "--weights", "0.5,0.3,0.2", "--out", str(d / "fused.rttm")]) == 0
    assert compute_der(ref, parse_rttm(d / "fused.rttm")[0]).der <= 0.02


def test_osd_commands(simulated, capsys):
    d = simulated
    assert main(["init-afsb", "--out", str(d / "w.afsb"), "--seed", "2"]) == 0
    assert AfsbWeights.load(d / "w.afsb").config.n_channels == 8
    (d / "short.ovl").write_text("10.5 12.0\n")
    capsys.readouterr()
    assert main(["osd-score", "--ref", str(d / "s.ovl"), "--hyp", str(d / "short.ovl"), "--duration", "24"]) == 0
    out = capsys.readouterr().out
    assert "DetER        50.00%" in out and "Precision   100.00%" in out


def test_internal_osd_runs(tmp_path):
    (tmp_path / "scene.txt").write_text("duration 2\nsource 0 noise 0 2\n")
    main(["simulate", "--scene", str(tmp_path / "scene.txt"), "--out-prefix", str(tmp_path / "s")])
    assert main(["osd", "--wav", str(tmp_path / "s.wav"), "--out", str(tmp_path / "s.hyp")]) == 0
    assert (tmp_path / "s.hyp").read_text() == ""


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["score", "--ref", "a.rttm"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["diarize", "--segments", "s", "--time-scale", "one", "--out", "x"])
    assert exc.value.code == 1


def test_data_errors_exit_2(tmp_path):
    (tmp_path / "bad.rttm").write_text("SPEAKER R 1 0 -1 <NA> <NA> a <NA> <NA>\n")
    assert main(["score", "--ref", str(tmp_path / "bad.rttm"), "--hyp", str(tmp_path / "bad.rttm")]) == 2
    assert main(["score", "--ref", str(tmp_path / "none.rttm"), "--hyp", str(tmp_path / "none.rttm")]) == 2
    (tmp_path / "run.ini").write_text("[data]\nrecordings = r\nwav = {rec}.wav\nsegments = seg\n")
    assert main(["pipeline", "--config", str(tmp_path / "run.ini")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    args = ["design-filters", "--directions", "1", "--n-bins", "1", "--order", "8", "--reg", "0",
            "--out", str(tmp_path / "b.fsb")]
    assert main(args) == 3


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "beamdiar.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "design-filters" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "beamdiar.cli", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 1
