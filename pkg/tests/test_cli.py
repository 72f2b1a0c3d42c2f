"""End-to-end tests of the command line driver.

Each test invokes cli.main(argv) in process and inspects the exit code,
captured stdout, or emitted CSV/manifest files.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from magicecho import cli, output, thermo


def run_main(argv):
    return cli.main(argv)


def stdout_meta(text):
    meta = {}
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            meta[key] = value
    return meta


# ---------------------------------------------------------------- lattice-info

def test_lattice_info_stdout(capsys):
    assert run_main(["lattice-info", "--radius", "1"]) == 0
    out = capsys.readouterr().out
    meta = stdout_meta(out)
    assert meta["n_sites"] == "7"
    assert float(meta["m2_cluster"]) > 0
    # ratio is evaluated on bulk shells even when the cluster is tiny:
    # the [111] first shell alone sits at the magic angle and contributes 0
    assert float(meta["m2_ratio_100_111"]) == pytest.approx(5.84405659856, rel=1e-9)
    assert "site,x,y,z" in out


def test_lattice_info_file_and_manifest(tmp_path):
    out = str(tmp_path / "lat.csv")
    assert run_main(["lattice-info", "--radius", "1", "--out", out]) == 0
    meta, cols = output.read_csv(out)
    assert cols["site"].size == 7
    manifest = json.load(open(out + ".manifest.json"))
    assert manifest["rows"] == 7
    assert manifest["command"] == "lattice-info"
    assert manifest["config"]["radius"] == 1.0
    assert "wall_time_s" in manifest


# ------------------------------------------------------------------------ run

def test_run_ideal_sweep_is_constant(tmp_path):
    out = str(tmp_path / "sweep.csv")
    code = run_main(["run", "builtin:seq1", "--ideal", "--orientation", "100",
                     "--radius", "1", "--max-sites", "4",
                     "--t1-grid", "2:40:2hc", "--out", out])
    assert code == 0
    meta, cols = output.read_csv(out)
    assert list(cols) == ["t1_us", "amplitude"]
    assert cols["t1_us"].size == 20
    amp = cols["amplitude"]
    assert np.ptp(amp) <= 1e-9 * amp[0]
    assert meta["ideal_reversal"] == "True"
    assert meta["label"] == "seq1-sweep"


def test_run_sweep_snaps_to_even_halfcycles(tmp_path):
    out = str(tmp_path / "snap.csv")
    assert run_main(["run", "builtin:seq1", "--orientation", "100",
                     "--radius", "1", "--max-sites", "2",
                     "--omega1-gauss", "25.3",
                     "--t1-grid", "2:6:2hc", "--out", out]) == 0
    _, cols = output.read_csv(out)
    gamma = 2.5166e4
    omega1 = gamma * 25.3
    halfcycles = cols["t1_us"] * 1e-6 * omega1 / np.pi
    np.testing.assert_allclose(halfcycles, [2.0, 4.0, 6.0], rtol=1e-9)


def test_run_single_builtin_echo(tmp_path):
    out = str(tmp_path / "rpw.csv")
    code = run_main(["run", "builtin:rpw", "--orientation", "100",
                     "--radius", "1", "--max-sites", "4",
                     "--omega1-gauss", "50", "--halfcycles", "40",
                     "--window-us", "20", "--step-us", "1", "--out", out])
    assert code == 0
    meta, cols = output.read_csv(out)
    assert list(cols) == ["time_us", "value"]
    # strong burst: echo peak sits at the first acquired sample, near full height
    assert cols["value"][0] > 0.97
    assert np.argmax(cols["value"]) == 0
    assert meta["sequence"] == "builtin:rpw"
    assert meta["macroscopic"] == "False"


def test_run_pp_file(tmp_path, capsys):
    pp = tmp_path / "fid.pp"
    pp.write_text("init ix\nacquire Ix for 20us step 4us\n")
    assert run_main(["run", str(pp), "--orientation", "100",
                     "--radius", "1", "--max-sites", "4"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert lines[0] == "time_us,value"
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == pytest.approx(1.0, abs=1e-12)


def test_run_flag_and_positional_agree(tmp_path):
    a = str(tmp_path / "a.csv")
    b = str(tmp_path / "b.csv")
    common = ["--orientation", "100", "--radius", "1", "--max-sites", "4",
              "--ideal", "--window-us", "10", "--step-us", "2"]
    assert run_main(["run", "builtin:seq2"] + common + ["--out", a]) == 0
    assert run_main(["run", "--sequence", "builtin:seq2"] + common
                    + ["--out", b]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()


def test_run_determinism(tmp_path):
    a = str(tmp_path / "a.csv")
    b = str(tmp_path / "b.csv")
    argv = ["run", "builtin:seq2", "--orientation", "110", "--radius", "1",
            "--max-sites", "4", "--omega1-gauss", "30"]
    assert run_main(argv + ["--out", a]) == 0
    assert run_main(argv + ["--out", b]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    ma = json.load(open(a + ".manifest.json"))
    mb = json.load(open(b + ".manifest.json"))
    ma.pop("wall_time_s"), mb.pop("wall_time_s")
    ma.pop("output"), mb.pop("output")
    assert ma == mb


def test_run_error_codes(tmp_path):
    base = ["--orientation", "100", "--radius", "1", "--max-sites", "4"]
    assert run_main(["run"] + base) == 2                       # no sequence
    assert run_main(["run", "builtin:nope"] + base) == 2       # unknown builtin
    assert run_main(["run", "builtin:rpw", "--t1-grid", "2:8:2hc"] + base) == 2
    assert run_main(["run", "builtin:seq1", "--t1-grid", "bogus"] + base) == 2
    assert run_main(["run", str(tmp_path / "missing.pp")] + base) == 2
    bad = tmp_path / "bad.pp"
    bad.write_text("frobnicate 3us\n")
    assert run_main(["run", str(bad)] + base) == 2             # parse error


# --------------------------------------------------------------------- thermo

def test_thermo_gaussian_defaults(tmp_path):
    out = str(tmp_path / "beta.csv")
    assert run_main(["thermo", "--orientation", "100",
                     "--t-end-us", "200", "--out", out]) == 0
    meta, cols = output.read_csv(out)
    assert list(cols) == ["t1_us", "beta"]
    assert cols["t1_us"][0] == 0.0
    assert cols["beta"][0] == 1.0
    assert meta["orientation"] == "100"
    # onset delay: nothing decays during the first 80 us
    early = cols["beta"][cols["t1_us"] < 80.0]
    assert early.min() >= 0.99


def test_thermo_divergence_columns(tmp_path):
    out = str(tmp_path / "div.csv")
    assert run_main(["thermo", "--orientation", "110", "--t-end-us", "400",
                     "--divergence", "--out", out]) == 0
    meta, cols = output.read_csv(out)
    assert list(cols) == ["t1_us", "model_amplitude", "ideal_amplitude"]
    assert np.all(cols["ideal_amplitude"] == 1.0)
    assert cols["model_amplitude"][0] == 1.0
    # by 350 us the memory model has collapsed while the ideal stays flat
    late = cols["model_amplitude"][cols["t1_us"] >= 350.0]
    assert np.all(np.abs(late) < 0.5)
    assert meta["label"] == "divergence"
    assert meta["macroscopic"] == "True"


def test_thermo_microscopic_kernel(tmp_path):
    out = str(tmp_path / "micro.csv")
    assert run_main(["thermo", "--kernel-from-cluster", "100:1:4",
                     "--t-end-us", "100", "--step-us", "1",
                     "--out", out]) == 0
    meta, cols = output.read_csv(out)
    assert meta["kernel"] == "tabulated"
    assert meta["ordering_flipped"] == "True"
    assert cols["beta"][0] == 1.0


def test_thermo_error_codes(tmp_path):
    assert run_main(["thermo", "--orientation", "nope",
                     "--t-end-us", "100"]) == 2
    assert run_main(["thermo", "--kernel-from-cluster", "oops",
                     "--t-end-us", "100"]) == 2


def test_thermo_nonconvergence_exits_1(monkeypatch):
    monkeypatch.setattr(thermo, "MAX_REFINEMENTS", 0)
    code = run_main(["thermo", "--orientation", "100", "--t-end-us", "200",
                     "--step-us", "40"])
    assert code == 1


# -------------------------------------------------------------- dump-operator

def test_dump_operator_h2_pair(capsys):
    assert run_main(["dump-operator", "--name", "h2", "--orientation", "100",
                     "--radius", "1", "--max-sites", "2"]) == 0
    out = capsys.readouterr().out
    meta = stdout_meta(out)
    assert meta["name"] == "h2"
    assert meta["dim"] == "4"
    rows = [l for l in out.splitlines() if l and not l.startswith(("#", "row"))]
    # pair h2 is a single matrix element coupling |dd> to |uu>
    assert len(rows) == 1
    r, c, re, im = rows[0].split(",")
    assert (int(float(r)), int(float(c))) == (0, 3)
    assert float(im) == 0.0
    assert float(re) != 0.0


def test_dump_operator_h1_needs_omega1(tmp_path):
    out = str(tmp_path / "h1.csv")
    assert run_main(["dump-operator", "--name", "h1", "--orientation", "100",
                     "--radius", "1", "--max-sites", "4",
                     "--omega1-gauss", "50", "--out", out]) == 0
    meta, _ = output.read_csv(out)
    assert "omega1" in meta
    with pytest.raises(SystemExit) as err:  # argparse rejects unknown names
        run_main(["dump-operator", "--name", "bogus", "--orientation", "100",
                  "--radius", "1"])
    assert err.value.code == 2


# --------------------------------------------------------------------- verify

def test_verify_all_checks_pass(capsys):
    assert run_main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "all 10 checks passed" in out
    assert "FAIL" not in out
    assert out.count("ok ") == 10


# --------------------------------------------------------------------- config

def test_config_file_overrides_default(tmp_path, capsys):
    cfg = tmp_path / "lat.cfg"
    cfg.write_text("# comment line\nradius=1\nmax-sites=4\n")
    assert run_main(["lattice-info", "--config", str(cfg)]) == 0
    meta = stdout_meta(capsys.readouterr().out)
    assert meta["n_sites"] == "4"


def test_flag_beats_config_file(tmp_path, capsys):
    cfg = tmp_path / "lat.cfg"
    cfg.write_text("max-sites=4\n")
    assert run_main(["lattice-info", "--config", str(cfg),
                     "--max-sites", "2"]) == 0
    meta = stdout_meta(capsys.readouterr().out)
    assert meta["n_sites"] == "2"


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("frob=1\n")
    with pytest.raises(SystemExit) as err:
        run_main(["lattice-info", "--config", str(cfg)])
    assert err.value.code == 2


def test_version_flag():
    with pytest.raises(SystemExit) as err:
        run_main(["--version"])
    assert err.value.code == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "magicecho.cli",
                           "lattice-info", "--radius", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "n_sites=7" in proc.stdout
