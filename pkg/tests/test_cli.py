import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import openrabi
import openrabi.lindblad as lb
from openrabi.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main, read_output

GOLDEN = json.loads((Path(__file__).parent / "golden" / "headers.json").read_text())

SMALL = {
    "spectrum": ["--g-steps", "5", "--g-stop", "0.4", "--cutoff", "20", "--levels", "3"],
    "dynamics": ["--g-steps", "2", "--g-stop", "0.3", "--cutoff", "5", "--t-max", "20", "--t-steps", "5"],
    "steady": ["--g-steps", "3", "--g-stop", "0.2", "--cutoff", "5"],
    "modemap": ["--g-steps", "5", "--g-stop", "0.4", "--cutoff", "6", "--levels", "3"],
    "jc": ["--g-steps", "21", "--g-stop", "4", "--cutoff", "30", "--levels", "2"],
    "fullcmp": ["--g-steps", "2", "--g-stop", "0.5", "--cutoff", "3"],
}


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def table(path):
    cfg, cols, rows = read_output(path.read_text())
    return cfg, cols, np.array(rows, dtype=float)


@pytest.mark.parametrize("cmd", list(SMALL))
def test_headers_are_golden(tmp_path, cmd):
    code, out = run(tmp_path, cmd, *SMALL[cmd])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == f"# openrabi {openrabi.__version__}"
    assert lines[1].startswith("# config: ")
    header = next(line for line in lines if not line.startswith("#"))
    assert header == GOLDEN[cmd]


def test_closed_spectrum_header(tmp_path):
    code, out = run(tmp_path, "spectrum", "--kappa", "0", *SMALL["spectrum"])
    assert code == EXIT_OK
    _, cols, rows = table(out)
    assert ",".join(cols) == GOLDEN["spectrum_closed"]
    assert np.all(rows[:, cols.index("im_omega")] == 0)


@pytest.mark.parametrize("cmd", list(SMALL))
def test_replay_is_bit_for_bit(tmp_path, cmd):
    _, first = run(tmp_path, cmd, *SMALL[cmd], name="a.csv")
    second = tmp_path / "b.csv"
    assert main(["replay", str(first), "--out", str(second)]) == EXIT_OK
    assert first.read_text() == second.read_text()


def test_replay_json(tmp_path):
    _, first = run(tmp_path, "steady", *SMALL["steady"], "--format", "json", name="a.json")
    doc = json.loads(first.read_text())
    assert doc["config"]["command"] == "steady" and doc["openrabi"] == openrabi.__version__
    second = tmp_path / "b.json"
    assert main(["replay", str(first), "--out", str(second)]) == EXIT_OK
    assert first.read_text() == second.read_text()


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    monkeypatch.setenv("OPENRABI_THREADS", "1")
    _, a = run(tmp_path, "steady", *SMALL["steady"], name="a.csv")
    monkeypatch.setenv("OPENRABI_THREADS", "4")
    _, b = run(tmp_path, "steady", *SMALL["steady"], name="b.csv")
    assert a.read_text() == b.read_text()


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OPENRABI_THREADS", "many")
    code, _ = run(tmp_path, "steady", *SMALL["steady"])
    assert code == EXIT_CONFIG


def test_spectrum_rows_and_reference(tmp_path):
    code, out = run(tmp_path, "spectrum", *SMALL["spectrum"])
    _, cols, rows = table(out)
    assert len(rows) == 5 * 3 * 2
    ground = rows[(rows[:, 1] == 0) & (rows[:, 2] == 1)]
    assert np.all(ground[:, cols.index("re_omega_rel")] == 0)


def test_spectrum_parity_filter(tmp_path):
    code, out = run(tmp_path, "spectrum", *SMALL["spectrum"], "--parity", "-")
    _, _, rows = table(out)
    assert len(rows) == 5 * 3 and np.all(rows[:, 2] == -1)


def test_dynamics_initial_row(tmp_path):
    code, out = run(tmp_path, "dynamics", *SMALL["dynamics"], "--init", "3,g")
    cfg, cols, rows = table(out)
    first = rows[rows[:, cols.index("t")] == 0]
    assert np.all(first[:, cols.index("photon")] == 3.0)
    assert len(rows) == 2 * 5
    summary = json.loads(out.read_text().splitlines()[2][len("# summary: ") :])
    assert summary["invariants"]["leakage"] < 1e-12
    assert summary["cutoff_drift"] >= 0


def test_steady_g0_values(tmp_path):
    code, out = run(tmp_path, "steady", "--g-steps", "1", "--g-stop", "0", "--init", "3,g")
    _, cols, rows = table(out)
    assert rows[0, cols.index("photon")] == pytest.approx(1.0, abs=1e-6)
    assert rows[0, cols.index("null_dim")] == 2


def test_steady_finite_time_local_maximum(tmp_path):
    # t_final = 10 / kappa_c2 in units of T_c / 2
    t_final = 400 / (np.pi / 2)
    code, out = run(tmp_path, "steady", "--g-stop", "0.1", "--g-steps", "11", "--t-final", repr(t_final))
    _, cols, rows = table(out)
    total = rows[:, cols.index("photon")] + rows[:, cols.index("qubit")]
    k = int(np.argmax(total))
    assert 0 < k < 10 and 0.01 <= rows[k, 0] <= 0.05


def test_modemap_weights_sum_to_one(tmp_path):
    code, out = run(tmp_path, "modemap", "--g-steps", "5", "--g-stop", "0.4", "--cutoff", "6", "--levels", "7")
    _, cols, rows = table(out)
    for g in np.unique(rows[:, 0]):
        assert rows[rows[:, 0] == g, cols.index("weight")].sum() == pytest.approx(1.0, abs=1e-12)


def test_fullcmp_zero_mismatch_at_g0(tmp_path):
    code, out = run(tmp_path, "fullcmp", *SMALL["fullcmp"])
    _, cols, rows = table(out)
    mism = rows[:, cols.index("mismatch")]
    assert np.all(mism[rows[:, 0] == 0] == 0)
    assert np.max(mism[rows[:, 0] == 0.5]) > 1e-3
    assert len(rows) == 2 * 4 * 16


def test_jc_summary(tmp_path):
    code, out = run(tmp_path, "jc", *SMALL["jc"])
    summary = json.loads(out.read_text().splitlines()[2][len("# summary: ") :])
    assert all(summary["jc_plateau"])
    assert all(s["rabi"] > 0 for s in summary["slopes"])


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum", "--g-start", "0.5"],
        ["spectrum", "--cutoff", "1"],
        ["spectrum", "--levels", "0"],
        ["dynamics", "--init", "2,x"],
        ["dynamics", "--init", "12,g", "--cutoff", "9"],
        ["dynamics", "--t-max", "-1"],
        ["steady", "--kappa", "-0.1"],
        ["steady", "--g-stop", "-1"],
        ["jc", "--slope-window", "3"],
        ["jc", "--slope-window", "3,9"],
    ],
)
def test_config_errors_exit_2(tmp_path, argv):
    code, _ = run(tmp_path, *argv)
    assert code == EXIT_CONFIG


def test_unwritable_path_exit_2(tmp_path):
    assert main(["steady", *SMALL["steady"], "--out", str(tmp_path / "missing" / "x.csv")]) == EXIT_CONFIG


def test_replay_without_header_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("g,photon\n0,1\n")
    assert main(["replay", str(bad)]) == EXIT_CONFIG


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--format", "xml"])
    assert exc.value.code == 2


def test_invariant_failure_exit_3(tmp_path, monkeypatch):
    monkeypatch.setattr(lb, "TRACE_TOL", 1e-30)
    code, _ = run(tmp_path, "dynamics", *SMALL["dynamics"], "--no-convergence-check")
    assert code == EXIT_INVARIANT


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "openrabi", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == f"openrabi {openrabi.__version__}"
