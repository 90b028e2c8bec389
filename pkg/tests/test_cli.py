import json

import numpy as np
import pytest
from click.testing import CliRunner

from hbtcorr import io
from hbtcorr.cli import cli, main, parse_time_ns


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, tmp_path, args):
    return runner.invoke(cli, ["--out-dir", str(tmp_path), *args],
                         catch_exceptions=False)


def test_parse_time_ns():
    assert parse_time_ns("100") == 100.0
    assert parse_time_ns("10ms") == 1e7
    assert parse_time_ns("50us") == 5e4
    assert parse_time_ns("2s") == 2e9
    assert parse_time_ns("500ps") == 0.5
    assert parse_time_ns(1e7) == 1e7


def test_theory_writes_curve(runner, tmp_path):
    result = invoke(runner, tmp_path, [
        "theory", "--tau-c", "0.5", "--rate", "0.04", "--bin", "0.1",
        "--window", "100",
    ])
    assert result.exit_code == 0
    curve = io.read_curve_csv(tmp_path / "g2_curve.csv")
    assert curve.values[0] == 2.0
    assert len(curve) == 1000
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["command"] == "theory"
    assert run["parameters"]["tau_c"] == 0.5


def test_simulate_correct_fit_chain(runner, tmp_path):
    result = invoke(runner, tmp_path, [
        "simulate", "--model", "chaotic", "--tau-c", "0.5", "--rate", "0.08",
        "--duration", "0.2ms", "--seed", "11", "--save-streams",
    ])
    assert result.exit_code == 0
    assert (tmp_path / "histogram.csv").exists()
    assert (tmp_path / "histogram.json").exists()
    arm1 = io.read_photons_ttag(tmp_path / "arm1.ttag")
    arm2 = io.read_photons_ttag(tmp_path / "arm2.ttag")
    total = len(arm1) + len(arm2)
    assert total > 0

    result = invoke(runner, tmp_path, [
        "correct", "--histogram", str(tmp_path / "histogram.csv"),
        "--total-counts", str(total), "--duration", "0.2ms",
    ])
    assert result.exit_code == 0
    curve = io.read_curve_csv(tmp_path / "g2_corrected.csv")
    assert len(curve) == 1000

    result = invoke(runner, tmp_path, [
        "fit", "--curve", str(tmp_path / "g2_corrected.csv"), "--bin-centers",
    ])
    assert result.exit_code == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert set(fit) == {"b", "tau_c_ns", "residual_rms", "converged"}


def test_correct_from_streams(runner, tmp_path):
    rng = np.random.default_rng(3)
    from hbtcorr.types import PhotonStream

    dur = int(1e9)
    a = PhotonStream(np.sort(rng.integers(0, dur, 5000)), dur)
    b = PhotonStream(np.sort(rng.integers(0, dur, 5000)), dur)
    io.write_photons_ttag(tmp_path / "a.ttag", a)
    io.write_photons_text(tmp_path / "b.txt", b)
    result = invoke(runner, tmp_path, [
        "correct", "--starts", str(tmp_path / "a.ttag"),
        "--stops", str(tmp_path / "b.txt"), "--duration", "1ms",
        "--bin", "1.0", "--window", "1000",
    ])
    assert result.exit_code == 0
    curve = io.read_curve_csv(tmp_path / "g2_corrected.csv")
    # uncorrelated streams: flat curve near 1
    assert abs(np.mean(curve.values[:500]) - 1.0) < 0.1


def test_correct_rejects_conflicting_inputs(runner, tmp_path):
    (tmp_path / "h.csv").write_text("bin_index,tau_ns,count\n0,0.0,1\n1,0.1,2\n")
    (tmp_path / "a.ttag").write_bytes(b"")
    result = runner.invoke(cli, ["--out-dir", str(tmp_path), "correct",
                                 "--histogram", str(tmp_path / "h.csv"),
                                 "--starts", str(tmp_path / "a.ttag")])
    assert result.exit_code == 1
    assert "mutually exclusive" in result.output


def test_error_surface_command(runner, tmp_path):
    result = invoke(runner, tmp_path, [
        "error-surface", "--axis", "intensity", "--from", "0.03", "--to", "0.05",
        "--steps", "5", "--tau-c", "1.0", "--order", "9", "--window", "100",
    ])
    assert result.exit_code == 0
    surf = io.read_surface_csv(tmp_path / "error_surface.csv")
    assert surf.delta.shape == (5, 1000)
    # short delays are essentially exact at ninth order
    short = surf.delays <= 40.0
    assert surf.delta[:, short].max() < 1.0


def test_pipeline_command_and_replay(runner, tmp_path):
    out1 = tmp_path / "first"
    out2 = tmp_path / "second"
    result = invoke(runner, out1, [
        "pipeline", "--model", "chaotic", "--tau-c", "0.5", "--rate", "0.08",
        "--duration", "0.5ms", "--order", "9", "--seed", "7",
    ])
    assert result.exit_code == 0
    for name in ("histogram.csv", "g2_corrected.csv", "fit.json", "run.json"):
        assert (out1 / name).exists(), name

    # the provenance record alone reproduces every output bit for bit
    result = invoke(runner, out2, [
        "pipeline", "--config", str(out1 / "run.json"),
    ])
    assert result.exit_code == 0
    for name in ("histogram.csv", "g2_corrected.csv", "fit.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_flag_overrides_config(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tau_c": 0.5, "rate": 0.04, "window": 10.0}))
    result = invoke(runner, tmp_path, [
        "theory", "--config", str(cfg), "--window", "20",
    ])
    assert result.exit_code == 0
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["parameters"]["window"] == 20.0
    assert run["parameters"]["tau_c"] == 0.5


def test_unknown_config_key_fails(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tau_sea": 0.5}))
    result = runner.invoke(cli, ["--out-dir", str(tmp_path), "theory",
                                 "--config", str(cfg)])
    assert result.exit_code == 1
    assert "tau_sea" in result.output


def test_exit_codes():
    # validation error: negative rate rejected by the service
    assert main(["theory", "--rate", "-1"]) == 1
    # validation error: unknown command
    assert main(["frobnicate"]) == 1
    # runtime error: unreachable server
    assert main(["--server", "http://127.0.0.1:1", "theory", "--rate", "0.04",
                 "--tau-c", "0.5"]) == 2


def test_seed_required_for_stochastic_commands(runner, tmp_path):
    result = runner.invoke(cli, ["--out-dir", str(tmp_path), "simulate",
                                 "--tau-c", "0.5"])
    assert result.exit_code != 0
    assert "seed" in result.output.lower()
