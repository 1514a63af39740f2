import subprocess
import sys
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from resnet_adaptive.bench import emit_plots, read_summary, run_benchmark, run_label
from resnet_adaptive.cli import main
from resnet_adaptive.config import (
    ConfigError,
    ControllerConfig,
    default_spec,
    parse_config,
    parse_text,
    print_config,
    to_text,
)
from resnet_adaptive.network import param_count
from resnet_adaptive.simulate import csv_metrics, percent_improvement, read_csv


def short(spec, duration=2.0):
    return replace(spec, duration=duration)


def test_template_round_trip():
    spec = parse_text(print_config())
    assert spec == default_spec()
    assert parse_text(to_text(spec)) == spec


def test_bundled_desk_config_matches_template():
    text = resources.files("resnet_adaptive").joinpath("configs/desk_benchmark.cfg").read_text()
    assert parse_text(text) == default_spec()


def test_reference_controller_config_values():
    path = resources.files("resnet_adaptive").joinpath("configs/reference_controllers.cfg")
    spec = parse_config(path)
    by_name = {c.name: c for c in spec.controllers}
    for c in by_name.values():
        assert (c.k1, c.k2, c.k3) == (0.77, 0.66, 1e-6)
    snn, dnn, res = by_name["SNN"], by_name["DNN"], by_name["ResNet"]
    assert (snn.neurons, snn.layers, snn.gamma, snn.theta_bar) == (8, 1, 0.05, 4.0)
    assert (dnn.neurons, dnn.layers, dnn.gamma, dnn.theta_bar) == (2, 32, 0.1, 8.0)
    assert (res.neurons, res.layers, res.blocks, res.gamma, res.theta_bar) == (2, 2, 4, 0.025, 1.0)
    assert res.outer_activation == "tanh"
    assert res.inner_activation == res.shortcut_activation == "swish"
    # parameter totals on the planar stand-in plant
    counts = {name: param_count(by_name[name].network(2)) for name in ("SNN", "DNN", "ResNet")}
    assert counts == {"SNN": 90, "DNN": 210, "ResNet": 102}


def test_resnet_without_blocks_rejected():
    text = print_config().replace("blocks = 4", "blocks = 0")
    with pytest.raises(ConfigError, match="ResNet requires blocks >= 1"):
        parse_text(text)


def test_unknown_key_reports_line():
    text = print_config().replace("[benchmark]\n", "[benchmark]\nbasline = PD\n")
    lineno = text.splitlines().index("basline = PD") + 1
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert f"line {lineno}" in str(info.value)
    assert "basline" in str(info.value)


@pytest.mark.parametrize(
    "old,new",
    [
        ("dt = 0.02", "dt = -1"),
        ("plant = drag", "plant = quadrotor"),
        ("baseline = PD", "baseline = LQR"),
        ("inner_activation = swish", "inner_activation = relu"),
        ("[controller.SNN]\nkind = SNN", "[controller.SNN]\nkind = SNN\nblocks = 2"),
        ("[controller.PD]\nkind = PD", "[controller.PD]\nkind = PD\nneurons = 3"),
        ("[simulation]", "[DEFAULT]\nx = 1\n\n[simulation]"),
        ("[stability]", "[stabilty]"),
    ],
)
def test_invalid_configs_rejected(old, new):
    text = print_config()
    assert old in text
    with pytest.raises(ConfigError):
        parse_text(text.replace(old, new, 1))


def test_all_problems_reported_together():
    text = print_config().replace("dt = 0.02", "dt = 0").replace("plant = drag", "plant = boat")
    with pytest.raises(ConfigError) as info:
        parse_text(text)
    assert len(info.value.problems) >= 2


def test_benchmark_is_bitwise_deterministic(tmp_path):
    spec = short(default_spec())
    a = run_benchmark(spec, tmp_path / "a", plots=True)
    b = run_benchmark(spec, tmp_path / "b", plots=True)
    names_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names_a == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert a.summary == b.summary


def test_parallel_workers_match_serial(tmp_path):
    spec = short(default_spec(), 1.0)
    run_benchmark(spec, tmp_path / "s", plots=False)
    run_benchmark(spec, tmp_path / "p", plots=False, workers=2)
    for name in ("summary.txt", "ResNet_seed0.csv", "DNN_seed0.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_summary_is_recomputable_from_csvs(tmp_path):
    spec = short(replace(default_spec(), seeds=(0, 1)))
    result = run_benchmark(spec, tmp_path, plots=False)
    summary = read_summary(result.summary_path)
    assert summary["status"] == "ok"
    for seed in (0, 1):
        base = csv_metrics(tmp_path / f"{run_label('PD', seed)}.csv")
        for name in ("PD", "SNN", "DNN", "ResNet"):
            label = run_label(name, seed)
            entry = summary["runs"][label]
            ours = csv_metrics(tmp_path / f"{label}.csv")
            for k in ("rms_error", "mean_error", "final_window_rms", "max_theta_norm"):
                assert entry[k] == ours[k]
            for k in ("rms_error", "mean_error", "final_window_rms"):
                assert entry[f"percent_improvement_{k}"] == percent_improvement(base[k], ours[k])
    assert summary["runs"]["PD_seed0"]["percent_improvement_rms_error"] == 0.0
    assert "rms_error = sqrt(mean ||e||^2)" in summary["error_statistics"]
    assert set(summary["stability"]) == {"SNN", "DNN", "ResNet"}


def test_identical_controller_entries_give_identical_metrics(tmp_path):
    res = default_spec().controller("ResNet")
    spec = replace(
        default_spec(), controllers=(ControllerConfig("PD", "PD"), res, replace(res, name="ResNetCopy")), duration=2.0
    )
    summary = run_benchmark(spec, tmp_path, plots=False).summary
    a, b = summary["runs"]["ResNet_seed0"], summary["runs"]["ResNetCopy_seed0"]
    assert a == b


def test_failed_run_is_recorded_and_others_proceed(tmp_path):
    # a zero-radius search space cannot be built, so only that run fails
    spec = default_spec()
    res = replace(spec.controller("ResNet"), theta_bar=0.0)
    spec = replace(spec, controllers=(spec.controller("PD"), res), duration=1.0)
    result = run_benchmark(spec, tmp_path, plots=False)
    assert not result.ok
    assert result.summary["runs"]["ResNet_seed0"]["status"] == "failed"
    assert result.summary["runs"]["PD_seed0"]["status"] == "ok"
    assert (tmp_path / "PD_seed0.csv").exists()


def test_emit_plots_empty(tmp_path, caplog):
    assert emit_plots({}, tmp_path) == []
    assert list(tmp_path.iterdir()) == []
    assert "no trajectories" in caplog.text


def test_plot_axes_cover_reference(tmp_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = replace(default_spec(), controllers=(ControllerConfig("PD", "PD"),), duration=60.0)
    result = run_benchmark(spec, tmp_path, plots=True)
    names = {p.name for p in result.plot_paths}
    assert names == {"tracking_error.svg", "trajectories.svg", "trajectory_PD_seed0.svg"}
    cols = read_csv(tmp_path / "PD_seed0.csv")
    assert cols["qd1"].max() - cols["qd1"].min() == pytest.approx(15.0, abs=1e-3)
    assert cols["qd2"].max() - cols["qd2"].min() == pytest.approx(5.0, abs=1e-3)
    from resnet_adaptive.bench import _trajectory_limits
    from resnet_adaptive.simulate import TrajectoryLog

    (xlo, xhi), (ylo, yhi) = _trajectory_limits(
        [TrajectoryLog(cols["t"], np.c_[cols["q1"], cols["q2"]], None, np.c_[cols["qd1"], cols["qd2"]], None,
                       None, None, None, None)]
    )
    assert xlo <= -7.5 and xhi >= 7.5 and ylo <= -2.5 and yhi >= 2.5
    plt.close("all")


def test_cli_print_config(capsys):
    assert main(["--print-config"]) == 0
    assert parse_text(capsys.readouterr().out) == default_spec()


def test_cli_run_and_bench(tmp_path, capsys):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text(print_config().replace("duration = 360.0", "duration = 1.0"))
    assert main(["run", str(cfg), "--controller", "ResNet", "--out", str(tmp_path / "r"), "--no-plots"]) == 0
    assert (tmp_path / "r" / "ResNet_seed0.csv").exists()
    assert not (tmp_path / "r" / "PD_seed0.csv").exists()
    assert main(["bench", str(cfg), "--out", str(tmp_path / "b"), "--seed", "7", "--no-plots"]) == 0
    out = capsys.readouterr().out
    assert "ResNet_seed7" in out and "improvement vs PD" in out
    assert (tmp_path / "b" / "summary.txt").exists()


def test_cli_errors(tmp_path, capsys):
    assert main(["bench", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text(print_config().replace("blocks = 4", "blocks = 0"))
    assert main(["bench", str(bad)]) == 2
    assert "ResNet requires blocks" in capsys.readouterr().err
    good = tmp_path / "good.cfg"
    good.write_text(print_config())
    assert main(["run", str(good), "--controller", "LQR"]) == 2


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "resnet_adaptive", "--print-config"], capture_output=True, text=True, check=True
    ).stdout
    assert parse_text(out) == default_spec()
