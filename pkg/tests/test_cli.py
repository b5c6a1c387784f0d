import json

import numpy as np
import pytest

from uwenhance.backlight import BackgroundLight
from uwenhance.cli import build_parser, run
from uwenhance.enhance import EnhanceParams, color_correct, enhance_pipeline
from uwenhance.evalkit import synthetic_hazy_image
from uwenhance.imgcore import ImageBuf, load_image, save_image, to_bytes
from uwenhance.metrics import rmse


@pytest.fixture
def hazy_png(tmp_path):
    rng = np.random.default_rng(12)
    hazy, _, _ = synthetic_hazy_image(rng, BackgroundLight.from_255(50, 170, 140), 64, 48,
                                      depth_range=(2.0, 12.0))
    path = tmp_path / "hazy.png"
    save_image(hazy, path)
    return path


def test_estimate_bl_dcp_constant(tmp_path, capsys):
    path = tmp_path / "c.png"
    save_image(ImageBuf.constant((0.3, 0.6, 0.8), 12, 10), path)
    assert run(["estimate-bl", str(path), "--method", "dcp"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "77 153 204"
    assert lines[2].startswith("elapsed_s ")


def test_color_correction_composes(tmp_path, hazy_png):
    plain, full = tmp_path / "plain.png", tmp_path / "full.png"
    assert run(["enhance", str(hazy_png), str(plain), "--no-color-correction"]) == 0
    assert run(["enhance", str(hazy_png), str(full)]) == 0
    img = load_image(hazy_png)
    restored = enhance_pipeline(img, params=EnhanceParams(color_correction=False)).enhanced
    assert np.array_equal(to_bytes(load_image(plain).to_array()), to_bytes(restored.to_array()))
    assert np.array_equal(to_bytes(load_image(full).to_array()),
                          to_bytes(color_correct(restored).to_array()))


def test_synth_then_restore_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    # even levels keep (clear + bl) / 2 on the 8-bit grid, so t = 0.5 is lossless
    clear = ImageBuf.from_array(2 * rng.integers(0, 128, size=(30, 40, 3)) / 255.0)
    bl_levels = (40, 180, 150)
    bl_text = ",".join(repr(v / 255) for v in bl_levels)
    src, hazy, back = tmp_path / "clear.png", tmp_path / "hazy.png", tmp_path / "back.png"
    save_image(clear, src)
    assert run(["synth", str(src), str(hazy), "--bl", bl_text, "--t", "0.5"]) == 0
    assert run(["enhance", str(hazy), str(back), "--bl", bl_text, "--t", "0.5",
                "--no-color-correction"]) == 0
    assert rmse(load_image(back), clear) < 1e-3


def test_synth_with_depth_image(tmp_path):
    src, depth, out = tmp_path / "clear.png", tmp_path / "depth.png", tmp_path / "out.png"
    save_image(ImageBuf.constant((0.8, 0.8, 0.8), 8, 6), src)
    save_image(ImageBuf.constant((0.0, 0.0, 0.0), 8, 6), depth)
    assert run(["synth", str(src), str(out), "--bl", "0.1,0.5,0.6", "--t", str(depth)]) == 0
    # zero depth means no attenuation
    assert load_image(out).equals(load_image(src))


def test_enhance_intermediates_and_report(tmp_path, hazy_png):
    out, inter, report = tmp_path / "o.png", tmp_path / "inter", tmp_path / "r.json"
    code = run(["enhance", str(hazy_png), str(out), "--save-intermediates", str(inter),
                "--report", str(report), "--resize", "60x40", "--lambda", "0.5"])
    assert code == 0
    assert {p.name for p in inter.iterdir()} == {"depth.png", "t_r.png", "t_g.png", "t_b.png",
                                                "rsm.png", "restored.png"}
    doc = json.loads(report.read_text())
    assert doc["meta"]["tm_params"]["lambda_arsm"] == 0.5
    assert load_image(out).shape == (40, 60)


def test_evaluate_and_bench(tmp_path, hazy_png, capsys):
    report = tmp_path / "eval.json"
    assert run(["evaluate", str(hazy_png.parent), "--report", str(report)]) == 0
    assert json.loads(report.read_text())["aggregate"]["n_images"] == 1
    assert run(["bench", "--sizes", "60x40", "--methods", "statistical,dcp", "--reps", "3"]) == 0
    assert "statistical" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["enhance", "a.png"],
    ["enhance", "a.png", "b.png", "--bl", "2,0,0"],
    ["estimate-bl", "a.png", "--method", "nope"],
    ["bench", "--reps", "1"],
    ["bench", "--sizes", "10by10"],
])
def test_usage_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 1


def test_invalid_parameter_is_usage_error(tmp_path, hazy_png):
    assert run(["enhance", str(hazy_png), str(tmp_path / "o.png"), "--lambda", "1.5"]) == 1
    assert run(["enhance", str(hazy_png), str(tmp_path / "o.png"), "--t", "0"]) == 1


def test_stage_failures_exit_2(tmp_path, hazy_png):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"nope")
    assert run(["estimate-bl", str(bad)]) == 2
    assert run(["enhance", str(hazy_png), str(tmp_path / "o.png"), "--bl", "0,0.5,0.5"]) == 2
    assert run(["enhance", str(hazy_png), str(tmp_path / "o.bmp")]) == 2


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["enhance", "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    assert "default: 0.7" in text and "default: 0.25" in text
