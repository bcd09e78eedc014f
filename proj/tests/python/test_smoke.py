import numpy as np
import pytest

import vpanel


def test_plan_matches_rule():
    # 5180 frames at 2 fps, C=32, gamma=1fps: 64 < 5180 so panels are on.
    p = vpanel.plan(5180, 2.0, 640, 480, context_window=32)
    assert p["panel_active"] is True
    assert p["frames_to_sample"] == 128
    assert (p["grid_rows"], p["grid_cols"]) == (2, 2)
    assert p["frame_indices"] == vpanel.uniform_indices(5180, 128)

    short = vpanel.plan(40, 2.0, 640, 480, context_window=32)
    assert short["panel_active"] is False
    assert short["frames_to_sample"] == 32


def test_uniform_indices_center_of_bin():
    assert vpanel.uniform_indices(10, 5) == [1, 3, 5, 7, 9]
    with pytest.raises(vpanel.VpanelError) as err:
        vpanel.uniform_indices(3, 4)
    assert err.value.kind == "InsufficientFrames"


def test_compose_and_slice_round_trip():
    rng = np.random.default_rng(0)
    tiles = [rng.integers(0, 256, size=(6, 5, 3), dtype=np.uint8) for _ in range(6)]
    panel = vpanel.compose_panel(tiles, 2, 3)
    assert panel.shape == (12, 15, 3)
    np.testing.assert_array_equal(panel[6:12, 0:5], tiles[3])
    for got, want in zip(vpanel.slice_panel(panel, 2, 3), tiles):
        np.testing.assert_array_equal(got, want)


def test_resize_checkerboard_to_one_pixel():
    board = np.zeros((2, 2, 3), dtype=np.uint8)
    board[0, 0] = board[1, 1] = 255
    assert vpanel.resize_bilinear(board, 1, 1).tolist() == [[[128, 128, 128]]]


def test_parse_choice_and_prompt():
    opts = ["red", "green", "blue", "yellow"]
    assert vpanel.parse_choice("B", "ABCD", opts) == "B"
    assert vpanel.parse_choice("The answer is (c).", "ABCD", opts) == "C"
    assert vpanel.parse_choice("it is green", "ABCD", opts) == "B"
    assert vpanel.parse_choice("no idea", "ABCD", opts) is None

    prompt = vpanel.render_prompt("Which colour?", opts)
    assert prompt.endswith("Answer with the option's letter from the given choices directly.\n")
    p3 = vpanel.render_prompt("Which colour?", opts, "p3", (2, 3))
    assert "2 rows and 3 columns" in p3


def test_detection_expectation_and_report_text():
    base = vpanel.plan(640, 2.0, 64, 48, context_window=8, mode="baseline")
    panels = vpanel.plan(640, 2.0, 64, 48, context_window=8)
    assert vpanel.detection_expectation(base["frame_indices"], 640, 1) == 8 / 640
    assert vpanel.detection_expectation(panels["frame_indices"], 640, 1) == 32 / 640
    assert vpanel.format_points(7.6) == "+7.6"
    assert vpanel.format_relative(19.437) == "+19.4%"


def test_panelize_directory(tmp_path):
    from PIL import Image

    frames = tmp_path / "video"
    frames.mkdir()
    for i in range(12):
        Image.new("RGB", (8, 6), (i * 10, 0, 0)).save(frames / f"{i:04d}.png")
    manifest = vpanel.panelize(frames, tmp_path / "out", context_window=2, gamma="0f")
    assert len(manifest["panels"]) == 2
    assert all((tmp_path / "out" / p["output_path"]).exists() for p in manifest["panels"])
