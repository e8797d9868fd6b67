import os

import numpy as np
import pytest

import pdessm.operator
from pdessm.cli import main, write_pgm
from pdessm.config import ConfigView, parse_config_text
from pdessm.exceptions import ConfigError

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(REPO_ROOT, "configs")


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    assert data.startswith(b"P5\n")
    body = data.split(b"\n", 1)[1]
    comment, body = body.split(b"\n", 1)
    assert comment.startswith(b"# seed=")
    dims, body = body.split(b"\n", 1)
    w, h = (int(v) for v in dims.split())
    maxval, body = body.split(b"\n", 1)
    assert maxval == b"255"
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    return pixels, comment.decode()


# ---------------------------------------------------------------------------
# config parsing


def test_parse_config_basic():
    entries = parse_config_text("# comment\n\na.b=1\nc=hello\n")
    assert entries["a.b"] == ("1", 3)
    assert entries["c"] == ("hello", 4)


def test_parse_config_rejects_malformed_line():
    with pytest.raises(ConfigError) as info:
        parse_config_text("a.b=1\nnot a pair\n")
    assert info.value.lineno == 2


def test_parse_config_rejects_duplicates():
    with pytest.raises(ConfigError) as info:
        parse_config_text("x=1\nx=2\n")
    assert info.value.lineno == 2


def test_unknown_key_reports_line_number():
    view = ConfigView(parse_config_text("known=1\nmystery=2\n"))
    view.get_int("known")
    with pytest.raises(ConfigError) as info:
        view.finish()
    assert "mystery" in str(info.value)
    assert info.value.lineno == 2


def test_matrix_parsing_shorthand():
    view = ConfigView(parse_config_text("m=2.5\n"))
    np.testing.assert_array_equal(view.get_matrix("m", 2, 2), 2.5 * np.eye(2))


def test_matrix_parsing_bad_length():
    view = ConfigView(parse_config_text("m=1,2,3\n"))
    with pytest.raises(ConfigError, match="entries"):
        view.get_matrix("m", 2, 2)


# ---------------------------------------------------------------------------
# kernelviz


def test_kernelviz_delta_config(tmp_path):
    config = tmp_path / "delta.cfg"
    config.write_text(
        "seed=3\ngrid.h=16\ngrid.w=16\npde.c_hid=1\npde.tau=1e-9\n"
        "pde.fx=0.5\npde.bx=0.2\nviz.pairs=0:0\n"
    )
    out_dir = tmp_path / "out"
    assert main(["kernelviz", str(config), str(out_dir)]) == 0
    pixels, comment = read_pgm(out_dir / "kernel_o0_i0.pgm")
    assert comment == "# seed=3"
    assert pixels[8, 8] == 255
    off = pixels.copy()
    off[8, 8] = 0
    assert off.max() == 0


def test_kernelviz_shifted_builtin_config(tmp_path):
    out_dir = tmp_path / "out"
    code = main(["kernelviz", os.path.join(CONFIG_DIR, "kernel_shifted.cfg"), str(out_dir)])
    assert code == 0
    pixels, _ = read_pgm(out_dir / "kernel_o0_i0.pgm")
    peak = np.unravel_index(np.argmax(pixels), pixels.shape)
    assert peak == (32 + 5, 32 + 3)


def test_kernelviz_localized_builtin_is_radially_symmetric(tmp_path):
    out_dir = tmp_path / "out"
    code = main(["kernelviz", os.path.join(CONFIG_DIR, "kernel_localized.cfg"), str(out_dir)])
    assert code == 0
    pixels, _ = read_pgm(out_dir / "kernel_o0_i0.pgm")
    raw = np.fft.ifftshift(pixels.astype(np.int16))
    idx = np.arange(64)
    rotated = raw[idx[None, :], (-idx[:, None]) % 64]
    assert np.max(np.abs(raw - rotated)) <= 1  # quantization only


def test_kernelviz_nonsquare_grid_dimension_order(tmp_path):
    config = tmp_path / "rect.cfg"
    config.write_text("grid.h=8\ngrid.w=16\npde.tau=1e-9\npde.fx=0.3\n")
    out_dir = tmp_path / "out"
    assert main(["kernelviz", str(config), str(out_dir)]) == 0
    pixels, _ = read_pgm(out_dir / "kernel_o0_i0.pgm")
    assert pixels.shape == (8, 16)  # PGM header stores width then height
    assert pixels[4, 8] == 255


def test_kernelviz_signed_ppm(tmp_path):
    out_dir = tmp_path / "out"
    code = main(["kernelviz", os.path.join(CONFIG_DIR, "kernel_combined.cfg"), str(out_dir)])
    assert code == 0
    assert (out_dir / "kernel_o0_i0.ppm").exists()


def test_kernelviz_bad_config_exits_2(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("grid.h=16\ngrid.w=16\nmadeup.key=1\n")
    assert main(["kernelviz", str(config), str(tmp_path / "out")]) == 2


def test_kernelviz_out_of_range_pair_exits_2(tmp_path):
    config = tmp_path / "pair.cfg"
    config.write_text("grid.h=8\ngrid.w=8\npde.c_hid=1\nviz.pairs=1:0\n")
    assert main(["kernelviz", str(config), str(tmp_path / "out")]) == 2


def test_bench_invalid_width_exits_2(tmp_path):
    code = main([
        "bench", "--sizes", "8", "--patches", "4", "--width", "0",
        "--repeats", "5", "--out", str(tmp_path / "b.csv"),
    ])
    assert code == 2


def test_kernelviz_missing_config_exits_2(tmp_path):
    assert main(["kernelviz", str(tmp_path / "absent.cfg"), str(tmp_path / "o")]) == 2


def test_kernelviz_unwritable_output_exits_3(tmp_path):
    config = tmp_path / "ok.cfg"
    config.write_text("grid.h=8\ngrid.w=8\npde.tau=1.0\n")
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    assert main(["kernelviz", str(config), str(blocker / "sub")]) == 3


def test_pgm_flat_image(tmp_path):
    path = tmp_path / "flat.pgm"
    write_pgm(str(path), np.ones((4, 4)), seed=0)
    pixels, _ = read_pgm(path)
    assert pixels.max() == 0


# ---------------------------------------------------------------------------
# verify


def test_verify_spectral_passes(capsys):
    assert main(["verify", "spectral"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_verify_all_passes_within_budget(capsys):
    import time

    started = time.perf_counter()
    assert main(["verify", "all"]) == 0
    elapsed = time.perf_counter() - started
    assert elapsed <= 120.0
    out = capsys.readouterr().out
    assert "checks passed" in out and "FAIL" not in out


def test_verify_reports_injected_symbol_bug(capsys, monkeypatch):
    true_embed = pdessm.operator.embed_symbols
    monkeypatch.setattr(
        pdessm.operator, "embed_symbols", lambda g, grid: -true_embed(g, grid)
    )
    assert main(["verify", "operator"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    assert "circular convolution" in out


# ---------------------------------------------------------------------------
# bench


def test_bench_writes_csv(tmp_path):
    out = tmp_path / "bench.csv"
    code = main([
        "bench", "--sizes", "16", "--patches", "4,8", "--width", "8",
        "--repeats", "5", "--threads", "1", "--seed", "11", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# seed=11"
    assert lines[1] == "mixer,image_size,patch_size,tokens,width,repeats,median_s,p10_s,p90_s"
    rows = [line.split(",") for line in lines[2:]]
    assert [(r[0], r[1], r[2]) for r in rows] == [
        ("attention", "16", "4"), ("attention", "16", "8"),
        ("pde_ssm", "16", "4"), ("pde_ssm", "16", "8"),
    ]
    assert all(float(r[6]) > 0 for r in rows)


def test_bench_thread_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("PDESSM_THREADS", "bogus")
    code = main([
        "bench", "--sizes", "8", "--patches", "4", "--width", "4",
        "--repeats", "5", "--out", str(tmp_path / "b.csv"),
    ])
    assert code == 2


def test_bench_unwritable_out_exits_3(tmp_path):
    code = main([
        "bench", "--sizes", "8", "--patches", "4", "--width", "4",
        "--repeats", "5", "--out", str(tmp_path / "nodir" / "b.csv"),
    ])
    assert code == 3


# ---------------------------------------------------------------------------
# forward


def test_forward_smoke_config(tmp_path, capsys):
    config = tmp_path / "fwd.cfg"
    config.write_text(
        "seed=1\nimage.size=8\nimage.channels=2\nstack.depth=2\n"
        "stack.width=6\nstack.patch=2\n"
    )
    assert main(["forward", str(config)]) == 0
    out = capsys.readouterr().out
    assert "# seed=1" in out
    assert "layer 2 L2=" in out
    assert "output mean=" in out


def test_forward_shipped_smoke_config(capsys):
    # 12 blocks, width 384, patch 2, 32x32 image
    code = main(["forward", os.path.join(CONFIG_DIR, "forward_smoke.cfg")])
    assert code == 0
    out = capsys.readouterr().out
    assert "layer 12 L2=" in out
    stats = out.splitlines()[1]
    assert "nan" not in stats and "inf" not in stats


def test_forward_indivisible_patch_exits_2(tmp_path):
    config = tmp_path / "fwd.cfg"
    config.write_text("image.size=9\nstack.depth=1\nstack.width=4\nstack.patch=2\n")
    assert main(["forward", str(config)]) == 2


def test_forward_zero_depth(tmp_path, capsys):
    config = tmp_path / "fwd.cfg"
    config.write_text("image.size=8\nstack.depth=0\nstack.width=4\nstack.patch=4\n")
    assert main(["forward", str(config)]) == 0
    assert "layer 0" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# fit


def test_fit_command_writes_trace(tmp_path, capsys):
    config = tmp_path / "fit.cfg"
    config.write_text(
        "seed=0\nfit.h=8\nfit.w=8\nfit.c=1\nfit.target=shift\n"
        "fit.shift_cells=1\nfit.lr=0.2\n"
    )
    out = tmp_path / "trace.csv"
    assert main(["fit", str(config), "--steps", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# seed=0"
    assert lines[1] == "step,loss"
    losses = [float(line.split(",")[1]) for line in lines[2:]]
    assert len(losses) == 6
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert "loss start=" in capsys.readouterr().out


def test_fit_self_target(tmp_path, capsys):
    config = tmp_path / "fit.cfg"
    config.write_text("fit.h=6\nfit.w=6\nfit.target=self\n")
    assert main(["fit", str(config), "--steps", "2"]) == 0
    out = capsys.readouterr().out
    assert "end=0.0" in out or "end=0" in out
