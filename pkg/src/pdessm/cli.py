"""Command-line entry point.

Subcommands: ``verify`` (oracle equivalence suites), ``kernelviz`` (kernel
gallery images), ``bench`` (scaling harness CSV), ``forward`` (stack smoke
run), ``fit`` (operator fitting demo).  Exit codes: 0 success, 1
verification failure, 2 configuration error, 3 I/O error.

Configuration files use the dotted ``key=value`` format documented in
``docs/config_reference.md``; every emitted artifact carries the seed in a
header line or comment.  ``PDESSM_THREADS`` overrides ``--threads`` for the
benchmark.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import verify as verify_mod
from .block import make_stack, stack_forward
from .config import ConfigView, load_config
from .exceptions import ConfigError, NumericError
from .grad import fit_operator
from .grid import make_frequency_grid
from .operator import EmbedParams, PdeParams, init_fit_params, kernel_image, pde_ssm_forward
from .spectral import dft2, idft2

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

MAX_VIZ_EXTENT = 512


# ---------------------------------------------------------------------------
# image and CSV emission


def write_pgm(path: str, image: np.ndarray, seed: int) -> None:
    """Binary PGM (magic P5, maxval 255), min-max normalized."""
    arr = np.asarray(image, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        scaled = np.round(255.0 * (arr - lo) / (hi - lo)).astype(np.uint8)
    else:
        scaled = np.zeros_like(arr, dtype=np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n# seed={seed}\n{w} {h}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())


def write_signed_ppm(path: str, image: np.ndarray, seed: int) -> None:
    """Binary PPM for signed kernels: red = negative, blue = positive."""
    arr = np.asarray(image, dtype=np.float64)
    scale = float(np.max(np.abs(arr)))
    h, w = arr.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    if scale > 0.0:
        mag = np.round(255.0 * np.abs(arr) / scale).astype(np.uint8)
        rgb[..., 0] = np.where(arr < 0, mag, 0)
        rgb[..., 2] = np.where(arr > 0, mag, 0)
    with open(path, "wb") as fh:
        fh.write(f"P6\n# seed={seed}\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def _write_csv(path: str, header: str, rows, seed: int) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# seed={seed}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _fmt(x: float) -> str:
    return format(x, ".9g")


# ---------------------------------------------------------------------------
# config -> parameters


def _pde_from_config(view: ConfigView) -> PdeParams:
    c = view.get_int("pde.c_hid", default=1, minimum=1)
    zeros = np.zeros((c, c))
    return PdeParams(
        fx=view.get_matrix("pde.fx", c, c, default=zeros),
        fy=view.get_matrix("pde.fy", c, c, default=zeros),
        bx=view.get_matrix("pde.bx", c, c, default=zeros),
        by=view.get_matrix("pde.by", c, c, default=zeros),
        rm=view.get_matrix("pde.rm", c, c, default=zeros),
        tau=view.get_float("pde.tau", default=1.0),
        diffusion_on=view.get_bool("pde.diffusion_on", True),
        convection_on=view.get_bool("pde.convection_on", True),
        reaction_on=view.get_bool("pde.reaction_on", True),
        mode=view.get_str("pde.mode", default="stable", choices=("stable", "raw")),
    )


def _embed_from_config(view: ConfigView, c: int) -> EmbedParams | None:
    if not view.get_bool("embed.enabled", False):
        for key in ("embed.g0", "embed.gx", "embed.gy"):
            if view.has(key):
                raise ConfigError(f"{key} given but embed.enabled is false")
        return None
    eye = np.eye(c)
    zeros = np.zeros((c, c))
    return EmbedParams(
        r=eye,
        g0=view.get_matrix("embed.g0", c, c, default=eye),
        gx=view.get_matrix("embed.gx", c, c, default=zeros),
        gy=view.get_matrix("embed.gy", c, c, default=zeros),
    )


def _parse_pairs(raw: str) -> list[tuple[int, int]]:
    pairs = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        out_s, _, in_s = token.partition(":")
        try:
            pairs.append((int(out_s), int(in_s)))
        except ValueError:
            raise ConfigError(f"viz.pairs entries must look like 'out:in', got {token!r}") from None
    if not pairs:
        raise ConfigError("viz.pairs selects no channel pairs")
    return pairs


# ---------------------------------------------------------------------------
# subcommands


def cmd_kernelviz(config_path: str, out_dir: str) -> int:
    view = ConfigView(load_config(config_path))
    seed = view.get_int("seed", default=0)
    h = view.get_int("grid.h", minimum=1)
    w = view.get_int("grid.w", minimum=1)
    if h > MAX_VIZ_EXTENT or w > MAX_VIZ_EXTENT:
        raise ConfigError(f"grid extents are capped at {MAX_VIZ_EXTENT}")
    z = _pde_from_config(view)
    g = _embed_from_config(view, z.c_hid)
    pairs = _parse_pairs(view.get_str("viz.pairs", default="0:0"))
    signed = view.get_bool("viz.signed", False)
    view.finish()
    for out_ch, in_ch in pairs:
        if not (0 <= out_ch < z.c_hid and 0 <= in_ch < z.c_hid):
            raise ConfigError(
                f"viz.pairs entry {out_ch}:{in_ch} out of range for pde.c_hid={z.c_hid}"
            )

    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for out_ch, in_ch in pairs:
        kernel = kernel_image(z, g, h, w, out_ch, in_ch)
        base = os.path.join(out_dir, f"kernel_o{out_ch}_i{in_ch}")
        try:
            write_pgm(base + ".pgm", kernel, seed)
            if signed:
                write_signed_ppm(base + ".ppm", kernel, seed)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"# seed={seed} wrote {base}.pgm")
    return EXIT_OK


def cmd_verify(selector: str) -> int:
    print(f"# seed=0 verify selector={selector}")
    results = verify_mod.run_verify(selector)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_VERIFY_FAILED


def cmd_bench(args) -> int:
    threads_raw = os.environ.get("PDESSM_THREADS", args.threads)
    threads: int | str
    if str(threads_raw) == "1":
        threads = 1
    elif str(threads_raw) == "auto":
        threads = "auto"
    else:
        raise ConfigError(f"threads must be 1 or auto, got {threads_raw!r}")
    try:
        sizes = [int(s) for s in str(args.sizes).split(",") if s.strip()]
        patches = [int(p) for p in str(args.patches).split(",") if p.strip()]
    except ValueError:
        raise ConfigError("--sizes and --patches must be comma-separated integers") from None
    if not sizes or not patches:
        raise ConfigError("need at least one size and one patch")
    if any(s < 1 for s in sizes) or any(p < 1 for p in patches):
        raise ConfigError("sizes and patches must be >= 1")
    records = bench_mod.run_bench(
        sizes, patches, args.width, repeats=args.repeats, threads=threads,
        seed=args.seed,
    )
    rows = [
        [
            r.mixer, str(r.image_size), str(r.patch_size), str(r.tokens),
            str(r.width), str(r.repeats), _fmt(r.median_seconds),
            _fmt(r.p10_seconds), _fmt(r.p90_seconds),
        ]
        for r in records
    ]
    header = "mixer,image_size,patch_size,tokens,width,repeats,median_s,p10_s,p90_s"
    try:
        _write_csv(args.out, header, rows, args.seed)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"# seed={args.seed} wrote {len(rows)} records to {args.out}")
    return EXIT_OK


def cmd_forward(config_path: str) -> int:
    view = ConfigView(load_config(config_path))
    seed = view.get_int("seed", default=0)
    size = view.get_int("image.size", minimum=1)
    channels = view.get_int("image.channels", default=3, minimum=1)
    depth = view.get_int("stack.depth", minimum=0)
    width = view.get_int("stack.width", minimum=1)
    patch = view.get_int("stack.patch", minimum=1)
    mlp_ratio = view.get_int("stack.mlp_ratio", default=4, minimum=1)
    activation = view.get_str("stack.activation", default="gelu", choices=("gelu", "relu"))
    view.finish()
    if size % patch:
        raise ConfigError(f"image.size {size} is not divisible by stack.patch {patch}")

    rng = np.random.default_rng(seed)
    cfg, blocks = make_stack(
        depth, channels, width, patch, rng, mlp_ratio=mlp_ratio, activation=activation
    )
    img = rng.standard_normal((1, channels, size, size))
    out, norms = stack_forward(img, cfg, blocks, return_layer_norms=True)
    print(f"# seed={seed} stack depth={depth} width={width} patch={patch} image={size}")
    print(
        f"output mean={out.mean():.6e} std={out.std():.6e} "
        f"min={out.min():.6e} max={out.max():.6e}"
    )
    print(f"layer 0 (patch embedding) L2={norms[0]:.6e}")
    for i, norm in enumerate(norms[1:], start=1):
        print(f"layer {i} L2={norm:.6e}")
    if not np.all(np.isfinite(out)):
        raise NumericError("stack output is non-finite")
    return EXIT_OK


def cmd_fit(config_path: str, steps: int | None, lr: float | None, out: str | None) -> int:
    view = ConfigView(load_config(config_path))
    seed = view.get_int("seed", default=0)
    h = view.get_int("fit.h", default=16, minimum=1)
    w = view.get_int("fit.w", default=16, minimum=1)
    c = view.get_int("fit.c", default=1, minimum=1)
    n_pairs = view.get_int("fit.pairs", default=1, minimum=1)
    target_kind = view.get_str("fit.target", default="hidden", choices=("self", "shift", "hidden"))
    shift_cells = view.get_int("fit.shift_cells", default=2)
    cfg_steps = view.get_int("fit.steps", default=2000, minimum=1)
    cfg_lr = view.get_float("fit.lr", default=0.2)
    hidden_scale = view.get_float("fit.hidden_scale", default=0.6)
    view.finish()

    steps = steps if steps is not None else cfg_steps
    lr = lr if lr is not None else cfg_lr
    rng = np.random.default_rng(seed)
    xs = [smooth_feature_map(rng, c, h, w) for _ in range(n_pairs)]
    g0, z0 = init_fit_params(c, c, rng)
    if target_kind == "self":
        pairs = [(x, pde_ssm_forward(x, g0, z0)) for x in xs]
    elif target_kind == "shift":
        pairs = [(x, np.roll(x, shift_cells, axis=2)) for x in xs]
    else:
        g_hidden, z_hidden = init_fit_params(c, c, rng, coeff_scale=hidden_scale, noise_scale=0.2)
        pairs = [(x, pde_ssm_forward(x, g_hidden, z_hidden)) for x in xs]

    _, _, trace = fit_operator(pairs, g0, z0, lr=lr, steps=steps)
    rel = trace[-1] / trace[0] if trace[0] > 0 else 0.0
    print(f"# seed={seed} fit target={target_kind} steps={steps} lr={lr}")
    print(f"loss start={trace[0]:.6e} end={trace[-1]:.6e} relative={rel:.6e}")
    if out is not None:
        rows = [[str(i), _fmt(float(val))] for i, val in enumerate(trace)]
        try:
            _write_csv(out, "step,loss", rows, seed)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"# seed={seed} wrote loss trace to {out}")
    return EXIT_OK


def smooth_feature_map(rng: np.random.Generator, c: int, h: int, w: int) -> np.ndarray:
    """Random feature map with a low-frequency-weighted spectrum.

    Smooth inputs keep the phase-alignment landscape of convection fitting
    wide enough for plain gradient descent.
    """
    white = rng.standard_normal((1, c, h, w))
    grid = make_frequency_grid(h, w)
    kx, ky = grid.mesh()
    weight = 1.0 / (1.0 + 8.0 * (kx**2 + ky**2))
    smooth = idft2(dft2(white) * weight).real
    return smooth / np.linalg.norm(smooth)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdessm")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run oracle equivalence suites")
    p_verify.add_argument("selector", nargs="?", default="all",
                          choices=verify_mod.SELECTORS)

    p_viz = sub.add_parser("kernelviz", help="render kernel images")
    p_viz.add_argument("config")
    p_viz.add_argument("out_dir")

    p_bench = sub.add_parser("bench", help="run the scaling benchmark")
    p_bench.add_argument("--sizes", default="32,64,128,256")
    p_bench.add_argument("--patches", default="2")
    p_bench.add_argument("--width", type=int, default=192)
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--threads", default="1", choices=("1", "auto"))
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True)

    p_fwd = sub.add_parser("forward", help="run a stack smoke test")
    p_fwd.add_argument("config")

    p_fit = sub.add_parser("fit", help="run the operator fitting demo")
    p_fit.add_argument("config")
    p_fit.add_argument("--steps", type=int, default=None)
    p_fit.add_argument("--lr", type=float, default=None)
    p_fit.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.selector)
        if args.command == "kernelviz":
            return cmd_kernelviz(args.config, args.out_dir)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "forward":
            return cmd_forward(args.config)
        if args.command == "fit":
            return cmd_fit(args.config, args.steps, args.lr, args.out)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # invalid argument values surfaced by the library
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
