"""Oracle-equivalence check suites behind the ``verify`` CLI command.

Each check compares a fast code path against an independent reference and
records the observed error next to its tolerance.  Suites are sized to keep
a full run in the tens of seconds; the pytest acceptance module runs the
heavier statistical versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grad as grad_mod
from . import operator as operator_mod
from . import oracle as oracle_mod
from . import spectral as spectral_mod
from .grid import make_frequency_grid

SELECTORS = ("all", "spectral", "operator", "grad", "ssm1d")


@dataclass(frozen=True)
class CheckResult:
    name: str
    tolerance: float
    observed: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: observed {self.observed:.3e} (tol {self.tolerance:.1e})"


def _result(name: str, tolerance: float, observed: float) -> CheckResult:
    observed = float(observed)
    return CheckResult(name, tolerance, observed, bool(observed <= tolerance))


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(b.ravel())
    if denom == 0.0:
        return float(np.linalg.norm(a.ravel() - b.ravel()))
    return float(np.linalg.norm((a - b).ravel()) / denom)


def check_spectral() -> list[CheckResult]:
    rng = np.random.default_rng(11)
    u = rng.standard_normal((1, 2, 8, 8))
    results = [
        _result(
            "transform matches direct summation (8x8)",
            1e-10,
            _rel_l2(spectral_mod.dft2(u), oracle_mod.dft2_direct(u)),
        )
    ]
    v = rng.standard_normal((2, 3, 16, 16))
    results.append(
        _result(
            "round trip idft2(dft2(u)) == u (16x16)",
            1e-12,
            _rel_l2(spectral_mod.idft2(spectral_mod.dft2(v)).real, v),
        )
    )
    spectrum = spectral_mod.dft2(v)
    energy_space = np.sum(v**2)
    energy_freq = np.sum(np.abs(spectrum) ** 2) / (16 * 16)
    results.append(
        _result(
            "Parseval equality",
            1e-10,
            abs(energy_space - energy_freq) / energy_space,
        )
    )
    a, b = rng.standard_normal(2)
    w = rng.standard_normal(u.shape)
    lhs = spectral_mod.dft2(a * u + b * w)
    rhs = a * spectral_mod.dft2(u) + b * spectral_mod.dft2(w)
    results.append(_result("linearity of the transform", 1e-12, _rel_l2(lhs, rhs)))
    return results


def check_operator() -> list[CheckResult]:
    rng = np.random.default_rng(21)
    results = []

    for mode in ("stable", "raw"):
        g, z = operator_mod.random_params(3, 3, rng, mode=mode, scale=0.4)
        u = rng.standard_normal((1, 3, 8, 8))
        grid = make_frequency_grid(8, 8)
        symbols = operator_mod.composed_symbols(z, g, grid)
        kernels = np.empty((3, 3, 8, 8))
        for o in range(3):
            for i in range(3):
                entry = symbols[:, :, o, i][None, None]
                kernels[o, i] = spectral_mod.idft2(entry)[0, 0].real
        projected = np.einsum("oc,bchw->bohw", g.r, u)
        reference = oracle_mod.spatial_circular_conv(projected, kernels)
        observed = _rel_l2(operator_mod.pde_ssm_forward(u, g, z), reference)
        results.append(
            _result(f"forward equals circular convolution ({mode} mode)", 1e-9, observed)
        )

    g, z = operator_mod.random_params(2, 2, rng, mode="raw", scale=0.4)
    identity_g = operator_mod.EmbedParams(
        r=np.eye(2), g0=np.eye(2), gx=np.zeros((2, 2)), gy=np.zeros((2, 2))
    )
    tiny = operator_mod.PdeParams(
        fx=z.fx, fy=z.fy, bx=z.bx, by=z.by, rm=z.rm, tau=1e-12, mode="raw"
    )
    u = rng.standard_normal((1, 2, 12, 12))
    results.append(
        _result(
            "identity limit at tau -> 0",
            1e-9,
            _rel_l2(operator_mod.pde_ssm_forward(u, identity_g, tiny), u),
        )
    )

    shift = 3
    zero = np.zeros((1, 1))
    shift_z = operator_mod.PdeParams(
        fx=zero, fy=zero, bx=np.array([[-float(shift)]]), by=zero, rm=zero,
        tau=1.0, mode="raw",
    )
    ident1 = operator_mod.EmbedParams(
        r=np.eye(1), g0=np.eye(1), gx=zero, gy=zero
    )
    u = rng.standard_normal((1, 1, 16, 16))
    shifted = operator_mod.pde_ssm_forward(u, ident1, shift_z)
    results.append(
        _result(
            "integer convection equals circular shift",
            1e-9,
            float(np.max(np.abs(shifted - np.roll(u, shift, axis=2)))),
        )
    )

    _, z2 = operator_mod.random_params(2, 2, rng, mode="stable", scale=0.5)
    spec = spectral_mod.dft2(rng.standard_normal((1, 2, 8, 8)))
    grid = make_frequency_grid(8, 8)
    greens = operator_mod.green_symbols(z2, grid, pair=False)
    applied = np.einsum("hwoc,bchw->bohw", greens, spec)
    integrated = oracle_mod.rk4_evolve_spectrum(spec, z2, steps=2000)
    results.append(
        _result(
            "exponential matches RK4 integration (2000 steps)",
            1e-6,
            _rel_l2(applied, integrated),
        )
    )

    worst = 0.0
    for _ in range(5):
        _, zs = operator_mod.random_params(4, 4, rng, mode="stable", scale=1.0)
        norms = np.linalg.norm(
            operator_mod.green_symbols(zs, make_frequency_grid(16, 16), pair=False),
            ord=2, axis=(-2, -1),
        )
        worst = max(worst, float(norms.max()) - 1.0)
    results.append(_result("stable-mode symbols are non-expansive", 1e-8, worst))

    g1, z1 = operator_mod.random_params(1, 1, rng, mode="raw", scale=0.5)
    grid = make_frequency_grid(8, 8)
    kx, ky = grid.mesh()
    closed = np.exp(
        z1.tau * (
            -(kx * z1.fx[0, 0] + ky * z1.fy[0, 0]) ** 2
            + z1.rm[0, 0]
            + 1j * (kx * z1.bx[0, 0] + ky * z1.by[0, 0])
        )
    )
    coupled = operator_mod.green_symbols(z1, grid, pair=False)[:, :, 0, 0]
    results.append(
        _result("scalar closed form equals coupled path", 1e-12, _rel_l2(coupled, closed))
    )
    return results


def check_grad() -> list[CheckResult]:
    rng = np.random.default_rng(31)
    g, z = operator_mod.init_fit_params(2, 2, rng, mode="raw")
    u = rng.standard_normal((1, 2, 6, 6))
    upstream = rng.standard_normal((1, 2, 6, 6))
    input_grad, grads = grad_mod.pde_ssm_backward(u, g, z, upstream)
    forward_pairing = float(np.sum(upstream * operator_mod.pde_ssm_forward(u, g, z)))
    adjoint_pairing = float(np.sum(input_grad * u))
    results = [
        _result(
            "adjoint identity <w, f(u)> == <f*(w), u>",
            1e-10,
            abs(forward_pairing - adjoint_pairing) / abs(forward_pairing),
        )
    ]

    theta = {
        "r": g.r, "g0": g.g0, "gx": g.gx, "gy": g.gy,
        "fx": z.fx, "fy": z.fy, "bx": z.bx, "by": z.by, "rm": z.rm,
        "tau": z.tau,
    }

    def loss(p):
        gg = operator_mod.EmbedParams(r=p["r"], g0=p["g0"], gx=p["gx"], gy=p["gy"])
        zz = operator_mod.PdeParams(
            fx=p["fx"], fy=p["fy"], bx=p["bx"], by=p["by"], rm=p["rm"],
            tau=p["tau"], mode="raw",
        )
        return float(np.sum(upstream * operator_mod.pde_ssm_forward(u, gg, zz)))

    fd = oracle_mod.finite_diff_grad(loss, theta, eps=1e-5)
    analytic = {
        "r": grads.r, "g0": grads.g0, "gx": grads.gx, "gy": grads.gy,
        "fx": grads.fx, "fy": grads.fy, "bx": grads.bx, "by": grads.by,
        "rm": grads.rm, "tau": grads.d_tau,
    }
    worst = 0.0
    for name, approx in fd.items():
        num = np.linalg.norm(np.atleast_1d(analytic[name] - approx))
        den = max(np.linalg.norm(np.atleast_1d(approx)), 1e-12)
        worst = max(worst, float(num / den))
    results.append(
        _result("parameter gradients match finite differences", 1e-5, worst)
    )
    return results


def check_ssm1d() -> list[CheckResult]:
    rng = np.random.default_rng(41)
    n, m = 3, 2
    a = rng.standard_normal((n, n))
    a = a - (np.max(np.linalg.eigvals(a).real) + 0.5) * np.eye(n)
    b = rng.standard_normal((n, m))
    p = operator_mod.Ssm1dParams(a=a, b=b)

    horizon = 2.0
    errors = {}
    for dt in (1e-2, 5e-3):
        steps = int(round(horizon / dt))
        u = rng.standard_normal((steps, m))
        approx = operator_mod.ssm1d_apply(p, u, dt)
        reference = oracle_mod.rk4_ssm1d(p, u, dt)
        errors[dt] = _rel_l2(approx, reference)
    results = [
        _result("discrete convolution matches RK4 at dt=1e-2", 2e-2, errors[1e-2]),
        _result(
            "error contracts at first order when dt halves",
            0.65,
            errors[5e-3] / errors[1e-2],
        ),
    ]
    return results


_SUITES = {
    "spectral": check_spectral,
    "operator": check_operator,
    "grad": check_grad,
    "ssm1d": check_ssm1d,
}


def run_verify(selector: str = "all") -> list[CheckResult]:
    """Run one named suite or all of them; returns the individual results."""
    if selector not in SELECTORS:
        raise ValueError(f"selector must be one of {SELECTORS}, got {selector!r}")
    names = _SUITES.keys() if selector == "all" else [selector]
    results = []
    for name in names:
        results.extend(_SUITES[name]())
    return results
