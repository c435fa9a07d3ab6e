"""Shared builders for the test suite.

Kept import-light: everything here is plain helpers, no autouse
fixtures, so individual test modules stay runnable on their own.
"""

from __future__ import annotations

import io
import os
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np

from dissipate import GridFunction
from dissipate.cli import main as cli_main

REPO_ROOT = Path(__file__).resolve().parents[1]
PRESET_DIR = REPO_ROOT / "src" / "dissipate" / "presets"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def preset(name):
    """Path of a bundled operator document, usable as a CLI argument."""
    return str(PRESET_DIR / f"{name}.json")


def run_cli(*argv, env=None):
    """Run the CLI in process; returns (exit code, stdout, stderr).

    ``env`` entries are set for the duration of the call and restored
    afterwards, which is how the worker-count knob is exercised.
    """
    saved = {}
    if env:
        for key, val in env.items():
            saved[key] = os.environ.get(key)
            os.environ[key] = val
    out = io.StringIO()
    err = io.StringIO()
    try:
        with redirect_stdout(out), redirect_stderr(err):
            code = cli_main([str(a) for a in argv])
    finally:
        for key, val in saved.items():
            if val is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = val
    return code, out.getvalue(), err.getvalue()


def boundary_flat_battery(grid, count, seed):
    """Seeded smooth probes with a double zero on the boundary.

    The interior-node quadrature never sees boundary cells, so probes
    whose gradient also vanishes there keep both functional routes
    second order in the spacing.  Each probe is a sin^2 envelope times
    a strictly positive trigonometric amplitude times a unimodular
    phase factor.
    """
    rng = np.random.default_rng(seed)
    meshes = grid.meshes()
    hatted = [(m - lo) / (hi - lo) for m, lo, hi in zip(meshes, grid.lo, grid.hi)]
    probes = []
    for _ in range(count):
        vals = np.ones(grid.shape)
        for t in hatted:
            vals = vals * np.sin(np.pi * t) ** 2
        amp = np.full(grid.shape, 1.6)
        phase = np.zeros(grid.shape)
        for t in hatted:
            amp = amp + rng.uniform(-0.35, 0.35) * np.sin(int(rng.integers(1, 4)) * np.pi * t)
            amp = amp + rng.uniform(-0.35, 0.35) * np.cos(int(rng.integers(1, 4)) * np.pi * t)
            phase = phase + rng.uniform(-1.0, 1.0) * np.sin(int(rng.integers(1, 4)) * np.pi * t)
        probes.append(GridFunction(grid, vals * amp * np.exp(1j * phase)))
    return probes


def seeded_matrices(count=200, seed=1234, dims=(1, 2, 3, 5), allow_zero_im=True):
    """Random complex matrices whose Re symmetric part is PSD.

    A few have a rank deficient Re part, and (unless disabled) a few
    have a vanishing Im symmetric part, to reach the edge branches.
    """
    rng = np.random.default_rng(seed)
    mats = []
    for i in range(count):
        n = dims[i % len(dims)]
        G = rng.normal(size=(n, n))
        if i % 13 == 5 and n > 1:
            G[:, 0] = 0.0
        S_r = G @ G.T
        H = rng.normal(size=(n, n))
        S_i = 0.5 * (H + H.T) * rng.uniform(0.1, 2.0)
        K_r = rng.normal(size=(n, n))
        K_r = 0.5 * (K_r - K_r.T)
        K_i = rng.normal(size=(n, n))
        K_i = 0.5 * (K_i - K_i.T)
        if allow_zero_im and i % 17 == 0:
            S_i = np.zeros((n, n))
        elif not np.any(S_i):
            S_i[0, 0] = 1.0
        mats.append((S_r + K_r) + 1j * (S_i + K_i))
    return mats


# A one dimensional operator with every coefficient populated and
# nonconstant, used by the two functional-route batteries.
FULL_COEFF_1D = {
    "n": 1,
    "domain": [[0.0, 1.0]],
    "grid": [256],
    "A": [[{"re": "2 + sin(pi*x1)", "im": "0.5*cos(pi*x1)"}]],
    "b": [{"re": "0.3*x1", "im": "0.2"}],
    "c": [{"re": "0.1*cos(pi*x1)", "im": "-0.4*x1"}],
    "a": {"re": "-0.5", "im": "0.3*x1"},
}


# Deterministic CLI invocations backed by committed golden files.  The
# last case also exercises --format in the pre-subcommand position.
GOLDEN_CASES = [
    ("examples_id1.json", ("examples", "--id", "1", "--format", "json")),
    ("examples_id2.json", ("examples", "--id", "2", "--format", "json")),
    ("examples_id3.json", ("examples", "--id", "3", "--format", "json")),
    ("interval_one_plus_i.json", ("interval", preset("one_plus_i_laplacian"), "--format", "json")),
    ("constant_example3_p4.json", ("constant", preset("example3"), "--p", "4", "--format", "json")),
    ("falsify_example2.txt", ("--format", "text", "falsify", preset("example2"), "--p", "2", "--budget", "5000", "--seed", "7")),
]
