"""Independent reference implementations built from matrix exponentials.

They share no code with :mod:`drqkd.fock_core`. Each works in a padded
single- or two-mode space and is cropped afterwards. They are slow, so use
them only for cross-checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm, logm

from .fock_core import (
    BALANCED_I,
    BALANCED_REAL,
    BeamSplitterSpec,
    FockCutoff,
    apply_beam_splitter,
    compose_modes,
    displaced_fock_amplitudes,
    displaced_product,
)


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def displacement_matrix(alpha: complex, dim: int, pad: int = 60) -> np.ndarray:
    """D(alpha) restricted to the first ``dim`` levels, computed in ``dim + pad`` levels."""
    big = dim + pad
    a = annihilation(big)
    d = expm(alpha * a.conj().T - np.conj(alpha) * a)
    return d[:dim, :dim]


def displaced_fock_oracle(n: int, alpha: complex, dim: int, pad: int = 60) -> np.ndarray:
    """Amplitudes of D(alpha)|n> in the number basis."""
    big = dim + pad
    return expm(
        alpha * annihilation(big).conj().T - np.conj(alpha) * annihilation(big)
    )[:dim, n]


def beam_splitter_operator(bs: BeamSplitterSpec, dim: int) -> np.ndarray:
    """Two-mode operator with a_j^dag -> sum_k U_kj a_k^dag, on a dim x dim product space.

    Built as exp(sum_jk G_kj a_k^dag a_j) with G = log U. It conserves total
    photon number, so sectors with N <= dim - 1 are exact.
    """
    g = logm(np.asarray(bs.matrix, dtype=complex))
    a = annihilation(dim)
    eye = np.eye(dim)
    modes = [np.kron(a, eye), np.kron(eye, a)]
    gen = sum(g[k, j] * modes[k].conj().T @ modes[j] for j in range(2) for k in range(2))
    return expm(gen)


def apply_beam_splitter_oracle(amps: np.ndarray, bs: BeamSplitterSpec) -> np.ndarray:
    dim = amps.shape[0]
    return (beam_splitter_operator(bs, dim) @ amps.reshape(-1)).reshape(dim, dim)


def cross_check(dim: int = 20) -> dict[str, float]:
    """Maximum deviation between the engine and the oracles on a fixed set of cases."""
    cut = FockCutoff(dim - 1)
    disp = 0.0
    for n in range(3):
        for alpha in (0.3, 0.7j, 1.0 + 0.4j):
            ref = displaced_fock_oracle(n, alpha, dim)
            disp = max(disp, float(np.max(np.abs(displaced_fock_amplitudes(n, alpha, cut) - ref))))
    small = FockCutoff(2 * dim - 1)
    bsd = 0.0
    # two-mode inputs whose mass lies in low photon-number sectors
    for photons, alphas in (((1, 0), (0.4, 0.4j)), ((0, 1), (0.3j, 0.5)), ((1, 1), (0.2, -0.3))):
        state = displaced_product(photons, alphas, small)
        for bs in (BALANCED_I, BALANCED_REAL, BeamSplitterSpec.from_transmittance(0.7)):
            out = apply_beam_splitter(state, 0, 1, bs).amplitudes[:dim, :dim]
            ref = apply_beam_splitter_oracle(state.amplitudes[:dim, :dim], bs)
            n = np.add.outer(np.arange(dim), np.arange(dim))
            valid = n <= dim - 1
            bsd = max(bsd, float(np.max(np.abs(out - ref)[valid])))
    inverse = 0.0
    s = displaced_product((1, 0), (0.5, 0.5j), FockCutoff(24))
    for bs in (BALANCED_I, BeamSplitterSpec(0.6, 0.8j)):
        back = apply_beam_splitter(apply_beam_splitter(s, 0, 1, bs), 0, 1, bs.inverse())
        inverse = max(inverse, float(np.max(np.abs(back.amplitudes - s.amplitudes))))
    return {"displacement": disp, "beam_splitter": bsd, "inverse_roundtrip": inverse}


ORACLE_TOL = 1e-8


def oracles_agree(tol: float = ORACLE_TOL) -> tuple[bool, dict[str, float]]:
    errs = cross_check()
    return all(math.isfinite(v) and v <= tol for v in errs.values()), errs
