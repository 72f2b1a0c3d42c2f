"""Many-spin operators for clusters of dipolar-coupled spin-1/2 nuclei.

Matrices are dense complex128 in the full 2^N product basis. Site 0 is the
most significant qubit and index 0 of each single-site factor is spin-up.
Every builder accepts either a :class:`~magicecho.lattice.SpinCluster` or a
bare symmetric coupling matrix in rad/s, so synthetic coupling tables can be
fed straight in.

Sign conventions, fixed once here and relied on everywhere else:

* ``rotation(axis, angle)`` returns exp(-i * angle * I_axis).
* A resonant RF pulse of flip angle theta about ``axis`` conjugates
  operators by exp(+i * theta * I_axis), i.e. ``rotation(axis, -theta)``.
  This is the positive-gamma convention; the tilt identity below only holds
  with this sign.

With that convention, conjugating the secular dipolar Hamiltonian H' by a
theta pulse about y decomposes exactly as

    H'(theta) = 1/2 (3 cos^2 theta - 1) H'
              + 3/8 sin^2 theta (H2 + H-2)
              - 3/4 sin theta cos theta Q

where H2 = sum a_ij I+i I+j is the double-quantum part and Q is the
single-quantum part defined in :func:`operator_q`.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

MAX_SITES = 12
"""Hard cap on cluster size; 2^12 = 4096 keeps dense algebra tractable."""

_S = {
    "x": np.array([[0.0, 0.5], [0.5, 0.0]], complex),
    "y": np.array([[0.0, -0.5j], [0.5j, 0.0]], complex),
    "z": np.array([[0.5, 0.0], [0.0, -0.5]], complex),
    "p": np.array([[0.0, 1.0], [0.0, 0.0]], complex),
    "m": np.array([[0.0, 0.0], [1.0, 0.0]], complex),
}


def couplings_of(cluster_or_matrix) -> np.ndarray:
    """Extract the symmetric coupling matrix (rad/s) and validate it."""
    a = getattr(cluster_or_matrix, "couplings", cluster_or_matrix)
    a = np.asarray(a, float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("coupling table must be a square matrix")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least 2 sites")
    if n > MAX_SITES:
        raise ValueError(f"cluster size {n} exceeds MAX_SITES={MAX_SITES}")
    if not np.allclose(a, a.T, atol=1e-9 * max(1.0, np.abs(a).max())):
        raise ValueError("coupling table must be symmetric")
    return a


def site_count(cluster_or_matrix) -> int:
    return couplings_of(cluster_or_matrix).shape[0]


@lru_cache(maxsize=256)
def _site_op(key: str, site: int, n: int) -> np.ndarray:
    """op on one site, identity elsewhere (site 0 = most significant)."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n):
        out = np.kron(out, _S[key] if k == site else np.eye(2, dtype=complex))
    out.setflags(write=False)
    return out


def site_op(key: str, site: int, n: int) -> np.ndarray:
    if key not in _S:
        raise ValueError(f"unknown single-site operator {key!r}")
    if not 0 <= site < n:
        raise ValueError("site index out of range")
    return _site_op(key, site, n)


def collective(axis: str, n: int) -> np.ndarray:
    """Total spin component I_axis = sum_i I_axis,i; axis may carry a '-'."""
    sign = 1.0
    if axis.startswith("-"):
        sign, axis = -1.0, axis[1:]
    if axis not in ("x", "y", "z"):
        raise ValueError(f"unknown axis {axis!r}")
    out = np.zeros((2**n, 2**n), complex)
    for i in range(n):
        out += site_op(axis, i, n)
    return sign * out


def secular_dipolar(cluster_or_matrix) -> np.ndarray:
    """H' = sum_{i<j} a_ij [ I_zi I_zj - 1/4 (I+i I-j + I-i I+j) ]."""
    a = couplings_of(cluster_or_matrix)
    n = a.shape[0]
    h = np.zeros((2**n, 2**n), complex)
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] == 0.0:
                continue
            h += a[i, j] * (
                site_op("z", i, n) @ site_op("z", j, n)
                - 0.25 * (site_op("p", i, n) @ site_op("m", j, n)
                          + site_op("m", i, n) @ site_op("p", j, n)))
    return h


def nonsecular_pair_raising(cluster_or_matrix):
    """Double-quantum operators (H2, H-2, P).

    H2 = sum_{i<j} a_ij I+i I+j, H-2 = H2^dagger, P = H2 + H-2.
    """
    a = couplings_of(cluster_or_matrix)
    n = a.shape[0]
    h2 = np.zeros((2**n, 2**n), complex)
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] == 0.0:
                continue
            h2 += a[i, j] * (site_op("p", i, n) @ site_op("p", j, n))
    hm2 = h2.conj().T
    return h2, hm2, h2 + hm2


def operator_q(cluster_or_matrix) -> np.ndarray:
    """Single-quantum part Q = sum_{i<j} a_ij [I_zi (I+j + I-j) + (i <-> j)]."""
    a = couplings_of(cluster_or_matrix)
    n = a.shape[0]
    q = np.zeros((2**n, 2**n), complex)
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] == 0.0:
                continue
            xi = site_op("p", i, n) + site_op("m", i, n)
            xj = site_op("p", j, n) + site_op("m", j, n)
            q += a[i, j] * (site_op("z", i, n) @ xj + site_op("z", j, n) @ xi)
    return q


def rotation(axis: str, angle: float, n: int) -> np.ndarray:
    """Collective rotation exp(-i * angle * I_axis) as a kron of 2x2 blocks."""
    sign = 1.0
    if axis.startswith("-"):
        sign, axis = -1.0, axis[1:]
    if axis not in ("x", "y", "z"):
        raise ValueError(f"unknown axis {axis!r}")
    theta = sign * angle
    u1 = (np.cos(theta / 2.0) * np.eye(2, dtype=complex)
          - 2.0j * np.sin(theta / 2.0) * _S[axis])
    out = np.array([[1.0 + 0.0j]])
    for _ in range(n):
        out = np.kron(out, u1)
    return out


def rotate(op: np.ndarray, axis: str, angle: float) -> np.ndarray:
    """Conjugate: R op R^dagger with R = rotation(axis, angle)."""
    n = int(round(np.log2(op.shape[0])))
    if 2**n != op.shape[0]:
        raise ValueError("operator dimension is not a power of 2")
    r = rotation(axis, angle, n)
    return r @ op @ r.conj().T


class TiltReport(NamedTuple):
    """Least-squares split of a tilted H' over the (H', P, Q) basis."""

    coeff_hd: float
    coeff_p: float
    coeff_q: float
    residual: float      # Frobenius norm of what the basis cannot absorb
    reference_norm: float


def tilt_decompose(cluster_or_matrix, theta: float) -> TiltReport:
    """Decompose the pulse-tilted dipolar Hamiltonian over (H', P, Q).

    Tilts H' by a theta pulse about y (positive-gamma convention, so the
    conjugation is by exp(+i theta I_y)) and projects the result onto the
    mutually orthogonal operators H', P, Q under the trace inner product.
    """
    a = couplings_of(cluster_or_matrix)
    hd = secular_dipolar(a)
    _, _, p = nonsecular_pair_raising(a)
    q = operator_q(a)
    # pulse convention: conjugate by exp(+i theta I_y) = rotation('y', -theta)
    tilted = rotate(hd, "y", -theta)
    coeffs = []
    rem = tilted.copy()
    for basis_op in (hd, p, q):
        norm2 = float(np.vdot(basis_op, basis_op).real)
        c = float(np.vdot(basis_op, tilted).real / norm2)
        coeffs.append(c)
        rem -= c * basis_op
    return TiltReport(coeff_hd=coeffs[0], coeff_p=coeffs[1], coeff_q=coeffs[2],
                      residual=float(np.linalg.norm(rem)),
                      reference_norm=float(np.linalg.norm(tilted)))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def magnus_first_correction(cluster_or_matrix, omega1: float):
    """First-order average-Hamiltonian correction for one burst half-cycle.

    During a burst the tilted-frame Hamiltonian is
    +/- omega1 I_z - 1/2 H' + 3/8 (H2 + H-2), and the double-quantum part
    oscillates at 2 omega1 in the I_z interaction frame. Averaging one
    half-cycle pair (+ phase then - phase) leaves the zeroth-order term
    -1/2 H' and the first-order correction

        H1 = (3/8)^2 [H2, H-2] / (2 omega1)
           + (3/16) [H', H-2 - H2] / (2 omega1)

    Both parts are Hermitian. Returns (h1, parts) where parts is a dict with
    the two Hermitian pieces under keys 'double_quantum' and 'cross'.
    """
    if omega1 <= 0:
        raise ValueError("omega1 must be positive")
    a = couplings_of(cluster_or_matrix)
    hd = secular_dipolar(a)
    h2, hm2, _ = nonsecular_pair_raising(a)
    part_dq = (3.0 / 8.0) ** 2 * commutator(h2, hm2) / (2.0 * omega1)
    part_cross = (3.0 / 16.0) * commutator(hd, hm2 - h2) / (2.0 * omega1)
    h1 = part_dq + part_cross
    return h1, {"double_quantum": part_dq, "cross": part_cross}


def h1_magnitude_proxy(m2: float, omega1: float) -> float:
    """Scalar size estimate M2 / (2 omega1) for the first-order correction."""
    if omega1 <= 0:
        raise ValueError("omega1 must be positive")
    return float(m2) / (2.0 * omega1)


def second_moment_trace(cluster_or_matrix) -> float:
    """M2 = Tr([H', I_x]^dagger [H', I_x]) / Tr(I_x^2), the trace route.

    Equals the pair-sum Van Vleck formula exactly for any coupling table;
    used as a cross-check against :func:`magicecho.lattice.second_moment`.
    """
    a = couplings_of(cluster_or_matrix)
    n = a.shape[0]
    hd = secular_dipolar(a)
    ix = collective("x", n)
    c = commutator(hd, ix)
    return float(np.trace(c.conj().T @ c).real / np.trace(ix @ ix).real)
