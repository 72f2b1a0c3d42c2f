"""Exact evolution of deviation density matrices through pulse plans.

A plan is a sequence of segments applied to a deviation state Delta (the
traceless part of the density matrix, in units of the inverse spin
temperature beta). Unitary segments conjugate Delta; acquisition segments
sample a normalized transverse signal

    s(t) = Tr(Delta O) / (beta Tr(O^2))

while Delta evolves freely under the secular dipolar Hamiltonian. All
exponentials go through Hermitian eigendecomposition, so propagators are
unitary to round-off and Tr(Delta), Tr(Delta^2) and the spectrum of Delta
are conserved exactly up to floating-point noise; each segment checks this
and raises :class:`~magicecho.errors.InvariantViolation` on drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .errors import ConvergenceError, InvariantViolation

HERMITICITY_TOL = 1e-12
UNITARITY_TOL = 1e-9
SEGMENT_DRIFT_TOL = 1e-9
TEXP_TOL = 1e-8
TEXP_BASE_SLICES = 200


@dataclass(frozen=True)
class Propagator:
    """Unitary exp(-i H t) together with the duration it covers."""

    matrix: np.ndarray
    duration: float


def expm_hermitian(h: np.ndarray, t: float) -> Propagator:
    """exp(-i h t) for Hermitian h via eigendecomposition.

    Raises ValueError if h is not Hermitian to within HERMITICITY_TOL
    (relative to its norm).
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.linalg.norm(h)))
    if np.linalg.norm(h - h.conj().T) > HERMITICITY_TOL * scale:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Propagator(matrix=u, duration=float(t))


@dataclass(frozen=True)
class HamiltonianSpec:
    """What generates an evolution segment.

    kind 'dipolar' is the secular dipolar Hamiltonian H'. kind 'burst' is
    the tilted-rotating-frame Hamiltonian during a spin-locking burst,

        sign * omega1 * I_z - 1/2 H' + 3/8 (H2 + H-2),

    with omega1 = gamma * B1 in rad/s and sign the burst phase. kind
    'ideal_burst' is the infinite-omega1 limit, -1/2 H', which reverses the
    free dipolar evolution at half speed.
    """

    kind: str
    sign: int = 1
    omega1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dipolar", "burst", "ideal_burst"):
            raise ValueError(f"unknown hamiltonian kind {self.kind!r}")
        if self.kind == "burst":
            if self.sign not in (-1, 1):
                raise ValueError("burst sign must be +1 or -1")
            if not self.omega1 > 0:
                raise ValueError("burst omega1 must be positive")


def build_hamiltonian(spec: HamiltonianSpec, cluster_or_matrix) -> np.ndarray:
    a = ops.couplings_of(cluster_or_matrix)
    n = a.shape[0]
    hd = ops.secular_dipolar(a)
    if spec.kind == "dipolar":
        return hd
    if spec.kind == "ideal_burst":
        return -0.5 * hd
    _, _, p = ops.nonsecular_pair_raising(a)
    iz = ops.collective("z", n)
    return spec.sign * spec.omega1 * iz - 0.5 * hd + (3.0 / 8.0) * p


@dataclass(frozen=True)
class Pulse:
    """Instantaneous resonant pulse: conjugation by exp(+i angle I_axis)."""

    axis: str
    angle: float


@dataclass(frozen=True)
class Evolve:
    hamiltonian: HamiltonianSpec
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")


@dataclass(frozen=True)
class Acquire:
    """Sample s(t) every ``step`` over ``window`` under free dipolar evolution."""

    observable: str
    window: float
    step: float
    label: str = ""

    def __post_init__(self):
        if self.observable not in ("x", "y", "z"):
            raise ValueError("observable must be 'x', 'y' or 'z'")
        if not (self.window > 0 and self.step > 0):
            raise ValueError("window and step must be positive")
        if self.step > self.window:
            raise ValueError("step exceeds acquisition window")


Segment = Pulse | Evolve | Acquire


@dataclass(frozen=True)
class PropagationPlan:
    cluster: object
    segments: tuple
    initial_state_kind: str | None = None
    meta: dict = field(default_factory=dict)


@dataclass
class DeviationState:
    """Traceless deviation Delta of the density matrix, scaled by beta."""

    delta: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.delta, complex)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("delta must be square")
        scale = max(1.0, float(np.linalg.norm(d)))
        if np.linalg.norm(d - d.conj().T) > 1e-10 * scale:
            raise ValueError("delta must be Hermitian")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        self.delta = d


@dataclass(frozen=True)
class SignalCurve:
    """Sampled signal: times are offsets from the window start (or sweep
    abscissas for amplitude-vs-t1 curves, with meta saying which)."""

    times: np.ndarray
    values: np.ndarray
    observable: str
    start: float
    label: str = ""
    meta: dict = field(default_factory=dict)


INITIAL_STATE_KINDS = ("ix", "dipolar", "seq2")


def initial_state(kind: str, cluster_or_matrix, beta: float = 1.0) -> DeviationState:
    """Deviation states the pulse programs start from.

    'ix'      ->  beta * I_x            (transverse order after a 90 pulse,
                                         receiver phased so s_x(0) = +1)
    'dipolar' -> -beta * H'             (dipolar order, high-temperature ADRF
                                         limit of the equilibrium state)
    'seq2'    -> -beta * (1/4 H' + 3/16 (H2+H-2) - 3/8 Q)
                                        (dipolar order tilted by a 45-degree
                                         pulse about y, written out explicitly)
    """
    a = ops.couplings_of(cluster_or_matrix)
    n = a.shape[0]
    if kind == "ix":
        delta = beta * ops.collective("x", n)
    elif kind == "dipolar":
        delta = -beta * ops.secular_dipolar(a)
    elif kind == "seq2":
        hd = ops.secular_dipolar(a)
        _, _, p = ops.nonsecular_pair_raising(a)
        q = ops.operator_q(a)
        delta = -beta * (0.25 * hd + (3.0 / 16.0) * p - (3.0 / 8.0) * q)
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    return DeviationState(delta=delta, beta=beta)


class _EvolverCache:
    """Eigendecompositions of the distinct Hamiltonians in one plan."""

    def __init__(self, cluster_or_matrix):
        self.cluster = cluster_or_matrix
        self._eigs: dict[HamiltonianSpec, tuple] = {}

    def propagator(self, spec: HamiltonianSpec, t: float) -> np.ndarray:
        if spec not in self._eigs:
            self._eigs[spec] = np.linalg.eigh(build_hamiltonian(spec, self.cluster))
        w, v = self._eigs[spec]
        return (v * np.exp(-1j * w * t)) @ v.conj().T


_DIPOLAR = HamiltonianSpec("dipolar")


def _check_drift(delta, norm0, tr0, where):
    norm = float(np.linalg.norm(delta))
    if abs(norm - norm0) > SEGMENT_DRIFT_TOL * max(1.0, norm0):
        raise InvariantViolation(f"Tr(Delta^2) drifted after {where}")
    if abs(complex(np.trace(delta)) - tr0) > SEGMENT_DRIFT_TOL * max(1.0, norm0):
        raise InvariantViolation(f"Tr(Delta) drifted after {where}")


def evolve(state: DeviationState, plan: PropagationPlan):
    """Run a deviation state through a plan.

    Returns (final_state, curves) where curves holds one
    :class:`SignalCurve` per Acquire segment, in plan order.
    """
    a = ops.couplings_of(plan.cluster)
    n = a.shape[0]
    dim = 2**n
    if state.delta.shape != (dim, dim):
        raise ValueError("state dimension does not match the plan's cluster")
    cache = _EvolverCache(plan.cluster)
    delta = state.delta.copy()
    norm0 = float(np.linalg.norm(delta))
    tr0 = complex(np.trace(delta))
    curves = []
    t_abs = 0.0
    for k, seg in enumerate(plan.segments):
        where = f"segment {k} ({type(seg).__name__})"
        if isinstance(seg, Pulse):
            # positive-gamma pulse convention: conjugate by exp(+i angle I)
            u = ops.rotation(seg.axis, -seg.angle, n)
            delta = u @ delta @ u.conj().T
        elif isinstance(seg, Evolve):
            if seg.duration > 0.0:
                u = cache.propagator(seg.hamiltonian, seg.duration)
                delta = u @ delta @ u.conj().T
                t_abs += seg.duration
        elif isinstance(seg, Acquire):
            o = ops.collective(seg.observable, n)
            tro2 = float(np.trace(o @ o).real)
            n_samp = int(np.floor(seg.window / seg.step + 1e-9)) + 1
            u_step = cache.propagator(_DIPOLAR, seg.step)
            vals = np.empty(n_samp)
            for m in range(n_samp):
                if m:
                    delta = u_step @ delta @ u_step.conj().T
                s = complex(np.trace(delta @ o)) / (state.beta * tro2)
                if abs(s.imag) > 1e-9 * max(1.0, abs(s.real)):
                    raise InvariantViolation(f"complex signal in {where}")
                vals[m] = s.real
            remainder = seg.window - (n_samp - 1) * seg.step
            if remainder > 1e-15 * seg.window:
                u = cache.propagator(_DIPOLAR, remainder)
                delta = u @ delta @ u.conj().T
            curves.append(SignalCurve(
                times=np.arange(n_samp) * seg.step, values=vals,
                observable=seg.observable, start=t_abs, label=seg.label))
            t_abs += seg.window
        else:
            raise TypeError(f"unknown segment type {type(seg).__name__}")
        _check_drift(delta, norm0, tr0, where)
    return DeviationState(delta=delta, beta=state.beta), curves


def halfcycle_duration(omega1: float, n_halfcycles: int) -> float:
    """Duration of an integer number of burst half-cycles, n pi / omega1."""
    if not omega1 > 0:
        raise ValueError("omega1 must be positive")
    if n_halfcycles < 1 or n_halfcycles != int(n_halfcycles):
        raise ValueError("half-cycle count must be a positive integer")
    return int(n_halfcycles) * np.pi / omega1


def verify_average_hamiltonian(cluster_or_matrix, omega1: float,
                               n_halfcycles: int = 4) -> dict:
    """Exact single-burst propagator vs its average-Hamiltonian factorization.

    Over t1 = n_halfcycles * pi / omega1 the exact propagator for the +
    phase burst is compared with exp(-i omega1 Iz t1) exp(-i F_k t1), where
    F_0 = -1/2 H' and F_1 = F_0 + H1 (first-order correction). Returns a
    dict with t1 and the normalized Frobenius errors err0 and err1.
    """
    a = ops.couplings_of(cluster_or_matrix)
    n = a.shape[0]
    dim = 2**n
    t1 = halfcycle_duration(omega1, n_halfcycles)
    h_burst = build_hamiltonian(HamiltonianSpec("burst", 1, omega1), a)
    u_exact = expm_hermitian(h_burst, t1).matrix
    iz = ops.collective("z", n)
    u_z = expm_hermitian(omega1 * iz, t1).matrix
    hd = ops.secular_dipolar(a)
    h1, _ = ops.magnus_first_correction(a, omega1)
    errs = {}
    for order, f in ((0, -0.5 * hd), (1, -0.5 * hd + h1)):
        u_approx = u_z @ expm_hermitian(f, t1).matrix
        errs[f"err{order}"] = float(np.linalg.norm(u_exact - u_approx)
                                    / np.sqrt(dim))
    return {"t1": t1, "omega1": omega1, "n_halfcycles": int(n_halfcycles),
            **errs}


def _texp_slices(hd_eig, h1, t1, slices):
    """Slicewise midpoint time-ordered exponential of the interaction-picture
    first-order correction, later times multiplying on the left."""
    w, v = hd_eig
    dt = t1 / slices
    out = np.eye(h1.shape[0], dtype=complex)
    for k in range(slices):
        t_mid = (k + 0.5) * dt
        # frame of the zeroth-order average -H'/2: conjugate by exp(-i H' t/2)
        ph = np.exp(-0.5j * w * t_mid)
        frame = (v * ph) @ v.conj().T
        h_t = frame @ h1 @ frame.conj().T
        wk, vk = np.linalg.eigh(h_t)
        out = ((vk * np.exp(-1j * wk * dt)) @ vk.conj().T) @ out
    return out


def effective_propagator_a3(cluster_or_matrix, omega1: float, t1: float,
                            slices: int = TEXP_BASE_SLICES,
                            tol: float = TEXP_TOL) -> Propagator:
    """Time-ordered exponential of the interaction-picture correction.

    A3 = Texp{ -i integral_0^t1 exp(-i H' t/2) H1 exp(+i H' t/2) dt },
    evaluated by slicewise midpoint products, doubling the slice count until
    two successive refinements agree to ``tol`` in Frobenius norm. For zero
    couplings (H1 = 0) this is the identity: the burst then reverses
    nothing and corrects nothing.
    """
    if not t1 > 0:
        raise ValueError("t1 must be positive")
    a = ops.couplings_of(cluster_or_matrix)
    hd = ops.secular_dipolar(a)
    h1, _ = ops.magnus_first_correction(a, omega1)
    hd_eig = np.linalg.eigh(hd)
    prev = _texp_slices(hd_eig, h1, t1, slices)
    for _ in range(8):
        slices *= 2
        cur = _texp_slices(hd_eig, h1, t1, slices)
        if np.linalg.norm(cur - prev) < tol:
            return Propagator(matrix=cur, duration=float(t1))
        prev = cur
    raise ConvergenceError(
        f"time-ordered product did not converge below {tol} by {slices} slices")


def effective_propagator_a4(cluster_or_matrix, omega1: float, t1: float) -> Propagator:
    """First-order defect propagator of one full time-reversal cycle.

    A4 = exp(-i H' t1/2) exp[+i (H'/2 + H1) t1/2] exp[+i (H'/2 - H1) t1/2]:
    the + phase burst half, the - phase half (where the first-order
    correction flips sign), then the free evolution the burst is meant to
    unwind. With H1 = 0 the three factors cancel exactly, so A4 measures
    the first-order deviation from perfect reversal.
    """
    if not t1 > 0:
        raise ValueError("t1 must be positive")
    a = ops.couplings_of(cluster_or_matrix)
    hd = ops.secular_dipolar(a)
    h1, _ = ops.magnus_first_correction(a, omega1)
    u_free = expm_hermitian(hd, 0.5 * t1).matrix
    u_minus = expm_hermitian(-(0.5 * hd + h1), 0.5 * t1).matrix
    u_plus = expm_hermitian(-(0.5 * hd - h1), 0.5 * t1).matrix
    return Propagator(matrix=u_free @ u_minus @ u_plus, duration=float(t1))
