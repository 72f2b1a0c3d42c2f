"""Canned measurements: FID, time-reversal echo sequences, sweeps, decay times.

Signals are dimensionless, s(t) = Tr(Delta O) / (beta Tr(O^2)), so the free
induction decay starts at 1 and sequence amplitudes can be compared to
max|dG/dt| with no free scale. Echo amplitudes are the peak |s| over an
acquisition grid anchored at the predicted echo center; |dG/dt| is even
about the center, so the outward-running grid sees the full peak, and using
the same grid for every sequence makes amplitude ratios exact in the ideal
limit.

All curves carry a ``macroscopic: False`` metadata flag: a handful of spins
evolved unitarily realizes the exact density-matrix predictions, not the
thermodynamic irreversibility of a bulk sample, and the interesting physics
is precisely where the two disagree (see the thermo module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine, operators as ops
from .engine import (
    Acquire,
    Evolve,
    HamiltonianSpec,
    PropagationPlan,
    Pulse,
    SignalCurve,
    evolve,
)
from .lattice import local_field

DEFAULT_WINDOW_FACTOR = 5.0   # acquisition window, units of 1/omega_L
DEFAULT_STEP_FACTOR = 0.02    # acquisition step, units of 1/omega_L


def _cluster_meta(cluster, **extra):
    orientation = getattr(cluster, "orientation", None)
    meta = {
        "orientation": getattr(orientation, "label", None),
        "cluster_hash": getattr(cluster, "hash_hex", None),
        "n_sites": ops.site_count(cluster),
        "macroscopic": False,
    }
    meta.update(extra)
    return meta


def _acquisition_grid(cluster, window, step):
    wl = local_field_of(cluster)
    if window is None:
        window = DEFAULT_WINDOW_FACTOR / wl
    if step is None:
        step = DEFAULT_STEP_FACTOR / wl
    return float(window), float(step)


def local_field_of(cluster) -> float:
    """omega_L for clusters or bare coupling tables."""
    try:
        return local_field(cluster)
    except AttributeError:
        a = ops.couplings_of(cluster)
        m2 = (9.0 / 16.0) * (a**2).sum() / a.shape[0]
        return float(np.sqrt(m2 / 3.0))


def _fid_spectral_data(cluster):
    a = ops.couplings_of(cluster)
    n = a.shape[0]
    hd = ops.secular_dipolar(a)
    ix = ops.collective("x", n)
    w, v = np.linalg.eigh(hd)
    m = v.conj().T @ ix @ v
    weights = (m * m.conj()).real / float(np.trace(ix @ ix).real)
    return w, weights


def fid_values(cluster, times) -> np.ndarray:
    """G(t) = Tr(I_x(t) I_x) / Tr(I_x^2) at arbitrary times (even in t)."""
    w, weights = _fid_spectral_data(cluster)
    times = np.atleast_1d(np.asarray(times, float))
    out = np.empty(times.shape)
    for k, t in enumerate(times):
        e = np.exp(-1j * w * t)
        g = complex(e.conj() @ weights @ e)
        if abs(g.imag) > 1e-12 * max(1.0, abs(g.real)):
            raise engine.InvariantViolation("FID acquired an imaginary part")
        out[k] = g.real
    return out


def fid_derivative(cluster, times) -> np.ndarray:
    """dG/dt evaluated analytically from the same eigendecomposition."""
    w, weights = _fid_spectral_data(cluster)
    times = np.atleast_1d(np.asarray(times, float))
    gaps = w[:, None] - w[None, :]   # omega_n - omega_m
    b = weights * gaps
    out = np.empty(times.shape)
    for k, t in enumerate(times):
        e = np.exp(-1j * w * t)
        out[k] = (1j * (e.conj() @ b @ e)).real
    return out


def fid(cluster, window=None, step=None) -> SignalCurve:
    """Free induction decay G(t) on [0, window]."""
    window, step = _acquisition_grid(cluster, window, step)
    n_samp = int(np.floor(window / step + 1e-9)) + 1
    times = np.arange(n_samp) * step
    values = fid_values(cluster, times)
    return SignalCurve(times=times, values=values, observable="x", start=0.0,
                       label="fid", meta=_cluster_meta(cluster, sequence="fid"))


def max_abs_fid_derivative(cluster, window=None, step=None) -> float:
    """max_t |dG/dt| over the standard acquisition grid."""
    window, step = _acquisition_grid(cluster, window, step)
    n_samp = int(np.floor(window / step + 1e-9)) + 1
    times = np.arange(n_samp) * step
    return float(np.abs(fid_derivative(cluster, times)).max())


def _halfcycle(omega1: float) -> float:
    if not omega1 > 0:
        raise ValueError("omega1 must be positive")
    return np.pi / omega1


def check_burst_duration(t1: float, omega1: float) -> int:
    """Validate t1 against the phase-alternated burst timing.

    The burst splits into two equal phase halves and average-Hamiltonian
    bookkeeping needs each half to cover an integer number of half-cycles,
    so t1 must be an even multiple of pi/omega1 (t1 = 0 is the degenerate
    no-burst case). Returns the half-cycle count.
    """
    if t1 < 0:
        raise ValueError("t1 must be nonnegative")
    hc = _halfcycle(omega1)
    n = int(round(t1 / hc))
    if abs(t1 - n * hc) > 1e-9 * max(t1, hc) or n % 2:
        raise ValueError(
            f"t1 = {t1} is not an even number of half-cycles pi/omega1; "
            f"nearest valid value is {2 * round(t1 / (2 * hc)) * hc}")
    return n


def snap_t1(t1: float, omega1: float) -> float:
    """Nearest even multiple of the half-cycle pi/omega1."""
    hc = _halfcycle(omega1)
    return 2 * int(round(t1 / (2 * hc))) * hc


def _burst_segments(omega1, t1, ideal_reversal):
    """Phase-alternated burst of total duration t1 (+ half then - half)."""
    if t1 == 0.0:
        return []
    if ideal_reversal:
        return [Evolve(HamiltonianSpec("ideal_burst"), t1)]
    check_burst_duration(t1, omega1)
    half = 0.5 * t1
    return [Evolve(HamiltonianSpec("burst", +1, omega1), half),
            Evolve(HamiltonianSpec("burst", -1, omega1), half)]


def _reversal_tail(cluster, omega1, t1, ideal_reversal, window, step,
                   read_pulse: bool):
    """Burst, free evolution to the echo center, optional 45 readout."""
    segments = list(_burst_segments(omega1, t1, ideal_reversal))
    if t1 > 0:
        segments.append(Evolve(HamiltonianSpec("dipolar"), 0.5 * t1))
    if read_pulse:
        segments.append(Pulse("y", np.pi / 4))
    segments.append(Acquire("y", window, step))
    return tuple(segments)


def _split_after_90(cluster):
    """State after init dipolar + 90y pulse, split into its P-borne and
    H'-borne parts (exact: the tilt of H' has no other components)."""
    a = ops.couplings_of(cluster)
    hd = ops.secular_dipolar(a)
    _, _, p = ops.nonsecular_pair_raising(a)
    return (engine.DeviationState(delta=-(3.0 / 8.0) * p),
            engine.DeviationState(delta=0.5 * hd))


def sequence1_components(cluster, omega1, t1, ideal_reversal=False,
                         window=None, step=None):
    """The two signal components of the dipolar-order reversal sequence.

    Returns (p_curve, hd_curve): the readout after the 45-degree pulse of
    the double-quantum-borne part and of the dipolar-order-borne part of
    the state prepared by the initial 90-degree pulse. Their sum is the
    full sequence signal (evolution is linear in the deviation).
    """
    window, step = _acquisition_grid(cluster, window, step)
    tail = _reversal_tail(cluster, omega1, t1, ideal_reversal, window, step,
                          read_pulse=True)
    plan = PropagationPlan(cluster=cluster, segments=tail,
                           initial_state_kind="dipolar")
    state_p, state_hd = _split_after_90(cluster)
    curves = []
    for part, state in (("p", state_p), ("hd", state_hd)):
        _, (curve,) = evolve(state, plan)
        meta = _cluster_meta(cluster, sequence="seq1", component=part,
                            omega1=omega1, t1=t1,
                            ideal_reversal=bool(ideal_reversal))
        curves.append(SignalCurve(times=curve.times, values=curve.values,
                                  observable=curve.observable,
                                  start=curve.start, label=f"seq1-{part}",
                                  meta=meta))
    return tuple(curves)


def sequence1_amplitude(cluster, omega1, t1, ideal_reversal=False,
                        window=None, step=None) -> float:
    """Peak |s| of the double-quantum-borne echo component."""
    p_curve, _ = sequence1_components(cluster, omega1, t1, ideal_reversal,
                                      window, step)
    return float(np.abs(p_curve.values).max())


def sequence2_signal(cluster, omega1, t1, ideal_reversal=False,
                     window=None, step=None) -> SignalCurve:
    """Echo of the 45-degree-first sequence, acquired from the echo center.

    The state after the 45-degree pulse carries dipolar-order, double-
    quantum and single-quantum parts; only the single-quantum part can
    reach the transverse observable (coherence order is conserved under
    dipolar evolution), so no component splitting is needed.
    """
    window, step = _acquisition_grid(cluster, window, step)
    tail = _reversal_tail(cluster, omega1, t1, ideal_reversal, window, step,
                          read_pulse=False)
    plan = PropagationPlan(cluster=cluster, segments=tail,
                           initial_state_kind="seq2")
    state = engine.initial_state("seq2", cluster)
    _, (curve,) = evolve(state, plan)
    meta = _cluster_meta(cluster, sequence="seq2", omega1=omega1, t1=t1,
                        ideal_reversal=bool(ideal_reversal))
    return SignalCurve(times=curve.times, values=curve.values,
                       observable=curve.observable, start=curve.start,
                       label="seq2", meta=meta)


def sequence2_amplitude(cluster, omega1, t1, ideal_reversal=False,
                        window=None, step=None) -> float:
    curve = sequence2_signal(cluster, omega1, t1, ideal_reversal, window, step)
    return float(np.abs(curve.values).max())


def rpw_magic_echo(cluster, omega1, tau, ideal_reversal=False,
                   window=None, step=None) -> SignalCurve:
    """Magic echo on transverse order: free decay tau, burst 2 tau, acquire.

    The burst reverses dipolar evolution at half speed, so the transverse
    state refocuses exactly at the end of the burst; the curve starts at
    the echo peak and replays the FID.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    window, step = _acquisition_grid(cluster, window, step)
    segments = [Evolve(HamiltonianSpec("dipolar"), tau)]
    segments += _burst_segments(omega1, 2.0 * tau, ideal_reversal)
    segments.append(Acquire("x", window, step))
    plan = PropagationPlan(cluster=cluster, segments=tuple(segments),
                           initial_state_kind="ix")
    _, (curve,) = evolve(engine.initial_state("ix", cluster), plan)
    meta = _cluster_meta(cluster, sequence="rpw", omega1=omega1, tau=tau,
                        ideal_reversal=bool(ideal_reversal))
    return SignalCurve(times=curve.times, values=curve.values,
                       observable="x", start=curve.start, label="rpw",
                       meta=meta)


_SEQUENCE_AMPLITUDES = {
    "seq1": sequence1_amplitude,
    "seq2": sequence2_amplitude,
}


def sweep_t1(sequence: str, cluster, omega1, t1_grid, ideal_reversal=False,
             window=None, step=None) -> SignalCurve:
    """Echo amplitude vs burst duration t1.

    Unless ideal, every grid value is snapped to the nearest even multiple
    of pi/omega1 before running; the executed values are the curve's
    abscissa and the requested ones are kept in the metadata.
    """
    if sequence not in _SEQUENCE_AMPLITUDES:
        raise ValueError(f"unknown sequence {sequence!r}")
    op = _SEQUENCE_AMPLITUDES[sequence]
    requested = np.asarray(list(t1_grid), float)
    if requested.size == 0:
        raise ValueError("empty t1 grid")
    if np.any(requested < 0):
        raise ValueError("t1 values must be nonnegative")
    executed = (requested if ideal_reversal
                else np.array([snap_t1(t, omega1) for t in requested]))
    amps = np.array([op(cluster, omega1, t, ideal_reversal, window, step)
                     for t in executed])
    meta = _cluster_meta(cluster, sequence=sequence, omega1=omega1,
                        ideal_reversal=bool(ideal_reversal),
                        t1_requested=requested.tolist())
    return SignalCurve(times=executed, values=amps, observable="y",
                       start=0.0, label=f"{sequence}-sweep", meta=meta)


@dataclass(frozen=True)
class DecayEstimate:
    """1/e-crossing time of an amplitude curve."""

    t_d: float | None
    censored: bool
    threshold: float
    method: str = "one-over-e"


def decay_time(curve: SignalCurve, threshold: float = 1.0 / np.e
               ) -> DecayEstimate:
    """First crossing of value <= threshold * value[0], linearly interpolated.

    Returns a censored estimate when the curve never falls that far.
    """
    t = np.asarray(curve.times, float)
    v = np.asarray(curve.values, float)
    if len(t) < 3:
        raise ValueError("need at least 3 points to estimate a decay time")
    if not v[0] > 0:
        raise ValueError("first curve value must be positive")
    target = threshold * v[0]
    below = np.nonzero(v <= target)[0]
    if below.size == 0:
        return DecayEstimate(t_d=None, censored=True, threshold=threshold)
    k = below[0]
    if k == 0:
        return DecayEstimate(t_d=float(t[0]), censored=False,
                             threshold=threshold)
    frac = (v[k - 1] - target) / (v[k - 1] - v[k])
    t_d = t[k - 1] + frac * (t[k] - t[k - 1])
    return DecayEstimate(t_d=float(t_d), censored=False, threshold=threshold)
