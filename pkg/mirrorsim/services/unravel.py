"""Stochastic unravelings of the Lindblad equation and their ensemble estimators.

Noise substreams: trajectory `i` of a run seeded with `seed` draws its
standard normals from

    numpy.random.Generator(PCG64(SeedSequence(seed, spawn_key=(i,))))

one value per Euler-Maruyama step, in step order (ziggurat transform of
`Generator.standard_normal`), scaled by sqrt(step). A trajectory's noise path
therefore depends only on (seed, i, step schedule), never on batching,
worker count or the chunk size the normals are drawn in.

Linear-unraveling measure: f is the expectation of the raw overlap
<φ^B|φ^A> under the reference measure P, where W is a standard Wiener
process. Under P the per-trajectory norm is a positive martingale whose
variance diverges once η̂t exceeds about 1/4, so plain P-sampling gives no
usable error bar at desk-scale η̂. By default the paths are drawn from the
tilted measure Q with density M = (‖φ^A‖² + ‖φ^B‖²)/2, i.e. with increments
dW = dW̃ + μ dt, μ = 2√η̂ <x>, and every trajectory carries its exact
discrete likelihood ratio dP/dQ = Π exp(−μ dW̃ − μ² dt/2). The weighted
overlap is bounded by one in modulus up to discretization error and has
the same mean. `LinearSampling.REFERENCE` keeps plain P-sampling.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from mirrorsim.config import settings
from mirrorsim.errors import NumericalError, ParameterError
from mirrorsim.instrumentation import log_timing
from mirrorsim.schemas import (
    CurveMethod,
    EnsembleEstimate,
    EnsemblePoint,
    LinearSampling,
    OperatorKind,
    SimParams,
    TrajectoryConfig,
)
from mirrorsim.services.core import MirrorState, make_operator

logger = logging.getLogger(__name__)

SEED_RULE = "PCG64(SeedSequence(seed, spawn_key=(trajectory_index,))).standard_normal per step"

# steps of noise held in memory per batch
NOISE_CHUNK = 1024


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


class NoiseStream:
    """Wiener increments for a block of trajectories, one row of shape (batch,) per step.

    Each trajectory keeps a single Generator across chunks, so the values
    equal one long `standard_normal(n_steps)` draw.
    """

    def __init__(self, indices: Sequence[int], seed: int, steps: np.ndarray):
        self._rngs = [trajectory_rng(seed, i) for i in indices]
        self._root_steps = np.sqrt(np.asarray(steps, dtype=float))

    def __iter__(self) -> Iterator[np.ndarray]:
        for start in range(0, self._root_steps.size, NOISE_CHUNK):
            scale = self._root_steps[start : start + NOISE_CHUNK]
            normals = np.stack([rng.standard_normal(scale.size) for rng in self._rngs], axis=1)
            yield from normals * scale[:, None]


@dataclass(frozen=True)
class SystemState:
    """Photon-branch ⊗ mirror amplitudes: first N entries A-branch, last N B-branch."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] % 2:
            raise ParameterError(f"system state needs an even-length vector, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def n_trunc(self) -> int:
        return self.amps.shape[0] // 2

    @property
    def branch_a(self) -> MirrorState:
        return MirrorState(self.amps[: self.n_trunc])

    @property
    def branch_b(self) -> MirrorState:
        return MirrorState(self.amps[self.n_trunc :])

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    @property
    def f(self) -> complex:
        """2 Tr_m <A|ψ><ψ|B>."""
        n = self.n_trunc
        return complex(2.0 * np.vdot(self.amps[n:], self.amps[:n]))

    @property
    def branch_a_weight(self) -> float:
        """Probability that the photon took the A arm."""
        return float(np.sum(np.abs(self.amps[: self.n_trunc]) ** 2)) / self.norm**2

    def projector(self) -> np.ndarray:
        return np.outer(self.amps, self.amps.conj())

    @classmethod
    def initial(cls, n_trunc: int) -> "SystemState":
        amps = np.zeros(2 * n_trunc, dtype=complex)
        amps[0] = amps[n_trunc] = 1.0 / math.sqrt(2.0)
        return cls(amps)


def _sq_norms(states: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(states) ** 2, axis=-1)


class _LinearStepper:
    """dψ = [−iH dt + √η̂ x dW − (η̂/2) x² dt] ψ for both branch Hamiltonians.

    States are row-stacked: shape (batch, N).
    """

    def __init__(self, params: SimParams):
        n = params.n_trunc
        x = make_operator(OperatorKind.POSITION, n).entries
        x2 = x @ x
        h_a = make_operator(OperatorKind.HAMILTONIAN_A, n, params.kappa).entries
        h_b = make_operator(OperatorKind.HAMILTONIAN_B, n).entries
        self.x_t = x.T.copy()
        self.k_a_t = (-1j * h_a - 0.5 * params.eta_hat * x2).T.copy()
        self.k_b_t = (-1j * h_b - 0.5 * params.eta_hat * x2).T.copy()
        self.sqrt_eta = math.sqrt(params.eta_hat)

    def step(self, a: np.ndarray, b: np.ndarray, dw: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
        kick = self.sqrt_eta * np.asarray(dw)[..., None]
        a_next = a + h * (a @ self.k_a_t) + kick * (a @ self.x_t)
        b_next = b + h * (b @ self.k_b_t) + kick * (b @ self.x_t)
        return a_next, b_next

    def tilt(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """μ = 2√η̂ <x>, the mean position weighted over both branches."""
        moment = np.real(np.sum(a.conj() * (a @ self.x_t), axis=-1) + np.sum(b.conj() * (b @ self.x_t), axis=-1))
        return 2.0 * self.sqrt_eta * moment / (_sq_norms(a) + _sq_norms(b))


class _QmuplStepper:
    """Norm-preserving collapse equation on the full photon⊗mirror space, renormalized each step."""

    def __init__(self, params: SimParams):
        n = params.n_trunc
        x = make_operator(OperatorKind.POSITION, n).entries
        h_a = make_operator(OperatorKind.HAMILTONIAN_A, n, params.kappa).entries
        h_b = make_operator(OperatorKind.HAMILTONIAN_B, n).entries
        x_full = np.kron(np.eye(2), x)
        h_full = np.block([[h_a, np.zeros((n, n))], [np.zeros((n, n)), h_b]])
        self.eta = params.eta_hat
        self.sqrt_eta = math.sqrt(params.eta_hat)
        self.x_t = x_full.T.copy()
        self.k_t = (-1j * h_full - 0.5 * self.eta * (x_full @ x_full)).T.copy()

    def advance(self, psi: np.ndarray, dw: np.ndarray, h: float) -> np.ndarray:
        """Euler-Maruyama update before renormalization."""
        x_psi = psi @ self.x_t
        mean_q = np.real(np.sum(psi.conj() * x_psi, axis=-1))[..., None]
        drift = psi @ self.k_t + self.eta * mean_q * x_psi - 0.5 * self.eta * mean_q**2 * psi
        return psi + h * drift + self.sqrt_eta * np.asarray(dw)[..., None] * (x_psi - mean_q * psi)

    def step(self, psi: np.ndarray, dw: np.ndarray, h: float) -> np.ndarray:
        psi_next = self.advance(psi, dw, h)
        return psi_next / np.sqrt(_sq_norms(psi_next))[..., None]


def _check_finite(*arrays: np.ndarray, where: str):
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericalError(f"non-finite amplitudes {where}; reduce the step")


def step_linear(
    pair: Tuple[MirrorState, MirrorState],
    dW: float,
    params: SimParams,
    step: float,
) -> Tuple[MirrorState, MirrorState]:
    """One Euler-Maruyama step of the linear unraveling; both members share `dW`."""
    a, b = pair
    if a.n_trunc != params.n_trunc or b.n_trunc != params.n_trunc:
        raise ParameterError(f"states must have dimension n_trunc={params.n_trunc}")
    a_next, b_next = _LinearStepper(params).step(a.amps, b.amps, dW, step)
    _check_finite(a_next, b_next, where="after linear step")
    return MirrorState(a_next), MirrorState(b_next)


def step_qmupl(
    psi: SystemState,
    dW: float,
    params: SimParams,
    step: float,
    renormalize: bool = True,
) -> SystemState:
    """One Euler-Maruyama step of the collapse equation, then renormalization.

    `renormalize=False` returns the raw update, whose norm drifts from one
    by O(step^{3/2}) when dW² = step.
    """
    if psi.n_trunc != params.n_trunc:
        raise ParameterError(f"state must have dimension 2*n_trunc={2 * params.n_trunc}")
    if abs(psi.norm - 1.0) > 1e-6:
        raise ParameterError(f"collapse step needs a normalized state, norm = {psi.norm:.9f}")
    stepper = _QmuplStepper(params)
    psi_next = stepper.step(psi.amps, dW, step) if renormalize else stepper.advance(psi.amps, dW, step)
    _check_finite(psi_next, where="after collapse step")
    return SystemState(psi_next)


def _schedule(params: SimParams, cfg: TrajectoryConfig) -> Tuple[np.ndarray, List[int], List[float]]:
    """Step sizes, the step counts after which to record, and the recorded times."""
    times = params.times
    record_times = times if cfg.record_times is None else np.asarray(cfg.record_times, dtype=float)
    wanted = []
    for t in record_times:
        hits = np.flatnonzero(np.isclose(times, t, rtol=1e-12, atol=1e-12))
        if hits.size == 0:
            raise ParameterError(f"record time {t} is not on the t_grid")
        wanted.append(int(hits[0]))
    wanted = sorted(set(wanted))

    steps: List[float] = []
    completed = [0]
    for t0, t1 in zip(times[:-1], times[1:]):
        n_sub = max(1, math.ceil((t1 - t0) / cfg.step * (1.0 - 1e-12)))
        steps.extend([(t1 - t0) / n_sub] * n_sub)
        completed.append(len(steps))
    return np.array(steps), [completed[i] for i in wanted], [float(times[i]) for i in wanted]


def _batches(n_traj: int) -> List[range]:
    size = settings.trajectory_batch
    return [range(start, min(start + size, n_traj)) for start in range(0, n_traj, size)]


def _linear_batch(indices, params, cfg, steps, record_at, normalized):
    stepper = _LinearStepper(params)
    tilted = cfg.sampling is LinearSampling.TILTED and not normalized and params.eta_hat > 0.0
    a = np.zeros((len(indices), params.n_trunc), dtype=complex)
    a[:, 0] = 1.0
    b = a.copy()
    # ln(dP/dQ) plus the log of the scale divided out of the stored states
    log_weight = np.zeros(len(indices))
    f = np.empty((len(indices), len(record_at)), dtype=complex)
    norm_sq = np.empty((len(indices), len(record_at)))
    slots = {count: col for col, count in enumerate(record_at)}

    def record(col):
        _check_finite(a, b, log_weight, where="in linear ensemble")
        weight = np.exp(log_weight)
        overlap = np.sum(b.conj() * a, axis=-1)
        sq_a = _sq_norms(a)
        if normalized:
            f[:, col] = overlap / np.sqrt(sq_a * _sq_norms(b))
        else:
            f[:, col] = overlap * weight
        norm_sq[:, col] = sq_a * weight

    if 0 in slots:
        record(slots[0])
    for k, (h, dw) in enumerate(zip(steps, NoiseStream(indices, cfg.seed, steps)), start=1):
        if tilted:
            mu = stepper.tilt(a, b)
            a, b = stepper.step(a, b, dw + mu * h, h)
            scale = 0.5 * (_sq_norms(a) + _sq_norms(b))
            log_weight += np.log(scale) - mu * dw - 0.5 * mu**2 * h
            root = np.sqrt(scale)[:, None]
            a, b = a / root, b / root
        else:
            a, b = stepper.step(a, b, dw, h)
        if k in slots:
            record(slots[k])
    return f, norm_sq


def _qmupl_batch(indices, params, cfg, steps, record_at):
    stepper = _QmuplStepper(params)
    psi = np.tile(SystemState.initial(params.n_trunc).amps, (len(indices), 1))
    f = np.empty((len(indices), len(record_at)), dtype=complex)
    slots = {count: col for col, count in enumerate(record_at)}
    n = params.n_trunc

    def record(col):
        _check_finite(psi, where="in collapse ensemble")
        f[:, col] = 2.0 * np.sum(psi[:, n:].conj() * psi[:, :n], axis=-1)

    if 0 in slots:
        record(slots[0])
    for k, (h, dw) in enumerate(zip(steps, NoiseStream(indices, cfg.seed, steps)), start=1):
        psi = stepper.step(psi, dw, h)
        if k in slots:
            record(slots[k])
    return (f,)


def _mean_and_stderr(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Column means and the larger of the real/imaginary standard errors."""
    mean = samples.mean(axis=0)
    m = samples.shape[0]
    if m < 2:
        return mean, np.zeros(samples.shape[1])
    err_re = np.std(samples.real, axis=0, ddof=1)
    err_im = np.std(samples.imag, axis=0, ddof=1)
    return mean, np.maximum(err_re, err_im) / math.sqrt(m)


def _run_ensemble(worker, params: SimParams, cfg: TrajectoryConfig, label: str, *args):
    steps, record_at, record_times = _schedule(params, cfg)
    batches = _batches(cfg.n_traj)
    logger.debug(f"{label}: {cfg.n_traj} trajectories, {steps.size} steps, {len(batches)} batches")
    with log_timing(f"{label} n_traj={cfg.n_traj} n_trunc={params.n_trunc}", logger):
        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            parts = list(pool.map(lambda idx: worker(idx, params, cfg, steps, record_at, *args), batches))
    # concatenation restores trajectory-index order regardless of completion order
    stacked = [np.concatenate(column, axis=0) for column in zip(*parts)]
    meta = {
        "kappa": params.kappa,
        "eta_hat": params.eta_hat,
        "n_trunc": params.n_trunc,
        "step": cfg.step,
        "scheme": cfg.scheme.value,
        "n_steps": int(steps.size),
        "seed_rule": SEED_RULE,
    }
    return stacked, record_times, meta


def estimate_f_linear(
    params: SimParams,
    cfg: TrajectoryConfig = TrajectoryConfig(),
    normalized: bool = False,
) -> EnsembleEstimate:
    """Ensemble mean of <φ^B|φ^A> over linear-unraveling trajectories started in |0>.

    The raw (unnormalized) overlap is the unbiased estimator of f, sampled
    under `cfg.sampling`. `normalized=True` divides each overlap by the
    norms, always samples the reference measure, and is biased.
    The norm record is E_P[‖φ^A‖²], which equals one.
    """
    (f, norm_sq), record_times, meta = _run_ensemble(_linear_batch, params, cfg, "unravel-linear", normalized)
    mean_f, stderr_f = _mean_and_stderr(f)
    mean_sq, stderr_sq = _mean_and_stderr(norm_sq.astype(complex))
    meta["normalized"] = normalized
    meta["sampling"] = LinearSampling.REFERENCE.value if normalized else cfg.sampling.value
    return EnsembleEstimate(
        method=CurveMethod.UNRAVEL_LINEAR,
        points=[
            EnsemblePoint(t=t, mean_f=complex(mf), stderr_f=float(se))
            for t, mf, se in zip(record_times, mean_f, stderr_f)
        ],
        n_traj=cfg.n_traj,
        seed=cfg.seed,
        mean_norm_sq=[float(v.real) for v in mean_sq],
        stderr_norm_sq=[float(v) for v in stderr_sq],
        meta=meta,
    )


def estimate_f_qmupl(params: SimParams, cfg: TrajectoryConfig = TrajectoryConfig()) -> EnsembleEstimate:
    """Ensemble mean of 2 Tr_m <A|ψ><ψ|B> over collapse-equation trajectories."""
    (f,), record_times, meta = _run_ensemble(_qmupl_batch, params, cfg, "unravel-qmupl")
    mean_f, stderr_f = _mean_and_stderr(f)
    return EnsembleEstimate(
        method=CurveMethod.UNRAVEL_QMUPL,
        points=[
            EnsemblePoint(t=t, mean_f=complex(mf), stderr_f=float(se))
            for t, mf, se in zip(record_times, mean_f, stderr_f)
        ],
        n_traj=cfg.n_traj,
        seed=cfg.seed,
        meta=meta,
    )


def qmupl_trajectory(params: SimParams, step: float, seed: int, index: int = 0) -> List[SystemState]:
    """A single collapse trajectory, sampled at every point of `params.t_grid`.

    Position collapse localizes the mirror identically in both photon
    branches, so a single trajectory keeps most of its |f| and loses its
    phase; the decay of f shows up in the ensemble mean.
    """
    cfg = TrajectoryConfig(n_traj=1, step=step, seed=seed)
    steps, record_at, _ = _schedule(params, cfg)
    stepper = _QmuplStepper(params)
    psi = SystemState.initial(params.n_trunc).amps
    states = [SystemState(psi)]
    wanted = set(record_at)
    for k, (h, dw) in enumerate(zip(steps, NoiseStream([index], seed, steps)), start=1):
        psi = stepper.step(psi, dw[0], h)
        if k in wanted:
            _check_finite(psi, where=f"in trajectory {index}")
            states.append(SystemState(psi))
    return states
