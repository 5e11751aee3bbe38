"""Statevector emulation of the quantum pipeline.

Simplex registers index amplitudes directly by simplex mask, so an ``n``-vertex
complex lives on ``n`` qubits. Phase estimation is emulated by exact
diagonalisation followed by sampling eigenvalues with their Born probabilities
and recording each in a bin of width ``delta``.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chains import SparseOperator, dirac_full, dirac_pair, laplacian
from .ingest import ScaleGrid
from .simplicial import NULL_MASK, FiltrationContext

RNG_NAME = "numpy.random.Generator(PCG64)"
DEFAULT_QUBIT_CAP = 24
NORM_ATOL = 1e-10
Z95 = 1.959963984540054
# eigenvalues below this (relative to the largest magnitude) count as zero
_ZERO_RTOL = 1e-9


class SimulationError(ValueError):
    pass


def derive_seed(seed: int, *keys: int | str) -> int:
    """Deterministic sub-seed for a task identified by ``keys``."""
    words = [int(seed)]
    for key in keys:
        words.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])


def _register_bits(count: int) -> int:
    return max(0, math.ceil(math.log2(count))) if count > 1 else 0


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** self.n_qubits,):
            raise SimulationError(f"{self.n_qubits} qubits need {2 ** self.n_qubits} amplitudes, got {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_ATOL:
            raise SimulationError(f"state norm {norm!r} differs from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def support(self) -> list[int]:
        return np.flatnonzero(np.abs(self.amplitudes) > 0).tolist()


@dataclass(frozen=True)
class MixedEnsemble:
    """Diagonal density matrix: ``weights[i]`` on basis state ``members[i]``.

    A member is a simplex mask, or a tuple whose last entry is the mask and
    whose leading entries are register labels such as ``(k, mask)``.
    """

    members: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.members) != w.size or w.size == 0:
            raise SimulationError("ensemble needs one positive weight per member")
        if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise SimulationError("ensemble weights must be positive and sum to 1")
        if len(set(self.members)) != len(self.members):
            raise SimulationError("ensemble members must be distinct")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def masks(self) -> list[int]:
        return [m[-1] if isinstance(m, tuple) else m for m in self.members]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SpectralHistogram:
    """Counts of sampled eigenvalues in bins of width ``bin_width``.

    Bin ``j`` covers [(j - 1/2) w, (j + 1/2) w) and is centred on ``j * w``;
    the zero bin therefore holds the non-negative eigenvalues below ``w / 2``.
    """

    bin_width: float
    bins: dict[int, int]
    total: int
    seed: int
    operator: str = "operator"
    k: int | None = None
    epsilon: float | None = None

    def center(self, j: int) -> float:
        return j * self.bin_width

    def count_at(self, value: float) -> int:
        return self.bins.get(bin_index(value, self.bin_width), 0)

    @property
    def zero_count(self) -> int:
        return self.bins.get(0, 0)

    def frequencies(self) -> dict[float, float]:
        return {self.center(j): c / self.total for j, c in sorted(self.bins.items())}

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "k": self.k,
            "epsilon": self.epsilon,
            "delta": self.bin_width,
            "seed": self.seed,
            "total": self.total,
            "bins": [{"center": self.center(j), "count": c} for j, c in sorted(self.bins.items())],
        }


def bin_index(value: float, width: float) -> int:
    return int(math.floor(value / width + 0.5))


@dataclass(frozen=True)
class GroverRun:
    k: int
    epsilon: float
    zeta: float
    iterations: int
    oracle_calls: int
    success_probability: float  # simulated overlap with the marked subspace
    prepared: StateVector | None  # post-selected simplex state; None is the null result
    final_state: StateVector

    @property
    def theta(self) -> float:
        return math.asin(math.sqrt(self.zeta))

    @property
    def closed_form_probability(self) -> float:
        return grover_success_closed_form(self.zeta, self.iterations)

    @property
    def is_null(self) -> bool:
        return self.prepared is None


def grover_success_closed_form(zeta: float, iterations: int) -> float:
    theta = math.asin(math.sqrt(zeta))
    return math.sin((2 * iterations + 1) * theta) ** 2


def optimal_iterations(zeta: float) -> int:
    if zeta <= 0:
        return 0
    theta = math.asin(math.sqrt(zeta))
    return max(0, round(math.pi / (4 * theta) - 0.5))


def _fix_phase(amps: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(amps) > 1e-14)
    if nz.size == 0:
        return amps
    first = amps[nz[0]]
    return amps * (abs(first) / first)


def _check_cap(n_qubits: int, cap: int) -> None:
    if n_qubits > cap:
        raise SimulationError(f"{n_qubits} qubits exceeds the simulator cap of {cap}")


def prepare_simplex_state_direct(ctx: FiltrationContext, k: int, eps: float,
                                 qubit_cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Uniform superposition over the order-k simplices present at ``eps``."""
    _check_cap(ctx.n, qubit_cap)
    members = ctx.enumerate_simplices(k, eps)
    if not members:
        raise SimulationError(f"no {k}-simplices at eps={eps}")
    amps = np.zeros(2 ** ctx.n, dtype=complex)
    amps[list(members)] = 1 / math.sqrt(len(members))
    return StateVector(ctx.n, amps)


def grover_prepare(ctx: FiltrationContext, k: int, eps: float, mode: str = "optimal",
                   zeta_threshold: float | None = None, iterations: int | None = None,
                   qubit_cap: int = DEFAULT_QUBIT_CAP) -> GroverRun:
    """Amplitude amplification of the order-k members out of all order-k candidates.

    ``optimal`` runs round(pi / (4 theta) - 1/2) iterations using the known
    member count. ``budget`` runs ceil(zeta_threshold ** -0.5) iterations and
    returns the null result when the final success probability is below 1/2.
    ``fixed`` runs exactly ``iterations``.
    """
    _check_cap(ctx.n, qubit_cap)
    candidates = np.array(ctx.candidates(k), dtype=np.int64)
    members = np.array(ctx.enumerate_simplices(k, eps), dtype=np.int64)
    zeta = members.size / candidates.size

    if mode == "optimal":
        r = optimal_iterations(zeta)
    elif mode == "budget":
        if zeta_threshold is None or not 0 < zeta_threshold <= 1:
            raise SimulationError("budget mode needs 0 < zeta_threshold <= 1")
        r = math.ceil(zeta_threshold ** -0.5)
    elif mode == "fixed":
        if iterations is None or iterations < 0:
            raise SimulationError("fixed mode needs a non-negative iteration count")
        r = iterations
    else:
        raise SimulationError(f"unknown Grover mode {mode!r}")

    size = 2 ** ctx.n
    start = np.zeros(size, dtype=complex)
    start[candidates] = 1 / math.sqrt(candidates.size)
    psi = start.copy()
    for _ in range(r):
        psi[members] *= -1
        psi = 2 * np.vdot(start, psi) * start - psi

    success = float(np.sum(np.abs(psi[members]) ** 2))
    final = StateVector(ctx.n, psi / np.linalg.norm(psi))
    prepared = None
    if members.size and success > 0 and not (mode == "budget" and success < 0.5):
        post = np.zeros(size, dtype=complex)
        post[members] = psi[members] / math.sqrt(success)
        prepared = StateVector(ctx.n, _fix_phase(post))
    return GroverRun(k=k, epsilon=float(eps), zeta=zeta, iterations=r, oracle_calls=r + 1,
                     success_probability=success, prepared=prepared, final_state=final)


def prepare_full_simplex_state(ctx: FiltrationContext, eps: float, zeta_threshold: float = 0.0,
                               qubit_cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Order register ⊗ simplex register, each order branch weighted 1/sqrt(n).

    Branch ``k`` carries the order-k simplex state when it is nonempty and its
    fill fraction reaches ``zeta_threshold``; otherwise it carries the all-zeros
    null result. Amplitude index is ``(k << n) | mask``.
    """
    n = ctx.n
    total = _register_bits(n) + n
    _check_cap(total, qubit_cap)
    amps = np.zeros(2 ** total, dtype=complex)
    branch = 1 / math.sqrt(n)
    for k in range(n):
        members = ctx.enumerate_simplices(k, eps)
        if members and ctx.fill_fraction(k, eps) >= zeta_threshold:
            amps[[(k << n) | m for m in members]] = branch / math.sqrt(len(members))
        else:
            amps[(k << n) | NULL_MASK] = branch
    return StateVector(total, amps)


def populated_orders(ctx: FiltrationContext, eps: float, zeta_threshold: float = 0.0) -> list[int]:
    return [k for k in range(ctx.n)
            if ctx.count(k, eps) and ctx.fill_fraction(k, eps) >= zeta_threshold]


def prepare_filtration_state(ctx: FiltrationContext, grid: ScaleGrid | Sequence[float],
                             zeta_threshold: float = 0.0,
                             qubit_cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Scale register ⊗ full simplex state, each scale branch weighted 1/sqrt(m).

    Amplitude index is ``(i << (order_bits + n)) | (k << n) | mask``.
    """
    scales = grid.scales if isinstance(grid, ScaleGrid) else tuple(grid)
    m = len(scales)
    inner = _register_bits(ctx.n) + ctx.n
    total = _register_bits(m) + inner
    _check_cap(total, qubit_cap)
    amps = np.zeros(2 ** total, dtype=complex)
    for i, eps in enumerate(scales):
        branch = prepare_full_simplex_state(ctx, eps, zeta_threshold, qubit_cap)
        amps[i << inner:(i + 1) << inner] = branch.amplitudes / math.sqrt(m)
    return StateVector(total, amps)


def mixed_simplex_ensemble(ctx: FiltrationContext, k: int, eps: float) -> MixedEnsemble:
    members = ctx.enumerate_simplices(k, eps)
    if not members:
        raise SimulationError(f"no {k}-simplices at eps={eps}")
    return MixedEnsemble(tuple(members), np.full(len(members), 1 / len(members)))


def mixed_full_ensemble(ctx: FiltrationContext, eps: float) -> MixedEnsemble:
    """Uniform over nonempty orders, then uniform over simplices of that order."""
    orders = [k for k in range(ctx.n) if ctx.count(k, eps)]
    members, weights = [], []
    for k in orders:
        simplices = ctx.enumerate_simplices(k, eps)
        members.extend((k, s) for s in simplices)
        weights.extend([1 / (len(orders) * len(simplices))] * len(simplices))
    w = np.array(weights)
    return MixedEnsemble(tuple(members), w / w.sum())


@dataclass(frozen=True)
class Eigensystem:
    values: np.ndarray
    vectors: np.ndarray  # columns

    @classmethod
    def of(cls, op: SparseOperator) -> "Eigensystem":
        if not op.is_symmetric():
            raise SimulationError(f"{op.kind} operator is not symmetric")
        if op.rows == 0:
            return cls(np.zeros(0), np.zeros((0, 0)))
        w, v = np.linalg.eigh(op.dense().astype(float))
        return cls(w, v)

    def zero_tolerance(self) -> float:
        scale = float(np.abs(self.values).max()) if self.values.size else 0.0
        return _ZERO_RTOL * max(1.0, scale)

    def smallest_nonzero(self) -> float | None:
        mags = np.abs(self.values)
        nz = mags[mags > self.zero_tolerance()]
        return float(nz.min()) if nz.size else None


def _input_weights(op: SparseOperator, source: MixedEnsemble | StateVector):
    """Either (row indices, weights) for an ensemble or an amplitude vector in op's basis."""
    basis = op.row_basis
    if isinstance(source, MixedEnsemble):
        idx = []
        for m in source.masks():
            i = basis.index_of.get(m)
            if i is None:
                raise SimulationError(f"ensemble member {m:#x} is not in the {op.kind} basis")
            idx.append(i)
        return np.array(idx, dtype=np.int64), source.weights
    amps = source.amplitudes
    vec = np.zeros(len(basis), dtype=complex)
    for i, m in enumerate(basis.masks):
        if m < amps.size:
            vec[i] = amps[m]
    outside = 1.0 - float(np.vdot(vec, vec).real)
    if outside > NORM_ATOL:
        raise SimulationError(f"state has weight {outside:.3g} outside the {op.kind} basis")
    return vec


def spectral_distribution(op: SparseOperator, source: MixedEnsemble | StateVector,
                          delta: float, eig: Eigensystem | None = None) -> dict[int, float]:
    """Exact bin probabilities that :func:`spectral_sample` draws from."""
    if delta <= 0:
        raise SimulationError("bin width delta must be positive")
    eig = eig or Eigensystem.of(op)
    bins = np.array([bin_index(v, delta) for v in eig.values], dtype=np.int64)
    w = _input_weights(op, source)
    if isinstance(w, tuple):
        idx, weights = w
        p_eig = weights @ (eig.vectors[idx] ** 2)
    else:
        p_eig = np.abs(eig.vectors.T @ w) ** 2
    out: dict[int, float] = {}
    for b, p in zip(bins.tolist(), p_eig.tolist()):
        out[b] = out.get(b, 0.0) + p
    return dict(sorted(out.items()))


def spectral_sample(op: SparseOperator, source: MixedEnsemble | StateVector, delta: float,
                    samples: int, seed: int, eig: Eigensystem | None = None) -> SpectralHistogram:
    """Emulate phase estimation of ``op`` on ``source``, ``samples`` times.

    For an ensemble each shot draws a member by weight, then an eigenvector with
    probability equal to the squared projection of that member onto it.
    """
    if delta <= 0:
        raise SimulationError("bin width delta must be positive")
    if samples < 1:
        raise SimulationError("sample count must be at least 1")
    eig = eig or Eigensystem.of(op)
    bins = np.array([bin_index(v, delta) for v in eig.values], dtype=np.int64)
    rng = np.random.default_rng(seed)
    w = _input_weights(op, source)
    eig_counts = np.zeros(eig.values.size, dtype=np.int64)
    if isinstance(w, tuple):
        idx, weights = w
        per_member = rng.multinomial(samples, weights)
        for i, c in zip(idx.tolist(), per_member.tolist()):
            if c:
                p = eig.vectors[i] ** 2
                eig_counts += rng.multinomial(c, p / p.sum())
    else:
        p = np.abs(eig.vectors.T @ w) ** 2
        eig_counts += rng.multinomial(samples, p / p.sum())
    counts: dict[int, int] = {}
    for b, c in zip(bins.tolist(), eig_counts.tolist()):
        if c:
            counts[b] = counts.get(b, 0) + c
    return SpectralHistogram(bin_width=float(delta), bins=dict(sorted(counts.items())),
                             total=int(samples), seed=int(seed), operator=op.kind,
                             k=op.k, epsilon=op.epsilon)


def _gap_warning(eig: Eigensystem, delta: float, label: str) -> list[str]:
    gap = eig.smallest_nonzero()
    if gap is not None and not delta < gap / 2:
        return [f"{label}: delta={delta:g} is not below half the smallest nonzero "
                f"eigenvalue magnitude {gap:.6g}; the zero bin may not isolate the kernel"]
    return []


def _binomial_se(p: float, samples: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / samples)


@dataclass(frozen=True)
class KernelFractionEstimate:
    k: int
    epsilon: float
    eta: float
    std_error: float
    samples: int
    seed: int
    operator: str
    histogram: SpectralHistogram
    warnings: tuple[str, ...] = ()

    @property
    def degenerate(self) -> bool:
        return self.samples == 1

    def __iter__(self):
        return iter((self.eta, self.std_error))


def estimate_kernel_fraction(ctx: FiltrationContext, k: int, eps: float, delta: float,
                             samples: int, seed: int) -> KernelFractionEstimate:
    """Zero-bin fraction of phase estimation on the uniform order-k ensemble.

    For k >= 1 the operator is the pair embedding of the order-k boundary, whose
    zero-bin mass on the order-k block is dim Ker / |S_k|. Order 0 has no
    boundary below it, so there the Laplacian's zero-bin mass is returned.
    """
    ens = mixed_simplex_ensemble(ctx, k, eps)
    op = dirac_pair(ctx, k, eps) if k >= 1 else laplacian(ctx, 0, eps)
    eig = Eigensystem.of(op)
    hist = spectral_sample(op, ens, delta, samples, seed, eig=eig)
    eta = hist.zero_count / samples
    warns = tuple(_gap_warning(eig, delta, f"{op.kind} k={k} eps={eps:g}"))
    return KernelFractionEstimate(k=k, epsilon=float(eps), eta=eta,
                                  std_error=_binomial_se(eta, samples), samples=samples,
                                  seed=seed, operator=op.kind, histogram=hist, warnings=warns)


@dataclass(frozen=True)
class BettiEstimate:
    k: int
    epsilon: float
    estimator: str
    value: float
    std_error: float
    ci95: tuple[float, float]
    samples: int
    seed: int
    warnings: tuple[str, ...] = ()
    kernel_fractions: tuple[KernelFractionEstimate, ...] = ()

    @property
    def nearest_integer(self) -> int:
        return int(round(self.value))

    def covers(self, truth: float) -> bool:
        lo, hi = self.ci95
        # tolerance absorbs float noise in an exact, zero-width interval
        return lo - 1e-9 <= truth <= hi + 1e-9


def estimate_betti(ctx: FiltrationContext, k: int, eps: float, delta: float, samples: int,
                   seed: int, estimator: str = "boundary") -> BettiEstimate:
    """Betti number estimate with a normal-approximation 95% interval.

    ``boundary`` combines kernel fractions of orders k and k+1 via
    dim Ker_k + dim Ker_{k+1} - |S_{k+1}|; ``hodge`` scales the Laplacian's
    zero-bin fraction by |S_k|.
    """
    size = ctx.count(k, eps) if 0 <= k < ctx.n else 0
    if size == 0:
        raise SimulationError(f"no {k}-simplices at eps={eps}")

    if estimator == "hodge":
        op = laplacian(ctx, k, eps)
        eig = Eigensystem.of(op)
        sub = derive_seed(seed, "hodge", k)
        hist = spectral_sample(op, mixed_simplex_ensemble(ctx, k, eps), delta, samples, sub, eig=eig)
        p = hist.zero_count / samples
        value = p * size
        se = size * _binomial_se(p, samples)
        warns = tuple(_gap_warning(eig, delta, f"laplacian k={k} eps={eps:g}"))
        kf = KernelFractionEstimate(k=k, epsilon=float(eps), eta=p, std_error=se / size,
                                    samples=samples, seed=sub, operator=op.kind,
                                    histogram=hist, warnings=warns)
        fractions = (kf,)
    elif estimator == "boundary":
        fractions = []
        if k >= 1:
            low = estimate_kernel_fraction(ctx, k, eps, delta, samples, derive_seed(seed, "boundary", k))
            fractions.append(low)
            ker, var = low.eta * size, (size * low.std_error) ** 2
        else:
            ker, var = float(size), 0.0
        size_up = ctx.count(k + 1, eps) if k + 1 < ctx.n else 0
        if size_up:
            up = estimate_kernel_fraction(ctx, k + 1, eps, delta, samples,
                                          derive_seed(seed, "boundary", k + 1))
            fractions.append(up)
            ker_up, var = up.eta * size_up, var + (size_up * up.std_error) ** 2
        else:
            ker_up = 0.0
        value = ker + ker_up - size_up
        se = math.sqrt(var)
        warns = tuple(w for f in fractions for w in f.warnings)
        fractions = tuple(fractions)
    else:
        raise SimulationError(f"unknown estimator {estimator!r}")

    return BettiEstimate(k=k, epsilon=float(eps), estimator=estimator, value=value,
                         std_error=se, ci95=(value - Z95 * se, value + Z95 * se),
                         samples=samples, seed=seed, warnings=warns, kernel_fractions=fractions)


@dataclass(frozen=True)
class EigenspaceEstimate:
    center: float
    dimension: float
    std_error: float


@dataclass(frozen=True)
class LaplacianSpectrum:
    k: int
    n_simplices: int
    histogram: SpectralHistogram
    estimates: tuple[EigenspaceEstimate, ...]
    warnings: tuple[str, ...] = field(default=())


def laplacian_spectrum_report(ctx: FiltrationContext, eps: float, delta: float, samples: int,
                              seed: int) -> list[LaplacianSpectrum]:
    """Per nonempty order: sampled Laplacian spectrum and eigenspace dimension estimates."""
    out = []
    for k in range(ctx.n):
        size = ctx.count(k, eps)
        if not size:
            continue
        op = laplacian(ctx, k, eps)
        eig = Eigensystem.of(op)
        hist = spectral_sample(op, mixed_simplex_ensemble(ctx, k, eps), delta, samples,
                               derive_seed(seed, "spectrum", k), eig=eig)
        ests = []
        for j, c in sorted(hist.bins.items()):
            p = c / samples
            ests.append(EigenspaceEstimate(hist.center(j), p * size, size * _binomial_se(p, samples)))
        warns = tuple(_gap_warning(eig, delta, f"laplacian k={k} eps={eps:g}"))
        out.append(LaplacianSpectrum(k, size, hist, tuple(ests), warns))
    return out


def dirac_spectrum(ctx: FiltrationContext, eps: float, delta: float, samples: int,
                   seed: int) -> SpectralHistogram:
    """Phase-estimation histogram of the full Dirac operator on the full mixture."""
    return spectral_sample(dirac_full(ctx, eps), mixed_full_ensemble(ctx, eps), delta, samples, seed)
