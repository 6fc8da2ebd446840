"""Dense float64 numerics underpinning the motion models.

Provides checked matrix products, the orthonormal frequency basis used for
trajectory encoding, modified Gram-Schmidt orthonormalization together with
its exact reverse-mode gradient, a counter-based deterministic RNG, and a
central-finite-difference gradient checker. Everything operates on plain
numpy float64 arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, EvaluationError, ShapeError

DEGENERACY_TOL = 1e-10

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def as_tensor(x, name: str = "tensor") -> np.ndarray:
    """Coerce to a contiguous float64 array, rejecting non-finite entries."""
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def ensure_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if arr.size and not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{what} produced non-finite values")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with explicit shape checking.

    Follows numpy semantics for 1-D operands and broadcasts over leading
    batch dimensions. Raises ShapeError naming both shapes when the inner
    dimensions disagree.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[-2] if b.ndim >= 2 else b.shape[0]
    if inner_a != inner_b:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return ensure_finite(a @ b, "matmul")


@dataclass(frozen=True)
class DctBasis:
    """Orthonormal type-II cosine basis over a fixed frame count.

    ``forward`` has orthonormal rows, so ``inverse`` is simply its
    transpose and truncating to the first ``retained`` rows is an
    orthogonal projection onto the low-frequency subspace.
    """

    total_length: int
    retained: int
    forward: np.ndarray
    inverse: np.ndarray


def dct_basis(total_length: int, retained: int | None = None) -> DctBasis:
    """Build the orthonormal cosine basis for sequences of ``total_length`` frames."""
    if total_length < 2:
        raise ValueError(f"total_length must be >= 2, got {total_length}")
    if retained is None:
        retained = total_length
    if not 1 <= retained <= total_length:
        raise ValueError(f"retained must be in [1, {total_length}], got {retained}")
    t = np.arange(total_length, dtype=np.float64)
    k = np.arange(total_length, dtype=np.float64)
    scale = np.sqrt(np.where(k == 0, 1.0, 2.0) / total_length)
    forward = scale[:, None] * np.cos(
        np.pi * (2.0 * t[None, :] + 1.0) * k[:, None] / (2.0 * total_length)
    )
    return DctBasis(
        total_length=total_length,
        retained=retained,
        forward=forward,
        inverse=forward.T.copy(),
    )


def dct_forward(basis: DctBasis, frames: np.ndarray, retained: int | None = None) -> np.ndarray:
    """Project frames (time on axis 0) onto the first ``retained`` frequency rows."""
    n = basis.retained if retained is None else retained
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[0] != basis.total_length:
        raise ShapeError(
            f"expected {basis.total_length} frames on axis 0, got {frames.shape}"
        )
    return np.tensordot(basis.forward[:n], frames, axes=(1, 0))


def dct_inverse(basis: DctBasis, coeffs: np.ndarray) -> np.ndarray:
    """Reconstruct a time-domain signal from leading frequency coefficients."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = coeffs.shape[0]
    if n > basis.total_length:
        raise ShapeError(f"{n} coefficient rows exceed basis length {basis.total_length}")
    return np.tensordot(basis.inverse[:, :n], coeffs, axes=(1, 0))


def orthonormalize(d: np.ndarray) -> np.ndarray:
    """Row-orthonormalize ``d`` (M x C, M <= C) preserving its row space."""
    e, _ = orthonormalize_fwd(d)
    return e


def orthonormalize_fwd(d: np.ndarray):
    """Modified Gram-Schmidt, returning the result plus a cache for the backward pass."""
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {d.shape}")
    m, c = d.shape
    if m > c:
        raise ShapeError(f"need rows <= columns to orthonormalize, got shape {d.shape}")
    e = np.zeros_like(d)
    chains: list[list[np.ndarray]] = []
    coeffs: list[list[float]] = []
    norms = np.zeros(m)
    for i in range(m):
        u = d[i].copy()
        chain = [u.copy()]
        cs: list[float] = []
        for j in range(i):
            cij = float(e[j] @ u)
            u -= cij * e[j]
            cs.append(cij)
            chain.append(u.copy())
        n = float(np.linalg.norm(u))
        if n < DEGENERACY_TOL:
            raise DegeneracyError(
                f"row {i} is numerically dependent on earlier rows (residual norm {n:.3e})"
            )
        norms[i] = n
        e[i] = u / n
        chains.append(chain)
        coeffs.append(cs)
    return e, (e.copy(), chains, coeffs, norms)


def orthonormalize_backward(g_e: np.ndarray, cache) -> np.ndarray:
    """Reverse-mode gradient of ``orthonormalize_fwd`` w.r.t. the raw matrix."""
    e, chains, coeffs, norms = cache
    m = e.shape[0]
    g_e = np.array(g_e, dtype=np.float64, copy=True)
    g_d = np.zeros_like(e)
    for i in reversed(range(m)):
        u_final = chains[i][-1]
        n = norms[i]
        ei = u_final / n
        # e_i = u / ||u||  =>  g_u = (g - (g.e_i) e_i) / ||u||
        g = (g_e[i] - float(g_e[i] @ ei) * ei) / n
        for j in reversed(range(i)):
            u_before = chains[i][j]
            cij = coeffs[i][j]
            ge = float(g @ e[j])
            # u_after = u_before - (e_j . u_before) e_j
            g_e[j] += -ge * u_before - cij * g
            g = g - ge * e[j]
        g_d[i] = g
    return g_d


class Rng:
    """Deterministic counter-based random stream.

    Each output word is the splitmix64 finalizer applied to
    ``seed + index * golden_ratio``, so the stream depends only on
    (seed, counter) and is identical wherever IEEE-754 doubles behave the
    same. ``derive`` spawns statistically independent child streams.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = int(counter)

    def _raw(self, n: int) -> np.ndarray:
        start = self.counter + 1
        self.counter += n
        idx = np.arange(start, start + n, dtype=np.uint64)
        x = (np.uint64(self.seed) + idx * np.uint64(_GOLDEN)) & np.uint64(_MASK64)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))

    def uniform(self, shape=()) -> np.ndarray:
        """I.i.d. uniforms on [0, 1)."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return u.reshape(shape) if shape else np.float64(u[0])

    def normal(self, shape=()) -> np.ndarray:
        """I.i.d. standard normals via Box-Muller on counter pairs."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if n == 0:
            return np.zeros(shape)
        pairs = (n + 1) // 2
        words = self._raw(2 * pairs)
        # u1 in (0, 1] keeps the log finite
        u1 = ((words[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (words[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape) if shape else np.float64(z[0])

    def randint(self, upper: int) -> int:
        """Uniform integer in [0, upper)."""
        if upper <= 0:
            raise ValueError(f"upper must be positive, got {upper}")
        return min(int(float(self.uniform()) * upper), upper - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform((n,)), kind="stable")

    def derive(self, label: int) -> "Rng":
        """Independent child stream keyed by ``label``; does not consume this stream."""
        x = (self.seed ^ ((int(label) + 1) * _GOLDEN)) & _MASK64
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
        return Rng(x ^ (x >> 31))

    def state(self) -> dict:
        return {"seed": self.seed, "counter": self.counter}

    @classmethod
    def from_state(cls, state: dict) -> "Rng":
        return cls(state["seed"], state["counter"])


def gaussian(rng: Rng, shape) -> np.ndarray:
    """Standard normal tensor of the given shape, drawn from ``rng``."""
    shape = (shape,) if isinstance(shape, int) else tuple(int(s) for s in shape)
    if any(s < 0 for s in shape):
        raise ValueError(f"invalid shape {shape}")
    out = rng.normal(shape)
    return np.asarray(out, dtype=np.float64)


def grad_check(f, params: np.ndarray, epsilon: float = 1e-5, value_fn=None) -> float:
    """Compare the analytic gradient of ``f`` against central differences.

    ``f(params)`` must return ``(value, grad)`` with ``grad`` matching the
    shape of ``params``. ``value_fn``, when given, is used for the probe
    evaluations (value only), which halves the cost when gradients are
    expensive. Returns the max over coordinates of
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    if not 0.0 < epsilon <= 1e-2:
        raise ValueError(f"epsilon must be in (0, 1e-2], got {epsilon}")
    params = np.asarray(params, dtype=np.float64)
    value, grad = f(params)
    if not math.isfinite(float(value)):
        raise EvaluationError("objective is non-finite at the base point")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape:
        raise ShapeError(f"gradient shape {grad.shape} != params shape {params.shape}")
    probe = value_fn if value_fn is not None else (lambda p: f(p)[0])
    worst = 0.0
    flat = params.ravel()
    for i in range(flat.size):
        saved = flat[i]
        work = params.copy()
        wflat = work.ravel()
        wflat[i] = saved + epsilon
        f_plus = float(probe(work))
        wflat[i] = saved - epsilon
        f_minus = float(probe(work))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise EvaluationError(f"objective is non-finite near coordinate {i}")
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        analytic = float(grad.ravel()[i])
        rel = abs(analytic - numeric) / max(1.0, abs(numeric))
        worst = max(worst, rel)
    return worst
