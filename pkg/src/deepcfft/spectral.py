"""FFT-backed block-Hankel operators.

A depth-``L`` block Hankel matrix built from a length-``N`` sequence of
d-vectors embeds, after reversing its block rows, into an ``N x N``
block-circulant matrix that the DFT diagonalizes.  Products with the Hankel
matrix and its transpose then cost ``O(N d log N)`` time and ``O(N d)``
memory; the matrix itself is never materialized.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

# Refuse to build dense matrices beyond this many entries unless overridden.
DENSE_ENTRY_GUARD = 10**7

_REAL_RESIDUE_TOL = 1e-12


class DftProvider:
    """Length-N discrete Fourier transforms plus their d-channel block form.

    The block transforms apply the length-N DFT independently to each of the
    d columns of an (N, d) array, i.e. they realize the Kronecker product of
    the Fourier matrix with the d-dimensional identity.
    """

    def forward(self, v: np.ndarray) -> np.ndarray:
        return np.fft.fft(v)

    def inverse(self, v: np.ndarray) -> np.ndarray:
        return np.fft.ifft(v)

    def block_forward(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.fft(arr, axis=0)

    def block_inverse(self, arr: np.ndarray) -> np.ndarray:
        return np.fft.ifft(arr, axis=0)


_DEFAULT_DFT = DftProvider()


@dataclass(frozen=True)
class SpectralHankelOperator:
    """Matrix-free depth-L block Hankel operator over a length-N generator.

    Attributes:
        signal: generator as an (N, d) array; row k is the d-vector w_k.
        depth: number of block rows L.
        block_spectrum: (N, d) complex array; row k is the block eigenvalue
            of the circulant embedding at frequency k.
        row_dim: d * L.
        col_dim: N - L + 1.
    """

    signal: np.ndarray
    depth: int
    block_spectrum: np.ndarray
    row_dim: int
    col_dim: int
    dft: DftProvider = field(default=_DEFAULT_DFT, repr=False, compare=False)
    # Per-thread transform workspace; avoids a large temporary per product
    # while keeping concurrent matvecs on a shared operator safe.
    _scratch: threading.local = field(
        default_factory=threading.local, repr=False, compare=False
    )

    def _workspace(self) -> np.ndarray:
        buf = getattr(self._scratch, "buf", None)
        if buf is None:
            buf = np.empty((self.length, self.block_size), dtype=complex)
            self._scratch.buf = buf
        return buf

    @property
    def length(self) -> int:
        return self.signal.shape[0]

    @property
    def block_size(self) -> int:
        return self.signal.shape[1]

    @property
    def storage_bytes(self) -> int:
        """Bytes held in the generator and its spectrum (the O(N d) claim)."""
        return self.signal.nbytes + self.block_spectrum.nbytes


def _as_blocks(signal) -> np.ndarray:
    arr = np.asarray(signal, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"signal must be 1-D or 2-D, got shape {arr.shape}")
    return arr


def _take_real(arr: np.ndarray, scale: float | None = None) -> np.ndarray:
    # All inputs are real, so the imaginary part is pure round-off; assert
    # the residue is negligible before dropping it.  The reference scale is
    # the full pre-truncation computation: the kept slice can cancel to pure
    # round-off (e.g. a direction near the null space) while the discarded
    # blocks still carry the computation's true magnitude.
    if scale is None:
        scale = float(np.linalg.norm(arr))
    if np.linalg.norm(arr.imag) > _REAL_RESIDUE_TOL * scale:
        raise ArithmeticError("imaginary residue above round-off tolerance")
    return np.ascontiguousarray(arr.real)


def build_operator(signal, depth: int, dft: DftProvider | None = None) -> SpectralHankelOperator:
    """Builds the spectral Hankel operator for a generator and a depth.

    One block DFT of the rotated generator (w_{L-1},...,w_{N-1},w_0,...,w_{L-2})
    yields the spectrum of the circulant embedding; every later product reuses
    it.  No dense matrix is allocated.

    Args:
        signal: length-N sequence of d-vectors (array-like, (N,) or (N, d)).
        depth: block depth L, 1 <= L <= N.
        dft: transform provider; defaults to the module-wide one.

    Raises:
        ValueError: if depth is out of range.
    """
    w = _as_blocks(signal)
    n_len = w.shape[0]
    if not 1 <= depth <= n_len:
        raise ValueError(f"depth must lie in [1, {n_len}], got {depth}")
    dft = dft or _DEFAULT_DFT
    rotated = np.roll(w, -(depth - 1), axis=0)
    spectrum = dft.block_forward(rotated)
    return SpectralHankelOperator(
        signal=w,
        depth=depth,
        block_spectrum=spectrum,
        row_dim=w.shape[1] * depth,
        col_dim=n_len - depth + 1,
        dft=dft,
    )


def forward_blocks(op: SpectralHankelOperator, z: np.ndarray) -> np.ndarray:
    """H z, returned as (L, d) blocks instead of the flattened (dL,) vector."""
    if z.shape != (op.col_dim,):
        raise ValueError(f"expected shape ({op.col_dim},), got {z.shape}")
    n_len, depth = op.length, op.depth
    v = np.zeros(n_len, dtype=complex)
    v[: op.col_dim] = z
    # Circulant product in the frequency domain: scale each frequency's block
    # eigenvalue by the transformed coefficient, transform back per channel.
    scaled = op._workspace()
    np.multiply(op.block_spectrum, op.dft.inverse(v)[:, None], out=scaled)
    full = op.dft.block_forward(scaled)
    # The embedding produces the Hankel rows in reversed block order.
    return _take_real(full[:depth][::-1], scale=float(np.linalg.norm(full)))


def reverse_blocks(op: SpectralHankelOperator, blocks: np.ndarray) -> np.ndarray:
    """H^T y for y given as (L, d) blocks."""
    n_len, depth = op.length, op.depth
    if blocks.shape != (depth, op.block_size):
        raise ValueError(f"expected shape ({depth}, {op.block_size}), got {blocks.shape}")
    padded = op._workspace()
    padded[:depth] = blocks[::-1]
    padded[depth:] = 0.0
    # Adjoint of the forward pipeline: the transpose of the circulant embeds
    # as the conjugate spectrum acting frequency-wise on the block transform.
    transformed = op.dft.block_forward(padded)
    np.multiply(transformed, op.block_spectrum, out=transformed)
    spectral = transformed.sum(axis=1)
    full = op.dft.inverse(spectral)
    return _take_real(full[: op.col_dim], scale=float(np.linalg.norm(full)))


def hankel_matvec(op: SpectralHankelOperator, z) -> np.ndarray:
    """H_L(w_N) z without materializing the matrix.

    Args:
        op: built operator.
        z: vector of length col_dim = N - L + 1.

    Returns:
        The (dL,) product, ordered as the stacked blocks w-row 0 .. L-1.
    """
    z = np.asarray(z, dtype=float)
    return forward_blocks(op, z).reshape(-1)


def hankel_rmatvec(op: SpectralHankelOperator, y) -> np.ndarray:
    """H_L(w_N)^T y via the adjoint spectral pipeline.

    Args:
        op: built operator.
        y: vector of length row_dim = d * L.

    Returns:
        The (N - L + 1,) product.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (op.row_dim,):
        raise ValueError(f"expected shape ({op.row_dim},), got {y.shape}")
    return reverse_blocks(op, y.reshape(op.depth, op.block_size))


def dense_hankel(signal, depth: int, allow_large: bool = False) -> np.ndarray:
    """Dense depth-L block Hankel matrix; testing oracle and rank diagnostics.

    Entry block (i, j) is w_{i+j}.  Guarded against accidental large
    allocations: refuses more than 10^7 entries unless allow_large is set.
    """
    w = _as_blocks(signal)
    n_len, d = w.shape
    if not 1 <= depth <= n_len:
        raise ValueError(f"depth must lie in [1, {n_len}], got {depth}")
    cols = n_len - depth + 1
    if d * depth * cols > DENSE_ENTRY_GUARD and not allow_large:
        raise ValueError(
            f"dense Hankel would hold {d * depth * cols} entries; "
            "pass allow_large=True to override"
        )
    out = np.empty((d * depth, cols))
    for i in range(depth):
        out[i * d : (i + 1) * d, :] = w[i : i + cols].T
    return out


def next_smooth_length(minimum: int, largest_prime: int = 7) -> int:
    """Smallest integer >= minimum whose prime factors are all <= largest_prime.

    FFTs run fastest on such lengths; generators are padded up to one.
    """
    if largest_prime < 2:
        raise ValueError("largest_prime must be at least 2")
    if minimum < 1:
        raise ValueError("minimum must be positive")
    primes = [p for p in range(2, largest_prime + 1) if all(p % q for q in range(2, p))]
    candidate = minimum
    while True:
        rem = candidate
        for p in primes:
            while rem % p == 0:
                rem //= p
        if rem == 1:
            return candidate
        candidate += 1
