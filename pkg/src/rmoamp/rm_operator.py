"""Joint random-multiplexing-and-compression operator.

The operator chains four stages: a diagonal random sign flip, an orthonormal
DCT, a random permutation, and a row selection.  The first three stages form
an orthogonal scrambling transform; the selection keeps ``m`` of the ``n``
scrambled coefficients, giving compression ratio ``m / n``.  Because the
scrambling is orthogonal, the zero-filled inverse (scatter the ``m`` received
coefficients back to their slots, then undo the scrambling) is the
Moore-Penrose pseudo-inverse of the forward map, and i.i.d. Gaussian noise
stays i.i.d. Gaussian through it.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct as _dct, idct as _idct

from .errors import InvalidDimensionError

__all__ = [
    "RmOperator",
    "build_rm_operator",
    "rm_forward",
    "rm_inverse",
    "dct_transform",
]


@dataclass(frozen=True)
class RmOperator:
    """Seeded factorization of the multiplexing-and-compression map.

    The forward map applied to a length-``n`` vector ``s`` is

        select( permute( dct( signs * s ) ) )

    and is fully determined by ``(n, m, seed)``: the factors are regenerated
    bit-identically from the seed.  Instances are immutable and safe to share
    across workers.

    Attributes:
        n: source dimension.
        m: compressed dimension, ``1 <= m <= n``.
        seed: 64-bit seed the factors were drawn from.
        signs: length-``n`` vector of +-1 (the diagonal sign stage).
        perm: length-``n`` permutation; stage output ``i`` reads scrambled
            coefficient ``perm[i]``.
        selection: strictly increasing length-``m`` index list of the kept
            coefficients.
    """

    n: int
    m: int
    seed: int
    signs: np.ndarray
    perm: np.ndarray
    selection: np.ndarray
    # composite index: position of kept coefficient j in the DCT output
    _gather: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_gather", self.perm[self.selection])

    @property
    def compression_ratio(self):
        return self.m / self.n

    def forward(self, s):
        return rm_forward(self, s)

    def inverse(self, x):
        return rm_inverse(self, x)

    def to_descriptor(self):
        """Small text record from which the operator can be regenerated."""
        return f"rmop n={self.n} m={self.m} seed={self.seed}"

    @classmethod
    def from_descriptor(cls, text):
        fields = dict(tok.split("=", 1) for tok in text.split()[1:])
        return build_rm_operator(int(fields["n"]), int(fields["m"]),
                                 int(fields["seed"]))


def build_rm_operator(n, m, seed):
    """Draw the operator factors from one seeded counter-based generator.

    Draw order is fixed and documented: signs first, then the permutation
    (Fisher-Yates shuffle), then the selection (full shuffle truncated to
    ``m`` entries, sorted).  Philox is counter-based, so identical seeds give
    bit-identical operators on every platform.

    Raises:
        InvalidDimensionError: if not ``1 <= m <= n``.
    """
    if m < 1 or m > n:
        raise InvalidDimensionError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.Generator(np.random.Philox(seed))
    signs = rng.integers(0, 2, size=n) * 2 - 1
    perm = rng.permutation(n)
    selection = np.sort(rng.permutation(n)[:m])
    return RmOperator(n=int(n), m=int(m), seed=int(seed),
                      signs=signs.astype(np.float64), perm=perm,
                      selection=selection)


def rm_forward(op, s):
    """Apply the compression map: signs, DCT, permutation, selection.

    O(n log n) via the fast DCT.  Raises InvalidDimensionError on a length
    mismatch.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (op.n,):
        raise InvalidDimensionError(
            f"expected length-{op.n} source vector, got shape {s.shape}")
    u = dct_transform(op.signs * s)
    return u[op._gather]


def rm_inverse(op, x):
    """Apply the zero-filled inverse: scatter, unpermute, inverse DCT, signs.

    For the orthonormal-row forward map this equals the Moore-Penrose
    pseudo-inverse; at ``m == n`` it is the exact inverse.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.m,):
        raise InvalidDimensionError(
            f"expected length-{op.m} compressed vector, got shape {x.shape}")
    u = np.zeros(op.n)
    u[op._gather] = x
    return op.signs * dct_transform(u, inverse=True)


def dct_transform(v, inverse=False):
    """Orthonormal DCT-II (forward) / DCT-III (inverse).

    Normalization is ``norm='ortho'``: the first basis vector is weighted
    1/sqrt(n) and the rest sqrt(2/n), so the transform matrix is exactly
    orthogonal and forward followed by inverse is the identity.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidDimensionError("dct_transform expects a nonempty 1-D vector")
    if inverse:
        return _idct(v, type=2, norm="ortho")
    return _dct(v, type=2, norm="ortho")
