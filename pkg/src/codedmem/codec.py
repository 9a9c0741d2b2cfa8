"""(n, k) MDS erasure coding over GF(2^8).

Values are byte strings. A value is zero-padded to a multiple of ``k``,
split into ``k`` equal stripes, and each of the ``n`` coded elements is a
GF(256)-linear combination of the stripes given by one row of the
generator matrix. Any ``k`` rows of the generator are linearly
independent, so any ``k`` coded elements recover the value.

Three constructions are available:

* ``"rs"``: systematic Reed-Solomon, built from a Vandermonde matrix on
  the evaluation points 0..n-1 (for k=1 this is plain replication);
* ``"parity"``: the single-parity code, only for k = n-1;
* ``"replication"``: every element is the whole value, only for k = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InsufficientShares, MalformedShares

PRIMITIVE_POLY = 0x11D
FIELD_SIZE = 256
MAX_N = 255


def _build_tables():
    exp = [0] * 512
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    for i in range(255, 512):
        exp[i] = exp[i - 255]
    return exp, log


_EXP, _LOG = _build_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return _EXP[255 - _LOG[a]]


def gf_pow(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return _EXP[(_LOG[a] * e) % 255]


# MUL_TABLE[a, b] = a*b in GF(256); row lookups vectorise stripe scaling.
MUL_TABLE = np.array(
    [[gf_mul(a, b) for b in range(256)] for a in range(256)], dtype=np.uint8
)


def mat_mul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = 0
            for t in range(inner):
                acc ^= gf_mul(a[i][t], b[t][j])
            row.append(acc)
        out.append(row)
    return out


def mat_inv(m):
    """Invert a square matrix over GF(256) by Gauss-Jordan elimination."""
    size = len(m)
    aug = [list(row) + [int(i == j) for j in range(size)] for i, row in enumerate(m)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if aug[r][col]), None)
        if pivot is None:
            raise MalformedShares("singular generator submatrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        scale = gf_inv(aug[col][col])
        aug[col] = [gf_mul(v, scale) for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col]:
                factor = aug[r][col]
                aug[r] = [v ^ gf_mul(factor, p) for v, p in zip(aug[r], aug[col])]
    return [row[size:] for row in aug]


@dataclass(frozen=True)
class CodecParams:
    n: int
    k: int
    construction: str = "rs"

    def __post_init__(self):
        if not isinstance(self.n, int) or not isinstance(self.k, int):
            raise ConfigError("n and k must be integers", "codec")
        if self.n > MAX_N:
            raise ConfigError(f"n={self.n} exceeds the GF(256) limit of {MAX_N}", "n")
        if not 1 <= self.k < self.n:
            raise ConfigError(f"need 1 <= k < n, got n={self.n}, k={self.k}", "k")
        if self.construction == "parity" and self.k != self.n - 1:
            raise ConfigError("parity construction requires k = n-1", "construction")
        if self.construction == "replication" and self.k != 1:
            raise ConfigError("replication construction requires k = 1", "construction")
        if self.construction not in ("rs", "parity", "replication"):
            raise ConfigError(f"unknown construction {self.construction!r}", "construction")

    @property
    def element_cost(self) -> Fraction:
        """Size of one coded element, in units of one value."""
        return Fraction(1, self.k)


@dataclass(frozen=True)
class CodedElement:
    index: int  # 1-based coordinate
    data: bytes
    k: int

    @property
    def cost(self) -> Fraction:
        return Fraction(1, self.k)

    def __repr__(self):
        return f"CodedElement({self.index}, {self.data.hex()}, k={self.k})"


@lru_cache(maxsize=None)
def generator_matrix(params: CodecParams) -> tuple[tuple[int, ...], ...]:
    n, k = params.n, params.k
    if params.construction == "replication":
        return tuple((1,) for _ in range(n))
    if params.construction == "parity":
        rows = [tuple(int(i == j) for j in range(k)) for i in range(k)]
        rows.append(tuple(1 for _ in range(k)))
        return tuple(rows)
    vander = [[gf_pow(x, j) for j in range(k)] for x in range(n)]
    top_inv = mat_inv(vander[:k])
    return tuple(tuple(row) for row in mat_mul(vander, top_inv))


@lru_cache(maxsize=4096)
def _decoding_matrix(params: CodecParams, indices: tuple[int, ...]):
    gen = generator_matrix(params)
    return mat_inv([list(gen[i - 1]) for i in indices])


def padded_length(length: int, k: int) -> int:
    return -(-length // k) * k


def pad(raw: bytes, k: int) -> bytes:
    """Zero-pad ``raw`` to the next multiple of ``k`` bytes."""
    return bytes(raw) + b"\x00" * (padded_length(len(raw), k) - len(raw))


def unpad(value: bytes, length: int) -> bytes:
    return bytes(value[:length])


def _combine(coeff_rows, stripes: np.ndarray) -> np.ndarray:
    out = np.zeros((len(coeff_rows), stripes.shape[1]), dtype=np.uint8)
    for i, row in enumerate(coeff_rows):
        acc = out[i]
        for c, stripe in zip(row, stripes):
            if c == 1:
                acc ^= stripe
            elif c:
                acc ^= MUL_TABLE[c][stripe]
    return out


def encode(value: bytes, params: CodecParams) -> list[CodedElement]:
    """Encode ``value`` into ``params.n`` coded elements (indices 1..n)."""
    padded = pad(value, params.k)
    if not padded:
        raise MalformedShares("cannot encode an empty value")
    stripes = np.frombuffer(padded, dtype=np.uint8).reshape(params.k, -1)
    coded = _combine(generator_matrix(params), stripes)
    return [CodedElement(i + 1, coded[i].tobytes(), params.k) for i in range(params.n)]


def decode(elements, params: CodecParams, length: int | None = None) -> bytes:
    """Recover the value from at least ``k`` coded elements.

    With more than ``k`` elements the ``k`` lowest indices are used. If
    ``length`` is given the padding is stripped.
    """
    elements = list(elements)
    by_index = {}
    for el in elements:
        if not 1 <= el.index <= params.n:
            raise MalformedShares(f"index {el.index} outside 1..{params.n}")
        if el.index in by_index:
            raise MalformedShares(f"duplicate index {el.index}")
        by_index[el.index] = el
    if len(by_index) < params.k:
        raise InsufficientShares(f"need {params.k} coded elements, got {len(by_index)}")
    sizes = {len(el.data) for el in elements}
    if len(sizes) != 1:
        raise MalformedShares(f"coded elements have unequal lengths {sorted(sizes)}")
    chosen = sorted(by_index)[: params.k]
    stripes = np.stack(
        [np.frombuffer(by_index[i].data, dtype=np.uint8) for i in chosen]
    )
    value = _combine(_decoding_matrix(params, tuple(chosen)), stripes).tobytes()
    return value if length is None else unpad(value, length)
