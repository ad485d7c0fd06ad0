from typing import Iterable, List, Sequence, Union

import numpy as np

Bits = Union[Sequence[int], np.ndarray]


class Assignment:
    """Helpers for the integer encoding of binary vectors (bit i of the integer is b_i)."""

    @staticmethod
    def to_int(bits: Bits) -> int:
        """(1, 0, 1) -> 5"""
        value = 0
        for i, b in enumerate(bits):
            if int(b):
                value |= 1 << i
        return value

    @staticmethod
    def from_int(value: int, n: int) -> List[int]:
        """5, n=3 -> [1, 0, 1]"""
        return [(value >> i) & 1 for i in range(n)]

    @staticmethod
    def to_string(value: int, n: int) -> str:
        """b_0 first: 5, n=4 -> "1010" """
        return "".join(str((value >> i) & 1) for i in range(n))

    @staticmethod
    def indices(n: int) -> np.ndarray:
        """All 2**n assignment integers in ascending order"""
        return np.arange(1 << n, dtype=np.uint64)

    @staticmethod
    def bit_matrix(n: int) -> np.ndarray:
        """(2**n, n) array of 0/1, row k holds the bits of assignment k"""
        idx = Assignment.indices(n)
        return ((idx[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.int8)


class Tolerance:
    """Relative value equality used for degeneracy and error statistics."""

    @staticmethod
    def scale(a: float, b: float) -> float:
        return max(1.0, abs(a), abs(b))

    @staticmethod
    def equal(a: float, b: float, tol: float) -> bool:
        """|a - b| <= tol * max(1, |a|, |b|)"""
        return abs(a - b) <= tol * Tolerance.scale(a, b)

    @staticmethod
    def close_to(values: np.ndarray, target: float, tol: float) -> np.ndarray:
        """Elementwise ``equal(values[k], target)``"""
        scale = np.maximum(1.0, np.maximum(np.abs(values), abs(target)))
        return np.abs(values - target) <= tol * scale


def format_float(value: float) -> str:
    """17 significant digits, the CSV float format"""
    return "%.17g" % value


def mask_from_indices(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def indices_from_mask(mask: int) -> List[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")
