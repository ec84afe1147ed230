"""Slater determinants as occupation bitmasks and fermionic ladder operators.

A determinant over ``m`` spin-orbitals is stored as an integer ``occ`` whose
bit ``e`` is set when spin-orbital ``e`` is occupied. The canonical state is
the ascending ordered product ``c^+_{e1} ... c^+_{eN} |0>`` with
``e1 < ... < eN``; every phase in the package is relative to that ordering.

Spin-orbitals built from spatial orbitals use interleaved indexing,
``(orbital i, spin s) -> 2*i + s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

MAX_ORBITALS = 64

CREATE = "create"
ANNIHILATE = "annihilate"


def popcount(x: int) -> int:
    return bin(x).count("1")


def bits(x: int) -> list[int]:
    """Indices of the set bits of ``x`` in ascending order."""
    out = []
    i = 0
    while x:
        if x & 1:
            out.append(i)
        x >>= 1
        i += 1
    return out


def spin_orbital(orbital: int, spin: int) -> int:
    """Interleaved spin-orbital index of spatial ``orbital`` with ``spin`` in {0, 1}."""
    return 2 * orbital + spin


@dataclass(frozen=True, order=True)
class SlaterDeterminant:
    """Occupation bitmask ``occ`` over ``m`` spin-orbitals."""

    m: int
    occ: int

    def __post_init__(self):
        if not 0 < self.m <= MAX_ORBITALS:
            raise ValueError(f"orbital count must be in 1..{MAX_ORBITALS}, got {self.m}")
        if self.occ < 0 or self.occ >> self.m:
            raise ValueError(f"occupation {self.occ:#b} has bits outside {self.m} orbitals")

    @classmethod
    def from_orbitals(cls, m: int, orbitals) -> "SlaterDeterminant":
        occ = 0
        for e in orbitals:
            if not 0 <= e < m:
                raise ValueError(f"orbital {e} out of range for m={m}")
            if occ >> e & 1:
                raise ValueError(f"orbital {e} listed twice")
            occ |= 1 << e
        return cls(m, occ)

    @property
    def n(self) -> int:
        return popcount(self.occ)

    @property
    def orbitals(self) -> list[int]:
        return bits(self.occ)

    def is_occupied(self, orbital: int) -> bool:
        return bool(self.occ >> orbital & 1)

    def to_json(self) -> dict:
        return {"m": self.m, "occ": self.occ}

    @classmethod
    def from_json(cls, data: dict) -> "SlaterDeterminant":
        return cls(int(data["m"]), int(data["occ"]))

    def __str__(self):
        return "|" + "".join("1" if self.is_occupied(e) else "0" for e in range(self.m)) + ">"


def apply_ladder(det: SlaterDeterminant, orbital: int, kind: str):
    """Apply ``c^+`` (``kind="create"``) or ``c`` (``kind="annihilate"``) to ``det``.

    Returns ``None`` when the state is annihilated, otherwise ``(sign, new_det)``
    where the sign is ``(-1)`` to the number of occupied orbitals below
    ``orbital``.
    """
    if not 0 <= orbital < det.m:
        raise ValueError(f"orbital {orbital} out of range for m={det.m}")
    occupied = det.occ >> orbital & 1
    if kind == CREATE:
        if occupied:
            return None
    elif kind == ANNIHILATE:
        if not occupied:
            return None
    else:
        raise ValueError(f"unknown ladder kind {kind!r}")
    sign = -1 if popcount(det.occ & ((1 << orbital) - 1)) & 1 else 1
    return sign, SlaterDeterminant(det.m, det.occ ^ (1 << orbital))


def apply_string(det: SlaterDeterminant, ops) -> tuple[int, SlaterDeterminant] | None:
    """Apply a product of ladder operators written left to right as in the math.

    ``ops`` is a sequence of ``(orbital, kind)``; the rightmost acts first.
    """
    sign = 1
    for orbital, kind in reversed(list(ops)):
        res = apply_ladder(det, orbital, kind)
        if res is None:
            return None
        s, det = res
        sign *= s
    return sign, det


def occupation_vector(det: SlaterDeterminant) -> list[int]:
    return [det.occ >> e & 1 for e in range(det.m)]


def _check_pair(n: SlaterDeterminant, m: SlaterDeterminant):
    if n.m != m.m:
        raise ValueError(f"orbital counts differ: {n.m} vs {m.m}")
    if n.n != m.n:
        raise ValueError(f"particle numbers differ: {n.n} vs {m.n}")


def coherence_order(n: SlaterDeterminant, m: SlaterDeterminant) -> int:
    """Number of single-particle transitions connecting ``n`` and ``m``."""
    _check_pair(n, m)
    return popcount(n.occ & ~m.occ)


@dataclass(frozen=True)
class TransitionDescriptor:
    """Minimal transition labels taking determinant ``m`` to determinant ``n``.

    For ``order == 1``: ``canonical(n) = phase * c^+_{a} c_{b} canonical(m)``
    with ``created == (a,)`` and ``destroyed == (b,)``.

    For ``order == 2``: ``canonical(n) = phase * c^+_{a2} c^+_{a1} c_{b2} c_{b1}
    canonical(m)`` with ``created == (a1, a2)`` and ``destroyed == (b1, b2)``
    both ascending.
    """

    order: int
    created: tuple[int, ...]
    destroyed: tuple[int, ...]
    phase: int

    def operator_string(self) -> list[tuple[int, str]]:
        if self.order == 1:
            return [(self.created[0], CREATE), (self.destroyed[0], ANNIHILATE)]
        a1, a2 = self.created
        b1, b2 = self.destroyed
        return [(a2, CREATE), (a1, CREATE), (b2, ANNIHILATE), (b1, ANNIHILATE)]


def transition_descriptor(m: SlaterDeterminant, n: SlaterDeterminant) -> TransitionDescriptor | None:
    """Descriptor of the transition ``m -> n``; ``None`` unless the order is 1 or 2."""
    s = coherence_order(n, m)
    if s not in (1, 2):
        return None
    created = tuple(bits(n.occ & ~m.occ))
    destroyed = tuple(bits(m.occ & ~n.occ))
    probe = TransitionDescriptor(s, created, destroyed, 1)
    sign, image = apply_string(m, probe.operator_string())
    assert image == n
    return TransitionDescriptor(s, created, destroyed, sign)


def enumerate_determinants(m: int, n: int) -> list[SlaterDeterminant]:
    """All ``C(m, n)`` determinants in ascending bitmask order."""
    dets = [SlaterDeterminant.from_orbitals(m, c) for c in combinations(range(m), n)]
    return sorted(dets, key=lambda d: d.occ)


def enumerate_sz_sector(n_spatial: int, n_up: int, n_down: int) -> list[SlaterDeterminant]:
    """Determinants with fixed spin-up and spin-down counts (interleaved indexing)."""
    out = []
    for up in combinations(range(n_spatial), n_up):
        for dn in combinations(range(n_spatial), n_down):
            orbs = [spin_orbital(i, 0) for i in up] + [spin_orbital(i, 1) for i in dn]
            out.append(SlaterDeterminant.from_orbitals(2 * n_spatial, orbs))
    return sorted(out, key=lambda d: d.occ)


def iter_pairs(dets) -> Iterator[tuple[int, int]]:
    for i in range(len(dets)):
        for j in range(len(dets)):
            if i != j:
                yield i, j
