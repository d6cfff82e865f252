"""Truncated tensor algebra over R^d up to level 3 and its group-like elements.

A :class:`GroupIncrement` stores the levels of a signature-type object
(one increment of a rough path).  Products are truncated tensor products,
inverses come from the nilpotent Neumann series, and group-likeness is
checked through the shuffle identities.  The exact Carnot-Caratheodory
norm is replaced by the equivalent homogeneous norm
``max_k (k! * ||level_k||_F)^(1/k)``.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroupIncrement",
    "identity",
    "exp_segment",
    "tensor_mul",
    "inverse",
    "grouplike_residual",
    "homogeneous_norm",
    "dilate",
    "truncated_log",
    "lie_project_level3",
    "exp_from_lie",
]


@dataclass(frozen=True)
class GroupIncrement:
    """One tensor-algebra increment: levels 1..N over a d-dimensional alphabet.

    level3 is present exactly when N == 3.  ``geometric`` marks increments
    known group-like by construction (segment signatures, products of such).
    """

    d: int
    level: int
    level1: np.ndarray
    level2: np.ndarray
    level3: np.ndarray | None = None
    geometric: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.level not in (1, 2, 3):
            raise ValueError(f"level must be 1, 2 or 3, got {self.level}")
        if self.level1.shape != (self.d,):
            raise ValueError("level1 shape mismatch")
        if self.level >= 2 and self.level2.shape != (self.d, self.d):
            raise ValueError("level2 shape mismatch")
        if self.level == 3:
            if self.level3 is None or self.level3.shape != (self.d, self.d, self.d):
                raise ValueError("level3 required with shape (d, d, d)")
        if not np.all(np.isfinite(self.level1)):
            raise ValueError("non-finite level1 entries")

    def compatible(self, other: "GroupIncrement") -> bool:
        return self.d == other.d and self.level == other.level


def identity(d: int, level: int = 3) -> GroupIncrement:
    """Neutral element of the truncated group."""
    return GroupIncrement(
        d=d,
        level=level,
        level1=np.zeros(d),
        level2=np.zeros((d, d)),
        level3=np.zeros((d, d, d)) if level == 3 else None,
        geometric=True,
    )


def exp_segment(delta, level: int = 3) -> GroupIncrement:
    """Signature of the straight segment with increment ``delta``: level_k = delta^(x)k / k!."""
    delta = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(delta)):
        raise ValueError("non-finite segment increment")
    d = delta.shape[0]
    l2 = 0.5 * np.outer(delta, delta)
    l3 = np.einsum("i,j,k->ijk", delta, delta, delta) / 6.0 if level == 3 else None
    return GroupIncrement(d=d, level=level, level1=delta.copy(), level2=l2, level3=l3, geometric=True)


def tensor_mul(a: GroupIncrement, b: GroupIncrement) -> GroupIncrement:
    """Truncated tensor product (Chen multiplication) of two increments."""
    if not a.compatible(b):
        raise ValueError(
            f"incompatible increments: (d={a.d}, N={a.level}) vs (d={b.d}, N={b.level})"
        )
    l1 = a.level1 + b.level1
    l2 = a.level2 + b.level2 + np.outer(a.level1, b.level1)
    l3 = None
    if a.level == 3:
        l3 = (
            a.level3
            + b.level3
            + np.einsum("i,jk->ijk", a.level1, b.level2)
            + np.einsum("ij,k->ijk", a.level2, b.level1)
        )
    return GroupIncrement(
        d=a.d, level=a.level, level1=l1, level2=l2, level3=l3,
        geometric=a.geometric and b.geometric,
    )


def inverse(g: GroupIncrement) -> GroupIncrement:
    """Group inverse; exact in the nilpotent truncation (1 + x)^-1 = 1 - x + x^2 - x^3."""
    x1 = g.level1
    x2 = g.level2
    l1 = -x1
    sq2 = np.outer(x1, x1)
    l2 = -x2 + sq2
    l3 = None
    if g.level == 3:
        x3 = g.level3
        sq3 = np.einsum("i,jk->ijk", x1, x2) + np.einsum("ij,k->ijk", x2, x1)
        cube3 = np.einsum("i,j,k->ijk", x1, x1, x1)
        l3 = -x3 + sq3 - cube3
    return GroupIncrement(d=g.d, level=g.level, level1=l1, level2=l2, level3=l3,
                          geometric=g.geometric)


def grouplike_residual(g: GroupIncrement) -> float:
    """Worst shuffle-identity violation over word pairs with |u| + |v| <= N.

    Zero (to rounding) iff the increment is group-like: the pair constraints
    are  g1_i g1_j = g2_ij + g2_ji  and, at level 3,
    g1_i g2_jk = g3_ijk + g3_jik + g3_jki.
    """
    res = 0.0
    if g.level >= 2:
        gap2 = np.outer(g.level1, g.level1) - (g.level2 + g.level2.T)
        res = float(np.max(np.abs(gap2)))
    if g.level == 3:
        t = np.einsum("i,jk->ijk", g.level1, g.level2)
        shuf = g.level3 + np.transpose(g.level3, (1, 0, 2)) + np.transpose(g.level3, (2, 0, 1))
        # transpose conventions: shuf[i,j,k] = g3[i,j,k] + g3[j,i,k] + g3[j,k,i]
        res = max(res, float(np.max(np.abs(t - shuf))))
    return res


def homogeneous_norm(g: GroupIncrement) -> float:
    """Equivalent homogeneous norm max_k (k! ||level_k||_F)^(1/k)."""
    n = float(np.linalg.norm(g.level1))
    if g.level >= 2:
        n = max(n, float(np.sqrt(2.0 * np.linalg.norm(g.level2))))
    if g.level == 3:
        n = max(n, float((6.0 * np.linalg.norm(g.level3)) ** (1.0 / 3.0)))
    return n


def dilate(g: GroupIncrement, lam: float) -> GroupIncrement:
    """Dilation delta_lambda: scales level k by lambda^k."""
    return GroupIncrement(
        d=g.d,
        level=g.level,
        level1=lam * g.level1,
        level2=lam * lam * g.level2,
        level3=lam ** 3 * g.level3 if g.level == 3 else None,
        geometric=g.geometric,
    )


# -- log / Lie machinery (used by the hybrid-lift geometricity completion) --

def truncated_log(g: GroupIncrement):
    """Levels of log(g) in the truncation: l = x - x^2/2 + x^3/3 with x = g - 1."""
    x1, x2 = g.level1, g.level2
    l1 = x1.copy()
    l2 = x2 - 0.5 * np.outer(x1, x1)
    l3 = None
    if g.level == 3:
        x3 = g.level3
        sq3 = np.einsum("i,jk->ijk", x1, x2) + np.einsum("ij,k->ijk", x2, x1)
        cube3 = np.einsum("i,j,k->ijk", x1, x1, x1)
        l3 = x3 - 0.5 * sq3 + cube3 / 3.0
    return l1, l2, l3


def lie_project_level3(t: np.ndarray) -> np.ndarray:
    """Dynkin projection of a degree-3 tensor onto the free Lie algebra.

    pi(t) = (1/3) sum t_ijk [[e_i, e_j], e_k]; idempotent on Lie elements
    by Dynkin-Specht-Wever.
    """
    # [[e_i,e_j],e_k] = e_ijk - e_jik - e_kij + e_kji; collecting the
    # coefficient landing on each word w gives the transposes below.
    out = np.zeros_like(t)
    out += t
    out -= np.transpose(t, (1, 0, 2))  # word (j,i,k) <- -t_ijk
    out -= np.transpose(t, (2, 0, 1))  # word (k,i,j) <- -t_ijk
    out += np.transpose(t, (2, 1, 0))  # word (k,j,i) <- +t_ijk
    return out / 3.0


def exp_from_lie(l1: np.ndarray, l2: np.ndarray, l3: np.ndarray | None, level: int,
                 geometric: bool = True) -> GroupIncrement:
    """exp of a Lie element (l2 antisymmetric, l3 in the Lie subspace)."""
    d = l1.shape[0]
    g2 = l2 + 0.5 * np.outer(l1, l1)
    g3 = None
    if level == 3:
        g3 = (
            l3
            + 0.5 * (np.einsum("i,jk->ijk", l1, l2) + np.einsum("ij,k->ijk", l2, l1))
            + np.einsum("i,j,k->ijk", l1, l1, l1) / 6.0
        )
    return GroupIncrement(d=d, level=level, level1=l1.copy(), level2=g2, level3=g3,
                          geometric=geometric)
