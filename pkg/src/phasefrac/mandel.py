"""Mandel-notation symmetric tensor algebra and isotropic linear elasticity.

Symmetric second-order tensors are stored as 6-vectors ordered
``(xx, yy, zz, sqrt(2)*yz, sqrt(2)*xz, sqrt(2)*xy)``.  With the sqrt(2)
scaling on the shear components the plain vector dot product equals the
tensor double contraction, so norms, projections and tangent operators
need no bookkeeping factors.

All six components are always stored, also under plane strain: eigenstrain
directions built from deviators carry nonzero ``zz`` entries even when the
total strain has ``eps_zz = 0``.
"""

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)

#: Mandel representation of the identity tensor.
IDENTITY = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])

#: Volumetric projector P_vol = (1/3) I (x) I.
VOL_PROJ = np.outer(IDENTITY, IDENTITY) / 3.0

#: Deviatoric projector P_dev = I_6 - P_vol.
DEV_PROJ = np.eye(6) - VOL_PROJ


def trace(t: np.ndarray) -> float:
    """Trace of a Mandel 6-vector (sum of the normal components)."""
    return float(t[0] + t[1] + t[2])


def deviator(t: np.ndarray) -> np.ndarray:
    """Deviatoric part ``t - tr(t)/3 * I``; its trace vanishes to round-off."""
    out = np.array(t, dtype=float)
    third = (out[0] + out[1] + out[2]) / 3.0
    out[0] -= third
    out[1] -= third
    out[2] -= third
    return out


def norm(t: np.ndarray) -> float:
    """Euclidean norm of the 6-vector; equals the tensor Frobenius norm."""
    return float(np.sqrt(np.dot(t, t)))


def to_matrix(t: np.ndarray) -> np.ndarray:
    """Reconstruct the full symmetric 3x3 tensor from Mandel components."""
    xx, yy, zz, yz, xz, xy = t
    return np.array(
        [
            [xx, xy / SQRT2, xz / SQRT2],
            [xy / SQRT2, yy, yz / SQRT2],
            [xz / SQRT2, yz / SQRT2, zz],
        ]
    )


def from_matrix(m: np.ndarray) -> np.ndarray:
    """Mandel 6-vector of a symmetric 3x3 tensor."""
    return np.array(
        [
            m[0, 0],
            m[1, 1],
            m[2, 2],
            SQRT2 * m[1, 2],
            SQRT2 * m[0, 2],
            SQRT2 * m[0, 1],
        ]
    )


@dataclass(frozen=True)
class ElasticModuli:
    """Isotropic elastic constants; bulk and shear moduli derived from (E, nu).

    Parameters
    ----------
    E : float
        Young's modulus in Pa.
    nu : float
        Poisson's ratio, 0 < nu < 0.5.
    """

    E: float
    nu: float
    K: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must be in (0, 0.5), got {self.nu}")
        if self.E <= 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        object.__setattr__(self, "K", self.E / (3.0 * (1.0 - 2.0 * self.nu)))
        object.__setattr__(self, "mu", self.E / (2.0 * (1.0 + self.nu)))


def elastic_stress(eps_el: np.ndarray, m: ElasticModuli) -> np.ndarray:
    """Isotropic stress ``K tr(eps) I + 2 mu dev(eps)`` in Mandel form."""
    tre = eps_el[0] + eps_el[1] + eps_el[2]
    sig = 2.0 * m.mu * deviator(eps_el)
    sig[:3] += m.K * tre
    return sig


def elastic_stiffness(m: ElasticModuli) -> np.ndarray:
    """Constant 6x6 stiffness ``C = 3K P_vol + 2 mu P_dev``.

    Symmetric positive definite with one eigenvalue 3K (volumetric
    eigenvector) and five eigenvalues 2 mu.
    """
    return 3.0 * m.K * VOL_PROJ + 2.0 * m.mu * DEV_PROJ
