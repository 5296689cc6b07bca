"""Pointwise reconstruction of doubly-normal second derivatives.

For the symmetric-gradient law with p > 2 and mu > 0, the three unknowns
x_i = dzz(u_i) satisfy a 3x3 linear system a x = g at every node, where a
depends only on Du and g collects f and the remaining ("tangential") second
derivatives.  Solving it expresses dzz(u) through quantities controlled by
tangential translations, and |x| <= |g| because a has all eigenvalues >= 1.
The same elimination for the full-gradient law is simpler and is provided as
an extension.

Index convention: the normal direction is grid axis 2 (z); entries of second
derivative tensors are t[component, axis_a, axis_b].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as g
from . import solver
from .constitutive import ConstitutiveParams
from .errors import BadExponent, NotConverged
from .grid import DomainSpec

__all__ = [
    "NormalSystem",
    "assemble_normal_system",
    "solve_normal",
    "reconstruct_dzz",
    "pointwise_bound_check",
]

_Z = 2


@dataclass
class NormalSystem:
    """Batched 3x3 systems a x = g, one per node.

    a has shape (3, 3, *nodes), g has (3, *nodes).  context carries the
    fields the quadratic-form identity is stated in: base = mu + |Du|, the
    gradient the law acts on, and (p, mu, structure).
    """

    a: np.ndarray
    g: np.ndarray
    context: dict

    def quadratic_form(self, xi: np.ndarray) -> np.ndarray:
        """xi^T a xi for a direction field xi of shape (3, *nodes)."""
        return np.einsum("j...,jl...,l...->...", xi, self.a, xi)


def _as_d2_tensor(d2) -> np.ndarray:
    if isinstance(d2, g.SecondDerivField):
        return d2.full_tensor()
    return np.asarray(d2, dtype=float)


def assemble_normal_system(
    du: np.ndarray,
    d2: np.ndarray,
    f: np.ndarray,
    p: float,
    mu: float,
    structure: str = "symmetric",
) -> NormalSystem:
    """Build the per-node system for the dzz components.

    du is the gradient the law acts on ((3,3) leading axes, symmetric part for
    the symmetric law), d2 the full second-derivative tensor (its (z,z)
    entries are never read), f the forcing.  Any trailing node axes are
    batched over.  Where |du| = 0 the (p-2) correction terms are set to 0;
    they carry a factor du/|du| * du that vanishes with du.
    """
    if p <= 2.0:
        raise BadExponent(f"normal-system elimination needs p > 2, got p={p}")
    if mu <= 0.0:
        raise ValueError(f"normal-system elimination needs mu > 0, got mu={mu}")
    du = np.asarray(du, dtype=float)
    t = _as_d2_tensor(d2)
    f = np.asarray(f, dtype=float)
    mag = np.sqrt(np.sum(du * du, axis=(0, 1)))
    base = mu + mag
    with np.errstate(divide="ignore"):
        inv = np.where(mag > 0.0, 1.0 / (base * mag), 0.0)
    nshape = du.shape[2:]
    eye = np.eye(3).reshape((3, 3) + (1,) * len(nshape))

    if structure == "symmetric":
        nvec = du[:, _Z]  # column of Du against the normal, (Du e_z)_j
        a = np.broadcast_to(eye, (3, 3) + nshape).copy()
        a[_Z, _Z] += 1.0
        a += 2.0 * (p - 2.0) * inv * np.einsum("j...,l...->jl...", nvec, nvec)
        # tangential load: sum_{k<z} d_kk u_j, the mixed divergence row with
        # its dzz(u_z) term removed, and the (p-2) coupling without its
        # (z, z) slot
        s1 = t[:, 0, 0] + t[:, 1, 1]
        s2 = np.einsum("kjk...->j...", t[:, :, :])
        s2[_Z] -= t[_Z, _Z, _Z]
        w = np.einsum("lm...,lkm...->k...", du, t)
        w[_Z] -= np.einsum("l...,l...->...", du[:, _Z], t[:, _Z, _Z])
        coupling = np.einsum("jk...,k...->j...", du, w)
        gvec = -(s1 + s2) - 2.0 * (p - 2.0) * inv * coupling - 2.0 * base ** (2.0 - p) * f
    elif structure == "full":
        nvec = du[:, _Z]  # d_z u_j
        a = np.broadcast_to(eye, (3, 3) + nshape).copy()
        a += (p - 2.0) * inv * np.einsum("j...,l...->jl...", nvec, nvec)
        s1 = t[:, 0, 0] + t[:, 1, 1]
        w = np.einsum("lm...,lkm...->k...", du, t)
        w[_Z] -= np.einsum("l...,l...->...", du[:, _Z], t[:, _Z, _Z])
        coupling = np.einsum("jk...,k...->j...", du, w)
        gvec = -s1 - (p - 2.0) * inv * coupling - base ** (2.0 - p) * f
    else:
        raise ValueError(f"structure must be 'symmetric' or 'full', got {structure!r}")
    context = {"base": base, "du": du, "p": p, "mu": mu, "structure": structure}
    return NormalSystem(a, gvec, context)


def solve_normal(system: NormalSystem) -> np.ndarray:
    """Solve every node's 3x3 system; result shape (3, *nodes).

    The matrices have eigenvalues >= 1 for p > 2, so plain elimination is
    safe and |result| <= |g| holds pointwise.
    """
    a = system.a
    gvec = system.g
    nshape = a.shape[2:]
    am = np.moveaxis(a.reshape(3, 3, -1), -1, 0)
    gm = np.moveaxis(gvec.reshape(3, -1), -1, 0)
    x = np.linalg.solve(am, gm[..., None])[..., 0]
    return np.moveaxis(x, 0, -1).reshape((3,) + nshape)


def reconstruct_dzz(
    domain: DomainSpec,
    u: np.ndarray,
    f: np.ndarray,
    p: float,
    mu: float,
    structure: str = "symmetric",
) -> np.ndarray:
    """Assemble from discrete derivatives of u and solve, in one call."""
    du = g.gradient(domain, u, structure)
    d2 = g.second_derivatives(domain, u)
    return solve_normal(assemble_normal_system(du, d2, f, p, mu, structure))


def pointwise_bound_check(
    domain: DomainSpec,
    u: np.ndarray,
    f: np.ndarray,
    p: float,
    mu: float,
    structure: str = "symmetric",
    eta: float = 0.0,
    residual_tol: float = 1e-6,
    delta: float = 1e-14,
) -> dict:
    """Ratio field |dzz u| / (mu^(2-p)|f| + |tangential D2 u| + delta).

    u must be a converged solve for this (f, eta): the relative residual is
    gated at residual_tol (NotConverged otherwise), since the bound is a
    statement about solutions only.  Also cross-checks the reconstructed dzz
    against the direct stencil value.  All statistics are over interior nodes.
    """
    params = ConstitutiveParams(p=p, mu=mu, structure=structure)
    fnorm = float(np.sqrt(np.sum(f * f)))
    res = solver.residual(domain, params, eta, u, f)
    rel = float(np.sqrt(np.sum(res * res))) / max(fnorm, 1e-300)
    if fnorm > 0.0 and rel > residual_tol:
        raise NotConverged(
            f"field is not a converged solution: relative residual {rel:.3e} "
            f"exceeds {residual_tol:.1e}"
        )
    d2 = g.second_derivatives(domain, u)
    dzz = d2.d_zz()
    dzz_mag = np.sqrt(np.sum(dzz * dzz, axis=0))
    tang_mag = np.sqrt(np.maximum(d2.sq_tangential(), 0.0))
    fmag = np.sqrt(np.sum(f * f, axis=0))
    ratio = np.zeros(domain.shape)
    inner = domain.interior
    denom = mu ** (2.0 - p) * fmag + tang_mag + delta
    ratio[inner] = (dzz_mag / denom)[inner]

    du = g.gradient(domain, u, structure)
    rec = solve_normal(assemble_normal_system(du, d2, f, p, mu, structure))
    gap = rec - dzz
    gap_sq = np.sum(gap * gap, axis=0)[inner]
    dzz_sq = np.sum(dzz * dzz, axis=0)[inner]
    rel_l2 = float(np.sqrt(np.sum(gap_sq)) / max(np.sqrt(np.sum(dzz_sq)), 1e-300))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel_point = np.sqrt(gap_sq) / (np.sqrt(dzz_sq) + delta)
    return {
        "ratio": ratio,
        "ratio_max": float(np.max(ratio[inner], initial=0.0)),
        "ratio_mean": float(np.mean(ratio[inner])),
        "residual_rel": rel,
        "reconstruction_rel_l2": rel_l2,
        "reconstruction_rel_median": float(np.median(rel_point)),
        "dzz": dzz,
        "reconstructed_dzz": rec,
    }
