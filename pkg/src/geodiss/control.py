"""Construction of the standard dissipative control field.

Given conserved quantities F_1..F_k and a quantity G to dissipate, the control
field is the unique combination of gradients that is metric-orthogonal to all
grad F_i while pairing with grad G to the full Gram determinant. Along the
corrected flow X - control the F_i stay constant and G decreases at rate equal
to that determinant.

Three equivalent constructions are provided: a cofactor expansion (default),
the symmetric-tensor contraction, and scaled tangent projection. Keeping all
three allows cross-checks at roundoff level.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import SingularLeaf
from .fields import DissipativeSystem
from .gram import SystemFrame, checked_det, system_frame

LEAF_CONDITION_LIMIT = 1e12


class Formulation(Enum):
    COFACTOR = "cofactor"
    TENSOR = "tensor"
    PROJECTION = "projection"


@dataclass(frozen=True)
class ControlEvaluation:
    """Control field at a point plus the Gram determinants used to build it."""

    v0: np.ndarray
    formulation: Formulation
    det_conserved: float
    det_full: float


def _cofactor_from_frame(fr: SystemFrame) -> np.ndarray:
    k = fr.k
    det_f = fr.det_conserved()
    v0 = det_f * fr.grads[k]
    for i in range(k):
        cols = [c for c in range(k) if c != i] + [k]
        minor = fr.gram[np.ix_(range(k), cols)]
        sign = -1.0 if (i + k) % 2 else 1.0
        v0 = v0 + sign * checked_det(minor) * fr.grads[i]
    return v0


def control_field(system: DissipativeSystem, x,
                  formulation: Formulation = Formulation.COFACTOR) -> ControlEvaluation:
    """Evaluate the control field with the requested formulation."""
    if formulation is Formulation.COFACTOR:
        return control_field_cofactor(system, x)
    if formulation is Formulation.TENSOR:
        return control_field_tensor(system, x)
    return control_field_projection(system, x)


def control_field_cofactor(system: DissipativeSystem, x) -> ControlEvaluation:
    """Cofactor expansion along the gradient row of the bordered Gram matrix."""
    fr = system_frame(system, x)
    v0 = _cofactor_from_frame(fr)
    return ControlEvaluation(
        v0=v0,
        formulation=Formulation.COFACTOR,
        det_conserved=fr.det_conserved(),
        det_full=fr.det_full(),
    )


def tensor_matrix(system: DissipativeSystem, x) -> np.ndarray:
    """Symmetric contravariant tensor whose contraction with dG gives the control field.

    Assembled from signed minors of the conserved Gram block plus the inverse
    metric scaled by the full conserved determinant. Symmetry is exact by
    construction (minors are computed once per unordered index pair).
    """
    fr = system_frame(system, x)
    k = fr.k
    n = system.dim
    det_f = fr.det_conserved()
    g_inv = np.linalg.solve(fr.gmat, np.eye(n))
    g_inv = 0.5 * (g_inv + g_inv.T)
    t = det_f * g_inv
    block = fr.gram[:k, :k]
    for i in range(k):
        for j in range(i, k):
            minor = np.delete(np.delete(block, j, axis=0), i, axis=1)
            sign = -1.0 if (i + j) % 2 == 0 else 1.0  # (-1)^(i+j+1), 1-indexed
            coeff = sign * checked_det(minor)
            outer = np.outer(fr.grads[i], fr.grads[j])
            if i == j:
                t = t + coeff * outer
            else:
                t = t + coeff * (outer + outer.T)
    return t


def control_field_tensor(system: DissipativeSystem, x) -> ControlEvaluation:
    """Contract the symmetric tensor with the differential of the dissipated field."""
    fr = system_frame(system, x)
    t = tensor_matrix(system, x)
    v0 = t @ fr.diffs[fr.k]
    return ControlEvaluation(
        v0=v0,
        formulation=Formulation.TENSOR,
        det_conserved=fr.det_conserved(),
        det_full=fr.det_full(),
    )


def control_field_projection(system: DissipativeSystem, x) -> ControlEvaluation:
    """Conserved-Gram determinant times the tangent projection of the dissipated gradient.

    Requires a regular leaf: the conserved gradients must be independent
    enough that their Gram matrix has condition number below
    ``LEAF_CONDITION_LIMIT``; otherwise :class:`SingularLeaf` is raised.
    """
    fr = system_frame(system, x)
    k = fr.k
    det_f = fr.det_conserved()
    if k == 0:
        v0 = fr.grads[0].copy()
    else:
        block = fr.gram[:k, :k]
        cond = float(np.linalg.cond(block))
        if not np.isfinite(cond) or cond > LEAF_CONDITION_LIMIT:
            raise SingularLeaf(
                f"conserved gradients nearly dependent (cond {cond:.2e}) at {fr.x.tolist()}"
            )
        alpha = np.linalg.solve(block, fr.gram[:k, k])
        tangent_part = fr.grads[k] - alpha @ fr.grads[:k]
        v0 = det_f * tangent_part
    return ControlEvaluation(
        v0=v0,
        formulation=Formulation.PROJECTION,
        det_conserved=det_f,
        det_full=fr.det_full(),
    )


def dissipated_rhs(system: DissipativeSystem, x) -> np.ndarray:
    """Right-hand side of the corrected flow: X minus the control field."""
    fr = system_frame(system, x)
    return system.X(fr.x) - _cofactor_from_frame(fr)


def dissipation_rate(system: DissipativeSystem, x) -> float:
    """Instantaneous rate of change of the dissipated quantity along the corrected flow.

    Equals minus the full Gram determinant whenever X genuinely conserves the
    dissipated quantity; the sign convention makes the returned value <= 0 up
    to roundoff.
    """
    return -system_frame(system, x).det_full()


def identity_scales(fr: SystemFrame) -> dict:
    """Natural magnitudes for the structural identities at a frame.

    Tolerances in tests and reports are taken relative to these: each scale is
    the product of the gradient norms that enter the corresponding identity.
    """
    diag = np.diag(fr.gram)
    k = fr.k
    prod_f = float(np.prod(diag[:k])) if k else 1.0
    norm_g = float(np.sqrt(max(diag[k], 0.0)))
    norms_f = np.sqrt(np.clip(diag[:k], 0.0, None))
    return {
        # magnitude of the control field itself
        "control": prod_f * norm_g,
        # <grad F_i, v0> = 0, one scale per conserved quantity
        "tangency": [prod_f * norm_g * float(nf) for nf in norms_f],
        # <grad G, v0> = full Gram determinant
        "dissipation": prod_f * norm_g * norm_g,
        # classification scale: product of all squared gradient norms
        "classification": float(np.prod(diag)),
    }
