"""The control field: three constructions, structural identities, covariance."""
import numpy as np
import pytest

from geodiss.catalog import mexican_hat, random_poly
from geodiss.control import (
    Formulation,
    control_field,
    control_field_cofactor,
    control_field_projection,
    control_field_tensor,
    dissipated_rhs,
    dissipation_rate,
    identity_scales,
    tensor_matrix,
)
from geodiss.errors import SingularLeaf
from geodiss.fields import (
    DissipativeSystem,
    MetricField,
    ScalarField,
    VectorField,
)
from geodiss.gram import system_frame
from conftest import euclid3_pair, seeded_pair


def _linear3(rows, diss_row):
    def make(row, label):
        row = np.asarray(row, dtype=float)
        return ScalarField(3, lambda p, r=row: float(r @ p),
                           differential=lambda p, r=row: r.copy(), label=label)

    return DissipativeSystem(
        X=VectorField(3, lambda p: np.zeros(3)),
        conserved=tuple(make(r, f"f{i+1}") for i, r in enumerate(rows)),
        dissipated=make(diss_row, "g"), metric=MetricField.euclidean(3))


def test_sombrero_corrected_flow_hand_value():
    # At (2,0,0): rotation contributes (0,2,0); the control field is the
    # height-orthogonal gradient (6,0,0); the full determinant is 1*36.
    system = mexican_hat().system
    p = np.array([2.0, 0.0, 0.0])
    assert np.allclose(dissipated_rhs(system, p), [-6.0, 2.0, 0.0], atol=1e-12)
    assert system_frame(system, p).det_full() == pytest.approx(36.0, abs=1e-12)
    assert dissipation_rate(system, p) == pytest.approx(-36.0, abs=1e-12)


def test_orthogonal_linear_fields_all_formulations():
    # dF = e3, dG = e1, Euclidean: control field is exactly e1
    system = _linear3([[0.0, 0.0, 1.0]], [1.0, 0.0, 0.0])
    x = np.array([0.3, -0.2, 0.8])
    for form in Formulation:
        ev = control_field(system, x, form)
        assert np.allclose(ev.v0, [1.0, 0.0, 0.0], atol=1e-14), form
        assert ev.det_conserved == pytest.approx(1.0, abs=1e-14)
        assert ev.det_full == pytest.approx(1.0, abs=1e-14)


def test_dissipating_a_conserved_quantity_gives_zero_field():
    # G = F: nothing transverse remains to descend along
    system = _linear3([[0.0, 0.0, 1.0]], [0.0, 0.0, 1.0])
    x = np.array([0.1, 0.2, 0.3])
    for form in Formulation:
        ev = control_field(system, x, form)
        assert np.max(np.abs(ev.v0)) <= 1e-14, form
        assert ev.det_full == pytest.approx(0.0, abs=1e-14)


def test_three_formulations_agree_on_random_systems():
    worst = 0.0
    for i in range(60):
        system, x = seeded_pair(i)
        fr = system_frame(system, x)
        denom = max(identity_scales(fr)["control"], 1e-300)
        evs = [control_field(system, x, f).v0 for f in Formulation]
        for a in range(3):
            for b in range(a + 1, 3):
                worst = max(worst, float(np.max(np.abs(evs[a] - evs[b]))) / denom)
    assert worst <= 1e-9


def test_double_cross_product_ground_truth_in_three_dimensions():
    worst = 0.0
    for i in range(40):
        system, x = euclid3_pair(i)
        df = system.conserved[0].d(x)
        dg = system.dissipated.d(x)
        truth = np.cross(df, np.cross(dg, df))
        scale = max(float(np.linalg.norm(df)) ** 2
                    * float(np.linalg.norm(dg)), 1e-300)
        for form in Formulation:
            v0 = control_field(system, x, form).v0
            worst = max(worst, float(np.max(np.abs(v0 - truth))) / scale)
    assert worst <= 1e-10


def test_tangency_and_pairing_identities_on_random_systems():
    tang = pair = 0.0
    det_min = 0.0
    for i in range(60):
        system, x = seeded_pair(i)
        fr = system_frame(system, x)
        scales = identity_scales(fr)
        v0 = control_field_cofactor(system, x).v0
        for j in range(system.k):
            tang = max(tang, abs(float(fr.diffs[j] @ v0))
                       / max(scales["tangency"][j], 1e-300))
        pair = max(pair, abs(float(fr.diffs[system.k] @ v0) - fr.det_full())
                   / max(scales["dissipation"], 1e-300))
        det_min = min(det_min, fr.det_full()
                      / max(scales["classification"], 1e-300))
    assert tang <= 1e-9
    assert pair <= 1e-9
    assert det_min >= -1e-10


def test_tensor_is_symmetric_at_machine_precision():
    worst = 0.0
    for i in range(40):
        system, x = seeded_pair(i)
        t = tensor_matrix(system, x)
        denom = max(float(np.max(np.abs(t))), 1e-300)
        worst = max(worst, float(np.max(np.abs(t - t.T))) / denom)
    assert worst <= 1e-12


def test_no_conserved_quantities_degenerates_to_plain_gradient():
    entry = random_poly(4, 0, seed=3)
    system = entry.system
    rng = np.random.default_rng(1)
    for x in rng.uniform(-1, 1, size=(10, 4)):
        fr = system_frame(system, x)
        grad_g = fr.grads[0]
        for form in Formulation:
            ev = control_field(system, x, form)
            assert ev.det_conserved == 1.0
            assert np.allclose(ev.v0, grad_g, atol=1e-12 * (1 + np.max(np.abs(grad_g))))
        # the tensor collapses to the inverse metric
        t = tensor_matrix(system, x)
        g_inv = np.linalg.inv(system.metric.at(x))
        assert np.allclose(t, g_inv, atol=1e-12 * np.max(np.abs(g_inv)))


def test_rate_equals_pairing_with_the_control_field():
    for i in range(30):
        system, x = seeded_pair(i)
        fr = system_frame(system, x)
        v0 = control_field_cofactor(system, x).v0
        rate = dissipation_rate(system, x)
        scale = max(identity_scales(fr)["dissipation"], 1e-300)
        assert abs(rate + float(fr.diffs[system.k] @ v0)) <= 1e-9 * scale
        assert rate <= 1e-10 * max(fr.classification_scale(), 1e-300)


def test_rate_matches_chain_rule_only_when_x_conserves_g():
    # conserving case: the rotation field annihilates the sombrero profile
    mh = mexican_hat().system
    p = np.array([1.3, -0.4, 0.2])
    chain = float(mh.dissipated.d(p) @ dissipated_rhs(mh, p))
    assert dissipation_rate(mh, p) == pytest.approx(chain, rel=1e-12)
    # non-conserving case: the chain rule keeps the transport term
    entry = random_poly(3, 1, seed=9)
    sys_ = entry.system
    x = np.array([0.4, 0.1, -0.3])
    dg = sys_.dissipated.d(x)
    chain = float(dg @ dissipated_rhs(sys_, x))
    transport = float(dg @ sys_.X(x))
    assert dissipation_rate(sys_, x) == pytest.approx(chain - transport,
                                                      rel=1e-9)
    assert abs(transport) > 1e-6  # the distinction is actually exercised


@pytest.mark.parametrize("lam", [2.0, -3.0, 0.5])
def test_control_field_is_linear_in_the_dissipated_quantity(lam):
    for i in range(10):
        system, x = seeded_pair(i)
        g = system.dissipated
        scaled = DissipativeSystem(
            X=system.X, conserved=system.conserved,
            dissipated=ScalarField(
                g.dim, lambda p, s=lam: s * g.value(p),
                differential=lambda p, s=lam: s * g.d(p), label=g.label),
            metric=system.metric)
        base = control_field_cofactor(system, x)
        got = control_field_cofactor(scaled, x)
        scale = 1.0 + np.max(np.abs(base.v0))
        assert np.max(np.abs(got.v0 - lam * base.v0)) <= 1e-10 * abs(lam) * scale


@pytest.mark.parametrize("lam", [2.0, -3.0, 0.5])
def test_scaling_one_conserved_quantity_scales_the_field_quadratically(lam):
    for i in range(10):
        system, x = seeded_pair(i)
        if system.k == 0:
            continue
        f0 = system.conserved[0]
        scaled_f = ScalarField(
            f0.dim, lambda p, s=lam: s * f0.value(p),
            differential=lambda p, s=lam: s * f0.d(p), label=f0.label)
        scaled = DissipativeSystem(
            X=system.X, conserved=(scaled_f,) + system.conserved[1:],
            dissipated=system.dissipated, metric=system.metric)
        base = control_field_cofactor(system, x)
        got = control_field_cofactor(scaled, x)
        scale = 1.0 + np.max(np.abs(base.v0))
        assert np.max(np.abs(got.v0 - lam ** 2 * base.v0)) \
            <= 1e-10 * lam ** 2 * scale
        assert got.det_full == pytest.approx(lam ** 2 * base.det_full,
                                             rel=1e-10, abs=1e-300)


def test_projection_requires_a_regular_leaf():
    # two proportional conserved gradients make every leaf singular
    system = _linear3([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [0.0, 1.0, 0.0])
    x = np.zeros(3)
    with pytest.raises(SingularLeaf):
        control_field_projection(system, x)
    # the algebraic formulations still evaluate, and vanish identically here
    assert np.max(np.abs(control_field_cofactor(system, x).v0)) <= 1e-14
    assert np.max(np.abs(control_field_tensor(system, x).v0)) <= 1e-14


def test_identity_scales_shape():
    system, x = seeded_pair(4)
    scales = identity_scales(system_frame(system, x))
    assert set(scales) == {"control", "tangency", "dissipation",
                           "classification"}
    assert len(scales["tangency"]) == system.k
    assert scales["control"] > 0 and scales["classification"] > 0
