import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pymoyodft.convex_core import (
    ExtendedReal,
    FunctionOracle,
    InnerSolverConfig,
    SegmentDomain,
    envelope_ladder,
    min_norm_element,
    moreau_envelope,
    proj_simplex,
    prox,
    skew_concave_conjugate,
    skew_convex_conjugate,
    spot_check_convexity,
    verify_lossless,
    yosida_gradient,
)
from pymoyodft.exceptions import DomainError, EmptyDomain
from pymoyodft.oracles import (
    dimer_energy_closed_form,
    dimer_F_closed_form,
    dimer_oracle,
    grid_prox,
    indicator_oracle,
    quadratic_oracle,
    zero_oracle,
)

coordinates = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
vectors = st.lists(coordinates, min_size=3, max_size=3).map(np.array)
eps_values = st.sampled_from([0.05, 0.1, 0.2, 0.4])


def _bare(f: FunctionOracle) -> FunctionOracle:
    """Même fonction sans formes closes : force le chemin générique."""
    return FunctionOracle(
        evaluate=f.evaluate,
        subgradient_hint=f.subgradient_hint,
        domain_radius=f.domain_radius,
        name=f"{f.name} (générique)",
    )


def test_extended_real():
    assert ExtendedReal.finite(2.5).is_finite
    assert ExtendedReal.plus_infinity().as_float() == math.inf
    assert ExtendedReal.minus_infinity().as_float() == -math.inf
    assert str(ExtendedReal.plus_infinity()) == "+inf"
    with pytest.raises(DomainError):
        ExtendedReal.finite(math.inf)
    with pytest.raises(DomainError):
        ExtendedReal.finite(math.nan)


def test_inner_config_validation():
    with pytest.raises(DomainError):
        InnerSolverConfig(tolerance=0.0)
    with pytest.raises(DomainError):
        InnerSolverConfig(grid_points=2)


@given(x=st.lists(coordinates, min_size=1, max_size=6).map(np.array))
@settings(max_examples=100, deadline=None)
def test_proj_simplex(x):
    w = proj_simplex(x, 2.0)
    assert np.all(w >= 0.0)
    assert w.sum() == pytest.approx(2.0, abs=1e-12)


def test_min_norm_element():
    weights, element = min_norm_element([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    np.testing.assert_allclose(weights, [0.5, 0.5], atol=1e-10)
    np.testing.assert_allclose(element, [0.5, 0.5], atol=1e-10)
    # l'origine est dans l'enveloppe convexe
    _, element = min_norm_element([np.array([1.0, 1.0]), np.array([-1.0, -1.0])])
    assert np.linalg.norm(element) <= 1e-10


@given(center=vectors, x=vectors, eps=eps_values)
@settings(max_examples=25, deadline=None)
def test_generic_prox_matches_quadratic_closed_form(center, x, eps):
    f = quadratic_oracle(center, curvature=2.0)
    closed = moreau_envelope(f, eps, x)
    generic = moreau_envelope(_bare(f), eps, x)
    np.testing.assert_allclose(generic.prox_point, closed.prox_point, atol=1e-6)
    assert generic.envelope_value == pytest.approx(closed.envelope_value, abs=1e-8)
    assert closed.envelope_value <= f.value(x) + 1e-12


@given(x=vectors, y=vectors, eps=eps_values)
@settings(max_examples=50, deadline=None)
def test_prox_is_firmly_nonexpansive(x, y, eps):
    f = quadratic_oracle([0.5, -1.0, 2.0], curvature=3.0)
    px, py = prox(f, eps, x), prox(f, eps, y)
    dp = px - py
    assert float(dp @ dp) <= float(dp @ (x - y)) + 1e-10
    dg = yosida_gradient(f, eps, x) - yosida_gradient(f, eps, y)
    assert np.linalg.norm(dg) <= np.linalg.norm(x - y) / eps + 1e-10


@given(s=st.floats(min_value=0.05, max_value=0.95), offset=st.floats(-0.3, 0.3))
@settings(max_examples=25, deadline=None)
def test_segment_prox_matches_grid_search(s, offset):
    f = dimer_oracle(0.5)
    x = np.array([s + offset, 1.0 - s + offset])
    result = moreau_envelope(f, 0.1, x)
    np.testing.assert_allclose(result.prox_point, grid_prox(f, 0.1, x), atol=1e-4)
    np.testing.assert_allclose(
        result.yosida_gradient, (x - result.prox_point) / 0.1, atol=1e-12
    )
    assert result.prox_point.sum() == pytest.approx(1.0, abs=1e-12)


def test_envelope_requires_positive_eps():
    with pytest.raises(DomainError):
        moreau_envelope(dimer_oracle(), 0.0, [0.5, 0.5])


def test_envelope_of_symmetric_point():
    result = moreau_envelope(dimer_oracle(0.5), 0.1, [0.5, 0.5])
    assert result.envelope_value == pytest.approx(-0.5, abs=1e-12)
    np.testing.assert_allclose(result.prox_point, [0.5, 0.5], atol=1e-9)


def test_indicator_prox_is_the_atom():
    atom = [1.0, -2.0, 0.5]
    f = indicator_oracle(atom)
    result = moreau_envelope(f, 0.2, [0.0, 0.0, 0.0])
    np.testing.assert_allclose(result.prox_point, atom)
    assert result.envelope_value == pytest.approx(5.25 / 0.4)


def test_prox_is_not_idempotent():
    f = dimer_oracle(0.5)
    once = prox(f, 0.1, [0.9, 0.1])
    twice = prox(f, 0.1, once)
    assert np.linalg.norm(twice - once) > 1e-4


def test_generic_prox_without_subgradient_is_refused():
    f = FunctionOracle(evaluate=lambda x: ExtendedReal.finite(float(x @ x)))
    with pytest.raises(DomainError):
        moreau_envelope(f, 0.1, [1.0, 2.0])


def test_empty_domain_is_reported():
    f = FunctionOracle(
        evaluate=lambda x: ExtendedReal.plus_infinity(),
        segment=SegmentDomain(np.zeros(2), np.array([1.0, 0.0]), 0.0, 1.0),
        name="vide",
    )
    with pytest.raises(EmptyDomain):
        moreau_envelope(f, 0.1, [0.0, 0.0])


@given(v1=coordinates, v2=coordinates)
@settings(max_examples=25, deadline=None)
def test_concave_conjugate_of_dimer_is_the_energy(v1, v2):
    value = skew_concave_conjugate(dimer_oracle(0.5), [v1, v2])
    expected = dimer_energy_closed_form(0.5, [v1, v2])
    assert value.value == pytest.approx(expected, abs=1e-9)


@given(y=vectors)
@settings(max_examples=25, deadline=None)
def test_generic_concave_conjugate_of_quadratic(y):
    f = quadratic_oracle([1.0, 0.0, -1.0], curvature=2.0)
    generic = skew_concave_conjugate(_bare(f), y)
    assert generic.value == pytest.approx(f.conjugate_hint(y).value, abs=1e-6)


@given(y=vectors, eps=eps_values)
@settings(max_examples=25, deadline=None)
def test_envelope_conjugate_is_shifted_by_half_square(y, eps):
    f = quadratic_oracle([1.0, 0.0, -1.0], curvature=2.0)

    def value(x):
        return ExtendedReal.finite(moreau_envelope(f, eps, x).envelope_value)

    envelope = FunctionOracle(
        evaluate=value,
        subgradient_hint=lambda x: yosida_gradient(f, eps, x),
        name="enveloppe",
    )
    shifted = f.conjugate_hint(y).value - 0.5 * eps * float(y @ y)
    conjugate = skew_concave_conjugate(envelope, y)
    assert conjugate.value == pytest.approx(shifted, abs=1e-6)


@given(
    x1=st.floats(min_value=-0.2, max_value=1.2),
    x2=st.floats(min_value=-0.2, max_value=1.2),
    s=st.floats(min_value=0.0, max_value=1.0),
)
@settings(max_examples=50, deadline=None)
def test_yosida_gradient_is_a_subgradient_at_the_prox(x1, x2, s):
    f = dimer_oracle(0.5)
    x, y = np.array([x1, x2]), np.array([s, 1.0 - s])
    result = moreau_envelope(f, 0.1, x)
    p, g = result.prox_point, result.yosida_gradient
    assert f.value(p) + float(g @ (y - p)) <= f.value(y) + 1e-6


def test_conjugate_of_zero_function():
    f = zero_oracle(2)
    assert skew_concave_conjugate(f, [0.0, 0.0]).value == 0.0
    assert skew_concave_conjugate(f, [1.0, 0.0]).infinity == -1


def test_convex_conjugate_of_concave_quadratic():
    # g(y) = −‖y‖²/2  ⇒  g^∨[x] = sup_y −‖y‖²/2 − ⟨y, x⟩ = ‖x‖²/2
    def g(y):
        return -0.5 * float(y @ y), -y

    value, y_star = skew_convex_conjugate(g, [1.0, -2.0])
    assert value.value == pytest.approx(2.5, abs=1e-9)
    np.testing.assert_allclose(y_star, [-1.0, 2.0], atol=1e-6)


def test_convex_conjugate_of_linear_function_is_infinite():
    value, _ = skew_convex_conjugate(lambda y: (0.0, np.zeros_like(y)), [1.0, 0.0])
    assert value.infinity == 1


def test_lossless_on_quadratic():
    f = quadratic_oracle([0.3, -0.7], curvature=1.5)
    report = verify_lossless(f, 0.1, [[0.0, 0.0], [1.0, 2.0], [-0.5, 0.4]])
    assert report.passed(1e-6)
    assert len(report.messages) == 3


@pytest.mark.slow
def test_lossless_on_dimer():
    f = dimer_oracle(0.5)
    report = verify_lossless(f, 0.1, [[0.3, 0.7], [0.5, 0.5]])
    assert report.max_deviation <= 1e-5
    for entry in report.entries:
        rho1 = float(entry.probe[0])
        assert entry.original.value == pytest.approx(dimer_F_closed_form(0.5, rho1))


def test_spot_check_convexity(rng):
    points = rng.normal(size=(10, 3))
    ok, messages = spot_check_convexity(quadratic_oracle(np.zeros(3)), points, rng)
    assert ok and messages == []
    concave = FunctionOracle(
        evaluate=lambda x: ExtendedReal.finite(-float(x @ x)), name="concave"
    )
    ok, messages = spot_check_convexity(concave, points, rng)
    assert not ok
    assert "concave" in messages[0][0]


def test_envelope_ladder_is_monotone():
    f = dimer_oracle(0.5)
    ladder = envelope_ladder(f, [0.8, 0.25])
    assert ladder.is_monotone
    assert np.all(ladder.values <= f.value(np.array([0.8, 0.25])) + 1e-12)
    on_segment = envelope_ladder(f, [0.7, 0.3])
    assert on_segment.is_monotone
    assert on_segment.values[-1] <= on_segment.target.value + 1e-12
    assert np.all(on_segment.prox_ratios <= 1.0)
    with pytest.raises(DomainError):
        envelope_ladder(f, [0.7, 0.3], [0.1, 0.2])
