import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_routing
from jointcongestion import (
    DelayFunction,
    DomainError,
    Instance,
    InfeasibleInstance,
    MM1Delay,
    ValidationError,
    aggregate_loads,
    check_feasible,
    delay_value,
    gradient,
    inverse_marginal_cost,
    marginal_cost,
    objective,
    objective_composed,
    random_instance,
    traffic_class_rates,
)
from jointcongestion.errors import NodePoleError, PathPoleError
from jointcongestion.model import bisect_inverse_marginal


def fd_marginal(f, x, h=1e-6):
    g = lambda y: y * f.value(y)  # noqa: E731
    return (g(x + h) - g(x - h)) / (2 * h)


def fd_gradient(inst, r):
    out = np.empty_like(r)
    for i in range(inst.m):
        for j in range(inst.n):
            room = min(inst.mu_access[i, j] - r[i, j], inst.mu_node[j] - r[:, j].sum())
            h = min(1e-6, 1e-3 * room) * max(1.0, r[i, j])
            e = np.zeros_like(r)
            e[i, j] = h
            if r[i, j] >= h:
                out[i, j] = (objective(inst, r + e) - objective(inst, r - e)) / (2 * h)
            else:
                # second-order one-sided difference at the boundary
                f0, f1, f2 = (objective(inst, r + k * e) for k in range(3))
                out[i, j] = (-3 * f0 + 4 * f1 - f2) / (2 * h)
    return out


# delay_value

@pytest.mark.parametrize("mu, x, expected", [(2, 1, 1.0), (2, 0, 0.5), (10, 9, 1.0)])
def test_delay_value(mu, x, expected):
    assert delay_value(MM1Delay(mu), x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("x", [2.0, 3.0, -0.1])
def test_delay_value_domain(x):
    with pytest.raises(DomainError):
        delay_value(MM1Delay(2), x)


def test_delay_blows_up_at_capacity():
    f = MM1Delay(3.0)
    assert delay_value(f, 3.0 * (1 - 1e-9)) > 1e8 * delay_value(f, 0.0)


# marginal_cost

def test_marginal_cost_matches_finite_difference_oracle():
    # frozen values came from the finite-difference oracle below
    for mu, x, frozen in [(2.0, 1.0, 2.0), (4.0, 2.0, 1.0)]:
        f = MM1Delay(mu)
        assert fd_marginal(f, x) == pytest.approx(frozen, rel=1e-8)
        assert marginal_cost(f, x) == pytest.approx(frozen, rel=1e-14)


def test_marginal_cost_zero_load_is_delay():
    assert marginal_cost(MM1Delay(2), 0.0) == 0.5


def test_marginal_cost_domain():
    with pytest.raises(DomainError):
        marginal_cost(MM1Delay(2), 2.0)


@given(st.floats(0.1, 50), st.floats(0, 0.999), st.floats(1e-6, 0.5))
def test_marginal_cost_strictly_increasing(mu, frac, delta):
    f = MM1Delay(mu)
    x = frac * mu
    y = min(x + delta * mu, mu * (1 - 1e-12))
    if y > x:
        assert f.marginal(y) > f.marginal(x)


# inverse_marginal_cost

def test_inverse_marginal_examples():
    assert inverse_marginal_cost(MM1Delay(2), 2.0) == pytest.approx(1.0, abs=1e-12)
    assert inverse_marginal_cost(MM1Delay(2), 0.5) == 0.0
    # closed form mu - sqrt(mu / target)
    assert inverse_marginal_cost(MM1Delay(4), 1.0) == pytest.approx(4 - np.sqrt(4 / 1.0), abs=1e-12)


def test_inverse_marginal_by_bisection_matches_examples():
    assert bisect_inverse_marginal(MM1Delay(2), 2.0) == pytest.approx(1.0, abs=1e-11)
    assert bisect_inverse_marginal(MM1Delay(4), 1.0) == pytest.approx(2.0, abs=1e-11)


def test_inverse_marginal_below_floor():
    with pytest.raises(DomainError):
        inverse_marginal_cost(MM1Delay(2), 0.4)


@given(st.floats(0.1, 100), st.floats(0, 0.999))
def test_inverse_marginal_roundtrip(mu, frac):
    f = MM1Delay(mu)
    x = frac * mu
    assert inverse_marginal_cost(f, marginal_cost(f, x)) == pytest.approx(x, abs=1e-9)


@given(st.floats(0.5, 20), st.floats(1.0, 1e4))
def test_closed_form_and_bisection_agree(mu, scale):
    f = MM1Delay(mu)
    target = f.marginal(0.0) * scale
    assert f.inverse_marginal(target) == pytest.approx(
        bisect_inverse_marginal(f, target), abs=1e-9 * max(1, mu)
    )


# convexity of x * D(x)

@pytest.mark.parametrize("mu", [0.3, 1.0, 2.0, 17.0])
def test_flow_weighted_delay_convex_on_grid(mu):
    f = MM1Delay(mu)
    x = np.linspace(0, mu * (1 - 1e-3), 1000)
    h = 1e-4 * mu
    g = lambda y: y * f.value(y)  # noqa: E731
    second = (g(x + h) - 2 * g(x) + g(np.abs(x - h))) / h**2
    assert np.all(second[1:] > 0)
    analytic = 2 * f.derivative(x) + x * f.second_derivative(x)
    assert np.all(analytic > 0)


# a user-supplied family: M/M/1 queue behind a fixed propagation delay

def shifted(mu, d0):
    return DelayFunction(mu, value=lambda x: d0 + 1.0 / (mu - x),
                         derivative=lambda x: 1.0 / (mu - x) ** 2)


def test_custom_delay_marginal_and_inverse():
    f = shifted(3.0, 0.2)
    assert marginal_cost(f, 1.0) == pytest.approx(fd_marginal(f, 1.0), rel=1e-8)
    x = inverse_marginal_cost(f, marginal_cost(f, 1.3))
    assert x == pytest.approx(1.3, abs=1e-10)


def test_custom_instance_gradient():
    inst = Instance([1.0, 0.5], [[shifted(2, 0.1), shifted(3, 0.0)], [shifted(1.5, 0.3), shifted(2, 0.2)]],
                    [shifted(4, 0.05), MM1Delay(3)])
    r = np.array([[0.4, 0.6], [0.2, 0.3]])
    np.testing.assert_allclose(gradient(inst, r), fd_gradient(inst, r), rtol=1e-6)


# aggregate_loads

@pytest.mark.parametrize("r, expected", [
    ([[0.2, 0.8], [0.5, 0.5]], [0.7, 1.3]),
    (np.zeros((3, 2)), [0.0, 0.0]),
    ([[1.0, 0.0]], [1.0, 0.0]),
])
def test_aggregate_loads(r, expected):
    np.testing.assert_allclose(aggregate_loads(r), expected)


# objective

def test_objective_single_path():
    inst = Instance.mm1([1.0], [[3.0]], [2.0])
    assert objective(inst, [[1.0]]) == pytest.approx(1.5, rel=1e-15)


def test_objective_symmetric_split():
    inst = Instance.mm1([1.0], [[2.0, 2.0]], [2.0, 2.0])
    assert objective(inst, [[0.5, 0.5]]) == pytest.approx(4 / 3, rel=1e-15)


def test_objective_decomposed_equals_composed(rng):
    for _ in range(20):
        inst = random_instance(rng)
        r = random_routing(inst, rng)
        a, b = objective(inst, r), objective_composed(inst, r)
        assert abs(a - b) <= 1e-12 * abs(b)


def test_objective_distinguishes_poles():
    inst = Instance.mm1([1.0], [[1.0, 3.0]], [5.0, 0.6])
    with pytest.raises(PathPoleError) as e:
        objective(inst, [[1.0, 0.0]])
    assert (e.value.i, e.value.j) == (0, 0)
    with pytest.raises(NodePoleError) as e:
        objective(inst, [[0.3, 0.7]])
    assert e.value.j == 1


# gradient

def test_gradient_single_path_matches_oracle():
    inst = Instance.mm1([0.5], [[2.0]], [2.0])
    r = np.array([[0.5]])
    assert fd_gradient(inst, r)[0, 0] == pytest.approx(16 / 9, rel=1e-8)
    assert gradient(inst, r)[0, 0] == pytest.approx(16 / 9, rel=1e-14)


def test_gradient_at_zero_routing(inst53):
    g = gradient(inst53, np.zeros((5, 3)))
    np.testing.assert_allclose(g, 1 / inst53.mu_access + 1 / inst53.mu_node[None, :])


def test_gradient_random_matches_finite_differences(rng):
    for _ in range(5):
        inst = random_instance(rng)
        r = random_routing(inst, rng)
        np.testing.assert_allclose(gradient(inst, r), fd_gradient(inst, r), rtol=1e-6)


# check_feasible

def test_check_feasible_uniform_pass():
    inst = Instance.mm1([1.0, 1.0], np.full((2, 2), 3.0), [3.0, 3.0])
    assert check_feasible(inst, np.full((2, 2), 0.5)).ok


def test_check_feasible_row_shortfall():
    inst = Instance.mm1([1.0, 1.0], np.full((2, 2), 3.0), [3.0, 3.0])
    rep = check_feasible(inst, [[0.45, 0.45], [0.5, 0.5]])
    assert not rep.ok
    assert rep.row_residual[0] == pytest.approx(-0.1)
    assert rep.violations() == ["row 0 sum off by -1.000e-01"]


def test_check_feasible_node_at_capacity():
    inst = Instance.mm1([1.0, 1.0], np.full((2, 2), 3.0), [1.5, 3.0])
    rep = check_feasible(inst, [[0.75, 0.25], [0.75, 0.25]])
    assert not rep.ok
    assert rep.node_excess[0] > 0 and rep.node_excess[1] == 0


# traffic classes

@pytest.mark.parametrize("classes, rate", [([1], 0.1), ([3], 30.0), ([2, 4], 0.07)])
def test_traffic_class_rates(classes, rate):
    assert traffic_class_rates(classes) == pytest.approx(rate, rel=1e-12)


def test_unknown_traffic_class():
    with pytest.raises(ValidationError):
        traffic_class_rates([5])


# instance invariants

def test_instance_rejects_bad_data():
    with pytest.raises(ValidationError):
        Instance.mm1([0.0], [[1.0]], [1.0])
    with pytest.raises(ValidationError, match=r"mu_access\[0\]\[1\]"):
        Instance.mm1([1.0], [[1.0, -2.0]], [1.0, 1.0])
    with pytest.raises(ValidationError):
        Instance.mm1([1.0], [[1.0]], [1.0], eps=-1)
    with pytest.raises(InfeasibleInstance):
        Instance.mm1([1.0, 1.0], np.full((2, 2), 3.0), [0.9, 0.9])
    with pytest.raises(InfeasibleInstance):
        Instance.mm1([1.0], [[0.4, 0.5]], [5.0, 5.0])


def test_default_eps():
    inst = Instance.mm1([1.0], [[2.0, 4.0]], [3.0, 5.0])
    assert inst.eps == pytest.approx(2e-6)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_random_instances_feasible(seed):
    inst = random_instance(np.random.default_rng(seed))
    inst.require_feasible()
