import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import same_up_to_sign
from robustpulse import numsearch as N
from robustpulse.sequences import ControlScheme, evaluate, overlap_with
from robustpulse.su2 import ErrorParams, global_pulse

PI = math.pi
GATES = ("H", "Z(pi/4)", "Y(pi/2)", "X(pi/2)")


def _random_problem(rng, scheme, k):
    if scheme is ControlScheme.AC:
        phases = tuple(rng.uniform(0, 2 * PI, k))
    else:
        phases = tuple(None if rng.random() < 0.4 else rng.uniform(0, 2 * PI) for _ in range(k))
    target = global_pulse(rng.uniform(0, PI), rng.uniform(0, 2 * PI))
    return N.SearchProblem(scheme, target, phases, (0.05, 0.05, 0.05), seeds=0)


@given(st.floats(0, 3 * PI), st.floats(0, 2 * PI), st.floats(-0.1, 0.1), st.floats(-0.1, 0.1),
       st.floats(-0.1, 0.1))
def test_xy_slot_identity(theta, phi, e, d, s):
    assert same_up_to_sign(N.zc_xy_slot(theta, phi).as_array(), global_pulse(theta, phi).as_array(), 1e-12)
    # global pi/2 pulses see eps and delta, the inner Z sees eps_s
    prob = N.SearchProblem(ControlScheme.ZC, global_pulse(1, 0), (phi,))
    seq = N.to_sequence(prob, [theta])
    err = ErrorParams(e, d, s)
    assert same_up_to_sign(evaluate(seq, err).as_array(), N.zc_xy_slot(theta, phi, err).as_array(), 1e-12)


@pytest.mark.parametrize("scheme", [ControlScheme.AC, ControlScheme.ZC])
def test_jacobian_matches_central_differences(scheme, rng):
    h = 1e-5
    for _ in range(10):
        prob = _random_problem(rng, scheme, int(rng.integers(2, 9)))
        x = rng.uniform(0, 3 * PI, prob.n_slots)
        err = ErrorParams(*rng.uniform(-0.05, 0.05, 3))
        errs = [[err.epsilon, err.delta, err.epsilon_s]]
        dU, _ = N.jacobian(prob, x, err)
        for i in range(prob.n_slots):
            step = np.zeros_like(x)
            step[i] = h
            up = N.unitary_and_jacobian(prob, x + step, errs)[0][0]
            dn = N.unitary_and_jacobian(prob, x - step, errs)[0][0]
            assert np.max(np.abs((up - dn) / (2 * h) - dU[i])) < 1e-8


def test_objective_gradient_matches_finite_differences(rng):
    prob = _random_problem(rng, ControlScheme.ZC, 6)
    x = rng.uniform(0, 3 * PI, prob.n_slots)
    f, g = N._stage1(prob)(x)
    h = 1e-6
    fd = [(N._stage1(prob)(x + h * e)[0] - N._stage1(prob)(x - h * e)[0]) / (2 * h)
          for e in np.eye(len(x))]
    assert np.allclose(fd, g, atol=1e-7)
    assert -f == pytest.approx(N.objective(prob, x))


@pytest.mark.parametrize("name", sorted(N.PRESETS))
@pytest.mark.parametrize("gate", GATES)
def test_printed_rows_are_near_stationary(name, gate):
    prob = N.preset_problem(name, gate, seeds=0)
    thetas = N.printed_thetas(name, gate)
    assert N.fidelities(prob, thetas)[0] > 1 - 1e-8
    assert np.max(np.abs(N.gradient_at_zero(prob, thetas))) < 1e-3
    seq = N.to_sequence(prob, thetas)
    assert overlap_with(seq, prob.target) == pytest.approx(1.0, abs=1e-8)


def test_preset_hypercubes():
    cube = N.preset_problem("nUZ-SORE", "H").hypercube
    assert cube == (0.0, 0.05, 0.05)
    assert len(N.preset_problem("nUZ-SAORE", "H").corners()) == 8
    assert len(N.preset_problem("nUA-AE", "H").corners()) == 2
    with pytest.raises(KeyError):
        N.preset_problem("nUA-XYZ", "H")


def test_problem_validation():
    t = global_pulse(1, 0)
    with pytest.raises(ValueError):
        N.SearchProblem(ControlScheme.PC, t, (0.0,))
    with pytest.raises(ValueError):
        N.SearchProblem(ControlScheme.AC, t, (None,))
    with pytest.raises(ValueError):
        N.SearchProblem(ControlScheme.AC, t, (0.0,), (0.1, -0.1, 0.0))
    assert N.SearchProblem(ControlScheme.AC, t, (0.0,)).corners().shape == (0, 3)


def test_search_from_printed_seed_is_deterministic_and_accepted():
    prob = N.preset_problem("nUA-AE", "H", seeds=3, rng_seed=11)
    a = N.two_stage_search(prob)
    b = N.two_stage_search(prob)
    assert a == b
    assert a.accepted and a.fidelity_at_zero >= 1 - 1e-6
    assert a.gradient_norm < 1e-6
    assert np.all(np.array(a.thetas) >= 0) and np.all(np.array(a.thetas) <= 3 * PI)


def test_seed_points_order():
    prob = N.preset_problem("nUA-ORE", "H", seeds=5, rng_seed=2)
    pts = N.seed_points(prob)
    assert pts.shape == (6, prob.n_slots)
    assert np.allclose(pts[0], N.printed_thetas("nUA-ORE", "H"))
    assert np.array_equal(pts, N.seed_points(prob))


def test_infeasible_search_raises():
    # one Z slot cannot make an X rotation
    prob = N.SearchProblem(ControlScheme.ZC, global_pulse(PI / 2, 0), (None,), seeds=2)
    with pytest.raises(N.SearchError):
        N.two_stage_search(prob)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31))
def test_fidelities_bounded(seed):
    rng = np.random.default_rng(seed)
    prob = _random_problem(rng, ControlScheme.AC, 4)
    f = N.fidelities(prob, rng.uniform(0, 3 * PI, 4))
    assert np.all((f >= 0) & (f <= 1 + 1e-12))


@pytest.mark.parametrize("name", ["nUA-AE", "nUA-AORE1", "nUZ-SORE"])
def test_paraboloid_property(name):
    prob = N.preset_problem(name, "H", seeds=0)
    res = N.two_stage_search(prob)
    axes = [np.linspace(-h, h, 5) if h > 0 else [0.0] for h in prob.hypercube]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(3, -1).T
    f = N.fidelities(prob, res.thetas, pts)
    assert np.all(f <= res.fidelity_at_zero + 1e-12)


PROBLEM = """\
# demo
preset: nUA-AE
gate: H
seeds: 4
rng_seed: 9
"""


def test_problem_file_preset():
    prob = N.loads_problem(PROBLEM)
    assert prob.scheme is ControlScheme.AC
    assert prob.seeds == 4 and prob.rng_seed == 9
    assert prob.hypercube == (0.05, 0.0, 0.0)
    assert len(prob.table_seeds) == 1 and prob.label == "nUA-AE"


def test_problem_file_explicit(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("scheme: zc\nphases: z 0.5 z 0 z\ntarget: 0 0.5 1\nhypercube: 0 0 0.05\n")
    prob = N.read_problem(path)
    assert prob.phases[0] is None and prob.phases[1] == pytest.approx(PI / 2)
    assert prob.seeds == N.DEFAULT_SEEDS


@pytest.mark.parametrize("text,line", [
    ("preset: nUA-AE\ngate: H\nfoo: 1\n", 3),
    ("preset: nUA-AE\ngate: H\ngate: H\n", 3),
    ("preset: nUA-AE\nbroken line\n", 2),
    ("preset: nope\ngate: H\n", 1),
    ("preset: nUA-AE\ngate: W\n", 2),
    ("preset: nUA-AE\ngate: H\nseeds: many\n", 3),
    ("preset: nUA-AE\ngate: H\nseeds: -1\n", 3),
    ("scheme: ZC\npreset: nUA-AE\ngate: H\n", 1),
    ("scheme: PC\nphases: 0 1\ntarget: 0 1 0\nhypercube: 0 0 0\n", 1),
    ("scheme: AC\nphases: 0 x\ntarget: 0 1 0\nhypercube: 0 0 0\n", 2),
    ("scheme: AC\nphases: 0 1\ntarget: 0 1\nhypercube: 0 0 0\n", 3),
    ("scheme: AC\nphases: 0 1\ntarget: 0 1 0\n", 0),
    ("scheme: AC\nphases: 0 z\ntarget: 0 1 0\nhypercube: 0 0 0\n", 0),
    ("phases: 0 1\ntarget: 0 1 0\nhypercube: 0 0 0\n", 0),
    ("preset: nUA-AE\nphases: 0\ngate: H\n", 0),
    ("preset: nUA-AE\n", 0),
])
def test_problem_file_errors(text, line):
    with pytest.raises(N.ProblemParseError) as exc:
        N.loads_problem(text)
    assert exc.value.lineno == line
