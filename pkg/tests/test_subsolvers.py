import numpy as np
import pytest

import blockcd as bc
from blockcd.errors import BlockTooLarge, EmptyInterval, IdenticalIndices
from oracle_utils import check_block2_oracle, random_instance, solver_step


def _prep(p, x):
    return bc.curvature_matrix(p), bc.eval_gradient_f(p, np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# sit_block2
# ---------------------------------------------------------------------------

def test_sit_block2_zero_gradient():
    p = bc.sit_problem(np.eye(2), np.array([0.5, 0.5]), 0.0, 1, theta=0.0)
    x = np.array([0.5, 0.5])
    qb, g = _prep(p, x)
    st = bc.sit_block2(p, qb, x, g, 0, 1)
    assert st.objective_delta == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(st.d, 0.0)


def test_sit_block2_moves_to_vertex():
    p = bc.sit_problem(np.eye(2), np.array([1.0, 0.0]), 0.0, 1, theta=0.0)
    x = np.array([0.5, 0.5])
    qb, g = _prep(p, x)
    st = bc.sit_block2(p, qb, x, g, 0, 1)
    assert st.d[0] == pytest.approx(0.5)
    assert np.allclose(x + st.d, [1.0, 0.0])


def test_sit_block2_penalized_breakpoints():
    p = bc.sit_problem(np.eye(2), np.array([0.2, 0.0]), 10.0, 1, theta=0.0)
    x = np.array([0.9, 0.1])
    qb, g = _prep(p, x)
    st = bc.sit_block2(p, qb, x, g, 0, 1)
    assert st.d[0] == pytest.approx(0.1)
    assert np.allclose(x + st.d, [1.0, 0.0])
    # P(eta_bar) = -9.93 and P(0) = -9, hand-checked over all five breakpoints
    assert st.objective_delta == pytest.approx(-0.93)


def test_sit_block2_identical_indices():
    p = bc.sit_problem(np.eye(2), np.zeros(2), 0.0, 1)
    x = np.array([0.5, 0.5])
    qb, g = _prep(p, x)
    with pytest.raises(IdenticalIndices):
        bc.sit_block2(p, qb, x, g, 1, 1)


# ---------------------------------------------------------------------------
# nnspca_block2
# ---------------------------------------------------------------------------

def test_nnspca_block2_stays_at_optimum():
    p = bc.nnspca_problem(np.diag([2.0, 1.0]), 0.0, 2, gamma=5.0, theta=0.0)  # Qhat=diag(1,4)
    x = np.array([1.0, 0.0])
    qb, g = _prep(p, x)
    st = bc.nnspca_block2(p, qb, x, g, 0, 1)
    assert st.objective_delta == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(x + st.d, [1.0, 0.0], atol=1e-12)


def test_nnspca_block2_rotation_invariant_objective():
    # Qhat = gamma*I makes the objective constant on the sphere slice
    rng = np.random.Generator(np.random.Philox(8))
    A = np.zeros((2, 3))
    p = bc.nnspca_problem(A, 0.0, 3, gamma=2.5, theta=0.0)
    fs = bc.feasible_set_for(p)
    for _ in range(20):
        x = bc.project(fs, np.abs(rng.normal(size=3)))
        qb, g = _prep(p, x)
        i, j = rng.choice(3, size=2, replace=False)
        st = bc.nnspca_block2(p, qb, x, g, int(i), int(j))
        assert st.objective_delta == pytest.approx(0.0, abs=1e-10)


def test_nnspca_block2_moves_to_low_curvature():
    p = bc.nnspca_problem(np.diag([1.0, 2.0]), 0.0, 2, gamma=5.0, theta=0.0)  # Qhat=diag(4,1)
    x = np.array([1.0, 0.0])
    qb, g = _prep(p, x)
    st = bc.nnspca_block2(p, qb, x, g, 0, 1)
    assert np.allclose(x + st.d, [0.0, 1.0], atol=1e-12)
    assert st.objective_delta == pytest.approx(-1.5)


def test_nnspca_block2_degenerate_block_returns_zero_step():
    p = bc.nnspca_problem(np.diag([1.0, 1.0, 1.0]), 1.0, 1, gamma=2.0, theta=0.0)
    x = np.array([1.0, 0.0, 0.0])
    qb, g = _prep(p, x)
    st = bc.nnspca_block2(p, qb, x, g, 1, 2)
    assert np.allclose(st.d, 0.0)
    assert st.objective_delta == 0.0


def test_nnspca_trig_identity_preserved():
    rng = np.random.Generator(np.random.Philox(9))
    for _ in range(60):
        p, fs, x = random_instance(bc.Family.NNSPCA, rng)
        i, j = rng.choice(p.n, size=2, replace=False)
        st = solver_step(p, x, int(i), int(j))
        v2 = x[i] ** 2 + x[j] ** 2
        v2_new = (x[i] + st.d[0]) ** 2 + (x[j] + st.d[1]) ** 2
        assert abs(v2_new - v2) <= 1e-12 * (1 + v2)


# ---------------------------------------------------------------------------
# dcpb1_block2
# ---------------------------------------------------------------------------

def test_dcpb1_block2_linear_objective():
    p = bc.dcpb1_problem(np.eye(2), np.array([-1.0, 1.0]), 0.5, 0.0, theta=0.0)  # Qhat=0, p=(1,-1)
    x = np.zeros(2)
    qb, g = _prep(p, x)
    st = bc.dcpb1_block2(p, qb, x, g, 0, 1)
    assert st.d[0] == pytest.approx(-1.0)
    assert np.allclose(x + st.d, [-1.0, 1.0])


def test_dcpb1_block2_concave_endpoints():
    p = bc.dcpb1_problem(np.eye(2), np.array([-0.1, 0.0]), 1.0, 0.0, theta=0.0)  # Qhat=I, p=(0.1,0)
    x = np.zeros(2)
    qb, g = _prep(p, x)
    st = bc.dcpb1_block2(p, qb, x, g, 0, 1)
    assert st.d[0] == pytest.approx(-1.0)
    assert st.objective_delta == pytest.approx(-1.1)


def test_dcpb1_block2_stays_at_corner():
    p = bc.dcpb1_problem(np.eye(2), np.array([-0.1, 0.0]), 1.0, 0.0, theta=0.0)
    x = np.array([-1.0, 1.0])
    qb, g = _prep(p, x)
    st = bc.dcpb1_block2(p, qb, x, g, 0, 1)
    assert np.allclose(st.d, 0.0)


def test_dcpb1_block2_empty_interval():
    p = bc.dcpb1_problem(np.eye(2), np.zeros(2), 1.0, 0.0, theta=0.0)
    x = np.array([1.5, 1.5])  # outside the box
    qb = bc.curvature_matrix(p)
    with pytest.raises(EmptyInterval):
        bc.dcpb1_block2(p, qb, x, bc.eval_gradient_f(p, x), 0, 1)


# ---------------------------------------------------------------------------
# dcpb2_block2
# ---------------------------------------------------------------------------

def test_dcpb2_block2_stationary_root():
    p = bc.dcpb2_problem(np.eye(2), np.array([0.1, 0.0]), 1.0, 0.0, theta=0.0)
    x = np.zeros(2)
    qb, g = _prep(p, x)
    st = bc.dcpb2_block2(p, qb, x, g, 0, 1)
    assert st.d[0] == pytest.approx(0.7571, abs=1e-4)
    assert st.objective_delta == pytest.approx(-0.5732, abs=1e-4)


def test_dcpb2_block2_zero_gradient():
    p = bc.dcpb2_problem(np.eye(2), np.zeros(2), 0.0, 0.0, theta=0.0)
    x = np.zeros(2)
    qb, g = _prep(p, x)
    st = bc.dcpb2_block2(p, qb, x, g, 0, 1)
    assert np.allclose(st.d, 0.0)


def test_dcpb2_block2_symmetric_tie():
    p = bc.dcpb2_problem(np.eye(2), np.zeros(2), 1.0, 0.0, theta=0.0)
    x = np.zeros(2)
    qb, g = _prep(p, x)
    st = bc.dcpb2_block2(p, qb, x, g, 0, 1)
    assert abs(st.d[0]) == pytest.approx(np.sqrt(2) / 2)
    assert st.objective_delta == pytest.approx(-0.5)
    # deterministic tie: the candidates are scanned in a fixed order
    st2 = bc.dcpb2_block2(p, qb, x, g, 0, 1)
    assert st.d[0] == st2.d[0]


# ---------------------------------------------------------------------------
# sit_blockk_local
# ---------------------------------------------------------------------------

def test_blockk_matches_block2_when_penalty_free():
    rng = np.random.Generator(np.random.Philox(12))
    for _ in range(60):
        m, n = 6, 4
        A = rng.normal(size=(m, n))
        p = bc.sit_problem(A, rng.normal(size=m), 0.0, 2, theta=1e-4)
        fs = bc.feasible_set_for(p)
        x = bc.project(fs, np.abs(rng.normal(size=n)))
        qb, g = _prep(p, x)
        i, j = rng.choice(n, size=2, replace=False)
        s2 = bc.sit_block2(p, qb, x, g, int(i), int(j))
        sk = bc.sit_blockk_local(p, qb, x, g, [int(i), int(j)])
        assert abs(s2.objective_delta - sk.objective_delta) <= 1e-6


def test_blockk_zero_gradient_stays():
    p = bc.sit_problem(np.eye(2), np.array([0.5, 0.5]), 0.0, 1, theta=0.0)
    x = np.array([0.5, 0.5])
    qb, g = _prep(p, x)
    st = bc.sit_blockk_local(p, qb, x, g, [0, 1])
    assert np.allclose(st.d, 0.0)


def test_blockk_solves_equality_qp():
    p = bc.sit_problem(np.eye(3), np.array([1.0, 0.0, 0.0]), 0.0, 1, theta=0.0)
    x = np.full(3, 1 / 3)
    qb, g = _prep(p, x)
    st = bc.sit_blockk_local(p, qb, x, g, [0, 1, 2])
    assert np.allclose(x + st.d, [1.0, 0.0, 0.0], atol=1e-3)


def test_blockk_guard():
    p = bc.sit_problem(np.eye(21), np.zeros(21), 0.0, 2)
    x = np.full(21, 1 / 21)
    qb, g = _prep(p, x)
    with pytest.raises(BlockTooLarge):
        bc.sit_blockk_local(p, qb, x, g, list(range(21)))


def test_blockk_penalized_beats_zero():
    rng = np.random.Generator(np.random.Philox(13))
    for _ in range(40):
        m, n = 8, 6
        A = rng.normal(size=(m, n))
        p = bc.sit_problem(A, rng.normal(size=m), float(rng.choice([0.5, 5.0])), 2, theta=1e-4)
        fs = bc.feasible_set_for(p)
        x = bc.project(fs, np.abs(rng.normal(size=n)))
        qb, g = _prep(p, x)
        B = np.sort(rng.choice(n, size=3, replace=False))
        st = bc.sit_blockk_local(p, qb, x, g, B)
        assert st.objective_delta <= 1e-12
        xn = x.copy()
        xn[st.working_set] += st.d
        assert bc.feasibility_residual(fs, xn) <= 1e-9


# ---------------------------------------------------------------------------
# shared properties
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("family", list(bc.Family))
def test_block2_oracle_equivalence(family):
    check_block2_oracle(family, 60, seed=21)


@pytest.mark.parametrize("family", list(bc.Family))
def test_block2_delta_nonpositive_and_feasible(family):
    rng = np.random.Generator(np.random.Philox(22))
    for _ in range(60):
        p, fs, x = random_instance(family, rng)
        i, j = rng.choice(p.n, size=2, replace=False)
        st = solver_step(p, x, int(i), int(j))
        assert st.objective_delta <= 1e-12
        xn = x.copy()
        xn[st.working_set] += st.d
        assert bc.feasibility_residual(fs, xn) <= 1e-9


def test_block2_zero_optimal_gives_zero_delta():
    # at an unconstrained-optimal interior point the best step is zero
    p = bc.sit_problem(np.eye(3), np.full(3, 1 / 3), 0.0, 3, theta=0.0)
    x = np.full(3, 1 / 3)
    qb, g = _prep(p, x)
    for i, j in ((0, 1), (1, 2), (0, 2)):
        st = bc.sit_block2(p, qb, x, g, i, j)
        assert st.objective_delta == pytest.approx(0.0, abs=1e-14)
