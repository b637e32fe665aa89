import numpy as np
import pytest
from scipy.optimize import minimize

from projpost.sets import (
    Ball2D,
    Box,
    Halfspace,
    NonnegativeOrthant,
    PolyhedralCone,
    QuarterDisc,
    WholeSpace,
    activity_tol,
    pack_active_codes,
    set_from_config,
    unpack_active_code,
)

ALL_SETS = [
    WholeSpace(3),
    Halfspace(np.array([1.0, -2.0, 0.5]), 0.7),
    Box(np.zeros(3), np.ones(3)),
    NonnegativeOrthant(3),
    PolyhedralCone(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0]])),
]
PLANAR_SETS = [Ball2D(), QuarterDisc()]


def _project_oracle(cset, x):
    """Independent projection via SLSQP on the constrained QP."""
    cons = []
    if isinstance(cset, Halfspace):
        cons = [{"type": "ineq", "fun": lambda z: cset.b - cset.a @ z}]
    elif isinstance(cset, Box):
        cons = [{"type": "ineq", "fun": lambda z: z - cset.lo},
                {"type": "ineq", "fun": lambda z: cset.hi - z}]
    elif isinstance(cset, NonnegativeOrthant):
        cons = [{"type": "ineq", "fun": lambda z: z}]
    elif isinstance(cset, PolyhedralCone):
        cons = [{"type": "ineq", "fun": lambda z: -cset.normals @ z}]
    elif isinstance(cset, Ball2D):
        cons = [{"type": "ineq", "fun":
                 lambda z: cset.radius**2 - np.sum((z - cset.center) ** 2)}]
    elif isinstance(cset, QuarterDisc):
        cons = [{"type": "ineq", "fun": lambda z: z},
                {"type": "ineq", "fun": lambda z: 1.0 - np.sum(z**2)}]
    res = minimize(lambda z: 0.5 * np.sum((z - x) ** 2), np.zeros(cset.dim),
                   jac=lambda z: z - x, method="SLSQP", constraints=cons,
                   options={"maxiter": 200, "ftol": 1e-14})
    return res.x


class TestProjectExamples:
    def test_orthant_clamp(self):
        assert np.array_equal(NonnegativeOrthant(2).project([-1.0, 2.0]),
                              [0.0, 2.0])

    def test_box_clamp(self):
        assert np.array_equal(Box.unit(2).project([1.5, 0.5]), [1.0, 0.5])

    def test_halfspace_closed_form(self):
        z = Halfspace(np.array([1.0, 0.0]), 0.0).project([2.0, 3.0])
        assert np.allclose(z, [0.0, 3.0], atol=1e-14)

    def test_ball_radial(self):
        z = Ball2D().project([3.0, 4.0])
        assert np.allclose(z, [0.6, 0.8], atol=1e-14)


class TestProjectionProperties:
    @pytest.mark.parametrize("cset", ALL_SETS + PLANAR_SETS,
                             ids=lambda s: type(s).__name__)
    def test_idempotent_and_member(self, cset, rng):
        for _ in range(25):
            x = 3.0 * rng.standard_normal(cset.dim)
            z = cset.project(x)
            assert cset.contains(z, 1e-9)
            z2 = cset.project(z)
            tol = 0.0 if cset.clip_bounds() is not None else 1e-12
            assert np.max(np.abs(z2 - z)) <= tol + 1e-12

    @pytest.mark.parametrize("cset", ALL_SETS + PLANAR_SETS,
                             ids=lambda s: type(s).__name__)
    def test_variational_inequality(self, cset, rng):
        for _ in range(20):
            x = 3.0 * rng.standard_normal(cset.dim)
            z = cset.project(x)
            for _ in range(20):
                y = cset.project(3.0 * rng.standard_normal(cset.dim))
                assert (x - z) @ (y - z) <= 1e-9

    @pytest.mark.parametrize("cset", [ALL_SETS[4], PLANAR_SETS[1]],
                             ids=["cone", "quarter"])
    def test_matches_qp_oracle(self, cset, rng):
        for _ in range(20):
            x = 2.0 * rng.standard_normal(cset.dim)
            z = cset.project(x)
            z_ref = _project_oracle(cset, x)
            assert np.linalg.norm(z - z_ref) < 5e-6

    @pytest.mark.parametrize("cset", ALL_SETS + PLANAR_SETS,
                             ids=lambda s: type(s).__name__)
    def test_face_of_after_project_never_errors(self, cset, rng):
        for _ in range(30):
            x = 4.0 * rng.standard_normal(cset.dim)
            z = cset.project(x)
            face = cset.face_of(z, activity_tol(z))
            assert 0 <= face.face_dim <= cset.dim


class TestFaces:
    def test_orthant_apex(self):
        f = NonnegativeOrthant(3).face_of(np.zeros(3), 0.0)
        assert f.face_dim == 0

    def test_orthant_nonzero_count(self):
        f = NonnegativeOrthant(3).face_of(np.array([1.0, 0.0, 2.0]), 0.0)
        assert f.face_dim == 2

    def test_orthant_face_dim_is_positive_count(self, rng):
        cset = NonnegativeOrthant(5)
        for _ in range(30):
            z = cset.project(rng.standard_normal(5))
            f = cset.face_of(z, 0.0)
            assert f.face_dim == int(np.sum(z > 0))

    def test_box_one_active(self):
        f = Box.unit(2).face_of(np.array([1.0, 0.3]), 0.0)
        assert f.face_dim == 1

    def test_box_pinned_coordinate(self):
        box = Box(np.array([0.0, 0.5]), np.array([1.0, 0.5]))
        f = box.face_of(np.array([0.4, 0.5]), 0.0)
        assert f.face_dim == 1

    def test_cone_face_rank(self):
        cone = PolyhedralCone(np.array([[1.0, 0.0], [2.0, 0.0]]))
        f = cone.face_of(np.array([0.0, -1.0]), 0.0)
        # both active normals are parallel: rank 1
        assert f.face_dim == 1

    def test_outside_point_raises(self):
        with pytest.raises(ValueError, match="outside"):
            NonnegativeOrthant(2).face_of(np.array([-0.5, 1.0]), 0.0)

    def test_ball_boundary_face(self):
        f = Ball2D().face_of(np.array([1.0, 0.0]), 0.0)
        assert f.face_dim == 1
        f2 = Ball2D().face_of(np.array([0.1, 0.2]), 0.0)
        assert f2.face_dim == 2


class TestNormalCones:
    def test_orthant_single_active(self):
        cset = NonnegativeOrthant(2)
        f = cset.face_of(np.array([0.0, 1.0]), 0.0)
        gens = cset.normal_cone_generators(f)
        assert len(gens) == 1
        assert np.array_equal(gens[0], [-1.0, 0.0])

    def test_box_upper_bound(self):
        box = Box(np.zeros(1), np.ones(1))
        f = box.face_of(np.array([1.0]), 0.0)
        gens = box.normal_cone_generators(f)
        assert len(gens) == 1 and gens[0][0] == 1.0

    def test_orthant_apex_two_generators(self):
        cset = NonnegativeOrthant(2)
        f = cset.face_of(np.zeros(2), 0.0)
        gens = np.stack(cset.normal_cone_generators(f))
        assert gens.shape == (2, 2)
        assert np.array_equal(np.sort(gens, axis=0),
                              [[-1.0, -1.0], [0.0, 0.0]])

    def test_wholespace_empty(self):
        ws = WholeSpace(3)
        assert ws.normal_cone_generators(ws.face_of(np.zeros(3))) == []

    def test_ball_needs_point(self):
        ball = Ball2D()
        f = ball.face_of(np.array([0.0, 1.0]), 0.0)
        with pytest.raises(ValueError):
            ball.normal_cone_generators(f)
        gens = ball.normal_cone_generators(f, x=np.array([0.0, 1.0]))
        assert np.allclose(gens[0], [0.0, 1.0])

    def test_sign_convention_outward(self, rng):
        # v in N_C(z) must satisfy v @ (y - z) <= 0 for all y in C
        for cset in ALL_SETS[1:]:
            for _ in range(10):
                z = cset.project(2.0 * rng.standard_normal(cset.dim))
                face = cset.face_of(z, activity_tol(z))
                for v in cset.normal_cone_generators(face, x=z):
                    for _ in range(20):
                        y = cset.project(2.0 * rng.standard_normal(cset.dim))
                        assert v @ (y - z) <= 1e-8


class TestValidationAndConfig:
    def test_box_bad_bounds(self):
        with pytest.raises(ValueError):
            Box(np.ones(2), np.zeros(2))

    def test_halfspace_zero_normal(self):
        with pytest.raises(ValueError):
            Halfspace(np.zeros(2), 1.0)

    def test_ball_bad_radius(self):
        with pytest.raises(ValueError):
            Ball2D(radius=0.0)

    def test_pack_unpack_roundtrip(self, rng):
        act = rng.random((20, 7)) < 0.4
        codes = pack_active_codes(act)
        for i in range(20):
            assert unpack_active_code(int(codes[i]), 7) == tuple(act[i])

    def test_set_from_config(self):
        assert isinstance(set_from_config("unconstrained", 4), WholeSpace)
        assert isinstance(set_from_config("nonnegative", 4), NonnegativeOrthant)
        box = set_from_config({"kind": "box", "lo": 0.0, "hi": 2.0}, 3)
        assert isinstance(box, Box) and box.hi[0] == 2.0
        hs = set_from_config({"kind": "halfspace", "a": [1, 0], "b": 1.0}, 2)
        assert isinstance(hs, Halfspace)
        with pytest.raises(ValueError):
            set_from_config("mystery", 2)
