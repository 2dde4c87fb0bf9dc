import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from flagopt.estimator import (
    ROHFSolver,
    check_integrals,
    check_partition,
    orthonormalize_guess,
)
from flagopt.exceptions import ShapeError
from flagopt.geometry import FlagShape
from flagopt.integrals import random_integrals

from conftest import DATA, references


def test_params_roundtrip():
    est = ROHFSolver(method="RLBFGS", memory=5, preconditioner="sylvester")
    params = est.get_params()
    assert params["method"] == "RLBFGS" and params["memory"] == 5
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(tolerance=1e-7)
    assert est.tolerance == 1e-7


def test_fit_path_and_predict():
    est = ROHFSolver(method="RLBFGS", preconditioner="sylvester")
    path = DATA / "oh_doublet_sto3g.fcidump"
    est.fit(path)
    ref = references()["oh_doublet_sto3g"]["energy"]
    assert est.converged_
    assert est.energy_ == pytest.approx(ref, abs=1e-8)
    assert est.predict(path) == pytest.approx(est.energy_, abs=1e-12)
    assert est.score(path) == pytest.approx(-est.energy_)
    assert est.coef_.shape == (6, 6)
    assert (est.shape_.n_internal, est.shape_.n_active) == (4, 1)
    assert est.n_iter_ == len(est.trace_) - 1


def test_fit_from_text():
    text = (DATA / "oh_doublet_sto3g.fcidump").read_text()
    a = ROHFSolver().fit(text)
    b = ROHFSolver().fit(str(DATA / "oh_doublet_sto3g.fcidump"))
    assert a.energy_ == b.energy_


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        ROHFSolver().predict(DATA / "oh_doublet_sto3g.fcidump")


def test_predict_size_mismatch():
    est = ROHFSolver().fit(DATA / "oh_doublet_sto3g.fcidump")
    with pytest.raises(ShapeError):
        est.predict(random_integrals(7, seed=0))


def test_invalid_parameters_surface_at_fit():
    ints = random_integrals(4, seed=0)
    for bad in ({"method": "Newton"}, {"preconditioner": "diag"}, {"guess": "huckel"}):
        with pytest.raises(ValueError):
            ROHFSolver(n_internal=1, n_active=1, **bad).fit(ints)


def test_random_guess_seeded():
    ints = random_integrals(5, seed=3)
    a = ROHFSolver(n_internal=1, n_active=2, guess="random", seed=4).fit(ints)
    b = ROHFSolver(n_internal=1, n_active=2, guess="random", seed=4).fit(ints)
    assert a.trace_ == b.trace_


def test_array_guess_and_warm_start():
    path = DATA / "oh_doublet_sto3g.fcidump"
    first = ROHFSolver(method="RLBFGS").fit(path)
    warm = ROHFSolver(guess=first.coef_).fit(path)
    assert warm.n_iter_ == 0
    assert warm.energy_ == pytest.approx(first.energy_, abs=1e-10)


def test_callback_sees_every_iteration():
    seen = []
    est = ROHFSolver().fit(DATA / "oh_doublet_sto3g.fcidump",
                           callback=lambda rec, point: seen.append(rec.index))
    assert seen == list(range(est.n_iter_ + 1))


class TestValidation:
    def test_check_integrals_rejects_other_types(self):
        with pytest.raises(TypeError):
            check_integrals(np.eye(3))

    def test_partition_from_header(self):
        from flagopt.integrals import read_fcidump

        ints = read_fcidump(DATA / "ch2_triplet_sto3g.fcidump")
        assert check_partition(ints) == FlagShape(7, 3, 2)

    def test_partition_requires_counts(self):
        with pytest.raises(ShapeError):
            check_partition(random_integrals(3, seed=0))

    def test_partition_explicit(self):
        assert check_partition(random_integrals(3, seed=0), 1, 1) == FlagShape(3, 1, 1)

    def test_partition_electron_mismatch_warns(self):
        from flagopt.integrals import read_fcidump

        ints = read_fcidump(DATA / "ch2_triplet_sto3g.fcidump")
        with pytest.warns(UserWarning, match="NELEC"):
            check_partition(ints, 4, 2)

    def test_polar_guess(self):
        shape = FlagShape(4, 1, 1)
        Q = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 4)))[0]
        point, drift = orthonormalize_guess(Q, shape)
        assert drift < 1e-12
        with pytest.warns(UserWarning, match="re-orthogonalized"):
            point, drift = orthonormalize_guess(Q + 1e-3, shape)
        assert np.linalg.norm(point.C.T @ point.C - np.eye(4)) <= 1e-12
        with pytest.raises(ShapeError):
            orthonormalize_guess(np.eye(3), shape)
