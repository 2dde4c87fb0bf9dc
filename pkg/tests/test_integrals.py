import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flagopt.exceptions import FCIDumpError, ShapeError
from flagopt.integrals import (
    IntegralSet,
    coulomb,
    exchange,
    parse_fcidump,
    random_integrals,
    read_fcidump,
    symmetrize_eri,
    write_fcidump,
)
from flagopt.verification import brute_force_jk

HEADER = "&FCI NORB=2,NELEC=2,MS2=0,\n ORBSYM=1,1,\n ISYM=1,\n&END\n"


def _sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


class TestParse:
    def test_two_electron_record(self):
        ints = parse_fcidump(HEADER + "0.625 1 1 1 1\n")
        assert ints.eri_element(0, 0, 0, 0) == 0.625

    def test_one_electron_and_core(self):
        ints = parse_fcidump(HEADER + "-0.5 1 1 0 0\n1.0 0 0 0 0\n")
        assert ints.h[0, 0] == -0.5
        assert ints.e_core == 1.0

    def test_eightfold_accessor(self):
        ints = parse_fcidump(HEADER + "0.25 1 2 1 1\n")
        for idx in ((0, 1, 0, 0), (1, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 0)):
            assert ints.eri_element(*idx) == 0.25

    def test_unspecified_default_zero(self):
        ints = parse_fcidump(HEADER + "0.5 1 1 1 1\n")
        assert ints.eri_element(1, 1, 1, 1) == 0.0
        assert not np.any(ints.h)

    def test_header_fields(self):
        ints = parse_fcidump("&FCI NORB=3, NELEC=3, MS2=1 /\n")
        assert (ints.n_orb, ints.n_elec, ints.ms2) == (3, 3, 1)

    def test_header_slash_and_dollar(self):
        assert parse_fcidump("&FCI NORB=1,NELEC=1,\n/\n").n_orb == 1
        assert parse_fcidump("$FCI NORB=1,NELEC=1 $END\n".replace("$FCI", "&FCI")).n_orb == 1

    def test_fortran_exponent(self):
        ints = parse_fcidump(HEADER + "0.5D-01 1 1 0 0\n1.0d+00 2 2 0 0\n")
        assert ints.h[0, 0] == 0.05
        assert ints.h[1, 1] == 1.0

    def test_orbital_energy_records_skipped(self):
        ints = parse_fcidump(HEADER + "-0.3 1 0 0 0\n-0.5 1 1 0 0\n")
        assert ints.h[0, 0] == -0.5

    def test_duplicate_warns_and_overwrites(self):
        with pytest.warns(UserWarning, match="duplicate"):
            ints = parse_fcidump(HEADER + "0.1 1 2 0 0\n0.2 2 1 0 0\n")
        assert ints.h[0, 1] == ints.h[1, 0] == 0.2

    def test_stream_input(self):
        assert parse_fcidump(io.StringIO(HEADER)).n_orb == 2


class TestParseErrors:
    @pytest.mark.parametrize(
        "text, lineno",
        [
            ("NORB=2\n", 1),
            ("&FCI NELEC=2,\n&END\n", 1),
            ("&FCI NORB=2,\n&END\n", 1),
            ("&FCI NORB=x,NELEC=2,\n&END\n", 1),
            ("&FCI NORB=2,NELEC=2,\n", 1),
            (HEADER + "abc 1 1 1 1\n", 5),
            (HEADER + "0.5 1 1 1\n", 5),
            (HEADER + "0.5 1 1 1 1\n0.5 3 1 1 1\n", 6),
            (HEADER + "0.5 -1 1 1 1\n", 5),
            (HEADER + "0.5 1 x 1 1\n", 5),
            (HEADER + "0.5 1 0 1 0\n", 5),
        ],
    )
    def test_line_numbers(self, text, lineno):
        with pytest.raises(FCIDumpError) as info:
            parse_fcidump(text)
        assert info.value.lineno == lineno
        assert str(info.value).startswith(f"line {lineno}:")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_fcidump(tmp_path / "absent")


class TestRoundTrip:
    def test_write_then_read(self):
        ints = random_integrals(4, seed=3, e_core=1.5)
        buf = io.StringIO()
        write_fcidump(buf, ints, n_elec=4, ms2=2)
        back = parse_fcidump(buf.getvalue())
        np.testing.assert_allclose(back.h, ints.h, atol=1e-15)
        np.testing.assert_allclose(back.eri, ints.eri, atol=1e-15)
        assert back.e_core == ints.e_core
        assert (back.n_elec, back.ms2) == (4, 2)

    def test_bundled_fixture_roundtrip(self, data_dir):
        ints = read_fcidump(data_dir / "ch2_triplet_sto3g.fcidump")
        buf = io.StringIO()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            write_fcidump(buf, ints)
            back = parse_fcidump(buf.getvalue())
        np.testing.assert_allclose(back.eri, ints.eri, atol=1e-15)


class TestIntegralSet:
    def test_rejects_asymmetric_h(self):
        with pytest.raises(ValueError):
            IntegralSet(2, 0.0, [[0, 1], [0, 0]], np.zeros((2,) * 4))

    def test_rejects_asymmetric_eri(self):
        eri = np.zeros((2,) * 4)
        eri[0, 1, 0, 0] = 1.0
        with pytest.raises(ValueError):
            IntegralSet(2, 0.0, np.eye(2), eri)

    def test_rejects_bad_shape(self):
        with pytest.raises(ShapeError):
            IntegralSet(2, 0.0, np.eye(3), np.zeros((2,) * 4))

    def test_read_only(self):
        ints = random_integrals(3, seed=0)
        with pytest.raises(ValueError):
            ints.h[0, 0] = 1.0

    def test_rotation_preserves_jk_traces(self):
        ints = random_integrals(4, seed=1)
        Q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((4, 4)))
        P = _sym(np.random.default_rng(3), 4)
        rot = ints.rotated(Q)
        lhs = np.sum(coulomb(rot, Q.T @ P @ Q) * (Q.T @ P @ Q))
        assert lhs == pytest.approx(np.sum(coulomb(ints, P) * P), rel=1e-12)


class TestCoulombExchange:
    def test_single_orbital(self):
        ints = IntegralSet(1, 0.0, [[0.0]], [[[[0.625]]]])
        P = np.array([[1.0]])
        assert coulomb(ints, P)[0, 0] == 0.625
        assert exchange(ints, P)[0, 0] == 0.625

    def test_zero_density(self):
        ints = random_integrals(3, seed=0)
        assert not np.any(coulomb(ints, np.zeros((3, 3))))
        assert not np.any(exchange(ints, np.zeros((3, 3))))

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            coulomb(random_integrals(3, seed=0), np.eye(2))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 10**6))
    def test_matches_brute_force(self, n, seed):
        ints = random_integrals(n, seed=seed)
        P = _sym(np.random.default_rng(seed), n)
        J, K = brute_force_jk(ints.eri, P)
        np.testing.assert_allclose(coulomb(ints, P), J, atol=1e-12)
        np.testing.assert_allclose(exchange(ints, P), K, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10**6))
    def test_duality_and_symmetry(self, n, seed):
        ints = random_integrals(n, seed=seed)
        rng = np.random.default_rng(seed + 1)
        P, Q = _sym(rng, n), _sym(rng, n)
        for op in (coulomb, exchange):
            assert np.sum(op(ints, P) * Q) == pytest.approx(np.sum(op(ints, Q) * P), abs=1e-12)
            M = op(ints, P)
            np.testing.assert_allclose(M, M.T, atol=1e-12)

    def test_symmetrize_idempotent(self):
        eri = symmetrize_eri(np.random.default_rng(0).standard_normal((3,) * 4))
        np.testing.assert_array_equal(symmetrize_eri(eri), eri)
