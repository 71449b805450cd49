from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soomp.dictionary import (
    Dictionary,
    Family,
    build_cdf97,
    build_rdct,
    build_rdst,
    cdf97_prototypes,
    read_dictionary,
    union,
    write_dictionary,
)
from soomp.errors import DimensionMismatchError, InvalidDimensionError, InvalidLevelError


def test_rdct_first_atom_is_constant():
    d = build_rdct(8, 16)
    np.testing.assert_allclose(d.atoms[0], np.full(8, 1 / np.sqrt(8)), atol=1e-15)


@pytest.mark.parametrize("builder", [build_rdct, build_rdst])
def test_square_dictionary_is_orthonormal(builder):
    d = builder(8, 8)
    np.testing.assert_allclose(d.atoms @ d.atoms.T, np.eye(8), atol=1e-10)


def test_rdct_entries_match_closed_form():
    L, M = 5, 11
    d = build_rdct(L, M)
    i = np.arange(1, L + 1)
    for n in range(1, M + 1):
        raw = np.cos(np.pi * (2 * i - 1) * (n - 1) / (2 * M))
        np.testing.assert_allclose(d.atoms[n - 1], raw / np.linalg.norm(raw), atol=1e-14)


def test_rdst_last_atom_alternates():
    d = build_rdst(4, 8)
    np.testing.assert_allclose(d.atoms[7], [0.5, -0.5, 0.5, -0.5], atol=1e-15)


def test_rdst_entries_match_closed_form():
    L, M = 6, 9
    d = build_rdst(L, M)
    i = np.arange(1, L + 1)
    for n in range(1, M + 1):
        raw = np.sin(np.pi * (2 * i - 1) * n / (2 * M))
        np.testing.assert_allclose(d.atoms[n - 1], raw / np.linalg.norm(raw), atol=1e-14)


def test_full_size_audio_dictionaries():
    c, s = build_rdct(1024, 2048), build_rdst(1024, 2048)
    assert c.atoms.shape == (2048, 1024)
    assert s.ambient_dim == 1024
    np.testing.assert_allclose(np.linalg.norm(c.atoms, axis=1), 1, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(s.atoms, axis=1), 1, atol=1e-12)
    assert len(union(c, s)) == 4096


@settings(max_examples=60, deadline=None)
@given(L=st.integers(1, 40), M=st.integers(1, 80), family=st.sampled_from([build_rdct, build_rdst]))
def test_trig_atoms_have_unit_norm(L, M, family):
    d = family(L, M)
    assert d.atoms.shape == (M, L)
    np.testing.assert_allclose(np.linalg.norm(d.atoms, axis=1), 1, atol=1e-12)


def test_builders_are_deterministic():
    assert build_rdct(33, 70).atoms.tobytes() == build_rdct(33, 70).atoms.tobytes()
    assert build_rdst(33, 70).atoms.tobytes() == build_rdst(33, 70).atoms.tobytes()
    assert build_cdf97(40).atoms.tobytes() == build_cdf97(40).atoms.tobytes()


@pytest.mark.parametrize("L, M", [(0, 4), (4, 0), (0, 0)])
@pytest.mark.parametrize("builder", [build_rdct, build_rdst])
def test_invalid_dimensions(builder, L, M):
    with pytest.raises(InvalidDimensionError):
        builder(L, M)


def test_atoms_are_read_only():
    d = build_rdct(4, 8)
    with pytest.raises(ValueError):
        d.atoms[0, 0] = 1.0


def test_union_concatenates_in_order():
    a, b = build_rdct(8, 16), build_rdst(8, 16)
    u = union(a, b)
    assert len(u) == 32 and u.family is Family.UNION
    np.testing.assert_array_equal(u.atoms[:16], a.atoms)
    np.testing.assert_array_equal(u.atoms[16:], b.atoms)


def test_union_with_empty_is_identity():
    a = build_rdct(8, 16)
    u = union(a, Dictionary.empty(8))
    np.testing.assert_array_equal(u.atoms, a.atoms)
    assert len(u) == len(a)


def test_union_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        union(build_rdct(8, 16), build_rdst(9, 16))


# --------------------------------------------------------------------------
# CDF 9/7


def enumerate_cdf97_translates(n, level):
    """Exact rational enumeration of translates with a grid point inside the open support."""
    step = 2 ** (level + 1)
    xs = [Fraction(i, step) for i in range(n)]
    span = xs[-1]
    found = []
    scales = [("phi", 0, 1, (-4, 4))] + [("psi", j, 2 ** j, (-3, 4)) for j in range(level + 1)]
    for kind, j, s, (a, b) in scales:
        for k in range(-2 * b - 2, int(2 * (s * span - a)) + 3):
            if any(a < s * x - Fraction(k, 2) < b for x in xs):
                found.append((kind, j, k))
    return found


def surviving_translates(n, level, threshold=1e-6):
    """Apply the relative discard threshold to interpolated prototype samples."""
    phi, pf, psi, sf = cdf97_prototypes(8)
    protos = {"phi": ((np.arange(len(phi)) + pf) / 256, phi),
              "psi": ((np.arange(len(psi)) + sf) / 256, psi)}
    x = np.arange(n) / 2 ** (level + 1)
    norms = {}
    for kind, j, k in enumerate_cdf97_translates(n, level):
        grid, values = protos[kind]
        v = np.interp(2 ** j * x - k / 2, grid, values, left=0, right=0)
        norms[(kind, j, k)] = np.sqrt(2 ** j) * np.linalg.norm(v)
    keep = []
    for key, value in norms.items():
        peak = max(v for kk, v in norms.items() if kk[:2] == key[:2])
        if value > threshold * peak:
            keep.append(key)
    return keep


@pytest.mark.parametrize("n", [16, 23, 64, 100])
@pytest.mark.parametrize("level", [0, 2, 4])
def test_cdf97_translates_match_enumeration(n, level):
    d = build_cdf97(n, level)
    assert list(d.labels) == surviving_translates(n, level)
    assert len(d) <= len(enumerate_cdf97_translates(n, level))


def test_cdf97_known_counts():
    assert [len(build_cdf97(n)) for n in (16, 64, 128, 256, 512)] == [111, 207, 335, 591, 1103]


@pytest.mark.parametrize("n", [16, 64, 128])
def test_cdf97_atoms_unit_norm(n):
    d = build_cdf97(n)
    np.testing.assert_allclose(np.linalg.norm(d.atoms, axis=1), 1, atol=1e-12)


@pytest.mark.parametrize("n", [128, 256, 512])
def test_cdf97_redundancy_band(n):
    assert 1.5 * n <= len(build_cdf97(n, 4)) <= 3 * n


@pytest.mark.xfail(strict=True, reason="N=64 yields 207 atoms (3.23 N): fixed boundary overhang dominates at small N")
def test_cdf97_redundancy_band_n64():
    assert 1.5 * 64 <= len(build_cdf97(64, 4)) <= 3 * 64


def test_cdf97_excludes_translates_outside_interval():
    n, level = 64, 4
    d = build_cdf97(n, level)
    span = (n - 1) / 2 ** (level + 1)
    for kind, j, k in d.labels:
        a, b = (-4, 4) if kind == "phi" else (-3, 4)
        s = 2 ** j
        # the support s*x - k/2 in (a, b) meets [0, span]
        assert (k / 2 + a) / s < span and (k / 2 + b) / s > 0
    labels = set(d.labels)
    assert ("phi", 0, 1000) not in labels and ("psi", 0, -20) not in labels


@pytest.mark.parametrize("n", [16, 32, 64])
def test_cdf97_rank_covers_scaling_atoms(n):
    d = build_cdf97(n)
    n_phi = sum(1 for lab in d.labels if lab[0] == "phi")
    assert np.linalg.matrix_rank(d.atoms) >= min(n_phi, n)
    assert np.linalg.matrix_rank(d.atoms) == n


def test_cdf97_invalid_arguments():
    with pytest.raises(InvalidLevelError):
        build_cdf97(64, 5)
    with pytest.raises(InvalidLevelError):
        build_cdf97(64, -1)
    with pytest.raises(InvalidDimensionError):
        build_cdf97(15)


def test_prototypes_refine_consistently():
    phi, first, psi, pfirst = cdf97_prototypes(8)
    assert len(phi) == 8 * 255 + 1 and first == -4 * 255
    assert len(psi) == 7 * 256 + 1 and pfirst == -3 * 256
    # scaling function integrates to one, wavelet to zero
    assert abs(phi.sum() / 256 - 1) < 1e-10
    assert abs(psi.sum() / 256) < 1e-10


def best_alignment(reference, samples):
    return min(np.max(np.abs(reference[o:o + len(samples)] - samples))
               for o in range(len(reference) - len(samples) + 1))


def test_prototypes_match_pywavelets():
    pywt = pytest.importorskip("pywt")
    phi_d, psi_d, _, _, _ = pywt.Wavelet("bior4.4").wavefun(level=8)
    phi, _, psi, _ = cdf97_prototypes(8)
    assert best_alignment(phi_d, phi) < 1e-12
    # pywt builds psi from phi one refinement coarser and with the opposite
    # sign; the two agree to within the cascade's convergence error
    assert best_alignment(-psi_d, psi) < 5e-3


def test_sdic_round_trip(tmp_path):
    d = build_cdf97(20, 2)
    path = tmp_path / "d.sdic"
    write_dictionary(d, path)
    raw = path.read_bytes()
    assert raw[:4] == b"SDIC" and len(raw) == 14 + 8 * d.atoms.size
    back = read_dictionary(path)
    assert back.family is Family.CDF97
    np.testing.assert_array_equal(back.atoms, d.atoms)
