import numpy as np
import pytest

from designscope import ensembles, features, otoc, qsim
from designscope.ensembles import EnsembleSpec
from designscope.otoc import OtocConfig


def identity_entries(variant, n=3):
    u = np.eye(2**n, dtype=complex)[None]
    states = otoc._states_for(variant, 1, 2**n, np.random.default_rng(0))
    return otoc.otoc_entries(u, variant, "X", "Y", states)[0]


@pytest.mark.parametrize("variant", ["ALV", "CB", "TR"])
def test_identity_unitary(variant):
    n, d = 3, 8
    m = identity_entries(variant, n)
    scale = d if variant == "TR" else 1
    expected = np.where(np.eye(n, dtype=bool), -1.0, 1.0) * scale
    np.testing.assert_allclose(m, expected, atol=1e-12)


def dense_pauli(p, q, n):
    out = np.eye(1)
    for k in range(n):
        out = np.kron(out, p if k == q else np.eye(2))
    return out


@pytest.mark.parametrize("variant", ["ALV", "CB", "TR"])
def test_matches_dense_oracle(variant, gen):
    n = 3
    u = qsim.haar_unitaries(2, 2**n, gen)
    states = otoc._states_for(variant, 2, 2**n, gen)
    got = otoc.otoc_entries(u, variant, "Z", "X", states)
    for c in range(2):
        for i in range(n):
            for j in range(n):
                a = dense_pauli(qsim.Z, i, n)
                bj = u[c].conj().T @ dense_pauli(qsim.X, j, n) @ u[c]
                op = a @ bj @ a @ bj
                if variant == "TR":
                    want = np.trace(a.conj().T @ bj @ a @ bj)
                else:
                    want = states[c].conj() @ op @ states[c]
                assert got[c, i, j] == pytest.approx(want, abs=1e-10)


def test_tr_entries_real_and_bounded(gen):
    cfg = OtocConfig(EnsembleSpec("LRC", 3, depth=3), 20, variant="TR")
    mat = otoc.compute_otoc_matrix(cfg, gen)
    assert np.max(np.abs(mat.entries.imag)) < 1e-10
    assert np.all(np.abs(mat.normalized) <= 1 + 1e-12)


def test_alv_clifford_entries_real(gen):
    # for Cliffords B' is a signed Pauli, so A B' A B' = +-I and every entry is real
    cfg = OtocConfig(EnsembleSpec("RC", 3), 10)
    assert np.max(np.abs(otoc.compute_otoc_matrix(cfg, gen).entries.imag)) < 1e-10


def test_alv_haar_entries_can_be_complex(gen):
    cfg = OtocConfig(EnsembleSpec("HAAR", 2), 1)
    imag = max(np.max(np.abs(otoc.compute_otoc_matrix(cfg, gen).entries.imag)) for _ in range(5))
    assert imag > 1e-3


@pytest.mark.parametrize("variant", ["ALV", "CB", "TR"])
def test_rc_and_haar_means_agree(variant, gen):
    n, m = 3, 3000
    means, sig = [], []
    for kind in ("RC", "HAAR"):
        spec = EnsembleSpec(kind, n)
        u = ensembles.sample_unitaries(spec, m, gen)
        e = otoc.otoc_entries(u, variant, "X", "Y", otoc._states_for(variant, m, 2**n, gen)) / (2**n if variant == "TR" else 1)
        means.append(e.mean(axis=0))
        sig.append(e.std(axis=0) / np.sqrt(m))
    diff = np.abs(means[0] - means[1])
    assert np.all(diff.real <= 4 * np.hypot(sig[0], sig[1]) + 1e-12)
    assert np.all(diff.imag <= 4 * np.hypot(sig[0], sig[1]) + 1e-12)


def test_means_independent_of_i_j(gen):
    n, m = 3, 4000
    u = qsim.haar_unitaries(m, 2**n, gen)
    e = otoc.otoc_entries(u, "TR", "X", "Y").real / 2**n
    mean, se = e.mean(axis=0), e.std(axis=0) / np.sqrt(m)
    for a in np.ndindex(n, n):
        for b in np.ndindex(n, n):
            assert abs(mean[a] - mean[b]) <= 4 * np.hypot(se[a], se[b])


def test_dataset_shape_and_variance_shrinks():
    cfg = OtocConfig(EnsembleSpec("HAAR", 2), 4, variant="TR")
    ds = otoc.otoc_dataset(cfg, 10, seed=1)
    assert ds.features.shape == (10, 2 * 2**2) and ds.meta.layout == "otoc"
    np.testing.assert_allclose(ds.features[:, 4:], 0, atol=1e-12)
    small = otoc.otoc_dataset(OtocConfig(EnsembleSpec("HAAR", 2), 2, variant="TR"), 60, seed=2).features[:, :4]
    large = otoc.otoc_dataset(OtocConfig(EnsembleSpec("HAAR", 2), 64, variant="TR"), 60, seed=2).features[:, :4]
    assert np.all(large.var(axis=0) < small.var(axis=0) / 4)


def test_dataset_round_trip(tmp_path):
    ds = otoc.otoc_dataset(OtocConfig(EnsembleSpec("RC", 2), 3, variant="CB"), 4, seed=0)
    features.save_dataset(ds, tmp_path / "o.txt")
    back = features.load_dataset(tmp_path / "o.txt")
    assert back == ds and back.info["variant"] == "CB"


def test_config_validation():
    spec = EnsembleSpec("HAAR", 2)
    with pytest.raises(ValueError):
        OtocConfig(spec, 0)
    with pytest.raises(ValueError):
        OtocConfig(spec, 1, a="W")
    with pytest.raises(ValueError):
        OtocConfig(spec, 1, variant="XYZ")
    with pytest.raises(ValueError):
        OtocConfig(EnsembleSpec("HAAR", 9), 1, variant="TR")
