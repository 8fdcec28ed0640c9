import numpy as np
import pytest

from liouvillelab import (
    DataError,
    FOUR_PI,
    MeshQualityError,
    NumericError,
    ParameterError,
    TriangulatedSphere,
    assemble_operators,
    build_icosphere,
    dirichlet_energy,
    geodesic_distances,
    integrate,
    mobius_dilation_factor,
    random_band_field,
    read_field_csv,
    read_off_mesh,
    sample_field,
    set_conformal_background,
    write_field_csv,
    write_off_mesh,
)


def test_subdivision_counts():
    # V = 2 + 10 * 4^L, F = 20 * 4^L, E = V + F - 2
    for level, nv, nf in ((0, 12, 20), (1, 42, 80), (3, 642, 1280)):
        mesh = build_icosphere(level)
        assert mesh.num_vertices == nv
        assert mesh.num_faces == nf
        assert mesh.num_edges == nv + nf - 2


def test_vertices_on_unit_sphere():
    mesh = build_icosphere(3)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(radii - 1.0).max() <= 1e-12


def test_build_rejects_bad_levels():
    for bad in (-1, 9, 1.5, "2", True):
        with pytest.raises(ParameterError):
            build_icosphere(bad)


def test_topology_validation_rejects_broken_meshes():
    mesh = build_icosphere(1)
    verts, faces = mesh.vertices.copy(), mesh.faces.copy()

    flipped = faces.copy()
    flipped[0] = flipped[0, ::-1]  # duplicate directed edges
    with pytest.raises(DataError):
        TriangulatedSphere(verts, flipped, np.zeros(len(verts)))

    with pytest.raises(DataError):  # open surface
        TriangulatedSphere(verts, faces[:-1], np.zeros(len(verts)))

    off_sphere = verts.copy()
    off_sphere[0] *= 1.5
    with pytest.raises(DataError):
        TriangulatedSphere(off_sphere, faces, np.zeros(len(verts)))


def test_gauss_bonnet_exact(ops3, bumpy3):
    """Total curvature equals 4 pi by construction of the discrete K."""
    for ops in (ops3, bumpy3):
        total = integrate(ops, ops.curvature)
        assert abs(total - FOUR_PI) <= 1e-9


def test_round_curvature_is_constant_one(ops3):
    assert np.abs(ops3.curvature - 1.0).max() <= 1e-12


def test_stiffness_symmetric_with_zero_row_sums(ops4):
    s = ops4.stiffness
    asym = (s - s.T).tocoo()
    assert len(asym.data) == 0 or np.abs(asym.data).max() == 0.0
    row_sums = np.asarray(s.sum(axis=1)).ravel()
    assert np.abs(row_sums).max() <= 1e-10


def test_dirichlet_form_is_conformally_invariant(ops3, rng):
    # Same mesh, different background: the form must not change at all
    # beyond roundoff because it never sees the conformal factor.
    mesh = ops3.mesh
    u = rng.standard_normal(mesh.num_vertices)
    bumpy = assemble_operators(
        set_conformal_background(mesh, random_band_field(mesh, 5, 4, 0.8))
    )
    d_round = dirichlet_energy(ops3, u)
    d_bumpy = dirichlet_energy(bumpy, u)
    assert abs(d_round - d_bumpy) <= 1e-10 * max(1.0, abs(d_round))


def test_dirichlet_energy_of_linear_height(ops3, ops4):
    # int |grad x3|^2 over the sphere is 8 pi / 3; P1 elements converge
    # at second order from below.
    exact = 8.0 * np.pi / 3.0
    err3 = dirichlet_energy(ops3, ops3.mesh.vertices[:, 2]) - exact
    err4 = dirichlet_energy(ops4, ops4.mesh.vertices[:, 2]) - exact
    assert abs(err3) <= 1e-2 * exact
    assert abs(err4) <= 2.5e-3 * exact
    assert abs(err4) < abs(err3)


def test_dirichlet_energy_rejects_wrong_length(ops3):
    with pytest.raises(DataError):
        dirichlet_energy(ops3, np.zeros(7))


def test_background_normalization_restores_total_area():
    mesh = build_icosphere(3)
    phi = random_band_field(mesh, 9, 5, 0.7)
    ops = assemble_operators(set_conformal_background(mesh, phi, normalize=True))
    assert abs(ops.total_area - FOUR_PI) <= 1e-10

    # A constant factor must normalize away entirely.
    flat = set_conformal_background(mesh, np.full(mesh.num_vertices, 1.3),
                                    normalize=True)
    assert np.abs(flat.background_factor).max() <= 1e-14


def test_band_field_reproducibility_and_statistics(ops4):
    mesh = ops4.mesh
    f1 = random_band_field(mesh, 42, 6, 0.5)
    f2 = random_band_field(mesh, 42, 6, 0.5)
    assert np.array_equal(f1, f2)

    f3 = random_band_field(mesh, 43, 6, 0.5)
    assert np.abs(f1 - f3).max() >= 1e-6

    # mass-weighted mean removed, rms pinned to the amplitude
    assert abs(float(f1 @ ops4.mass)) <= 1e-9
    rms = np.sqrt(float((f1 * f1) @ ops4.mass) / ops4.total_area)
    assert abs(rms - 0.5) <= 1e-12

    assert not random_band_field(mesh, 1, 4, 0.0).any()


def test_band_field_consistent_across_levels():
    """Coarse-mesh vertices are a prefix of the fine mesh, and the same
    seed must give nearly the same projected field there."""
    m4, m5 = build_icosphere(4), build_icosphere(5)
    f4 = random_band_field(m4, 7, 8, 0.3)
    f5 = random_band_field(m5, 7, 8, 0.3)
    assert np.allclose(m4.vertices, m5.vertices[: m4.num_vertices], atol=1e-14)
    assert np.abs(f4 - f5[: m4.num_vertices]).max() <= 2e-3


def test_band_field_rejects_bad_parameters(ops2):
    with pytest.raises(ParameterError):
        random_band_field(ops2.mesh, 0, 0, 1.0)
    with pytest.raises(ParameterError):
        random_band_field(ops2.mesh, 0, 4, -0.1)


def test_mobius_factor_identity_and_volume(ops4):
    lam_one = mobius_dilation_factor(ops4.mesh, 1.0)
    assert np.abs(lam_one).max() <= 1e-14
    for lam in (1.0 / 3.0, 2.0, 4.0):
        u = mobius_dilation_factor(ops4.mesh, lam)
        vol = float(np.exp(u) @ ops4.mass)
        assert abs(vol / FOUR_PI - 1.0) <= 5e-4


def test_geodesic_distances_round_and_bumpy(ops3, bumpy3):
    dist, exact = geodesic_distances(ops3, 0)
    assert exact
    expected = np.arccos(np.clip(ops3.mesh.vertices @ ops3.mesh.vertices[0], -1, 1))
    assert np.abs(dist - expected).max() <= 1e-12

    dist_b, exact_b = geodesic_distances(bumpy3, 0)
    assert not exact_b
    assert dist_b[0] == 0.0
    mask = np.arange(len(dist_b)) != 0
    assert dist_b[mask].min() > 0.0


def test_sample_field_at_vertices_and_constants(ops3, rng):
    mesh = ops3.mesh
    values = rng.standard_normal(mesh.num_vertices)
    at_verts = sample_field(mesh, values, mesh.vertices[:25])
    assert np.abs(at_verts - values[:25]).max() <= 1e-9

    points = rng.standard_normal((40, 3))
    points /= np.linalg.norm(points, axis=1)[:, None]
    const = sample_field(mesh, np.full(mesh.num_vertices, 2.5), points)
    assert np.abs(const - 2.5).max() <= 1e-12


def test_off_roundtrip(tmp_path):
    mesh = build_icosphere(2)
    path = tmp_path / "m.off"
    write_off_mesh(path, mesh)
    back = read_off_mesh(path)
    assert np.array_equal(back.faces, mesh.faces)
    assert np.abs(back.vertices - mesh.vertices).max() <= 1e-15


def test_off_reader_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.off"
    bad.write_text("PLY\n3 1 0\n")
    with pytest.raises(DataError):
        read_off_mesh(bad)

    quad = tmp_path / "quad.off"
    quad.write_text("OFF\n4 1 0\n0 0 1\n1 0 0\n0 1 0\n-1 0 0\n4 0 1 2 3\n")
    with pytest.raises(DataError):
        read_off_mesh(quad)


def test_field_csv_roundtrip_and_validation(tmp_path, rng):
    values = rng.standard_normal(42)
    path = tmp_path / "f.csv"
    write_field_csv(path, values)
    back = read_field_csv(path, expected_vertices=42)
    assert np.array_equal(back, values)

    with pytest.raises(DataError):
        read_field_csv(path, expected_vertices=12)

    gap = tmp_path / "gap.csv"
    gap.write_text("vertex,value\n0,1.0\n2,2.0\n")
    with pytest.raises(DataError):
        read_field_csv(gap)

    nan = tmp_path / "nan.csv"
    nan.write_text("vertex,value\n0,nan\n1,1.0\n")
    with pytest.raises(DataError):
        read_field_csv(nan)


def test_mass_rescale_is_logged_and_small(ops3):
    # The flat-area deficit shrinks like h^2 but is always corrected.
    assert ops3.mass_correction > 1.0
    assert abs(ops3.mass_correction - 1.0) <= 0.02
    assert abs(ops3.round_mass.sum() - FOUR_PI) <= 1e-10
