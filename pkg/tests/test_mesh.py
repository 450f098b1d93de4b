"""Mesh families on the unit square, text I/O, and conformity validation."""

import numpy as np
import pytest

from quadfem.errors import BadSubdivision, NonConforming, ParseError
from quadfem.mesh import FAMILIES, Mesh, generate_mesh, load_mesh, save_mesh

SQ2 = np.sqrt(2.0)


def test_t1_n2_entity_counts():
    mesh = generate_mesh("t1", 2)
    assert mesh.num_vertices == 9
    assert mesh.num_edges == 12
    assert mesh.num_cells == 4
    for quad in mesh.quads:
        assert quad.area == pytest.approx(0.25, abs=1e-15)
        assert quad.quality == pytest.approx(SQ2 - 1.0, abs=1e-14)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [2, 4, 8])
def test_entity_count_formulas(family, n):
    mesh = generate_mesh(family, n)
    assert mesh.num_cells == n * n
    assert mesh.num_vertices == (n + 1) ** 2
    assert mesh.num_edges == 2 * n * (n + 1)
    # Euler characteristic of a disk: V - E + F = 1
    assert mesh.num_vertices - mesh.num_edges + mesh.num_cells == 1


@pytest.mark.parametrize("family", FAMILIES)
def test_covers_unit_square(family):
    mesh = generate_mesh(family, 4)
    assert sum(q.area for q in mesh.quads) == pytest.approx(1.0, abs=1e-13)
    assert mesh.vertices.min() >= -1e-15
    assert mesh.vertices.max() <= 1.0 + 1e-15


def test_t2_trapezoid_geometry():
    n = 4
    h = 1.0 / n
    mesh = generate_mesh("t2", n)
    for quad in mesh.quads:
        assert quad.edges_parallel(1, 2)
        assert not quad.edges_parallel(3, 4)
        lengths = sorted([quad.edges[0].length, quad.edges[1].length])
        assert lengths[0] == pytest.approx(0.75 * h, abs=1e-14)
        assert lengths[1] == pytest.approx(1.25 * h, abs=1e-14)


def test_t3_no_parallel_opposite_edges():
    mesh = generate_mesh("t3", 4)
    for quad in mesh.quads:
        n1, n2 = quad.edges[0].normal, quad.edges[1].normal
        n3, n4 = quad.edges[2].normal, quad.edges[3].normal
        assert abs(n1[0] * n2[1] - n1[1] * n2[0]) > 1e-6
        assert abs(n3[0] * n4[1] - n3[1] * n4[0]) > 1e-6


def test_quality_values():
    assert generate_mesh("t1", 4).quality() == pytest.approx(SQ2 - 1.0, abs=1e-14)
    assert generate_mesh("t1", 8).quality() == pytest.approx(SQ2 - 1.0, abs=1e-14)
    q4 = generate_mesh("t2", 4).quality()
    q8 = generate_mesh("t2", 8).quality()
    assert q4 == pytest.approx(q8, abs=1e-12)
    assert generate_mesh("t3", 4).quality() == pytest.approx(0.3368, abs=5e-5)


def test_max_h():
    mesh = generate_mesh("t1", 8)
    assert mesh.max_h() == pytest.approx(SQ2 / 8.0, abs=1e-14)


@pytest.mark.parametrize(
    "family,n", [("t1", 0), ("t1", -2), ("t2", 3), ("t3", 5), ("t2", 0)]
)
def test_bad_subdivision(family, n):
    with pytest.raises(BadSubdivision):
        generate_mesh(family, n)


def test_unknown_family():
    with pytest.raises(ValueError):
        generate_mesh("t9", 4)


def test_generation_deterministic():
    a = generate_mesh("t3", 4)
    b = generate_mesh("t3", 4)
    assert a == b
    assert a.family == "t3" and a.n == 4


# -- text I/O -------------------------------------------------------------------


@pytest.mark.parametrize("family,n", [("t1", 2), ("t2", 4), ("t3", 4)])
def test_save_load_roundtrip(family, n):
    mesh = generate_mesh(family, n)
    again = load_mesh(save_mesh(mesh))
    assert again == mesh
    assert again.num_edges == mesh.num_edges


def test_roundtrip_preserves_floats_exactly():
    mesh = generate_mesh("t3", 4)
    again = load_mesh(save_mesh(mesh))
    np.testing.assert_array_equal(again.vertices, mesh.vertices)
    np.testing.assert_array_equal(again.cells, mesh.cells)


def _lines(mesh):
    return save_mesh(mesh).splitlines()


def test_parse_error_empty():
    with pytest.raises(ParseError):
        load_mesh("")
    with pytest.raises(ParseError):
        load_mesh("\n\n")


def test_parse_error_bad_header():
    with pytest.raises(ParseError) as err:
        load_mesh("9 12\n")
    assert err.value.line == 1


def test_parse_error_five_index_cell_row():
    lines = _lines(generate_mesh("t1", 2))
    lines[10] = "0 3 4 1 2"  # first cell row gains a fifth vertex index
    with pytest.raises(ParseError) as err:
        load_mesh("\n".join(lines))
    assert err.value.line == 11


def test_parse_error_non_numeric_vertex():
    lines = _lines(generate_mesh("t1", 2))
    lines[3] = "0.0 north"
    with pytest.raises(ParseError) as err:
        load_mesh("\n".join(lines))
    assert err.value.line == 4


def test_parse_error_vertex_index_out_of_range():
    lines = _lines(generate_mesh("t1", 2))
    lines[13] = "4 7 8 99"
    with pytest.raises(ParseError):
        load_mesh("\n".join(lines))


def test_parse_error_wrong_record_count():
    lines = _lines(generate_mesh("t1", 2))
    with pytest.raises(ParseError):
        load_mesh("\n".join(lines[:-1]))  # one cell row missing


def test_nonconforming_hanging_node():
    # right column split in two: its shared vertical edge covers only half of
    # the left cell's edge, leaving a hanging node at (1, 0.5)
    text = "\n".join(
        [
            "8 11 3",
            "0.0 0.0",
            "1.0 0.0",
            "2.0 0.0",
            "2.0 0.5",
            "1.0 0.5",
            "2.0 1.0",
            "1.0 1.0",
            "0.0 1.0",
            "0 1 6 7",
            "1 2 3 4",
            "4 3 5 6",
        ]
    )
    with pytest.raises(NonConforming):
        load_mesh(text)


def test_mesh_equality_detects_changes():
    mesh = generate_mesh("t1", 2)
    other = load_mesh(save_mesh(mesh))
    other.vertices[0, 0] += 1e-9
    assert not (mesh == other)
