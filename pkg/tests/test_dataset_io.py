import json

import numpy as np
import pytest

from clothtrack.synth import (
    make_template,
    generate_sequence,
    write_dataset,
    read_dataset,
    DatasetFormatError,
    DatasetVersionError,
)
from clothtrack.synth.dataset_io import list_sequences


@pytest.fixture(scope="module")
def sequence():
    template = make_template("Pants", 8)
    return generate_sequence(template, "fold_ud", frames=3, seed=7, category="Pants", n_samples=128, raster_res=64)


def test_round_trip(sequence, tmp_path):
    path = write_dataset(sequence, tmp_path / "Pants" / "seq0")
    back = read_dataset(path)
    assert back.category == sequence.category
    assert len(back) == len(sequence)
    assert np.array_equal(back.canonical_mesh.faces, sequence.canonical_mesh.faces)
    # reals are stored as f32; the round trip is bit-exact at that precision
    assert np.array_equal(back.canonical_mesh.vertices, sequence.canonical_mesh.vertices.astype("<f4"))
    for fa, fb in zip(sequence.frames, back.frames):
        assert np.array_equal(fb.points, fa.points.astype("<f4"))
        assert np.array_equal(fb.gt_nocs, fa.gt_nocs.astype("<f4"))
        assert np.array_equal(fb.mesh_vertices_task, fa.mesh_vertices_task.astype("<f4"))
    assert back.manifest["script"] == "fold_ud"
    assert back.manifest["seed"] == 7


def test_second_round_trip_is_identical(sequence, tmp_path):
    p1 = write_dataset(sequence, tmp_path / "a")
    ds = read_dataset(p1)
    p2 = write_dataset(ds, tmp_path / "b")
    for name in ("canonical_mesh.verts.bin", "frames/00001.points.bin"):
        assert (p1 / name).read_bytes() == (p2 / name).read_bytes()


def test_corrupted_magic(sequence, tmp_path):
    path = write_dataset(sequence, tmp_path / "seq")
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["magic"] = "not-a-dataset"
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetFormatError, match="magic"):
        read_dataset(path)


def test_version_mismatch(sequence, tmp_path):
    path = write_dataset(sequence, tmp_path / "seq")
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["version"] = 2
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetVersionError, match="version"):
        read_dataset(path)


def test_truncated_array(sequence, tmp_path):
    path = write_dataset(sequence, tmp_path / "seq")
    f = path / "frames" / "00000.points.bin"
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(DatasetFormatError, match="expected"):
        read_dataset(path)


def test_malformed_manifest(sequence, tmp_path):
    path = write_dataset(sequence, tmp_path / "seq")
    (path / "manifest.json").write_text("{not json")
    with pytest.raises(DatasetFormatError, match="malformed"):
        read_dataset(path)


def test_missing_manifest(tmp_path):
    with pytest.raises(DatasetFormatError, match="manifest"):
        read_dataset(tmp_path)


def test_list_sequences(sequence, tmp_path):
    write_dataset(sequence, tmp_path / "Pants" / "s1")
    write_dataset(sequence, tmp_path / "Pants" / "s0")
    found = list_sequences(tmp_path)
    assert [p.name for p in found] == ["s0", "s1"]
