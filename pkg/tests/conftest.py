import numpy as np
import pytest

from disengraph.graph import load_dataset


def write_dataset(path, edges, features, labels, splits, weights=None):
    """Write a dataset directory from in-memory pieces; returns the path."""
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.tsv", "w") as fh:
        for i, (u, v) in enumerate(edges):
            if weights is None:
                fh.write(f"{u}\t{v}\n")
            else:
                fh.write(f"{u}\t{v}\t{weights[i]!r}\n")
    with open(path / "features.csv", "w") as fh:
        for row in features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(path / "labels.tsv", "w") as fh:
        for u, lab in labels:
            fh.write(f"{u}\t{lab}\n")
    with open(path / "splits.tsv", "w") as fh:
        for u, part in splits:
            fh.write(f"{u}\t{part}\n")
    return path


@pytest.fixture
def tiny_dataset(tmp_path):
    """A 6-node, 2-class dataset directory."""
    rng = np.random.default_rng(0)
    features = rng.random((6, 4))
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    labels = [(u, "a" if u < 3 else "b") for u in range(6)]
    splits = [(0, "train"), (3, "train"), (1, "val"), (4, "val"), (2, "test"), (5, "test")]
    return write_dataset(tmp_path / "tiny", edges, features, labels, splits)


@pytest.fixture
def tiny_graph(tiny_dataset):
    return load_dataset(tiny_dataset)
