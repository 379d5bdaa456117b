import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from fewshot_icnn.core import make_embedding_set


def gaussian_labeled(seed, classes=3, per_class=8, dim=4, separation=4.0):
    """Labeled Gaussian clusters with centers on scaled unit axes."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for c in range(classes):
        center = np.zeros(dim)
        center[c % dim] = separation * (1 + c // dim)
        rows.append(center + rng.normal(size=(per_class, dim)))
        labels += [f"c{c}"] * per_class
    return make_embedding_set(np.concatenate(rows), labels)


def probe_pca_basis(x, target_dim):
    """Recover the projection basis (d x target_dim) of a fitted pca by
    pushing mean + unit offsets through the fit-on-prefix transform."""
    from fewshot_icnn.reducers import pca
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    mean = x.mean(axis=0)
    aug = np.vstack([x, mean + np.eye(d), mean[None, :]])
    out = pca(aug, target_dim, n_fit=n)
    return out[n:n + d] - out[n + d]


def probe_tsvd_basis(x, target_dim):
    from fewshot_icnn.reducers import truncated_svd
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    aug = np.vstack([x, np.eye(d)])
    return truncated_svd(aug, target_dim, n_fit=n)[n:]


@pytest.fixture(scope="session")
def echo_stub(tmp_path_factory):
    """External reducer that echoes the first target_dim coordinates."""
    path = tmp_path_factory.mktemp("stubs") / "echo.py"
    path.write_text(
        "import sys\n"
        "n, d, t, seed = sys.stdin.readline().split()\n"
        "for _ in range(int(n)):\n"
        "    row = sys.stdin.readline().split()\n"
        "    print(' '.join(row[:int(t)]))\n")
    return f"{sys.executable} {path}"


@pytest.fixture(scope="session")
def crash_stub(tmp_path_factory):
    path = tmp_path_factory.mktemp("stubs") / "crash.py"
    path.write_text("import sys\nsys.exit(3)\n")
    return f"{sys.executable} {path}"
