from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agids.corpus import desk_corpus  # noqa: E402
from agids.flows import ClassLabel, Dataset, Protocol  # noqa: E402


def make_dataset(features, labels, src=None, dst=None, dst_port=None, protocol="TCP", names=None) -> Dataset:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    src = ["10.0.0.1"] * n if src is None else list(src)
    dst = ["10.0.0.2"] * n if dst is None else list(dst)
    ports = [80] * n if dst_port is None else list(dst_port)
    return Dataset(
        features=x,
        labels=np.asarray([int(v) for v in labels], dtype=np.int64),
        feature_names=tuple(names or (f"f{j}" for j in range(x.shape[1]))),
        flow_id=np.array([f"flow-{i}" for i in range(n)], dtype=object),
        src_ip=np.array(src, dtype=object),
        dst_ip=np.array(dst, dtype=object),
        src_port=np.full(n, 40000, dtype=np.int64),
        dst_port=np.asarray(ports, dtype=np.int64),
        protocol=np.array([Protocol.parse(protocol).value] * n, dtype=object),
    )


@pytest.fixture(scope="session")
def desk():
    return desk_corpus(0)


@pytest.fixture(scope="session")
def small_desk():
    return desk_corpus(3, n_flows=3000)


@pytest.fixture
def benign():
    return ClassLabel.BENIGN
