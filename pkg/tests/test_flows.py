from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agids.errors import EmptyDataset, InvalidFraction, MalformedRow, MissingColumn
from agids.flows import (
    DEFAULT_LABEL_MAP,
    ClassLabel,
    Protocol,
    concat,
    load_flows,
    sanitize,
    split,
    write_flows,
)
from conftest import make_dataset

HEADER = " Flow ID, Source IP, Source Port, Destination IP, Destination Port, Protocol, Flow Duration, Flow Bytes/s, Label"


def write(tmp_path, lines, name="flows.csv"):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("BENIGN", ClassLabel.BENIGN),
        ("benign", ClassLabel.BENIGN),
        ("FTP-Patator", ClassLabel.FTP_PATATOR),
        ("DoS Hulk", ClassLabel.DOS),
        ("DoS slowloris", ClassLabel.DOS),
        ("DDoS", ClassLabel.DOS),
        ("SSH-Patator", None),
        ("PortScan", None),
        ("", None),
    ],
)
def test_default_label_map(raw, expected):
    assert DEFAULT_LABEL_MAP.get(raw) == expected


def test_class_label_display_round_trip():
    for c in ClassLabel:
        assert ClassLabel.parse(c.display) is c
    with pytest.raises(ValueError):
        ClassLabel.parse("Worm")


def test_protocol_parse():
    assert Protocol.parse("6") is Protocol.TCP
    assert Protocol.parse("udp") is Protocol.UDP
    assert Protocol.parse("47") is Protocol.OTHER
    assert Protocol.TCP.number == 6


def test_load_cic_style_csv(tmp_path):
    p = write(
        tmp_path,
        [
            HEADER,
            "a,10.0.0.1,40000,10.0.0.2,80,6,100,2.5,BENIGN",
            "b,10.0.0.3,40001,10.0.0.2,21,6,7,Infinity,FTP-Patator",
            "c,10.0.0.3,40002,10.0.0.2,80,6,,NaN,DoS Hulk",
            "d,10.0.0.4,40003,10.0.0.2,22,6,5,1.0,SSH-Patator",
        ],
    )
    ds, report = load_flows(p)
    assert len(ds) == 3
    assert ds.feature_names == ("Flow Duration", "Flow Bytes/s")
    assert ds.labels.tolist() == [0, 1, 2]
    np.testing.assert_array_equal(ds.features, [[100, 2.5], [7, 0.0], [0.0, 0.0]])
    assert report.rows_read == 4
    assert report.rows_kept == 3
    assert report.rows_dropped_unmapped == 1
    assert report.rows_repaired_nonfinite == 2
    assert ds.src_ip[1] == "10.0.0.3" and ds.dst_port[1] == 21
    assert ds.protocol[0] == "TCP"


def test_missing_label_column(tmp_path):
    p = write(tmp_path, ["Source IP,Destination IP,x", "1.1.1.1,2.2.2.2,3"])
    with pytest.raises(MissingColumn, match="Label"):
        load_flows(p)


def test_missing_ip_column(tmp_path):
    p = write(tmp_path, ["Destination IP,x,Label", "2.2.2.2,3,BENIGN"])
    with pytest.raises(MissingColumn, match="Source IP"):
        load_flows(p)


def test_everything_unmapped_is_empty(tmp_path):
    p = write(tmp_path, ["Source IP,Destination IP,x,Label", "1.1.1.1,2.2.2.2,3,PortScan"])
    with pytest.raises(EmptyDataset):
        load_flows(p)


def test_malformed_rows_are_reported_or_raised(tmp_path):
    p = write(
        tmp_path,
        [
            "Source IP,Destination IP,x,Label",
            "1.1.1.1,2.2.2.2,3,BENIGN",
            "1.1.1.1,2.2.2.2,abc,BENIGN",
            "1.1.1.1,2.2.2.2,BENIGN",
        ],
    )
    ds, report = load_flows(p)
    assert len(ds) == 1
    assert report.malformed_lines == [3, 4]
    with pytest.raises(MalformedRow) as info:
        load_flows(p, strict=True)
    assert info.value.line_no == 3


def test_custom_label_map(tmp_path):
    p = write(tmp_path, ["Source IP,Destination IP,x,Label", "1.1.1.1,2.2.2.2,3,normal", "1.1.1.1,2.2.2.2,4,bad"])
    ds, _ = load_flows(p, {"normal": ClassLabel.BENIGN, "bad": ClassLabel.DOS})
    assert ds.labels.tolist() == [0, 2]


def test_write_load_round_trip(tmp_path, small_desk):
    p = tmp_path / "out.csv"
    write_flows(small_desk.flows, p)
    back, report = load_flows(p)
    assert back == small_desk.flows
    assert report.rows_kept == len(small_desk.flows)


def test_sanitize():
    out = sanitize(np.array([[np.nan, 1.0], [np.inf, -np.inf]]))
    np.testing.assert_array_equal(out, [[0.0, 1.0], [0.0, 0.0]])


def test_dataset_rejects_non_finite():
    with pytest.raises(ValueError):
        make_dataset([[np.nan]], [0])


@given(n=st.integers(2, 300), f=st.floats(0.01, 0.99), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_split_properties(n, f, seed):
    ds = make_dataset(np.arange(n, dtype=float), np.arange(n) % 2)
    train, test = split(ds, f, seed)
    expected = min(max(math.floor(f * n + 0.5), 1), n - 1)
    assert len(train) == expected
    assert len(train) + len(test) == n
    ids_train = train.features[:, 0].tolist()
    ids_test = test.features[:, 0].tolist()
    assert not set(ids_train) & set(ids_test)
    # each part keeps the original relative order
    assert ids_train == sorted(ids_train) and ids_test == sorted(ids_test)
    again = split(ds, f, seed)
    assert again[0] == train and again[1] == test


def test_split_examples():
    ds = make_dataset(np.arange(10, dtype=float), [0] * 10)
    train, test = split(ds, 0.6, 0)
    assert (len(train), len(test)) == (6, 4)
    ds = make_dataset(np.arange(5, dtype=float), [0] * 5)
    assert len(split(ds, 0.5, 1)[0]) == 3  # 2.5 rounds half up
    with pytest.raises(InvalidFraction):
        split(ds, 1.0, 0)
    with pytest.raises(InvalidFraction):
        split(ds, 0.0, 0)


def test_stratified_split_keeps_class_shares():
    labels = [0] * 80 + [1] * 20
    ds = make_dataset(np.arange(100, dtype=float), labels)
    train, test = split(ds, 0.6, 3, stratify=True)
    assert np.bincount(train.labels).tolist() == [48, 12]
    assert np.bincount(test.labels).tolist() == [32, 8]


def test_concat_and_take():
    a = make_dataset([[1.0], [2.0]], [0, 1])
    b = make_dataset([[3.0]], [2])
    both = concat([a, b])
    assert both.features[:, 0].tolist() == [1.0, 2.0, 3.0]
    assert both.take([2]).labels.tolist() == [2]
    assert both.record(0).label is ClassLabel.BENIGN
