"""Labeled flow datasets: CSV loading, sanitization, splitting.

Datasets are stored column-wise (one numpy array per field) because every
consumer downstream works on whole columns; :class:`FlowRecord` is the
row view for callers that want one flow at a time.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Protocol as TypingProtocol

import numpy as np

from agids.errors import EmptyDataset, InvalidFraction, MalformedRow, MissingColumn


class ClassLabel(IntEnum):
    """Detection classes, in declaration order (used for tie-breaking)."""

    BENIGN = 0
    FTP_PATATOR = 1
    DOS = 2

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def parse(cls, text: str) -> ClassLabel:
        key = text.strip().lower().replace("_", "").replace("-", "")
        for label, name in _DISPLAY.items():
            if name.lower() == key or label.name.lower().replace("_", "") == key:
                return label
        raise ValueError(f"unknown class label {text!r}")


_DISPLAY = {
    ClassLabel.BENIGN: "Benign",
    ClassLabel.FTP_PATATOR: "FtpPatator",
    ClassLabel.DOS: "Dos",
}

# Raw label strings written by write_flows; the default label map reads them back.
RAW_LABELS = {
    ClassLabel.BENIGN: "BENIGN",
    ClassLabel.FTP_PATATOR: "FTP-Patator",
    ClassLabel.DOS: "DoS",
}


class Protocol(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, text: str) -> Protocol:
        t = text.strip().upper()
        if t in _PROTO_NUMBERS:
            return _PROTO_NUMBERS[t]
        try:
            return cls(t)
        except ValueError:
            return cls.OTHER

    @property
    def number(self) -> int:
        return {Protocol.TCP: 6, Protocol.UDP: 17, Protocol.ICMP: 1}.get(self, 0)


_PROTO_NUMBERS = {"6": Protocol.TCP, "17": Protocol.UDP, "1": Protocol.ICMP}


class LabelMap(TypingProtocol):
    def get(self, raw: str, default=None): ...


class DefaultLabelMap:
    """BENIGN, FTP-Patator* and DoS*/DDoS* (case-insensitive); all else unmapped."""

    def get(self, raw: str, default=None) -> ClassLabel | None:
        key = raw.strip().lower()
        if key == "benign":
            return ClassLabel.BENIGN
        if key.startswith("ftp-patator"):
            return ClassLabel.FTP_PATATOR
        if key.startswith("dos") or key.startswith("ddos"):
            return ClassLabel.DOS
        return default


DEFAULT_LABEL_MAP = DefaultLabelMap()

# Normalized (stripped, lower-cased) header names per metadata field.
DEFAULT_ALIASES: dict[str, tuple[str, ...]] = {
    "flow_id": ("flow id", "flow_id", "flowid"),
    "src_ip": ("source ip", "src ip", "src_ip", "srcip"),
    "dst_ip": ("destination ip", "dst ip", "dst_ip", "dstip"),
    "src_port": ("source port", "src port", "src_port", "sport"),
    "dst_port": ("destination port", "dst port", "dst_port", "dport"),
    "protocol": ("protocol", "proto"),
    "timestamp": ("timestamp",),
}
_REQUIRED_META = ("src_ip", "dst_ip")
_CANONICAL_HEADER = {
    "flow_id": "Flow ID",
    "src_ip": "Source IP",
    "src_port": "Source Port",
    "dst_ip": "Destination IP",
    "dst_port": "Destination Port",
    "protocol": "Protocol",
}


@dataclass(frozen=True)
class FlowRecord:
    flow_id: str
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: Protocol
    features: tuple[float, ...]
    label: ClassLabel


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented collection of labeled flows.

    ``labels`` holds ``ClassLabel`` integer codes.  All arrays share length N;
    ``features`` has shape (N, F) with F == len(feature_names).
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    flow_id: np.ndarray
    src_ip: np.ndarray
    dst_ip: np.ndarray
    src_port: np.ndarray
    dst_port: np.ndarray
    protocol: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ValueError("features must be (N, F) with F == len(feature_names)")
        for name in ("labels", "flow_id", "src_ip", "dst_ip", "src_port", "dst_port", "protocol"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if not np.isfinite(self.features).all():
            raise ValueError("features must be finite; sanitize first")

    @classmethod
    def from_records(cls, records: Sequence[FlowRecord], feature_names: Sequence[str]) -> Dataset:
        f = len(feature_names)
        feats = np.array([r.features for r in records], dtype=np.float64).reshape(len(records), f)
        return cls(
            features=feats,
            labels=np.array([int(r.label) for r in records], dtype=np.int64),
            feature_names=tuple(feature_names),
            flow_id=np.array([r.flow_id for r in records], dtype=object),
            src_ip=np.array([r.src_ip for r in records], dtype=object),
            dst_ip=np.array([r.dst_ip for r in records], dtype=object),
            src_port=np.array([r.src_port for r in records], dtype=np.int64),
            dst_port=np.array([r.dst_port for r in records], dtype=np.int64),
            protocol=np.array([r.protocol.value for r in records], dtype=object),
        )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def class_set(self) -> frozenset[ClassLabel]:
        return frozenset(ClassLabel(int(c)) for c in np.unique(self.labels))

    def record(self, i: int) -> FlowRecord:
        return FlowRecord(
            flow_id=str(self.flow_id[i]),
            src_ip=str(self.src_ip[i]),
            dst_ip=str(self.dst_ip[i]),
            src_port=int(self.src_port[i]),
            dst_port=int(self.dst_port[i]),
            protocol=Protocol(self.protocol[i]),
            features=tuple(float(x) for x in self.features[i]),
            label=ClassLabel(int(self.labels[i])),
        )

    def records(self) -> Iterator[FlowRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def take(self, indices) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
            flow_id=self.flow_id[idx],
            src_ip=self.src_ip[idx],
            dst_ip=self.dst_ip[idx],
            src_port=self.src_port[idx],
            dst_port=self.dst_port[idx],
            protocol=self.protocol[idx],
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and all(
                np.array_equal(getattr(self, c), getattr(other, c))
                for c in ("labels", "flow_id", "src_ip", "dst_ip", "src_port", "dst_port", "protocol")
            )
        )

    __hash__ = None


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise EmptyDataset("nothing to concatenate")
    names = parts[0].feature_names
    if any(p.feature_names != names for p in parts):
        raise ValueError("datasets have different feature columns")
    return Dataset(
        features=np.concatenate([p.features for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        feature_names=names,
        **{
            c: np.concatenate([getattr(p, c) for p in parts])
            for c in ("flow_id", "src_ip", "dst_ip", "src_port", "dst_port", "protocol")
        },
    )


@dataclass
class LoadReport:
    rows_read: int = 0
    rows_kept: int = 0
    rows_dropped_unmapped: int = 0
    rows_repaired_nonfinite: int = 0
    malformed_lines: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def sanitize(matrix: np.ndarray) -> np.ndarray:
    """Replace NaN and +/-inf with 0.0 (returns a new array)."""
    out = np.array(matrix, dtype=np.float64, copy=True)
    out[~np.isfinite(out)] = 0.0
    return out


def _parse_float(text: str) -> float:
    t = text.strip()
    if not t:
        return math.nan
    return float(t)


def load_flows(
    path: str | Path,
    label_map: LabelMap | Mapping[str, ClassLabel] | None = None,
    *,
    aliases: Mapping[str, Sequence[str]] | None = None,
    strict: bool = False,
) -> tuple[Dataset, LoadReport]:
    """Read a CICFlowMeter-style CSV.

    Rows whose label is not in ``label_map`` are dropped and counted.  Rows
    with unparseable feature cells are skipped and their line numbers listed
    in the report (``strict=True`` raises :class:`MalformedRow` instead).
    Empty and non-finite feature cells are repaired to 0.0.
    """
    label_map = DEFAULT_LABEL_MAP if label_map is None else label_map
    alias_table = {k: tuple(a.lower() for a in v) for k, v in (aliases or DEFAULT_ALIASES).items()}
    report = LoadReport()

    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("Label") from None
        norm = [h.strip().lower() for h in header]
        if "label" not in norm:
            raise MissingColumn("Label")
        label_col = norm.index("label")
        meta_cols: dict[str, int] = {}
        for fld, names in alias_table.items():
            for j, h in enumerate(norm):
                if h in names and j not in meta_cols.values():
                    meta_cols[fld] = j
                    break
        for fld in _REQUIRED_META:
            if fld not in meta_cols:
                raise MissingColumn(_CANONICAL_HEADER[fld])
        used = set(meta_cols.values()) | {label_col}
        feature_cols = [j for j in range(len(header)) if j not in used]
        feature_names = tuple(header[j].strip() for j in feature_cols)

        kept_feats: list[list[float]] = []
        labels: list[int] = []
        meta: dict[str, list] = {k: [] for k in ("flow_id", "src_ip", "dst_ip", "src_port", "dst_port", "protocol")}
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            report.rows_read += 1
            line_no = reader.line_num
            try:
                if len(row) != len(header):
                    raise ValueError(f"expected {len(header)} fields, got {len(row)}")
                label = label_map.get(row[label_col].strip())
                if label is None:
                    report.rows_dropped_unmapped += 1
                    continue
                values = [_parse_float(row[j]) for j in feature_cols]
                src_ip = row[meta_cols["src_ip"]].strip()
                dst_ip = row[meta_cols["dst_ip"]].strip()
                if not src_ip or not dst_ip:
                    raise ValueError("empty IP address")
                sport = int(float(row[meta_cols["src_port"]])) if "src_port" in meta_cols else 0
                dport = int(float(row[meta_cols["dst_port"]])) if "dst_port" in meta_cols else 0
                if not (0 <= sport <= 65535 and 0 <= dport <= 65535):
                    raise ValueError("port out of range")
            except ValueError as exc:
                if strict:
                    raise MalformedRow(line_no, str(exc)) from exc
                report.malformed_lines.append(line_no)
                continue
            if not all(math.isfinite(v) for v in values):
                report.rows_repaired_nonfinite += 1
            kept_feats.append(values)
            labels.append(int(label))
            meta["flow_id"].append(
                row[meta_cols["flow_id"]].strip() if "flow_id" in meta_cols else f"row-{line_no}"
            )
            meta["src_ip"].append(src_ip)
            meta["dst_ip"].append(dst_ip)
            meta["src_port"].append(sport)
            meta["dst_port"].append(dport)
            meta["protocol"].append(
                Protocol.parse(row[meta_cols["protocol"]]).value if "protocol" in meta_cols else "OTHER"
            )

    if not kept_feats:
        raise EmptyDataset(f"no usable rows in {path}")
    report.rows_kept = len(kept_feats)
    feats = sanitize(np.array(kept_feats, dtype=np.float64).reshape(len(kept_feats), len(feature_cols)))
    ds = Dataset(
        features=feats,
        labels=np.array(labels, dtype=np.int64),
        feature_names=feature_names,
        flow_id=np.array(meta["flow_id"], dtype=object),
        src_ip=np.array(meta["src_ip"], dtype=object),
        dst_ip=np.array(meta["dst_ip"], dtype=object),
        src_port=np.array(meta["src_port"], dtype=np.int64),
        dst_port=np.array(meta["dst_port"], dtype=np.int64),
        protocol=np.array(meta["protocol"], dtype=object),
    )
    return ds, report


def write_flows(dataset: Dataset, path: str | Path) -> None:
    """Write ``dataset`` as CSV readable by :func:`load_flows` (floats round-trip exactly)."""
    header = [_CANONICAL_HEADER[k] for k in ("flow_id", "src_ip", "src_port", "dst_ip", "dst_port", "protocol")]
    header += list(dataset.feature_names) + ["Label"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        feats = dataset.features.tolist()
        for i in range(len(dataset)):
            w.writerow(
                [
                    dataset.flow_id[i],
                    dataset.src_ip[i],
                    int(dataset.src_port[i]),
                    dataset.dst_ip[i],
                    int(dataset.dst_port[i]),
                    Protocol(dataset.protocol[i]).number,
                    *map(repr, feats[i]),
                    RAW_LABELS[ClassLabel(int(dataset.labels[i]))],
                ]
            )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(
    dataset: Dataset, train_fraction: float, seed: int, *, stratify: bool = False
) -> tuple[Dataset, Dataset]:
    """Seeded random train/test split. Both parts are kept non-empty."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidFraction(train_fraction)
    n = len(dataset)
    if n < 2:
        raise EmptyDataset("need at least two records to split")
    rng = np.random.default_rng(seed)
    if stratify:
        train_parts = []
        for c in np.unique(dataset.labels):
            members = np.flatnonzero(dataset.labels == c)
            members = members[rng.permutation(len(members))]
            train_parts.append(members[: _round_half_up(train_fraction * len(members))])
        train_idx = np.concatenate(train_parts)
        mask = np.zeros(n, dtype=bool)
        mask[train_idx] = True
        if mask.all():
            mask[train_idx[-1]] = False
        elif not mask.any():
            mask[np.flatnonzero(~mask)[0]] = True
    else:
        n_train = min(max(_round_half_up(train_fraction * n), 1), n - 1)
        perm = rng.permutation(n)
        mask = np.zeros(n, dtype=bool)
        mask[perm[:n_train]] = True
    return dataset.take(np.flatnonzero(mask)), dataset.take(np.flatnonzero(~mask))


def to_matrix(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    return dataset.features, dataset.labels
