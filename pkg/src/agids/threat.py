"""Network inventory, signature rules, alerts and the vulnerability database."""

from __future__ import annotations

import csv
import ipaddress
import json
import math
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from agids.errors import DataError, InvalidFraction, UnknownVulnerability
from agids.flows import ClassLabel, Dataset, Protocol


@dataclass(frozen=True)
class Vulnerability:
    id: str
    service: str
    cvss_base: float
    description: str = ""

    def __post_init__(self):
        if not 0.0 <= self.cvss_base <= 10.0:
            raise DataError(f"{self.id}: cvss_base {self.cvss_base} outside [0, 10]")


@dataclass(frozen=True)
class Host:
    ip: str
    services: tuple[tuple[str, int], ...] = ()
    vuln_ids: tuple[str, ...] = ()
    external: bool = False


@dataclass(frozen=True)
class NetworkInventory:
    hosts: dict[str, Host]
    vulnerabilities: dict[str, Vulnerability]
    reachability: frozenset[tuple[str, str]]

    def __post_init__(self):
        for host in self.hosts.values():
            for v in host.vuln_ids:
                if v not in self.vulnerabilities:
                    raise UnknownVulnerability(v)
        for s, d in self.reachability:
            if s not in self.hosts or d not in self.hosts:
                raise DataError(f"reachability pair ({s}, {d}) references an unknown host")

    @property
    def external_hosts(self) -> tuple[str, ...]:
        return tuple(sorted(ip for ip, h in self.hosts.items() if h.external))

    @property
    def internal_hosts(self) -> tuple[str, ...]:
        return tuple(sorted(ip for ip, h in self.hosts.items() if not h.external))

    def to_dict(self) -> dict:
        return {
            "hosts": [
                {
                    "ip": h.ip,
                    "external": h.external,
                    "services": [{"name": n, "port": p} for n, p in h.services],
                    "vulns": list(h.vuln_ids),
                }
                for h in sorted(self.hosts.values(), key=lambda h: h.ip)
            ],
            "vulnerabilities": [
                {"id": v.id, "service": v.service, "cvss_base": v.cvss_base, "description": v.description}
                for v in sorted(self.vulnerabilities.values(), key=lambda v: v.id)
            ],
            "reachability": [list(p) for p in sorted(self.reachability)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> NetworkInventory:
        vulns = {}
        for v in doc.get("vulnerabilities", []):
            if v["id"] in vulns:
                raise DataError(f"duplicate vulnerability id {v['id']!r}")
            vulns[v["id"]] = Vulnerability(
                v["id"], v.get("service", ""), float(v["cvss_base"]), v.get("description", "")
            )
        hosts = {}
        for h in doc.get("hosts", []):
            if h["ip"] in hosts:
                raise DataError(f"duplicate host {h['ip']!r}")
            hosts[h["ip"]] = Host(
                ip=h["ip"],
                services=tuple((s["name"], int(s["port"])) for s in h.get("services", [])),
                vuln_ids=tuple(h.get("vulns", [])),
                external=bool(h.get("external", False)),
            )
        reach = frozenset((str(s), str(d)) for s, d in doc.get("reachability", []))
        return cls(hosts, vulns, reach)


def load_inventory(path: str | Path) -> NetworkInventory:
    with open(path, encoding="utf-8") as fh:
        return NetworkInventory.from_dict(json.load(fh))


def save_inventory(inv: NetworkInventory, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inv.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class RuleMatch:
    """Header predicate; ``None`` fields match anything."""

    protocol: Protocol | None = None
    dst_port_min: int = 0
    dst_port_max: int = 65535
    src_cidr: str | None = None
    dst_cidr: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"dst_port": [self.dst_port_min, self.dst_port_max]}
        if self.protocol is not None:
            out["protocol"] = self.protocol.value
        if self.src_cidr:
            out["src_cidr"] = self.src_cidr
        if self.dst_cidr:
            out["dst_cidr"] = self.dst_cidr
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> RuleMatch:
        port = doc.get("dst_port", [0, 65535])
        lo, hi = (port, port) if isinstance(port, int) else (int(port[0]), int(port[1]))
        proto = doc.get("protocol")
        return cls(
            protocol=Protocol.parse(proto) if proto not in (None, "any") else None,
            dst_port_min=lo,
            dst_port_max=hi,
            src_cidr=doc.get("src_cidr"),
            dst_cidr=doc.get("dst_cidr"),
        )


@dataclass(frozen=True)
class SignatureRule:
    sid: int
    message: str
    attack_class: ClassLabel
    vuln_id: str
    match: RuleMatch

    def __post_init__(self):
        if self.attack_class == ClassLabel.BENIGN:
            raise DataError(f"rule {self.sid}: attack_class cannot be Benign")

    def to_dict(self) -> dict:
        return {
            "sid": self.sid,
            "message": self.message,
            "attack_class": self.attack_class.display,
            "vuln_id": self.vuln_id,
            "match": self.match.to_dict(),
        }


@dataclass(frozen=True)
class Alert:
    sid: int
    vuln_id: str
    src_ip: str
    dst_ip: str
    flow_id: str


def parse_rules(docs: Iterable[dict], inventory: NetworkInventory) -> list[SignatureRule]:
    rules = []
    seen = set()
    for d in docs:
        rule = SignatureRule(
            sid=int(d["sid"]),
            message=d.get("message", ""),
            attack_class=ClassLabel.parse(d["attack_class"]),
            vuln_id=d["vuln_id"],
            match=RuleMatch.from_dict(d.get("match", {})),
        )
        if rule.vuln_id not in inventory.vulnerabilities:
            raise UnknownVulnerability(rule.vuln_id)
        if rule.sid in seen:
            raise DataError(f"duplicate rule sid {rule.sid}")
        seen.add(rule.sid)
        rules.append(rule)
    return sorted(rules, key=lambda r: r.sid)


def load_rules(path: str | Path, inventory: NetworkInventory) -> list[SignatureRule]:
    """Load a JSON rule array, or a one-rule-per-line text file (``.rules``)."""
    text = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix == ".rules":
        return parse_rules((parse_rule_line(line) for line in text.splitlines() if _is_rule_line(line)), inventory)
    return parse_rules(json.loads(text), inventory)


def save_rules(rules: Sequence[SignatureRule], path: str | Path) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in rules], indent=2) + "\n", encoding="utf-8")


def _is_rule_line(line: str) -> bool:
    s = line.strip()
    return bool(s) and not s.startswith("#")


_RULE_RE = re.compile(
    r"^alert\s+(?P<proto>\S+)\s+(?P<src>\S+)\s+\S+\s+->\s+(?P<dst>\S+)\s+(?P<port>\S+)\s*\((?P<opts>.*)\)\s*$"
)


def parse_rule_line(line: str) -> dict:
    """Parse ``alert tcp SRC any -> DST PORT (msg:"..."; sid:N; class:X; vuln:ID;)``.

    Only header fields are used; ``PORT`` is ``any``, ``N`` or ``LO:HI``.
    """
    m = _RULE_RE.match(line.strip())
    if not m:
        raise DataError(f"cannot parse rule line: {line!r}")
    opts = {}
    for part in re.findall(r'(\w+)\s*:\s*("[^"]*"|[^;]+)\s*;', m["opts"]):
        opts[part[0]] = part[1].strip().strip('"')
    match: dict = {}
    if m["proto"] != "any":
        match["protocol"] = m["proto"]
    if m["src"] != "any":
        match["src_cidr"] = m["src"]
    if m["dst"] != "any":
        match["dst_cidr"] = m["dst"]
    port = m["port"]
    if port != "any":
        lo, _, hi = port.partition(":")
        match["dst_port"] = [int(lo or 0), int(hi or lo or 65535)]
    try:
        return {
            "sid": int(opts["sid"]),
            "message": opts.get("msg", ""),
            "attack_class": opts["class"],
            "vuln_id": opts["vuln"],
            "match": match,
        }
    except KeyError as exc:
        raise DataError(f"rule line missing option {exc}: {line!r}") from None


def _ip_ints(ips: np.ndarray) -> np.ndarray:
    uniq, inverse = np.unique(ips.astype(str), return_inverse=True)
    vals = np.array([int(ipaddress.ip_address(u)) if _is_ipv4(u) else -1 for u in uniq], dtype=np.int64)
    return vals[inverse]


def _is_ipv4(text: str) -> bool:
    try:
        return ipaddress.ip_address(text).version == 4
    except ValueError:
        return False


def _cidr_mask(ip_vals: np.ndarray, cidr: str) -> np.ndarray:
    negate = cidr.startswith("!")
    net = ipaddress.ip_network(cidr.lstrip("!"), strict=False)
    lo = int(net.network_address)
    hi = int(net.broadcast_address)
    inside = (ip_vals >= lo) & (ip_vals <= hi)
    return ~inside if negate else inside


def match_rules(rules: Sequence[SignatureRule], flows: Dataset) -> list[Alert]:
    """One alert per matching (rule, flow) pair, ordered by flow then sid."""
    if not rules or len(flows) == 0:
        return []
    src_vals = _ip_ints(flows.src_ip) if any(r.match.src_cidr for r in rules) else None
    dst_vals = _ip_ints(flows.dst_ip) if any(r.match.dst_cidr for r in rules) else None
    flow_idx, sids = [], []
    for rule in sorted(rules, key=lambda r: r.sid):
        m = rule.match
        mask = (flows.dst_port >= m.dst_port_min) & (flows.dst_port <= m.dst_port_max)
        if m.protocol is not None:
            mask &= flows.protocol == m.protocol.value
        if m.src_cidr:
            mask &= _cidr_mask(src_vals, m.src_cidr)
        if m.dst_cidr:
            mask &= _cidr_mask(dst_vals, m.dst_cidr)
        hits = np.flatnonzero(mask)
        flow_idx.append(hits)
        sids.append(np.full(len(hits), rule.sid, dtype=np.int64))
    fi = np.concatenate(flow_idx)
    si = np.concatenate(sids)
    order = np.lexsort((si, fi))
    by_sid = {r.sid: r for r in rules}
    return [
        Alert(int(s), by_sid[int(s)].vuln_id, str(flows.src_ip[i]), str(flows.dst_ip[i]), str(flows.flow_id[i]))
        for i, s in zip(fi[order], si[order])
    ]


def limit_alerts(alerts: Sequence[Alert], fraction: float, seed: int) -> list[Alert]:
    """Keep the first round(fraction * N) alerts of a seeded shuffle.

    The kept alerts are returned in their original order.  For a fixed seed a
    smaller fraction always keeps a subset of a larger one.
    """
    if not 0.0 <= fraction <= 1.0:
        raise InvalidFraction(fraction, "[0, 1]")
    n = len(alerts)
    keep = int(math.floor(fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    return [alerts[i] for i in np.sort(perm[:keep])]


def save_alerts_csv(alerts: Sequence[Alert], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sid", "vuln_id", "src_ip", "dst_ip", "flow_id"])
        for a in alerts:
            w.writerow([a.sid, a.vuln_id, a.src_ip, a.dst_ip, a.flow_id])


def load_alerts_csv(path: str | Path) -> list[Alert]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            Alert(int(r["sid"]), r["vuln_id"], r["src_ip"], r["dst_ip"], r["flow_id"])
            for r in csv.DictReader(fh)
        ]


@dataclass(frozen=True)
class VulnEntry:
    vulnerability: Vulnerability
    confirmed: bool = False
    first_seen_iteration: int | None = None
    support: frozenset[tuple[int, str]] = field(default_factory=frozenset)


@dataclass(frozen=True)
class VulnDatabase:
    entries: dict[str, VulnEntry]

    @classmethod
    def from_inventory(cls, inventory: NetworkInventory) -> VulnDatabase:
        return cls({vid: VulnEntry(v) for vid, v in sorted(inventory.vulnerabilities.items())})

    @property
    def confirmed(self) -> frozenset[str]:
        return frozenset(vid for vid, e in self.entries.items() if e.confirmed)

    def to_dict(self) -> dict:
        return {
            vid: {
                "confirmed": e.confirmed,
                "first_seen_iteration": e.first_seen_iteration,
                "support": sorted([sid, fid] for sid, fid in e.support),
            }
            for vid, e in sorted(self.entries.items())
        }


def confirm_vulns(db: VulnDatabase, alerts: Iterable[Alert], iteration: int) -> VulnDatabase:
    """Mark every alerted vulnerability confirmed; returns a new database.

    Entries that are already confirmed are left exactly as they were.
    """
    support: dict[str, set[tuple[int, str]]] = {}
    for a in alerts:
        if a.vuln_id not in db.entries:
            raise UnknownVulnerability(a.vuln_id)
        support.setdefault(a.vuln_id, set()).add((a.sid, a.flow_id))
    fresh = {vid: keys for vid, keys in support.items() if not db.entries[vid].confirmed}
    if not fresh:
        return db
    entries = dict(db.entries)
    for vid, keys in fresh.items():
        entries[vid] = replace(
            entries[vid], confirmed=True, first_seen_iteration=iteration, support=frozenset(keys)
        )
    return VulnDatabase(entries)
