"""Seeded synthetic desk corpus: inventory, signature rules and labeled flows.

The topology mimics a small enterprise: one external attacker, a DMZ with
web, FTP and mail servers, an internal domain controller and database, and
six workstations.  Attack flows only travel attacker -> DMZ, so every attack
lies on a path of the alert-derived graph, while most benign traffic runs
between internal hosts.  Flow features are drawn from overlapping
class-conditional profiles so a tree trained on them alone makes mistakes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from agids.flows import ClassLabel, Dataset, Protocol, write_flows
from agids.threat import (
    Host,
    NetworkInventory,
    RuleMatch,
    SignatureRule,
    Vulnerability,
    save_inventory,
    save_rules,
)

log = logging.getLogger(__name__)

ATTACKER = "205.174.165.73"
WEB = "192.168.10.50"
FTP = "192.168.10.51"
MAIL = "192.168.10.52"
DC = "192.168.10.3"
DB = "192.168.10.60"
CLIENTS = ("192.168.10.5", "192.168.10.8", "192.168.10.9", "192.168.10.12", "192.168.10.14", "192.168.10.15")
SERVERS = (WEB, FTP, MAIL, DC, DB)

FEATURE_NAMES = (
    "Flow Duration", "Total Fwd Packets", "Total Backward Packets", "Total Length of Fwd Packets",
    "Total Length of Bwd Packets", "Fwd Packet Length Max", "Fwd Packet Length Min", "Fwd Packet Length Mean",
    "Fwd Packet Length Std", "Bwd Packet Length Max", "Bwd Packet Length Min", "Bwd Packet Length Mean",
    "Bwd Packet Length Std", "Flow Bytes/s", "Flow Packets/s", "Flow IAT Mean", "Flow IAT Std", "Flow IAT Max",
    "Flow IAT Min", "Fwd IAT Total", "Fwd IAT Mean", "Fwd IAT Std", "Fwd IAT Max", "Fwd IAT Min", "Bwd IAT Total",
    "Bwd IAT Mean", "Bwd IAT Std", "Bwd IAT Max", "Bwd IAT Min", "Fwd PSH Flags", "Bwd PSH Flags", "Fwd URG Flags",
    "Bwd URG Flags", "Fwd Header Length", "Bwd Header Length", "Fwd Packets/s", "Bwd Packets/s",
    "Min Packet Length", "Max Packet Length", "Packet Length Mean", "Packet Length Std",
    "Packet Length Variance", "FIN Flag Count", "SYN Flag Count", "RST Flag Count", "PSH Flag Count",
    "ACK Flag Count", "URG Flag Count", "CWE Flag Count", "ECE Flag Count", "Down/Up Ratio",
    "Average Packet Size", "Avg Fwd Segment Size", "Avg Bwd Segment Size", "Fwd Header Length.1",
    "Fwd Avg Bytes/Bulk", "Fwd Avg Packets/Bulk", "Fwd Avg Bulk Rate", "Bwd Avg Bytes/Bulk",
    "Bwd Avg Packets/Bulk", "Bwd Avg Bulk Rate", "Subflow Fwd Packets", "Subflow Fwd Bytes",
    "Subflow Bwd Packets", "Subflow Bwd Bytes", "Init_Win_bytes_forward", "Init_Win_bytes_backward",
    "act_data_pkt_fwd", "min_seg_size_forward", "Active Mean", "Active Std", "Active Max", "Active Min",
    "Idle Mean", "Idle Std", "Idle Max", "Idle Min", "Subflow Count", "Bwd Act Data Pkts", "Fwd Bulk Count",
)  # fmt: skip

# Columns that are all-zero in real captures too; they exercise the ANOVA 0/0 case.
_ZERO_COLUMNS = frozenset(
    {"Bwd PSH Flags", "Fwd URG Flags", "Bwd URG Flags", "CWE Flag Count", "Fwd Avg Bytes/Bulk",
     "Fwd Avg Packets/Bulk", "Fwd Avg Bulk Rate", "Bwd Avg Bytes/Bulk", "Bwd Avg Packets/Bulk",
     "Bwd Avg Bulk Rate"}
)  # fmt: skip

# (vuln id, host, service, cvss range).  Exploited vulnerabilities score high.
_VULNS: tuple[tuple[str, str, str, tuple[float, float]], ...] = (
    ("VULN-WEB-01", WEB, "http", (7.5, 7.5)),  # slow-header exhaustion, DoS target
    ("VULN-WEB-02", WEB, "http", (7.8, 7.8)),  # request flood, DoS target
    ("VULN-WEB-03", WEB, "http", (4.0, 6.5)),
    ("VULN-WEB-04", WEB, "https", (3.0, 6.0)),
    ("VULN-WEB-05", WEB, "ssh", (2.0, 5.5)),
    ("VULN-FTP-01", FTP, "ftp", (9.8, 9.8)),  # weak credentials, brute-force target
    ("VULN-FTP-02", FTP, "ftp", (4.0, 7.0)),
    ("VULN-FTP-03", FTP, "ssh", (2.0, 5.5)),
    ("VULN-FTP-04", FTP, "ftp", (3.0, 6.0)),
    ("VULN-MAIL-01", MAIL, "smtp", (4.0, 7.5)),
    ("VULN-MAIL-02", MAIL, "imap", (3.0, 6.0)),
    ("VULN-MAIL-03", MAIL, "smtp", (2.0, 5.0)),
    ("VULN-DC-01", DC, "smb", (5.0, 8.0)),
    ("VULN-DC-02", DC, "ldap", (3.0, 6.5)),
    ("VULN-DC-03", DC, "dns", (2.0, 5.0)),
    ("VULN-DC-04", DC, "kerberos", (4.0, 7.0)),
    ("VULN-DC-05", DC, "smb", (3.0, 6.0)),
    ("VULN-DB-01", DB, "mysql", (8.8, 8.8)),  # lateral movement from the web tier
    ("VULN-DB-02", DB, "mysql", (3.0, 6.5)),
    ("VULN-DB-03", DB, "ssh", (2.0, 5.5)),
    ("VULN-DB-04", DB, "mysql", (2.5, 6.0)),
)  # fmt: skip
_CLIENT_VULN_SERVICES = ("smb", "rdp", "browser", "office")
_N_VULNS = 40

# 25 rules.  (vuln id, attack class, protocol, port, src cidr, dst host)
_RULES: tuple[tuple[str, ClassLabel, str | None, int | None, str, str], ...] = (
    ("VULN-WEB-01", ClassLabel.DOS, "tcp", 80, f"{ATTACKER}/32", WEB),
    ("VULN-WEB-02", ClassLabel.DOS, "tcp", 80, f"{ATTACKER}/32", WEB),
    ("VULN-FTP-01", ClassLabel.FTP_PATATOR, "tcp", 21, f"{ATTACKER}/32", FTP),
    ("VULN-DB-01", ClassLabel.DOS, "tcp", 3306, f"{WEB}/32", DB),
    ("VULN-WEB-03", ClassLabel.DOS, "tcp", 8080, "!192.168.10.0/24", WEB),
    ("VULN-WEB-04", ClassLabel.DOS, "tcp", 8443, "!192.168.10.0/24", WEB),
    ("VULN-WEB-05", ClassLabel.FTP_PATATOR, "tcp", 22, "!192.168.10.0/24", WEB),
    ("VULN-FTP-02", ClassLabel.FTP_PATATOR, "tcp", 990, "!192.168.10.0/24", FTP),
    ("VULN-FTP-03", ClassLabel.FTP_PATATOR, "tcp", 22, "!192.168.10.0/24", FTP),
    ("VULN-FTP-04", ClassLabel.FTP_PATATOR, "tcp", 2121, "!192.168.10.0/24", FTP),
    ("VULN-MAIL-01", ClassLabel.DOS, "tcp", 587, "!192.168.10.0/24", MAIL),
    ("VULN-MAIL-02", ClassLabel.DOS, "tcp", 993, "!192.168.10.0/24", MAIL),
    ("VULN-MAIL-03", ClassLabel.DOS, "tcp", 465, "!192.168.10.0/24", MAIL),
    ("VULN-DC-01", ClassLabel.DOS, "tcp", 445, "!192.168.10.0/24", DC),
    ("VULN-DC-02", ClassLabel.DOS, "tcp", 636, "!192.168.10.0/24", DC),
    ("VULN-DC-03", ClassLabel.DOS, "udp", 53, "!192.168.10.0/24", DC),
    ("VULN-DC-04", ClassLabel.DOS, "tcp", 88, "!192.168.10.0/24", DC),
    ("VULN-DC-05", ClassLabel.DOS, "tcp", 139, "!192.168.10.0/24", DC),
    ("VULN-DB-02", ClassLabel.DOS, "tcp", 3306, "!192.168.10.0/24", DB),
    ("VULN-DB-03", ClassLabel.FTP_PATATOR, "tcp", 22, "!192.168.10.0/24", DB),
    ("VULN-DB-04", ClassLabel.DOS, "tcp", 33060, "!192.168.10.0/24", DB),
    ("CLIENT-0", ClassLabel.DOS, "tcp", 445, "!192.168.10.0/24", CLIENTS[0]),
    ("CLIENT-1", ClassLabel.DOS, "tcp", 3389, "!192.168.10.0/24", CLIENTS[1]),
    ("CLIENT-2", ClassLabel.DOS, "tcp", 445, "!192.168.10.0/24", CLIENTS[2]),
    ("CLIENT-3", ClassLabel.DOS, "tcp", 3389, "!192.168.10.0/24", CLIENTS[3]),
)  # fmt: skip


def _reachability() -> frozenset[tuple[str, str]]:
    pairs = {(ATTACKER, h) for h in (WEB, FTP, MAIL)}
    pairs |= {(WEB, DB), (WEB, DC), (FTP, DC), (MAIL, DC), (WEB, FTP), (FTP, WEB)}
    pairs |= {(c, s) for c in CLIENTS for s in SERVERS}
    pairs |= {(DC, c) for c in CLIENTS}
    # workstation peer-to-peer within two small subnets
    for group in (CLIENTS[:3], CLIENTS[3:]):
        pairs |= {(a, b) for a in group for b in group if a != b}
    return frozenset(pairs)


def build_inventory(seed: int = 0) -> NetworkInventory:
    """Fixed topology; CVSS scores of the unexploited vulnerabilities vary with ``seed``."""
    rng = np.random.default_rng([seed, 1])
    vulns: dict[str, Vulnerability] = {}
    host_vulns: dict[str, list[str]] = {h: [] for h in (ATTACKER, *SERVERS, *CLIENTS)}
    for vid, host, service, (lo, hi) in _VULNS:
        score = round(float(rng.uniform(lo, hi)), 1)
        vulns[vid] = Vulnerability(vid, service, score)
        host_vulns[host].append(vid)
    n_client = _N_VULNS - len(_VULNS)
    for k in range(n_client):
        vid = f"VULN-CL-{k + 1:02d}"
        host = CLIENTS[k % len(CLIENTS)]
        vulns[vid] = Vulnerability(vid, _CLIENT_VULN_SERVICES[k % 4], round(float(rng.uniform(2.0, 9.0)), 1))
        host_vulns[host].append(vid)
    services = {
        ATTACKER: (),
        WEB: (("http", 80), ("https", 443), ("ssh", 22)),
        FTP: (("ftp", 21), ("ssh", 22)),
        MAIL: (("smtp", 25), ("imap", 143)),
        DC: (("dns", 53), ("ldap", 389), ("smb", 445), ("kerberos", 88)),
        DB: (("mysql", 3306), ("ssh", 22)),
    }
    client_services = (("smb", 445), ("rdp", 3389))
    hosts = {}
    for ip, vids in host_vulns.items():
        hosts[ip] = Host(
            ip=ip,
            services=services.get(ip, client_services),
            vuln_ids=tuple(sorted(vids)),
            external=ip == ATTACKER,
        )
    return NetworkInventory(hosts, vulns, _reachability())


def build_rules(inv: NetworkInventory) -> list[SignatureRule]:
    client_vulns = {h: sorted(inv.hosts[h].vuln_ids) for h in CLIENTS}
    rules = []
    for n, (vid, cls, proto, port, src, dst) in enumerate(_RULES):
        if vid.startswith("CLIENT-"):
            vid = client_vulns[dst][0]
        match = RuleMatch(
            protocol=Protocol.parse(proto) if proto else None,
            dst_port_min=port,
            dst_port_max=port,
            src_cidr=src,
            dst_cidr=f"{dst}/32",
        )
        msg = f"{cls.display} attempt against {inv.vulnerabilities[vid].service} ({vid})"
        rules.append(SignatureRule(2_000_001 + n, msg, cls, vid, match))
    return rules


@dataclass(frozen=True)
class _Profile:
    """A traffic profile: who talks to whom and what the flows look like."""

    label: ClassLabel
    weight: float
    pairs: tuple[tuple[str, str, int, str], ...]  # (src, dst, dst_port, proto)
    center: int  # index into the latent centre table


_N_LATENT = 6


def _profiles() -> tuple[_Profile, ...]:
    web_clients = tuple((c, WEB, p, "tcp") for c in CLIENTS for p in (80, 443))
    internet = tuple((f"52.{a}.{b}.{c}", WEB, 80, "tcp") for a, b, c in ((14, 2, 9), (31, 7, 88), (96, 40, 3), (18, 224, 61)))
    infra = tuple((c, DC, p, pr) for c in CLIENTS for p, pr in ((53, "udp"), (389, "tcp"), (445, "tcp")))
    mail = tuple((c, MAIL, p, "tcp") for c in CLIENTS for p in (25, 143))
    ftp_internal = tuple((c, FTP, 21, "tcp") for c in CLIENTS)
    peer = tuple((a, b, 445, "tcp") for g in (CLIENTS[:3], CLIENTS[3:]) for a in g for b in g if a != b)
    return (
        _Profile(ClassLabel.BENIGN, 0.22, web_clients, 0),
        _Profile(ClassLabel.BENIGN, 0.05, internet, 1),
        _Profile(ClassLabel.BENIGN, 0.15, infra, 2),
        _Profile(ClassLabel.BENIGN, 0.08, mail, 3),
        _Profile(ClassLabel.BENIGN, 0.05, ftp_internal, 4),
        _Profile(ClassLabel.BENIGN, 0.08, peer, 2),
        _Profile(ClassLabel.BENIGN, 0.07, ((WEB, DB, 3306, "tcp"),), 5),
        # the attacker host also generates some ordinary traffic
        _Profile(ClassLabel.BENIGN, 0.02, ((ATTACKER, WEB, 80, "tcp"), (ATTACKER, FTP, 21, "tcp")), 1),
        # heavy-but-benign web sessions that resemble floods
        _Profile(ClassLabel.BENIGN, 0.03, web_clients, 6),
        _Profile(ClassLabel.DOS, 0.17, ((ATTACKER, WEB, 80, "tcp"),), 6),
        _Profile(ClassLabel.FTP_PATATOR, 0.08, ((ATTACKER, FTP, 21, "tcp"),), 4),
    )


def _centres(rng: np.random.Generator) -> np.ndarray:
    base = np.array(
        [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],  # web browsing
            [0.6, -0.3, 0.2, 0.0, 0.3, 0.0],  # internet web
            [-1.0, 0.8, -0.5, 0.4, 0.0, 0.2],  # infra / peer
            [0.3, 0.5, 0.9, -0.3, -0.2, 0.0],  # mail
            [-0.2, -0.6, 0.3, 0.9, 0.5, -0.3],  # ftp sessions (benign and brute force)
            [0.8, 0.2, -0.8, 0.3, -0.6, 0.4],  # database
            [1.1, -0.9, 0.4, -0.2, 0.9, 0.7],  # flood-like
        ]
    )
    return base + rng.normal(0.0, 0.05, base.shape)


def generate_flows(seed: int, n_flows: int = 20_000) -> Dataset:
    """Draw ``n_flows`` labeled flows.

    Attack profiles share their latent centre with a benign profile, and an
    extra class-specific shift separates them only partially.
    """
    rng = np.random.default_rng([seed, 2])
    profiles = _profiles()
    centres = _centres(rng)
    n_feat = len(FEATURE_NAMES)
    mixing = rng.normal(0.0, 1.0, (_N_LATENT, n_feat)) / np.sqrt(_N_LATENT)
    informative = np.zeros(n_feat, dtype=bool)
    informative[rng.choice(n_feat, 30, replace=False)] = True
    mixing[:, ~informative] *= 0.05
    shift = {
        ClassLabel.BENIGN: np.zeros(_N_LATENT),
        ClassLabel.DOS: rng.normal(0.0, 0.6, _N_LATENT),
        ClassLabel.FTP_PATATOR: rng.normal(0.0, 0.6, _N_LATENT),
    }
    zero_cols = np.array([name in _ZERO_COLUMNS for name in FEATURE_NAMES])
    scale = np.exp(rng.uniform(0.0, 8.0, n_feat))

    weights = np.array([p.weight for p in profiles])
    which = rng.choice(len(profiles), n_flows, p=weights / weights.sum())

    latent = np.empty((n_flows, _N_LATENT))
    labels = np.empty(n_flows, dtype=np.int64)
    src = np.empty(n_flows, dtype=object)
    dst = np.empty(n_flows, dtype=object)
    dport = np.empty(n_flows, dtype=np.int64)
    proto = np.empty(n_flows, dtype=object)
    for k, prof in enumerate(profiles):
        rows = np.flatnonzero(which == k)
        latent[rows] = centres[prof.center] + shift[prof.label] + rng.normal(0.0, 0.3, (len(rows), _N_LATENT))
        labels[rows] = int(prof.label)
        pick = rng.integers(0, len(prof.pairs), len(rows))
        for r, j in zip(rows, pick):
            s, d, port, pr = prof.pairs[j]
            src[r], dst[r], dport[r], proto[r] = s, d, port, Protocol.parse(pr).value

    raw = latent @ mixing + rng.normal(0.0, 0.3, (n_flows, n_feat))
    feats = np.round(np.exp(raw) * scale, 3)
    feats[:, zero_cols] = 0.0
    sport = rng.integers(32768, 61000, n_flows)
    flow_id = np.array(
        [f"{d}-{s}-{dp}-{sp}-{Protocol(p).number}" for s, d, dp, sp, p in zip(src, dst, dport, sport, proto)],
        dtype=object,
    )
    # CIC flow ids are not unique; suffix a sequence number so alerts stay traceable
    flow_id = np.array([f"{fid}#{i}" for i, fid in enumerate(flow_id)], dtype=object)
    return Dataset(feats, labels, FEATURE_NAMES, flow_id, src, dst, sport.astype(np.int64), dport, proto)


@dataclass(frozen=True)
class DeskCorpus:
    inventory: NetworkInventory
    rules: list[SignatureRule]
    flows: Dataset
    seed: int

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"flows": out / "flows.csv", "inventory": out / "inventory.json", "rules": out / "rules.json"}
        write_flows(self.flows, paths["flows"])
        save_inventory(self.inventory, paths["inventory"])
        save_rules(self.rules, paths["rules"])
        return paths


def desk_corpus(seed: int = 0, n_flows: int = 20_000) -> DeskCorpus:
    inv = build_inventory(seed)
    corpus = DeskCorpus(inv, build_rules(inv), generate_flows(seed, n_flows), seed)
    log.info("desk corpus seed=%d: %d flows, %d hosts, %d rules", seed, n_flows, len(inv.hosts), len(corpus.rules))
    return corpus
