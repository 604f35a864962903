"""Text formats: mesh functions, hull dumps."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .envelope import LowerHull
from .errors import ConfigError
from .lattice import LatticeDomain, build_domain, parse_domain
from .meshfn import MeshFunction

_HEADER = re.compile(r"^mafn\s+v1\s+(?P<rest>.*)$")


def stencil_radius(dom: LatticeDomain) -> int:
    return int(dom.V.radius)


def format_mafn(u: MeshFunction) -> str:
    """Header ``mafn v1 d= h= domain= stencil=`` then ``id x [y] value`` per node."""
    dom = u.dom
    head = f"mafn v1 d={dom.dim} h={dom.h!r} domain={dom.spec.to_text()} stencil={stencil_radius(dom)}"
    lines = [head]
    for i, (p, v) in enumerate(zip(dom.nodes, u.values)):
        lines.append(f"{i} " + " ".join(f"{c:.17g}" for c in p) + f" {v:.17g}")
    return "\n".join(lines) + "\n"


def write_mafn(u: MeshFunction, path) -> None:
    Path(path).write_text(format_mafn(u))


def parse_mafn(text: str) -> MeshFunction:
    """Rebuild the domain from the header and check node coordinates line by line."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigError("empty mesh-function file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise ConfigError("missing 'mafn v1' header")
    tokens = dict(t.split("=", 1) for t in m.group("rest").split() if "=" in t)
    for key in ("d", "h", "domain"):
        if key not in tokens:
            raise ConfigError(f"header lacks '{key}='")
    d = int(tokens["d"])
    spec = parse_domain(tokens["domain"])
    if spec.dim != d:
        raise ConfigError("header dimension disagrees with the domain")
    dom = build_domain(spec, float(tokens["h"]), int(tokens.get("stencil", 1)))
    body = lines[1:]
    if len(body) != dom.n_nodes:
        raise ConfigError(f"expected {dom.n_nodes} node lines, found {len(body)}")
    vals = np.empty(dom.n_nodes)
    for ln in body:
        parts = ln.split()
        if len(parts) != d + 2:
            raise ConfigError(f"bad node line: {ln!r}")
        i = int(parts[0])
        if not 0 <= i < dom.n_nodes:
            raise ConfigError(f"node id {i} out of range")
        x = np.array([float(t) for t in parts[1 : 1 + d]])
        if np.max(np.abs(x - dom.nodes[i])) > 1e-9 * dom.h:
            raise ConfigError(f"node {i} at {x.tolist()} does not match the lattice")
        vals[i] = float(parts[-1])
    return MeshFunction(dom, vals)


def read_mafn(path) -> MeshFunction:
    return parse_mafn(Path(path).read_text())


def parse_hull(text: str) -> LowerHull:
    """Inverse of :meth:`LowerHull.dump`; vertex ids are compacted, merged-face labels dropped."""
    verts, faces = {}, []
    for ln in text.splitlines():
        parts = ln.split()
        if not parts:
            continue
        if parts[0] == "V":
            verts[int(parts[1])] = [float(t) for t in parts[2:]]
        elif parts[0] == "F":
            faces.append(parts[1:])
        else:
            raise ConfigError(f"bad hull line: {ln!r}")
    if not verts or not faces:
        raise ConfigError("hull dump needs V and F lines")
    ids = sorted(verts)
    d = len(verts[ids[0]]) - 1
    remap = {v: k for k, v in enumerate(ids)}
    P = np.array([verts[v][:d] for v in ids])
    U = np.array([verts[v][d] for v in ids])
    slopes, offsets, simplices = [], [], []
    for f in faces:
        if len(f) != 2 * d + 2:
            raise ConfigError(f"bad face line: F {' '.join(f)}")
        slopes.append([float(t) for t in f[:d]])
        offsets.append(float(f[d]))
        simplices.append([remap[int(t)] for t in f[d + 1 :]])
    m = len(faces)
    return LowerHull(P, U, np.array(slopes), np.array(offsets), np.array(simplices, dtype=np.int64), np.arange(m))


def read_hull(path) -> LowerHull:
    return parse_hull(Path(path).read_text())
