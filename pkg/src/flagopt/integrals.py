"""Tabulated one- and two-electron integrals and the FCIDUMP text format.

Two-electron integrals use chemists' notation ``(pq|rs)`` and are held as a
dense, read-only 4-index array with all eight permutations filled in.
"""

import io
import os
import re
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import FCIDumpError, ShapeError

_HEADER_END = re.compile(r"(&END|\$END|/)\s*$", re.IGNORECASE)
_KEYVAL = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)(?=[A-Za-z_][A-Za-z0-9_]*\s*=|$)")


@dataclass(frozen=True, eq=False)
class IntegralSet:
    """Integrals in an orthonormal orbital basis (Hartree)."""

    n_orb: int
    e_core: float
    h: np.ndarray
    eri: np.ndarray
    n_elec: Optional[int] = None
    ms2: Optional[int] = None

    def __post_init__(self):
        n = int(self.n_orb)
        h = np.array(self.h, dtype=float)
        eri = np.array(self.eri, dtype=float)
        if h.shape != (n, n):
            raise ShapeError(f"h has shape {h.shape}, expected {(n, n)}")
        if eri.shape != (n,) * 4:
            raise ShapeError(f"eri has shape {eri.shape}, expected {(n,) * 4}")
        if np.linalg.norm(h - h.T) > 1e-12:
            raise ValueError("one-electron matrix is not symmetric")
        asym = max(
            np.abs(eri - eri.transpose(1, 0, 2, 3)).max(initial=0.0),
            np.abs(eri - eri.transpose(0, 1, 3, 2)).max(initial=0.0),
            np.abs(eri - eri.transpose(2, 3, 0, 1)).max(initial=0.0),
        )
        if asym > 1e-12:
            raise ValueError("two-electron tensor lacks 8-fold permutational symmetry")
        h.flags.writeable = False
        eri.flags.writeable = False
        object.__setattr__(self, "n_orb", n)
        object.__setattr__(self, "e_core", float(self.e_core))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "eri", eri)

    def eri_element(self, p, q, r, s):
        """``(pq|rs)`` with 0-based indices."""
        return float(self.eri[p, q, r, s])

    def rotated(self, U):
        """Integrals re-expressed in the orthonormal basis given by the columns of ``U``."""
        U = np.asarray(U, dtype=float)
        h = U.T @ self.h @ U
        eri = np.einsum("pqrs,pi,qj,rk,sl->ijkl", self.eri, U, U, U, U, optimize=True)
        return IntegralSet(self.n_orb, self.e_core, 0.5 * (h + h.T), symmetrize_eri(eri),
                           self.n_elec, self.ms2)


def symmetrize_eri(eri):
    """Average a 4-index tensor over the eight chemists'-notation permutations."""
    eri = np.asarray(eri, dtype=float)
    eri = 0.5 * (eri + eri.transpose(1, 0, 2, 3))
    eri = 0.5 * (eri + eri.transpose(0, 1, 3, 2))
    return 0.5 * (eri + eri.transpose(2, 3, 0, 1))


def coulomb(ints, P):
    """``J(P)_pq = sum_rs (pq|rs) P_rs``."""
    P = _check_density(ints, P)
    return np.einsum("pqrs,rs->pq", ints.eri, P, optimize=True)


def exchange(ints, P):
    """``K(P)_pq = sum_rs (pr|qs) P_rs``."""
    P = _check_density(ints, P)
    return np.einsum("prqs,rs->pq", ints.eri, P, optimize=True)


def _check_density(ints, P):
    P = np.asarray(P, dtype=float)
    if P.shape != (ints.n_orb, ints.n_orb):
        raise ShapeError(f"density has shape {P.shape}, expected {(ints.n_orb,) * 2}")
    return P


def random_integrals(n_orb, seed=None, n_aux=None, scale=0.3, e_core=0.0):
    """Synthetic integrals with a positive semidefinite ``(pq|rs)`` pair matrix.

    The two-electron tensor is built as a sum of products of symmetric
    factors, which gives the full 8-fold symmetry by construction.
    """
    rng = np.random.default_rng(seed)
    n_aux = n_aux or 2 * n_orb
    h = rng.standard_normal((n_orb, n_orb))
    h = 0.5 * (h + h.T) - 2.0 * np.diag(np.arange(n_orb, 0, -1, dtype=float))
    B = rng.standard_normal((n_aux, n_orb, n_orb)) * scale
    B = 0.5 * (B + B.transpose(0, 2, 1))
    eri = np.einsum("Lpq,Lrs->pqrs", B, B)
    return IntegralSet(n_orb, e_core, h, symmetrize_eri(eri))


def _parse_float(token, lineno):
    try:
        return float(token.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise FCIDumpError(f"non-numeric value {token!r}", lineno) from None


def _parse_header(text, lineno):
    text = text.strip()
    if not text.upper().startswith("&FCI"):
        raise FCIDumpError("header must start with &FCI", lineno)
    body = _HEADER_END.sub("", text[4:]).strip()
    fields = {}
    for key, value in _KEYVAL.findall(body):
        fields[key.upper()] = value.strip().rstrip(",")
    for key in ("NORB", "NELEC"):
        if key not in fields:
            raise FCIDumpError(f"header is missing {key}", lineno)
        try:
            fields[key] = int(fields[key])
        except ValueError:
            raise FCIDumpError(f"{key} must be an integer, got {fields[key]!r}", lineno) from None
    if "MS2" in fields:
        try:
            fields["MS2"] = int(fields["MS2"])
        except ValueError:
            raise FCIDumpError(f"MS2 must be an integer, got {fields['MS2']!r}", lineno) from None
    if fields["NORB"] < 1:
        raise FCIDumpError("NORB must be positive", lineno)
    return fields


def parse_fcidump(stream):
    """Read integrals from FCIDUMP text.

    Parameters
    ----------
    stream : file-like or str
        Open text stream, or the FCIDUMP contents as a string.

    Returns
    -------
    IntegralSet
        Integrals with ``n_elec``/``ms2`` taken from the header. ORBSYM and
        ISYM are read but ignored. Records of the form ``value i 0 0 0``
        (orbital energies written by some programs) are skipped.

    Raises
    ------
    FCIDumpError
        On a malformed header, a non-numeric field or an index outside
        ``[0, NORB]``; the message carries the line number.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    header_lines = []
    lineno = 0
    header_start = None
    for line in stream:
        lineno += 1
        if not line.strip() and not header_lines:
            continue
        if header_start is None:
            header_start = lineno
        header_lines.append(line.strip())
        if _HEADER_END.search(line.strip()):
            break
    else:
        raise FCIDumpError("unterminated header (no &END or /)", header_start or lineno)
    fields = _parse_header(" ".join(header_lines), header_start)
    n = fields["NORB"]

    h = np.zeros((n, n))
    eri = np.zeros((n, n, n, n))
    e_core = 0.0
    seen = set()
    for line in stream:
        lineno += 1
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 5:
            raise FCIDumpError(f"expected 'value i j k l', got {line.strip()!r}", lineno)
        value = _parse_float(tokens[0], lineno)
        try:
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise FCIDumpError(f"non-integer index in {line.strip()!r}", lineno) from None
        if any(x < 0 or x > n for x in (i, j, k, l)):
            raise FCIDumpError(f"index out of range [0, {n}] in {line.strip()!r}", lineno)

        if i and j and k and l:
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            pq, rs = (max(p, q), min(p, q)), (max(r, s), min(r, s))
            key = ("eri",) + max(pq, rs) + min(pq, rs)
            for a, b, c, d in ((p, q, r, s), (r, s, p, q)):
                eri[a, b, c, d] = eri[b, a, c, d] = eri[a, b, d, c] = eri[b, a, d, c] = value
        elif i and j and not k and not l:
            key = ("h", max(i, j), min(i, j))
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        elif not (i or j or k or l):
            key = ("core",)
            e_core = value
        elif i and not (j or k or l):
            continue
        else:
            raise FCIDumpError(f"unrecognised index pattern in {line.strip()!r}", lineno)
        if key in seen:
            warnings.warn(f"FCIDUMP line {lineno}: duplicate record {key} overwritten",
                          stacklevel=2)
        seen.add(key)

    return IntegralSet(n, e_core, h, eri, n_elec=fields["NELEC"], ms2=fields.get("MS2"))


def read_fcidump(path):
    with open(os.fspath(path)) as f:
        return parse_fcidump(f)


def write_fcidump(stream, ints, n_elec=None, ms2=None, tol=1e-15):
    """Write integrals in FCIDUMP format (8-fold unique ERIs, then h, then core)."""
    n = ints.n_orb
    n_elec = ints.n_elec if n_elec is None else n_elec
    ms2 = ints.ms2 if ms2 is None else ms2
    fmt = "{: .17e} {:4d} {:4d} {:4d} {:4d}\n"
    stream.write(f" &FCI NORB={n},NELEC={n_elec or 0},MS2={ms2 or 0},\n")
    stream.write("  ORBSYM=" + "1," * n + "\n  ISYM=1,\n &END\n")
    for i in range(n):
        for j in range(i + 1):
            for k in range(i + 1):
                for l in range(k + 1):
                    if (i, j) < (k, l):
                        continue
                    v = ints.eri[i, j, k, l]
                    if abs(v) > tol:
                        stream.write(fmt.format(v, i + 1, j + 1, k + 1, l + 1))
    for i in range(n):
        for j in range(i + 1):
            if abs(ints.h[i, j]) > tol:
                stream.write(fmt.format(ints.h[i, j], i + 1, j + 1, 0, 0))
    stream.write(fmt.format(ints.e_core, 0, 0, 0, 0))
