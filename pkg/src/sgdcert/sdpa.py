"""Sparse SDPA (".dat-s") export and import for BlockSdp programs.

The file encodes the pair

    (P)  min  sum_i c_i y_i   s.t.  Y = sum_i y_i F_i - F_0,  Y >= 0
    (D)  max  <F_0, Z>        s.t.  <F_i, Z> = c_i,           Z >= 0

Our standard form (min <C, Z> s.t. <A_i, Z> = b_i, Z in K) is exactly (D)
with F_i = A_i, c_i = b_i and F_0 = -C, so the written file's (P)-optimum is
the negative of our optimum.  Re-importing inverts the mapping exactly, which
is what the round-trip guarantee tests.

Grammar written: optional comment lines ('"' or '*'), mDIM, nBLOCK, block
sizes (negative size = diagonal block), the objective row, then one
"matno blkno i j value" entry per nonzero with 1-based upper-triangular
indices.
"""

from __future__ import annotations

import numpy as np

from .sdp import BlockSdp, Cone, svec_dim

_ENTRY_EPS = 0.0  # write exact zeros out; only structural zeros are skipped


def _blocks_of(cone: Cone) -> list[int]:
    """SDPA block structure: diagonal block for scalars, then PSD blocks."""
    sizes = []
    if cone.n_lin:
        sizes.append(-cone.n_lin)
    sizes.extend(int(n) for n in cone.psd_dims)
    return sizes


def _iter_entries(vec: np.ndarray, cone: Cone):
    """Yield (blkno, i, j, value) for the symmetric matrix packed in vec."""
    blk = 1
    pos = 0
    if cone.n_lin:
        for i in range(cone.n_lin):
            v = vec[pos + i]
            if v != 0.0:
                yield blk, i + 1, i + 1, float(v)
        pos += cone.n_lin
        blk += 1
    from .sdp import smat
    for n in cone.psd_dims:
        M = smat(vec[pos:pos + svec_dim(n)], n)
        for j in range(n):
            for i in range(j + 1):
                if M[i, j] != 0.0:
                    yield blk, i + 1, j + 1, float(M[i, j])
        pos += svec_dim(n)
        blk += 1


def write_sdpa(sdp: BlockSdp, path: str, comment: str = "") -> None:
    """Write the program in sparse SDPA format (always a minimization file)."""
    A, b, c, cone, _sign = sdp.assemble()
    m = A.shape[0]
    lines = []
    if comment:
        for ln in comment.splitlines():
            lines.append(f'"{ln}')
    lines.append(f"{m} =mDIM")
    sizes = _blocks_of(cone)
    lines.append(f"{len(sizes)} =nBLOCK")
    lines.append(" ".join(str(s) for s in sizes) + " =bLOCKsTRUCT")
    lines.append(" ".join(repr(float(v)) for v in b))
    # F_0 = -C
    for blk, i, j, v in _iter_entries(-c, cone):
        lines.append(f"0 {blk} {i} {j} {v!r}")
    for k in range(m):
        for blk, i, j, v in _iter_entries(A[k], cone):
            lines.append(f"{k + 1} {blk} {i} {j} {v!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sdpa(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, Cone]:
    """Parse a sparse SDPA file back into standard-form (A, b, c, cone) data.

    The returned program is min <C,Z> s.t. <A_i,Z> = b_i, Z in K, i.e. the
    (D) side of the file; C = -F_0.
    """
    tokens = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith('"') or line.startswith("*"):
                continue
            line = line.replace(",", " ").replace("(", " ").replace(")", " ")
            line = line.replace("{", " ").replace("}", " ")
            for part in line.split():
                if part.startswith("="):
                    break
                tokens.append(part)
    it = iter(tokens)
    m = int(float(next(it)))
    nblock = int(float(next(it)))
    sizes = [int(float(next(it))) for _ in range(nblock)]
    b = np.array([float(next(it)) for _ in range(m)])
    n_lin = sum(-s for s in sizes if s < 0)
    psd_dims = tuple(s for s in sizes if s > 0)
    cone = Cone(n_lin=n_lin, psd_dims=psd_dims)

    # per-block offsets into the packed standard-form vector
    lin_offsets = {}
    psd_offsets = {}
    lin_seen = 0
    pos_psd = n_lin
    for blkno, s in enumerate(sizes, start=1):
        if s < 0:
            lin_offsets[blkno] = lin_seen
            lin_seen += -s
        else:
            psd_offsets[blkno] = pos_psd
            pos_psd += svec_dim(s)
    size_by_blk = {blkno: s for blkno, s in enumerate(sizes, start=1)}

    mats = [np.zeros(cone.vec_dim) for _ in range(m + 1)]
    from .sdp import SQRT2
    rest = list(it)
    if len(rest) % 5 != 0:
        raise ValueError("malformed SDPA entry section")
    for k in range(0, len(rest), 5):
        matno = int(float(rest[k]))
        blkno = int(float(rest[k + 1]))
        i = int(float(rest[k + 2]))
        j = int(float(rest[k + 3]))
        v = float(rest[k + 4])
        s = size_by_blk[blkno]
        if s < 0:
            if i != j:
                raise ValueError("off-diagonal entry in a diagonal block")
            mats[matno][lin_offsets[blkno] + i - 1] += v
        else:
            lo = psd_offsets[blkno]
            ii, jj = min(i, j) - 1, max(i, j) - 1
            idx = lo + jj * (jj + 1) // 2 + ii
            mats[matno][idx] += v if ii == jj else SQRT2 * v
    c = -mats[0]
    A = np.vstack(mats[1:]) if m else np.zeros((0, cone.vec_dim))
    return A, b, c, cone
