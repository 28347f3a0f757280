"""Field serialization: the HMHD1 binary container and a lossy CSV dump.

Binary layout (all little-endian)::

    offset  size  content
    0       5     magic b"HMHD1"
    5       1     bytes per complex value: 8 (complex64) or 16 (complex128)
    6       4     N (uint32)
    10      8     L (float64)
    18      1     reality flag (0 or 1)
    19      1     component count c (1 scalar, 3 vector, 9 tensor)
    20      1     dealias rule (0 two_thirds, 1 zero_pad_3halves)
    21      3     reserved, zero
    24      ...   c * N**3 complex values, row-major over (component, i1, i2, i3)

Index ``i`` on an axis is the FFT-order position: wavenumber ``k = i`` for
``i < N/2`` and ``k = i - N`` otherwise; the frequency is ``k / L``.
"""
import csv
import struct

import numpy as np

from .errors import ConfigurationError
from .fields import SpectralField, SpectralTensorField, SpectralVectorField
from .grid import DEALIAS_RULES, Grid

MAGIC = b"HMHD1"
_HEADER = struct.Struct("<5sBIdBBB3x")
_BY_COUNT = {1: SpectralField, 3: SpectralVectorField, 9: SpectralTensorField}
_DTYPES = {8: np.dtype("<c8"), 16: np.dtype("<c16")}


def write_field(path, field, precision="complex128"):
    """Write a field in the HMHD1 container; returns the byte count."""
    width = {"complex64": 8, "complex128": 16}.get(precision)
    if width is None:
        raise ConfigurationError(f"precision must be complex64 or complex128, got {precision!r}")
    g = field.grid
    ncomp = 3 ** field.rank
    header = _HEADER.pack(MAGIC, width, g.N, g.L, int(field.real), ncomp,
                          DEALIAS_RULES.index(g.dealias))
    data = np.ascontiguousarray(field.coeffs, dtype=_DTYPES[width])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))
    return _HEADER.size + data.nbytes


def read_field(path):
    """Read an HMHD1 file back into the matching field type."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ConfigurationError(f"{path}: truncated header")
        magic, width, N, L, real, ncomp, rule = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ConfigurationError(f"{path}: bad magic {magic!r}")
        if width not in _DTYPES or ncomp not in _BY_COUNT or rule >= len(DEALIAS_RULES):
            raise ConfigurationError(f"{path}: corrupt header")
        grid = Grid(int(N), float(L), DEALIAS_RULES[rule])
        count = ncomp * N ** 3
        data = np.frombuffer(fh.read(count * width), dtype=_DTYPES[width])
    if data.size != count:
        raise ConfigurationError(f"{path}: expected {count} values, found {data.size}")
    cls = _BY_COUNT[ncomp]
    shape = (3,) * cls.rank + grid.shape
    coeffs = data.astype(np.complex128).reshape(shape)
    return cls(grid, coeffs, real=bool(real), keep_mean=True)


def write_csv(path, field, threshold=0.0):
    """Dump ``component, k1, k2, k3, xi1, xi2, xi3, re, im`` for |c| > threshold."""
    g = field.grid
    c = field.coeffs.reshape((-1,) + g.shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "k1", "k2", "k3", "xi1", "xi2", "xi3", "re", "im"])
        for comp in range(c.shape[0]):
            idx = np.argwhere(np.abs(c[comp]) > threshold)
            for i1, i2, i3 in idx:
                k = g.k1d[[i1, i2, i3]].astype(int)
                v = c[comp, i1, i2, i3]
                w.writerow([comp, *k.tolist(), *(k / g.L).tolist(),
                            repr(float(v.real)), repr(float(v.imag))])
