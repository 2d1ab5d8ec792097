"""Discrete Gaussian free fields on a triangulated square grid.

Vertex (i, j) sits at (x0 + i*spacing, y0 + j*spacing) and its value is
stored in ``values[j, i]``.  Each unit cell is split along the diagonal from
its lower-left to its upper-right corner and the field is linear on each of
the two triangles.

The field is normalized so that its Dirichlet energy density is
exp(-(1/4pi) sum over edges (h(x)-h(y))^2), i.e. the covariance is
G = 2*pi*L^{-1} with L the unit-weight five-point Laplacian.  This is the
projection of the continuum GFF (Dirichlet inner product (1/2pi) int grad f .
grad g) onto piecewise-linear functions, because the linear finite-element
stiffness matrix on this triangulation is exactly L.
"""

import json
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft
import scipy.sparse
import scipy.sparse.linalg

MAGIC = b"IMGEOGRD"
FORMAT_VERSION = 1


class GridError(ValueError):
    pass


class OutOfDomain(GridError):
    pass


class SpecError(GridError):
    pass


@dataclass(frozen=True)
class Singularity:
    center: complex
    alpha: float
    beta: float

    def term(self, z):
        """alpha*arg(z - center) + beta*log|z - center| with arg in (-pi, pi]."""
        w = np.asarray(z) - self.center
        ang = np.angle(w)
        # np.angle returns -pi on the negative real axis with a -0.0 imaginary part
        ang = np.where(ang <= -math.pi, math.pi, ang)
        return self.alpha * ang + self.beta * np.log(np.abs(w))


@dataclass(frozen=True)
class FieldGrid:
    n: int
    spacing: float
    values: np.ndarray
    origin: complex
    seed: int = 0
    singularity: Singularity = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != (self.n, self.n):
            raise GridError(f"values shape {v.shape} != ({self.n}, {self.n})")
        if not np.all(np.isfinite(v)):
            raise GridError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def side(self):
        return (self.n - 1) * self.spacing

    @property
    def window(self):
        x0, y0 = self.origin.real, self.origin.imag
        return (x0, y0, x0 + self.side, y0 + self.side)

    def vertex(self, i, j):
        return self.origin + complex(i * self.spacing, j * self.spacing)

    def vertices(self):
        """Complex coordinates of all vertices, shaped like ``values``."""
        k = np.arange(self.n) * self.spacing
        return self.origin + k[None, :] + 1j * k[:, None]

    def regular_values(self):
        """Vertex values with the singular term removed (smooth part)."""
        if self.singularity is None:
            return self.values
        return self.values + self.singularity.term(self.vertices())

    def with_values(self, values, **changes):
        return replace(self, values=values, **changes)

    def __add__(self, c):
        return self.with_values(self.values + float(c))

    def eval(self, p):
        return evaluate(self, p)


def centered_origin(n, spacing):
    half = 0.5 * (n - 1) * spacing
    return complex(-half, -half)


def _rng(seed):
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def laplacian_eigenvalues(m):
    """Eigenvalues of the five-point Dirichlet Laplacian on an m x m interior."""
    k = np.arange(1, m + 1)
    e = 2.0 - 2.0 * np.cos(np.pi * k / (m + 1))
    return e[:, None] + e[None, :]


def sample_zero_boundary(n, spacing=1.0, seed=0, origin=None):
    """Zero-boundary discrete GFF by synthesis over the sine eigenbasis.

    The orthonormal DST-I matrix S diagonalizes L (L = S diag(e) S), so
    h = S diag(sqrt(2 pi / e)) xi has covariance 2 pi L^{-1}.
    """
    if n < 3:
        raise GridError(f"n={n} must be at least 3")
    m = n - 2
    xi = _rng(seed).standard_normal((m, m))
    coef = xi * np.sqrt(2.0 * np.pi / laplacian_eigenvalues(m))
    values = np.zeros((n, n))
    values[1:-1, 1:-1] = scipy.fft.dstn(coef, type=1, norm="ortho")
    if origin is None:
        origin = centered_origin(n, spacing)
    return FieldGrid(n=n, spacing=float(spacing), values=values, origin=complex(origin), seed=int(seed))


def green_function(n):
    """Dense 2*pi*L^{-1} on the interior vertices, flattened row-major."""
    m = n - 2
    lap = interior_laplacian(m).toarray()
    return 2.0 * np.pi * np.linalg.inv(lap)


def interior_laplacian(m):
    one = np.ones(m)
    t = scipy.sparse.diags([-one[:-1], 2 * one, -one[:-1]], [-1, 0, 1])
    eye = scipy.sparse.identity(m)
    return (scipy.sparse.kron(eye, t) + scipy.sparse.kron(t, eye)).tocsc()


# --- boundary data -------------------------------------------------------

@dataclass(frozen=True)
class BoundarySpec:
    """Piecewise-constant boundary data.

    Each piece is (s0, s1, value) on the boundary parameter s in [0, 4),
    which runs counterclockwise from the lower-left corner: [0,1) bottom,
    [1,2) right, [2,3) top, [3,4) left.  A piece covers s0 <= s < s1 and may
    wrap past 4.
    """
    pieces: tuple

    @classmethod
    def constant(cls, c):
        return cls(((0.0, 4.0, float(c)),))

    def value_at(self, s):
        s = np.asarray(s, dtype=float) % 4.0
        out = np.full(s.shape, np.nan)
        for s0, s1, v in self.pieces:
            a = s0 % 4.0
            b = a + (s1 - s0)
            hit = ((s >= a) & (s < b)) | ((s + 4.0 >= a) & (s + 4.0 < b))
            out = np.where(hit & np.isnan(out), v, out)
        return out


def boundary_parameter(n):
    """Boundary parameter of each boundary vertex as a dict (j, i) -> s."""
    s = {}
    last = n - 1
    for i in range(n):
        s[(0, i)] = i / last
    for j in range(1, n):
        s[(j, last)] = 1.0 + j / last
    for i in range(last - 1, -1, -1):
        s[(last, i)] = 2.0 + (last - i) / last
    for j in range(last - 1, 0, -1):
        s[(j, 0)] = 3.0 + (last - j) / last
    return s


def boundary_values(n, spec):
    par = boundary_parameter(n)
    keys = list(par)
    vals = spec.value_at(np.array([par[k] for k in keys]))
    if np.any(np.isnan(vals)):
        bad = [keys[i] for i in np.flatnonzero(np.isnan(vals))[:3]]
        raise SpecError(f"boundary spec leaves vertices uncovered, e.g. {bad}")
    out = np.zeros((n, n))
    for k, v in zip(keys, vals):
        out[k] = v
    return out


def harmonic_extension(bvals):
    """Discrete-harmonic function with the boundary values of ``bvals``."""
    n = bvals.shape[0]
    m = n - 2
    rhs = np.zeros((m, m))
    rhs[0, :] += bvals[0, 1:-1]
    rhs[-1, :] += bvals[-1, 1:-1]
    rhs[:, 0] += bvals[1:-1, 0]
    rhs[:, -1] += bvals[1:-1, -1]
    out = bvals.copy()
    if m > 0:
        sol = scipy.sparse.linalg.spsolve(interior_laplacian(m), rhs.ravel())
        out[1:-1, 1:-1] = sol.reshape(m, m)
    return out


def add_harmonic_boundary(grid, spec):
    bvals = boundary_values(grid.n, spec)
    edge = bvals[0, :].tolist() + bvals[-1, :].tolist() + bvals[:, 0].tolist() + bvals[:, -1].tolist()
    if len(set(edge)) == 1:
        # constants are harmonic; skip the solve so the shift is exact
        ext = np.full_like(bvals, edge[0])
    else:
        ext = harmonic_extension(bvals)
    return grid.with_values(grid.values + ext)


def add_singularity(grid, z0, alpha, beta):
    z0 = complex(z0)
    x0, y0, x1, y1 = grid.window
    if not (x0 < z0.real < x1 and y0 < z0.imag < y1):
        raise OutOfDomain(f"singularity {z0} is not strictly inside the window")
    verts = grid.vertices()
    if np.min(np.abs(verts - z0)) < 1e-9 * grid.spacing:
        raise GridError(f"singularity {z0} sits on a vertex")
    if grid.singularity is not None:
        raise GridError("grid already carries a singularity")
    sing = Singularity(z0, float(alpha), float(beta))
    return grid.with_values(grid.values - sing.term(verts), singularity=sing)


def whole_plane_approx(n, margin=4, seed=0, spacing=1.0):
    """Central n x n window of a zero-boundary field on an (n*margin)-sided box."""
    if margin < 2 or int(margin) != margin:
        raise GridError(f"margin={margin} must be an integer >= 2")
    big_n = n * int(margin)
    big = sample_zero_boundary(big_n, spacing, seed, origin=0j)
    lo = (big_n - n) // 2
    values = big.values[lo:lo + n, lo:lo + n]
    return FieldGrid(n=n, spacing=float(spacing), values=values,
                     origin=centered_origin(n, spacing), seed=int(seed),
                     meta={"margin": int(margin)})


# --- evaluation ----------------------------------------------------------

def _locate(grid, p):
    p = np.asarray(p, dtype=complex)
    u = (p.real - grid.origin.real) / grid.spacing
    v = (p.imag - grid.origin.imag) / grid.spacing
    eps = 1e-9
    if np.any((u < -eps) | (u > grid.n - 1 + eps) | (v < -eps) | (v > grid.n - 1 + eps)):
        raise OutOfDomain("evaluation point outside the window")
    u = np.clip(u, 0.0, grid.n - 1)
    v = np.clip(v, 0.0, grid.n - 1)
    i = np.minimum(np.floor(u).astype(int), grid.n - 2)
    j = np.minimum(np.floor(v).astype(int), grid.n - 2)
    return i, j, u - i, v - j


def interpolate(values, grid, p):
    i, j, fu, fv = _locate(grid, p)
    f00 = values[j, i]
    f10 = values[j, i + 1]
    f01 = values[j + 1, i]
    f11 = values[j + 1, i + 1]
    lower = fv <= fu
    return np.where(lower,
                    f00 + fu * (f10 - f00) + fv * (f11 - f10),
                    f00 + fv * (f01 - f00) + fu * (f11 - f01))


def evaluate(grid, p):
    """Piecewise-linear field value at p (scalar or array of complex points).

    With a singularity the smooth part is interpolated and the singular term
    is added exactly, so values at vertices are reproduced exactly.
    """
    if grid.singularity is None:
        out = interpolate(grid.values, grid, p)
    else:
        out = interpolate(grid.regular_values(), grid, p) - grid.singularity.term(p)
    return out[()] if np.ndim(out) == 0 else out


# --- serialization -------------------------------------------------------

_HEADER = struct.Struct("<8sIIdqdddd")


def header_dict(grid):
    s = grid.singularity
    return {
        "magic": MAGIC.decode(),
        "version": FORMAT_VERSION,
        "n": grid.n,
        "spacing": grid.spacing,
        "origin": [grid.origin.real, grid.origin.imag],
        "seed": grid.seed,
        "singularity": None if s is None else [s.center.real, s.center.imag, s.alpha, s.beta],
    }


def save_grid(grid, path):
    """Write ``path`` (binary) and ``path + '.json'`` (sidecar); return both paths."""
    s = grid.singularity
    sing = (np.nan,) * 4 if s is None else (s.center.real, s.center.imag, s.alpha, s.beta)
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, grid.n, grid.spacing, grid.seed, *sing)
    origin = struct.pack("<dd", grid.origin.real, grid.origin.imag)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(origin)
        fh.write(grid.values.astype("<f8").tobytes(order="C"))
    side = str(path) + ".json"
    with open(side, "w") as fh:
        json.dump(header_dict(grid), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path), side


def load_grid(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n, spacing, seed, cx, cy, a, b = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise GridError(f"{path}: not a version-{FORMAT_VERSION} grid file")
    off = _HEADER.size
    ox, oy = struct.unpack_from("<dd", raw, off)
    off += 16
    values = np.frombuffer(raw, dtype="<f8", count=n * n, offset=off).reshape(n, n)
    sing = None if np.isnan(cx) else Singularity(complex(cx, cy), a, b)
    return FieldGrid(n=n, spacing=spacing, values=values.astype(np.float64),
                     origin=complex(ox, oy), seed=seed, singularity=sing)
