"""Flow lines of exp(i(h/chi + theta)) traced on a piecewise-linear field.

Tracing, merge detection and crossing counts run in numba kernels; the
Python layer keeps the bookkeeping (turning angles, forests, statuses).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

RUNNING, MERGED, EXITED, MAX_STEPS = 0, 1, 2, 3
STATUS_NAMES = {RUNNING: "running", MERGED: "merged", EXITED: "exited_window", MAX_STEPS: "max_steps"}


class FlowError(ValueError):
    pass


class InvalidHit(FlowError):
    pass


@dataclass
class FlowOptions:
    step: float = 0.01
    max_steps: int = 20000
    tol: float = None
    box: tuple = None  # exit box (x0, y0, x1, y1); defaults to the grid window
    merge: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise FlowError(f"step={self.step} must be positive")
        if self.tol is None:
            self.tol = 1.5 * self.step
        if self.tol < self.step:
            raise FlowError("merge tolerance must be at least the step")


@dataclass
class FlowLine:
    id: int
    start: complex
    theta: float
    points: np.ndarray
    turning: np.ndarray
    status: str
    step: float
    target: tuple = None  # (target id, index into target points) when merged
    n_own: int = 0  # number of points traced by this line itself
    heading: np.ndarray = None  # lifted field heading h/chi + theta at own points

    @property
    def merged(self):
        return self.status == "merged"


@dataclass
class Forest:
    lines: list
    merge_edges: list = field(default_factory=list)  # (child, parent, merge point)
    parent: dict = field(default_factory=dict)

    def find(self, i):
        while self.parent.get(i, i) != i:
            i = self.parent[i]
        return i

    def components(self):
        comp = {}
        for ln in self.lines:
            comp.setdefault(self.find(ln.id), []).append(ln.id)
        return list(comp.values())


@dataclass(frozen=True)
class HeightDifference:
    value: float
    winding_count: int
    side: str


# --- numba kernels -------------------------------------------------------

@njit(cache=True)
def _pl(values, x0, y0, s, px, py):
    n = values.shape[0]
    u = (px - x0) / s
    v = (py - y0) / s
    if u < 0.0:
        u = 0.0
    if v < 0.0:
        v = 0.0
    if u > n - 1:
        u = n - 1.0
    if v > n - 1:
        v = n - 1.0
    i = int(u)
    j = int(v)
    if i > n - 2:
        i = n - 2
    if j > n - 2:
        j = n - 2
    fu = u - i
    fv = v - j
    f00 = values[j, i]
    if fv <= fu:
        return f00 + fu * (values[j, i + 1] - f00) + fv * (values[j + 1, i + 1] - values[j, i + 1])
    return f00 + fv * (values[j + 1, i] - f00) + fu * (values[j + 1, i + 1] - values[j + 1, i])


@njit(cache=True)
def _wrap(a):
    return a - TWO_PI * math.floor((a + math.pi) / TWO_PI)


@njit(cache=True)
def _heading(values, x0, y0, s, chi, theta, px, py, sing, argref):
    """Lifted heading at (px, py) and the lifted arg about the singularity."""
    h = _pl(values, x0, y0, s, px, py)
    arg = 0.0
    if sing[4] != 0.0:
        dx = px - sing[0]
        dy = py - sing[1]
        arg = argref + _wrap(math.atan2(dy, dx) - argref)
        h -= sing[2] * arg + sing[3] * 0.5 * math.log(dx * dx + dy * dy)
    return h / chi + theta, arg


@njit(cache=True)
def _query(px, py, tip_heading, tol, head, nxt, hx, hy, hpsi, hline, hidx,
           bx0, by0, cell, nbx, nby):
    best = -1
    bestd = tol * tol
    cx = int((px - bx0) / cell)
    cy = int((py - by0) / cell)
    for gy in range(cy - 1, cy + 2):
        if gy < 0 or gy >= nby:
            continue
        for gx in range(cx - 1, cx + 2):
            if gx < 0 or gx >= nbx:
                continue
            k = head[gy * nbx + gx]
            while k >= 0:
                dx = hx[k] - px
                dy = hy[k] - py
                d = dx * dx + dy * dy
                if d <= bestd and abs(_wrap(tip_heading - hpsi[k])) < 0.25 * math.pi:
                    bestd = d
                    best = k
                k = nxt[k]
    return best


@njit(cache=True)
def _trace(values, x0, y0, s, chi, theta, zx, zy, step, max_steps, box, sing,
           tol, merge, head, nxt, hx, hy, hpsi, hline, hidx, bx0, by0, cell, nbx, nby):
    xs = np.empty(max_steps + 1)
    ys = np.empty(max_steps + 1)
    psis = np.empty(max_steps + 1)
    px = zx
    py = zy
    argref = 0.0
    if sing[4] != 0.0:
        argref = math.atan2(py - sing[1], px - sing[0])
    psi, argref = _heading(values, x0, y0, s, chi, theta, px, py, sing, argref)
    xs[0] = px
    ys[0] = py
    psis[0] = psi
    status = RUNNING
    hit = -1
    count = 1
    if merge:
        hit = _query(px, py, psi, tol, head, nxt, hx, hy, hpsi, hline, hidx, bx0, by0, cell, nbx, nby)
        if hit >= 0:
            return xs, ys, psis, count, MERGED, hit
    for _ in range(max_steps):
        a1, _r = _heading(values, x0, y0, s, chi, theta, px, py, sing, argref)
        k1x = math.cos(a1)
        k1y = math.sin(a1)
        a2, _r = _heading(values, x0, y0, s, chi, theta, px + 0.5 * step * k1x, py + 0.5 * step * k1y, sing, argref)
        k2x = math.cos(a2)
        k2y = math.sin(a2)
        a3, _r = _heading(values, x0, y0, s, chi, theta, px + 0.5 * step * k2x, py + 0.5 * step * k2y, sing, argref)
        k3x = math.cos(a3)
        k3y = math.sin(a3)
        a4, _r = _heading(values, x0, y0, s, chi, theta, px + step * k3x, py + step * k3y, sing, argref)
        dx = k1x + 2.0 * k2x + 2.0 * k3x + math.cos(a4)
        dy = k1y + 2.0 * k2y + 2.0 * k3y + math.sin(a4)
        norm = math.sqrt(dx * dx + dy * dy)
        px += step * dx / norm
        py += step * dy / norm
        psi, argref = _heading(values, x0, y0, s, chi, theta, px, py, sing, argref)
        xs[count] = px
        ys[count] = py
        psis[count] = psi
        count += 1
        if px < box[0] or px > box[2] or py < box[1] or py > box[3]:
            status = EXITED
            break
        if merge:
            hit = _query(px, py, psi, tol, head, nxt, hx, hy, hpsi, hline, hidx, bx0, by0, cell, nbx, nby)
            if hit >= 0:
                status = MERGED
                break
    else:
        status = MAX_STEPS
    return xs, ys, psis, count, status, hit


@njit(cache=True)
def _insert(xs, ys, psis, count, line_id, head, nxt, hx, hy, hpsi, hline, hidx, used,
            bx0, by0, cell, nbx, nby):
    for k in range(count):
        cx = int((xs[k] - bx0) / cell)
        cy = int((ys[k] - by0) / cell)
        if cx < 0 or cy < 0 or cx >= nbx or cy >= nby:
            continue
        b = cy * nbx + cx
        hx[used] = xs[k]
        hy[used] = ys[k]
        hpsi[used] = psis[k]
        hline[used] = line_id
        hidx[used] = k
        nxt[used] = head[b]
        head[b] = used
        used += 1
    return used


class SpatialHash:
    """Bucketed point store used for merge detection among same-angle lines."""

    def __init__(self, box, cell, capacity=1 << 16):
        x0, y0, x1, y1 = box
        pad = 2 * cell
        self.bx0, self.by0 = x0 - pad, y0 - pad
        self.cell = cell
        self.nbx = int((x1 - x0 + 2 * pad) / cell) + 2
        self.nby = int((y1 - y0 + 2 * pad) / cell) + 2
        self.head = np.full(self.nbx * self.nby, -1, np.int64)
        self.used = 0
        self._alloc(capacity)

    def _alloc(self, cap):
        old = getattr(self, "hx", None)
        arrays = {
            "nxt": np.full(cap, -1, np.int64), "hx": np.zeros(cap), "hy": np.zeros(cap),
            "hpsi": np.zeros(cap), "hline": np.zeros(cap, np.int64), "hidx": np.zeros(cap, np.int64),
        }
        if old is not None:
            for k, arr in arrays.items():
                arr[:self.used] = getattr(self, k)[:self.used]
        for k, arr in arrays.items():
            setattr(self, k, arr)

    def arrays(self):
        return (self.head, self.nxt, self.hx, self.hy, self.hpsi, self.hline, self.hidx,
                self.bx0, self.by0, self.cell, self.nbx, self.nby)

    def insert(self, xs, ys, psis, count, line_id):
        if self.used + count > len(self.hx):
            self._alloc(max(2 * len(self.hx), self.used + count))
        self.used = _insert(xs, ys, psis, count, line_id, self.head, self.nxt, self.hx, self.hy,
                            self.hpsi, self.hline, self.hidx, self.used,
                            self.bx0, self.by0, self.cell, self.nbx, self.nby)


_EMPTY_HASH = None


def _empty_hash():
    global _EMPTY_HASH
    if _EMPTY_HASH is None:
        _EMPTY_HASH = SpatialHash((0.0, 0.0, 1.0, 1.0), 1.0, capacity=1)
    return _EMPTY_HASH


# --- tracing -------------------------------------------------------------

def _sing_array(grid):
    sg = grid.singularity
    if sg is None:
        return np.zeros(5)
    return np.array([sg.center.real, sg.center.imag, sg.alpha, sg.beta, 1.0])


def turning_from_points(points, heading0):
    """Cumulative signed heading change; turning[0] = 0."""
    turning = np.zeros(len(points))
    if len(points) > 1:
        seg = np.angle(np.diff(points))
        prev = np.concatenate([[heading0], seg[:-1]])
        turning[1:] = np.cumsum(np.angle(np.exp(1j * (seg - prev))))
    return turning


def _run_trace(grid, c, z0, theta, opts, store, line_id):
    z0 = complex(z0)
    x0, y0, x1, y1 = grid.window
    if not (x0 <= z0.real <= x1 and y0 <= z0.imag <= y1):
        raise FlowError(f"start point {z0} lies outside the window")
    if grid.singularity is not None and abs(z0 - grid.singularity.center) < 1e-12:
        raise FlowError("a trace cannot start at the singularity center; use an offset start")
    box = np.array(opts.box if opts.box is not None else grid.window, dtype=float)
    h = store if (store is not None and opts.merge) else _empty_hash()
    xs, ys, psis, count, status, hit = _trace(
        grid.regular_values(), grid.origin.real, grid.origin.imag, grid.spacing, c.chi,
        float(theta), z0.real, z0.imag, float(opts.step), int(opts.max_steps), box,
        _sing_array(grid), float(opts.tol), bool(store is not None and opts.merge), *h.arrays())
    pts = xs[:count] + 1j * ys[:count]
    return pts, psis[:count].copy(), int(status), int(hit), h


def trace_flow_line(grid, c, z0, theta, opts=None, line_id=0):
    """Trace a single flow line with no merging."""
    opts = opts or FlowOptions()
    pts, psis, status, _, _ = _run_trace(grid, c, z0, theta, opts, None, line_id)
    return FlowLine(id=line_id, start=complex(z0), theta=float(theta), points=pts,
                    turning=turning_from_points(pts, psis[0]), status=STATUS_NAMES[status],
                    step=opts.step, n_own=len(pts), heading=psis)


def trace_from_singularity(grid, c, theta, opts=None, offset=None, line_id=0):
    """Approximate flow line from the singular point, started at a small offset.

    The offset defaults to two steps along the requested direction; the
    heading at the offset point then matches the direction of departure only
    approximately, so callers should check insensitivity to the offset.
    """
    opts = opts or FlowOptions()
    if grid.singularity is None:
        raise FlowError("grid has no singularity")
    r = 2.0 * opts.step if offset is None else offset
    z0 = grid.singularity.center + r * np.exp(1j * theta)
    return trace_flow_line(grid, c, z0, theta, opts, line_id)


def build_forest(grid, c, starts, theta, opts=None):
    """Trace same-angle lines in id order, merging each into earlier lines.

    Merge events are applied serially in id order, so line i can only merge
    into a line with a smaller id; the merge edges therefore form a forest.
    """
    opts = opts or FlowOptions()
    starts = [complex(z) for z in starts]
    if len(set(starts)) != len(starts):
        raise FlowError("duplicate start points")
    box = opts.box if opts.box is not None else grid.window
    store = SpatialHash(box, opts.tol)
    forest = Forest(lines=[])
    for i, z in enumerate(starts):
        pts, psis, status, hit, _ = _run_trace(grid, c, z, theta, opts, store, i)
        line = FlowLine(id=i, start=z, theta=float(theta), points=pts, turning=None,
                        status=STATUS_NAMES[status], step=opts.step, heading=psis)
        if status == MERGED:
            tid = int(store.hline[hit])
            tidx = int(store.hidx[hit])
            target = forest.lines[tid]
            own = pts[:-1]
            line.n_own = len(own)
            line.heading = psis[:-1]
            line.target = (tid, tidx)
            line.points = np.concatenate([own, target.points[tidx:]])
            h0 = psis[0] if len(own) else target.heading[min(tidx, len(target.heading) - 1)]
            line.turning = turning_from_points(line.points, h0)
            forest.merge_edges.append((i, tid, target.points[tidx]))
            forest.parent[i] = tid
            if forest.find(tid) == i:
                raise FlowError("merge created a cycle")
        else:
            line.n_own = len(pts)
            line.turning = turning_from_points(pts, psis[0])
        store.insert(pts.real.copy(), pts.imag.copy(), psis, line.n_own, i)
        forest.lines.append(line)
    return forest


# --- height differences -------------------------------------------------

def height_difference(theta_a, theta_b, k, c):
    return (TWO_PI * k + theta_b - theta_a) * c.chi


def minimal_winding(theta_a, theta_b, c=None, alpha=0.0):
    """Winding count k minimizing |(2 pi k + theta_b - theta_a)| (ties toward 0)."""
    d = theta_b - theta_a
    k0 = -round(d / TWO_PI)
    cands = sorted((k0 - 1, k0, k0 + 1), key=lambda k: (abs(TWO_PI * k + d), abs(k)))
    return cands[0]


def _local_heading(line, idx):
    pts = line.points
    if len(pts) < 2:
        return 0.0
    if idx + 1 < len(pts):
        return float(np.angle(pts[idx + 1] - pts[idx]))
    return float(np.angle(pts[idx] - pts[idx - 1]))


def height_difference_at_hit(a, b, hit, c, tol=None):
    ia, ib = hit
    tol = 1.5 * max(a.step, b.step) if tol is None else tol
    if abs(a.points[ia] - b.points[ib]) > tol * (1 + 1e-9):
        raise InvalidHit(f"points a[{ia}] and b[{ib}] are not within {tol}")
    k = int(round((b.turning[ib] - a.turning[ia]) / TWO_PI))
    d = height_difference(a.theta, b.theta, k, c)
    ta = _local_heading(a, ia)
    tb = _local_heading(b, ib)
    cross = math.sin(tb - ta)
    # b heading to the left of a's tangent means b arrived from a's right
    side = "right" if cross >= 0 else "left"
    return HeightDifference(value=d, winding_count=k, side=side)


def classify_interaction(d, c, atol=1e-9):
    D = d.value if d.side == "right" else -d.value
    if abs(D) <= atol:
        return "merges"
    if -math.pi * c.chi < D < 0:
        return "crosses"
    if 0 < D < 2 * c.lam - math.pi * c.chi:
        return "bounces"
    return "cannot_hit"


# --- crossings -----------------------------------------------------------

@njit(cache=True)
def _segment_events(ax, ay, bx, by):
    """Proper intersections of polyline b with polyline a.

    Returns (b parameter, a parameter, sign) per event, sign +1 when b passes
    from the right of a to its left.
    """
    na = ax.shape[0] - 1
    nb = bx.shape[0] - 1
    out = []
    for j in range(nb):
        qx0, qy0, qx1, qy1 = bx[j], by[j], bx[j + 1], by[j + 1]
        lox = min(qx0, qx1)
        hix = max(qx0, qx1)
        loy = min(qy0, qy1)
        hiy = max(qy0, qy1)
        for i in range(na):
            px0, py0, px1, py1 = ax[i], ay[i], ax[i + 1], ay[i + 1]
            if max(px0, px1) < lox or min(px0, px1) > hix or max(py0, py1) < loy or min(py0, py1) > hiy:
                continue
            rx = px1 - px0
            ry = py1 - py0
            sx = qx1 - qx0
            sy = qy1 - qy0
            den = rx * sy - ry * sx
            if den == 0.0:
                continue
            wx = qx0 - px0
            wy = qy0 - py0
            t = (wx * sy - wy * sx) / den
            u = (wx * ry - wy * rx) / den
            if 0.0 <= t < 1.0 and 0.0 <= u < 1.0:
                out.append((j + u, i + t, 1.0 if den > 0 else -1.0))
    return out


def crossing_events(a_pts, b_pts):
    a = np.asarray(a_pts, complex)
    b = np.asarray(b_pts, complex)
    if len(a) < 2 or len(b) < 2:
        return []
    ev = _segment_events(a.real.copy(), a.imag.copy(), b.real.copy(), b.imag.copy())
    # a start point shared by both lines is not a crossing
    if a[0] == b[0]:
        ev = [e for e in ev if e[0] > 1e-12 and e[1] > 1e-12]
    ev = sorted(set(ev))
    # drop duplicate hits at shared vertices (same place, same sign)
    out = []
    for e in ev:
        if out and abs(e[0] - out[-1][0]) < 1e-9 and e[2] == out[-1][2]:
            continue
        out.append(e)
    return out


def _excursion_depth(a_pts, b_pts, s0, s1):
    i0 = int(math.floor(s0)) + 1
    i1 = int(math.floor(s1))
    if i1 < i0:
        return 0.0
    seg = b_pts[i0:i1 + 1]
    d = np.abs(seg[:, None] - a_pts[None, :])
    return float(d.min(axis=1).max())


def count_crossings(a, b, tol):
    """Transversal side changes of b relative to a, ignoring shallow bounces.

    Crossings come in consecutive opposite-sign pairs when b pokes through a
    and returns; a pair whose excursion stays within ``tol`` of a is a
    tangential contact and is removed.
    """
    a_pts = a.points if isinstance(a, FlowLine) else np.asarray(a, complex)
    b_pts = b.points if isinstance(b, FlowLine) else np.asarray(b, complex)
    ev = crossing_events(a_pts, b_pts)
    changed = True
    while changed and len(ev) >= 2:
        changed = False
        for k in range(len(ev) - 1):
            e0, e1 = ev[k], ev[k + 1]
            if e0[2] != e1[2] and _excursion_depth(a_pts, b_pts, e0[0], e1[0]) <= tol:
                del ev[k:k + 2]
                changed = True
                break
    return len(ev)


def min_distance(a_pts, b_pts):
    """Smallest distance between the point sets of two polylines."""
    from scipy.spatial import cKDTree
    a = np.asarray(a_pts, complex)
    b = np.asarray(b_pts, complex)
    tree = cKDTree(np.column_stack([a.real, a.imag]))
    d, _ = tree.query(np.column_stack([b.real, b.imag]))
    return float(d.min())


def forest_to_rows(forest):
    rows = []
    for ln in forest.lines:
        for k, (z, t) in enumerate(zip(ln.points, ln.turning)):
            rows.append((ln.id, k, z.real, z.imag, t))
    return rows
