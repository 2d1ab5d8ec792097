"""Space-filling curves read off the two trees of flow lines at angles +-pi/2.

The window is the square [-1, 1]^2 standing in for a vertical strip: the
left arc (from the top midpoint counterclockwise to the bottom midpoint)
carries the constant a, the right arc carries b, and both are corrected by
chi times the turning of the boundary at the corners.  A curve running
"up" starts at the bottom midpoint and ends at the top midpoint.

Points are ordered through the flow lines started from them.  Writing
``w < z`` when w lies in the part of the window cut off by the right side
of the left line from z (or the left side of the right line), the relation
is a depth-first walk of the merge tree: a line is preceded by the subtrees
merging into its right side (latest merge first) and followed by those
merging into its left side (earliest merge first).  Lines that never merge
are ordered by where they leave the window.  That walk visits the top of
the window first, so an "up" curve is its reversal.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import flow, gff, params

# the tracer measures headings from the positive real axis; the field's
# zero heading is "north", so every angle is shifted by a quarter turn
NORTH = 0.5 * math.pi
WINDOW = (-1.0, -1.0, 1.0, 1.0)
DIRECTIONS = ("up", "down")


class SpaceFillError(ValueError):
    pass


class OrderingError(SpaceFillError):
    pass


def _check_kappa_prime(kappa_prime):
    if not kappa_prime > 4.0:
        raise params.DomainError(f"kappa_prime={kappa_prime} must exceed 4")
    return params.derive_constants(16.0 / kappa_prime)


def _check_weights(kappa_prime, rho1, rho2):
    hi = kappa_prime / 2.0 - 2.0
    for name, r in (("rho1", rho1), ("rho2", rho2)):
        if not -2.0 < r < hi:
            raise params.DomainError(f"{name}={r} must lie in (-2, {hi})")


def weights_to_boundary(kappa_prime, rho1, rho2):
    """Boundary constants (a, b) whose upward curve has weights (rho1, rho2)."""
    c = _check_kappa_prime(kappa_prime)
    _check_weights(kappa_prime, rho1, rho2)
    shift = kappa_prime / 4.0 - 2.0
    return c.lam_prime * (rho1 - shift), -c.lam_prime * (rho2 - shift)


def boundary_to_weights(kappa_prime, a, b):
    c = _check_kappa_prime(kappa_prime)
    for name, v in (("a", a), ("b", b)):
        if not abs(v) < c.lam:
            raise params.DomainError(f"|{name}|={abs(v)} must be below lambda={c.lam}")
    shift = kappa_prime / 4.0 - 2.0
    return a / c.lam_prime + shift, -b / c.lam_prime + shift


def reversal_weights(kappa_prime, rho1, rho2):
    """Weights of the time reversal, returned as (rho2~, rho1~)."""
    _check_kappa_prime(kappa_prime)
    _check_weights(kappa_prime, rho1, rho2)
    mid = kappa_prime / 2.0 - 4.0
    return mid - rho2, mid - rho1


@dataclass(frozen=True)
class SpaceFillConfig:
    """Weights, boundary constants and mesh of one space-filling run.

    For direction "up" the constants satisfy a = lam'(rho1 - kappa'/4 + 2)
    and b = -lam'(rho2 - kappa'/4 + 2).  A "down" curve with the same
    weights uses the negated constants.
    """
    kappa_prime: float
    rho1: float = None
    rho2: float = None
    a: float = None
    b: float = None
    mesh: int = 16
    direction: str = "up"

    def __post_init__(self):
        kp = float(self.kappa_prime)
        if self.direction not in DIRECTIONS:
            raise SpaceFillError(f"direction must be one of {DIRECTIONS}")
        sgn = 1.0 if self.direction == "up" else -1.0
        if self.rho1 is None or self.rho2 is None:
            if self.a is None or self.b is None:
                shift = kp / 4.0 - 2.0
                r1 = shift if self.rho1 is None else self.rho1
                r2 = shift if self.rho2 is None else self.rho2
                object.__setattr__(self, "rho1", r1)
                object.__setattr__(self, "rho2", r2)
            else:
                r1, r2 = boundary_to_weights(kp, sgn * self.a, sgn * self.b)
                object.__setattr__(self, "rho1", r1)
                object.__setattr__(self, "rho2", r2)
        a, b = weights_to_boundary(kp, self.rho1, self.rho2)
        if self.a is not None and (abs(sgn * self.a - a) > 1e-12 or abs(sgn * self.b - b) > 1e-12):
            raise SpaceFillError("boundary constants do not match the weights")
        object.__setattr__(self, "a", sgn * a)
        object.__setattr__(self, "b", sgn * b)
        if int(self.mesh) != self.mesh or self.mesh < 1:
            raise SpaceFillError(f"mesh={self.mesh} must be a positive integer")

    @property
    def constants(self):
        return params.derive_constants(16.0 / self.kappa_prime)

    def reversed(self):
        """Same weights, opposite direction."""
        other = "down" if self.direction == "up" else "up"
        return SpaceFillConfig(self.kappa_prime, self.rho1, self.rho2, mesh=self.mesh, direction=other)


def square_boundary(c, a, b):
    """Boundary data on the square for left-arc constant a and right-arc constant b."""
    q = 0.5 * math.pi * c.chi
    return gff.BoundarySpec((
        (0.0, 0.5, a + q), (0.5, 1.0, b - q), (1.0, 2.0, b),
        (2.0, 2.5, b + q), (2.5, 3.0, a - q), (3.0, 4.0, a),
    ))


def sample_field(cfg, n=129, seed=0):
    """Zero-boundary GFF on [-1,1]^2 plus the harmonic extension of the arcs."""
    base = gff.sample_zero_boundary(n, 2.0 / (n - 1), seed=seed, origin=complex(-1, -1))
    return gff.add_harmonic_boundary(base, square_boundary(cfg.constants, cfg.a, cfg.b))


def mesh_points(mesh, window=WINDOW):
    """Cell centers of a mesh x mesh partition, row by row from the bottom."""
    x0, y0, x1, y1 = window
    hx = (x1 - x0) / mesh
    hy = (y1 - y0) / mesh
    k = np.arange(mesh) + 0.5
    return (x0 + hx * k[None, :] + 1j * (y0 + hy * k[:, None])).ravel()


def exit_position(z, window=WINDOW):
    """Counterclockwise boundary position in [0, 4) measured from the bottom midpoint."""
    x0, y0, x1, y1 = window
    u = min(max((z.real - x0) / (x1 - x0), 0.0), 1.0)
    v = min(max((z.imag - y0) / (y1 - y0), 0.0), 1.0)
    d = (v, 1.0 - u, 1.0 - v, u)  # distances to bottom, right, top, left
    side = int(np.argmin(d))
    s = (u, 1.0 + v, 3.0 - u, 4.0 - v)[side]
    return (s - 0.5) % 4.0


@dataclass
class SpaceFillOrder:
    points: np.ndarray
    order: np.ndarray
    evidence: dict
    pocket_areas: np.ndarray
    direction: str = "up"
    window: tuple = WINDOW
    mesh: int = None
    forests: tuple = field(default=None, repr=False)

    def visit_rank(self):
        rank = np.empty(len(self.order), dtype=np.int64)
        rank[self.order] = np.arange(len(self.order))
        return rank

    def visit_times(self):
        """Normalized visit time of each point: the midpoint of its pocket's time slot."""
        area = self.pocket_areas[self.order]
        end = np.cumsum(area)
        mid = (end - 0.5 * area) / end[-1]
        out = np.empty(len(self.order))
        out[self.order] = mid
        return out


def _merge_side(forest, ln):
    """'right' or 'left' side of the target line that ``ln`` merges into.

    The side is read from where the merging tip sits relative to the
    target's local tangent; when the tip lies on the tangent line the
    incoming heading decides.  Also returns whether that fallback was used.
    """
    tid, tidx = ln.target
    tp = forest.lines[tid].points
    if tidx + 1 < len(tp):
        dt = tp[tidx + 1] - tp[tidx]
    else:
        dt = tp[tidx] - tp[tidx - 1]
    dt /= abs(dt)
    p = ln.points[ln.n_own - 1] if ln.n_own >= 1 else ln.start
    disp = (np.conj(dt) * (p - tp[tidx])).imag
    if abs(disp) > 1e-12 or ln.n_own == 0:
        return ("right" if disp < 0 else "left"), False
    cross = (np.conj(dt) * np.exp(1j * ln.heading[ln.n_own - 1])).imag
    return ("right" if cross > 0 else "left"), True


def _tree_walk(forest, first_side, window):
    """Depth-first 'before' order of one forest.

    ``first_side`` is the side whose merging subtrees come before the line
    they merge into.
    """
    n = len(forest.lines)
    kids = [[] for _ in range(n)]
    weak = 0
    for child, parent, _ in forest.merge_edges:
        ln = forest.lines[child]
        side, fallback = _merge_side(forest, ln)
        weak += fallback
        kids[parent].append((ln.target[1], child, side))
    roots = [ln.id for ln in forest.lines if ln.target is None]
    pos = {r: exit_position(forest.lines[r].points[-1], window) for r in roots}
    # left lines leave through the left arc, higher up first; right lines
    # leave through the right arc, again higher up first
    if first_side == "right":
        roots.sort(key=lambda r: (pos[r], r))
    else:
        roots.sort(key=lambda r: (-pos[r], r))
    out = []
    root_of = np.empty(n, dtype=np.int64)
    for r in roots:
        stack = [(False, r)]
        while stack:
            emit, node = stack.pop()
            if emit:
                out.append(node)
                root_of[node] = r
                continue
            before = sorted((k for k in kids[node] if k[2] == first_side), key=lambda k: (-k[0], k[1]))
            after = sorted((k for k in kids[node] if k[2] != first_side), key=lambda k: (k[0], k[1]))
            seq = [(False, k[1]) for k in before] + [(True, node)] + [(False, k[1]) for k in after]
            stack.extend(reversed(seq))
    return np.array(out, dtype=np.int64), root_of, weak


def _ranks(order):
    r = np.empty(len(order), dtype=np.int64)
    r[order] = np.arange(len(order))
    return r


def rule_agreement(rank_l, tree_l, rank_r, tree_r):
    """Pairs on which both trees give merge evidence, and how many agree."""
    same = (tree_l[:, None] == tree_l[None, :]) & (tree_r[:, None] == tree_r[None, :])
    np.fill_diagonal(same, False)
    agree = np.sign(rank_l[:, None] - rank_l[None, :]) == np.sign(rank_r[:, None] - rank_r[None, :])
    pairs = int(same.sum()) // 2
    hits = int((same & agree).sum()) // 2
    return pairs, hits


def flow_options(grid, step_ratio=20):
    return flow.FlowOptions(step=grid.spacing / step_ratio, max_steps=int(40 * (grid.n - 1) * step_ratio))


def order_points(grid, c, cfg, points=None, opts=None, keep_forests=False):
    """Order the mesh points (or the given points) along the space-filling curve.

    The grid must carry the boundary data of ``cfg`` (see ``sample_field``).
    The traced forests are large and are dropped unless ``keep_forests``.
    """
    if points is None:
        points = mesh_points(cfg.mesh, grid.window)
        mesh = cfg.mesh
    else:
        mesh = None
    points = np.asarray(points, dtype=complex).ravel()
    if len(points) == 0:
        raise SpaceFillError("no points to order")
    opts = opts or flow_options(grid)
    left = flow.build_forest(grid, c, points, NORTH + 0.5 * math.pi, opts)
    right = flow.build_forest(grid, c, points, NORTH - 0.5 * math.pi, opts)
    order_l, tree_l, weak_l = _tree_walk(left, "right", grid.window)
    order_r, tree_r, weak_r = _tree_walk(right, "left", grid.window)
    n = len(points)
    if sorted(order_l.tolist()) != list(range(n)):
        raise OrderingError("walk of the left tree is not a permutation")
    rank_l, rank_r = _ranks(order_l), _ranks(order_r)
    pairs, hits = rule_agreement(rank_l, tree_l, rank_r, tree_r)
    order = order_l[::-1].copy() if cfg.direction == "up" else order_l
    x0, y0, x1, y1 = grid.window
    areas = np.full(n, (x1 - x0) * (y1 - y0) / n)
    evidence = {
        "pairs_both": pairs,
        "pairs_agree": hits,
        "agreement": hits / pairs if pairs else 1.0,
        "left_trees": int(len(set(tree_l.tolist()))),
        "right_trees": int(len(set(tree_r.tolist()))),
        "side_fallbacks": int(weak_l + weak_r),
        "cycles": 0,
        "rank_left": rank_l,
        "rank_right": rank_r,
        "tree_left": tree_l,
        "tree_right": tree_r,
    }
    return SpaceFillOrder(points=points, order=order, evidence=evidence, pocket_areas=areas,
                          direction=cfg.direction, window=tuple(grid.window), mesh=mesh,
                          forests=(left, right) if keep_forests else None)


def check_total_order(order, triples=None, seed=0):
    """Verify antisymmetry, totality and transitivity of the rank relation.

    Exhaustive over all triples when ``triples`` is None, otherwise on that
    many random triples.  Returns the number of violations.
    """
    rank = _ranks(np.asarray(order.order if isinstance(order, SpaceFillOrder) else order))
    n = len(rank)
    if sorted(rank.tolist()) != list(range(n)):
        return n
    before = rank[:, None] < rank[None, :]
    bad = int(np.sum(before & before.T)) + int(np.sum(~before & ~before.T) - n)
    if triples is None:
        for i in range(n):
            bad += int(np.sum(before[i][:, None] & before & ~before[i][None, :]))
    else:
        rng = np.random.default_rng(seed)
        t = rng.integers(0, n, size=(triples, 3))
        i, j, k = t.T
        bad += int(np.sum(before[i, j] & before[j, k] & ~before[i, k]))
    return bad


@dataclass
class Curve:
    points: np.ndarray  # cell centers in visiting order
    times: np.ndarray  # cumulative area-time, times[0] = 0
    index: np.ndarray  # point index visited at each step

    @property
    def total_time(self):
        return float(self.times[-1])


def space_filling_curve(order):
    area = order.pocket_areas[order.order]
    times = np.concatenate([[0.0], np.cumsum(area)])
    return Curve(points=order.points[order.order], times=times, index=order.order.copy())


def reversal_symmetry_stat(forward, reverse, probes=None):
    """Two-sample KS statistic between visit times t (forward) and 1 - t (reverse).

    ``forward`` and ``reverse`` are single orders or equal-length lists of
    orders.  ``probes`` selects point indices; with lists, sample k
    contributes only probe k mod len(probes) so that the values entering
    the test are independent.
    """
    fwd = forward if isinstance(forward, (list, tuple)) else [forward]
    rev = reverse if isinstance(reverse, (list, tuple)) else [reverse]
    if len(fwd) != len(rev):
        raise SpaceFillError("forward and reverse sample counts differ")
    for f, r in zip(fwd, rev):
        if len(f.points) != len(r.points) or not np.allclose(f.points, r.points):
            raise SpaceFillError("forward and reverse orders use different meshes")
    if probes is None:
        probes = np.arange(len(fwd[0].points))
    probes = np.asarray(probes)
    if len(fwd) == 1:
        tf = fwd[0].visit_times()[probes]
        tr = 1.0 - rev[0].visit_times()[probes]
    else:
        pick = [probes[k % len(probes)] for k in range(len(fwd))]
        tf = np.array([f.visit_times()[p] for f, p in zip(fwd, pick)])
        tr = np.array([1.0 - r.visit_times()[p] for r, p in zip(rev, pick)])
    res = sps.ks_2samp(tf, tr)
    return float(res.statistic), float(res.pvalue)


def default_probes(mesh):
    """Four interior cells, one per quadrant, placed symmetrically."""
    q = max(mesh // 4, 0)
    cells = {(q, q), (q, mesh - 1 - q), (mesh - 1 - q, q), (mesh - 1 - q, mesh - 1 - q)}
    return np.array(sorted(j * mesh + i for j, i in cells))


def refinement_agreement(grid, c, cfg, coarse=16, fine=32, opts=None):
    """Fraction of coarse-point pairs ordered alike on the coarse and refined point sets.

    The refined set is the union of both meshes traced row by row from the
    bottom, so coarse lines may merge into fine ones.
    """
    pc = mesh_points(coarse, grid.window)
    pf = np.concatenate([pc, mesh_points(fine, grid.window)])
    perm = np.lexsort((pf.real, pf.imag))
    pf = pf[perm]
    oc = order_points(grid, c, cfg, points=pc, opts=opts)
    of = order_points(grid, c, cfg, points=pf, opts=opts)
    rc = oc.visit_rank()
    where = np.empty(len(pf), dtype=np.int64)
    where[perm] = np.arange(len(pf))
    rf = of.visit_rank()[where[:len(pc)]]
    iu = np.triu_indices(len(pc), 1)
    agree = np.sign(rc[:, None] - rc[None, :]) == np.sign(rf[:, None] - rf[None, :])
    return float(agree[iu].mean())


def time_grid(order):
    """Mesh-shaped array of normalized visit times (row 0 at the bottom)."""
    if order.mesh is None:
        raise SpaceFillError("time grids need an order built on a mesh")
    return order.visit_times().reshape(order.mesh, order.mesh)


def late_islands(order, jump=0.25):
    """Cells visited later than all four neighbours by more than ``jump``."""
    t = time_grid(order)
    m = t.shape[0]
    pad = np.pad(t, 1, constant_values=-np.inf)
    nb = np.stack([pad[:-2, 1:-1], pad[2:, 1:-1], pad[1:-1, :-2], pad[1:-1, 2:]])
    nb = np.where(np.isinf(nb), np.nan, nb)
    low = np.nanmax(nb, axis=0)
    return int(np.sum(t - low > jump)) if m > 1 else 0


def time_colors(t):
    """RGB triples for normalized times: blue through green to red."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    r = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    g = 1.0 - np.abs(2.0 * t - 1.0)
    b = np.clip(1.0 - 2.0 * t, 0.0, 1.0)
    return np.round(255 * np.stack([r, g, b], axis=-1)).astype(np.uint8)


def curve_rows(curve):
    return [(k, p.real, p.imag, t) for k, (p, t) in enumerate(zip(curve.points, curve.times[1:]))]
