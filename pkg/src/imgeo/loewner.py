"""Loewner driving processes and trace reconstruction.

Radial and whole-plane drivers are simulated through the angle
theta = arg W - arg O.  Near either end of (0, 2 pi) the angle is a scaled
Bessel process, so each step moves the Bessel part with its exact transition
(a non-central chi-square) and the smooth remainder of the drift with an
explicit Euler step.  Boundary hits between grid times are flagged with the
exact Bessel-bridge hitting probability.

Traces are rebuilt by composing exact single-step slit maps.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import special

from .params import DomainError

TWO_PI = 2.0 * math.pi
EPS = 1e-6
KINDS = ("chordal", "radial", "whole_plane")


class SpecError(ValueError):
    pass


class StabilityError(RuntimeError):
    pass


class InstabilityError(RuntimeError):
    def __init__(self, msg, step):
        super().__init__(msg)
        self.step = step


class RangeError(ValueError):
    pass


@dataclass
class DriverSpec:
    kind: str
    kappa: float
    weights: tuple = ()  # (rho, position) pairs
    mu: float = 0.0
    dt: float = 1e-4
    horizon: float = 1.0
    burn_in: float = 0.0
    seed: int = 0
    t0: float = 0.0  # time label of the first recorded sample

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown kind {self.kind!r}")
        if not self.kappa > 0:
            raise SpecError("kappa must be positive")
        if not self.dt > 0:
            raise SpecError("dt must be positive")
        if self.burn_in < 0:
            raise SpecError("burn_in must be >= 0")
        if not self.horizon > 0:
            raise SpecError("horizon must be positive")
        self.weights = tuple((float(r), p) for r, p in self.weights)

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class Driver:
    kind: str
    times: np.ndarray
    W: np.ndarray
    O: np.ndarray = None  # radial force point, or chordal V tracks (steps+1, m)
    theta: np.ndarray = None
    arg_O: np.ndarray = None  # lifted argument of O
    hits: np.ndarray = None  # step indices with a W/O (or W/V) collision
    threshold_time: float = None
    spec: DriverSpec = None

    def rows(self):
        """(t, Re W, Im W, Re O, Im O, theta) rows for the radial kinds."""
        W = np.asarray(self.W, complex)
        O = np.asarray(self.O, complex) if self.O is not None and self.O.ndim == 1 else np.zeros_like(W)
        th = self.theta if self.theta is not None else np.zeros(len(W))
        return np.column_stack([self.times, W.real, W.imag, O.real, O.imag, th])


@dataclass
class Trace:
    kind: str
    times: np.ndarray
    points: np.ndarray
    capacity: bool = True
    contacts: np.ndarray = field(default_factory=lambda: np.zeros(0, int))

    def rows(self):
        return np.column_stack([self.times, self.points.real, self.points.imag])


def _kernel_seed(seed):
    return int(np.random.SeedSequence(seed).generate_state(1)[0] & 0x7FFFFFFF)


def bessel_dimension(kappa, rho):
    return 1.0 + 2.0 * (rho + 2.0) / kappa


def bridge_hit_probability(z, d):
    """P(a Bessel bridge of dimension d hits 0) given z = sqrt(x y)/dt.

    x, y are the squared-Bessel values at the ends of a step of length dt.
    The killed process is the h-transform of dimension 4 - d, which gives
    1 - I_{-nu}(z) / I_nu(z) with nu = d/2 - 1.
    """
    z = np.asarray(z, float)
    if d >= 2.0:
        return np.zeros_like(z)
    nu = d / 2.0 - 1.0
    out = np.ones_like(z)
    pos = z > 0
    zp = z[pos]
    # I_{-nu} = I_nu + (2/pi) sin(nu pi) K_nu, so only K_nu/I_nu is needed
    ratio = special.kve(nu, zp) / special.ive(nu, zp) * np.exp(-2.0 * zp)
    out[pos] = np.clip(-(2.0 / math.pi) * math.sin(nu * math.pi) * ratio, 0.0, 1.0)
    return out


# --- theta equation ---------------------------------------------------------

@njit(cache=True)
def _theta_step(th, a, kmu, sk, dt, sdt, xi, chi2):
    """One step of d theta = (a/2) cot(theta/2) dt + kmu dt + sk dB.

    Returns the new angle and the squared-Bessel pair used (x, y), measured
    from the nearer end of (0, 2 pi).
    """
    if th <= math.pi:
        u, sgn = th, 1.0
    else:
        u, sgn = TWO_PI - th, -1.0
    if u < EPS:
        u = EPS
    # smooth part of the drift, (a/2) cot(u/2) - a/u, plus the constant drift
    rem = 0.5 * a / math.tan(0.5 * u) - a / u
    u1 = abs(u + (rem + sgn * kmu) * dt)
    x = u1 * u1 / (sk * sk)
    r = math.sqrt(x) + sgn * sdt * xi
    y = r * r + dt * chi2
    u2 = sk * math.sqrt(y)
    if u2 > math.pi:
        # left the half the Bessel picture was set up for; keep continuity
        u2 = min(u2, TWO_PI - EPS)
    new = u2 if sgn > 0 else TWO_PI - u2
    return new, x, y


@njit(cache=True)
def _theta_path(theta0, kappa, rho, mu, dt, n, seed, burn):
    np.random.seed(seed)
    a = rho + 2.0
    d = 1.0 + 2.0 * a / kappa
    sk = math.sqrt(kappa)
    sdt = math.sqrt(dt)
    kmu = kappa * mu
    th = theta0
    for _ in range(burn):
        xi = np.random.standard_normal()
        c2 = np.random.chisquare(d - 1.0)
        th, x, y = _theta_step(th, a, kmu, sk, dt, sdt, xi, c2)
    theta = np.empty(n + 1)
    phi = np.empty(n + 1)
    zs = np.empty(n)
    theta[0] = th
    phi[0] = 0.0
    for k in range(n):
        xi = np.random.standard_normal()
        c2 = np.random.chisquare(d - 1.0)
        new, x, y = _theta_step(th, a, kmu, sk, dt, sdt, xi, c2)
        zs[k] = math.sqrt(x * y) / dt
        # the angle equation gives the integral of cot(theta/2) over the step
        # exactly, which avoids quadrature of a singular integrand
        phi[k + 1] = phi[k] - (2.0 / a) * (new - th - kmu * dt - sk * sdt * xi)
        theta[k + 1] = new
        th = new
    return theta, phi, zs


@njit(cache=True)
def _theta_samples(theta0, kappa, rho, mu, dt, burn, every, count, seed):
    np.random.seed(seed)
    a = rho + 2.0
    d = 1.0 + 2.0 * a / kappa
    sk = math.sqrt(kappa)
    sdt = math.sqrt(dt)
    kmu = kappa * mu
    th = theta0
    for _ in range(burn):
        xi = np.random.standard_normal()
        c2 = np.random.chisquare(d - 1.0)
        th, x, y = _theta_step(th, a, kmu, sk, dt, sdt, xi, c2)
    out = np.empty(count)
    for j in range(count):
        for _ in range(every):
            xi = np.random.standard_normal()
            c2 = np.random.chisquare(d - 1.0)
            th, x, y = _theta_step(th, a, kmu, sk, dt, sdt, xi, c2)
        out[j] = th
    return out


def theta_samples(kappa, rho, mu=0.0, dt=1e-4, burn_in=50.0, spacing=0.2,
                  count=1000, theta0=math.pi, seed=0):
    """Post-burn-in samples of the angle process, one every ``spacing``."""
    burn = int(round(burn_in / dt))
    every = max(1, int(round(spacing / dt)))
    return _theta_samples(float(theta0), float(kappa), float(rho), float(mu), float(dt),
                          burn, every, int(count), _kernel_seed(seed))


def _single_weight(spec):
    if len(spec.weights) > 1:
        raise SpecError("radial drivers take a single force point")
    if not spec.weights:
        return 0.0, math.pi
    rho, pos = spec.weights[0]
    theta0 = math.pi if pos is None else float(pos)
    if not 0.0 < theta0 < TWO_PI:
        raise SpecError("the force point must start strictly inside (0, 2 pi) from W")
    return rho, theta0


def _angle_driver(spec, burn):
    rho, theta0 = _single_weight(spec)
    if not rho > -2.0:
        raise SpecError(f"rho={rho} must exceed -2")
    n = spec.steps
    theta, phi, zs = _theta_path(theta0, float(spec.kappa), rho, float(spec.mu),
                                 float(spec.dt), n, _kernel_seed(spec.seed), burn)
    jumps = np.abs(np.diff(theta))
    if jumps.size and jumps.max() > math.pi / 4:
        raise StabilityError(f"angle step {jumps.max():.3f} exceeds pi/4; reduce dt")
    d = bessel_dimension(spec.kappa, rho)
    u = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 1])))
    hit = u.random(len(zs)) < bridge_hit_probability(zs, d)
    argW = phi + theta
    times = spec.t0 + spec.dt * np.arange(n + 1)
    return Driver(
        kind=spec.kind,
        times=times,
        W=np.exp(1j * argW),
        O=np.exp(1j * phi),
        theta=theta,
        arg_O=phi,
        hits=np.flatnonzero(hit) + 1,
        spec=spec,
    )


def drive_radial(spec):
    if spec.kind != "radial":
        raise SpecError("drive_radial needs kind='radial'")
    return _angle_driver(spec, 0)


def drive_wholeplane(spec):
    if spec.kind != "whole_plane":
        raise SpecError("drive_wholeplane needs kind='whole_plane'")
    if not spec.burn_in > 0:
        raise SpecError("whole-plane drivers need burn_in > 0")
    return _angle_driver(spec, int(round(spec.burn_in / spec.dt)))


# --- chordal ----------------------------------------------------------------

@njit(cache=True)
def _chordal_one(x0, side, kappa, rho, dt, n, seed):
    """W and V for one force point; the gap is an exact squared Bessel process."""
    np.random.seed(seed)
    d = 1.0 + 2.0 * (rho + 2.0) / kappa
    sdt = math.sqrt(dt)
    W = np.empty(n + 1)
    V = np.empty(n + 1)
    zs = np.empty(n)
    W[0] = 0.0
    V[0] = x0
    x = x0 * x0 / kappa
    for k in range(n):
        xi = np.random.standard_normal()
        c2 = np.random.chisquare(d - 1.0)
        r = math.sqrt(x) - sdt * xi * side
        y = r * r + dt * c2
        zs[k] = math.sqrt(x * y) / dt
        g0 = math.sqrt(kappa * x)
        g1 = math.sqrt(kappa * y)
        gm = max(0.5 * (g0 + g1), EPS)
        V[k + 1] = V[k] + side * 2.0 * dt / gm
        W[k + 1] = V[k + 1] - side * g1
        x = y
    return W, V, zs


@njit(cache=True)
def _chordal_many(xs, rhos, kappa, dt, n, seed):
    np.random.seed(seed)
    m = xs.shape[0]
    sk = math.sqrt(kappa)
    sdt = math.sqrt(dt)
    W = np.empty(n + 1)
    V = np.empty((n + 1, m))
    flips = np.zeros((n, m), dtype=np.bool_)
    W[0] = 0.0
    V[0] = xs
    for k in range(n):
        w = W[k]
        drift = 0.0
        for i in range(m):
            g = w - V[k, i]
            s = 1.0 if (g > 0 or (g == 0 and xs[i] < 0)) else -1.0
            drift += rhos[i] / (s * max(abs(g), EPS))
        w1 = w + drift * dt + sk * sdt * np.random.standard_normal()
        for i in range(m):
            g = V[k, i] - w
            s = 1.0 if (g > 0 or (g == 0 and xs[i] > 0)) else -1.0
            v1 = V[k, i] + 2.0 * dt / (s * max(abs(g), EPS))
            if (v1 - w1) * s < 0:
                flips[k, i] = True
                v1 = w1
            V[k + 1, i] = v1
        W[k + 1] = w1
    return W, V, flips


def _position(p):
    if isinstance(p, str):
        if p in ("0+", "+0"):
            return 0.0, 1.0
        if p in ("0-", "-0"):
            return 0.0, -1.0
        raise SpecError(f"unknown force point position {p!r}")
    p = float(p)
    if p == 0.0:
        return 0.0, math.copysign(1.0, p)
    return p, math.copysign(1.0, p)


def _partial_sums(weights):
    """Same-side partial sums of rho, ordered from W outward."""
    out = {}
    for side in (1.0, -1.0):
        pts = sorted((abs(x), i, r) for i, (r, (x, s)) in enumerate(weights) if s == side)
        acc = 0.0
        for _, i, r in pts:
            acc += r
            out[i] = acc
    return out


def drive_chordal(spec):
    if spec.kind != "chordal":
        raise SpecError("drive_chordal needs kind='chordal'")
    n = spec.steps
    times = spec.t0 + spec.dt * np.arange(n + 1)
    seed = _kernel_seed(spec.seed)
    if not spec.weights:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
        inc = math.sqrt(spec.kappa * spec.dt) * rng.standard_normal(n)
        W = np.concatenate([[0.0], np.cumsum(inc)])
        return Driver("chordal", times, W, O=np.zeros((n + 1, 0)), hits=np.zeros(0, int), spec=spec)
    weights = [(r, _position(p)) for r, p in spec.weights]
    sums = _partial_sums(weights)
    starting = [i for i, (r, (x, s)) in enumerate(weights) if x == 0.0]
    for i in starting:
        if sums[i] <= -2.0:
            raise SpecError("the weights put the process at its continuation threshold at time 0")
    if len(weights) == 1:
        rho, (x, side) = weights[0]
        if not rho > -2.0:
            raise SpecError(f"rho={rho} must exceed -2")
        W, V, zs = _chordal_one(x, side, float(spec.kappa), rho, float(spec.dt), n, seed)
        d = bessel_dimension(spec.kappa, rho)
        u = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 1])))
        p = bridge_hit_probability(zs, d)
        if x == 0.0:
            p[0] = 0.0  # the start itself is not a collision
        hits = np.flatnonzero(u.random(n) < p) + 1
        return Driver("chordal", times, W, O=V[:, None], hits=hits, spec=spec)
    xs = np.array([x if x != 0.0 else s * EPS for _, (x, s) in weights])
    rhos = np.array([r for r, _ in weights])
    W, V, flips = _chordal_many(xs, rhos, float(spec.kappa), float(spec.dt), n, seed)
    hits = np.flatnonzero(flips.any(axis=1)) + 1
    threshold = None
    for k in hits:
        hit_pts = np.flatnonzero(flips[k - 1])
        if any(sums[i] <= -2.0 for i in hit_pts):
            threshold = float(times[k])
            break
    return Driver("chordal", times, W, O=V, hits=hits, threshold_time=threshold, spec=spec)


def drive(spec):
    return {"chordal": drive_chordal, "radial": drive_radial, "whole_plane": drive_wholeplane}[spec.kind](spec)


# --- slit maps --------------------------------------------------------------

@njit(cache=True)
def _phi_inv(u):
    # inverse of z / (1 + z)^2 on the unit disk
    s = np.sqrt(1.0 - 4.0 * u)
    b = 1.0 - 2.0 * u
    den = b + s
    den2 = b - s
    if abs(den2) > abs(den):
        den = den2
    return 2.0 * u / den


@njit(cache=True)
def _radial_step(w, U, q):
    """Inverse radial slit map with driver U over capacity time -log q."""
    v = w / U
    return U * _phi_inv(q * v / ((1.0 + v) * (1.0 + v)))


@njit(cache=True)
def _radial_tips(U, q, tipx, out_idx, w0):
    """Tip after each requested number of steps by backward composition."""
    m = out_idx.shape[0]
    pts = np.empty(m, dtype=np.complex128)
    bad = -1
    for j in range(m):
        n = out_idx[j]
        if n == 0:
            pts[j] = w0
            continue
        w = U[n - 1] * tipx[n - 1]
        for k in range(n - 2, -1, -1):
            w = _radial_step(w, U[k], q[k])
            if not abs(w) < 1e12:
                bad = k
                break
        pts[j] = w
        if bad >= 0:
            break
    return pts, bad


@njit(cache=True)
def _radial_points(U, q, z, upto):
    """Apply the first ``upto`` inverse maps to points z (innermost map first)."""
    out = z.copy()
    for j in range(z.shape[0]):
        w = z[j]
        for k in range(upto - 1, -1, -1):
            w = _radial_step(w, U[k], q[k])
        out[j] = w
    return out


@njit(cache=True)
def _chordal_tips(U, dt, out_idx, w0):
    m = out_idx.shape[0]
    pts = np.empty(m, dtype=np.complex128)
    for j in range(m):
        n = out_idx[j]
        if n == 0:
            pts[j] = w0
            continue
        w = U[n - 1] + 2j * math.sqrt(dt[n - 1])
        for k in range(n - 2, -1, -1):
            r = np.sqrt((w - U[k]) ** 2 - 4.0 * dt[k])
            if r.imag < 0:
                r = -r
            w = U[k] + r
        pts[j] = w
    return pts


def slit_tip_radius(dt):
    """Distance from 0 of the tip of a radial slit of capacity time dt."""
    q = math.exp(-dt)
    return _phi_inv(complex(q / 4.0)).real


def _coarse(driver, stride):
    stride = max(1, int(stride))
    idx = np.arange(0, len(driver.times), stride)
    return idx


def loewner_trace(driver, resolution=1, every=1):
    """Tip positions for the driver sampled every ``resolution`` steps.

    The driver is treated as piecewise constant on the coarse steps and each
    coarse step is an exact slit map.  ``every`` thins the output further.
    """
    idx = _coarse(driver, resolution)
    t = driver.times[idx]
    dts = np.diff(t)
    nsteps = len(dts)
    out_idx = np.arange(0, nsteps + 1, max(1, int(every)))
    if driver.kind == "chordal":
        U = np.asarray(driver.W, float)[idx].astype(complex)
        pts = _chordal_tips(U[1:], dts, out_idx, U[0])
        return Trace("chordal", t[out_idx], pts)
    W = np.asarray(driver.W, complex)[idx]
    if driver.kind == "whole_plane":
        W = np.conj(W)
    W = W / np.abs(W)
    q = np.exp(-dts)
    tipx = np.array([_phi_inv(complex(qq / 4.0)) for qq in q], complex)
    # step k uses the driver value at its right end
    pts, bad = _radial_tips(W[1:], q, tipx, out_idx, W[0])
    if bad >= 0:
        raise InstabilityError(f"composition blew up at step {bad}", bad)
    if driver.kind == "whole_plane":
        pts = math.exp(t[0]) / pts
    contacts = np.searchsorted(idx[out_idx], driver.hits) if driver.hits is not None else np.zeros(0, int)
    return Trace(driver.kind, t[out_idx], pts, contacts=np.unique(contacts))


def map_derivative_at_zero(driver, upto, resolution=1, h=1e-6):
    """Derivative at 0 of the composed inverse maps through coarse step ``upto``."""
    idx = _coarse(driver, resolution)
    dts = np.diff(driver.times[idx])
    W = np.asarray(driver.W, complex)[idx[1:]]
    if driver.kind == "whole_plane":
        W = np.conj(W)
    W = W / np.abs(W)
    z = np.array([h, -h, 1j * h, -1j * h], complex)
    f = _radial_points(W, np.exp(-dts), z, int(upto))
    return complex((f[0] - f[1]) / (2 * h)), complex((f[2] - f[3]) / (2j * h))


# --- winding ----------------------------------------------------------------

def lifted_arg(points, center=0.0):
    z = np.asarray(points, complex) - center
    return np.unwrap(np.angle(z))


def winding_beta_estimate(trace, c, alpha=0.0, spacing=0.25, min_range=3.0, max_range=None,
                          floored=False):
    """Spiral strength read off from how fast the trace winds per log radius.

    The net winding is read at the first time the trace reaches each
    radius r0 e^s on a grid of s; ``max_range`` caps s.  With ``floored``
    the winding is rounded down to whole turns first.  Over a finite range
    that rounding biases the slope toward -inf by a sizeable fraction of a
    turn, so the unrounded winding is the default.
    """
    z = np.asarray(trace.points, complex)
    r = np.abs(z)
    A = lifted_arg(z)
    r0 = r[0]
    rmax = np.maximum.accumulate(r)
    span = math.log(rmax[-1] / r0)
    if span < min_range:
        raise RangeError(f"radial range e^{span:.2f} is below e^{min_range}")
    if max_range is not None:
        span = min(span, max_range + 1e-9)
    logs = np.arange(0.0, span, spacing)
    hit = np.searchsorted(rmax, r0 * np.exp(logs))
    hit = hit[hit < len(z)]
    logs = logs[:len(hit)]
    N = (A[hit] - A[0]) / TWO_PI
    if floored:
        N = np.floor(N)
    slope = np.polyfit(logs, N, 1)[0]
    return TWO_PI * (c.chi + alpha) * slope


def first_radius_index(trace, eps):
    r = np.abs(trace.points)
    below = np.flatnonzero(r <= eps)
    if below.size == 0:
        raise RangeError(f"the trace never reaches radius {eps}")
    return int(below[0])


def winding_count(trace, eps):
    """Times the trace winds around 0 before first reaching radius eps, rounded down."""
    k = first_radius_index(trace, eps)
    A = lifted_arg(trace.points[:k + 1])
    return int(math.floor((A[-1] - A[0]) / TWO_PI))


def twisting(driver, trace, epsilon):
    """arg of (g^{-1})'(0) at the first time the trace reaches radius epsilon.

    The branch is fixed on the part of the circle the curve has not touched,
    where the boundary map is continuous; there arg (g^{-1})' equals the
    rotation of the force point, so the value is that rotation rounded to a
    multiple of 2 pi.
    """
    if driver.kind != "radial":
        raise SpecError("twisting is defined for radial drivers")
    k = first_radius_index(trace, epsilon)
    t = trace.times[k]
    j = int(np.searchsorted(driver.times, t - 1e-12))
    rot = driver.arg_O[j] - driver.arg_O[0]
    return float(rot - (math.remainder(rot, TWO_PI)))


# --- self contacts ----------------------------------------------------------

def relative_gaps(points):
    z = np.asarray(points, complex)
    return np.abs(np.diff(z)) / np.maximum(np.abs(z[:-1]), 1e-300)


def _point_segment_distance(p, a, b):
    ab = b - a
    L2 = (ab * ab.conjugate()).real
    t = np.clip(((p - a) * ab.conjugate()).real / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    return np.abs(p - (a + t * ab))


def multiplicity(points, factor=2.0):
    """Largest number of separate visits the polyline makes to one spot.

    A point revisits segment k when it lies within ``factor`` times the
    smaller of two gaps, the length of segment k and the point's own step.
    The tolerance thus follows the local point gap at every scale of a
    whole-plane trace.  Two passes count as separate visits only when the
    curve wound at least half a turn about 0 between them.
    """
    from scipy.spatial import cKDTree
    z = np.asarray(points, complex)
    z = z[np.abs(z) > 0]
    if len(z) < 3:
        return 1
    A = lifted_arg(z)
    a, b = z[:-1], z[1:]
    mid = 0.5 * (a + b)
    Am = 0.5 * (A[:-1] + A[1:])
    seg = np.abs(b - a)
    rel = seg / np.abs(mid)
    own = np.minimum(np.concatenate([seg[:1], seg]), np.concatenate([seg, seg[-1:]]))
    own_rel = own / np.abs(z)
    # log-polar embedding: Euclidean distance there is the relative distance
    emb = lambda w, ang: np.column_stack([np.log(np.abs(w)), np.cos(ang), np.sin(ang)])
    tree = cKDTree(emb(mid, Am))
    # the tolerance never exceeds factor * own step, which bounds the search;
    # the few long segments are checked against every point directly
    cut = 4.0 * np.median(rel)
    long_ = np.flatnonzero(rel > cut)
    radius = 1.5 * (factor * own_rel + 0.5 * cut)
    cand = tree.query_ball_point(emb(z, A), radius)
    best = 1
    for i, ks in enumerate(cand):
        ks = np.union1d(np.asarray(ks, int), long_)
        if ks.size == 0:
            continue
        ks = ks[np.abs(Am[ks] - A[i]) > math.pi]
        if ks.size == 0:
            continue
        d = _point_segment_distance(z[i], a[ks], b[ks])
        ks = ks[d <= factor * np.minimum(seg[ks], own[i])]
        turns = set(np.round((Am[ks] - A[i]) / TWO_PI).astype(int).tolist()) - {0}
        best = max(best, 1 + len(turns))
    return best


def driver_to_csv(driver, path):
    np.savetxt(path, driver.rows(), delimiter=",", header="t,re_W,im_W,re_O,im_O,theta",
               comments="", fmt="%.12g")


def trace_to_csv(trace, path):
    np.savetxt(path, trace.rows(), delimiter=",", header="t,x,y", comments="", fmt="%.12g")
