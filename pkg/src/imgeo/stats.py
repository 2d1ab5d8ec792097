"""Seeded Monte Carlo checks with thresholds from the golden file.

Every check is a function of (config, seeds) and returns one or more
``TestReport`` objects.  Seeds come from a single root: trial k of check
``name`` uses ``SeedSequence(root, spawn_key=(crc32(name), k))``, so any
trial can be re-run alone.
"""

import json
import math
import time
import zlib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import integrate, stats as sps

from . import flow, gff, loewner, params, spacefill

GOLDEN = "golden.json"
MANIFEST = "seed_manifest.json"


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    name: str
    trials: int
    passes: int
    statistic: float
    threshold: float
    rule: str  # how statistic must compare with threshold: "<", "<=", ">", ">="
    seeds: list
    details: dict = field(default_factory=dict)
    runtime: float = 0.0
    group: str = None

    @property
    def verdict(self):
        ok = {"<": self.statistic < self.threshold, "<=": self.statistic <= self.threshold,
              ">": self.statistic > self.threshold, ">=": self.statistic >= self.threshold}[self.rule]
        return "pass" if ok else "fail"

    def to_dict(self):
        """Serializable form; runtime is left out so reports stay reproducible."""
        return _clean({
            "name": self.name, "group": self.group, "trials": self.trials, "passes": self.passes,
            "statistic": self.statistic, "threshold": self.threshold, "rule": self.rule,
            "verdict": self.verdict, "seeds": [int(s) for s in self.seeds], "details": self.details,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


# --- golden file and seeds ---------------------------------------------------

def load_golden(path=None):
    if path is None:
        text = resources.files("imgeo").joinpath("data", GOLDEN).read_text()
    else:
        text = open(path).read()
    return json.loads(text)


def trial_seeds(root, name, count):
    key = zlib.crc32(name.encode())
    return [int(np.random.SeedSequence(int(root), spawn_key=(key, k)).generate_state(1, np.uint64)[0])
            for k in range(count)]


def build_manifest(golden):
    return {
        "version": golden["version"],
        "root_seed": golden["root_seed"],
        "seeds": {name: trial_seeds(golden["root_seed"], name, spec["trials"])
                  for name, spec in sorted(golden["tests"].items())},
    }


def load_manifest(path=None):
    if path is None:
        text = resources.files("imgeo").joinpath("data", MANIFEST).read_text()
    else:
        text = open(path).read()
    return json.loads(text)


def _seed32(s):
    return int(s) & 0x7FFFFFFF


def _rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


# --- oracles -----------------------------------------------------------------

def theta_stationary_cdf(kappa, rho, points=20001):
    """CDF on [0, 2 pi] of the density proportional to sin^{2(rho+2)/kappa}(theta/2)."""
    p = 2.0 * (rho + 2.0) / kappa
    x = np.linspace(0.0, 2.0 * math.pi, points)
    f = np.sin(0.5 * x) ** p
    F = integrate.cumulative_trapezoid(f, x, initial=0.0)
    F /= F[-1]
    return lambda t: np.interp(t, x, F)


def crossing_budget(alpha, chi):
    """Allowed crossings for two flow lines near a singularity of strength alpha."""
    return int(math.floor(1.0 / (2.0 * (1.0 + alpha / chi)))) + 1


# --- flow checks -------------------------------------------------------------

def _inside(pts, half):
    return bool(np.all((np.abs(pts.real) <= half) & (np.abs(pts.imag) <= half)))


def test_merging(cfg, seeds):
    c = params.derive_constants(cfg["kappa"])
    n = cfg["n"]
    opts = flow.FlowOptions(step=cfg["step"])
    half = cfg["half_window"]
    total = merged = inside = merged_inside = 0
    for s in seeds:
        g = gff.sample_zero_boundary(n, 2.0 / (n - 1), seed=s)
        rng = _rng(s)
        for _ in range(cfg["pairs"]):
            z = rng.uniform(-half, half, 2) + 1j * rng.uniform(-half, half, 2)
            if cfg.get("coincide"):
                z[1] = z[0] + 1e-9  # starts must be distinct; this is well inside the merge tolerance
            th = rng.uniform(0.0, 2.0 * math.pi)
            F = flow.build_forest(g, c, z, th, opts)
            a, b = F.lines
            m = b.merged
            own_a = a.points[:b.target[1] + 1] if m else a.points
            ok = _inside(own_a, half) and _inside(b.points[:b.n_own], half)
            total += 1
            merged += m
            inside += ok
            merged_inside += ok and m
    frac = merged_inside / inside if inside else float("nan")
    return TestReport("merging", inside, merged_inside, frac, cfg["threshold"], ">=", seeds,
                      {"pairs": total, "merged_all": merged, "fraction_all": merged / total,
                       "pairs_inside": inside})


def _ray_pair(g, c, s, gap, step):
    rng = _rng(s)
    z = complex(*rng.uniform(-0.5, 0.5, 2))
    th = rng.uniform(0.0, 2.0 * math.pi)
    opts = flow.FlowOptions(step=step, merge=False)
    a = flow.trace_flow_line(g, c, z, th, opts)
    b = flow.trace_flow_line(g, c, z, th + gap, opts)
    return z, a, b


def contact(a, b, z, step, tol):
    """Whether two lines from the common start z touch away from z."""
    ap = a.points[np.abs(a.points - z) > 10 * step]
    bp = b.points[np.abs(b.points - z) > 10 * step]
    if len(ap) == 0 or len(bp) == 0:
        return False
    return flow.min_distance(ap, bp) < tol


def test_crossing_bound(cfg, seeds):
    c = params.derive_constants(cfg["kappa"])
    n = cfg["n"]
    step = cfg["step"]
    tol = 1.5 * step
    budget = crossing_budget(cfg.get("alpha", 0.0), c.chi)
    violations = 0
    counts = {}
    touch = {}
    for f in cfg["gaps"]:
        counts[f] = []
        touch[f] = 0
    for s in seeds:
        g = gff.whole_plane_approx(n, 4, seed=s, spacing=2.0 / (n - 1))
        for f in cfg["gaps"]:
            z, a, b = _ray_pair(g, c, s, f * c.critical_angle, step)
            k = flow.count_crossings(a, b, tol)
            counts[f].append(k)
            violations += k > budget
            touch[f] += contact(a, b, z, step, tol)
    trials = len(seeds) * len(cfg["gaps"])
    details = {"budget": budget,
               "max_crossings": {str(f): int(max(v)) for f, v in counts.items()},
               "contact_fraction": {str(f): touch[f] / len(seeds) for f in cfg["gaps"]}}
    return TestReport("crossing_bound", trials, trials - violations, violations, 0, "<=", seeds, details)


# --- Loewner checks ----------------------------------------------------------

def _wholeplane_trace(kappa, rho, s, cfg, mu=0.0, every=1):
    spec = loewner.DriverSpec("whole_plane", kappa, ((rho, None),), mu=mu, dt=cfg["dt"],
                              horizon=cfg["horizon"], burn_in=cfg["burn_in"], seed=s, t0=cfg["t0"])
    return loewner.loewner_trace(loewner.drive(spec), resolution=cfg.get("resolution", 1), every=every)


def test_multiplicity(cfg, seeds):
    """Simple phase, touching phase and the self-hit bound, with a tolerance sweep."""
    out = []
    sweep = cfg.get("sweep", [])

    def observe(case):
        obs, swept = [], {f: [] for f in sweep}
        for s in seeds:
            pts = _wholeplane_trace(case["kappa"], case["rho"], s, cfg).points
            obs.append(loewner.multiplicity(pts, cfg["factor"]))
            for f in sweep:
                swept[f].append(loewner.multiplicity(pts, f))
        det = {"kappa": case["kappa"], "rho": case["rho"], "observed": obs,
               "sweep_max": {f"{f:g}": max(v) for f, v in swept.items()}}
        return obs, det

    simple = cfg["simple"]
    m1, det = observe(simple)
    out.append(TestReport("multiplicity_simple", len(seeds), sum(m == 1 for m in m1), max(m1), 1, "<=",
                          seeds, det))
    touch = cfg["touching"]
    bound = params.max_self_hits(touch["kappa"], touch["rho"])
    m2, det = observe(touch)
    det["bound"] = bound
    frac = sum(m >= 2 for m in m2) / len(seeds)
    out.append(TestReport("multiplicity_touching", len(seeds), sum(m >= 2 for m in m2), frac,
                          cfg["touching_fraction"], ">=", seeds, det))
    out.append(TestReport("multiplicity_bound", len(seeds), sum(m <= bound for m in m2), max(m2), bound,
                          "<=", seeds, det))
    return out


def test_theta_stationary(cfg, seeds):
    worst = 0.0
    per = {}
    chains = cfg["chains"]
    for i, (kappa, rho) in enumerate(cfg["pairs"]):
        use = seeds[i * chains:(i + 1) * chains]
        xs = np.concatenate([
            loewner.theta_samples(kappa, rho, dt=cfg["dt"], burn_in=cfg["burn_in"],
                                  spacing=cfg["spacing"], count=cfg["count"], seed=s)
            for s in use])
        d = float(sps.kstest(xs, theta_stationary_cdf(kappa, rho)).statistic)
        per[f"{kappa:g},{rho:g}"] = {"ks": d, "samples": int(len(xs))}
        worst = max(worst, d)
    passes = sum(v["ks"] < cfg["threshold"] for v in per.values())
    return TestReport("theta_stationary", len(per), passes, worst, cfg["threshold"], "<", seeds, per)


def test_beta_recovery(cfg, seeds):
    c = params.derive_constants(cfg["kappa"])
    per = {}
    worst = 0.0
    k = cfg["runs"]
    for i, beta in enumerate(cfg["betas"]):
        mu = params.mu_from_beta(cfg["kappa"], beta)
        est = []
        for s in seeds[i * k:(i + 1) * k]:
            tr = _wholeplane_trace(cfg["kappa"], cfg["rho"], s, cfg, mu=mu)
            est.append(loewner.winding_beta_estimate(tr, c, alpha=cfg["alpha"], max_range=cfg["range"]))
        m = float(np.mean(est))
        per[f"{beta:g}"] = {"mean": m, "stderr": float(np.std(est, ddof=1) / math.sqrt(len(est)))}
        worst = max(worst, abs(m - beta))
    passes = sum(abs(v["mean"] - float(b)) <= cfg["threshold"] for b, v in per.items())
    return TestReport("beta_recovery", len(per), passes, worst, cfg["threshold"], "<=", seeds, per)


def test_transience(cfg, seeds):
    per = {}
    worst = 1.0
    k = cfg["runs"]
    passes = 0
    for i, (kappa, rho) in enumerate(cfg["pairs"]):
        ok = 0
        mono = 0
        for s in seeds[i * k:(i + 1) * k]:
            tr = _wholeplane_trace(kappa, rho, s, cfg, every=cfg["every"])
            r = np.abs(tr.points)
            mid = r[np.searchsorted(tr.times, tr.times[0] + 0.5 * (tr.times[-1] - tr.times[0]))]
            ok += r[-1] >= cfg["ratio"] * mid
            # running minimum of the future modulus is nondecreasing by
            # construction; what can fail is that it keeps growing
            fut = np.minimum.accumulate(r[::-1])[::-1]
            mono += fut[-1] > fut[len(fut) // 2]
        frac = ok / k
        per[f"{kappa:g},{rho:g}"] = {"fraction": frac, "future_min_growth": mono / k}
        passes += ok
        worst = min(worst, frac)
    return TestReport("transience", k * len(cfg["pairs"]), passes, worst, cfg["threshold"], ">=", seeds, per)


def test_twisting(cfg, seeds):
    worst = 0.0
    rows = []
    for s in seeds:
        spec = loewner.DriverSpec("radial", cfg["kappa"], ((cfg["rho"], None),), dt=cfg["dt"],
                                  horizon=cfg["horizon"], seed=s)
        d = loewner.drive(spec)
        tr = loewner.loewner_trace(d, resolution=cfg["resolution"])
        for eps in cfg["epsilons"]:
            N = loewner.winding_count(tr, eps)
            tw = loewner.twisting(d, tr, eps)
            gap = abs(2.0 * math.pi * N - tw)
            rows.append(gap)
            worst = max(worst, gap)
    passes = sum(g <= cfg["threshold"] for g in rows)
    return TestReport("twisting", len(rows), passes, worst, cfg["threshold"], "<=", seeds,
                      {"mean_gap": float(np.mean(rows))})


# --- space-filling checks ----------------------------------------------------

def test_order_soundness(cfg, seeds):
    sc = spacefill.SpaceFillConfig(cfg["kappa_prime"], mesh=cfg["coarse"])
    c = sc.constants
    bad = 0
    agree = []
    for k, s in enumerate(seeds):
        g = spacefill.sample_field(sc, cfg["n"], s)
        if k < cfg["exhaustive"]:
            o = spacefill.order_points(g, c, sc)
            bad += spacefill.check_total_order(o)
        agree.append(spacefill.refinement_agreement(g, c, sc, cfg["coarse"], cfg["fine"]))
    out = [TestReport("order_total", min(cfg["exhaustive"], len(seeds)), min(cfg["exhaustive"], len(seeds)) - (bad > 0),
                      bad, 0, "<=", seeds[:cfg["exhaustive"]], {"mesh": cfg["coarse"]}),
           TestReport("order_refinement", len(seeds), sum(a >= cfg["threshold"] for a in agree), min(agree),
                      cfg["threshold"], ">=", seeds, {"mean": float(np.mean(agree)), "agreement": agree})]
    return out


def reversal_orders(sc, seeds, n):
    """Forward orders and independent reverse-direction orders, one pair per two seeds."""
    rc = sc.reversed()
    c = sc.constants
    fwd, rev = [], []
    for k in range(len(seeds) // 2):
        fwd.append(spacefill.order_points(spacefill.sample_field(sc, n, seeds[2 * k]), c, sc))
        rev.append(spacefill.order_points(spacefill.sample_field(rc, n, seeds[2 * k + 1]), c, rc))
    return fwd, rev


def test_reversal(cfg, seeds):
    out = []
    half = len(seeds) // 2
    for name, case, rule, use in (("reversal_centered", cfg["centered"], ">", seeds[:half]),
                                  ("reversal_asymmetric", cfg["asymmetric"], "<", seeds[half:])):
        sc = spacefill.SpaceFillConfig(case["kappa_prime"], case.get("rho1"), case.get("rho2"), mesh=cfg["mesh"])
        fwd, rev = reversal_orders(sc, use, cfg["n"])
        stat, p = spacefill.reversal_symmetry_stat(fwd, rev, spacefill.default_probes(cfg["mesh"]))
        out.append(TestReport(name, len(fwd), len(fwd), p, cfg["alpha"], rule, use,
                              {"kappa_prime": sc.kappa_prime, "rho": [sc.rho1, sc.rho2], "ks": stat}))
    return out


CHECKS = {
    "merging": test_merging,
    "crossing_bound": test_crossing_bound,
    "multiplicity": test_multiplicity,
    "theta_stationary": test_theta_stationary,
    "beta_recovery": test_beta_recovery,
    "transience": test_transience,
    "twisting": test_twisting,
    "order_soundness": test_order_soundness,
    "reversal": test_reversal,
}


def run_check(name, golden=None, manifest=None, overrides=None):
    """Run one named check from the golden configuration; returns a list of reports."""
    if name not in CHECKS:
        raise KeyError(f"unknown test {name!r}; choose from {sorted(CHECKS)}")
    golden = golden or load_golden()
    spec = golden["tests"][name]
    cfg = dict(spec["config"])
    cfg.update(overrides or {})
    if manifest is not None:
        seeds = manifest["seeds"][name]
    else:
        seeds = trial_seeds(golden["root_seed"], name, spec["trials"])
    t = time.perf_counter()
    res = CHECKS[name](cfg, seeds)
    dt = time.perf_counter() - t
    res = res if isinstance(res, list) else [res]
    for r in res:
        r.group = name
        r.runtime = dt
    return res


def summary_rows(reports):
    return [(r.name, r.verdict, r.statistic, r.rule, r.threshold, r.passes, r.trials) for r in reports]


def format_table(reports, runtimes=True):
    head = f"{'test':24s} {'verdict':7s} {'statistic':>12s} {'rule':4s} {'threshold':>10s} {'passes':>8s}"
    if runtimes:
        head += f" {'seconds':>8s}"
    lines = [head]
    for r in reports:
        row = (f"{r.name:24s} {r.verdict:7s} {r.statistic:12.6g} {r.rule:4s} {r.threshold:10.6g} "
               f"{r.passes:>4d}/{r.trials:<3d}")
        if runtimes:
            row += f" {r.runtime:8.1f}"
        lines.append(row)
    return "\n".join(lines)
