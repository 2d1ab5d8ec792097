"""Command line front end: ``imgeo gff|flow|sle|spacefill|verify``.

Each run writes its outputs plus ``manifest.json`` (full config, package
versions and the sha256 of every output) into ``--out``.  A manifest can
be fed back through ``--config`` to replay the run.
"""

import argparse
import colorsys
import csv
import hashlib
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, flow, gff, loewner, params, spacefill, stats

SEED_ENV = "IMGEO_SEED"

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "n": 200,
    "kappa": 2.0,
    "rho": 0.0,
    "alpha": 0.0,
    "beta": 0.0,
    "theta": 0.0,
    "mesh": 32,
    "dt": 1e-3,
    "horizon": 6.0,
    "burn_in": 50.0,
    "kind": "whole_plane",
    "t0": -3.0,
    "resolution": 1,
    "starts": 1,
    "step": None,
    "angles": None,
    "eps": None,
    "size": 512,
    "rho1": None,
    "rho2": None,
    "kappa_prime": None,
    "direction": "up",
    "reverse": False,
    "samples": 1,
    "test": None,
}


class ConfigError(ValueError):
    pass


# --- output helpers ----------------------------------------------------------

def write_ppm(path, rgb):
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(rgb.tobytes())


def gray(values):
    v = np.asarray(values, float)
    lo, hi = np.min(v), np.max(v)
    u = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    g = np.round(255 * u).astype(np.uint8)
    # row 0 of the grid is the bottom, row 0 of the image the top
    return np.repeat(g[::-1, :, None], 3, axis=2)


def hue_rgb(h):
    r, g, b = colorsys.hsv_to_rgb(h % 1.0, 0.9, 0.9)
    return np.array([r, g, b]) * 255


def draw_polylines(lines, window, size, background=255):
    """Rasterize (points, rgb) pairs onto a size x size image of the window."""
    x0, y0, x1, y1 = window
    img = np.full((size, size, 3), background, np.uint8)
    for pts, rgb in lines:
        pts = np.asarray(pts, complex)
        if len(pts) > 1:
            # resample so that consecutive points are under a pixel apart
            seg = np.abs(np.diff(pts))
            s = np.concatenate([[0.0], np.cumsum(seg)])
            px = (x1 - x0) / size
            m = max(2, int(s[-1] / (0.5 * px)) + 1)
            u = np.linspace(0.0, s[-1], m)
            pts = np.interp(u, s, pts.real) + 1j * np.interp(u, s, pts.imag)
        i = np.floor((pts.real - x0) / (x1 - x0) * size).astype(int)
        j = np.floor((y1 - pts.imag) / (y1 - y0) * size).astype(int)
        ok = (i >= 0) & (i < size) & (j >= 0) & (j < size)
        img[j[ok], i[ok]] = np.asarray(rgb, np.uint8)
    return img


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions():
    import numba
    import scipy
    return {"imgeo": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def write_manifest(out, command, cfg, files):
    manifest = {
        "command": command,
        "config": cfg,
        "versions": versions(),
        "seed_scheme": "numpy SeedSequence(seed) spawned per component; see README",
        "outputs": {Path(p).name: sha256(p) for p in sorted(files)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{x:.12g}" if isinstance(x, float) else x for x in r])


# --- subcommands -------------------------------------------------------------

def _field(cfg):
    n = int(cfg["n"])
    if n < 3:
        raise ConfigError(f"n={n} must be at least 3")
    g = gff.whole_plane_approx(n, 4, seed=cfg["seed"], spacing=2.0 / (n - 1))
    if cfg["alpha"] or cfg["beta"]:
        g = gff.add_singularity(g, 0j, cfg["alpha"], cfg["beta"])
    return g


def cmd_gff(cfg, out):
    if cfg.get("kappa") is not None:
        params.derive_constants(cfg["kappa"])
    g = _field(cfg)
    files = [out / "field.ppm"]
    write_ppm(files[0], gray(g.values))
    files += [Path(p) for p in gff.save_grid(g, out / "field.grid")]
    return files


def cmd_flow(cfg, out):
    c = params.derive_constants(cfg["kappa"])
    g = _field(cfg)
    step = cfg["step"] or g.spacing / 5
    opts = flow.FlowOptions(step=step, max_steps=int(40 * g.n * g.spacing / step))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg["seed"], 7])))
    k = int(cfg["starts"])
    if k < 1:
        raise ConfigError(f"starts={k} must be positive")
    x0, y0, x1, y1 = g.window
    if k == 1:
        starts = np.array([0.5 * (x0 + x1) + 0.25 + 0.5j * (y0 + y1) + 0.25j])
    else:
        starts = rng.uniform(x0, x1, k) + 1j * rng.uniform(y0, y1, k)
    angles = cfg["angles"] if cfg["angles"] else [cfg["theta"]]
    rows, lines = [], []
    for th in angles:
        F = flow.build_forest(g, c, starts, th, opts)
        rgb = hue_rgb(th / (2 * math.pi))
        for ln in F.lines:
            for j, p in enumerate(ln.points):
                rows.append((float(th), ln.id, j, float(p.real), float(p.imag)))
            lines.append((ln.points, rgb))
    files = [out / "lines.csv", out / "flow.ppm"]
    write_csv(files[0], ["theta", "line", "k", "x", "y"], rows)
    write_ppm(files[1], draw_polylines(lines, g.window, int(cfg["size"])))
    return files


def cmd_sle(cfg, out):
    kind = cfg["kind"]
    if kind == "whole_plane" and not cfg["burn_in"] > 0:
        raise ConfigError("burn_in must be > 0 for whole-plane runs")
    if not cfg["kappa"] > 0:
        raise ConfigError(f"kappa={cfg['kappa']} must be positive")
    mu = params.mu_from_beta(cfg["kappa"], cfg["beta"]) if kind != "chordal" else 0.0
    pos = 0.0 if kind == "chordal" else None
    weights = ((cfg["rho"], pos),) if kind != "chordal" or cfg["rho"] else ()
    spec = loewner.DriverSpec(kind, cfg["kappa"], weights, mu=mu, dt=cfg["dt"],
                              horizon=cfg["horizon"], burn_in=cfg["burn_in"] if kind == "whole_plane" else 0.0,
                              seed=cfg["seed"], t0=cfg["t0"] if kind == "whole_plane" else 0.0)
    d = loewner.drive(spec)
    tr = loewner.loewner_trace(d, resolution=int(cfg["resolution"]))
    files = [out / "driver.csv", out / "trace.csv", out / "trace.ppm"]
    loewner.driver_to_csv(d, files[0])
    loewner.trace_to_csv(tr, files[1])
    r = float(np.max(np.abs(tr.points))) * 1.05 or 1.0
    win = (-r, -r, r, r) if kind != "chordal" else (-r, 0.0, r, 2 * r)
    write_ppm(files[2], draw_polylines([(tr.points, (20, 20, 120))], win, int(cfg["size"])))
    report = {"kind": kind, "points": int(len(tr.points))}
    if kind == "whole_plane" and 0 < cfg["kappa"] < 4:
        c = params.derive_constants(cfg["kappa"])
        try:
            report["beta_estimate"] = loewner.winding_beta_estimate(tr, c, cfg["alpha"], max_range=5.0)
        except loewner.RangeError as e:
            report["beta_estimate"] = None
            report["beta_note"] = str(e)
    if kind == "radial" and cfg["eps"]:
        rows = []
        for e in cfg["eps"]:
            try:
                N = loewner.winding_count(tr, e)
                tw = loewner.twisting(d, tr, e)
                rows.append({"eps": e, "winding": N, "twisting": tw, "gap": abs(2 * math.pi * N - tw)})
            except loewner.RangeError as err:
                rows.append({"eps": e, "error": str(err)})
        report["twisting"] = rows
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    files.append(path)
    return files


def _spacefill_config(cfg, direction):
    kp = cfg["kappa_prime"]
    if kp is None:
        params.derive_constants(cfg["kappa"])
        kp = 16.0 / cfg["kappa"]
    return spacefill.SpaceFillConfig(kp, cfg["rho1"], cfg["rho2"], mesh=int(cfg["mesh"]), direction=direction)


def cmd_spacefill(cfg, out):
    sc = _spacefill_config(cfg, cfg["direction"])
    c = sc.constants
    n = 129
    g = spacefill.sample_field(sc, n, cfg["seed"])
    o = spacefill.order_points(g, c, sc)
    curve = spacefill.space_filling_curve(o)
    files = [out / "order.csv", out / "curve.csv", out / "spacefill.ppm"]
    write_csv(files[0], ["rank", "index", "x", "y"],
              [(r, int(i), float(o.points[i].real), float(o.points[i].imag)) for r, i in enumerate(o.order)])
    write_csv(files[1], ["k", "x", "y", "time"], [tuple(r) for r in spacefill.curve_rows(curve)])
    t = spacefill.time_grid(o)
    rgb = spacefill.time_colors(t)[::-1]
    scale = max(1, int(cfg["size"]) // sc.mesh)
    write_ppm(files[2], np.kron(rgb, np.ones((scale, scale, 1), np.uint8)))
    if cfg["reverse"]:
        k = int(cfg["samples"])
        seeds = np.random.SeedSequence(cfg["seed"]).generate_state(2 * k, np.uint32)
        rc = sc.reversed()
        fwd = [o] + [spacefill.order_points(spacefill.sample_field(sc, n, int(s)), c, sc) for s in seeds[:k - 1]]
        rev = [spacefill.order_points(spacefill.sample_field(rc, n, int(s)), c, rc) for s in seeds[k:]]
        probes = spacefill.default_probes(sc.mesh)
        if k == 1:
            stat, p = spacefill.reversal_symmetry_stat(fwd[0], rev[0], probes)
        else:
            stat, p = spacefill.reversal_symmetry_stat(fwd, rev, probes)
        path = out / "reversal.json"
        path.write_text(json.dumps({"samples": k, "ks": stat, "pvalue": p}, indent=2, sort_keys=True) + "\n")
        files.append(path)
    return files


def cmd_verify(cfg, out):
    """Run the selected checks; returns (files, all passed)."""
    names = cfg["test"] or sorted(stats.CHECKS)
    golden = stats.load_golden(cfg.get("golden"))
    manifest = stats.load_manifest(cfg.get("seed_manifest"))
    if manifest["root_seed"] != golden["root_seed"] or manifest["version"] != golden["version"]:
        raise ConfigError("seed manifest does not match the golden file; regenerate it")
    reports = []
    for name in names:
        res = stats.run_check(name, golden, manifest)
        for r in res:
            print(f"{r.name:24s} {r.verdict:4s}  statistic={r.statistic:.6g} {r.rule} {r.threshold:g}"
                  f"  ({r.runtime:.1f} s)", flush=True)
        reports.extend(res)
    files = [out / "reports.jsonl", out / "summary.csv"]
    with open(files[0], "w") as f:
        for r in reports:
            f.write(r.to_json() + "\n")
    write_csv(files[1], ["test", "verdict", "statistic", "rule", "threshold", "passes", "trials"],
              [tuple(float(x) if isinstance(x, (float, np.floating)) else x for x in row)
               for row in stats.summary_rows(reports)])
    print(stats.format_table(reports))
    return files, all(r.verdict == "pass" for r in reports)


COMMANDS = {"gff": cmd_gff, "flow": cmd_flow, "sle": cmd_sle, "spacefill": cmd_spacefill,
            "verify": cmd_verify}


# --- argument handling -------------------------------------------------------

def _floats(text):
    return [float(x) for x in text.split(",") if x]


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file whose keys mirror the flags (a manifest also works)")
    common.add_argument("--seed", type=int, help=f"root seed; {SEED_ENV} overrides it")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--kappa", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--mesh", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--horizon", type=float)
    common.add_argument("--burn-in", dest="burn_in", type=float)
    common.add_argument("--size", type=int, help="image side in pixels")
    common.add_argument("--n", type=int, help="field grid side")

    p = argparse.ArgumentParser(prog="imgeo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("gff", parents=[common], argument_default=argparse.SUPPRESS, help="sample and render a field")

    f = sub.add_parser("flow", parents=[common], argument_default=argparse.SUPPRESS, help="trace flow lines")
    f.add_argument("--starts", type=int, help="number of random starts (1 = a fixed start)")
    f.add_argument("--angles", type=_floats, help="comma separated angles; default --theta")
    f.add_argument("--step", type=float)

    s = sub.add_parser("sle", parents=[common], argument_default=argparse.SUPPRESS, help="driving function and trace")
    s.add_argument("--kind", choices=loewner.KINDS)
    s.add_argument("--t0", type=float)
    s.add_argument("--resolution", type=int)
    s.add_argument("--eps", type=_floats, help="radii for the twisting report (radial runs)")

    sf = sub.add_parser("spacefill", parents=[common], argument_default=argparse.SUPPRESS, help="space-filling order and render")
    sf.add_argument("--kappa-prime", dest="kappa_prime", type=float, help="instead of 16/--kappa")
    sf.add_argument("--rho1", type=float)
    sf.add_argument("--rho2", type=float)
    sf.add_argument("--direction", choices=spacefill.DIRECTIONS)
    sf.add_argument("--reverse", action="store_true", help="also emit the reversal statistic")
    sf.add_argument("--samples", type=int, help="field samples per direction for --reverse")

    v = sub.add_parser("verify", parents=[common], argument_default=argparse.SUPPRESS, help="run the Monte Carlo checks")
    v.add_argument("--test", action="append", help="check name (repeatable); default all")
    v.add_argument("--golden")
    v.add_argument("--seed-manifest", dest="seed_manifest")
    return p


def resolve(ns, env=None):
    """Defaults, then the config file, then explicit flags, then the seed variable."""
    env = os.environ if env is None else env
    given = vars(ns).copy()
    command = given.pop("command")
    cfg = dict(DEFAULTS)
    path = given.pop("config", None)
    if path:
        data = json.loads(Path(path).read_text())
        data = data.get("config", data)
        unknown = set(data) - set(DEFAULTS) - {"golden", "seed_manifest"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    cfg.update(given)
    if env.get(SEED_ENV):
        try:
            cfg["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env[SEED_ENV]!r} is not an integer")
    return command, cfg


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        command, cfg = resolve(ns)
        if command == "verify" and cfg["test"]:
            unknown = [t for t in cfg["test"] if t not in stats.CHECKS]
            if unknown:
                parser.error(f"unknown test {unknown[0]!r}; choose from {', '.join(sorted(stats.CHECKS))}")
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        ok = True
        if command == "verify":
            files, ok = cmd_verify(cfg, out)
        else:
            files = COMMANDS[command](cfg, out)
        write_manifest(out, command, {k: v for k, v in cfg.items() if k != "out"}, files)
    except (ConfigError, params.DomainError, loewner.SpecError, gff.GridError,
            spacefill.SpaceFillError) as e:
        print(f"imgeo {ns.command}: error: {e}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
