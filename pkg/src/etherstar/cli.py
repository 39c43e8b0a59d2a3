"""Command line front end.

Subcommands: check (invariant suites), kernel (kernel tables over a
grid), star (quadrature star products of Gaussians), evolve
(semiclassical evolution symbols with an optional operator oracle),
and quantize-check (the integrality condition).

Reports are JSON (schema 1, sorted keys) or RFC 4180 CSV with the same
numeric content; a fixed seed fixes the report bytes.  Wall times are
printed to stderr only, so files stay reproducible.  Exit codes:
0 pass, 1 check failure, 2 usage or config error, 3 numerical failure.
"""

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import evolution, geometry, kernel, numerics, starprod, suites
from .errors import (ChartDomainError, FocalTime, FocalTriple,
                     IntegratorError, MembraneChartError, NewtonDiverged,
                     OffManifoldError, QuadratureError, SymbolError,
                     TruncationError)

SCHEMA = 1
EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
QUANTIZE_TOL = 1e-6

_USAGE_ERRORS = (ValueError, OSError, OffManifoldError, ChartDomainError)
_NUMERIC_ERRORS = (NewtonDiverged, IntegratorError, TruncationError,
                   QuadratureError, SymbolError)


def _parse_point(text, size):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != size:
        raise ValueError("point %r needs %d components" % (text, size))
    return np.array(vals)


def _parse_points(text, size):
    pts = [_parse_point(c, size) for c in text.split(";") if c.strip()]
    if not pts:
        raise ValueError("empty point list")
    return pts


def _parse_grid(text):
    """Row-major 2d grid from "q0:q1:nq,p0:p1:np"."""
    axes = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise ValueError("grid axis %r is not start:stop:count" % part)
        a, b, n = float(bits[0]), float(bits[1]), int(bits[2])
        if n < 1:
            raise ValueError("grid axis count must be positive")
        axes.append(np.linspace(a, b, n))
    if len(axes) != 2:
        raise ValueError("grid spec needs exactly two axes")
    qq, pp = np.meshgrid(axes[0], axes[1], indexing="ij")
    return [np.array([q, p]) for q, p in zip(qq.ravel(), pp.ravel())]


def _parse_floats(text):
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty number list")
    return vals


def _parse_gaussian(text):
    vals = _parse_floats(text)
    if len(vals) not in (3, 4):
        raise ValueError(
            "gaussian spec %r is not cq,cp,sigma[,height]" % text)
    height = vals[3] if len(vals) == 4 else 1.0
    if vals[2] <= 0:
        raise ValueError("gaussian sigma must be positive")
    return starprod.gaussian_symbol(np.array(vals[:2]), vals[2], height)


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit(header, rows, fmt, out):
    """Write the report; JSON carries the header, CSV the rows."""
    if fmt == "json":
        payload = dict(header)
        payload["schema"] = SCHEMA
        payload["rows"] = rows
        text = json.dumps(payload, sort_keys=True, indent=2,
                          allow_nan=False) + "\n"
    else:
        buf = io.StringIO()
        if rows:
            cols = list(rows[0].keys())
            writer = csv.writer(buf, lineterminator="\r\n")
            writer.writerow(cols)
            for r in rows:
                writer.writerow(
                    ["" if r[c] is None else _cell(r[c]) for c in cols])
        text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load_config(path):
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError("config file must hold a JSON object")
    return obj


def _merge(args, defaults):
    """Defaults, then config file values, then explicit flags."""
    opts = dict(defaults)
    for key, val in _load_config(getattr(args, "config", None)).items():
        key = key.replace("-", "_")
        if key not in opts:
            raise ValueError("unknown config key %r" % key)
        opts[key] = val
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if "hbar" in opts and float(opts["hbar"]) <= 0:
        raise ValueError("hbar must be positive")
    return opts


def _header(command, opts, extra=None):
    head = {
        "command": command,
        "manifold": opts.get("manifold"),
        "hbar": float(opts["hbar"]) if opts.get("hbar") is not None else None,
        "seed": int(opts["seed"]),
    }
    head.update(extra or {})
    return head


def cmd_check(opts):
    """Run the invariant suites and report per-check rows.

    Returns the process exit code: 0 when every check passes.
    """
    m = geometry.get_model(opts["manifold"])
    rows = suites.run_all(m, float(opts["hbar"]), int(opts["seed"]),
                          float(opts["samples_scale"]))
    failed = sum(1 for r in rows if r["status"] != "pass")
    for r in rows:
        print("%-4s %-36s %.3e / %.0e  n=%d skip=%d  %.2fs"
              % (r["status"], r["name"], r["residual"], r["tol"],
                 r["samples"], r["skipped"], r["seconds"]), file=sys.stderr)
    out_rows = [{k: v for k, v in r.items() if k != "seconds"} for r in rows]
    summary = {
        "status": "pass" if failed == 0 else "fail",
        "checks": len(rows),
        "failed": failed,
        "skipped": int(sum(r["skipped"] for r in rows)),
    }
    _emit(_header("check", opts, {"summary": summary}), out_rows,
          opts["format"], opts["out"])
    return EXIT_PASS if failed == 0 else EXIT_FAIL


def cmd_kernel(opts):
    """Tabulate kernel phase, amplitude, and value over a z grid.

    Rows come per z point and per branch; focal and membrane-chart
    failures are flagged in place rather than dropped.
    """
    m = geometry.get_model(opts["manifold"])
    size = 3 if m.model_id == "sphere" else m.dim
    # typed sphere points are projected onto the manifold
    x = m.check_point(m.project(_parse_point(opts["x"], size)))
    y = m.check_point(m.project(_parse_point(opts["y"], size)))
    if opts.get("z"):
        zpts = [m.check_point(m.project(p))
                for p in _parse_points(opts["z"], size)]
    elif opts.get("zgrid"):
        if m.model_id == "sphere":
            raise ValueError("sphere kernels need --z points, not --zgrid")
        zpts = _parse_grid(opts["zgrid"])
    else:
        raise ValueError("kernel needs --z or --zgrid")
    hbar = float(opts["hbar"])
    names = (("z_x", "z_y", "z_z") if m.model_id == "sphere"
             else ("z_q", "z_p"))
    rows = []
    flagged = 0
    for iz, z in enumerate(zpts):
        for branch in range(m.branch_count):
            row = {"iz": iz, "branch": branch}
            row.update({k: float(c) for k, c in zip(names, z)})
            row.update({"phase": None, "amplitude": None,
                        "re": None, "im": None, "flag": ""})
            try:
                kv = kernel.kernel_value(m, x, y, z, hbar, branch)
                row["phase"] = float(kv.phase)
                row["amplitude"] = float(kv.amplitude)
                row["re"] = float(kv.value.real)
                row["im"] = float(kv.value.imag)
            except FocalTriple:
                row["flag"] = "focal"
                flagged += 1
            except MembraneChartError:
                # the triangle solved, so the amplitude may still exist
                try:
                    row["amplitude"] = float(
                        kernel.amplitude(m, x, y, z, branch))
                    row["flag"] = "membrane-chart"
                except FocalTriple:
                    row["flag"] = "focal"
                flagged += 1
            rows.append(row)
    summary = {"rows": len(rows), "flagged": flagged}
    _emit(_header("kernel", opts, {"summary": summary}), rows,
          opts["format"], opts["out"])
    if flagged == len(rows):
        print("warning: every kernel row is flagged", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


def cmd_star(opts):
    """Tabulate the quadrature star product of two Gaussians."""
    m = geometry.get_model(opts["manifold"])
    if m.model_id != "flat:1":
        raise ValueError("star tabulation is implemented for flat:1")
    f = _parse_gaussian(opts["f"])
    g = _parse_gaussian(opts["g"])
    if opts.get("z"):
        zpts = _parse_points(opts["z"], 2)
    elif opts.get("zgrid"):
        zpts = _parse_grid(opts["zgrid"])
    else:
        raise ValueError("star needs --z or --zgrid")
    hbar = float(opts["hbar"])
    cfg = starprod.QuadConfig(nodes=int(opts["nodes"]),
                              check=bool(opts["check"]))
    vals = np.atleast_1d(starprod.quad_product(f, g, np.array(zpts),
                                               hbar, cfg))
    rows = []
    for iz, (z, v) in enumerate(zip(zpts, vals)):
        rows.append({"iz": iz, "z_q": float(z[0]), "z_p": float(z[1]),
                     "re": float(v.real), "im": float(v.imag)})
    _emit(_header("star", opts, {"summary": {"rows": len(rows)}}), rows,
          opts["format"], opts["out"])
    return EXIT_PASS


def cmd_evolve(opts):
    """Tabulate evolution symbols over times and phase points.

    The --oracle flag adds operator-oracle columns and relative errors;
    --hbar-sweep appends an order-fit block (JSON only).
    """
    m = geometry.get_model(opts["manifold"])
    if m.model_id != "flat:1":
        raise ValueError("evolution is implemented for flat:1")
    poly = starprod.PolySymbol.parse(opts["hamiltonian"])
    field = starprod.poly_field(poly)
    ts = _parse_floats(opts["t"])
    xs = _parse_points(opts["x"], 2)
    hbar = float(opts["hbar"])
    dim = int(opts["dim"])
    want_oracle = bool(opts["oracle"]) or opts.get("hbar_sweep")
    rows = []
    flagged = 0
    for it, t in enumerate(ts):
        for ix, xg in enumerate(xs):
            row = {"it": it, "ix": ix, "t": float(t),
                   "x_q": float(xg[0]), "x_p": float(xg[1]),
                   "re": None, "im": None, "phase": None,
                   "amplitude": None, "method": "semiclassical",
                   "flag": ""}
            if want_oracle:
                row.update({"oracle_re": None, "oracle_im": None,
                            "rel_err": None})
            try:
                sv = evolution.evolution_symbol(field, xg, t, hbar)
                row.update({"re": float(sv.value.real),
                            "im": float(sv.value.imag),
                            "phase": float(sv.phase),
                            "amplitude": float(sv.amplitude)})
            except FocalTime:
                row["flag"] = "focal"
                flagged += 1
                rows.append(row)
                continue
            if want_oracle:
                # the oracle refuses where its spectral sum has not
                # converged; those rows stay, flagged, without values
                try:
                    ov = evolution.oracle_symbol(poly, xg, t, hbar, dim)
                except TruncationError:
                    row["flag"] = "truncation"
                    flagged += 1
                else:
                    row["oracle_re"] = float(ov.real)
                    row["oracle_im"] = float(ov.imag)
                    row["rel_err"] = float(abs(sv.value - ov) / abs(ov))
            rows.append(row)
    extra = {"summary": {"rows": len(rows), "flagged": flagged}}
    if opts.get("hbar_sweep"):
        if opts["format"] == "csv":
            raise ValueError("--hbar-sweep reports are JSON only")
        hbars = _parse_floats(opts["hbar_sweep"])
        diffs = []
        for hb in hbars:
            worst = 0.0
            for t in ts:
                for xg in xs:
                    sv = evolution.evolution_symbol(field, xg, t, hb)
                    ov = evolution.oracle_symbol(poly, xg, t, hb, dim)
                    worst = max(worst, abs(sv.value - ov))
            diffs.append(worst)
        extra["sweep"] = {
            "hbars": [float(h) for h in hbars],
            "max_diff": [float(d) for d in diffs],
            "slope": float(numerics.loglog_slope(hbars, diffs)),
        }
    _emit(_header("evolve", opts, extra), rows, opts["format"], opts["out"])
    if rows and flagged == len(rows):
        print("warning: every evolve row is focal", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


def cmd_quantize_check(opts):
    """Check the integrality condition for the model and hbar.

    Flat phase space reports a vacuous pass; the sphere compares the
    mesh-quadrature symplectic volume against the Chern metadata.
    """
    m = geometry.get_model(opts["manifold"])
    hbar = float(opts["hbar"])
    if m.model_id != "sphere":
        row = {"manifold": m.model_id, "hbar": hbar, "status": "vacuous",
               "omega_integral": None, "c1_integral": None, "value": None,
               "nearest": None, "distance": None}
        _emit(_header("quantize-check", opts,
                      {"summary": {"status": "vacuous"}}),
              [row], opts["format"], opts["out"])
        return EXIT_PASS
    mesh = int(opts["mesh"])
    pts, wts = numerics.sphere_area_grid(mesh, 2 * mesh)
    # Pfaffian of omega in the oriented orthonormal frame is 1 at every
    # point, so the mesh sum is the symplectic volume.
    pf = np.array([abs(m.omega_at(p)[1, 0]) for p in pts])
    omega_integral = float(np.sum(wts * pf))
    c1 = float(m.chern_integral)
    value = omega_integral / (2.0 * np.pi * hbar) - 0.5 * c1
    nearest = float(np.round(value))
    distance = abs(value - nearest)
    status = "pass" if distance <= QUANTIZE_TOL else "fail"
    row = {"manifold": m.model_id, "hbar": hbar, "status": status,
           "omega_integral": omega_integral, "c1_integral": c1,
           "value": float(value), "nearest": nearest,
           "distance": float(distance)}
    _emit(_header("quantize-check", opts, {"summary": {"status": status}}),
          [row], opts["format"], opts["out"])
    return EXIT_PASS if status == "pass" else EXIT_FAIL


def _add_common(sub, manifold="flat:1", hbar=0.2):
    sub.add_argument("--manifold", help="flat:<n> or sphere")
    sub.add_argument("--hbar", type=float, help="Planck constant")
    sub.add_argument("--seed", type=int, help="generator seed")
    sub.add_argument("--format", choices=("json", "csv"),
                     help="report format")
    sub.add_argument("--out", help="output path, - for stdout")
    sub.add_argument("--config", help="JSON config merged under flags")
    return {"manifold": manifold, "hbar": hbar, "seed": 0,
            "format": "json", "out": "-", "config": None}


def build_parser():
    """Construct the argparse command tree."""
    parser = argparse.ArgumentParser(
        prog="etherstar",
        description="Star product kernels and intrinsic dynamics.")
    subs = parser.add_subparsers(dest="cmd", required=True)

    sub = subs.add_parser("check", help="run the invariant suites")
    defaults = _add_common(sub)
    sub.add_argument("--samples-scale", dest="samples_scale", type=float,
                     help="multiplier on suite sample counts")
    defaults["samples_scale"] = 1.0
    sub.set_defaults(func=cmd_check, defaults=defaults)

    sub = subs.add_parser("kernel", help="tabulate kernel values")
    defaults = _add_common(sub)
    sub.add_argument("--x", help="first base point")
    sub.add_argument("--y", help="second base point")
    sub.add_argument("--z", help="semicolon list of z points")
    sub.add_argument("--zgrid", help="flat grid q0:q1:nq,p0:p1:np")
    defaults.update({"x": "0.3,0.1", "y": "-0.2,0.4", "z": None,
                     "zgrid": None})
    sub.set_defaults(func=cmd_kernel, defaults=defaults)

    sub = subs.add_parser("star", help="quadrature star product table")
    defaults = _add_common(sub)
    sub.add_argument("--f", help="gaussian cq,cp,sigma[,height]")
    sub.add_argument("--g", help="gaussian cq,cp,sigma[,height]")
    sub.add_argument("--z", help="semicolon list of z points")
    sub.add_argument("--zgrid", help="grid q0:q1:nq,p0:p1:np")
    sub.add_argument("--nodes", type=int, help="quadrature nodes per axis")
    sub.add_argument("--check", action="store_const", const=True,
                     help="verify by node doubling")
    defaults.update({"f": "0.1,-0.2,0.35", "g": "-0.2,0.1,0.3", "z": None,
                     "zgrid": None, "nodes": 48, "check": False})
    sub.set_defaults(func=cmd_star, defaults=defaults)

    sub = subs.add_parser("evolve", help="evolution symbol table")
    defaults = _add_common(sub)
    sub.add_argument("--hamiltonian", help="polynomial like 0.5q^2+0.5p^2")
    sub.add_argument("--t", help="comma list of times")
    sub.add_argument("--x", help="semicolon list of phase points")
    sub.add_argument("--oracle", action="store_const", const=True,
                     help="add operator-oracle columns")
    sub.add_argument("--dim", type=int, help="oracle basis dimension")
    sub.add_argument("--hbar-sweep", dest="hbar_sweep",
                     help="comma list of hbar values for an order fit")
    defaults.update({"hamiltonian": "0.5q^2 + 0.5p^2", "t": "0.5,1.0",
                     "x": "0.4,-0.3", "oracle": False, "dim": 128,
                     "hbar_sweep": None})
    sub.set_defaults(func=cmd_evolve, defaults=defaults)

    sub = subs.add_parser("quantize-check",
                          help="integrality of the quantization condition")
    defaults = _add_common(sub, manifold="sphere", hbar=1.0)
    sub.add_argument("--mesh", type=int, help="polar mesh count")
    defaults["mesh"] = 96
    sub.set_defaults(func=cmd_quantize_check, defaults=defaults)
    return parser


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge(args, args.defaults)
        return args.func(opts)
    except _USAGE_ERRORS as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as e:
        print("config error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as e:
        print("numerical failure: %s" % e, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
