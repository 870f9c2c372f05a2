"""Command-line front end: table, verify, ode, edge.

Configuration is one JSON document merged with flags that override it field
by field; flag names mirror the JSON keys.  Numeric inputs travel as decimal
strings and are parsed under a fixed precision at the point of use, so the
emitted bytes depend only on the configuration, never on ambient state.
Every CSV row starts with a schema_version column; plot emission writes
plain-text gnuplot scripts that read the CSVs by name.

Exit codes: 0 everything requested passed (or there was nothing to check),
1 at least one residual exceeded its tolerance, 2 a configuration or
precision failure, 3 an ODE trajectory was truncated by a singularity.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timezone

import mpmath as mp

from . import painleve
from .context import make_context, mpf_str
from .errors import PhlabError, SingularityEncountered
from .fluid import edge_profile
from .ladder import (residual_compat, residual_lowering, residual_ode_pn,
                     residual_raising)
from .opsys import aux_quadrature, aux_recurrence, build_ops
from .painleve import CATALOG, default_tolerance, integrate_riccati, residual_identity
from .weight import WeightParams, moment_table, validate_params

SCHEMA_VERSION = "1"
_COMMANDS = ("table", "verify", "ode", "edge")

# inputs are parsed once at this precision; 60 digits round-trips any decimal
# string a user can reasonably type and exceeds every CSV emission width
_PARSE_DPS = 60

TABLE_CSV_SCHEMA = ("t", "n", "h_n", "p_n", "alpha_n", "beta_n", "R_n",
                    "r_n", "H_n", "sigma_n", "route", "digits")
VERIFY_CSV_SCHEMA = ("id", "n", "t", "residual_abs", "residual_rel", "tol",
                     "pass", "digits")
ODE_CSV_SCHEMA = ("t", "R_ode", "R_quad", "r_ode", "r_quad", "H_ode",
                  "H_quad", "abs_dR", "abs_dr", "abs_dH")

# the six ladder-relation families swept by an unfiltered verify; the P_n
# ODE family differentiates A_n, B_n numerically, hence the looser class
_LADDER_FAMILIES = (
    ("ladder_lowering", "algebraic"),
    ("ladder_raising", "algebraic"),
    ("ladder_S1", "algebraic"),
    ("ladder_S2", "algebraic"),
    ("ladder_S2prime", "algebraic"),
    ("ladder_odePn", "first-derivative"),
)
_LADDER_Z = ("-0.5", "-1", "-5")


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RunConfig:
    """One subcommand run; numeric fields are decimal strings.

    Keeping numbers as strings makes the configuration echo exact:
    config_from_dict(config_to_dict(cfg)) == cfg holds field for field, and
    parsing happens only at the point of use under an explicit precision.
    t/t_grid supply the abscissae; the edge subcommand reads the same grid
    as its s grid.  digits is 'auto' or a decimal count >= 30.
    """

    command: str
    alpha: str = "1.3"
    gamma: str = "2"
    A: str = "1"
    B: str = "0"
    t: str | None = None
    t_grid: str | None = None
    n_max: int | None = None
    n_list: tuple | None = None
    digits: str = "auto"
    ids: tuple | None = None
    tol_overrides: tuple = ()
    out_dir: str = "."
    cache_dir: str | None = None
    emit_plots: bool = False
    full_precision: bool = False


def config_to_dict(cfg: RunConfig) -> dict:
    """JSON-ready form of a RunConfig (tuples become lists)."""
    out = {}
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def _decimal(s, name):
    try:
        return mp.mpf(str(s))
    except ValueError:
        raise ValueError(f"{name} is not a decimal number: {s!r}") from None


def config_from_dict(d: dict) -> RunConfig:
    """Validated RunConfig from a JSON-shaped dict; None values mean unset."""
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValueError(f"unknown configuration keys: {unknown}")
    kw = {k: v for k, v in d.items() if v is not None}
    if "command" not in kw:
        raise ValueError("configuration needs a command")
    for key in ("alpha", "gamma", "A", "B", "t", "t_grid", "digits",
                "out_dir", "cache_dir"):
        if key in kw:
            kw[key] = str(kw[key])
    if "n_max" in kw:
        kw["n_max"] = int(kw["n_max"])
    if "n_list" in kw:
        kw["n_list"] = tuple(sorted(set(int(n) for n in kw["n_list"])))
    if "ids" in kw:
        want = set(str(s) for s in kw["ids"])
        bad = sorted(want - set(CATALOG.ids))
        if bad:
            raise ValueError(f"unknown identity ids: {bad}")
        kw["ids"] = tuple(i for i in CATALOG.ids if i in want)
    tov = kw.get("tol_overrides", ())
    if isinstance(tov, dict):
        tov = [f"{k}={v}" for k, v in tov.items()]
    kw["tol_overrides"] = tuple(sorted(str(s) for s in tov))
    for key in ("emit_plots", "full_precision"):
        if key in kw:
            kw[key] = bool(kw[key])
    return _validated(RunConfig(**kw))


def _validated(cfg: RunConfig) -> RunConfig:
    if cfg.command not in _COMMANDS:
        raise ValueError(f"unknown command {cfg.command!r}")
    with mp.workdps(_PARSE_DPS):
        probe = WeightParams(_decimal(cfg.alpha, "alpha"),
                             _decimal(cfg.gamma, "gamma"),
                             _decimal(cfg.A, "A"), _decimal(cfg.B, "B"),
                             mp.mpf(0))
        bad = validate_params(probe)
    if bad:
        raise ValueError("invalid weight parameters: " + "; ".join(bad))
    if cfg.t is not None and cfg.t_grid is not None:
        raise ValueError("give t or t_grid, not both")
    if cfg.t is not None:
        with mp.workdps(_PARSE_DPS):
            _decimal(cfg.t, "t")
    if cfg.t_grid is not None:
        _parse_grid(cfg.t_grid)
    if cfg.digits != "auto":
        try:
            dig = int(cfg.digits)
        except ValueError:
            raise ValueError(
                f"digits must be 'auto' or an integer, got {cfg.digits!r}"
            ) from None
        if dig < 30:
            raise ValueError(f"digits must be >= 30, got {dig}")
    if cfg.n_max is not None and cfg.n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {cfg.n_max}")
    if cfg.n_list is not None:
        if not cfg.n_list:
            raise ValueError("n_list must not be empty")
        if cfg.n_list[0] < 0:
            raise ValueError("n_list entries must be >= 0")
    if cfg.ids is not None and not cfg.ids:
        raise ValueError("ids filter must not be empty")
    with mp.workdps(_PARSE_DPS):
        for s in cfg.tol_overrides:
            if "=" not in s:
                raise ValueError(f"tolerance override must be ID=VALUE, got {s!r}")
            key, val = s.split("=", 1)
            if key not in CATALOG.ids:
                raise ValueError(f"tolerance override for unknown id {key!r}")
            if not _decimal(val, f"tolerance for {key}") > 0:
                raise ValueError(f"tolerance for {key} must be positive")
    return cfg


def _parse_grid(spec: str):
    """'start:stop:count[:log]' -> (start, stop, count, spacing), validated."""
    parts = spec.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ValueError(f"grid must be start:stop:count[:log], got {spec!r}")
    with mp.workdps(_PARSE_DPS):
        a = _decimal(parts[0], "grid start")
        b = _decimal(parts[1], "grid stop")
        try:
            count = int(parts[2])
        except ValueError:
            raise ValueError(f"grid count must be an integer, got {parts[2]!r}") from None
        if count < 1:
            raise ValueError(f"grid count must be >= 1, got {count}")
        if count > 1 and not b > a:
            raise ValueError(f"grid needs stop > start, got {spec!r}")
        if len(parts) == 4 and not a > 0:
            raise ValueError("log spacing needs start > 0")
    return parts[0], parts[1], count, "log" if len(parts) == 4 else "linear"


def _grid_values(spec: str):
    start, stop, count, spacing = _parse_grid(spec)
    with mp.workdps(_PARSE_DPS):
        a, b = mp.mpf(start), mp.mpf(stop)
        if count == 1:
            return [a]
        if spacing == "log":
            la, lb = mp.log(a), mp.log(b)
            vals = [mp.exp(la + (lb - la) * i / (count - 1)) for i in range(count)]
        else:
            vals = [a + (b - a) * i / (count - 1) for i in range(count)]
        vals[0], vals[-1] = a, b  # pin the endpoints against roundoff
        return vals


def _t_values(cfg: RunConfig):
    if cfg.t is not None:
        with mp.workdps(_PARSE_DPS):
            return [mp.mpf(cfg.t)]
    if cfg.t_grid is not None:
        return _grid_values(cfg.t_grid)
    raise ValueError(f"{cfg.command} needs t or t_grid")


def _params(cfg: RunConfig, t) -> WeightParams:
    with mp.workdps(_PARSE_DPS):
        p = WeightParams(mp.mpf(cfg.alpha), mp.mpf(cfg.gamma), mp.mpf(cfg.A),
                         mp.mpf(cfg.B), mp.mpf(t))
    bad = validate_params(p)
    if bad:
        raise ValueError("invalid weight parameters: " + "; ".join(bad))
    return p


def _resolve_digits(cfg: RunConfig, n_build: int) -> int:
    """Explicit digits win; auto mirrors the builder's conditioning floor."""
    if cfg.digits != "auto":
        return int(cfg.digits)
    return max(50, 40 + (5 * n_build + 1) // 2)


def _sig(cfg: RunConfig, digits: int) -> int:
    return digits if cfg.full_precision else min(digits, 50)


def _cell(x, sig: int) -> str:
    return "" if x is None else mpf_str(x, sig)


# ---------------------------------------------------------------------------
# output files

def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("schema_version",) + tuple(header))
        for row in rows:
            wr.writerow((SCHEMA_VERSION,) + tuple(row))


def _write_record(cfg: RunConfig, payload: dict, digits_used: dict,
                  files, exit_code: int) -> str:
    """Run record JSON; the timestamp lives only here so the CSVs stay
    byte-reproducible."""
    rec = {
        "schema_version": int(SCHEMA_VERSION),
        "command": cfg.command,
        "config": config_to_dict(cfg),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "digits_used": digits_used,
        "files": sorted(os.path.basename(f) for f in files),
        "payload": payload,
        "exit_code": exit_code,
    }
    path = os.path.join(cfg.out_dir, f"{cfg.command}_run.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


_ODE_PLOT = """\
# trajectory of the first-order (R_n, r_n) system against quadrature checkpoints
set datafile separator ","
set key outside right
set xlabel "t"
plot \\
    "ode.csv" using 2:3 with lines title "R (ode)", \\
    "ode.csv" using 2:4 with points pt 6 title "R (quad)", \\
    "ode.csv" using 2:5 with lines title "r (ode)", \\
    "ode.csv" using 2:6 with points pt 6 title "r (quad)", \\
    "ode.csv" using 2:7 with lines title "H (ode)", \\
    "ode.csv" using 2:8 with points pt 6 title "H (quad)"
"""


def _edge_plot_script(n_list) -> str:
    lines = [
        "# soft-edge overlay: scaled finite-n data, two-point fit, series, profile ODE",
        'set datafile separator ","',
        "set key outside right",
        'set xlabel "s"',
        'set ylabel "u"',
        "plot \\",
    ]
    for n in n_list:
        lines.append(f'    "edge.csv" using 2:($3 == {n} ? $4 : 1/0) '
                     f'with points title "n^{{2/3}} R_n, n = {n}", \\')
    top = n_list[-1]
    lines.append(f'    "edge.csv" using 2:($3 == {top} ? $5 : 1/0) '
                 'with linespoints title "two-point fit", \\')
    lines.append(f'    "edge.csv" using 2:($3 == {top} ? $7 : 1/0) '
                 'with lines title "series (s >= 3)", \\')
    lines.append(f'    "edge.csv" using 2:($3 == {top} ? $9 : 1/0) '
                 'with lines title "profile ODE"')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands

def _requested_ns(cfg: RunConfig, lowest: int):
    if cfg.n_list is not None:
        ns = [n for n in cfg.n_list if n >= lowest]
        if not ns:
            raise ValueError(f"{cfg.command} needs n >= {lowest}")
        return ns
    if cfg.n_max is not None:
        if cfg.n_max < lowest:
            raise ValueError(f"{cfg.command} needs n_max >= {lowest}")
        return list(range(lowest, cfg.n_max + 1))
    raise ValueError(f"{cfg.command} needs n_max or n_list")


def cmd_table(cfg: RunConfig) -> int:
    """Recurrence and auxiliary quantities over the requested (t, n) grid."""
    ts = _t_values(cfg)
    ns = _requested_ns(cfg, 0)
    n_build = max(ns) + 1
    digits = _resolve_digits(cfg, n_build)
    ctx = make_context(digits)
    rows, errors = [], []
    used = digits
    code = 0
    for t in ts:
        tstr = mpf_str(t, 17)
        try:
            p = _params(cfg, t)
            mt = moment_table(p, 2 * n_build + 2, ctx, cache_dir=cfg.cache_dir)
            ops = build_ops(mt, n_build, ctx)
            aux = aux_recurrence(ops, p) if p.t > 0 else None
        except (PhlabError, ValueError) as exc:
            code = 2
            errors.append(f"t = {tstr}: {exc}")
            for n in ns:
                rows.append([tstr, str(n)] + [""] * 8
                            + ["failed: " + str(exc).splitlines()[0], str(digits)])
            continue
        used = max(used, ops.digits)
        sig = _sig(cfg, ops.digits)
        for n in ns:
            if aux is not None:
                tail = [_cell(aux.R[n], sig), _cell(aux.r[n], sig),
                        _cell(aux.H[n], sig), _cell(aux.sigma[n], sig),
                        aux.route]
            else:
                # t = 0 has no deformation point, so the auxiliary
                # quantities are not defined; the recurrence columns stand
                tail = ["", "", "", "", ""]
            rows.append([tstr, str(n), _cell(ops.h[n], sig),
                         _cell(ops.p1[n], sig), _cell(ops.alpha_rec[n], sig),
                         _cell(ops.beta_rec[n], sig)] + tail
                        + [str(ops.digits)])
    path = os.path.join(cfg.out_dir, "table.csv")
    _write_csv(path, TABLE_CSV_SCHEMA, rows)
    _write_record(cfg, {"rows": len(rows), "errors": errors},
                  {"build": used}, [path], code)
    print(f"table: {len(rows)} rows -> {path}")
    return code


def _ladder_residual(fam, ops, p, n, zs, ctx):
    """Max residual of one family over the z probes; None if n is outside
    the family's window."""
    if fam == "ladder_lowering":
        if not 1 <= n <= ops.n_max:
            return None
        return max(residual_lowering(ops, p, n, z, ctx) for z in zs)
    if fam == "ladder_raising":
        if not 1 <= n <= ops.n_max:
            return None
        return max(residual_raising(ops, p, n, z, ctx) for z in zs)
    if fam == "ladder_S1":
        if not 0 <= n <= ops.n_max - 1:
            return None
        return max(residual_compat(ops, p, n, z, "S1", ctx) for z in zs)
    if fam == "ladder_S2":
        if not 1 <= n <= ops.n_max - 1:
            return None
        return max(residual_compat(ops, p, n, z, "S2", ctx) for z in zs)
    if fam == "ladder_S2prime":
        return max(residual_compat(ops, p, n, z, "S2prime", ctx) for z in zs)
    return max(residual_ode_pn(ops, p, n, z, ctx) for z in zs)


def _ladder_rows(cfg, p, ns, ctx):
    """Residual rows for the six ladder families at one t."""
    n_build = max(7, max(ns) + 2)
    mt = moment_table(p, 2 * n_build + 2, ctx, cache_dir=cfg.cache_dir)
    ops = build_ops(mt, n_build, ctx)
    # mirrors the quadrature context the ladder evaluations actually use
    qdig = max(30, min(max(80, ctx.digits // 2 + 40), ops.digits - 10))
    tstr = mpf_str(p.t, 17)
    with mp.workdps(_PARSE_DPS):
        zs = [mp.mpf(z) for z in _LADDER_Z]
    rows, errors = [], []
    code = 0
    checked = failed = 0
    for fam, klass in _LADDER_FAMILIES:
        tol = default_tolerance(klass, ctx.digits)
        sig = _sig(cfg, qdig)
        for n in ns:
            try:
                res = _ladder_residual(fam, ops, p, n, zs, ctx)
            except (PhlabError, ValueError) as exc:
                code = 2
                errors.append(f"{fam} n = {n} t = {tstr}: {exc}")
                rows.append([fam, str(n), tstr, "", "", "", "error", str(qdig)])
                continue
            if res is None:
                continue
            checked += 1
            ok = res < tol
            if not ok:
                failed += 1
                code = max(code, 1)
            rows.append([fam, str(n), tstr, mpf_str(res, sig),
                         mpf_str(res, sig), mpf_str(tol, sig),
                         "true" if ok else "false", str(qdig)])
    return rows, code, errors, checked, failed, qdig


def cmd_verify(cfg: RunConfig) -> int:
    """Catalogue identities (plus, unfiltered, the ladder families) as
    normalized residuals against their class tolerances."""
    ts = _t_values(cfg)
    for t in ts:
        if not t > 0:
            raise ValueError("verify needs t > 0")
    ns = _requested_ns(cfg, 1)
    ids = list(cfg.ids) if cfg.ids is not None else list(CATALOG.ids)
    tover = {}
    with mp.workdps(_PARSE_DPS):
        for s in cfg.tol_overrides:
            key, val = s.split("=", 1)
            tover[key] = mp.mpf(val)
    n_build = max(7, max(ns) + 2)
    digits = _resolve_digits(cfg, n_build)
    ctx = make_context(digits)
    rows, errors = [], []
    digits_used = {"engine": digits}
    code = 0
    checked = failed = 0
    for t in ts:
        tstr = mpf_str(t, 17)
        p = _params(cfg, t)
        try:
            eng = painleve._engine(p, t, n_build, ctx)
        except PhlabError as exc:
            code = 2
            errors.append(f"t = {tstr}: {exc}")
            for id_ in ids:
                for n in ns:
                    if n < CATALOG.get(id_).n_min:
                        continue
                    rows.append([id_, str(n), tstr, "", "", "", "error",
                                 str(digits)])
            continue
        for id_ in ids:
            entry = CATALOG.get(id_)
            for n in ns:
                if n < entry.n_min:
                    continue
                try:
                    rep = residual_identity(id_, n, t, p, ctx, engine=eng,
                                            tol=tover.get(id_))
                except (PhlabError, ValueError) as exc:
                    code = 2
                    errors.append(f"{id_} n = {n} t = {tstr}: {exc}")
                    rows.append([id_, str(n), tstr, "", "", "", "error",
                                 str(digits)])
                    continue
                checked += 1
                if not rep.passed:
                    failed += 1
                    code = max(code, 1)
                sig = _sig(cfg, rep.digits)
                rows.append([rep.id, str(rep.n), tstr,
                             mpf_str(rep.residual_abs, sig),
                             mpf_str(rep.residual_rel, sig),
                             mpf_str(rep.tol, sig),
                             "true" if rep.passed else "false",
                             str(rep.digits)])
        if cfg.ids is None:
            lrows, lcode, lerrs, lchk, lfail, lqdig = _ladder_rows(cfg, p, ns, ctx)
            rows += lrows
            errors += lerrs
            code = max(code, lcode)
            checked += lchk
            failed += lfail
            digits_used["ladder_quadrature"] = lqdig
    path = os.path.join(cfg.out_dir, "verify.csv")
    _write_csv(path, VERIFY_CSV_SCHEMA, rows)
    _write_record(cfg, {"checked": checked, "failed": failed, "errors": errors},
                  digits_used, [path], code)
    print(f"verify: {checked} checks, {failed} failed -> {path}")
    return code


def _ode_rows(cfg, p, n, cks, traj, ctx):
    """One row per checkpoint: trajectory values against fresh quadrature."""
    rows, errors = [], []
    code = 0
    sig = _sig(cfg, ctx.digits)
    index = {}
    for j, tv in enumerate(traj.t_grid):
        index.setdefault(tv, j)
    for tv in cks:
        j = index.get(tv)
        if j is None:
            # checkpoint forcing makes grid hits exact; this guards the
            # retried-span endpoints against representation drift
            j = min(range(len(traj.t_grid)),
                    key=lambda k: abs(traj.t_grid[k] - tv))
        ta = traj.t_grid[j]
        Ro, ro, Ho = traj.R[j], traj.r[j], traj.H_reconstructed[j]
        try:
            pt = p.with_t(ta)
            mt = moment_table(pt, 2 * (n + 1) + 2, ctx, cache_dir=cfg.cache_dir)
            ops = build_ops(mt, n + 1, ctx)
            aux = aux_quadrature(ops, pt, ctx)
        except PhlabError as exc:
            code = 2
            errors.append(f"t = {mpf_str(ta, 17)}: {exc}")
            rows.append([mpf_str(ta, 17), _cell(Ro, sig), "", _cell(ro, sig),
                         "", _cell(Ho, sig), "", "", "", ""])
            continue
        with mp.workdps(ctx.digits + 10):
            dR = abs(Ro - aux.R[n])
            dr = abs(ro - aux.r[n])
            dH = abs(Ho - aux.H[n])
        rows.append([mpf_str(ta, 17), _cell(Ro, sig), _cell(aux.R[n], sig),
                     _cell(ro, sig), _cell(aux.r[n], sig), _cell(Ho, sig),
                     _cell(aux.H[n], sig), _cell(dR, sig), _cell(dr, sig),
                     _cell(dH, sig)])
    return rows, errors, code


def cmd_ode(cfg: RunConfig) -> int:
    """Integrate the (R_n, r_n) system across the t grid and cross-check
    every grid point against the quadrature route."""
    if cfg.n_list is not None:
        if len(cfg.n_list) != 1:
            raise ValueError("ode integrates a single n; n_list must have "
                             "exactly one entry")
        n = cfg.n_list[0]
    elif cfg.n_max is not None:
        n = cfg.n_max
    else:
        raise ValueError("ode needs n_max or n_list")
    if n < 1:
        raise ValueError("ode needs n >= 1")
    cks = _t_values(cfg)
    digits = _resolve_digits(cfg, n + 1)
    ctx = make_context(digits)
    rows, errors = [], []
    code = 0
    truncated = False
    if len(cks) >= 2 and cks[0] < cks[-1]:
        if not cks[0] > 0:
            raise ValueError("ode needs t > 0 across the whole span")
        p = _params(cfg, cks[0])
        with mp.workdps(digits + 10):
            tol = mp.mpf(10) ** (-min(30, max(8, digits // 3)))
        span = list(cks)
        traj = None
        for _ in range(2):
            try:
                traj = integrate_riccati(n, p, span[0], span[-1], ctx, tol,
                                         checkpoints=span[1:-1])
                break
            except SingularityEncountered as exc:
                truncated = True
                code = 3
                errors.append(str(exc))
                span = [tv for tv in span if tv < exc.last_good]
                if len(span) < 2:
                    break
            except PhlabError as exc:
                code = 2
                errors.append(str(exc))
                break
        if traj is not None:
            qrows, qerrs, qcode = _ode_rows(cfg, p, n, span, traj, ctx)
            rows += qrows
            errors += qerrs
            if code == 0:
                code = qcode
    path = os.path.join(cfg.out_dir, "ode.csv")
    _write_csv(path, ODE_CSV_SCHEMA, rows)
    files = [path]
    if cfg.emit_plots:
        gpath = os.path.join(cfg.out_dir, "ode.gp")
        with open(gpath, "w", encoding="utf-8") as fh:
            fh.write(_ODE_PLOT)
        files.append(gpath)
    _write_record(cfg, {"rows": len(rows), "truncated": truncated,
                        "errors": errors},
                  {"requested": digits}, files, code)
    print(f"ode: {len(rows)} rows -> {path}")
    return code


def cmd_edge(cfg: RunConfig) -> int:
    """Soft-edge scan over n_list x s grid with the profile-ODE overlay.

    The t/t_grid specification is read as the s grid.  Per-point build
    failures stay in the CSV; the run only fails (exit 1) when more than
    half of the points are lost.
    """
    if cfg.n_list is None or len(cfg.n_list) < 2:
        raise ValueError("edge needs n_list with at least two entries")
    ss = _t_values(cfg)
    digits = 40 if cfg.digits == "auto" else int(cfg.digits)
    ctx = make_context(digits)
    p = _params(cfg, 0)
    prof = edge_profile(list(cfg.n_list), ss, p, ctx)
    build_fail = sum(1 for f in prof.failures if not isinstance(f[0], str))
    total = len(prof.n_list) * len(prof.s_grid)
    code = 1 if 2 * build_fail > total else 0
    text = prof.to_csv(None if cfg.full_precision else 50)
    lines = text.splitlines()
    out = ["schema_version," + lines[0]]
    out += [SCHEMA_VERSION + "," + ln for ln in lines[1:]]
    path = os.path.join(cfg.out_dir, "edge.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(out) + "\n")
    files = [path]
    if cfg.emit_plots:
        gpath = os.path.join(cfg.out_dir, "edge.gp")
        with open(gpath, "w", encoding="utf-8") as fh:
            fh.write(_edge_plot_script(list(prof.n_list)))
        files.append(gpath)
    failures = [[str(a), mpf_str(b, 17), c] for a, b, c in prof.failures]
    _write_record(cfg, {"points": total, "build_failures": build_fail,
                        "failures": failures},
                  {"edge": list(prof.digits_used)}, files, code)
    print(f"edge: {total} points, {build_fail} build failures -> {path}")
    return code


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sp):
    sp.add_argument("--config", help="JSON configuration file; flags override its keys")
    sp.add_argument("--alpha", help="exponent at the hard edge (decimal string)")
    sp.add_argument("--gamma", help="exponent at the deformation point")
    sp.add_argument("--A", help="weight factor left of t")
    sp.add_argument("--B", help="jump added right of t (A+B on the right)")
    sp.add_argument("--t", help="single abscissa (decimal string)")
    sp.add_argument("--t-grid", dest="t_grid", metavar="START:STOP:COUNT[:log]",
                    help="abscissa grid; the edge subcommand reads it as the s grid")
    sp.add_argument("--n-max", dest="n_max", type=int,
                    help="largest n (table/verify: sweep up to it; ode: the single n)")
    sp.add_argument("--n-list", dest="n_list", metavar="N1,N2,...",
                    help="explicit n values (edge needs at least two)")
    sp.add_argument("--digits", help="'auto' or a decimal digit count >= 30")
    sp.add_argument("--ids", metavar="ID1,ID2,...",
                    help="restrict verify to these catalogue ids")
    sp.add_argument("--tol-override", dest="tol_overrides", action="append",
                    metavar="ID=VALUE", help="per-id tolerance (repeatable)")
    sp.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    sp.add_argument("--cache-dir", dest="cache_dir",
                    help="moment cache directory (default: PHL_CACHE_DIR if set)")
    sp.add_argument("--emit-plots", dest="emit_plots",
                    action=argparse.BooleanOptionalAction, default=None,
                    help="write gnuplot scripts next to the CSVs (ode, edge)")
    sp.add_argument("--full-precision", dest="full_precision",
                    action=argparse.BooleanOptionalAction, default=None,
                    help="emit CSV numbers at full working precision instead of 50 digits")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="phlab",
        description="Numerical laboratory for the deformed Laguerre weight "
                    "x^alpha e^-x |x-t|^gamma (A + B theta(x-t)): recurrence "
                    "tables, identity verification, trajectory integration, "
                    "soft-edge profiles.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "table": "tabulate h_n, p(n), recurrence coefficients and auxiliary "
                 "quantities over a t grid",
        "verify": "evaluate the identity catalogue (and the ladder families) "
                  "as normalized residuals",
        "ode": "integrate the first-order auxiliary system across a t span "
               "and compare against quadrature",
        "edge": "scan the soft-edge scaling region and overlay the profile "
                "equation solution",
    }
    for name in _COMMANDS:
        _add_common(sub.add_parser(name, help=helps[name]))
    return ap


def parse_args(argv=None) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    d = {"command": ns.command}
    if ns.config is not None:
        with open(ns.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        cmd = loaded.pop("command", None)
        if cmd is not None and cmd != ns.command:
            raise ValueError(f"config file names command {cmd!r}, "
                             f"command line says {ns.command!r}")
        d.update(loaded)
    for key in ("alpha", "gamma", "A", "B", "t", "t_grid", "n_max", "digits",
                "out_dir", "cache_dir", "emit_plots", "full_precision"):
        v = getattr(ns, key)
        if v is not None:
            d[key] = v
    if ns.n_list is not None:
        d["n_list"] = [int(x) for x in ns.n_list.split(",") if x.strip()]
    if ns.ids is not None:
        d["ids"] = [x.strip() for x in ns.ids.split(",") if x.strip()]
    if ns.tol_overrides is not None:
        d["tol_overrides"] = list(ns.tol_overrides)
    return config_from_dict(d)


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    dispatch = {"table": cmd_table, "verify": cmd_verify, "ode": cmd_ode,
                "edge": cmd_edge}
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        return dispatch[cfg.command](cfg)
    except (PhlabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
