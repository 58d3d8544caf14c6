"""Command-line front door: TOML config, command dispatch, JSON/CSV reports.

Exit codes: 0 all residuals within tolerance, 1 residual failure, 2 config
error.  Reports are byte-identical for identical config and seed (floats are
rounded to 15 significant digits before serialization).
"""

import argparse
import csv
import json
import sys
from importlib import resources

import numpy as np
import tomli

from . import qpoly
from .defalg import RHO_MAX_SUPPORTED, RhoSeriesOp, exp_op, log_op, _restricted_from_diffop
from .deform import (
    canonical_deformation,
    deform_form,
    ensure_cocycle_entries,
    first_order_data,
    lambda_combination,
    match_cocycles_order2,
    second_order_data,
    verify_transformation,
)
from .groups import (
    GroupContext,
    GroupElement,
    InfeasibleSampleError,
    is_feasible,
    sample_feasible_pairs,
    sample_feasible_words,
)
from .mmv import MMVKey, canonical_cocycle, mmv_classical, mmv_functional
from .modforms import (
    CuspForm,
    cusp_form_from_eta,
    period_polynomial,
)

COMMANDS = ("mmv", "periods", "deform", "canonical", "verify")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


# -- configuration -----------------------------------------------------------


class RunConfig:
    def __init__(self, raw):
        self.raw = raw
        group = raw.get("group", {})
        self.level = self._int(group, "group.level", group.get("level", 5), 1)
        seeds = group.get("seeds")
        if not seeds:
            raise ConfigError("group.seeds: at least one seed matrix required")
        try:
            self.seeds = [GroupElement(*row) for row in seeds]
        except (TypeError, ValueError) as e:
            raise ConfigError(f"group.seeds: {e}")
        try:
            self.context = GroupContext(self.level, tuple(self.seeds))
        except ValueError as e:
            raise ConfigError(f"group.seeds: {e}")

        form = raw.get("form", {})
        self.eta_factors = form.get("eta_factors")
        self.coefficient_file = form.get("coefficient_file")
        if not self.eta_factors and not self.coefficient_file:
            raise ConfigError("form: eta_factors or coefficient_file required")
        self.form_weight = self._int(form, "form.weight", form.get("weight", 4), 1)

        trunc = raw.get("truncation", {})
        self.nq_max = self._int(trunc, "truncation.nq_max", trunc.get("nq_max", 128), 1)
        if self.nq_max < 32:
            print(
                f"warning: truncation.nq_max = {self.nq_max} is below the "
                "supported floor of 32; residuals will reflect the lost tail",
                file=sys.stderr,
            )
        self.rho_max = self._int(trunc, "truncation.rho_max", trunc.get("rho_max", 2), 1)
        if self.rho_max > RHO_MAX_SUPPORTED:
            raise ConfigError(f"truncation.rho_max must be <= {RHO_MAX_SUPPORTED}")
        self.depth_max = self._int(trunc, "truncation.depth_max", trunc.get("depth_max", 2), 1)
        if self.depth_max > 4:
            raise ConfigError("truncation.depth_max must be <= 4")

        samples = raw.get("samples", {})
        taus = samples.get("tau", [[0.1, 0.9], [-0.2, 1.1], [0.05, 0.75]])
        self.tau_samples = []
        for pair in taus:
            try:
                t = complex(pair[0], pair[1])
            except (TypeError, IndexError):
                raise ConfigError("samples.tau: entries must be [re, im] pairs")
            if t.imag <= 0:
                raise ConfigError("samples.tau: Im(tau) must be positive")
            self.tau_samples.append(t)
        self.pair_count = self._int(samples, "samples.pair_count", samples.get("pair_count", 20), 1)
        self.gamma_count = self._int(samples, "samples.gamma_count", samples.get("gamma_count", 10), 1)
        self.max_word_length = self._int(
            samples, "samples.max_word_length", samples.get("max_word_length", 6), 1
        )
        self.seed = self._int(samples, "samples.seed", samples.get("seed", 101), None)

        self.tolerances = {}
        for name, val in raw.get("tolerances", {}).items():
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"tolerances.{name} must be positive")
            self.tolerances[name] = float(val)

        self.out_path = raw.get("output", {}).get("path", "mfdeform_report.json")

        deform = raw.get("deform", {})
        self.deform_factors = deform.get("eta_factors")
        self.deform_weight = deform.get("weight")

    @staticmethod
    def _int(table, name, value, minimum):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} must be an integer")
        if minimum is not None and value < minimum:
            raise ConfigError(f"{name} must be >= {minimum}")
        return value

    @classmethod
    def from_path(cls, path):
        try:
            if path is None:
                blob = resources.files("mfdeform").joinpath("data/default.toml").read_bytes()
            else:
                with open(path, "rb") as fh:
                    blob = fh.read()
        except OSError as e:
            raise ConfigError(f"config: cannot read {path}: {e}")
        try:
            raw = tomli.loads(blob.decode("utf-8"))
        except tomli.TOMLDecodeError as e:
            raise ConfigError(f"config: TOML parse error: {e}")
        return cls(raw)

    def form(self):
        if self.eta_factors:
            try:
                return cusp_form_from_eta(
                    [tuple(f) for f in self.eta_factors], self.level, self.nq_max
                )
            except (TypeError, ValueError) as e:
                raise ConfigError(f"form.eta_factors: {e}")
        try:
            with open(self.coefficient_file) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"form.coefficient_file: {e}")
        coeffs = [complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in data]
        return CuspForm(self.form_weight, self.level, coeffs)

    def echo(self):
        return {
            "level": self.level,
            "seeds": [list(g.entries()) for g in self.seeds],
            "nq_max": self.nq_max,
            "rho_max": self.rho_max,
            "depth_max": self.depth_max,
            "tau_samples": [[t.real, t.imag] for t in self.tau_samples],
            "pair_count": self.pair_count,
            "gamma_count": self.gamma_count,
            "max_word_length": self.max_word_length,
            "seed": self.seed,
        }


# -- fixed-format serialization -----------------------------------------------


def _g(x):
    return float(f"{float(x):.15g}")


def _round_tree(obj):
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    if isinstance(obj, complex):
        return [_g(obj.real), _g(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _g(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.complexfloating):
        return [_g(obj.real), _g(obj.imag)]
    return obj


def write_report(path, report):
    with open(path, "w") as fh:
        json.dump(_round_tree(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_table(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["word", "indices", "re", "im", "deviation"])
        for word, indices, value, dev in rows:
            w.writerow([word, indices, f"{value.real:.15g}", f"{value.imag:.15g}", f"{dev:.15g}"])


def _word_label(g):
    return f"[[{g.a},{g.b}],[{g.c},{g.d}]]"


# -- commands ------------------------------------------------------------------


def cmd_mmv(cfg):
    h = cfg.form()
    nq = cfg.nq_max
    rows = []
    residuals = {}

    tau0 = cfg.tau_samples[0]
    fvals = {}
    for n in range(3):
        fvals[(n,)] = mmv_functional(MMVKey([h], [n]), nq).evaluate(tau0)
    for m in range(3):
        for n in range(3):
            fvals[(m, n)] = mmv_functional(MMVKey([h, h], [m, n]), nq).evaluate(tau0)
    worst_f = 0.0
    for key, val in sorted(fvals.items()):
        if len(key) == 1:
            dev = 0.0
        else:
            m, n = key
            dev = abs(fvals[(m,)] * fvals[(n,)] - fvals[(m, n)] - fvals[(n, m)])
            worst_f = max(worst_f, dev)
        rows.append(("tau", ",".join(map(str, key)), val, dev))
    residuals["functional_shuffle"] = worst_f

    worst_two = 0.0
    worst_sh = 0.0
    for g in cfg.seeds:
        if g.c == 0:
            continue
        label = _word_label(g)
        cvals = {}
        for n in range(3):
            v_period = mmv_classical(MMVKey([h], [n]), g, route="period", nq_max=nq)
            v_quad = mmv_classical(MMVKey([h], [n]), g, route="quadrature", nq_max=nq)
            dev = abs(v_period - v_quad)
            worst_two = max(worst_two, dev)
            cvals[(n,)] = v_period
            rows.append((label, str(n), v_period, dev))
        for m in range(3):
            for n in range(3):
                cvals[(m, n)] = mmv_classical(MMVKey([h, h], [m, n]), g, nq_max=nq)
        for m in range(3):
            for n in range(3):
                dev = abs(
                    cvals[(m,)] * cvals[(n,)] - cvals[(m, n)] - cvals[(n, m)]
                )
                worst_sh = max(worst_sh, dev)
                rows.append((label, f"{m},{n}", cvals[(m, n)], dev))
    residuals["classical_two_route"] = worst_two
    residuals["shuffle"] = worst_sh
    return residuals, rows


def cmd_periods(cfg):
    h = cfg.form()
    pairs = sample_feasible_pairs(cfg.context, cfg.pair_count, cfg.max_word_length, cfg.seed)
    gammas = []
    for g, d in pairs:
        for x in (g, d, g * d):
            if x not in gammas:
                gammas.append(x)
    pkg = first_order_data(
        h, gammas, pairs=pairs, tau_samples=cfg.tau_samples, nq_max=cfg.nq_max
    )
    rows = []
    for g in gammas:
        coeffs, res = period_polynomial(h, g, nq_max=cfg.nq_max)
        for i, c in enumerate(coeffs):
            rows.append((_word_label(g), str(i), complex(c), res))
    return dict(pkg.residuals), rows


def _build_package(cfg):
    h = cfg.form()
    pairs = sample_feasible_pairs(cfg.context, cfg.pair_count, cfg.max_word_length, cfg.seed)
    return second_order_data(
        h, pairs=pairs, tau_samples=cfg.tau_samples, nq_max=cfg.nq_max
    )


def cmd_deform(cfg):
    pkg = _build_package(cfg)
    residuals = dict(pkg.residuals)
    rows = []
    if cfg.deform_factors:
        g = cusp_form_from_eta([tuple(f) for f in cfg.deform_factors], cfg.level, cfg.nq_max)
        weight = cfg.deform_weight or g.weight
        target, label = g.expansion(cfg.nq_max), "input"
    else:
        target, label = pkg.form.expansion(cfg.nq_max), "bundled"
        weight = pkg.form.weight
    deformed = deform_form(target, pkg, weight=weight)
    for m in range(3):
        series = deformed[(m,)]
        for n in range(min(16, cfg.nq_max)):
            rows.append((label, f"rho{m},q{n}", series.coeff(n, 0), 0.0))
    return residuals, rows


def cmd_canonical(cfg):
    h = cfg.form()
    basis = [h]
    gammas = sample_feasible_words(cfg.context, cfg.gamma_count, cfg.max_word_length, cfg.seed)
    rows = []
    worst_tau = 0.0
    kappas = []
    ops = {}
    for g in gammas:
        series, dev = canonical_cocycle(
            g, basis, cfg.depth_max, cfg.tau_samples, cfg.nq_max, tol=np.inf
        )
        worst_tau = max(worst_tau, dev)
        op = canonical_deformation(
            g, basis, cfg.tau_samples, cfg.depth_max, cfg.nq_max, tol=np.inf
        )
        ops[g] = op
        x = log_op(op)
        for order in (1, 2):
            lie, _junk = _restricted_from_diffop(x.coefficient((order,)), 0, cfg.nq_max)
            q = lie.quadratic()
            for i in range(3):
                rows.append((_word_label(g), f"rho{order},tau{i}", complex(q[i]), dev))
        p1, _res = period_polynomial(h, g, nq_max=cfg.nq_max)
        p1 = np.asarray(p1)
        if np.max(np.abs(p1)) > 1e-8:
            lie, _junk = _restricted_from_diffop(x.coefficient((1,)), 0, cfg.nq_max)
            q = lie.quadratic()
            kappas.append(np.vdot(p1, q) / np.vdot(p1, p1))

    from .defalg import compose, slash_group

    worst_coc = 0.0
    pairs = sample_feasible_pairs(cfg.context, min(cfg.pair_count, 5), cfg.max_word_length, cfg.seed)
    for g, d in pairs:
        for x in (g, d, g * d):
            if x not in ops:
                ops[x] = canonical_deformation(
                    x, basis, cfg.tau_samples, cfg.depth_max, cfg.nq_max, tol=np.inf
                )
        lhs = ops[g * d]
        rhs = compose(slash_group(ops[g], d), ops[d])
        worst_coc = max(worst_coc, lhs.max_abs_diff(rhs))

    residuals = {
        "tau_independence": worst_tau,
        "canonical_cocycle": worst_coc,
    }
    if len(kappas) >= 2:
        kappas = np.asarray(kappas)
        center = np.mean(kappas)
        residuals["kappa_stability"] = float(np.max(np.abs(kappas - center)) / abs(center))
        rows.append(("kappa", "mean", complex(center), residuals["kappa_stability"]))
    return residuals, rows


def cmd_verify(cfg):
    h = cfg.form()
    nq = cfg.nq_max
    pkg = _build_package(cfg)
    residuals = dict(pkg.residuals)

    hq = h.expansion(nq)
    hh = qpoly.multiply(hq, hq)
    lhs = deform_form(hh, pkg, weight=2 * h.weight)
    parts = deform_form(hq, pkg, weight=h.weight)
    worst = 0.0
    for m in range(3):
        acc = None
        for m1 in range(m + 1):
            term = qpoly.multiply(parts[(m1,)], parts[(m - m1,)])
            acc = term if acc is None else acc + term
        scale = max(lhs[(m,)].coeff_norm(), acc.coeff_norm(), 1.0)
        worst = max(worst, lhs[(m,)].max_abs_diff(acc) / scale)
    residuals["homomorphism"] = worst

    worst = 0.0
    trans_gammas = [g for g in pkg.gammas() if is_feasible([g])][:3]
    for g in trans_gammas:
        for f, k in ((hq, h.weight), (hh, 2 * h.weight)):
            rep = verify_transformation(f, k, pkg, g, tau_samples=cfg.tau_samples)
            worst = max(worst, max(v[0] for v in rep.values()))
    residuals["transformation"] = worst

    can_res, _rows = cmd_canonical(cfg)
    residuals.update(can_res)

    basis = [h]
    match_gammas = [g for g in pkg.gammas() if is_feasible([g]) and g.c != 0][:5]
    if len(match_gammas) >= 3:
        canon = {
            g: canonical_deformation(g, basis, cfg.tau_samples, cfg.depth_max, nq, tol=np.inf)
            for g in match_gammas
        }
        target = {}
        for g in match_gammas:
            ensure_cocycle_entries(pkg, g)
            target[g] = exp_op(
                RhoSeriesOp.from_lie(
                    {
                        (1,): pkg.first_order_cocycle[g],
                        (2,): pkg.second_order_cocycle[g],
                    },
                    1,
                    2,
                    nq,
                )
            )
        _C, _phi, rep = match_cocycles_order2(target, canon)
        residuals["match_verification"] = rep["verification"]

    fvals = {}
    tau0 = cfg.tau_samples[0]
    for n in range(3):
        fvals[(n,)] = mmv_functional(MMVKey([h], [n]), nq).evaluate(tau0)
    worst = 0.0
    for m in range(3):
        for n in range(3):
            lam_mn = mmv_functional(MMVKey([h, h], [m, n]), nq).evaluate(tau0)
            lam_nm = mmv_functional(MMVKey([h, h], [n, m]), nq).evaluate(tau0)
            worst = max(worst, abs(fvals[(m,)] * fvals[(n,)] - lam_mn - lam_nm))
    residuals["functional_shuffle"] = worst

    return residuals, None


# -- dispatch -------------------------------------------------------------------


def run(command, cfg, out_path=None):
    """Returns the exit status; writes the JSON report (and CSV beside it)."""
    handlers = {
        "mmv": cmd_mmv,
        "periods": cmd_periods,
        "deform": cmd_deform,
        "canonical": cmd_canonical,
        "verify": cmd_verify,
    }
    if command not in handlers:
        raise ConfigError(f"command: unknown command {command!r}; choose from {COMMANDS}")
    residuals, rows = handlers[command](cfg)

    tolerances = {name: cfg.tolerances.get(name, np.inf) for name in residuals}
    failures = sorted(name for name in residuals if residuals[name] > tolerances[name])
    report = {
        "command": command,
        "config": cfg.echo(),
        "residuals": {k: float(v) for k, v in sorted(residuals.items())},
        "tolerances": {
            k: (float(v) if np.isfinite(v) else None) for k, v in sorted(tolerances.items())
        },
        "failures": failures,
        "verdict": "fail" if failures else "pass",
    }
    path = out_path or cfg.out_path
    write_report(path, report)
    if rows is not None:
        write_table(path.rsplit(".", 1)[0] + ".csv", rows)
    return 1 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mfdeform",
        description="Formal logarithmic deformations of modular forms at finite order.",
    )
    parser.add_argument("--config", default=None, help="TOML config path (bundled default if omitted)")
    parser.add_argument("--command", default="verify", help=f"one of {', '.join(COMMANDS)}")
    parser.add_argument("--out", default=None, help="report path (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="sampling seed (overrides config)")
    parser.add_argument(
        "--tolerance",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="tolerance override, repeatable",
    )
    args = parser.parse_args(argv)

    try:
        cfg = RunConfig.from_path(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        for item in args.tolerance:
            name, _, value = item.partition("=")
            if not _:
                raise ConfigError(f"--tolerance {item!r}: expected NAME=VALUE")
            try:
                val = float(value)
            except ValueError:
                raise ConfigError(f"--tolerance {name}: {value!r} is not a number")
            if val <= 0:
                raise ConfigError(f"--tolerance {name} must be positive")
            cfg.tolerances[name] = val
        return run(args.command, cfg, out_path=args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InfeasibleSampleError as e:
        print(f"infeasible samples: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
