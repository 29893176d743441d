"""Command line: gaps | discs | freepath | mc | compare.

Every run writes CSV files plus manifest.json into --out; the manifest holds
all parameters needed to reproduce the CSVs byte for byte.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
from scipy.stats import ks_2samp

from . import directions as ds
from . import lorentz, mc
from .io import write_csv, write_manifest
from .lattice import (AffineLatticeSpec, Irrational, Rational, ShellSpec, UnimodularBasis, load_lattice,
                      parse_alpha, square_lattice)
from .parallel import DEFAULT_CHUNK, resolve_workers

LATTICE_PRESETS = {
    "square": lambda: np.eye(2),
    "hex": lambda: np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]]) / math.sqrt(math.sqrt(3) / 2),
}

# short aliases accepted by `compare --theorem`
THEOREM_ALIASES = {
    "free-path": "free-path", "1.1": "free-path", "freeThm1": "free-path",
    "cone": "cone", "2.1": "cone", "visThm0": "cone",
    "cylinder": "cylinder", "3.1": "cylinder", "visThm": "cylinder",
}

DEFAULT_Q0 = (math.sqrt(2) / 2, math.sqrt(3) / 3)
DEFAULT_IRRATIONAL = Irrational((math.sqrt(2) / math.pi, math.sqrt(3) / math.pi))


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """'a:b:step' (inclusive of b) or a comma list."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"bad grid {text!r}, expected a:b:step with a <= b and step > 0")
        a, b, step = parts
        k = int(math.floor((b - a) / step + 1e-9))
        return np.round(a + step * np.arange(k + 1), 12)
    return np.array([float(x) for x in text.split(",") if x.strip()])


def parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def parse_vector(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.replace(",", " ").split()])


def build_lattice(args, default_alpha=None) -> AffineLatticeSpec:
    if args.lattice:
        lat = load_lattice(args.lattice)
        if args.alpha is not None:
            lat = AffineLatticeSpec(lat.basis, parse_alpha(args.alpha, lat.dim))
        return lat
    name = args.preset if args.preset in LATTICE_PRESETS else "square"
    basis = UnimodularBasis(LATTICE_PRESETS[name]())
    if args.alpha is not None:
        alpha = parse_alpha(args.alpha, 2)
    else:
        alpha = default_alpha
    return AffineLatticeSpec(basis, alpha)


def describe_lattice(lat: AffineLatticeSpec) -> dict:
    out = {"basis": lat.basis.rows.tolist()}
    if isinstance(lat.alpha, Rational):
        out["alpha"] = {"kind": "rational", "p": list(lat.alpha.p), "q": lat.alpha.q}
    else:
        out["alpha"] = {"kind": "irrational", "x": list(lat.alpha.x)}
    return out


def alpha_kind(args):
    """Shift class for the random-lattice side: None (X_1), Rational (X_q) or Irrational (X)."""
    return None if args.alpha is None else parse_alpha(args.alpha, 2)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, out: Path, params: dict, files: list[str]):
    params = dict(params)
    params.update(command=args.command, seed=args.seed, workers=resolve_workers(args.workers),
                  chunk=DEFAULT_CHUNK)
    write_manifest(out / "manifest.json", params, files)
    for f in files:
        print(out / f)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gaps(args):
    out = _out(args)
    s_grid = parse_grid(args.s_grid)
    files, params = [], {"preset": args.preset, "s_grid": args.s_grid}

    def emit(name, sample):
        p, se = ds.gap_distribution(sample, s_grid)
        write_csv(out / name, "gaps", zip(s_grid, p, se))
        files.append(name)

    if args.preset == "figstats":
        lat = square_lattice(Irrational((-math.sqrt(2), 0.0)))
        T = args.T or 70.0
        a = ds.directions_2d(lat, ShellSpec(0.0, T), half_plane=True)
        n_sqrt = args.n or 7765
        b = ds.sqrt_mod_one(n_sqrt)
        emit("gaps_lattice.csv", a)
        emit("gaps_sqrt.csv", b)
        ks = float(ks_2samp(ds.normalized_gaps(a), ds.normalized_gaps(b)).statistic)
        write_csv(out / "ks.csv", ("N_lattice", "N_sqrt", "ks"), [(a.N, b.N, ks)])
        files.append("ks.csv")
        params.update(T=T, n=n_sqrt, lattice=describe_lattice(lat), half_plane=True)
    elif args.preset == "poisson":
        n = args.n or 10**6
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
        u = rng.random(n) - 0.5
        u = np.where(u <= -0.5, u + 1, u)
        emit("gaps_poisson.csv", ds.DirectionSample(np.sort(u)))
        write_csv(out / "reference.csv", ("s", "exp_minus_s"), zip(s_grid, np.exp(-s_grid)))
        files.append("reference.csv")
        params.update(n=n)
    else:
        visible = args.visible or args.preset == "farey"
        lat = build_lattice(args, Rational.zero(2) if args.preset == "farey" else None)
        T = args.T or 200.0
        sample = ds.directions_2d(lat, ShellSpec(args.c, T), visible_only=visible)
        emit("gaps.csv", sample)
        params.update(T=T, c=args.c, visible=visible, lattice=describe_lattice(lat), N=sample.N)
    _finish(args, out, params, files)


def cmd_discs(args):
    out = _out(args)
    lat = build_lattice(args)
    T = args.T or 1000.0
    sigma = args.sigma if args.sigma is not None else 0.5
    rs = parse_ints(args.r)
    n = args.n or 10**4
    est = ds.empirical_E_curve(lat, rs, sigma, args.c, T, n, args.seed, visible_only=args.visible,
                               workers=args.workers)
    write_csv(out / "counts.csv", "counts", [(r, e.value, e.stderr) for r, e in zip(rs, est)])
    _finish(args, out, {"lattice": describe_lattice(lat), "T": T, "c": args.c, "sigma": sigma, "r": rs,
                        "n": n, "visible": args.visible}, ["counts.csv"])


def cmd_freepath(args):
    out = _out(args)
    xi = parse_grid(args.xi_grid)
    n = args.n or 10**4
    if args.preset == "trivial-channel":
        lat = square_lattice()
        rho = args.rho or 0.1
        t_max = float(xi.max()) * rho ** -1 * 1.05
        sample = lorentz.sample_free_paths_fixed(lat, (0.5, 0.5), None, rho, (1.0, 0.0), n, t_max)
        params = {"preset": "trivial-channel", "q0": [0.5, 0.5], "direction": [1.0, 0.0]}
    else:
        lat = build_lattice(args)
        rho = args.rho or 1e-3
        t_max = float(xi.max()) * rho ** (1 - lat.dim) * 1.05
        if args.averaged:
            direction = None if args.direction is None else parse_vector(args.direction)
            sample = lorentz.sample_free_paths_averaged(lat, rho, n, args.seed, t_max, direction,
                                                        workers=args.workers)
            params = {"averaged": True}
        else:
            q0 = parse_vector(args.q0) if args.q0 else np.array(DEFAULT_Q0)
            if args.direction is not None:
                sample = lorentz.sample_free_paths_fixed(lat, q0, None, rho, parse_vector(args.direction), n,
                                                         t_max)
            else:
                sample = lorentz.sample_free_paths(lat, q0, None, rho, n, args.seed, t_max,
                                                   workers=args.workers)
            params = {"q0": q0.tolist()}
        if args.direction is not None:
            params["direction"] = parse_vector(args.direction).tolist()
    p, se = sample.survival(xi)
    cens = sample.censored_fraction
    write_csv(out / "freepath.csv", "freepath", [(x, a, b, cens) for x, a, b in zip(xi, p, se)])
    params.update(lattice=describe_lattice(lat), rho=rho, n=n, t_max=t_max, xi_grid=args.xi_grid)
    _finish(args, out, params, ["freepath.csv"])


def cmd_mc(args):
    out = _out(args)
    n = args.n or 10**4
    alpha = alpha_kind(args)
    params = {"curve": args.curve, "n": n, "c": args.c, "alpha": args.alpha}
    if args.curve in ("F", "E"):
        sigmas = parse_grid(args.sigma_grid)
        rs = parse_ints(args.r)
        fn = mc.cylinder_counts if args.curve == "F" else mc.cone_counts
        counts = fn(sigmas, args.c, alpha, n, args.seed, workers=args.workers)
        rows = []
        for k, s in enumerate(sigmas):
            for r, e in zip(rs, mc.count_distribution(counts[:, k], rs)):
                rows.append((s, r, e.value, e.stderr, n))
        name = f"{args.curve}.csv"
        write_csv(out / name, "F" if args.curve == "F" else ("sigma", "r", "E_hat", "stderr", "n"), rows)
        params.update(sigma_grid=args.sigma_grid, r=rs)
    else:
        xi = parse_grid(args.xi_grid)
        curve = mc.mc_Phi_density(xi, n, args.seed, h=args.h, alpha=alpha, workers=args.workers)
        name = "Phi.csv"
        write_csv(out / name, "Phi", [(x, p, s, curve.h) for x, p, s in zip(xi, curve.phi, curve.stderr)])
        params.update(xi_grid=args.xi_grid, h=curve.h, recommended_h=curve.recommended_h)
    _finish(args, out, params, [name])


def cmd_compare(args):
    out = _out(args)
    try:
        theorem = THEOREM_ALIASES[args.theorem]
    except KeyError:
        raise ConfigError(f"unknown --theorem {args.theorem!r}; choose from {sorted(THEOREM_ALIASES)}")
    n = args.n or 10**4
    n_mc = args.n_mc or n
    tol = args.tol
    params = {"theorem": theorem, "n": n, "n_mc": n_mc, "tol": tol}
    if theorem in ("cone", "cylinder"):
        rs = parse_ints(args.r)
        sigma = args.sigma if args.sigma is not None else 0.5
        if theorem == "cone":
            lat = build_lattice(args)
            T = args.T or 2000.0
            emp = ds.empirical_E_curve(lat, rs, sigma, args.c, T, n, args.seed, workers=args.workers)
            counts = mc.cone_counts([sigma], args.c, _mc_alpha(lat), n_mc, args.seed + 1,
                                    workers=args.workers)[:, 0]
        else:
            lat = build_lattice(args, DEFAULT_IRRATIONAL)
            T = args.T or 1e4
            rho = sigma / T
            shell = ShellSpec(args.c, T)
            cnt = lorentz.ray_count_sample(lat, shell, rho, n, args.seed, workers=args.workers)
            emp = mc.count_distribution(cnt, rs)
            counts = mc.cylinder_counts([sigma], args.c, _mc_alpha(lat), n_mc, args.seed + 1,
                                        workers=args.workers)[:, 0]
        ref = mc.count_distribution(counts, rs)
        rows = [(r, e.value, e.stderr, m.value, m.stderr, abs(e.value - m.value)) for r, e, m in zip(rs, emp, ref)]
        write_csv(out / "compare.csv", ("r", "empirical", "empirical_se", "mc", "mc_se", "abs_diff"), rows)
        stat = max(row[-1] for row in rows)
        params.update(sigma=sigma, T=T, c=args.c, r=rs, lattice=describe_lattice(lat))
    else:
        lat = build_lattice(args)
        rho = args.rho or 1e-3
        xi = parse_grid(args.xi_grid)
        q0 = parse_vector(args.q0) if args.q0 else np.array(DEFAULT_Q0)
        emp, emp_se, sample = lorentz.empirical_free_path_cdf(lat, q0, None, rho, xi, n, args.seed,
                                                              workers=args.workers)
        F, F_se = mc.mc_F0_curve(xi, n_mc, args.seed + 1, alpha=DEFAULT_IRRATIONAL, workers=args.workers)
        rows = [(x, a, b, f, g, abs(a - f)) for x, a, b, f, g in zip(xi, emp, emp_se, F, F_se)]
        write_csv(out / "compare.csv", ("xi", "empirical", "empirical_se", "mc", "mc_se", "abs_diff"), rows)
        stat = max(row[-1] for row in rows)
        params.update(rho=rho, q0=q0.tolist(), xi_grid=args.xi_grid, lattice=describe_lattice(lat),
                      censored_fraction=sample.censored_fraction)
    verdict = "pass" if stat <= tol else "fail"
    write_csv(out / "verdict.csv", ("statistic", "tolerance", "verdict"), [(stat, tol, verdict)])
    print(f"sup|empirical - mc| = {stat:.5f} (tolerance {tol}): {verdict}")
    _finish(args, out, params, ["compare.csv", "verdict.csv"])


def _mc_alpha(lat: AffineLatticeSpec):
    if isinstance(lat.alpha, Rational):
        return None if lat.alpha.is_integral else lat.alpha
    return lat.alpha


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--lattice", metavar="FILE", help="basis rows, optional 'alpha ...' line")
    src.add_argument("--preset", metavar="NAME", help="named lattice or experiment preset")
    common.add_argument("--alpha", help="'p1/q p2/q' or 'irrational x y'")
    common.add_argument("--rho", type=float)
    common.add_argument("--sigma", type=float)
    common.add_argument("--T", type=float)
    common.add_argument("--c", type=float, default=0.0)
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int, required=True)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default="out", metavar="DIR")

    p = argparse.ArgumentParser(prog="llg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gaps", parents=[common], help="gap distributions of directions")
    g.add_argument("--s-grid", default="0:4:0.02")
    g.add_argument("--visible", action="store_true")
    g.set_defaults(func=cmd_gaps)

    d = sub.add_parser("discs", parents=[common], help="disc count distribution over directions")
    d.add_argument("--r", default="0,1,2,3")
    d.add_argument("--visible", action="store_true")
    d.set_defaults(func=cmd_discs)

    f = sub.add_parser("freepath", parents=[common], help="free path length distribution")
    f.add_argument("--xi-grid", default="0:5:0.05")
    f.add_argument("--q0", help="start point 'x y'")
    f.add_argument("--direction", help="fixed direction 'x y'")
    f.add_argument("--averaged", action="store_true", help="start uniform in a fundamental cell")
    f.set_defaults(func=cmd_freepath)

    m = sub.add_parser("mc", parents=[common], help="random-lattice Monte Carlo curves")
    m.add_argument("--curve", choices=["F", "E", "Phi"], default="F")
    m.add_argument("--sigma-grid", default="0.1:2.0:0.1")
    m.add_argument("--xi-grid", default="0.05:3.0:0.05")
    m.add_argument("--r", default="0,1,2")
    m.add_argument("--h", type=float)
    m.set_defaults(func=cmd_mc)

    c = sub.add_parser("compare", parents=[common], help="empirical vs Monte Carlo limit")
    c.add_argument("--theorem", required=True, help="free-path | cone | cylinder (aliases 1.1, 2.1, 3.1)")
    c.add_argument("--r", default="0,1,2")
    c.add_argument("--xi-grid", default="0:3:0.05")
    c.add_argument("--q0")
    c.add_argument("--n-mc", type=int)
    c.add_argument("--tol", type=float, default=0.02)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"llg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
