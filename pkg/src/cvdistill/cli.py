"""Batch command-line front end.

Commands:
  gaussify       run the default (or configured) Gaussification scenario and
                 write convergence reports as JSON + CSV;
  repeater-scan  sweep maximum repeater distances, write a CSV table;
  verify         run the cross-module invariant suite, exit nonzero on failure.

Configuration is a flat key=value text file; command-line flags override it.
Exit codes: 0 success, 1 check failure, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import channels, fock, gaussian, protocols, repeater

SIG_DIGITS = 12


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{SIG_DIGITS}g}"


def parse_config(path) -> dict:
    """Flat key=value lines; '#' starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


class DomainError(ValueError):
    pass


def _get(cfg, key, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except (TypeError, ValueError) as exc:
        raise DomainError(f"bad value for {key}: {cfg[key]!r}") from exc


# ---------------------------------------------------------------------------
# gaussify
# ---------------------------------------------------------------------------

def default_gaussify_scenario(cfg) -> dict:
    scen = {
        "r": _get(cfg, "r", float, 0.4),
        "loss_km": _get(cfg, "loss_km", float, 0.0),
        "eta": _get(cfg, "eta", float, math.sqrt(0.3)),
        "beta": _get(cfg, "beta", float, 1.0),
        "cutoff": _get(cfg, "cutoff", int, fock.DEFAULT_CUTOFF),
        "n_max": _get(cfg, "n_max", int, 16),
        "oracle_n_max": _get(cfg, "oracle_n_max", int, 4),
        "r0": _get(cfg, "r0", float, 2.0),
        "input": _get(cfg, "input", str, "replaced"),
    }
    for key, cond, msg in [
        ("r", scen["r"] > 0, "r must be positive"),
        ("eta", 0.0 < scen["eta"] < 1.0, "eta must lie strictly inside (0, 1)"),
        ("beta", scen["beta"] > 0, "beta must be positive"),
        ("cutoff", scen["cutoff"] >= 4, "cutoff must be at least 4"),
        ("n_max", scen["n_max"] >= 2, "n_max must be at least 2"),
        ("r0", scen["r0"] > 0, "r0 must be positive"),
        ("input", scen["input"] in ("replaced", "gaussian"),
         "input must be 'replaced' or 'gaussian'"),
    ]:
        if not cond:
            raise DomainError(f"parameter {key}: {msg}")
    return scen


def run_gaussify(scen: dict) -> dict:
    cutoff = scen["cutoff"]
    filt = gaussian.thermal_filter(scen["beta"], modes=2)
    rho = fock.fock_tmsv(scen["r"], cutoff)
    if scen["loss_km"] > 0:
        transmittance = math.exp(-scen["loss_km"] / repeater.DEFAULT_L_ATT)
        rho = fock.thermal_loss_channel(rho, transmittance, repeater.DEFAULT_N_TH)
    if scen["input"] == "replaced":
        rho1, _ = fock.photon_replacement(rho, scen["eta"])
    else:
        rho1 = rho  # Gaussian control scenario: every deviation should vanish
    tau1 = fock.filtered_object(rho1, filt)
    h1 = protocols.charfun_from_fock(tau1)
    h_inf = protocols.gaussian_limit(h1.second_moments)

    n_list = [n for n in (1, 2, 4, 8, 16, 32, 64) if n <= scen["n_max"]]
    sup_rows = []
    for n in n_list:
        hn = protocols.scaled_power_charfun(h1, n)
        sup_rows.append({"N": n, "value": protocols.sup_deviation(hn, h_inf, r0=scen["r0"])})

    direction = np.array([1.0, 0.0, 0.0, 0.0])
    moments = protocols.moment_convergence_report(tau1, 4, n_list, direction)
    moment_rows = [{"k": row.k, "N": row.n_copies,
                    "value": [row.value.real, row.value.imag],
                    "wick": row.wick, "deviation": row.deviation}
                   for row in moments.rows]

    oracle_ns = [n for n in n_list if n <= scen["oracle_n_max"]]
    pairs = [((0, 0), (0, 0)), ((1, 1), (0, 0)), ((1, 0), (1, 0))]
    elements = protocols.matrix_element_convergence(rho1, filt, pairs, oracle_ns,
                                                    rank_tol=1e-9)
    element_rows = [{"N": row.n_copies, "bra": list(row.bra), "ket": list(row.ket),
                     "tau": [row.tau_element.real, row.tau_element.imag],
                     "rho_normalized": [row.rho_element_normalized.real,
                                        row.rho_element_normalized.imag]}
                    for row in elements.rows]

    fid_rows = []
    limit = channels.limit_state_cov(h1.second_moments, filt)
    if limit.physical:
        try:
            rho_inf = fock.fock_gaussian_cm2(
                gaussian.extract_symmetric(limit.gamma, tol=1e-6), cutoff)
        except (ValueError, fock.LeakageError):
            rho_inf = None
        if rho_inf is not None:
            state = rho1
            n = 1
            while 2 * n <= scen["oracle_n_max"]:
                state, _ = fock.building_block(state, state, 0.5, filt, rank_tol=1e-9)
                n *= 2
                fid_rows.append({"N": n, "value": fock.fidelity(state, rho_inf)})

    return {
        "scenario": scen,
        "gamma_tau1": h1.second_moments.tolist(),
        "gamma_limit": limit.gamma.tolist() if limit.physical else None,
        "limit_physical": limit.physical,
        "sup_deviation": sup_rows,
        "moments": moment_rows,
        "matrix_elements": {
            "rows": element_rows,
            "limit_tau": {str(k): [v.real, v.imag] for k, v in elements.limit_tau.items()},
            "limit_rho_normalized": {str(k): [v.real, v.imag]
                                     for k, v in elements.limit_rho_normalized.items()},
        },
        "fidelity": fid_rows,
    }


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_gaussify_outputs(report: dict, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "gaussify_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, default=_json_default))
    with open(out_dir / "gaussify_series.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "N", "value"])
        for row in report["sup_deviation"]:
            writer.writerow(["sup_deviation", row["N"], _fmt(row["value"])])
        for row in report["moments"]:
            if row["k"] == 4:
                writer.writerow(["moment_dev_k4", row["N"], _fmt(row["deviation"])])
        for row in report["fidelity"]:
            writer.writerow(["fidelity", row["N"], _fmt(row["value"])])


def cmd_gaussify(args) -> int:
    cfg = parse_config(args.config) if args.config else {}
    if args.cutoff:
        cfg["cutoff"] = str(args.cutoff)
    scen = default_gaussify_scenario(cfg)
    report = run_gaussify(scen)
    write_gaussify_outputs(report, Path(args.out))
    devs = [row["value"] for row in report["sup_deviation"]]
    print(f"gaussify: wrote reports to {args.out}; sup deviation "
          f"{devs[0]:.3e} -> {devs[-1]:.3e} over N = 1..{report['sup_deviation'][-1]['N']}")
    return 0


# ---------------------------------------------------------------------------
# repeater-scan
# ---------------------------------------------------------------------------

def default_scan_params(cfg) -> dict:
    params = {
        "r_min": _get(cfg, "r_min", float, 0.1),
        "r_max": _get(cfg, "r_max", float, 2.0),
        "r_step": _get(cfg, "r_step", float, 0.1),
        "k_set": _get(cfg, "k_set", lambda s: [int(x) for x in s.split(",")], [0, 1, 2, 3, 4]),
        "l_att": _get(cfg, "l_att", float, repeater.DEFAULT_L_ATT),
        "n_th": _get(cfg, "n_th", float, repeater.DEFAULT_N_TH),
        "lambda_factor": _get(cfg, "lambda_factor", float, repeater.DEFAULT_LAMBDA_FACTOR),
        "include_direct": _get(cfg, "include_direct", lambda s: s.lower() != "false", True),
    }
    if params["r_min"] <= 0 or params["r_max"] < params["r_min"] or params["r_step"] <= 0:
        raise DomainError("parameter r grid: need 0 < r_min <= r_max and r_step > 0")
    if any(k < 0 for k in params["k_set"]):
        raise DomainError("parameter k_set: swap depths must be nonnegative")
    if not 0.0 < params["lambda_factor"] < 1.0:
        raise DomainError("parameter lambda_factor: must lie strictly inside (0, 1)")
    return params


def run_scan(params: dict, variants, threads: int = 1) -> list:
    steps = int(round((params["r_max"] - params["r_min"]) / params["r_step"]))
    r_grid = [round(params["r_min"] + j * params["r_step"], 10) for j in range(steps + 1)]
    kwargs = dict(include_direct=params["include_direct"], l_att=params["l_att"],
                  n_th=params["n_th"], lambda_factor=params["lambda_factor"])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return repeater.scan(r_grid, params["k_set"], variants, executor=pool, **kwargs)
    return repeater.scan(r_grid, params["k_set"], variants, **kwargs)


def write_scan_csv(rows, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "m", "variant", "L_max_km", "delta_at_Lmax"])
        for row in rows:
            writer.writerow([_fmt(row.r), _fmt(row.m), row.variant,
                             _fmt(row.l_max_km), _fmt(row.delta_at_lmax)])


def cmd_repeater_scan(args) -> int:
    cfg = parse_config(args.config) if args.config else {}
    params = default_scan_params(cfg)
    variants = (args.variant,) if args.variant else repeater.VARIANTS
    rows = run_scan(params, variants, threads=args.threads)
    out = Path(args.out) / "repeater_scan.csv"
    write_scan_csv(rows, out)
    print(f"repeater-scan: wrote {len(rows)} rows to {out}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _check_appendix_a(cutoff: int):
    """Beam-splitter invariance of P x P for a squeezed-frame filter.

    The deviation is purely a truncation artifact; being amplitude-level it
    is bounded by a multiple of the square root of the population leakage,
    which loosens itself automatically at reduced cutoffs.
    """
    frame = gaussian.SymplecticMap(np.diag([math.exp(0.3), math.exp(-0.3)]))
    filt = gaussian.GaussianFilter((1.0,), frame)
    p = fock.filter_matrix(filt, cutoff, half=True)
    pp = np.kron(p, p)
    sigma = pp @ pp.conj().T
    sigma /= np.real(np.trace(sigma))
    bound = 4.0 * math.sqrt(fock.FockDensityMatrix(2, cutoff, sigma).leakage())
    worst = 0.0
    for refl in (0.25, 0.5, 0.75):
        u = fock.beam_splitter_unitary(refl, cutoff)
        worst = max(worst, np.linalg.norm(u @ pp @ u.conj().T - pp) / np.linalg.norm(pp))
    return worst <= bound, f"relative deviation {worst:.3e} vs leakage-scaled bound {bound:.3e}"


def _check_wick(cutoff: int):
    rho = fock.fock_tmsv(0.4, max(cutoff, 24))
    direction = np.array([1.0, 0.0, 0.0, 0.0])
    second = fock.moment(rho, fock.MomentSpec.power(direction, 2)).real
    worst = 0.0
    for k, dfact in ((2, 1.0), (4, 3.0), (6, 15.0)):
        value = fock.moment(rho, fock.MomentSpec.power(direction, k)).real
        worst = max(worst, abs(value - dfact * second ** (k // 2)))
    return worst < 1e-8, f"worst Wick defect {worst:.3e}"


def _check_pumping_equals_recursive(cutoff: int):
    rho = fock.fock_tmsv(0.3, cutoff)
    rho1, _ = fock.photon_replacement(rho, math.sqrt(0.3))
    filt = gaussian.thermal_filter(1.0, modes=2)
    h1 = protocols.charfun_from_fock(fock.filtered_object(rho1, filt))
    worst = 0.0
    for n in (2, 4, 8, 16):
        pumped = protocols.pump_charfun(h1, n)
        closed = protocols.scaled_power_charfun(h1, n)
        for r in protocols.evaluation_grid(2, r0=2.0, n_angles=4, radius_step=0.5):
            worst = max(worst, abs(pumped(r) - closed(r)))
    return worst < 1e-12, f"worst pointwise gap {worst:.3e}"


def _check_schur_vs_fock(cutoff: int):
    filt = gaussian.thermal_filter(1.0, modes=2)
    rho = fock.fock_tmsv(0.5, max(cutoff, 24))
    tau = fock.filtered_object(rho, gaussian.thermal_filter(1.0, modes=2))
    _, gamma_fock = fock.covariance_from_fock(tau)
    ch = channels.filter_channel_cj(filt)
    gamma_in = gaussian.embed_symmetric(gaussian.make_two_mode_squeezed(0.5)).gamma
    gamma_schur = channels.apply_gaussian_channel(ch, gamma_in)
    gap = np.abs(gamma_fock - gamma_schur).max()
    return gap < 1e-6, f"covariance gap {gap:.3e}"


def _check_boundary(cutoff: int):
    worst = 0.0
    for r in (0.25, 0.5, 1.0, 2.0):
        span = repeater.direct_lmax(r)
        delta = gaussian.duan_delta(repeater.transmit(r, span / 2.0))
        worst = max(worst, abs(delta - 1.0))
    return worst < 1e-9, f"worst |Delta - 1| = {worst:.3e}"


def verify_checks(cutoff: int):
    return [
        ("appendix_a_conjugation", lambda: _check_appendix_a(min(cutoff, 25))),
        ("wick_double_factorial", lambda: _check_wick(cutoff)),
        ("pumping_equals_recursive", lambda: _check_pumping_equals_recursive(cutoff)),
        ("compact_zero_persistence", lambda: _check_compact_zeros(cutoff)),
        ("schur_vs_fock_filter", lambda: _check_schur_vs_fock(cutoff)),
        ("boundary_consistency", lambda: _check_boundary(cutoff)),
        ("swap_never_entangles", _check_swap_monotone),
    ]


def _check_compact_zeros(cutoff: int):
    from scipy.optimize import brentq
    rho1 = fock.fock_basis_state((1,), cutoff)
    filt = gaussian.thermal_filter(1.0, modes=1)
    h1 = protocols.charfun_from_fock(fock.filtered_object(rho1, filt))
    # chi of |1> vanishes near |r| = sqrt(2); locate the zero of the
    # truncated handle itself so persistence is tested exactly
    t0 = brentq(lambda t: h1(np.array([t, 0.0])).real, 0.5, 2.5, xtol=1e-15)
    r0 = np.array([t0, 0.0])
    h = h1
    worst = 0.0
    for _ in range(8):
        h = protocols.compact_step(h, h1)
        worst = max(worst, abs(h(math.sqrt(2.0) * r0)))
    return worst < 1e-10, f"worst |chi| at the persistent zero {worst:.3e}"


def _check_swap_monotone():
    worst = -math.inf
    for c in np.linspace(1.0, 6.0, 40):
        smax = math.sqrt(max(c * c - 1.0, 0.0))
        for s in np.linspace(0.0, smax, 40):
            state = gaussian.SymmetricTwoMode(c, s)
            gap = gaussian.duan_delta(repeater.swap(state)) - gaussian.duan_delta(state)
            worst = max(worst, -gap)
    return worst <= 1e-12, f"largest Delta decrease under swap {worst:.3e}"


def cmd_verify(args) -> int:
    cutoff = args.cutoff or fock.DEFAULT_CUTOFF
    failures = 0
    for name, check in verify_checks(cutoff):
        try:
            ok, detail = check()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"verify: {failures} check(s) failed")
        return 1
    print("verify: all checks passed")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvdistill",
                                     description="continuous-variable distillation and repeater numerics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("gaussify", cmd_gaussify),
                     ("repeater-scan", cmd_repeater_scan),
                     ("verify", cmd_verify)):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="key=value config file")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--cutoff", type=int, default=None, help="Fock cutoff per mode")
        p.add_argument("--variant", choices=list(repeater.VARIANTS), default=None)
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (DomainError, ValueError, fock.LeakageError,
            fock.DegeneratePostselectionError, channels.IllConditionedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
