"""Command-line front end.

Dispatches to the computation modules and emits CSV/JSON tables.  All
numeric formatting is 17 significant digits so emitted doubles
round-trip exactly; given the same config and seed the output bytes are
identical run to run.  Config precedence: built-in defaults, then the
--config key=value file, then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .model import (
    INFINITE_BETA,
    FrequencyKind,
    MatsubaraFrequency,
    ModelParams,
    NumericPolicy,
    RegularizationScheme,
)
from . import analytic, exactdiag, lattice, loops, matsubara, verification


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    m: float = 1.0
    mu: float = 1.0
    lam: float = 1.0
    beta: float = INFINITE_BETA
    scheme: str = "time-splitting"
    n_max: int = 60
    n_tau: int = 64
    sweeps: int = 2_000_000
    thermalization: int = 20_000
    seed: int = 0
    winding_cutoff: int = 512
    n_levels: int = 10
    tau_points: int = 33
    with_mc: int = 0
    channel: str = "fermion"
    j: int = 0
    momenta: str = ""
    out: str = ""
    samples_out: str = ""


_INT_KEYS = {
    "n_max", "n_tau", "sweeps", "thermalization", "seed", "winding_cutoff",
    "n_levels", "tau_points", "with_mc", "j",
}
_FLOAT_KEYS = {"m", "mu", "lam"}
_STR_KEYS = {"scheme", "channel", "momenta", "out", "samples_out"}
_ALIASES = {"lambda": "lam", "nmax": "n_max", "ntau": "n_tau"}


def parse_beta(text: str) -> float:
    if text.strip() == "inf":
        return INFINITE_BETA
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"beta must be a number or 'inf', got {text!r}"
        ) from None


def load_config_file(path: str) -> dict:
    updates: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = _ALIASES.get(key.strip(), key.strip())
        val = val.strip()
        if key == "beta":
            try:
                updates["beta"] = parse_beta(val)
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"config: {exc}") from None
        elif key in _INT_KEYS:
            try:
                updates[key] = int(val)
            except ValueError:
                raise UsageError(f"config: {key} must be an integer, got {val!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                updates[key] = float(val)
            except ValueError:
                raise UsageError(f"config: {key} must be a number, got {val!r}") from None
        elif key in _STR_KEYS:
            updates[key] = val
        else:
            raise UsageError(f"config: unknown key {key!r}")
    return updates


def g17(v: float) -> str:
    return format(float(v), ".17g")


def _write_out(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params(cfg: RunConfig) -> ModelParams:
    try:
        return ModelParams(m=cfg.m, mu=cfg.mu, lam=cfg.lam, beta=cfg.beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require_finite_beta(cfg: RunConfig, cmd: str) -> None:
    if math.isinf(cfg.beta):
        raise UsageError(f"{cmd}: beta must be finite (pass --beta)")


def _scheme(cfg: RunConfig) -> RegularizationScheme:
    try:
        return RegularizationScheme(cfg.scheme)
    except ValueError:
        raise UsageError(
            f"scheme must be 'time-splitting' or 'symmetric', got {cfg.scheme!r}"
        ) from None


def _policy(cfg: RunConfig) -> NumericPolicy:
    return NumericPolicy(winding_cutoff=cfg.winding_cutoff)


def cmd_spectrum(cfg: RunConfig) -> int:
    params = _params(cfg)
    if cfg.n_levels < 1 or cfg.n_levels > cfg.n_max:
        raise UsageError(f"n_levels must be in [1, n_max], got {cfg.n_levels}")
    es = exactdiag.diagonalize(params, n_max=cfg.n_max)
    lines = ["sector,n,analytic,exactdiag,diff"]
    for sector in analytic.Sector:
        idx = np.flatnonzero(es.sectors == sector.value)[: cfg.n_levels]
        for n, i in enumerate(idx):
            ref = analytic.energy(params, analytic.SectorLevel(sector, n))
            ed = float(es.energies[i])
            lines.append(
                f"{sector.name.lower()},{n},{g17(ref)},{g17(ed)},{g17(ed - ref)}"
            )
    _write_out(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_correlator(cfg: RunConfig) -> int:
    params = _params(cfg)
    es = exactdiag.diagonalize(params, n_max=cfg.n_max)
    q = exactdiag.position_operator(es.basis, params)

    mc_cols: dict[int, tuple[float, float]] = {}
    if cfg.with_mc:
        _require_finite_beta(cfg, "correlator --with-mc")
        lat = lattice.LatticeConfig(n_tau=cfg.n_tau, beta=cfg.beta)
        mc = lattice.MCParams(
            sweeps=cfg.sweeps, thermalization=cfg.thermalization, seed=cfg.seed
        )
        res = lattice.run_chain(params, lat, mc)
        taus = [lat.a * k for k in range(cfg.n_tau)]
        for k in range(cfg.n_tau):
            mc_cols[k] = (res.profile_mean[k], res.profile_stderr[k])
    elif math.isinf(cfg.beta):
        span = 4.0 / cfg.m
        taus = list(np.linspace(0.0, span, cfg.tau_points))
    else:
        taus = list(np.linspace(0.0, cfg.beta, cfg.tau_points))

    lines = ["tau,analytic,exactdiag,perturbative,mc_mean,mc_stderr"]
    if math.isinf(cfg.beta):
        correction = 0.0
    else:
        correction = matsubara.boson_correction_real_space(
            params, beta=cfg.beta, policy=_policy(cfg)
        )
    for k, tau in enumerate(taus):
        tau = float(tau)
        if math.isinf(cfg.beta):
            ana = float(analytic.zero_T_boson_two_point(params, tau))
            pert = ana
        else:
            ana = analytic.exact_thermal_two_point(params, tau)
            pert = analytic.ho_thermal_correlator(cfg.m, cfg.beta, tau) + correction
        ed = exactdiag.time_ordered_two_point(
            q, q, tau, es, beta=cfg.beta,
            statistics=exactdiag.Statistics.BOSONIC,
        )
        if cfg.with_mc:
            mean, err = mc_cols[k]
            tail = f"{g17(mean)},{g17(err)}"
        else:
            tail = ","
        lines.append(f"{g17(tau)},{g17(ana)},{g17(ed)},{g17(pert)},{tail}")
    _write_out(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_tadpole(cfg: RunConfig) -> int:
    params = _params(cfg)
    if math.isinf(cfg.beta):
        lines = ["scheme,loop,pole,value"]
        for scheme in RegularizationScheme:
            try:
                r = matsubara.tadpole_phi(params, scheme)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            lines.append(
                f"{scheme.value},{g17(r.loop_integral)},{g17(r.pole_term)},{g17(r.value)}"
            )
    else:
        try:
            r = matsubara.tadpole_phi_thermal(
                params, max_winding=cfg.winding_cutoff, policy=_policy(cfg)
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        lines = [
            "beta,value,cross_check_abs_err,branch,max_winding,tail_bound",
            f"{g17(cfg.beta)},{g17(r.value)},{g17(r.cross_check_abs_err)},"
            f"{r.branch},{r.winding.max_winding},{g17(r.winding.tail_bound)}",
        ]
    _write_out(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_selfenergy(cfg: RunConfig) -> int:
    params = _params(cfg)
    if cfg.channel not in ("fermion", "boson"):
        raise UsageError(f"channel must be 'fermion' or 'boson', got {cfg.channel!r}")
    grid = np.geomspace(cfg.m / 10.0, 10.0 * cfg.m, 16)
    try:
        if cfg.channel == "fermion":
            if not math.isinf(cfg.beta):
                raise UsageError(
                    "selfenergy: fermion channel is zero-temperature only "
                    "(use --beta inf)"
                )
            lines = ["p,sigma_re,sigma_im,cross_check_abs_err"]
            for p in grid:
                r = matsubara.fermion_self_energy_2(params, float(p))
                lines.append(
                    f"{g17(p)},{g17(r.value.real)},{g17(r.value.imag)},"
                    f"{g17(r.cross_check_abs_err)}"
                )
        elif math.isinf(cfg.beta):
            lines = ["p,value_re,value_im,quad_abs"]
            for p in grid:
                r = matsubara.boson_self_energy_2(params, float(p))
                lines.append(
                    f"{g17(p)},{g17(r.value.real)},{g17(r.value.imag)},"
                    f"{g17(r.cross_check_abs_err)}"
                )
        else:
            lines = ["index,value_re,value_im"]
            for idx in range(8):
                w = MatsubaraFrequency(FrequencyKind.BOSONIC, idx, cfg.beta)
                r = matsubara.boson_self_energy_2(
                    params, w, beta=cfg.beta, policy=_policy(cfg)
                )
                lines.append(f"{idx},{g17(r.value.real)},{g17(r.value.imag)}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_out(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_loops(cfg: RunConfig) -> int:
    _require_finite_beta(cfg, "loops")
    if not cfg.momenta:
        raise UsageError("loops: --momenta is required (comma-separated indices)")
    try:
        indices = [int(tok) for tok in cfg.momenta.split(",")]
    except ValueError:
        raise UsageError(
            f"loops: momenta must be comma-separated integers, got {cfg.momenta!r}"
        ) from None
    if cfg.j and cfg.j != len(indices):
        raise UsageError(
            f"loops: j={cfg.j} does not match {len(indices)} momenta"
        )
    moms = tuple(
        MatsubaraFrequency(FrequencyKind.BOSONIC, idx, cfg.beta) for idx in indices
    )
    try:
        spec = loops.LoopSpec(
            momenta=moms, mu=cfg.mu, beta=cfg.beta, max_winding=cfg.winding_cutoff
        )
        result = loops.connected_loop(spec, _policy(cfg))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc = {
        "j": len(indices),
        "momenta": indices,
        "mu": cfg.mu,
        "beta": cfg.beta,
        "value": [result.value.real, result.value.imag],
        "degeneracy_profile": list(result.degeneracy_profile),
        "fast_path": result.fast_path,
        "tail_bound": result.tail_bound,
        "winding_breakdown": [[t.real, t.imag] for t in result.winding_breakdown],
    }
    _write_out(cfg, json.dumps(doc, indent=2) + "\n")
    return 0


def _estimate_dict(e: lattice.ChainEstimate) -> dict:
    return {
        "mean": e.mean,
        "stderr": e.stderr,
        "tau_int": e.tau_int,
        "n_samples": e.n_samples,
        "seed": e.seed,
    }


def cmd_mc(cfg: RunConfig) -> int:
    _require_finite_beta(cfg, "mc")
    params = _params(cfg)
    try:
        lat = lattice.LatticeConfig(n_tau=cfg.n_tau, beta=cfg.beta)
        mc = lattice.MCParams(
            sweeps=cfg.sweeps, thermalization=cfg.thermalization, seed=cfg.seed
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stream = None
    try:
        if cfg.samples_out:
            stream = open(cfg.samples_out, "w", encoding="utf-8")
        res = lattice.run_chain(params, lat, mc, samples_out=stream)
    finally:
        if stream is not None:
            stream.close()
    summary = {
        "phi": _estimate_dict(res.phi),
        "corr": {str(l): _estimate_dict(e) for l, e in sorted(res.corr.items())},
        "acceptance": res.acceptance,
        "shift_acceptance": res.shift_acceptance,
        "step": res.step,
        "shift_step": res.shift_step,
        "thermalized": res.thermalized,
        "n_measurements": res.n_measurements,
        "generator": res.generator,
        "seed": res.seed,
    }
    if cfg.out:
        lines = ["lag,tau,corr_mean,corr_stderr"]
        for k in range(cfg.n_tau):
            lines.append(
                f"{k},{g17(lat.a * k)},{g17(res.profile_mean[k])},"
                f"{g17(res.profile_stderr[k])}"
            )
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    opts = verification.VerifyOptions(
        n_max=cfg.n_max,
        n_tau=cfg.n_tau,
        sweeps=cfg.sweeps,
        seed=cfg.seed,
        winding_cutoff=cfg.winding_cutoff,
    )
    report = verification.run_all(opts)
    _write_out(cfg, report.to_json() + "\n")
    return 0 if report.overall_pass else 1


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "correlator": cmd_correlator,
    "tadpole": cmd_tadpole,
    "selfenergy": cmd_selfenergy,
    "loops": cmd_loops,
    "mc": cmd_mc,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--beta", type=parse_beta)
    common.add_argument("--m", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--nmax", dest="n_max", type=int)
    common.add_argument("--ntau", dest="n_tau", type=int)
    common.add_argument("--sweeps", type=int)
    common.add_argument("--scheme", choices=["time-splitting", "symmetric"])
    common.add_argument("--winding-cutoff", dest="winding_cutoff", type=int)

    parser = argparse.ArgumentParser(
        prog="yukawa1d",
        description="spectra and Euclidean correlators for the 0+1d Yukawa "
        "model by closed form, diagonalization, winding sums, and Monte Carlo",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sp = {}
    for name in _COMMANDS:
        sp[name] = sub.add_parser(name, parents=[common])
    sp["spectrum"].add_argument("--levels", dest="n_levels", type=int)
    sp["correlator"].add_argument("--tau-points", dest="tau_points", type=int)
    sp["correlator"].add_argument(
        "--with-mc", dest="with_mc", action="store_const", const=1
    )
    sp["correlator"].add_argument("--thermalization", type=int)
    sp["selfenergy"].add_argument("--channel", choices=["fermion", "boson"])
    sp["loops"].add_argument("--j", type=int)
    sp["loops"].add_argument("--momenta", metavar="I1,I2,...")
    sp["mc"].add_argument("--thermalization", type=int)
    sp["mc"].add_argument("--samples-out", dest="samples_out", metavar="PATH")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = replace(cfg, **load_config_file(args.config))
    names = {f.name for f in fields(RunConfig)}
    overrides = {
        k: v for k, v in vars(args).items() if k in names and v is not None
    }
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
