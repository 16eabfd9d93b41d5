"""Command-line driver: offline training, online solves, comparison reports.

Exit codes: 0 on success, 1 on numerical or I/O failure, 2 on usage errors.
"""

import argparse
import os
import sys

from .archive import load_archive, save_archive
from .bench import get_case, run_comparison, run_pipeline
from .eim import save_selection_csv
from .errors import NumericalError
from .progressive import save_preim_log_csv
from .rom import online_solve, reconstruct, save_reduced_trajectory_csv
from .util import float_repr

ALGO_CHOICES = ("standard", "preim", "preim-nr", "user")


def _config_with_overrides(args):
    config = get_case(args.case)
    overrides = {}
    if getattr(args, "eps_pod", None) is not None:
        overrides["eps_pod"] = args.eps_pod
    if getattr(args, "eps_eim", None) is not None:
        overrides["eps_eim"] = args.eps_eim
    if getattr(args, "eps_rb", None) is not None:
        overrides["eps_rb"] = args.eps_rb
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
    return config


def cmd_offline(args):
    config = _config_with_overrides(args)
    model = config.build_model(args.refine)
    p_hf_init = None
    if args.init_params:
        p_hf_init = [float(tok) for tok in args.init_params.split(",")]
    result = run_pipeline(
        model, config, args.algo,
        rb_criterion=(args.rb_criterion == "on"),
        p_hf_init=p_hf_init,
    )
    save_archive(
        args.out, result.rom,
        case_id=config.case_id,
        refine=args.refine,
        algo=args.algo,
        eps_pod=config.eps_pod,
        eps_eim=config.eps_eim,
        eps_rb=config.eps_rb,
        grid_mode=config.grid_mode,
    )
    if result.state is not None:
        save_preim_log_csv(result.state,
                           os.path.join(args.out, "selection.csv"))
    else:
        save_selection_csv(result.eim,
                           os.path.join(args.out, "selection.csv"))
    print(
        f"case {config.case_id} algo {args.algo}: "
        f"N={result.basis.size} M={result.eim.rank} "
        f"HF solves={result.n_hf_solves} -> {args.out}"
    )
    return 0


def cmd_online(args):
    rom, manifest = load_archive(args.rom, with_basis=args.reconstruct)
    config = get_case(manifest["case"])
    lo, hi = config.parameter_range
    if not lo <= args.mu <= hi:
        print(
            f"warning: mu={args.mu:g} outside the parameter interval "
            f"[{lo:g}, {hi:g}]; extrapolating",
            file=sys.stderr,
        )
    reduced = online_solve(rom, args.mu)
    out_path = os.path.join(args.rom, f"trajectory_mu{args.mu:g}.csv")
    save_reduced_trajectory_csv(reduced, out_path)
    written = [out_path]
    if args.reconstruct:
        nodal = reconstruct(rom.basis, reduced)
        nodal_path = os.path.join(
            args.rom, f"trajectory_mu{args.mu:g}_nodal.csv")
        with open(nodal_path, "w", newline="\n") as fh:
            for row in nodal.fields:
                fh.write(",".join(float_repr(v) for v in row))
                fh.write("\n")
        written.append(nodal_path)
    print("\n".join(written))
    return 0


def cmd_report(args):
    config = _config_with_overrides(args)
    algorithms = [tok.strip() for tok in args.algos.split(",") if tok.strip()]
    run_comparison(config, algorithms, args.refine, args.out)
    print(os.path.join(args.out, config.case_id))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="preim",
        description="Reduced-order models for nonlinear parabolic heat "
                    "transfer with progressively built interpolation bases.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    offline = sub.add_parser("offline", help="train and archive a reduced model")
    offline.add_argument("--case", required=True, choices=("a", "b"))
    offline.add_argument("--algo", default="preim", choices=ALGO_CHOICES)
    offline.add_argument("--refine", type=int, default=3)
    offline.add_argument("--eps-pod", type=float, dest="eps_pod")
    offline.add_argument("--eps-eim", type=float, dest="eps_eim")
    offline.add_argument("--eps-rb", type=float, dest="eps_rb")
    offline.add_argument("--rb-criterion", choices=("on", "off"),
                         default="off")
    offline.add_argument("--init-params", dest="init_params",
                         help="comma-separated initial HF parameters")
    offline.add_argument("--out", required=True)
    offline.set_defaults(func=cmd_offline)

    online = sub.add_parser("online", help="solve one parameter from an archive")
    online.add_argument("--rom", required=True)
    online.add_argument("--mu", type=float, required=True)
    online.add_argument("--reconstruct", action="store_true")
    online.set_defaults(func=cmd_online)

    report = sub.add_parser("report", help="offline/online comparison tables")
    report.add_argument("--case", required=True, choices=("a", "b"))
    report.add_argument("--algos", default="standard,preim")
    report.add_argument("--refine", type=int, default=3)
    report.add_argument("--eps-pod", type=float, dest="eps_pod")
    report.add_argument("--eps-eim", type=float, dest="eps_eim")
    report.add_argument("--eps-rb", type=float, dest="eps_rb")
    report.add_argument("--out", required=True)
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NumericalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
