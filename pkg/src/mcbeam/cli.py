"""Command line entry point: ``mcbeam converge|sweep|nash-check``."""

import argparse
import sys
from pathlib import Path

from . import __version__
from .experiment import ConfigError, override, run_convergence, run_nash_check, run_sweep, validate_config


def _snr_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="mcbeam", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "converge": "single seeded run; writes the per-update utility trace",
        "sweep": "utility versus SNR over trials and schemes",
        "nash-check": "run the game and re-solve every BS against the final state",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", type=Path, help="JSON config file (defaults apply when omitted)")
        s.add_argument("--seed", type=_seed)
        s.add_argument("--scheme", help="priced_game, noncoop, cm, iczf, time_sharing, "
                                        "a comma-separated list, or 'all'")
        s.add_argument("--utility", choices=("rate", "prop_fair", "alpha_fair"))
        s.add_argument("--snr-db", type=_snr_list, help="comma-separated SNR values in dB")
        s.add_argument("--out", help="output directory")
        s.add_argument("--dump-beams", action="store_true", default=None,
                       help="also save final beams and channels as .npz")
        if name == "sweep":
            s.add_argument("--trials", type=int)
            s.add_argument("--workers", type=int)
        if name == "nash-check":
            s.add_argument("--eps", type=float, default=1e-4)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else "{}"
        cfg = validate_config(text)
        scheme = args.scheme.split(",") if args.scheme and "," in args.scheme else args.scheme
        cfg = override(cfg, seed=args.seed, scheme=scheme, utility=args.utility,
                       snr_db=args.snr_db, out_dir=args.out, dump_beams=args.dump_beams)
        if args.command == "sweep":
            if args.trials is not None or args.workers is not None:
                from dataclasses import replace
                if (args.trials is not None and args.trials < 1) or (
                        args.workers is not None and args.workers < 1):
                    raise ConfigError("--trials/--workers", "must be >= 1")
                cfg = replace(cfg, trials=args.trials or cfg.trials,
                              workers=args.workers or cfg.workers)
            rows, summary = run_sweep(cfg)
            for s in summary:
                print(f"snr={s['snr_db']:g} dB  {s['scheme']:<12} mean={s['mean_utility']:.6g} "
                      f"se={s['stderr_utility']:.3g} (n={s['trials']})")
        elif args.command == "converge":
            st = run_convergence(cfg)
            print(f"{st.stop_reason} after {st.outer_iteration} rounds, "
                  f"{st.accepted_updates} accepted updates, utility={st.utility:.8g}")
        else:
            st, rep = run_nash_check(cfg, eps=args.eps)
            for m, r in enumerate(rep.relative):
                print(f"bs {m}: payoff={rep.payoffs[m]:.8g} relative_gain={r:.3e}")
            print("certified" if rep.certified else "NOT certified")
            if not rep.certified:
                return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    print(f"outputs in {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
