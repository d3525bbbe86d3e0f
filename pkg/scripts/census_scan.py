"""Escape fraction of the tube census for several tube radii.

    python3 scripts/census_scan.py --family D3Cubic --delta 0.05 0.1 --samples 100
"""

import argparse

from pseudosimple.cli import build_spec
from pseudosimple.dynamics import ClassifierSettings, IntegratorConfig, compute_connections, escape_census


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="D3Cubic", choices=["D3Cubic", "D3TildeCubic"])
    ap.add_argument("--delta", type=float, nargs="+", default=[0.1])
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--t-max", type=float, default=20000.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    spec = build_spec(args.family, {})
    tilde = args.family == "D3TildeCubic"
    # the reflection-symmetric run resolves the approach to the cycle far below the default atol
    config = IntegratorConfig(t_max=args.t_max, atol=1e-300 if tilde else 1e-12)
    settings = ClassifierSettings(transient=0.05 if tilde else 0.2)
    geo = compute_connections(spec)
    print("delta,samples,fraction,left_tube,not_converging,converges")
    for delta in args.delta:
        res = escape_census(spec, geo, delta=delta, n_samples=args.samples, seed=args.seed, config=config,
                            settings=settings, threads=args.threads, allow_reflections=tilde)
        n = {k: res.outcomes.count(k) for k in ("left-tube", "not-converging", "converges")}
        print(f"{delta},{res.n_samples},{res.fraction:.4f},{n['left-tube']},{n['not-converging']},{n['converges']}")


if __name__ == "__main__":
    main()
