"""Fit throughput exponents of detoured MH and modified HC over n."""

import sys

from covertnet.harness import SweepSpec, fit_exponent, run_sweep, theory_exponent


def fit(scheme: str, alpha: float, trials: int) -> None:
    spec = SweepSpec(n_values=tuple(2.0**e for e in range(10, 16)), kappas=(0.5,), alphas=(alpha,),
                     trials=trials, schemes=(scheme,), c_b=0.01, bound=False, seed=3)
    rows = run_sweep(spec)
    theory = theory_exponent(spec.configs()[-1])
    res = fit_exponent(rows, theory=theory, scheme=scheme)
    means = ", ".join(f"{m:.2e}" for m in res.means)
    print(f"{scheme} alpha={alpha}: exponent {res.exponent:.3f} +- {res.stderr:.3f}, theory {theory:.3f}")
    print(f"  mean T per n: {means}")


if __name__ == "__main__":
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10
    fit("mh", 3.5, trials)
    fit("hc", 2.5, trials)
