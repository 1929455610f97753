"""Print the operating regime over (alpha, window exponent) at kappa = 1/2."""

from covertnet.bounds import classify_regime
from covertnet.netgen import NetworkConfig

alphas = (2.5, 3.0, 3.5, 4.0, 5.0)
betas = (0.0, 1.0, 2.0, 3.0)
print("alpha  " + "  ".join(f"l=n^{b:<3g}           " for b in betas))
for a in alphas:
    cells = []
    for b in betas:
        r = classify_regime(NetworkConfig(n=2.0**16, kappa=0.5, alpha=a, l_beta=b))
        cells.append(f"{r.label:15s} {r.exponent:+.3f}")
    print(f"{a:<5g}  " + "  ".join(cells))
