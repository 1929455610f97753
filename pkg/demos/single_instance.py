"""Run the three schemes on one sampled network and show the warden budget."""

import warnings

from covertnet.bounds import cutset_bound, necessary_inr
from covertnet.netgen import NetworkConfig, generate_instance
from covertnet.schemes import SCHEMES, RegimeWarning, run_scheme

# at l = n and alpha = 3.5 the hybrid is outside its regime and falls back to MH
warnings.simplefilter("ignore", RegimeWarning)


def main() -> None:
    cfg = NetworkConfig(n=4096, kappa=0.5, alpha=3.5, delta=0.05, l_beta=1.0, c_b=0.01, seed=1)
    inst = generate_instance(cfg)
    print(f"{inst.n_l} legitimate nodes, {inst.n_w} wardens, {len(inst.pairs)} pairs")
    print(f"necessary INR at a warden: {necessary_inr(cfg.delta, cfg.window):.3g}")
    bound = cutset_bound(cfg).total
    for name in SCHEMES:
        r = run_scheme(name, cfg, inst)
        cov = r.covertness
        print(f"{name:7s} T={r.throughput:.3e}  outage={r.outage:.3f}  "
              f"worst KL={cov.worst_bound:.2e} (delta {cfg.delta})  T/bound={r.throughput / bound:.1e}")


if __name__ == "__main__":
    main()
