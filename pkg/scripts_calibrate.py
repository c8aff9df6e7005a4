"""Scratch calibration for acceptance-scale runs (not part of the package)."""
import time

import numpy as np

from mmvp.harness import derive_seed, efficiency_study
from mmvp.model import GenerationConfig, PoissonRates, generate_instance
from mmvp.baselines import OracleKnowledge, recover
from mmvp.solver import SporeConfig


def cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def fig3c_probe():
    print("== fig3c high-rate probe ==", flush=True)
    for rate_total in (2.0, 50.0):
        values = []
        t0 = time.time()
        for trial in range(6):
            cfg = GenerationConfig(n_dims=20, sparsity=3, rate_total=rate_total,
                                   n_sensors=10, n_observations=100,
                                   noise_variance=1e-2,
                                   seed=derive_seed(0, "fig3c", rate_total, trial))
            inst = generate_instance(cfg)
            res = recover("spore", inst.batch, inst.ensemble,
                          OracleKnowledge.from_instance(inst),
                          spore_config=SporeConfig(),
                          rng=np.random.default_rng(derive_seed(1, "fig3c", rate_total, trial)))
            values.append(cos(res.rates_hat, inst.rates.values))
        print(f"rate_total={rate_total}: mean={np.mean(values):.4f} vals={np.round(values,3)} "
              f"({time.time()-t0:.0f}s)", flush=True)


def gsweep_probe():
    print("== G-sweep probe (k=7 N=50 D=1000 sum=1 sigma2=1e-2 M=1) ==", flush=True)
    for n_groups in (5, 20):
        sp, gm = [], []
        t0 = time.time()
        for trial in range(5):
            cfg = GenerationConfig(n_dims=50, sparsity=7, rate_total=1.0,
                                   n_sensors=1, n_groups=n_groups,
                                   n_observations=1000, noise_variance=1e-2,
                                   seed=derive_seed(0, "g", n_groups, trial))
            inst = generate_instance(cfg)
            oracle = OracleKnowledge.from_instance(inst)
            r1 = recover("spore", inst.batch, inst.ensemble, oracle,
                         spore_config=SporeConfig(),
                         rng=np.random.default_rng(derive_seed(1, "g", n_groups, trial)))
            r2 = recover("gm_smv", inst.batch, inst.ensemble, oracle)
            sp.append(cos(r1.rates_hat, inst.rates.values))
            gm.append(cos(r2.rates_hat, inst.rates.values))
        print(f"G={n_groups}: spore={np.mean(sp):.4f} gm_smv={np.mean(gm):.4f} "
              f"margin={np.mean(sp)-np.mean(gm):.4f} ({time.time()-t0:.0f}s)", flush=True)


def efficiency_probe():
    print("== efficiency probe ==", flush=True)
    t0 = time.time()
    rows = efficiency_study([1, 3], [250, 1000], n_trials=10, base_seed=0)
    for row in rows:
        print(f"k={row.sparsity} D={row.n_observations}: var={row.pooled_variance:.6f} "
              f"CR={row.cr_bound:.6f} ratio={row.variance_ratio:.2f} n={row.n_pooled}", flush=True)
    print(f"({time.time()-t0:.0f}s)", flush=True)


if __name__ == "__main__":
    fig3c_probe()
    gsweep_probe()
    efficiency_probe()
