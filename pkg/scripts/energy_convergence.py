"""Relative energy drift of a seeded run at a sequence of halved steps."""
import argparse
import json
from dataclasses import asdict, dataclass

from bmflow.sim.params import ModelParams
from bmflow.sim.runner import run_simulation


@dataclass
class Config:
    grid_size: int = 32
    t_end: float = 0.5
    dt: float = 0.005
    levels: int = 2
    seed: int = 0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    for k, v in asdict(Config()).items():
        ap.add_argument(f"--{k.replace('_', '-')}", type=type(v), default=v)
    cfg = Config(**vars(ap.parse_args()))
    prev = None
    for lvl in range(cfg.levels):
        dt = cfg.dt / 2**lvl
        res = run_simulation(ModelParams(), cfg.grid_size, dt, cfg.t_end, seed=cfg.seed)
        drift = max(r.energy_residual for r in res.records)
        row = dict(dt=dt, drift=drift, ratio=None if prev is None else prev / drift,
                   entropy_lhs_max=max(r.entropy_balance_lhs for r in res.records))
        print(json.dumps(row), flush=True)
        prev = drift


if __name__ == "__main__":
    main()
