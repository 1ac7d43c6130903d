"""Smoke test for the _lcsmto extension: presets, schedule, a tiny training
run, and an oracle solve. Run directly (python test_smoke.py) or via ctest,
with the built module on PYTHONPATH."""

import math
import sys
import tempfile
from pathlib import Path

import numpy as np

import _lcsmto as m


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)


def main():
    names = m.preset_names()
    check(set(names) == {"rugby", "obstacle", "double_pipe"}, f"presets: {names}")

    cfg = m.ProblemConfig.preset("rugby")
    check(cfg.v_target == 0.9, "rugby volume target")
    check(cfg.grid_nx == 100 and cfg.grid_ny == 100, "rugby grid")

    # Config JSON round trip.
    check(m.ProblemConfig.from_json(cfg.to_json()).to_json() == cfg.to_json(),
          "config JSON round trip")

    # Curriculum checkpoints.
    check(m.scheduled_volume(0, cfg) == 1.0, "v(0)")
    check(abs(m.scheduled_volume(2000, cfg) - 0.95) < 1e-12, "v(2000)")
    check(abs(m.scheduled_volume(4000, cfg) - 0.9) < 1e-12, "v(4000)")

    # Material interpolation at the endpoints.
    check(abs(m.material_interp(0.0, cfg) - 2.5e4) < 1e-9, "kappa_inv(0)")
    check(abs(m.material_interp(1.0, cfg) - 2.5e-4) < 1e-12, "kappa_inv(1)")

    # Tiny deterministic training run end to end.
    cfg.grid_nx = cfg.grid_ny = 12
    cfg.n_bc_per_side = 4
    cfg.epochs = 5
    with tempfile.TemporaryDirectory() as tmp:
        out = m.Trainer(cfg, 0).train(Path(tmp), deterministic=True)
        check(out.final_epoch == 4, "final epoch")
        check(math.isfinite(out.final_breakdown.total), "finite loss")
        for f in ("history.csv", "summary.json", "density.csv", "checkpoint.ckpt"):
            check((Path(tmp) / f).exists(), f"missing artifact {f}")

        # Oracle on the exported density.
        res = m.validate_density_file(Path(tmp) / "density.csv",
                                      m.ProblemConfig.preset("rugby"))
        check(res.max_divergence <= 1e-8, "oracle divergence")
        check(np.asarray(res.u).size == (res.nx + 1) * res.ny, "u layout")

    # Gradient check on a reduced problem.
    gc = m.ProblemConfig.preset("rugby")
    gc.grid_nx = gc.grid_ny = 8
    gc.n_bc_per_side = 4
    err = m.gradcheck(gc, seed=0, n_coords=10, step=1e-6)
    check(err <= 1e-4, f"gradcheck error {err}")

    print("smoke ok")


if __name__ == "__main__":
    sys.exit(main())
