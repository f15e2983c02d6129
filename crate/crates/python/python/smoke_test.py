"""Smoke test for the massbound extension module."""

import json
import math

import massbound as mb


def main():
    disk = mb.Domain.unit_disk()
    ellipse = mb.Domain.ellipse(1.5, 1.0)
    m = mb.ConformalMap(ellipse, 256)
    x = m.inverse(0.3, -0.2)
    y = m.forward(*x)
    assert math.hypot(y[0] - 0.3, y[1] + 0.2) < 1e-10, y
    assert 0.8 < m.derivative_at_origin < 0.9

    grid = mb.Grid(64, 16)
    k = mb.Field.constant(grid, 1.0)
    lam, mass, _ = mb.radial_oracle(0.0, 0.5)
    sol = mb.solve_liouville(lam, 0.0, k, grid)
    assert sol.converged
    assert abs(sol.mass() - mass) / mass < 1e-2, (sol.mass(), mass)
    rep = sol.pohozaev()
    assert abs(rep.relative_residual) < 1e-2
    json.loads(rep.to_json())

    k_ell = mb.Field.transported(mb.ConformalMap(ellipse, 256), 0.0, lambda a, b: 1.0 + 0.3 * a + 0.1 * b, grid)
    cert = mb.liouville_certificate(0.0, k_ell)
    assert cert.rho0 > 8 * math.pi

    entries, fold = mb.liouville_branch(0.0, mb.Field.constant(grid, 1.0), [0.5, 1.0, 1.5, 2.0], grid)
    assert len(entries) == 4 and fold is not None
    assert abs(fold[1] - 2.0) < 0.05, fold

    cfg = json.loads(mb.builtin_configs("E7")[0])
    cfg["grid"] = {"n_r": 32, "n_theta": 16}
    report = json.loads(mb.run_experiment(json.dumps(cfg)))
    assert all(r["pass"] for r in report["records"])

    try:
        mb.Domain.ellipse(-1.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative semi-axis accepted")
    print("smoke test passed", disk.samples(4)[0])


if __name__ == "__main__":
    main()
