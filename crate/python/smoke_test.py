"""Smoke test for the compiled extension. Build it first:

    cd crates/py && maturin develop --release
"""
import math

import tecell_py as tc


def main():
    mesh = tc.Mesh([1.0, 0.4, 1.0], [5, 2, 5])
    assert mesh.num_cells == 12
    assert mesh.regions.count("separator") == 2

    report = tc.Params(current_anode=0.3).validate(mesh)
    assert all(ok for ok, _ in report.values()), report

    assert abs(tc.bv_current(1.0, 1.0, 0.0, 1.0, math.log(2.0)) - 1.5) < 1e-15

    sol = tc.solve(mesh, tc.Params(current_anode=0.3), 1e-2)
    assert sol["residual_norm"] < 1e-9
    assert len(sol["phis"]) == 10 and len(sol["phie"]) == 12

    cfg = (
        "mesh.lengths = 1, 0.4, 1\n"
        "mesh.cells = 5, 2, 5\n"
        "params.current_anode = 0.8\n"
        "solver.eps = 0.3\n"
    )
    run = tc.run(cfg)
    assert 0.0 < run["t_star"] < 1.0
    print(f"smoke ok: t_star = {run['t_star']}, steps = {len(run['times']) - 1}")


if __name__ == "__main__":
    main()
