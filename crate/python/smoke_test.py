#!/usr/bin/env python3
"""Smoke test for the lqts_py extension module.

Builds the cdylib with cargo, copies it next to this script under the
importable name, and exercises the public surface against known values.

Usage: python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_stage() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "lqts-py", "--release"], cwd=ROOT, check=True
    )
    built = ROOT / "target" / "release" / "liblqts_py.so"
    staged = Path(__file__).resolve().parent / "lqts_py.so"
    shutil.copy2(built, staged)
    return staged


def approx(a, b, rel=1e-8):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-12)


def main() -> int:
    staged = build_and_stage()
    sys.path.insert(0, str(staged.parent))
    import lqts_py

    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}")
        if not ok:
            raise SystemExit(f"smoke test failed at: {name}")

    m = lqts_py.Model.ising_chain(6, 0.3, False)
    check("model shape", m.n_sites == 6 and m.n_edges == 5 and m.diameter == 5)
    check("site distance", m.site_distance(0, 4) == 4)

    # the last open-chain edge carries the fields of both endpoints,
    # so J = max edge norm = sqrt(1 + 4 h^2)
    j, n_max, n_bdy, m_growth = m.geometry()
    check("geometry constants", approx(j, math.sqrt(1.36), 1e-9) and n_max == 2)

    # canonical identity on the full system: F = Var H
    beta = 0.1
    f_full = lqts_py.local_qfi(m, list(range(6)), beta)
    fd = lqts_py.qfi_fd_oracle(m, list(range(6)), beta, 1e-4)
    check("fd oracle agreement", approx(f_full, fd, 1e-4))

    # a single decoupled sigma-z spin: F = 1 - tanh(beta)^2
    single = lqts_py.Model.from_json(
        json.dumps(
            {
                "schema_version": 1,
                "sites": 1,
                "edges": [[0]],
                "terms": {
                    "explicit": [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]]
                },
            }
        )
    )
    f1 = lqts_py.local_qfi(single, [0], 0.4)
    check("single-spin closed form", approx(f1, 1.0 - math.tanh(0.4) ** 2, 1e-10))
    check(
        "cramer-rao floor",
        approx(lqts_py.cramer_rao_precision(f1), 1.0 / f1, 1e-12),
    )

    # closed-form correlation length: frozen reference value at beta*J = 0.1
    xi = lqts_py.ising_xi(0.1, 1.0)
    check("ising xi reference", abs(xi - 1.0621) < 1e-3)
    check("beta star boundary", lqts_py.ising_beta_star(1.0) > 0.1)
    try:
        lqts_py.ising_xi(0.5, 1.0)
        check("xi domain error", False)
    except ValueError:
        check("xi domain error", True)

    # full bound report on a chain window
    chain = lqts_py.Model.ising_chain(8, 0.0, False)
    report = json.loads(lqts_py.bound_report(chain, [3, 4], 0.1))
    check("bound satisfied", report["satisfied"] is True)
    check("bound lhs below rhs", report["lhs"] <= report["rhs_thm1"] + 1e-9)
    check("1d bound present on chains", report["rhs_1d"] is not None)

    # empirical correlation length (diagnostic) on a transverse-field chain
    tfim = lqts_py.Model.ising_chain(8, 0.4, False)
    xi_emp = lqts_py.fit_xi(tfim, 0.2, 7)
    check("empirical xi positive", xi_emp > 0.0)

    print(f"smoke test passed: {checks} checks")
    return 0


if __name__ == "__main__":
    sys.exit(main())
