"""Reference optima for min ||x||_1 s.t. ||y - A x||_2 <= eps.

Each instance is solved twice, with Clarabel and with CVXOPT, and kept only
if the two agree. Output: tests/fixtures/l1_oracle.json.
"""
import json
import pathlib

import cvxpy as cp
import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "l1_oracle.json"


def solve(A, y, eps, solver):
    x = cp.Variable(A.shape[1])
    prob = cp.Problem(cp.Minimize(cp.norm1(x)), [cp.norm2(y - A @ x) <= eps])
    if solver == "CLARABEL":
        prob.solve(solver=solver, tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9)
    else:
        prob.solve(solver=solver)
    assert prob.status == cp.OPTIMAL, prob.status
    return prob.value


def unit_columns(A):
    return A / np.linalg.norm(A, axis=0)


def instance(name, A, y, eps, labels):
    a = solve(A, y, eps, "CLARABEL")
    b = solve(A, y, eps, "CVXOPT")
    assert abs(a - b) < 1e-5, (name, a, b)
    return {
        "name": name,
        "rows": A.shape[0],
        "cols": A.shape[1],
        "atoms_row_major": [float(v) for v in A.ravel()],
        "labels": labels,
        "y": [float(v) for v in y],
        "epsilon": eps,
        "objective": 0.5 * (a + b),
    }


def main():
    rng = np.random.default_rng(20240611)
    out = []
    for i in range(200):
        m = int(rng.integers(3, 11))
        n = int(rng.integers(m + 1, 17))
        A = unit_columns(rng.standard_normal((m, n)))
        x0 = np.zeros(n)
        support = rng.choice(n, size=int(rng.integers(1, 4)), replace=False)
        x0[support] = rng.standard_normal(support.size)
        y = A @ x0 + 0.05 * rng.standard_normal(m)
        eps = 1e-4 if i % 2 == 0 else 1e-2
        k = 2 + i % 2
        out.append(instance(f"random-{i:03d}", A, y, eps, [str(j % k) for j in range(n)]))

    A = unit_columns(rng.standard_normal((8, 12)))
    y = 0.8 * A[:, 2] - 0.5 * A[:, 9]
    out.append(instance("sparse-8x12", A, y, 1e-4, [str(j // 4) for j in range(12)]))

    OUT.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {len(out)} instances to {OUT}")


if __name__ == "__main__":
    main()
