"""Independent brute-force oracle: vertex enumeration in (x, omega) space.

Deliberately shares no code with the simplex path it cross-checks.  The
optimum of max-min over {A x <= 1, x >= 0} equals the max of omega over the
polyhedron {A x <= 1, C x >= omega 1, x >= 0, omega >= 0}, attained at a
vertex, i.e. at some choice of n+1 linearly independent tight rows.  Only
viable for a handful of agents.
"""

import itertools

import numpy as np

from mmlp.instance import Instance


def bruteforce_optimum(inst: Instance, tol: float = 1e-9) -> float:
    n = inst.n_agents
    rows = []
    rhs = []
    for i in range(inst.n_constraints):
        row = [0.0] * (n + 1)
        for e in inst.constraint_agents[i]:
            row[e.agent] = e.coef
        rows.append(row)
        rhs.append(1.0)
    for k in range(inst.n_objectives):
        row = [0.0] * (n + 1)
        for e in inst.objective_agents[k]:
            row[e.agent] = -e.coef
        row[n] = 1.0
        rows.append(row)
        rhs.append(0.0)
    for v in range(n + 1):  # x >= 0 and omega >= 0
        row = [0.0] * (n + 1)
        row[v] = -1.0
        rows.append(row)
        rhs.append(0.0)
    A = np.array(rows)
    b = np.array(rhs)

    best = 0.0
    for subset in itertools.combinations(range(len(rows)), n + 1):
        M = A[list(subset)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        z = np.linalg.solve(M, b[list(subset)])
        if np.all(A @ z <= b + tol):
            best = max(best, float(z[n]))
    return best
