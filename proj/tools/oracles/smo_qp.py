import math, numpy as np, cvxpy as cp
from cvxopt import matrix, solvers
n = 40
X = np.array([[math.sin(0.7*(i+1)) + 0.3*math.cos(2.1*i), math.cos(0.45*(i+1)) + 0.2*math.sin(1.7*i)] for i in range(n)])
y = np.array([1.0 if X[i,0]*X[i,1] + 0.15*math.sin(3*i) > 0 else -1.0 for i in range(n)])
def K(kind, g):
    if kind == 'rbf':
        d = ((X[:,None,:]-X[None,:,:])**2).sum(-1); return np.exp(-g*d)
    if kind == 'linear': return X@X.T
    return (g*(X@X.T))**3
cases = [('rbf', 0.5, 1.0), ('rbf', 2.0, 10.0), ('linear', 0, 0.5), ('poly', 0.5, 1.0)]
solvers.options.update(show_progress=False, abstol=1e-12, reltol=1e-12, feastol=1e-12)
for kind, g, C in cases:
    Q = (y[:,None]*y[None,:])*K(kind, g)
    a = cp.Variable(n)
    prob = cp.Problem(cp.Minimize(0.5*cp.quad_form(a, cp.psd_wrap(Q)) - cp.sum(a)), [a >= 0, a <= C, y@a == 0])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    # independent interior-point cross-check
    G = np.vstack([-np.eye(n), np.eye(n)]); h = np.concatenate([np.zeros(n), C*np.ones(n)])
    r = solvers.qp(matrix(Q), matrix(-np.ones(n)), matrix(G), matrix(h), matrix(y[None,:]), matrix(0.0))
    x = np.array(r['x']).ravel()
    print(kind, g, C, repr(prob.value), repr(0.5*x@Q@x - x.sum()), int((y>0).sum()), int(((x>1e-6)&(x<C-1e-6)).sum()), int((x>=C-1e-6).sum()))
