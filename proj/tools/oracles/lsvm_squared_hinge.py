import math, cvxpy as cp, numpy as np
n, p = 50, 4
X = np.array([[math.sin(0.37*(i+1)*(j+1)) + 0.5*math.cos(1.3*(i+1)+j) for j in range(p)] for i in range(n)])
y = np.array([1.0 if X[i,0] + 0.5*X[i,1] - 0.3*X[i,2] + 0.2*math.sin(5*i) > 0 else -1.0 for i in range(n)])
for C in (1.0, 0.1, 10.0):
    w = cp.Variable(p); b = cp.Variable()
    slack = cp.pos(1 - cp.multiply(y, X @ w + b))
    obj = 0.5*(cp.sum_squares(w) + cp.square(b)) + C*cp.sum_squares(slack)
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    print(C, repr(prob.value), int((y>0).sum()))

from scipy.optimize import minimize
def f(v, C):
    w, b = v[:p], v[p]
    s = np.maximum(0, 1 - y*(X@w + b))
    g_s = -2*C*s*y
    return 0.5*(w@w + b*b) + C*(s@s), np.concatenate([w + X.T@g_s, [b + g_s.sum()]])
for C in (1.0, 0.1, 10.0):
    r = minimize(f, np.zeros(p+1), args=(C,), jac=True, method='L-BFGS-B', options={'ftol':1e-15,'gtol':1e-12,'maxiter':100000})
    print('lbfgs', C, repr(r.fun), np.abs(r.jac).max())
