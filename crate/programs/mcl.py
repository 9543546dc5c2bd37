(O, n, M) = loadData()     # M: n*n matrix of edge weights, O: list of nodes
(r, iter) = loadParams()   # Hadamard power, number of iterations

for it in range(0,iter):
  N = [None] * n           # expansion
  for i in range(0,n):
    N[i] = [None] * n
    for j in range(0,n):
      N[i][j] = reduce_sum([M[i][k]*M[k][j] for k in range(0,n)])

  M = [None] * n           # inflation
  for i in range(0,n):
    M[i] = [None] * n
    for j in range(0,n):
      M[i][j] = pow(N[i][j],r)*invert(
        reduce_sum([pow(N[i][k],r) for k in range(0,n)]))
