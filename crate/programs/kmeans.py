(O, n) = loadData()        # list and number of objects
(k, iter) = loadParams()   # number of clusters and iterations
M = init()                 # initialise centroids

for it in range(0,iter):   # clustering iterations
  InCl = [None] * k        # assignment phase
  for i in range(0,k):
    InCl[i] = [None] * n
    for l in range(0,n):
      InCl[i][l] = reduce_and(
        [dist(O[l],M[i]) <= dist(O[l],M[j]) for j in range(0,k)])
  InCl = breakTies2(InCl)  # each object is in exactly one cluster

  M = [None] * k           # update phase
  for i in range(0,k):
    M[i] = scalar_mult(invert(
      reduce_count([1 for l in range(0,n) if InCl[i][l]])),
      reduce_sum([O[l] for l in range(0,n) if InCl[i][l]]))
