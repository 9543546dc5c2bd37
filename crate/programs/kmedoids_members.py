(O, n) = loadData()        # list and number of objects
(k, iter) = loadParams()   # number of clusters and iterations
M = init()                 # initialise medoids

for it in range(0,iter):   # clustering iterations
  InCl = [None] * k        # assignment phase
  for i in range(0,k):
    InCl[i] = [None] * n
    for l in range(0,n):
      InCl[i][l] = reduce_and(
        [(dist(O[l],M[i]) <= dist(O[l],M[j])) for j in range(0,k)])
  InCl = breakTies2(InCl)  # each object is in exactly one cluster

  DistSum = [None] * k     # update phase
  for i in range(0,k):
    DistSum[i] = [None] * n
    for l in range(0,n):
      DistSum[i][l] = reduce_sum(
        [dist(O[l],O[p]) for p in range(0,n) if InCl[i][p]])

  Centre = [None] * k
  for i in range(0,k):
    Centre[i] = [None] * n
    for l in range(0,n):
      Centre[i][l] = InCl[i][l] * reduce_and(
        [DistSum[i][l] <= DistSum[i][p] for p in range(0,n)])
  Centre = breakTies1(Centre)  # one medoid per cluster

  M = [None] * k
  for i in range(0,k):
    M[i] = reduce_sum([O[l] for l in range(0,n) if Centre[i][l]])
